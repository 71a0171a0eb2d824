#include "lunatrn/catalog.hpp"

#include "lunatrn/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace lunatrn {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& field, const std::string& path, int line,
                    const char* what) {
    const std::string t = trim(field);
    double value = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), value);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
        throw IoError(path + ":" + std::to_string(line) + ": cannot parse " +
                      what + " from '" + field + "'");
    }
    return value;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

}  // namespace

CraterCatalog::CraterCatalog(std::vector<CraterRecord> records)
    : records_(std::move(records)) {
    std::sort(records_.begin(), records_.end(),
              [](const CraterRecord& a, const CraterRecord& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < records_.size(); ++i) {
        if (records_[i].id == records_[i - 1].id) {
            throw Error("CraterCatalog: duplicate crater id '" + records_[i].id + "'");
        }
    }
    grid_.assign(static_cast<std::size_t>(kLatBins) * kLonBins, {});
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& g = records_[i].center;
        const std::size_t cell = static_cast<std::size_t>(lat_bin(g.lat)) * kLonBins + lon_bin(g.lon);
        grid_[cell].push_back(static_cast<std::uint32_t>(i));
    }
}

int CraterCatalog::lat_bin(double lat) const {
    const double f = (lat + constants::kPi / 2.0) / constants::kPi;
    return std::clamp(static_cast<int>(f * kLatBins), 0, kLatBins - 1);
}

int CraterCatalog::lon_bin(double lon) const {
    const double f = (wrap_longitude(lon) + constants::kPi) / (2.0 * constants::kPi);
    return std::clamp(static_cast<int>(f * kLonBins), 0, kLonBins - 1);
}

std::vector<CraterRecord> CraterCatalog::query_box(const LatLonBox& box,
                                                   const DiameterRange& range) const {
    std::vector<CraterRecord> out;
    if (records_.empty() || box.lat_min > box.lat_max) return out;

    const int lat_lo = lat_bin(box.lat_min);
    const int lat_hi = lat_bin(box.lat_max);

    // Longitude bins, walking eastward and wrapping; one extra bin on each
    // end so boundary records in neighbouring cells are not missed.
    std::vector<int> lon_bins;
    const int b_lo = lon_bin(box.lon_min);
    const int b_hi = lon_bin(box.lon_max);
    const int span = (b_hi - b_lo + kLonBins) % kLonBins + 1;
    const int total = std::min(span + 2, kLonBins);
    int b = (b_lo - 1 + kLonBins) % kLonBins;
    for (int n = 0; n < total; ++n) {
        lon_bins.push_back(b);
        b = (b + 1) % kLonBins;
    }

    std::vector<std::uint32_t> hits;
    for (int lb = std::max(lat_lo - 1, 0); lb <= std::min(lat_hi + 1, kLatBins - 1); ++lb) {
        for (int cb : lon_bins) {
            const auto& cell = grid_[static_cast<std::size_t>(lb) * kLonBins + cb];
            hits.insert(hits.end(), cell.begin(), cell.end());
        }
    }
    std::sort(hits.begin(), hits.end());
    hits.erase(std::unique(hits.begin(), hits.end()), hits.end());

    for (std::uint32_t i : hits) {
        const CraterRecord& r = records_[i];
        if (box.contains(r.center.lat, r.center.lon) && range.contains(r.diameter_m)) {
            out.push_back(r);
        }
    }
    // hits are index-sorted and records_ is id-sorted, so out is id-ordered.
    return out;
}

CraterCatalog load_catalog(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open catalog file '" + path + "'");
    }
    std::vector<CraterRecord> records;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (!header_seen) {
            std::string compact;
            for (char c : t) {
                if (!std::isspace(static_cast<unsigned char>(c))) compact += c;
            }
            if (compact != "id,lat_deg,lon_deg,diameter_km") {
                throw IoError(path + ":" + std::to_string(line_no) +
                              ": expected header 'id,lat_deg,lon_deg,diameter_km'");
            }
            header_seen = true;
            continue;
        }
        const auto fields = split_csv(t);
        if (fields.size() != 4) {
            throw IoError(path + ":" + std::to_string(line_no) + ": expected 4 fields, got " +
                          std::to_string(fields.size()));
        }
        CraterRecord rec;
        rec.id = trim(fields[0]);
        if (rec.id.empty()) {
            throw IoError(path + ":" + std::to_string(line_no) + ": empty crater id");
        }
        const double lat_deg = parse_double(fields[1], path, line_no, "lat_deg");
        const double lon_deg = parse_double(fields[2], path, line_no, "lon_deg");
        const double diam_km = parse_double(fields[3], path, line_no, "diameter_km");
        if (lat_deg < -90.0 || lat_deg > 90.0) {
            throw IoError(path + ":" + std::to_string(line_no) + ": lat_deg out of [-90, 90]");
        }
        if (!(diam_km > 0.0)) {
            throw IoError(path + ":" + std::to_string(line_no) + ": diameter_km must be positive");
        }
        rec.center = Geodetic(deg2rad(lat_deg), deg2rad(lon_deg), constants::kMoonRadiusM);
        rec.diameter_m = diam_km * 1000.0;
        rec.source = rec.diameter_m > 20'000.0 ? CraterRecord::Source::large_db
                                               : CraterRecord::Source::small_db;
        records.push_back(std::move(rec));
    }
    try {
        return CraterCatalog(std::move(records));
    } catch (const Error& e) {
        throw IoError(path + ": " + e.what());
    }
}

CraterCatalog merge(const CraterCatalog& a, const CraterCatalog& b) {
    std::set<std::string> ids_a;
    for (const auto& r : a.records()) ids_a.insert(r.id);
    std::string collisions;
    for (const auto& r : b.records()) {
        if (ids_a.count(r.id)) {
            if (!collisions.empty()) collisions += ", ";
            collisions += r.id;
        }
    }
    if (!collisions.empty()) {
        throw Error("merge: id collision between catalogs: " + collisions);
    }
    std::vector<CraterRecord> all = a.records();
    all.insert(all.end(), b.records().begin(), b.records().end());
    return CraterCatalog(std::move(all));
}

CraterCatalog make_synthetic_catalog(const SyntheticCatalogParams& params) {
    if (params.count < 0) throw ConfigError("synthetic catalog: count must be >= 0");
    if (params.lat_min_rad >= params.lat_max_rad) {
        throw ConfigError("synthetic catalog: lat_min_deg must be below lat_max_deg");
    }
    if (!(params.diam_min_m > 0.0) || params.diam_min_m > params.diam_max_m) {
        throw ConfigError("synthetic catalog: bad diameter range");
    }
    Rng rng(params.seed);
    std::vector<CraterRecord> records;
    records.reserve(static_cast<std::size_t>(params.count));
    const double s_lo = std::sin(params.lat_min_rad);
    const double s_hi = std::sin(params.lat_max_rad);
    for (int i = 0; i < params.count; ++i) {
        CraterRecord rec;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "syn-%05d", i);
        rec.id = buf;
        const double lat = std::asin(rng.uniform(s_lo, s_hi));
        const double lon = rng.uniform(params.lon_min_rad, params.lon_max_rad);
        rec.center = Geodetic(lat, lon, constants::kMoonRadiusM);
        rec.diameter_m = rng.uniform(params.diam_min_m, params.diam_max_m);
        rec.source = rec.diameter_m > 20'000.0 ? CraterRecord::Source::large_db
                                               : CraterRecord::Source::small_db;
        records.push_back(std::move(rec));
    }
    return CraterCatalog(std::move(records));
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t catalog_checksum(const CraterCatalog& cat) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t len) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& r : cat.records()) {
        mix(r.id.data(), r.id.size());
        const double vals[4] = {r.center.lat, r.center.lon, r.center.radius, r.diameter_m};
        mix(vals, sizeof(vals));
    }
    return h;
}

}  // namespace lunatrn
