#pragma once

#include "lunatrn/geometry.hpp"
#include "lunatrn/types.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace lunatrn {

/// Catalogued crater from one of the merged databases.
struct CraterRecord {
    enum class Source { small_db, large_db };

    std::string id;
    Geodetic center;       // surface point, radius = body radius
    double diameter_m = 0.0;
    Source source = Source::small_db;
};

/// Diameter filter [min, max], inclusive. Defaults mirror the union of the
/// 5-20 km and >20 km source databases.
struct DiameterRange {
    double min_m = 5'000.0;
    double max_m = std::numeric_limits<double>::infinity();

    bool contains(double d) const { return d >= min_m && d <= max_m; }
};

/// Immutable crater database with a lat/lon grid index. Records are kept
/// sorted by id; queries return id-ordered results identical to a
/// brute-force scan.
class CraterCatalog {
  public:
    CraterCatalog() = default;
    explicit CraterCatalog(std::vector<CraterRecord> records);

    const std::vector<CraterRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    /// Records whose center lies in `box` (inclusive) with diameter in
    /// `range` (inclusive), ordered by id.
    std::vector<CraterRecord> query_box(const LatLonBox& box,
                                        const DiameterRange& range = {}) const;

  private:
    static constexpr int kLatBins = 64;
    static constexpr int kLonBins = 128;

    int lat_bin(double lat) const;
    int lon_bin(double lon) const;

    std::vector<CraterRecord> records_;  // sorted by id
    std::vector<std::vector<std::uint32_t>> grid_;  // kLatBins * kLonBins cells
};

/// Parse a catalog file. UTF-8, comma-delimited, header row
/// `id,lat_deg,lon_deg,diameter_km`, `#` comment lines ignored.
/// Throws IoError naming the offending line on malformed rows, duplicate
/// ids, or a missing file.
CraterCatalog load_catalog(const std::string& path);

/// Union of two catalogs. Throws Error listing any colliding ids.
CraterCatalog merge(const CraterCatalog& a, const CraterCatalog& b);

/// Parameters for the self-contained synthetic catalog generator.
struct SyntheticCatalogParams {
    std::uint64_t seed = 42;
    int count = 60;
    double lat_min_rad = deg2rad(-5.0);
    double lat_max_rad = deg2rad(5.0);
    double lon_min_rad = deg2rad(-3.0);
    double lon_max_rad = deg2rad(31.0);
    double diam_min_m = 5'000.0;
    double diam_max_m = 60'000.0;
};

/// Uniform random craters over a lat/lon box (area-uniform in latitude),
/// diameters uniform over [diam_min, diam_max].
CraterCatalog make_synthetic_catalog(const SyntheticCatalogParams& params);

/// FNV-1a 64-bit digest of a byte stream; used to fingerprint catalog
/// inputs in run manifests.
std::uint64_t fnv1a64(const void* data, std::size_t len);

/// Fingerprint of a catalog's full record content (id, position, diameter).
std::uint64_t catalog_checksum(const CraterCatalog& cat);

}  // namespace lunatrn
