#include "lunatrn/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace lunatrn {

namespace {

using nlohmann::json;

json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    try {
        return json::parse(in, nullptr, true, true);  // allow comments
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

double get_positive(const json& j, const char* key, double fallback) {
    const double v = get_or<double>(j, key, fallback);
    if (!(v > 0.0)) throw ConfigError(std::string("config key '") + key + "' must be positive");
    return v;
}

BrightnessResponse response_from_json(const json& j, const std::string& profile) {
    BrightnessResponse r;
    if (!j.contains("offset")) {
        throw ConfigError("profile '" + profile + "': brightness_response entry missing 'offset'");
    }
    r.offset = j.at("offset").get<double>();
    r.p_detect_new = get_or<double>(j, "p_detect_new", 1.0);
    r.p_redetect = get_or<double>(j, "p_redetect", 1.0);
    r.center_noise = get_or<double>(j, "center_noise", 1.0);
    r.diameter_noise = get_or<double>(j, "diameter_noise", 1.0);
    r.false_rate = get_or<double>(j, "false_rate", 1.0);
    r.mismatch_rate = get_or<double>(j, "mismatch_rate", 1.0);
    r.mismatch_radius = get_or<double>(j, "mismatch_radius", 1.0);
    return r;
}

DetectorProfile profile_from_json(const std::string& name, const json& j) {
    DetectorProfile p;
    p.name = name;
    p.p_detect_new = get_or<double>(j, "p_detect_new", 1.0);
    p.p_redetect = get_or<double>(j, "p_redetect", 1.0);
    p.center_noise_px = get_or<double>(j, "center_noise_px", 0.0);
    p.diameter_noise_rel = get_or<double>(j, "diameter_noise_rel", 0.0);
    p.false_rate = get_or<double>(j, "false_rate", 0.0);
    p.mismatch_rate = get_or<double>(j, "mismatch_rate", 0.0);
    p.mismatch_radius_px = get_or<double>(j, "mismatch_radius_px", 12.0);
    if (j.contains("brightness_response")) {
        for (const auto& entry : j.at("brightness_response")) {
            p.brightness_response.push_back(response_from_json(entry, name));
        }
    }
    p.validate();
    return p;
}

json profile_to_json(const DetectorProfile& p) {
    json j;
    j["p_detect_new"] = p.p_detect_new;
    j["p_redetect"] = p.p_redetect;
    j["center_noise_px"] = p.center_noise_px;
    j["diameter_noise_rel"] = p.diameter_noise_rel;
    j["false_rate"] = p.false_rate;
    j["mismatch_rate"] = p.mismatch_rate;
    j["mismatch_radius_px"] = p.mismatch_radius_px;
    json responses = json::array();
    for (const auto& r : p.brightness_response) {
        json e;
        e["offset"] = r.offset;
        e["p_detect_new"] = r.p_detect_new;
        e["p_redetect"] = r.p_redetect;
        e["center_noise"] = r.center_noise;
        e["diameter_noise"] = r.diameter_noise;
        e["false_rate"] = r.false_rate;
        e["mismatch_rate"] = r.mismatch_rate;
        e["mismatch_radius"] = r.mismatch_radius;
        responses.push_back(e);
    }
    j["brightness_response"] = responses;
    return j;
}

std::map<std::string, DetectorProfile> profiles_from_json(const json& j) {
    std::map<std::string, DetectorProfile> out;
    for (const auto& [name, body] : j.items()) {
        out[name] = profile_from_json(name, body);
    }
    return out;
}

std::string resolve_relative(const std::string& base_file, const std::string& path) {
    const std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(base_file).parent_path() / p).string();
}

}  // namespace

std::map<std::string, DetectorProfile> load_profiles(const std::string& path) {
    return profiles_from_json(parse_file(path));
}

RunConfig load_run_config(const std::string& path) {
    json j = parse_file(path);
    if (j.contains("config")) {
        j = j.at("config");  // manifest wrapper
    }

    RunConfig cfg;
    cfg.trials = get_or<int>(j, "trials", cfg.trials);
    if (cfg.trials < 1) throw ConfigError("config key 'trials' must be >= 1");
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    cfg.duration_s = get_positive(j, "duration_s", cfg.duration_s);
    cfg.dt_s = get_positive(j, "dt_s", cfg.dt_s);
    cfg.imu_accel_noise_mps2 = get_or<double>(j, "imu_accel_noise_mps2", cfg.imu_accel_noise_mps2);
    if (cfg.imu_accel_noise_mps2 < 0.0) {
        throw ConfigError("config key 'imu_accel_noise_mps2' must be >= 0");
    }
    cfg.brightness = get_or<double>(j, "brightness", cfg.brightness);
    cfg.bail_out_m = get_positive(j, "bail_out_m", cfg.bail_out_m);
    cfg.include_divergent = get_or<bool>(j, "include_divergent", cfg.include_divergent);
    cfg.profile_name = get_or<std::string>(j, "profile", cfg.profile_name);
    cfg.profiles_file = get_or<std::string>(j, "profiles_file", cfg.profiles_file);

    if (j.contains("compare")) {
        const json& c = j.at("compare");
        cfg.compare_profile_names =
            get_or<std::vector<std::string>>(c, "profiles", cfg.compare_profile_names);
        cfg.compare_brightness = get_or<std::vector<double>>(c, "brightness", cfg.compare_brightness);
        cfg.compare_trials = get_or<int>(c, "trials", cfg.compare_trials);
        if (cfg.compare_trials < 1) throw ConfigError("config key 'compare.trials' must be >= 1");
    }

    if (j.contains("orbit")) {
        const json& o = j.at("orbit");
        cfg.orbit.altitude_m = get_positive(o, "altitude_m", cfg.orbit.altitude_m);
        cfg.orbit.start_lat_rad = deg2rad(get_or<double>(o, "start_lat_deg", 0.0));
        cfg.orbit.start_lon_rad = deg2rad(get_or<double>(o, "start_lon_deg", 0.0));
        cfg.orbit.heading_rad = deg2rad(get_or<double>(o, "heading_deg", 90.0));
        cfg.orbit.lon_spread_rad =
            deg2rad(get_or<double>(o, "lon_spread_deg", rad2deg(cfg.orbit.lon_spread_rad)));
        cfg.orbit.heading_spread_rad =
            deg2rad(get_or<double>(o, "heading_spread_deg", rad2deg(cfg.orbit.heading_spread_rad)));
    }

    if (j.contains("camera")) {
        const json& c = j.at("camera");
        cfg.camera.focal_px = get_positive(c, "focal_px", cfg.camera.focal_px);
        cfg.camera.width_px = get_or<int>(c, "width_px", cfg.camera.width_px);
        cfg.camera.height_px = get_or<int>(c, "height_px", cfg.camera.height_px);
        cfg.camera.cx = get_or<double>(c, "cx", cfg.camera.width_px / 2.0);
        cfg.camera.cy = get_or<double>(c, "cy", cfg.camera.height_px / 2.0);
        cfg.camera.validate();
    }

    if (j.contains("filter")) {
        const json& f = j.at("filter");
        cfg.filter.accel_noise_mps2 = get_positive(f, "accel_noise_mps2", cfg.filter.accel_noise_mps2);
        cfg.filter.init_vel_std_mps = get_positive(f, "init_vel_std_mps", cfg.filter.init_vel_std_mps);
        cfg.filter.init_pos_std_m = get_positive(f, "init_pos_std_m", cfg.filter.init_pos_std_m);
        cfg.filter.feature_std_m = get_positive(f, "feature_std_m", cfg.filter.feature_std_m);
    }

    if (j.contains("match")) {
        const json& m = j.at("match");
        cfg.match_gate_frac = get_positive(m, "gate_frac", cfg.match_gate_frac);
        cfg.match.cost_weight = get_or<double>(m, "cost_weight", cfg.match.cost_weight);
        cfg.match.ransac_tol_px = get_positive(m, "ransac_tol_px", cfg.match.ransac_tol_px);
        cfg.match.ransac_min_pairs = get_or<int>(m, "ransac_min_pairs", cfg.match.ransac_min_pairs);
        cfg.match.ransac_iterations = get_or<int>(m, "ransac_iterations", cfg.match.ransac_iterations);
        if (cfg.match.ransac_iterations < 1) {
            throw ConfigError("config key 'match.ransac_iterations' must be >= 1");
        }
        cfg.match.use_affine = get_or<bool>(m, "use_affine", cfg.match.use_affine);
        cfg.match.footprint_margin = get_or<double>(m, "footprint_margin", cfg.match.footprint_margin);
        cfg.match.diameters.min_m = 1000.0 * get_or<double>(m, "diam_min_km", 5.0);
        if (m.contains("diam_max_km")) {
            cfg.match.diameters.max_m = 1000.0 * m.at("diam_max_km").get<double>();
        }
    }
    cfg.match.gate_px = cfg.match_gate_frac * cfg.camera.width_px;

    if (j.contains("catalog")) {
        const json& c = j.at("catalog");
        if (c.contains("path")) {
            cfg.catalog.path = c.at("path").get<std::string>();
            if (!cfg.catalog.path.empty()) {
                cfg.catalog.path = resolve_relative(path, cfg.catalog.path);
            }
        }
        if (c.contains("synthetic")) {
            const json& s = c.at("synthetic");
            auto& syn = cfg.catalog.synthetic;
            syn.seed = get_or<std::uint64_t>(s, "seed", syn.seed);
            syn.count = get_or<int>(s, "count", syn.count);
            syn.lat_min_rad = deg2rad(get_or<double>(s, "lat_min_deg", rad2deg(syn.lat_min_rad)));
            syn.lat_max_rad = deg2rad(get_or<double>(s, "lat_max_deg", rad2deg(syn.lat_max_rad)));
            syn.lon_min_rad = deg2rad(get_or<double>(s, "lon_min_deg", rad2deg(syn.lon_min_rad)));
            syn.lon_max_rad = deg2rad(get_or<double>(s, "lon_max_deg", rad2deg(syn.lon_max_rad)));
            syn.diam_min_m = 1000.0 * get_or<double>(s, "diam_min_km", syn.diam_min_m / 1000.0);
            syn.diam_max_m = 1000.0 * get_or<double>(s, "diam_max_km", syn.diam_max_m / 1000.0);
        }
    }

    if (j.contains("profiles")) {
        cfg.profiles = profiles_from_json(j.at("profiles"));
    } else {
        cfg.profiles = load_profiles(resolve_relative(path, cfg.profiles_file));
    }
    return cfg;
}

const DetectorProfile& select_profile(const RunConfig& cfg, const std::string& name) {
    const auto it = cfg.profiles.find(name);
    if (it == cfg.profiles.end()) {
        throw ConfigError("config key 'profile': unknown profile '" + name + "'");
    }
    return it->second;
}

CraterCatalog build_catalog(const CatalogConfig& cfg) {
    if (cfg.is_synthetic()) {
        return make_synthetic_catalog(cfg.synthetic);
    }
    return load_catalog(cfg.path);
}

sim::TrialConfig build_trial_config(const RunConfig& cfg, const DetectorProfile& profile,
                                    double brightness, const CraterCatalog* catalog) {
    sim::TrialConfig tc;
    tc.duration_s = cfg.duration_s;
    tc.dt_s = cfg.dt_s;
    tc.imu_accel_noise_mps2 = cfg.imu_accel_noise_mps2;
    tc.brightness = brightness;
    tc.seed = cfg.seed;
    tc.bail_out_m = cfg.bail_out_m;
    tc.orbit = cfg.orbit;
    tc.camera = cfg.camera;
    tc.filter = cfg.filter;
    tc.match = cfg.match;
    tc.profile = profile;
    tc.catalog = catalog;
    // Unit-vector measurement noise follows the detector's center noise at
    // this brightness, floored at half a pixel.
    tc.filter.meas_noise_std =
        std::max(profile.at_brightness(brightness).center_noise_px, 0.5) / cfg.camera.focal_px;
    return tc;
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["trials"] = cfg.trials;
    j["seed"] = cfg.seed;
    j["duration_s"] = cfg.duration_s;
    j["dt_s"] = cfg.dt_s;
    j["imu_accel_noise_mps2"] = cfg.imu_accel_noise_mps2;
    j["brightness"] = cfg.brightness;
    j["bail_out_m"] = cfg.bail_out_m;
    j["include_divergent"] = cfg.include_divergent;
    j["profile"] = cfg.profile_name;

    json compare;
    compare["profiles"] = cfg.compare_profile_names;
    compare["brightness"] = cfg.compare_brightness;
    compare["trials"] = cfg.compare_trials;
    j["compare"] = compare;

    json orbit;
    orbit["altitude_m"] = cfg.orbit.altitude_m;
    orbit["start_lat_deg"] = rad2deg(cfg.orbit.start_lat_rad);
    orbit["start_lon_deg"] = rad2deg(cfg.orbit.start_lon_rad);
    orbit["heading_deg"] = rad2deg(cfg.orbit.heading_rad);
    orbit["lon_spread_deg"] = rad2deg(cfg.orbit.lon_spread_rad);
    orbit["heading_spread_deg"] = rad2deg(cfg.orbit.heading_spread_rad);
    j["orbit"] = orbit;

    json camera;
    camera["focal_px"] = cfg.camera.focal_px;
    camera["width_px"] = cfg.camera.width_px;
    camera["height_px"] = cfg.camera.height_px;
    camera["cx"] = cfg.camera.cx;
    camera["cy"] = cfg.camera.cy;
    j["camera"] = camera;

    json filter;
    filter["accel_noise_mps2"] = cfg.filter.accel_noise_mps2;
    filter["init_vel_std_mps"] = cfg.filter.init_vel_std_mps;
    filter["init_pos_std_m"] = cfg.filter.init_pos_std_m;
    filter["feature_std_m"] = cfg.filter.feature_std_m;
    j["filter"] = filter;

    json match;
    match["gate_frac"] = cfg.match_gate_frac;
    match["cost_weight"] = cfg.match.cost_weight;
    match["ransac_tol_px"] = cfg.match.ransac_tol_px;
    match["ransac_min_pairs"] = cfg.match.ransac_min_pairs;
    match["ransac_iterations"] = cfg.match.ransac_iterations;
    match["use_affine"] = cfg.match.use_affine;
    match["footprint_margin"] = cfg.match.footprint_margin;
    match["diam_min_km"] = cfg.match.diameters.min_m / 1000.0;
    if (std::isfinite(cfg.match.diameters.max_m)) {
        match["diam_max_km"] = cfg.match.diameters.max_m / 1000.0;
    }
    j["match"] = match;

    json catalog;
    if (cfg.catalog.is_synthetic()) {
        json syn;
        syn["seed"] = cfg.catalog.synthetic.seed;
        syn["count"] = cfg.catalog.synthetic.count;
        syn["lat_min_deg"] = rad2deg(cfg.catalog.synthetic.lat_min_rad);
        syn["lat_max_deg"] = rad2deg(cfg.catalog.synthetic.lat_max_rad);
        syn["lon_min_deg"] = rad2deg(cfg.catalog.synthetic.lon_min_rad);
        syn["lon_max_deg"] = rad2deg(cfg.catalog.synthetic.lon_max_rad);
        syn["diam_min_km"] = cfg.catalog.synthetic.diam_min_m / 1000.0;
        syn["diam_max_km"] = cfg.catalog.synthetic.diam_max_m / 1000.0;
        catalog["synthetic"] = syn;
    } else {
        catalog["path"] = cfg.catalog.path;
    }
    j["catalog"] = catalog;

    json profiles;
    for (const auto& [name, p] : cfg.profiles) {
        profiles[name] = profile_to_json(p);
    }
    j["profiles"] = profiles;

    return j.dump(2);
}

void write_manifest(const RunConfig& cfg, const std::string& command,
                    std::uint64_t catalog_checksum,
                    const std::map<std::string, std::string>& outputs,
                    const std::string& path) {
    json j;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["command"] = command;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                  static_cast<unsigned long long>(catalog_checksum));
    j["catalog_checksum"] = buf;
    json outs;
    for (const auto& [key, value] : outputs) outs[key] = value;
    j["outputs"] = outs;
    j["config"] = json::parse(run_config_to_json(cfg));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest '" + path + "'");
    out << j.dump(2) << "\n";
    if (!out) throw IoError("error writing manifest '" + path + "'");
}

}  // namespace lunatrn
