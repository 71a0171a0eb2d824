#pragma once

#include "lunatrn/catalog.hpp"
#include "lunatrn/detect.hpp"
#include "lunatrn/sim.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lunatrn {

inline constexpr const char* kToolName = "lunatrn";
inline constexpr const char* kToolVersion = "0.1.0";

/// Catalog source: a CSV file or the synthetic generator.
struct CatalogConfig {
    std::string path;  // empty -> synthetic
    SyntheticCatalogParams synthetic;

    bool is_synthetic() const { return path.empty(); }
};

/// File-facing run configuration with every default materialized. Angles
/// and sizes use the degree/kilometer units of the JSON schema; conversion
/// to the internal radian/meter types happens in build_trial_config.
struct RunConfig {
    int trials = 100;
    std::uint64_t seed = 1;
    double duration_s = 500.0;
    double dt_s = 2.5;
    double imu_accel_noise_mps2 = 0.1;
    double brightness = 0.0;
    double bail_out_m = 10'000.0;
    bool include_divergent = true;

    std::string profile_name = "lunanet";
    std::string profiles_file = "profiles.json";  // relative to the config file
    std::map<std::string, DetectorProfile> profiles;  // resolved profile set

    std::vector<std::string> compare_profile_names = {"lunanet", "trinary"};
    std::vector<double> compare_brightness = {-0.3, 0.0, 0.3};
    int compare_trials = 20;

    sim::OrbitConfig orbit;
    CameraModel camera = CameraModel::square(256.0, 256);
    ekf::FilterParams filter;

    double match_gate_frac = 0.15;
    MatchParams match;

    CatalogConfig catalog;
};

/// Parse a run config (or a manifest wrapping one) from a JSON file.
/// Profiles referenced by name are resolved from the inline "profiles"
/// object when present, otherwise from "profiles_file" (resolved relative
/// to the config file's directory). Throws ConfigError naming the
/// offending key.
RunConfig load_run_config(const std::string& path);

/// Load a profiles JSON file: an object mapping profile names to profile
/// definitions.
std::map<std::string, DetectorProfile> load_profiles(const std::string& path);

/// The configured detector profile. Throws ConfigError for unknown names.
const DetectorProfile& select_profile(const RunConfig& cfg, const std::string& name);

/// Materialize the catalog named by the config (load or synthesize).
CraterCatalog build_catalog(const CatalogConfig& cfg);

/// Assemble the sim-facing trial template. The measurement noise std is
/// derived from the profile's center noise at the configured brightness.
sim::TrialConfig build_trial_config(const RunConfig& cfg, const DetectorProfile& profile,
                                    double brightness, const CraterCatalog* catalog);

/// Serialize the fully resolved config back to JSON text (used inside
/// manifests; reparsing it reproduces the run bit-exactly).
std::string run_config_to_json(const RunConfig& cfg);

/// Write a run manifest next to the outputs.
void write_manifest(const RunConfig& cfg, const std::string& command,
                    std::uint64_t catalog_checksum,
                    const std::map<std::string, std::string>& outputs,
                    const std::string& path);

}  // namespace lunatrn
