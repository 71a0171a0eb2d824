#include "lunatrn/config.hpp"
#include "lunatrn/detect.hpp"
#include "lunatrn/sim.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace lunatrn;

struct CommonOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<int> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> profile;
    std::optional<double> brightness;
    std::optional<std::string> catalog_path;
};

RunConfig load_with_overrides(const CommonOptions& opts) {
    RunConfig cfg = load_run_config(opts.config_path);
    if (opts.trials) {
        if (*opts.trials < 1) throw ConfigError("config key 'trials' must be >= 1");
        cfg.trials = *opts.trials;
        cfg.compare_trials = *opts.trials;
    }
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.profile) cfg.profile_name = *opts.profile;
    if (opts.brightness) cfg.brightness = *opts.brightness;
    if (opts.catalog_path) cfg.catalog.path = *opts.catalog_path;
    return cfg;
}

int cmd_run(const CommonOptions& opts) {
    RunConfig cfg = load_with_overrides(opts);
    const CraterCatalog catalog = build_catalog(cfg.catalog);
    const std::uint64_t checksum = catalog_checksum(catalog);
    const DetectorProfile& profile = select_profile(cfg, cfg.profile_name);

    const sim::TrialConfig tc = build_trial_config(cfg, profile, cfg.brightness, &catalog);
    std::vector<sim::TrialResult> trials;
    const sim::McSummary summary = sim::monte_carlo(tc, cfg.trials, cfg.include_divergent, &trials);

    std::filesystem::create_directories(opts.out_dir);
    const std::string steps_path = opts.out_dir + "/steps.csv";
    const std::string summary_path = opts.out_dir + "/summary.csv";
    sim::write_steps_csv(trials, steps_path);
    sim::write_summary_csv({summary}, summary_path);
    write_manifest(cfg, "run", checksum,
                   {{"steps_csv", "steps.csv"}, {"summary_csv", "summary.csv"}},
                   opts.out_dir + "/manifest.json");

    std::cout << "profile=" << summary.profile << " trials=" << summary.trials
              << " diverged=" << summary.diverged
              << " final_pos_err_mean_m=" << summary.final_pos_err_mean_m
              << " final_vel_err_mean_mps=" << summary.final_vel_err_mean_mps << "\n";
    if (summary.diverged == summary.trials) {
        std::cerr << "lunatrn: all trials diverged\n";
        return 3;
    }
    return 0;
}

int cmd_compare(const CommonOptions& opts) {
    RunConfig cfg = load_with_overrides(opts);
    const CraterCatalog catalog = build_catalog(cfg.catalog);
    const std::uint64_t checksum = catalog_checksum(catalog);

    std::vector<DetectorProfile> profiles;
    for (const auto& name : cfg.compare_profile_names) {
        profiles.push_back(select_profile(cfg, name));
    }
    const sim::TrialConfig tc =
        build_trial_config(cfg, profiles.front(), cfg.brightness, &catalog);
    const auto summaries = sim::compare_profiles(tc, profiles, cfg.compare_brightness,
                                                 cfg.compare_trials, cfg.include_divergent);

    std::filesystem::create_directories(opts.out_dir);
    const std::string summary_path = opts.out_dir + "/compare_summary.csv";
    sim::write_summary_csv(summaries, summary_path);
    write_manifest(cfg, "compare", checksum, {{"summary_csv", "compare_summary.csv"}},
                   opts.out_dir + "/manifest.json");

    for (const auto& s : summaries) {
        std::cout << s.profile << " brightness=" << s.brightness << " trials=" << s.trials
                  << " final_pos_err_mean_m=" << s.final_pos_err_mean_m << "\n";
    }
    bool all_diverged = true;
    for (const auto& s : summaries) {
        if (s.diverged != s.trials) all_diverged = false;
    }
    return all_diverged ? 3 : 0;
}

int cmd_detect(const std::string& mask_path) {
    const PredictionMask mask = read_pgm(mask_path);
    for (const auto& det : detect_from_mask(mask)) {
        std::printf("%.9g,%.9g,%.9g,%.9g,%.9g\n", det.center.x(), det.center.y(),
                    det.major_axis, det.minor_axis, det.orientation);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lunar terrain-relative-navigation toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", lunatrn::kToolVersion);

    CommonOptions opts;
    std::string mask_path;

    auto add_common = [&opts](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "Run configuration JSON (or a manifest)")
            ->required();
        cmd->add_option("--out", opts.out_dir, "Output directory");
        cmd->add_option("--trials", opts.trials, "Override the trial count");
        cmd->add_option("--seed", opts.seed, "Override the master seed");
        cmd->add_option("--profile", opts.profile, "Override the detector profile name");
        cmd->add_option("--brightness", opts.brightness, "Override the brightness offset");
        cmd->add_option("--catalog", opts.catalog_path, "Override the catalog CSV path");
    };

    CLI::App* run = app.add_subcommand("run", "Run a Monte-Carlo batch of closed-loop trials");
    add_common(run);
    CLI::App* compare =
        app.add_subcommand("compare", "Run the profile x brightness comparison grid");
    add_common(compare);
    CLI::App* detect = app.add_subcommand("detect", "Run the mask pipeline on a PGM rim mask");
    detect->add_option("mask", mask_path, "Binary (P5) PGM prediction mask")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) return cmd_run(opts);
        if (compare->parsed()) return cmd_compare(opts);
        if (detect->parsed()) return cmd_detect(mask_path);
    } catch (const lunatrn::ConfigError& e) {
        std::cerr << "lunatrn: config error: " << e.what() << "\n";
        return 1;
    } catch (const lunatrn::IoError& e) {
        std::cerr << "lunatrn: i/o error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "lunatrn: error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
