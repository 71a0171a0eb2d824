#pragma once

#include "lunatrn/catalog.hpp"
#include "lunatrn/geometry.hpp"
#include "lunatrn/rng.hpp"
#include "lunatrn/types.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lunatrn {

/// Grayscale rim-prediction image, 8-bit, row-major.
struct PredictionMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // width * height

    PredictionMask() = default;
    PredictionMask(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
        if (w <= 0 || h <= 0) throw Error("PredictionMask: dimensions must be positive");
    }

    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

/// Elliptical crater detection in image coordinates. Axis lengths are full
/// axes (a circle of radius r has major_axis == minor_axis == 2r).
struct DetectedCrater {
    Vec2 center = Vec2::Zero();   // (u, v) pixels
    double major_axis = 0.0;      // px
    double minor_axis = 0.0;      // px
    double orientation = 0.0;     // radians, major-axis direction

    double mean_diameter() const { return 0.5 * (major_axis + minor_axis); }
};

struct PixelCoord {
    int x = 0;
    int y = 0;
};

// ---------------------------------------------------------------------------
// Post-CNN mask pipeline
// ---------------------------------------------------------------------------

/// Certainty threshold: a pixel survives iff intensity/255 > certainty.
/// Output pixels are exactly 0 or 255. Idempotent on binary masks.
PredictionMask threshold_mask(const PredictionMask& m, double certainty = 0.90);

/// Morphological thinning (Zhang-Suen) of a binary mask down to 1-px-wide
/// curves; connected-component count is preserved.
PredictionMask erode_to_rims(const PredictionMask& binary);

/// 8-connected components of a skeleton mask as pixel chains, discarding
/// components with fewer than `min_pixels` pixels.
std::vector<std::vector<PixelCoord>> extract_contours(const PredictionMask& skeleton,
                                                      int min_pixels = 3);

/// Direct least-squares ellipse fit per chain. Chains shorter than 5 px are
/// skipped (a conic needs 5 points); fits rounder than `min_axis_ratio`
/// (minor/major) are kept, the rest rejected.
std::vector<DetectedCrater> fit_ellipses(const std::vector<std::vector<PixelCoord>>& chains,
                                         double min_axis_ratio = 0.85);

/// Full pipeline: threshold -> thin -> contours -> ellipse fit.
std::vector<DetectedCrater> detect_from_mask(const PredictionMask& m);

/// Test/demo generator: draw annular rings (centers/radii in px) at the
/// given intensity on a black background. Throws Error when a ring's
/// center-circle leaves the image.
struct RingSpec {
    Vec2 center = Vec2::Zero();
    double radius_px = 0.0;
};
PredictionMask render_rim_mask(const std::vector<RingSpec>& rings, int width, int height,
                               double thickness_px = 2.0, std::uint8_t intensity = 255);

/// Fit a single pixel chain; nullopt when the conic is degenerate or not an
/// ellipse. Exposed for tests.
std::optional<DetectedCrater> fit_ellipse_chain(const std::vector<PixelCoord>& chain);

// ---------------------------------------------------------------------------
// PGM I/O (binary P5), used for fixtures and debugging dumps
// ---------------------------------------------------------------------------

PredictionMask read_pgm(const std::string& path);
void write_pgm(const PredictionMask& m, const std::string& path);

// ---------------------------------------------------------------------------
// Statistical detector simulator
// ---------------------------------------------------------------------------

/// Multipliers applied to the base profile at one brightness offset.
struct BrightnessResponse {
    double offset = 0.0;
    double p_detect_new = 1.0;
    double p_redetect = 1.0;
    double center_noise = 1.0;
    double diameter_noise = 1.0;
    double false_rate = 1.0;
    double mismatch_rate = 1.0;
    double mismatch_radius = 1.0;
};

/// Base detection-behaviour parameters after brightness scaling.
struct EffectiveProfile {
    double p_detect_new = 1.0;
    double p_redetect = 1.0;
    double center_noise_px = 0.0;
    double diameter_noise_rel = 0.0;
    double false_rate = 0.0;
    double mismatch_rate = 0.0;
    double mismatch_radius_px = 12.0;
};

/// Statistical abstraction of a crater detector's behaviour: per-frame
/// detection and re-detection probabilities, measurement noise, and a
/// false-detection process. Calibration constants live in the profiles
/// config file, not in code.
struct DetectorProfile {
    std::string name;
    double p_detect_new = 1.0;
    double p_redetect = 1.0;
    double center_noise_px = 0.0;
    double diameter_noise_rel = 0.0;
    double false_rate = 0.0;        // expected false detections per frame
    double mismatch_rate = 0.0;     // P(false detection lands near a wrong crater)
    double mismatch_radius_px = 12.0;
    std::vector<BrightnessResponse> brightness_response;

    void validate() const;

    /// Profile with the response for `offset` applied (probabilities
    /// clamped to [0,1]). Throws ConfigError for an offset with no entry.
    EffectiveProfile at_brightness(double offset) const;
};

/// A catalog crater with its ground-truth projection into the image.
struct VisibleCrater {
    CraterRecord record;
    Vec2 center_px = Vec2::Zero();
    double diameter_px = 0.0;
};

/// Simulator output: a detection plus the id of the crater that produced
/// it (nullopt for false detections).
struct SimulatedDetection {
    DetectedCrater det;
    std::optional<std::string> true_id;
};

/// One frame of simulated detections. Visible craters are emitted with
/// probability p_redetect (id in tracked_ids) or p_detect_new, perturbed
/// by the profile noise; Poisson(false_rate) false detections are added,
/// each placed near a wrong catalog crater with probability mismatch_rate
/// and uniformly in the image otherwise. Deterministic given the rng state.
std::vector<SimulatedDetection> simulate_detections(const std::vector<VisibleCrater>& visible,
                                                    const std::set<std::string>& tracked_ids,
                                                    const DetectorProfile& profile,
                                                    double brightness, Rng& rng,
                                                    const CameraModel& cam);

}  // namespace lunatrn
