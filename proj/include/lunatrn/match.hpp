#pragma once

#include "lunatrn/catalog.hpp"
#include "lunatrn/detect.hpp"
#include "lunatrn/geometry.hpp"
#include "lunatrn/rng.hpp"

#include <vector>

namespace lunatrn {

/// Catalog crater projected into image coordinates with the current pose
/// estimate.
struct ExpectedCrater {
    CraterRecord record;
    Vec2 center_px = Vec2::Zero();
    double diameter_px = 0.0;
};

/// Accepted pairing of a detection with a catalog record.
struct CraterMatch {
    DetectedCrater detection;
    std::size_t detection_index = 0;  // index into the identify() input list
    CraterRecord record;
    Vec2 translation = Vec2::Zero();  // expected center - detected center, px
    double cost = 0.0;                // LMS pairing cost
    Vec2 expected_center = Vec2::Zero();
};

struct MatchParams {
    double gate_px = 38.4;        // pairing gate on sqrt(cost); 0.15 * image width
    double cost_weight = 1.0;     // weight of the diameter term
    double ransac_tol_px = 5.0;   // translation-consistency inlier tolerance
    int ransac_min_pairs = 3;     // below this, pairs pass with low confidence
    int ransac_iterations = 64;
    bool use_affine = false;      // affine consensus model when pairs >= 6
    double footprint_margin = 0.10;
    DiameterRange diameters;
};

struct MatchDiagnostics {
    std::size_t n_expected = 0;
    std::size_t n_detections = 0;
    std::size_t n_candidates = 0;  // pairs surviving the LMS gate
    std::size_t n_inliers = 0;
    std::size_t n_outliers = 0;
    bool low_confidence = false;
};

/// Candidate pairing before consensus filtering.
struct CandidatePair {
    std::size_t detection_index = 0;
    std::size_t expected_index = 0;
    double cost = 0.0;
    Vec2 detected_center = Vec2::Zero();
    Vec2 expected_center = Vec2::Zero();
    Vec2 translation = Vec2::Zero();  // expected - detected
};

struct RansacResult {
    std::vector<CandidatePair> inliers;
    std::vector<CandidatePair> outliers;
    bool low_confidence = false;
    Vec2 consensus_translation = Vec2::Zero();
};

/// Catalog craters expected in the camera frame for a pose estimate:
/// footprint query, projection, and pinhole diameter conversion. Craters
/// projecting outside the margin-inflated image are absent.
std::vector<ExpectedCrater> expected_craters(const CameraPose& estimate, const CameraModel& cam,
                                             const CraterCatalog& cat,
                                             const MatchParams& params = {});

/// Least-mean-squares pairing: each detection goes to the expected crater
/// minimizing ||dcenter||^2 + w*(ddiameter)^2, one-to-one greedily by
/// ascending cost, ties broken by lower expected-crater id; pairs with
/// cost > gate^2 are dropped.
std::vector<CandidatePair> lms_pair(const std::vector<DetectedCrater>& detections,
                                    const std::vector<ExpectedCrater>& expected,
                                    const MatchParams& params = {});

/// Translation-consistency RANSAC over pair translation vectors (affine
/// consensus optional for >= 6 pairs). Fewer than min_pairs inputs are
/// passed through flagged low-confidence.
RansacResult ransac_filter(const std::vector<CandidatePair>& pairs, const MatchParams& params,
                           Rng& rng);

/// Full identification: expected_craters -> lms_pair -> ransac_filter.
std::vector<CraterMatch> identify(const std::vector<DetectedCrater>& detections,
                                  const CameraPose& estimate, const CameraModel& cam,
                                  const CraterCatalog& cat, const MatchParams& params, Rng& rng,
                                  MatchDiagnostics* diagnostics = nullptr);

}  // namespace lunatrn
