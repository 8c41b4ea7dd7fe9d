#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "viewhash/index.hpp"
#include "viewhash/synth.hpp"

namespace vh {

struct DetectionResult {
    int x = 0;
    int y = 0;
    std::uint32_t object_id = 0;
    std::uint32_t view_id = 0;
    std::uint32_t descriptor_id = 0;
    double score = 0.0;
    std::uint32_t candidates_retrieved = 0;
};

struct ThresholdMap {
    std::unordered_map<std::uint32_t, double> per_object;
    double fallback = 0.5;

    double get(std::uint32_t object_id) const {
        auto it = per_object.find(object_id);
        return it == per_object.end() ? fallback : it->second;
    }
};

struct DetectStats {
    std::uint64_t windows = 0;
    std::uint64_t retrieved_total = 0;
    double wall_ms = 0.0;  // detection loop only
};

// Precomputed unspread and spread bit planes of a scene.
struct SceneBitPlanes {
    int width = 0;
    int height = 0;
    BitVec unspread;
    BitVec spread_plane;
};

SceneBitPlanes make_scene_planes(const SceneInstance& scene, int spread_radius = 1);

BitVec extract_window_bits(const BitVec& plane, int scene_width, int x, int y,
                           int window_width, int window_height);

// Online stage: per lattice position extract the window descriptor, probe the
// index with the spread bits, score candidates against the unspread bits and
// keep the best one at or above its object's threshold. Sorted by score
// descending, ties by position then id.
std::vector<DetectionResult> slide_and_detect(const SceneInstance& scene,
                                              const DescriptorSet& database,
                                              const ScaleIndex& index,
                                              const ThresholdMap& thresholds,
                                              DetectStats* stats = nullptr,
                                              int spread_radius = 1);

// Same scoring with every database template at every window; the retrieval
// quality oracle.
std::vector<DetectionResult> exhaustive_detect(const SceneInstance& scene,
                                               const DescriptorSet& database,
                                               const ThresholdMap& thresholds,
                                               DetectStats* stats = nullptr);

struct CalibrationResult {
    ThresholdMap thresholds;
    std::vector<std::uint32_t> unreachable_objects;  // target not met even at 0
};

// Per object, the highest threshold (0.01 steps) reaching the target recall
// under exhaustive scoring at the planted positions of the given scenes.
CalibrationResult calibrate_thresholds(const DescriptorSet& database,
                                       const std::vector<SceneInstance>& scenes,
                                       double target_recall = 0.98);

double matching_ratio(double retrieved_total, std::size_t database_size, int W, int H,
                      int T);

struct SceneEval {
    double recall = 0.0;       // planted object found at its position
    double pose_recall = 0.0;  // and pose within tau of the planted view
};

SceneEval evaluate_detections(const SceneInstance& scene, const DescriptorSet& database,
                              const std::vector<DetectionResult>& detections,
                              double tau = 0.3);

struct RunMetrics {
    double recall = 0.0;
    double pose_recall = 0.0;
    double matching_ratio = 0.0;
    double retrieved_per_window = 0.0;
    double wall_ms = 0.0;
    double exhaustive_agreement = 0.0;
};

struct ExperimentScenes {
    int scene_width = 24;
    int scene_height = 24;
    int plants_per_scene = 2;
    double clutter_density = 0.02;
    double epsilon = 0.1;
    int num_scenes = 5;
    double threshold = 0.5;
};

struct ScalingRow {
    std::size_t descriptors = 0;
    double recall = 0.0;
    double matching_ratio = 0.0;
    double retrieved_per_window = 0.0;
    double wall_ms = 0.0;
};

// For each size: resize the base database (truncate or enlarge by per-bit
// sampling), rebuild keys and index, run a fixed scene batch. One row per
// size with metrics medianed over seeds. `exhaustive` replaces retrieval
// with a linear scan (the control).
std::vector<ScalingRow> scaling_experiment(const DescriptorSet& base,
                                           const std::vector<std::size_t>& sizes,
                                           Strategy strategy,
                                           const std::vector<std::uint64_t>& seeds,
                                           const ExperimentScenes& scenes,
                                           bool exhaustive,
                                           const ProximityConfig& prox = {});

// Least-squares slope of log(time) vs log(size); NaN when sizes.size() < 2.
double fit_loglog_exponent(const std::vector<std::size_t>& sizes,
                           const std::vector<double>& times);

double median(std::vector<double> values);

}  // namespace vh
