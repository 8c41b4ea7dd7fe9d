#include "viewhash/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "viewhash/rng.hpp"

namespace vh {

SceneBitPlanes make_scene_planes(const SceneInstance& scene, int spread_radius) {
    SceneBitPlanes planes;
    planes.width = scene.grid.width;
    planes.height = scene.grid.height;
    BinaryDescriptor desc = binarize(scene.grid);
    planes.spread_plane = spread(desc, spread_radius).bits;
    planes.unspread = std::move(desc.bits);
    return planes;
}

BitVec extract_window_bits(const BitVec& plane, int scene_width, int x, int y,
                           int window_width, int window_height) {
    BitVec out(static_cast<std::size_t>(window_width) * window_height * kValuesPerCell);
    std::size_t cell = 0;
    for (int wy = 0; wy < window_height; ++wy) {
        const std::size_t row = static_cast<std::size_t>(y + wy) * scene_width + x;
        for (int wx = 0; wx < window_width; ++wx)
            out.set_field16(cell++, plane.field16(row + wx));
    }
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Candidate {
    std::uint32_t id;
    double score;
};

template <typename CandidatesFn>
std::vector<DetectionResult> detect_loop(const SceneInstance& scene,
                                         const DescriptorSet& database,
                                         const ThresholdMap& thresholds,
                                         DetectStats* stats, int window_w, int window_h,
                                         int spread_radius, bool need_spread_plane,
                                         CandidatesFn&& candidates_at) {
    const int W = scene.grid.width, H = scene.grid.height;
    if (window_w > W || window_h > H)
        throw std::invalid_argument("detect: window larger than scene");

    const auto t0 = Clock::now();
    SceneBitPlanes planes;
    planes.width = W;
    planes.height = H;
    BinaryDescriptor scene_desc = binarize(scene.grid);
    if (need_spread_plane) planes.spread_plane = spread(scene_desc, spread_radius).bits;
    planes.unspread = std::move(scene_desc.bits);

    std::vector<DetectionResult> detections;
    std::uint64_t windows = 0, retrieved_total = 0;
    for (int y = 0; y + window_h <= H; ++y) {
        for (int x = 0; x + window_w <= W; ++x) {
            ++windows;
            decltype(auto) cands = candidates_at(planes, x, y);
            retrieved_total += cands.size();
            if (cands.empty()) continue;
            const BitVec win =
                extract_window_bits(planes.unspread, W, x, y, window_w, window_h);
            std::uint32_t best_id = 0;
            double best_score = -1.0;
            for (std::uint32_t id : cands) {
                const auto& tmpl = database.descriptors[id];
                const double s =
                    similarity_bits(win, tmpl.bits, tmpl.foreground_cell_count);
                if (s > best_score) {
                    best_score = s;
                    best_id = id;
                }
            }
            const auto& tmpl = database.descriptors[best_id];
            if (best_score >= thresholds.get(tmpl.object_id)) {
                detections.push_back({x, y, tmpl.object_id, tmpl.view_id, best_id,
                                      best_score,
                                      static_cast<std::uint32_t>(cands.size())});
            }
        }
    }
    const auto t1 = Clock::now();

    std::stable_sort(detections.begin(), detections.end(),
                     [](const DetectionResult& a, const DetectionResult& b) {
                         return a.score > b.score;
                     });
    if (stats) {
        stats->windows = windows;
        stats->retrieved_total = retrieved_total;
        stats->wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    return detections;
}

}  // namespace

std::vector<DetectionResult> slide_and_detect(const SceneInstance& scene,
                                              const DescriptorSet& database,
                                              const ScaleIndex& index,
                                              const ThresholdMap& thresholds,
                                              DetectStats* stats, int spread_radius) {
    if (index.window_width != database.grid_width ||
        index.window_height != database.grid_height)
        throw std::invalid_argument("slide_and_detect: index/database scale mismatch");
    return detect_loop(
        scene, database, thresholds, stats, index.window_width, index.window_height,
        spread_radius, true,
        [&](const SceneBitPlanes& planes, int x, int y) {
            const BitVec key_bits = extract_window_bits(
                planes.spread_plane, planes.width, x, y, index.window_width,
                index.window_height);
            return retrieve(index, key_bits);
        });
}

std::vector<DetectionResult> exhaustive_detect(const SceneInstance& scene,
                                               const DescriptorSet& database,
                                               const ThresholdMap& thresholds,
                                               DetectStats* stats) {
    const int W = scene.grid.width, H = scene.grid.height;
    const int ww = database.grid_width, wh = database.grid_height;
    if (ww > W || wh > H)
        throw std::invalid_argument("detect: window larger than scene");

    const auto t0 = Clock::now();
    BinaryDescriptor scene_desc = binarize(scene.grid);
    const BitVec& plane = scene_desc.bits;

    // pack the template words contiguously so the linear scan streams memory
    const std::size_t words =
        database.size() == 0 ? 0 : database.descriptors.front().bits.word_count();
    std::vector<std::uint64_t> packed(words * database.size());
    std::vector<double> inv_fg(database.size());
    for (std::size_t i = 0; i < database.size(); ++i) {
        const auto& d = database.descriptors[i];
        for (std::size_t w = 0; w < words; ++w) packed[i * words + w] = d.bits.word(w);
        inv_fg[i] = 1.0 / d.foreground_cell_count;
    }

    // pack all window bit fields up front (small: fits cache), then scan the
    // template store once with windows in the inner loop so memory traffic
    // stays proportional to the database size regardless of cache capacity
    const int nx = W - ww + 1, ny = H - wh + 1;
    const std::size_t windows = static_cast<std::size_t>(nx) * ny;
    std::vector<std::uint64_t> win_words(windows * words);
    for (int y = 0; y < ny; ++y) {
        for (int x = 0; x < nx; ++x) {
            const BitVec win = extract_window_bits(plane, W, x, y, ww, wh);
            const std::size_t base = (static_cast<std::size_t>(y) * nx + x) * words;
            for (std::size_t w = 0; w < words; ++w) win_words[base + w] = win.word(w);
        }
    }

    std::vector<double> best_score(windows, -1.0);
    std::vector<std::uint32_t> best_id(windows, 0);
    const std::uint64_t* t = packed.data();
    for (std::size_t id = 0; id < database.size(); ++id, t += words) {
        const double inv = inv_fg[id];
        const std::uint64_t* win = win_words.data();
        for (std::size_t wi = 0; wi < windows; ++wi, win += words) {
            std::size_t cells = 0;
            for (std::size_t w = 0; w < words; ++w) {
                const std::uint64_t a = win[w] & t[w];
                cells += (a & 0xFFFFull) != 0;
                cells += (a & 0xFFFF0000ull) != 0;
                cells += (a & 0xFFFF00000000ull) != 0;
                cells += (a >> 48) != 0;
            }
            const double s = static_cast<double>(cells) * inv;
            if (s > best_score[wi]) {
                best_score[wi] = s;
                best_id[wi] = static_cast<std::uint32_t>(id);
            }
        }
    }
    const auto t1 = Clock::now();

    std::vector<DetectionResult> detections;
    if (database.size() != 0) {
        for (std::size_t wi = 0; wi < windows; ++wi) {
            const auto& tmpl = database.descriptors[best_id[wi]];
            if (best_score[wi] >= thresholds.get(tmpl.object_id)) {
                detections.push_back({static_cast<int>(wi % nx),
                                      static_cast<int>(wi / nx), tmpl.object_id,
                                      tmpl.view_id, best_id[wi], best_score[wi],
                                      static_cast<std::uint32_t>(database.size())});
            }
        }
    }

    std::stable_sort(detections.begin(), detections.end(),
                     [](const DetectionResult& a, const DetectionResult& b) {
                         return a.score > b.score;
                     });
    if (stats) {
        stats->windows = windows;
        stats->retrieved_total = windows * database.size();
        stats->wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    return detections;
}

CalibrationResult calibrate_thresholds(const DescriptorSet& database,
                                       const std::vector<SceneInstance>& scenes,
                                       double target_recall) {
    // best exhaustive score of the planted object at each planted position
    std::unordered_map<std::uint32_t, std::vector<double>> best_scores;
    for (const auto& scene : scenes) {
        BinaryDescriptor scene_desc = binarize(scene.grid);
        for (const auto& plant : scene.plants) {
            const std::uint32_t obj = database.descriptors[plant.descriptor_id].object_id;
            const BitVec win = extract_window_bits(scene_desc.bits, scene.grid.width,
                                                   plant.x, plant.y, database.grid_width,
                                                   database.grid_height);
            double best = 0.0;
            for (const auto& tmpl : database.descriptors) {
                if (tmpl.object_id != obj) continue;
                best = std::max(best,
                                similarity_bits(win, tmpl.bits, tmpl.foreground_cell_count));
            }
            best_scores[obj].push_back(best);
        }
    }

    CalibrationResult result;
    for (auto& [obj, scores] : best_scores) {
        double chosen = -1.0;
        for (int i = 100; i >= 0; --i) {
            const double t = i / 100.0;
            std::size_t hit = 0;
            for (double s : scores) hit += s >= t;
            if (static_cast<double>(hit) / scores.size() >= target_recall) {
                chosen = t;
                break;
            }
        }
        if (chosen < 0.0) {
            chosen = 0.0;
            result.unreachable_objects.push_back(obj);
        }
        result.thresholds.per_object[obj] = chosen;
    }
    return result;
}

double matching_ratio(double retrieved_total, std::size_t database_size, int W, int H,
                      int T) {
    if (database_size == 0 || W <= 0 || H <= 0 || T <= 0)
        throw std::invalid_argument("matching_ratio: nonpositive denominator");
    const double denom = static_cast<double>(database_size) * W * H / (static_cast<double>(T) * T);
    return retrieved_total / denom;
}

SceneEval evaluate_detections(const SceneInstance& scene, const DescriptorSet& database,
                              const std::vector<DetectionResult>& detections,
                              double tau) {
    if (scene.plants.empty()) return {};
    std::size_t found = 0, pose_ok = 0;
    for (const auto& plant : scene.plants) {
        const auto& planted = database.descriptors[plant.descriptor_id];
        for (const auto& det : detections) {
            if (det.x != plant.x || det.y != plant.y) continue;
            if (det.object_id != planted.object_id) continue;
            ++found;
            if (quat_proximal(database.descriptors[det.descriptor_id].pose, planted.pose,
                              tau))
                ++pose_ok;
            break;
        }
    }
    SceneEval ev;
    ev.recall = static_cast<double>(found) / scene.plants.size();
    ev.pose_recall = static_cast<double>(pose_ok) / scene.plants.size();
    return ev;
}

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double fit_loglog_exponent(const std::vector<std::size_t>& sizes,
                           const std::vector<double>& times) {
    if (sizes.size() < 2 || sizes.size() != times.size())
        return std::numeric_limits<double>::quiet_NaN();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        const double lx = std::log(static_cast<double>(sizes[i]));
        const double ly = std::log(std::max(times[i], 1e-9));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

DescriptorSet resize_database(const DescriptorSet& base, std::size_t size,
                              std::uint64_t seed) {
    if (size <= base.size()) {
        DescriptorSet out = base;
        out.descriptors.resize(size);
        return out;
    }
    return enlarge_by_bit_distribution(base, size - base.size(), seed);
}

}  // namespace

std::vector<ScalingRow> scaling_experiment(const DescriptorSet& base,
                                           const std::vector<std::size_t>& sizes,
                                           Strategy strategy,
                                           const std::vector<std::uint64_t>& seeds,
                                           const ExperimentScenes& scenes,
                                           bool exhaustive,
                                           const ProximityConfig& prox) {
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (sizes[i] < sizes[i - 1])
            throw std::invalid_argument("scaling_experiment: sizes must be ascending");

    std::vector<ScalingRow> rows;
    for (std::size_t size : sizes) {
        std::vector<double> recalls, ratios, retrs, walls;
        for (std::uint64_t seed : seeds) {
            const DescriptorSet db =
                resize_database(base, size, derive_seed(seed, "resize", size));
            ScaleIndex index;
            if (!exhaustive) {
                IndexBuildConfig cfg;
                cfg.strategy = strategy;
                cfg.prox = prox;
                cfg.seed = derive_seed(seed, "index", size);
                index = build_scale_index(db, cfg);
            }
            ThresholdMap thresholds;
            thresholds.fallback = scenes.threshold;

            double recall_sum = 0, ratio_sum = 0, retr_sum = 0, wall_sum = 0;
            for (int s = 0; s < scenes.num_scenes; ++s) {
                const SceneInstance scene = compose_random_scene(
                    db, scenes.scene_width, scenes.scene_height, scenes.plants_per_scene,
                    scenes.clutter_density, scenes.epsilon,
                    derive_seed(seed, "scene", s));
                DetectStats stats;
                const auto dets =
                    exhaustive ? exhaustive_detect(scene, db, thresholds, &stats)
                               : slide_and_detect(scene, db, index, thresholds, &stats);
                recall_sum += evaluate_detections(scene, db, dets, prox.tau).recall;
                const double retrieved = exhaustive
                                             ? static_cast<double>(stats.windows) * db.size()
                                             : static_cast<double>(stats.retrieved_total);
                ratio_sum += matching_ratio(retrieved, db.size(), scenes.scene_width,
                                            scenes.scene_height, 1);
                retr_sum += retrieved / static_cast<double>(stats.windows);
                wall_sum += stats.wall_ms;
            }
            recalls.push_back(recall_sum / scenes.num_scenes);
            ratios.push_back(ratio_sum / scenes.num_scenes);
            retrs.push_back(retr_sum / scenes.num_scenes);
            walls.push_back(wall_sum);
        }
        rows.push_back({size, median(recalls), median(ratios), median(retrs),
                        median(walls)});
    }
    return rows;
}

}  // namespace vh
