#include "viewhash/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "viewhash/rng.hpp"

namespace vh {

Quat quat_multiply(const Quat& a, const Quat& b) {
    return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

Quat quat_from_axis_angle(double ax, double ay, double az, double angle) {
    const double n = std::sqrt(ax * ax + ay * ay + az * az);
    if (n == 0.0) return {1, 0, 0, 0};
    const double s = std::sin(angle / 2) / n;
    return {std::cos(angle / 2), ax * s, ay * s, az * s};
}

std::vector<Quat> sample_poses(const HemisphereSampling& spec) {
    if (spec.radii.empty() || spec.views_per_radius < 1 || spec.in_plane_steps < 1 ||
        spec.scale_steps < 1)
        throw std::invalid_argument("sample_poses: step counts must be >= 1");

    constexpr double golden_angle = 2.399963229728653;  // pi * (3 - sqrt(5))
    std::vector<Quat> poses;
    poses.reserve(spec.poses_per_scale());
    for (std::size_t r = 0; r < spec.radii.size(); ++r) {
        const int K = spec.views_per_radius;
        for (int k = 0; k < K; ++k) {
            // spiral points on the upper hemisphere, z in (0,1)
            const double z = 1.0 - (k + 0.5) / K;
            const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = k * golden_angle;
            const double dx = rho * std::cos(phi);
            const double dy = rho * std::sin(phi);
            // rotation taking the z axis onto (dx,dy,z)
            Quat tilt = quat_from_axis_angle(-dy, dx, 0.0, std::acos(std::clamp(z, -1.0, 1.0)));
            for (int i = 0; i < spec.in_plane_steps; ++i) {
                const double alpha =
                    2.0 * std::numbers::pi * i / spec.in_plane_steps;
                Quat q = quat_multiply(tilt, quat_from_axis_angle(0, 0, 1, alpha));
                poses.push_back(q.normalized());
            }
        }
    }
    return poses;
}

namespace {

std::uint8_t draw_value(const std::array<double, kMaxCellValue + 1>& dist,
                        SplitMix64& rng) {
    double u = rng.next_double();
    for (int v = 0; v <= kMaxCellValue; ++v) {
        u -= dist[v];
        if (u < 0) return static_cast<std::uint8_t>(v);
    }
    return kMaxCellValue;
}

}  // namespace

SyntheticObjectModel make_random_model(std::uint32_t object_id, std::uint16_t width,
                                       std::uint16_t height, double foreground_density,
                                       double view_coherence, std::uint64_t seed) {
    SyntheticObjectModel m;
    m.object_id = object_id;
    m.width = width;
    m.height = height;
    m.view_coherence = view_coherence;
    const std::size_t cells = static_cast<std::size_t>(width) * height;
    m.foreground_shape.assign(cells, 0);
    m.cell_value_distribution.assign(cells, {});
    SplitMix64 rng(seed);
    // contiguous silhouette: the cells nearest a random center, slightly
    // jittered and anisotropic so shapes differ between objects
    const std::size_t target = std::min(
        cells, static_cast<std::size_t>(
                   std::max(1.0, std::llround(foreground_density * cells) * 1.0)));
    const double cx = width * (0.3 + 0.4 * rng.next_double());
    const double cy = height * (0.3 + 0.4 * rng.next_double());
    const double ax = 0.6 + rng.next_double();
    const double ay = 0.6 + rng.next_double();
    std::vector<std::pair<double, std::size_t>> order(cells);
    for (std::size_t c = 0; c < cells; ++c) {
        const double dx = (static_cast<double>(c % width) + 0.5 - cx) * ax;
        const double dy = (static_cast<double>(c / width) + 0.5 - cy) * ay;
        order[c] = {dx * dx + dy * dy + 0.5 * rng.next_double(), c};
    }
    std::sort(order.begin(), order.end());
    for (std::size_t i = 0; i < target; ++i) m.foreground_shape[order[i].second] = 1;
    // Quantized orientations are not uniform in practice: each location
    // favours a few values, and nearby locations favour overlapping sets
    // (smoothly varying gradients/normals). The prior depends on position
    // only, so different objects remain statistically exchangeable.
    for (std::size_t c = 0; c < cells; ++c) {
        auto& dist = m.cell_value_distribution[c];
        dist.fill(0.0);
        if (m.foreground_shape[c]) {
            const int x = static_cast<int>(c % width);
            const int y = static_cast<int>(c / width);
            const int v0 = (x * 5 + y * 11) % kMaxCellValue;
            dist[1 + v0] = 0.45;
            dist[1 + (v0 + 1) % kMaxCellValue] = 0.30;
            dist[1 + (v0 + 7) % kMaxCellValue] = 0.25;
        } else {
            dist[0] = 1.0;
        }
    }
    return m;
}

std::vector<DescriptorSet> generate_database(const std::vector<SyntheticObjectModel>& models,
                                             const HemisphereSampling& spec,
                                             std::uint64_t seed, int scale_clusters) {
    if (models.empty()) throw std::invalid_argument("generate_database: no models");
    if (scale_clusters < 1 || scale_clusters > spec.scale_steps)
        scale_clusters = std::min(scale_clusters < 1 ? 1 : scale_clusters, spec.scale_steps);
    const std::uint16_t w = models.front().width;
    const std::uint16_t h = models.front().height;
    for (const auto& m : models)
        if (m.width != w || m.height != h)
            throw std::invalid_argument("generate_database: models must share grid dims");

    std::vector<DescriptorSet> clusters(scale_clusters);
    for (int s = 0; s < scale_clusters; ++s) {
        clusters[s].scale_cluster = static_cast<std::uint16_t>(s);
        clusters[s].bit_width = static_cast<std::uint32_t>(w) * h * kValuesPerCell;
        clusters[s].grid_width = w;
        clusters[s].grid_height = h;
    }

    const auto poses = sample_poses(spec);
    const std::size_t cells = static_cast<std::size_t>(w) * h;
    // Appearance changes between views act on whole regions at once: a
    // viewpoint or lighting shift moves the gradient field of a surface patch
    // coherently, not cell by cell. Per view, each region of a coarse 3x2
    // tiling draws a "phase" that picks which of its cells' preferred values
    // dominates, with residual per-cell noise. Marginal per-cell frequencies
    // are unchanged, but values within a region become strongly correlated.
    constexpr double kPhaseConformity = 0.92;
    constexpr int kRegionCols = 3, kRegionRows = 2;
    constexpr std::size_t kRegions = kRegionCols * kRegionRows;
    for (const auto& model : models) {
        std::vector<std::array<std::uint8_t, 3>> pattern(cells, {0, 0, 0});
        for (std::size_t c = 0; c < cells; ++c) {
            const auto& dist = model.cell_value_distribution[c];
            std::array<std::pair<double, int>, 3> top{};
            std::size_t filled = 0;
            for (int v = 1; v <= kMaxCellValue && filled < 3; ++v)
                if (dist[v] > 0.0) top[filled++] = {dist[v], v};
            std::sort(top.begin(), top.begin() + filled,
                      [](const auto& a, const auto& b) { return a.first > b.first; });
            for (std::size_t i = 0; i < 3; ++i)
                pattern[c][i] = static_cast<std::uint8_t>(top[std::min(i, filled ? filled - 1 : 0)].second);
        }
        for (int sc = 0; sc < spec.scale_steps; ++sc) {
            const int cluster = sc * scale_clusters / spec.scale_steps;
            SplitMix64 rng(derive_seed(seed, "views",
                                       (static_cast<std::uint64_t>(model.object_id) << 8) | sc));
            QuantizedViewGrid grid;
            grid.width = w;
            grid.height = h;
            grid.cells.assign(cells, 0);
            grid.foreground.assign(cells, 0);
            std::vector<std::uint8_t> prev;
            for (std::size_t p = 0; p < poses.size(); ++p) {
                std::array<std::size_t, kRegions> phase;
                for (auto& ph : phase) {
                    const double u = rng.next_double();
                    ph = u < 0.45 ? 0 : (u < 0.75 ? 1 : 2);
                }
                for (std::size_t c = 0; c < cells; ++c) {
                    if (!model.foreground_shape[c]) {
                        grid.cells[c] = 0;
                        continue;
                    }
                    if (!prev.empty() && rng.next_bernoulli(model.view_coherence))
                        grid.cells[c] = prev[c];
                    else if (rng.next_bernoulli(kPhaseConformity)) {
                        const std::size_t rx = c % w * kRegionCols / w;
                        const std::size_t ry = c / w * kRegionRows / h;
                        grid.cells[c] = pattern[c][phase[ry * kRegionCols + rx]];
                    } else
                        grid.cells[c] = draw_value(model.cell_value_distribution[c], rng);
                }
                for (std::size_t c = 0; c < cells; ++c)
                    grid.foreground[c] = grid.cells[c] != 0;
                prev = grid.cells;

                BinaryDescriptor desc = binarize(grid);
                desc.object_id = model.object_id;
                desc.view_id = static_cast<std::uint32_t>(sc * poses.size() + p);
                desc.pose = poses[p];
                desc.scale_cluster = static_cast<std::uint16_t>(cluster);
                clusters[cluster].descriptors.push_back(std::move(desc));
            }
        }
    }
    return clusters;
}

DescriptorSet enlarge_by_bit_distribution(const DescriptorSet& set,
                                          std::size_t extra_count, std::uint64_t seed) {
    if (set.size() == 0)
        throw std::invalid_argument("enlarge_by_bit_distribution: empty source set");
    DescriptorSet out = set;
    if (extra_count == 0) return out;

    const std::size_t cells =
        static_cast<std::size_t>(set.grid_width) * set.grid_height;
    // empirical per-cell value frequencies of the source set
    std::vector<std::array<double, kMaxCellValue + 1>> dist(cells);
    for (auto& d : dist) d.fill(0.0);
    for (const auto& desc : set.descriptors) {
        for (std::size_t c = 0; c < cells; ++c) {
            const std::uint16_t f = desc.bits.field16(c);
            const int v = f ? std::countr_zero(f) + 1 : 0;
            dist[c][v] += 1.0;
        }
    }
    for (auto& d : dist)
        for (double& p : d) p /= static_cast<double>(set.size());

    // group new descriptors into objects of the same view count as the source
    std::uint32_t max_object = 0;
    std::size_t views_of_first = 0;
    for (const auto& desc : set.descriptors) {
        max_object = std::max(max_object, desc.object_id);
        if (desc.object_id == set.descriptors.front().object_id) ++views_of_first;
    }
    const std::size_t views_per_object = std::max<std::size_t>(1, views_of_first);

    SplitMix64 rng(derive_seed(seed, "enlarge"));
    QuantizedViewGrid grid;
    grid.width = set.grid_width;
    grid.height = set.grid_height;
    grid.cells.assign(cells, 0);
    grid.foreground.assign(cells, 0);
    for (std::size_t i = 0; i < extra_count; ++i) {
        for (std::size_t c = 0; c < cells; ++c) {
            grid.cells[c] = draw_value(dist[c], rng);
            grid.foreground[c] = grid.cells[c] != 0;
        }
        BinaryDescriptor desc = binarize(grid);
        if (desc.foreground_cell_count == 0) {  // degenerate draw; force one cell
            grid.cells[0] = 1;
            grid.foreground[0] = 1;
            desc = binarize(grid);
        }
        desc.object_id = max_object + 1 + static_cast<std::uint32_t>(i / views_per_object);
        desc.view_id = static_cast<std::uint32_t>(i % views_per_object);
        desc.pose = set.descriptors[i % set.size()].pose;
        desc.scale_cluster = set.scale_cluster;
        out.descriptors.push_back(std::move(desc));
    }
    return out;
}

SceneInstance compose_scene(const DescriptorSet& database,
                            const std::vector<std::pair<std::uint32_t, std::pair<int, int>>>& plants,
                            int scene_width, int scene_height, double clutter_density,
                            double epsilon, std::uint64_t seed) {
    if (epsilon < 0.0 || epsilon >= 0.5)
        throw std::invalid_argument("compose_scene: epsilon outside [0,0.5)");
    const int vw = database.grid_width;
    const int vh_ = database.grid_height;
    for (std::size_t a = 0; a < plants.size(); ++a) {
        const auto [xa, ya] = plants[a].second;
        if (plants[a].first >= database.size())
            throw std::invalid_argument("compose_scene: descriptor id out of range");
        if (xa < 0 || ya < 0 || xa + vw > scene_width || ya + vh_ > scene_height)
            throw std::invalid_argument("compose_scene: plant outside scene");
        for (std::size_t b = a + 1; b < plants.size(); ++b) {
            const auto [xb, yb] = plants[b].second;
            if (std::abs(xa - xb) < vw && std::abs(ya - yb) < vh_)
                throw std::invalid_argument("compose_scene: overlapping plants");
        }
    }

    SceneInstance scene;
    scene.clutter_density = clutter_density;
    scene.bit_flip_rate = epsilon;
    scene.grid.width = static_cast<std::uint16_t>(scene_width);
    scene.grid.height = static_cast<std::uint16_t>(scene_height);
    const std::size_t cells = static_cast<std::size_t>(scene_width) * scene_height;
    scene.grid.cells.assign(cells, 0);
    scene.grid.foreground.assign(cells, 0);

    SplitMix64 rng(derive_seed(seed, "scene"));
    for (std::size_t c = 0; c < cells; ++c) {
        if (rng.next_bernoulli(clutter_density)) {
            scene.grid.cells[c] = static_cast<std::uint8_t>(1 + rng.next_below(kMaxCellValue));
            scene.grid.foreground[c] = 1;
        }
    }

    for (const auto& [id, pos] : plants) {
        const QuantizedViewGrid view = debinarize(database.descriptors[id]);
        for (int y = 0; y < vh_; ++y) {
            for (int x = 0; x < vw; ++x) {
                std::uint8_t v = view.cells[static_cast<std::size_t>(y) * vw + x];
                if (v != 0 && epsilon > 0 && rng.next_bernoulli(epsilon))
                    v = static_cast<std::uint8_t>(1 + rng.next_below(kMaxCellValue));
                const std::size_t c =
                    static_cast<std::size_t>(pos.second + y) * scene_width + pos.first + x;
                scene.grid.cells[c] = v;
                scene.grid.foreground[c] = v != 0;
            }
        }
        scene.plants.push_back({id, pos.first, pos.second});
    }
    return scene;
}

SceneInstance compose_random_scene(const DescriptorSet& database, int scene_width,
                                   int scene_height, int num_plants,
                                   double clutter_density, double epsilon,
                                   std::uint64_t seed) {
    SplitMix64 rng(derive_seed(seed, "place"));
    const int vw = database.grid_width;
    const int vh_ = database.grid_height;
    std::vector<std::pair<std::uint32_t, std::pair<int, int>>> plants;
    for (int p = 0; p < num_plants; ++p) {
        bool placed = false;
        for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
            const int x = static_cast<int>(rng.next_below(scene_width - vw + 1));
            const int y = static_cast<int>(rng.next_below(scene_height - vh_ + 1));
            bool clash = false;
            for (const auto& q : plants) {
                if (std::abs(q.second.first - x) < vw && std::abs(q.second.second - y) < vh_) {
                    clash = true;
                    break;
                }
            }
            if (!clash) {
                plants.push_back({static_cast<std::uint32_t>(rng.next_below(database.size())),
                                  {x, y}});
                placed = true;
            }
        }
    }
    return compose_scene(database, plants, scene_width, scene_height, clutter_density,
                         epsilon, seed);
}

}  // namespace vh
