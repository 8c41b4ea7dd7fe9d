#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "viewhash/descriptor.hpp"

namespace vh {

// Pose sampling budget. Defaults multiply out to 1*89*7*5 = 3115 views
// per object, mirroring the usual per-object view count.
struct HemisphereSampling {
    std::vector<double> radii{1.0};
    int views_per_radius = 89;
    int in_plane_steps = 7;
    int scale_steps = 5;

    std::size_t poses_per_scale() const {
        return radii.size() * static_cast<std::size_t>(views_per_radius) * in_plane_steps;
    }
    std::size_t total_views() const { return poses_per_scale() * scale_steps; }
};

// Stand-in for a rendered CAD model: a per-cell categorical distribution
// over quantized values plus a foreground mask.
struct SyntheticObjectModel {
    std::uint32_t object_id = 0;
    std::uint16_t width = 0;
    std::uint16_t height = 0;
    std::vector<std::array<double, kMaxCellValue + 1>> cell_value_distribution;
    std::vector<std::uint8_t> foreground_shape;
    double view_coherence = 0.85;  // chance a cell keeps its value between pose-adjacent views
};

struct SceneInstance {
    struct Plant {
        std::uint32_t descriptor_id = 0;
        int x = 0;
        int y = 0;
    };
    std::vector<Plant> plants;
    double clutter_density = 0.0;
    double bit_flip_rate = 0.0;  // epsilon: per-cell corruption chance on plants
    QuantizedViewGrid grid;
};

// Quaternion composition helpers used by the pose sampler.
Quat quat_multiply(const Quat& a, const Quat& b);
Quat quat_from_axis_angle(double ax, double ay, double az, double angle);

// Quasi-uniform hemisphere directions (spiral points) crossed with in-plane
// rotation steps; one quaternion per (radius, point, in-plane step).
std::vector<Quat> sample_poses(const HemisphereSampling& spec);

SyntheticObjectModel make_random_model(std::uint32_t object_id, std::uint16_t width,
                                       std::uint16_t height, double foreground_density,
                                       double view_coherence, std::uint64_t seed);

// One descriptor per (object, pose, scale step); scale steps are binned into
// `scale_clusters` per-scale sets. Cell values chain along the pose ordering
// so that nearby views stay similar.
std::vector<DescriptorSet> generate_database(const std::vector<SyntheticObjectModel>& models,
                                             const HemisphereSampling& spec,
                                             std::uint64_t seed, int scale_clusters = 3);

// Draws `extra_count` new descriptors cell-wise from the source set's
// empirical value distribution, under fresh synthetic object ids.
DescriptorSet enlarge_by_bit_distribution(const DescriptorSet& set,
                                          std::size_t extra_count, std::uint64_t seed);

SceneInstance compose_scene(const DescriptorSet& database,
                            const std::vector<std::pair<std::uint32_t, std::pair<int, int>>>& plants,
                            int scene_width, int scene_height, double clutter_density,
                            double epsilon, std::uint64_t seed);

// Plants `num_plants` random views at random non-overlapping positions.
SceneInstance compose_random_scene(const DescriptorSet& database, int scene_width,
                                   int scene_height, int num_plants,
                                   double clutter_density, double epsilon,
                                   std::uint64_t seed);

}  // namespace vh
