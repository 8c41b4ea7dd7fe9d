#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "viewhash/index.hpp"
#include "viewhash/synth.hpp"

namespace vh {

// Binary descriptor database: 16-byte magic+version header; d (u32),
// count (u32), grid width/height (u16 each); per descriptor objectId (u32),
// viewId (u32), scaleCluster (u16), foregroundCellCount (u32), pose as
// 4 x f64, bits as ceil(d/8) bytes little-endian bit order. All integers
// little-endian.
void write_descriptor_db(const std::filesystem::path& path, const DescriptorSet& set);
DescriptorSet read_descriptor_db(const std::filesystem::path& path);

// Text key file, one key per line: `strategy b pos_0 ... pos_{b-1}`.
void write_keys(const std::filesystem::path& path, const std::vector<HashKey>& keys);
std::vector<HashKey> read_keys(const std::filesystem::path& path);

// Binary index file: header (magic, version, scaleCluster, window dims, k);
// per table a key record, a 2^b bucket offset directory and the id lists.
void write_index(const std::filesystem::path& path, const ScaleIndex& index);
ScaleIndex read_index(const std::filesystem::path& path);

// Scene = database file holding the scene grid as one big descriptor, plus a
// ground-truth sidecar with one `descriptorId x y` line per plant.
void write_scene(const std::filesystem::path& grid_path,
                 const std::filesystem::path& sidecar_path, const SceneInstance& scene);
SceneInstance read_scene(const std::filesystem::path& grid_path,
                         const std::filesystem::path& sidecar_path);

// 6 significant digits, matching the CSV conventions.
std::string format_number(double v);

}  // namespace vh
