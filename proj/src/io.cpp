#include "viewhash/io.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <type_traits>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vh {

namespace {

constexpr char kDbMagic[12] = {'V', 'I', 'E', 'W', 'H', 'A', 'S', 'H', 'D', 'B', 0, 0};
constexpr char kIxMagic[12] = {'V', 'I', 'E', 'W', 'H', 'A', 'S', 'H', 'I', 'X', 0, 0};
constexpr std::uint32_t kFormatVersion = 1;

void io_fail(const std::filesystem::path& path, const char* what) {
    throw std::runtime_error(std::string(what) + ": " + path.string());
}

template <typename T>
void put(std::ostream& os, T v) {
    std::array<unsigned char, sizeof(T)> buf;
    std::uint64_t u;
    if constexpr (std::is_same_v<T, double>) {
        std::memcpy(&u, &v, sizeof(double));
    } else {
        u = static_cast<std::uint64_t>(v);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(buf.data()), buf.size());
}

template <typename T>
T get(std::istream& is) {
    std::array<unsigned char, sizeof(T)> buf;
    is.read(reinterpret_cast<char*>(buf.data()), buf.size());
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        u |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    if constexpr (std::is_same_v<T, double>) {
        double d;
        std::memcpy(&d, &u, sizeof(double));
        return d;
    } else {
        return static_cast<T>(u);
    }
}

void put_bits(std::ostream& os, const BitVec& bits) {
    const std::size_t nbytes = (bits.size() + 7) / 8;
    for (std::size_t j = 0; j < nbytes; ++j) {
        const unsigned char byte =
            static_cast<unsigned char>(bits.data()[j / 8] >> (8 * (j % 8)));
        os.put(static_cast<char>(byte));
    }
}

BitVec get_bits(std::istream& is, std::size_t nbits) {
    BitVec bits(nbits);
    const std::size_t nbytes = (nbits + 7) / 8;
    for (std::size_t j = 0; j < nbytes; ++j) {
        const auto byte = static_cast<unsigned char>(is.get());
        bits.data()[j / 8] |= static_cast<std::uint64_t>(byte) << (8 * (j % 8));
    }
    return bits;
}

}  // namespace

void write_descriptor_db(const std::filesystem::path& path, const DescriptorSet& set) {
    std::ofstream os(path, std::ios::binary);
    if (!os) io_fail(path, "cannot open for writing");
    os.write(kDbMagic, sizeof(kDbMagic));
    put<std::uint32_t>(os, kFormatVersion);
    put<std::uint32_t>(os, set.bit_width);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(set.size()));
    put<std::uint16_t>(os, set.grid_width);
    put<std::uint16_t>(os, set.grid_height);
    for (const auto& d : set.descriptors) {
        put<std::uint32_t>(os, d.object_id);
        put<std::uint32_t>(os, d.view_id);
        put<std::uint16_t>(os, d.scale_cluster);
        put<std::uint32_t>(os, d.foreground_cell_count);
        put<double>(os, d.pose.w);
        put<double>(os, d.pose.x);
        put<double>(os, d.pose.y);
        put<double>(os, d.pose.z);
        put_bits(os, d.bits);
    }
    if (!os) io_fail(path, "write failed");
}

DescriptorSet read_descriptor_db(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) io_fail(path, "cannot open");
    char magic[12];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kDbMagic, sizeof(magic)) != 0)
        io_fail(path, "not a descriptor database");
    if (get<std::uint32_t>(is) != kFormatVersion) io_fail(path, "unsupported version");
    DescriptorSet set;
    set.bit_width = get<std::uint32_t>(is);
    const auto count = get<std::uint32_t>(is);
    set.grid_width = get<std::uint16_t>(is);
    set.grid_height = get<std::uint16_t>(is);
    set.descriptors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        BinaryDescriptor d;
        d.object_id = get<std::uint32_t>(is);
        d.view_id = get<std::uint32_t>(is);
        d.scale_cluster = get<std::uint16_t>(is);
        d.foreground_cell_count = get<std::uint32_t>(is);
        d.pose.w = get<double>(is);
        d.pose.x = get<double>(is);
        d.pose.y = get<double>(is);
        d.pose.z = get<double>(is);
        d.bits = get_bits(is, set.bit_width);
        d.grid_width = set.grid_width;
        d.grid_height = set.grid_height;
        set.descriptors.push_back(std::move(d));
    }
    if (!is) io_fail(path, "truncated file");
    if (!set.descriptors.empty()) set.scale_cluster = set.descriptors.front().scale_cluster;
    return set;
}

void write_keys(const std::filesystem::path& path, const std::vector<HashKey>& keys) {
    std::ofstream os(path);
    if (!os) io_fail(path, "cannot open for writing");
    for (const auto& key : keys) {
        os << strategy_name(key.strategy) << ' ' << key.length();
        for (std::uint32_t p : key.positions) os << ' ' << p;
        os << '\n';
    }
    if (!os) io_fail(path, "write failed");
}

std::vector<HashKey> read_keys(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) io_fail(path, "cannot open");
    std::vector<HashKey> keys;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string strat;
        std::size_t b;
        if (!(ls >> strat >> b)) io_fail(path, "malformed key line");
        HashKey key;
        key.strategy = parse_strategy(strat);
        key.positions.resize(b);
        for (std::size_t i = 0; i < b; ++i)
            if (!(ls >> key.positions[i])) io_fail(path, "malformed key line");
        keys.push_back(std::move(key));
    }
    return keys;
}

void write_index(const std::filesystem::path& path, const ScaleIndex& index) {
    std::ofstream os(path, std::ios::binary);
    if (!os) io_fail(path, "cannot open for writing");
    os.write(kIxMagic, sizeof(kIxMagic));
    put<std::uint32_t>(os, kFormatVersion);
    put<std::uint16_t>(os, index.scale_cluster);
    put<std::uint16_t>(os, index.window_width);
    put<std::uint16_t>(os, index.window_height);
    put<std::uint16_t>(os, static_cast<std::uint16_t>(index.tables.size()));
    for (const auto& table : index.tables) {
        put<std::uint8_t>(os, static_cast<std::uint8_t>(table.key.strategy));
        put<std::uint16_t>(os, static_cast<std::uint16_t>(table.key.length()));
        for (std::uint32_t p : table.key.positions) put<std::uint32_t>(os, p);
        std::uint32_t total = 0;
        for (const auto& bucket : table.buckets)
            total += static_cast<std::uint32_t>(bucket.size());
        put<std::uint32_t>(os, total);
        std::uint32_t offset = 0;
        for (const auto& bucket : table.buckets) {
            put<std::uint32_t>(os, offset);
            offset += static_cast<std::uint32_t>(bucket.size());
        }
        for (const auto& bucket : table.buckets)
            for (std::uint32_t id : bucket) put<std::uint32_t>(os, id);
    }
    if (!os) io_fail(path, "write failed");
}

ScaleIndex read_index(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) io_fail(path, "cannot open");
    char magic[12];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kIxMagic, sizeof(magic)) != 0)
        io_fail(path, "not an index file");
    if (get<std::uint32_t>(is) != kFormatVersion) io_fail(path, "unsupported version");
    ScaleIndex index;
    index.scale_cluster = get<std::uint16_t>(is);
    index.window_width = get<std::uint16_t>(is);
    index.window_height = get<std::uint16_t>(is);
    const auto k = get<std::uint16_t>(is);
    for (std::uint16_t t = 0; t < k; ++t) {
        HashTable table;
        table.key.strategy = static_cast<Strategy>(get<std::uint8_t>(is));
        const auto b = get<std::uint16_t>(is);
        table.key.positions.resize(b);
        for (std::uint16_t i = 0; i < b; ++i)
            table.key.positions[i] = get<std::uint32_t>(is);
        const auto total = get<std::uint32_t>(is);
        std::vector<std::uint32_t> offsets(std::size_t{1} << b);
        for (auto& o : offsets) o = get<std::uint32_t>(is);
        std::vector<std::uint32_t> ids(total);
        for (auto& id : ids) id = get<std::uint32_t>(is);
        table.buckets.resize(offsets.size());
        for (std::size_t i = 0; i < offsets.size(); ++i) {
            const std::uint32_t end =
                i + 1 < offsets.size() ? offsets[i + 1] : total;
            table.buckets[i].assign(ids.begin() + offsets[i], ids.begin() + end);
        }
        table.source_subset = ids;
        std::sort(table.source_subset.begin(), table.source_subset.end());
        index.tables.push_back(std::move(table));
    }
    if (!is) io_fail(path, "truncated file");
    return index;
}

void write_scene(const std::filesystem::path& grid_path,
                 const std::filesystem::path& sidecar_path, const SceneInstance& scene) {
    DescriptorSet holder;
    holder.grid_width = scene.grid.width;
    holder.grid_height = scene.grid.height;
    holder.bit_width = static_cast<std::uint32_t>(scene.grid.cell_count()) * kValuesPerCell;
    holder.descriptors.push_back(binarize(scene.grid));
    write_descriptor_db(grid_path, holder);

    std::ofstream os(sidecar_path);
    if (!os) io_fail(sidecar_path, "cannot open for writing");
    for (const auto& plant : scene.plants)
        os << plant.descriptor_id << ' ' << plant.x << ' ' << plant.y << '\n';
    if (!os) io_fail(sidecar_path, "write failed");
}

SceneInstance read_scene(const std::filesystem::path& grid_path,
                         const std::filesystem::path& sidecar_path) {
    const DescriptorSet holder = read_descriptor_db(grid_path);
    if (holder.size() != 1) io_fail(grid_path, "scene file must hold one grid");
    SceneInstance scene;
    scene.grid = debinarize(holder.descriptors.front());

    std::ifstream is(sidecar_path);
    if (!is) io_fail(sidecar_path, "cannot open");
    SceneInstance::Plant plant;
    while (is >> plant.descriptor_id >> plant.x >> plant.y) scene.plants.push_back(plant);
    return scene;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace vh
