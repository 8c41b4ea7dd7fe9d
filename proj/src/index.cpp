#include "viewhash/index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "viewhash/rng.hpp"

namespace vh {

std::uint64_t extract_key(const BitVec& bits, const HashKey& key) {
    std::uint64_t value = 0;
    for (std::size_t j = 0; j < key.positions.size(); ++j) {
        const std::uint32_t pos = key.positions[j];
        if (pos >= bits.size())
            throw std::invalid_argument("extract_key: position out of range");
        value |= static_cast<std::uint64_t>(bits.test(pos)) << j;
    }
    return value;
}

HashTable build_table(const std::vector<BitVec>& hash_bits,
                      std::span<const std::uint32_t> subset, const HashKey& key) {
    HashTable table;
    table.key = key;
    table.source_subset.assign(subset.begin(), subset.end());
    std::sort(table.source_subset.begin(), table.source_subset.end());
    table.buckets.assign(std::size_t{1} << key.length(), {});
    for (std::uint32_t id : table.source_subset)
        table.buckets[extract_key(hash_bits[id], key)].push_back(id);
    return table;
}

std::vector<std::vector<std::uint32_t>> make_overlapping_subsets(
    std::size_t n, int k, double overlap_fraction, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("make_overlapping_subsets: k < 1");
    if (overlap_fraction < 0.0 || overlap_fraction >= 1.0)
        throw std::invalid_argument("make_overlapping_subsets: overlap outside [0,1)");

    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    SplitMix64 rng(seed);
    shuffle(perm, rng);

    // round-robin deal guarantees the union covers everything
    std::vector<std::vector<std::uint32_t>> subsets(k);
    for (std::size_t i = 0; i < n; ++i)
        subsets[i % k].push_back(perm[i]);

    const std::size_t target = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * (1.0 + overlap_fraction * (k - 1)) / k));
    for (int s = 0; s < k; ++s) {
        auto& sub = subsets[s];
        if (sub.size() >= target) continue;
        std::vector<bool> in(n, false);
        for (std::uint32_t id : sub) in[id] = true;
        std::vector<std::uint32_t> others;
        others.reserve(n - sub.size());
        for (std::uint32_t id : perm)
            if (!in[id]) others.push_back(id);
        shuffle(others, rng);
        for (std::size_t i = 0; i < others.size() && sub.size() < target; ++i)
            sub.push_back(others[i]);
    }
    for (auto& sub : subsets) std::sort(sub.begin(), sub.end());
    return subsets;
}

std::vector<std::uint32_t> retrieve(const ScaleIndex& index, const BitVec& window_bits) {
    std::vector<std::uint32_t> out;
    for (const auto& table : index.tables) {
        const auto& bucket = table.buckets[extract_key(window_bits, table.key)];
        out.insert(out.end(), bucket.begin(), bucket.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

BucketStats bucket_stats(const HashTable& table) {
    BucketStats stats;
    double sum = 0, sum2 = 0;
    for (const auto& bucket : table.buckets) {
        if (bucket.empty()) continue;
        ++stats.used_buckets;
        const double s = static_cast<double>(bucket.size());
        stats.max_bucket_size =
            std::max<std::uint32_t>(stats.max_bucket_size, static_cast<std::uint32_t>(bucket.size()));
        sum += s;
        sum2 += s * s;
    }
    if (stats.used_buckets > 0) {
        const double mean = sum / stats.used_buckets;
        const double var = sum2 / stats.used_buckets - mean * mean;
        stats.stddev_nonempty = std::sqrt(std::max(0.0, var));
    }
    return stats;
}

ScaleIndex build_scale_index(const DescriptorSet& set, const IndexBuildConfig& cfg) {
    ScaleIndex index;
    index.scale_cluster = set.scale_cluster;
    index.window_width = set.grid_width;
    index.window_height = set.grid_height;

    // keys are learned on and hashed over the spread descriptors
    std::vector<BitVec> hash_bits(set.size());
    std::vector<BinaryDescriptor> spread_descs(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        spread_descs[i] = spread(set.descriptors[i], cfg.spread_radius);
        hash_bits[i] = spread_descs[i].bits;
    }

    std::vector<std::vector<std::uint32_t>> subsets;
    if (cfg.tables_per_scale == 1) {
        subsets.emplace_back(set.size());
        std::iota(subsets[0].begin(), subsets[0].end(), 0u);
    } else {
        subsets = make_overlapping_subsets(set.size(), cfg.tables_per_scale,
                                           cfg.overlap_fraction,
                                           derive_seed(cfg.seed, "subsets"));
    }
    for (int t = 0; t < cfg.tables_per_scale; ++t) {
        const auto& subset = subsets[t];
        DescriptorSet learn_set;
        learn_set.scale_cluster = set.scale_cluster;
        learn_set.bit_width = set.bit_width;
        learn_set.grid_width = set.grid_width;
        learn_set.grid_height = set.grid_height;
        learn_set.descriptors.reserve(subset.size());
        for (std::uint32_t id : subset) learn_set.descriptors.push_back(spread_descs[id]);

        const std::uint32_t b = key_length(subset.size());
        const auto sel = select_key(learn_set, cfg.strategy, b,
                                    derive_seed(cfg.seed, "key", t), cfg.prox);
        index.tables.push_back(build_table(hash_bits, subset, sel.key));
    }
    return index;
}

}  // namespace vh
