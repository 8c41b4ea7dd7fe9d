#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "viewhash/descriptor.hpp"
#include "viewhash/keyselect.hpp"

namespace vh {

struct HashTable {
    HashKey key;
    std::vector<std::vector<std::uint32_t>> buckets;  // 2^b entries
    std::vector<std::uint32_t> source_subset;         // ids this table indexes
};

struct ScaleIndex {
    std::uint16_t scale_cluster = 0;
    std::uint16_t window_width = 0;
    std::uint16_t window_height = 0;
    std::vector<HashTable> tables;
};

struct BucketStats {
    std::uint32_t used_buckets = 0;
    std::uint32_t max_bucket_size = 0;
    double stddev_nonempty = 0.0;  // population stddev over non-empty buckets
};

// Reads the key's bit positions out of `bits`; position j -> result bit j.
std::uint64_t extract_key(const BitVec& bits, const HashKey& key);

// Fills buckets with the subset's ids, hashed by hash_bits[id] (the spread
// descriptor bits). Insertion order ascending id.
HashTable build_table(const std::vector<BitVec>& hash_bits,
                      std::span<const std::uint32_t> subset, const HashKey& key);

// k random subsets of {0..n-1} whose union is the full range; each subset
// has size ~ n*(1+overlap*(k-1))/k.
std::vector<std::vector<std::uint32_t>> make_overlapping_subsets(
    std::size_t n, int k, double overlap_fraction, std::uint64_t seed);

// Union of bucket contents across all tables, deduplicated, ascending id.
std::vector<std::uint32_t> retrieve(const ScaleIndex& index, const BitVec& window_bits);

BucketStats bucket_stats(const HashTable& table);

struct IndexBuildConfig {
    Strategy strategy = Strategy::TBV;
    int tables_per_scale = 1;
    double overlap_fraction = 0.5;  // only used when tables_per_scale > 1
    int spread_radius = 1;
    ProximityConfig prox;
    std::uint64_t seed = 0;
};

// Full offline stage for one scale: spreads descriptors, learns one key per
// (overlapping) subset, fills the tables. Key length b = floor(log2 |subset|).
ScaleIndex build_scale_index(const DescriptorSet& set, const IndexBuildConfig& cfg);

}  // namespace vh
