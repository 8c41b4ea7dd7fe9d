#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "viewhash/descriptor.hpp"

namespace vh {

enum class Strategy { RBS, PBS, TBS, TBV };

const char* strategy_name(Strategy s);
Strategy parse_strategy(const std::string& name);  // throws on unknown name

// Ordered list of bit positions; reading those bits of a descriptor yields
// the bucket index (position 0 = least significant).
struct HashKey {
    Strategy strategy = Strategy::RBS;
    std::vector<std::uint32_t> positions;

    std::size_t length() const { return positions.size(); }
};

struct ProximityConfig {
    double tau = 0.3;                 // radians, view-proximity threshold
    int same_value_min_distance = 1;  // cells, same-value bit exclusion radius
};

struct KeySelection {
    HashKey key;
    bool truncated = false;  // fewer than the requested b bits were admissible
};

// One node of the greedy split tree: descriptor ids it holds and its level.
struct SplitNode {
    std::vector<std::uint32_t> members;
    int depth = 0;
};

// floor(log2(set_size)); set_size must be >= 2
std::uint32_t key_length(std::size_t set_size);

// Shannon entropy (nats) of the bit at `position` over the set, 0 ln 0 := 0.
double bit_entropy(const DescriptorSet& set, std::uint32_t position);

// | |S_L| - |S_R| | when splitting the node's members by the given bit.
std::uint32_t split_imbalance(const SplitNode& node, const DescriptorSet& set,
                              std::uint32_t position);

// Whether two rotations are within tau of each other, double cover handled
// by the absolute dot product. Quaternions must be unit norm within 1e-6.
bool quat_proximal(const Quat& qx, const Quat& qy, double tau);

// P(S_L) + P(S_R) for splitting `members` by `position`: counts ordered
// same-object pairs within one side whose poses are quat_proximal.
// Self-pairs are excluded.
std::uint64_t scatter_penalty(std::span<const std::uint32_t> members,
                              std::uint32_t position, const DescriptorSet& set,
                              const ProximityConfig& prox);

// True iff `candidate` may still be selected: no already-selected position
// encodes the same orientation value at a cell closer (Chebyshev) than
// same_value_min_distance. Already-selected positions are never admissible.
bool proximity_admissible(const HashKey& selected, std::uint32_t candidate,
                          std::uint16_t grid_width, std::uint16_t grid_height,
                          const ProximityConfig& prox);

KeySelection select_rbs(const DescriptorSet& set, std::uint32_t b,
                        std::uint64_t seed, const ProximityConfig& prox);
KeySelection select_pbs(const DescriptorSet& set, std::uint32_t b,
                        const ProximityConfig& prox);
KeySelection select_tbs(const DescriptorSet& set, std::uint32_t b,
                        const ProximityConfig& prox);
KeySelection select_tbv(const DescriptorSet& set, std::uint32_t b,
                        const ProximityConfig& prox);

KeySelection select_key(const DescriptorSet& set, Strategy strategy,
                        std::uint32_t b, std::uint64_t seed,
                        const ProximityConfig& prox);

}  // namespace vh
