#include "viewhash/keyselect.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "viewhash/rng.hpp"

namespace vh {

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::RBS: return "rbs";
        case Strategy::PBS: return "pbs";
        case Strategy::TBS: return "tbs";
        case Strategy::TBV: return "tbv";
    }
    return "?";
}

Strategy parse_strategy(const std::string& name) {
    if (name == "rbs" || name == "RBS") return Strategy::RBS;
    if (name == "pbs" || name == "PBS") return Strategy::PBS;
    if (name == "tbs" || name == "TBS") return Strategy::TBS;
    if (name == "tbv" || name == "TBV") return Strategy::TBV;
    throw std::invalid_argument("unknown strategy: " + name);
}

std::uint32_t key_length(std::size_t set_size) {
    if (set_size < 2) throw std::invalid_argument("key_length: set size must be >= 2");
    return static_cast<std::uint32_t>(std::bit_width(set_size) - 1);
}

double bit_entropy(const DescriptorSet& set, std::uint32_t position) {
    if (set.size() == 0) throw std::invalid_argument("bit_entropy: empty set");
    std::size_t ones = 0;
    for (const auto& d : set.descriptors) ones += d.bits.test(position);
    const double p1 = static_cast<double>(ones) / set.size();
    const double p0 = 1.0 - p1;
    double h = 0.0;
    if (p0 > 0) h -= p0 * std::log(p0);
    if (p1 > 0) h -= p1 * std::log(p1);
    return h;
}

std::uint32_t split_imbalance(const SplitNode& node, const DescriptorSet& set,
                              std::uint32_t position) {
    std::size_t right = 0;
    for (std::uint32_t id : node.members) right += set.descriptors[id].bits.test(position);
    const std::size_t left = node.members.size() - right;
    return static_cast<std::uint32_t>(left > right ? left - right : right - left);
}

bool quat_proximal(const Quat& qx, const Quat& qy, double tau) {
    if (std::abs(qx.norm() - 1.0) > 1e-6 || std::abs(qy.norm() - 1.0) > 1e-6)
        throw std::invalid_argument("quat_proximal: quaternion not unit norm");
    double d = std::abs(qx.dot(qy));
    d = std::clamp(d, -1.0, 1.0);
    return std::acos(d) < tau;
}

std::uint64_t scatter_penalty(std::span<const std::uint32_t> members,
                              std::uint32_t position, const DescriptorSet& set,
                              const ProximityConfig& prox) {
    // ordered pairs within each side; brute-force double loop
    std::uint64_t penalty = 0;
    for (std::size_t a = 0; a < members.size(); ++a) {
        const auto& da = set.descriptors[members[a]];
        const bool side_a = da.bits.test(position);
        for (std::size_t b = 0; b < members.size(); ++b) {
            if (a == b) continue;
            const auto& db = set.descriptors[members[b]];
            if (da.object_id != db.object_id) continue;
            if (db.bits.test(position) != side_a) continue;
            if (quat_proximal(da.pose, db.pose, prox.tau)) ++penalty;
        }
    }
    return penalty;
}

bool proximity_admissible(const HashKey& selected, std::uint32_t candidate,
                          std::uint16_t grid_width, std::uint16_t /*grid_height*/,
                          const ProximityConfig& prox) {
    const std::uint32_t cand_value = candidate % kValuesPerCell;
    const std::uint32_t cand_cell = candidate / kValuesPerCell;
    const int cx = static_cast<int>(cand_cell % grid_width);
    const int cy = static_cast<int>(cand_cell / grid_width);
    for (std::uint32_t p : selected.positions) {
        if (p == candidate) return false;
        if (p % kValuesPerCell != cand_value) continue;
        const std::uint32_t cell = p / kValuesPerCell;
        const int px = static_cast<int>(cell % grid_width);
        const int py = static_cast<int>(cell / grid_width);
        const int cheb = std::max(std::abs(px - cx), std::abs(py - cy));
        if (cheb < prox.same_value_min_distance) return false;
    }
    return true;
}

namespace {

std::vector<std::uint32_t> admissible_positions(const HashKey& selected,
                                                std::uint32_t d,
                                                std::uint16_t gw, std::uint16_t gh,
                                                const ProximityConfig& prox) {
    std::vector<std::uint32_t> out;
    out.reserve(d);
    for (std::uint32_t p = 0; p < d; ++p)
        if (proximity_admissible(selected, p, gw, gh, prox)) out.push_back(p);
    return out;
}

// Shared greedy level-wise tree growth for TBS (plain imbalance sum) and
// TBV (per-node imbalance/|N| + penalty/|N|^2).
KeySelection select_tree(const DescriptorSet& set, std::uint32_t b,
                         const ProximityConfig& prox, bool with_penalty) {
    if (set.size() == 0) throw std::invalid_argument("select_tree: empty set");
    const std::uint32_t d = set.bit_width;
    if (b > d) throw std::invalid_argument("select_tree: b > d");
    const std::size_t n = set.size();

    KeySelection out;
    out.key.strategy = with_penalty ? Strategy::TBV : Strategy::TBS;

    // proximal same-object pairs, fixed for the whole selection
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    if (with_penalty) {
        // group ids by object to skip cross-object comparisons
        std::vector<std::uint32_t> ids(n);
        std::iota(ids.begin(), ids.end(), 0u);
        std::stable_sort(ids.begin(), ids.end(), [&](std::uint32_t a, std::uint32_t c) {
            return set.descriptors[a].object_id < set.descriptors[c].object_id;
        });
        const double cos_tau = std::cos(prox.tau);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& da = set.descriptors[ids[i]];
            for (std::size_t j = i + 1; j < n; ++j) {
                const auto& db = set.descriptors[ids[j]];
                if (db.object_id != da.object_id) break;
                if (std::abs(da.pose.dot(db.pose)) > cos_tau)
                    pairs.emplace_back(std::min(ids[i], ids[j]), std::max(ids[i], ids[j]));
            }
        }
    }

    std::vector<std::uint32_t> node_of(n, 0);
    std::size_t num_nodes = 1;

    std::vector<double> objective(d);
    std::vector<std::uint32_t> hist(d, 0);
    std::vector<std::uint32_t> pair_diff(d, 0);
    std::vector<std::uint32_t> touched, pair_touched;

    while (out.key.length() < b) {
        const auto admissible =
            admissible_positions(out.key, d, set.grid_width, set.grid_height, prox);
        if (admissible.empty()) {
            out.truncated = true;
            break;
        }

        // bucket members (and co-located pairs) by node
        std::vector<std::vector<std::uint32_t>> node_members(num_nodes);
        for (std::uint32_t id = 0; id < n; ++id)
            node_members[node_of[id]].push_back(id);
        std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> node_pairs;
        if (with_penalty) {
            node_pairs.resize(num_nodes);
            for (const auto& pr : pairs)
                if (node_of[pr.first] == node_of[pr.second])
                    node_pairs[node_of[pr.first]].push_back(pr);
        }

        std::fill(objective.begin(), objective.end(), 0.0);
        for (std::size_t ni = 0; ni < num_nodes; ++ni) {
            const auto& members = node_members[ni];
            const double m = static_cast<double>(members.size());

            touched.clear();
            for (std::uint32_t id : members) {
                const BitVec& bits = set.descriptors[id].bits;
                for (std::size_t wi = 0; wi < bits.word_count(); ++wi) {
                    std::uint64_t w = bits.word(wi);
                    while (w) {
                        const std::uint32_t pos =
                            static_cast<std::uint32_t>(wi * 64 + std::countr_zero(w));
                        if (hist[pos]++ == 0) touched.push_back(pos);
                        w &= w - 1;
                    }
                }
            }

            std::uint64_t pairs_here = 0;
            if (with_penalty) {
                pair_touched.clear();
                pairs_here = node_pairs[ni].size();
                for (const auto& pr : node_pairs[ni]) {
                    const BitVec& ba = set.descriptors[pr.first].bits;
                    const BitVec& bb = set.descriptors[pr.second].bits;
                    for (std::size_t wi = 0; wi < ba.word_count(); ++wi) {
                        std::uint64_t w = ba.word(wi) ^ bb.word(wi);
                        while (w) {
                            const std::uint32_t pos =
                                static_cast<std::uint32_t>(wi * 64 + std::countr_zero(w));
                            if (pair_diff[pos]++ == 0) pair_touched.push_back(pos);
                            w &= w - 1;
                        }
                    }
                }
            }

            for (std::uint32_t pos : admissible) {
                const double right = hist[pos];
                const double imbalance = std::abs(m - 2.0 * right);
                if (with_penalty) {
                    // 2 * unordered co-located same-side pairs = ordered count
                    const double same_side =
                        2.0 * static_cast<double>(pairs_here - pair_diff[pos]);
                    objective[pos] += imbalance / m + same_side / (m * m);
                } else {
                    objective[pos] += imbalance;
                }
            }

            for (std::uint32_t pos : touched) hist[pos] = 0;
            if (with_penalty)
                for (std::uint32_t pos : pair_touched) pair_diff[pos] = 0;
        }

        std::uint32_t best = admissible.front();
        double best_obj = objective[best];
        for (std::uint32_t pos : admissible) {
            if (objective[pos] < best_obj) {
                best_obj = objective[pos];
                best = pos;
            }
        }

        // apply split unless it empties a child anywhere
        std::vector<std::uint32_t> left_count(num_nodes, 0), right_count(num_nodes, 0);
        for (std::uint32_t id = 0; id < n; ++id) {
            if (set.descriptors[id].bits.test(best))
                ++right_count[node_of[id]];
            else
                ++left_count[node_of[id]];
        }
        bool empties = false;
        for (std::size_t ni = 0; ni < num_nodes; ++ni)
            if (left_count[ni] == 0 || right_count[ni] == 0) { empties = true; break; }
        if (empties) {
            out.truncated = true;
            break;
        }

        // renumber children compactly: node -> (2*node + bit), then compress
        std::vector<std::uint32_t> remap(num_nodes * 2, std::numeric_limits<std::uint32_t>::max());
        std::uint32_t next_id = 0;
        for (std::uint32_t id = 0; id < n; ++id) {
            const std::uint32_t raw =
                node_of[id] * 2 + set.descriptors[id].bits.test(best);
            if (remap[raw] == std::numeric_limits<std::uint32_t>::max())
                remap[raw] = next_id++;
            node_of[id] = remap[raw];
        }
        num_nodes = next_id;
        out.key.positions.push_back(best);
    }

    if (out.key.length() < b) out.truncated = true;
    return out;
}

}  // namespace

KeySelection select_rbs(const DescriptorSet& set, std::uint32_t b,
                        std::uint64_t seed, const ProximityConfig& prox) {
    const std::uint32_t d = set.bit_width;
    if (b > d) throw std::invalid_argument("select_rbs: b > d");
    std::vector<std::uint32_t> perm(d);
    std::iota(perm.begin(), perm.end(), 0u);
    SplitMix64 rng(seed);
    shuffle(perm, rng);

    KeySelection out;
    out.key.strategy = Strategy::RBS;
    for (std::uint32_t pos : perm) {
        if (out.key.length() == b) break;
        if (proximity_admissible(out.key, pos, set.grid_width, set.grid_height, prox))
            out.key.positions.push_back(pos);
    }
    out.truncated = out.key.length() < b;
    return out;
}

KeySelection select_pbs(const DescriptorSet& set, std::uint32_t b,
                        const ProximityConfig& prox) {
    const std::uint32_t d = set.bit_width;
    if (b > d) throw std::invalid_argument("select_pbs: b > d");
    std::vector<double> entropy(d);
    for (std::uint32_t p = 0; p < d; ++p) entropy[p] = bit_entropy(set, p);
    std::vector<std::uint32_t> order(d);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t c) {
        if (entropy[a] != entropy[c]) return entropy[a] > entropy[c];
        return a < c;
    });

    KeySelection out;
    out.key.strategy = Strategy::PBS;
    for (std::uint32_t pos : order) {
        if (out.key.length() == b) break;
        if (entropy[pos] == 0.0) break;  // constant bits carry no information
        if (proximity_admissible(out.key, pos, set.grid_width, set.grid_height, prox))
            out.key.positions.push_back(pos);
    }
    out.truncated = out.key.length() < b;
    return out;
}

KeySelection select_tbs(const DescriptorSet& set, std::uint32_t b,
                        const ProximityConfig& prox) {
    return select_tree(set, b, prox, false);
}

KeySelection select_tbv(const DescriptorSet& set, std::uint32_t b,
                        const ProximityConfig& prox) {
    return select_tree(set, b, prox, true);
}

KeySelection select_key(const DescriptorSet& set, Strategy strategy,
                        std::uint32_t b, std::uint64_t seed,
                        const ProximityConfig& prox) {
    switch (strategy) {
        case Strategy::RBS: return select_rbs(set, b, seed, prox);
        case Strategy::PBS: return select_pbs(set, b, prox);
        case Strategy::TBS: return select_tbs(set, b, prox);
        case Strategy::TBV: return select_tbv(set, b, prox);
    }
    throw std::invalid_argument("select_key: unknown strategy");
}

}  // namespace vh
