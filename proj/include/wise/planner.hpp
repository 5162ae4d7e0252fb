#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "wise/crypto.hpp"
#include "wise/hmm.hpp"
#include "wise/swarm.hpp"

namespace wise {

/// How relay sensitivity is priced when bridging.
enum class SensitivityCost {
    AvoidSensitive, // cost = max_degree + 1 - degree: degree 1 (most sensitive) is dearest
    RawDegree,      // cost = degree, literal objective
};

/// Granularity of the healthy score used for ranking.
enum class ScoreScope {
    Device,            // each device's own estimate
    GeographicCluster, // mean over the device's geographic cluster
    WeakestCluster,    // lowest cluster mean over every category the device is in
};

struct PlanConfig {
    double th_cov = 0.2;
    Minutes iteration_period = 60;
    std::size_t m_paths = 3;
    std::size_t bins = 10;
    /// Devices with fewer segments than this use parameters pooled over the swarm.
    std::size_t min_device_segments = 2;
    bool global_fallback = true;
    SensitivityCost sensitivity = SensitivityCost::AvoidSensitive;
    /// Adds min(1, time since last verification / T_max) as a third feature.
    bool staleness_feature = true;
    /// Rank by the posterior of Healthy instead of the unnormalized joint term.
    bool normalize_posterior = true;
    ScoreScope score_scope = ScoreScope::WeakestCluster;
    std::uint64_t exact_bridge_limit = 10000;
    /// Upper bound on the serialized request; the cluster cover is squeezed to fit.
    std::size_t max_request_bytes = 304;

    void validate() const {
        if (!(th_cov > 0.0) || th_cov > 1.0) throw config_error("coverage threshold must lie in (0, 1]");
        if (!(iteration_period > 0.0)) throw config_error("iteration period must be positive");
        if (bins == 0) throw config_error("bin count must be positive");
        if (max_request_bytes < 60) throw config_error("request budget must hold at least one cluster");
    }
};

/// The verifier's evolving view of every device.
struct KnowledgeBase {
    std::vector<DeviceRecord> records;
    std::vector<std::vector<hmm::ObservationVector>> observations; // aligned with records[d].history
    std::vector<char> invalid_flag;
    Minutes current_time = 0;
    std::size_t iteration = 0;

    static KnowledgeBase from(const SwarmGraph& swarm) {
        KnowledgeBase kb;
        kb.records = swarm.records();
        kb.observations.resize(swarm.size());
        kb.invalid_flag.assign(swarm.size(), 0);
        return kb;
    }

    std::size_t size() const noexcept { return records.size(); }

    /// Most recent known outcome per device (NotAttested if never attested).
    std::optional<Outcome> last_verified(DeviceId d) const {
        const auto& h = records.at(d).history;
        for (auto it = h.rbegin(); it != h.rend(); ++it)
            if (*it != Outcome::NotAttested) return *it;
        return std::nullopt;
    }

    std::vector<Outcome> last_known() const {
        std::vector<Outcome> out(records.size(), Outcome::NotAttested);
        for (DeviceId d = 0; d < records.size(); ++d)
            if (auto o = last_verified(d)) out[d] = *o;
        return out;
    }

    hmm::AttestHistory history(DeviceId d) const { return {records.at(d).history, observations.at(d)}; }
};

struct AttestPlan {
    std::vector<DeviceId> n_attest;
    std::vector<DeviceId> n_bridge;
    std::vector<ClusterId> c_attest;
    std::vector<ClusterId> c_bridge;
    crypto::Nonce nonce;
    std::uint32_t timeout_ms = 0;
};

struct CandidateScores {
    std::vector<double> healthy;                        // per device
    std::vector<hmm::ObservationVector> observations;   // current features per device
};

/// Feature vectors for every device against the knowledge base as it
/// stands before the next round.
inline std::vector<hmm::ObservationVector> current_observations(const KnowledgeBase& kb, const SwarmGraph& swarm,
                                                                 const PlanConfig& cfg) {
    auto last = kb.last_known();
    hmm::FeatureContext ctx(swarm, last);
    std::vector<hmm::ObservationVector> out(swarm.size());
    for (DeviceId d = 0; d < swarm.size(); ++d) {
        out[d] = ctx.features(d);
        if (cfg.staleness_feature) {
            const auto& r = kb.records[d];
            double age = r.t_max > 0 ? (kb.current_time - r.t_last) / r.t_max : 1.0;
            out[d].push_back(std::clamp(age, 0.0, 1.0));
        }
    }
    return out;
}

/// Per-device healthy probability from the device's own counting estimate
/// (pooled estimate for short histories, 0.5 with no history) and its
/// current features.  The previous-state prior is the last verified
/// outcome when there is one.
inline CandidateScores candidate_probabilities(const KnowledgeBase& kb, const SwarmGraph& swarm, const PlanConfig& cfg) {
    const std::size_t n = swarm.size();
    if (kb.size() != n) throw error("knowledge base does not match the swarm");
    auto last = kb.last_known();
    CandidateScores out;
    out.healthy.assign(n, 0.5);
    out.observations = current_observations(kb, swarm, cfg);

    std::vector<std::vector<hmm::TrainingSegment>> segments(n);
    std::vector<hmm::Counts> counts(n);
    hmm::Counts pooled;
    for (DeviceId d = 0; d < n; ++d) {
        segments[d] = hmm::segment_history(kb.history(d));
        if (segments[d].empty()) continue;
        counts[d] = hmm::count_statistics(segments[d], cfg.bins);
        if (cfg.global_fallback) pooled += counts[d];
    }
    std::optional<hmm::HmmParams> global;
    if (cfg.global_fallback && pooled.segments > 0) global = hmm::params_from_counts(pooled);

    for (DeviceId d = 0; d < n; ++d) {
        if (segments[d].empty()) continue;
        const bool use_global = global && segments[d].size() < cfg.min_device_segments;
        hmm::HmmParams own;
        if (!use_global) own = hmm::params_from_counts(counts[d]);
        const hmm::HmmParams& params = use_global ? *global : own;
        std::array<double, hmm::kStates> prior = params.pi;
        if (last[d] == Outcome::Compromised) prior = {1.0, 0.0};
        else if (last[d] == Outcome::Healthy) prior = {0.0, 1.0};
        out.healthy[d] = cfg.normalize_posterior ? hmm::posterior_healthy(params, prior, out.observations[d])
                                                 : hmm::infer_healthy(params, prior, out.observations[d]);
    }
    if (cfg.score_scope == ScoreScope::GeographicCluster) {
        // whole clusters are attested together, so rank them as units
        const auto& clusters = swarm.scheme().categories.at(kGeographic).clusters;
        std::vector<double> mean(n, 0.5);
        for (const auto& cl : clusters) {
            if (cl.empty()) continue;
            double sum = 0;
            for (DeviceId d : cl) sum += out.healthy[d];
            for (DeviceId d : cl) mean[d] = sum / static_cast<double>(cl.size());
        }
        out.healthy = std::move(mean);
    } else if (cfg.score_scope == ScoreScope::WeakestCluster) {
        std::vector<double> low(n, 1.0);
        for (const auto& cat : swarm.scheme().categories)
            for (const auto& cl : cat.clusters) {
                if (cl.empty()) continue;
                double sum = 0;
                for (DeviceId d : cl) sum += out.healthy[d];
                for (DeviceId d : cl) low[d] = std::min(low[d], sum / static_cast<double>(cl.size()));
            }
        out.healthy = std::move(low);
    }
    return out;
}

/// True when waiting another period would overrun the device's T_max.
inline bool deadline_due(const DeviceRecord& r, Minutes now, Minutes period) {
    return r.t_last + r.t_max <= now + period;
}

/// Deadline-due devices first, then the least-likely-healthy devices until
/// the coverage threshold is met.  Ties go to the lower id.
inline std::vector<DeviceId> select_candidates(std::span<const double> healthy, const KnowledgeBase& kb,
                                               const PlanConfig& cfg) {
    cfg.validate();
    const std::size_t n = kb.size();
    if (healthy.size() != n) throw error("probabilities do not cover every device");
    const auto quota = static_cast<std::size_t>(std::ceil(cfg.th_cov * static_cast<double>(n) - 1e-9));

    std::vector<char> chosen(n, 0);
    std::size_t count = 0;
    for (DeviceId d = 0; d < n; ++d)
        if (deadline_due(kb.records[d], kb.current_time, cfg.iteration_period)) {
            chosen[d] = 1;
            ++count;
        }
    if (count < quota) {
        std::vector<DeviceId> rest;
        rest.reserve(n - count);
        for (DeviceId d = 0; d < n; ++d)
            if (!chosen[d]) rest.push_back(d);
        std::size_t need = quota - count;
        std::partial_sort(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(need), rest.end(),
                          [&](DeviceId a, DeviceId b) { return healthy[a] != healthy[b] ? healthy[a] < healthy[b] : a < b; });
        for (std::size_t i = 0; i < need; ++i) chosen[rest[i]] = 1;
    }
    std::vector<DeviceId> out;
    for (DeviceId d = 0; d < n; ++d)
        if (chosen[d]) out.push_back(d);
    return out;
}

inline double relay_cost(const SwarmGraph& swarm, DeviceId d, SensitivityCost mode) {
    int degree = swarm.record(d).degree;
    return mode == SensitivityCost::RawDegree ? degree : swarm.max_degree() + 1 - degree;
}

struct BridgeSelection {
    std::vector<DeviceId> bridge;      // sorted
    std::vector<std::size_t> chosen;   // path index per candidate, aligned with the n_attest input
    double cost = 0;                   // summed relay cost of the bridge set
    bool exact = false;
};

namespace detail {

inline std::uint64_t combination_count(const SwarmGraph& swarm, std::span<const DeviceId> n_attest, std::uint64_t cap) {
    std::uint64_t total = 1;
    for (DeviceId d : n_attest) {
        total *= swarm.record(d).paths.size();
        if (total > cap) return cap + 1;
    }
    return total;
}

} // namespace detail

/// Chooses one stored path per candidate so that the relay devices (path
/// devices that are not candidates) are as cheap as possible.  Exhaustive
/// over all path combinations when there are at most `exact_bridge_limit`
/// of them, otherwise greedy with local improvement.
inline BridgeSelection bridge_gaps(const SwarmGraph& swarm, std::span<const DeviceId> n_attest, const PlanConfig& cfg) {
    const std::size_t n = swarm.size();
    for (DeviceId d : n_attest)
        if (swarm.record(d).paths.empty()) throw unreachable_device(d);

    std::vector<char> candidate(n, 0);
    for (DeviceId d : n_attest) candidate[d] = 1;
    std::vector<double> cost(n);
    for (DeviceId d = 0; d < n; ++d) cost[d] = relay_cost(swarm, d, cfg.sensitivity);

    const std::size_t k = n_attest.size();
    BridgeSelection best;
    best.chosen.assign(k, 0);

    auto finish = [&](BridgeSelection& sel) {
        std::vector<char> used(n, 0);
        sel.bridge.clear();
        sel.cost = 0;
        for (std::size_t i = 0; i < k; ++i)
            for (DeviceId v : swarm.record(n_attest[i]).paths[sel.chosen[i]])
                if (!candidate[v] && !used[v]) {
                    used[v] = 1;
                    sel.bridge.push_back(v);
                    sel.cost += cost[v];
                }
        std::sort(sel.bridge.begin(), sel.bridge.end());
    };

    std::uint64_t combos = detail::combination_count(swarm, n_attest, cfg.exact_bridge_limit);
    if (combos <= cfg.exact_bridge_limit) {
        std::vector<std::uint32_t> stamp(n, 0);
        std::uint32_t round = 0;
        std::vector<std::size_t> idx(k, 0);
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::uint64_t c = 0; c < combos; ++c) {
            ++round;
            double total = 0;
            for (std::size_t i = 0; i < k; ++i)
                for (DeviceId v : swarm.record(n_attest[i]).paths[idx[i]])
                    if (!candidate[v] && stamp[v] != round) {
                        stamp[v] = round;
                        total += cost[v];
                    }
            if (total < best_cost) {
                best_cost = total;
                best.chosen = idx;
            }
            for (std::size_t i = 0; i < k; ++i) {
                if (++idx[i] < swarm.record(n_attest[i]).paths.size()) break;
                idx[i] = 0;
            }
        }
        best.exact = true;
        finish(best);
        return best;
    }

    // Greedy: nearest candidates first, each taking the path with the smallest
    // marginal relay cost given the relays already chosen.
    std::vector<std::uint32_t> refs(n, 0);
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return swarm.depth(n_attest[a]) < swarm.depth(n_attest[b]); });
    auto marginal = [&](const HopPath& p) {
        double total = 0;
        for (DeviceId v : p)
            if (!candidate[v] && refs[v] == 0) total += cost[v];
        return total;
    };
    auto pick = [&](std::size_t i) {
        const auto& paths = swarm.record(n_attest[i]).paths;
        std::size_t choice = 0;
        double best_marginal = marginal(paths[0]);
        for (std::size_t p = 1; p < paths.size(); ++p) {
            double m = marginal(paths[p]);
            if (m < best_marginal) {
                best_marginal = m;
                choice = p;
            }
        }
        return choice;
    };
    auto apply = [&](std::size_t i, int delta) {
        for (DeviceId v : swarm.record(n_attest[i]).paths[best.chosen[i]]) refs[v] += delta;
    };
    for (std::size_t i : order) {
        best.chosen[i] = pick(i);
        apply(i, +1);
    }
    for (int pass = 0; pass < 4; ++pass) {
        bool changed = false;
        for (std::size_t i : order) {
            apply(i, -1);
            std::size_t choice = pick(i);
            if (choice != best.chosen[i]) {
                double old_m = marginal(swarm.record(n_attest[i]).paths[best.chosen[i]]);
                double new_m = marginal(swarm.record(n_attest[i]).paths[choice]);
                if (new_m < old_m) {
                    best.chosen[i] = choice;
                    changed = true;
                }
            }
            apply(i, +1);
        }
        if (!changed) break;
    }
    finish(best);
    return best;
}

/// Hop-weighted size of a cluster: sum of member shortest-path depths.
inline double com_overhead(const SwarmGraph& swarm, ClusterId c) {
    double total = 0;
    for (DeviceId d : swarm.scheme().members(c)) {
        const auto& paths = swarm.record(d).paths;
        total += paths.empty() ? static_cast<double>(swarm.size()) : static_cast<double>(paths.front().size());
    }
    return total;
}

struct ClusterSelection {
    std::vector<ClusterId> c_attest;
    std::vector<ClusterId> c_bridge;
    double cost = 0;
};

namespace detail {

// Greedy weighted cover; every cluster is charged `penalty` on top of its
// com_overhead.
inline ClusterSelection greedy_cover(const SwarmGraph& swarm, const std::vector<char>& target,
                                     const std::vector<char>& is_attest, std::size_t remaining, double penalty) {
    const std::size_t n = swarm.size();
    struct Entry {
        ClusterId id;
        double overhead;
        double cost;
        std::size_t uncovered;
    };
    std::vector<Entry> entries;
    std::vector<std::vector<std::size_t>> entry_of_cluster(swarm.scheme().category_count());
    const auto& cats = swarm.scheme().categories;
    for (std::size_t c = 0; c < cats.size(); ++c) {
        entry_of_cluster[c].assign(cats[c].clusters.size(), SIZE_MAX);
        for (std::size_t i = 0; i < cats[c].clusters.size(); ++i) {
            ClusterId id{static_cast<std::uint8_t>(c), static_cast<std::uint16_t>(i)};
            std::size_t hits = 0;
            for (DeviceId d : cats[c].clusters[i]) hits += target[d];
            if (hits == 0) continue;
            entry_of_cluster[c][i] = entries.size();
            double overhead = com_overhead(swarm, id);
            entries.push_back({id, overhead, overhead + penalty, hits});
        }
    }

    ClusterSelection out;
    std::vector<char> covered(n, 0);
    while (remaining > 0) {
        std::size_t best = SIZE_MAX;
        for (std::size_t e = 0; e < entries.size(); ++e) {
            if (entries[e].uncovered == 0) continue;
            if (best == SIZE_MAX) {
                best = e;
                continue;
            }
            // cost/uncovered compared without division
            double lhs = entries[e].cost * static_cast<double>(entries[best].uncovered);
            double rhs = entries[best].cost * static_cast<double>(entries[e].uncovered);
            if (lhs < rhs || (lhs == rhs && entries[e].cost < entries[best].cost)) best = e;
        }
        if (best == SIZE_MAX) throw error("cluster scheme cannot cover every planned device");
        const Entry& chosen = entries[best];
        out.cost += chosen.overhead;
        bool touches_candidate = false;
        for (DeviceId d : swarm.scheme().members(chosen.id)) {
            touches_candidate = touches_candidate || is_attest[d];
            if (!target[d] || covered[d]) continue;
            covered[d] = 1;
            --remaining;
            for (ClusterId c : swarm.record(d).clusters) {
                std::size_t e = entry_of_cluster[c.category][c.index];
                if (e != SIZE_MAX) --entries[e].uncovered;
            }
        }
        (touches_candidate ? out.c_attest : out.c_bridge).push_back(chosen.id);
    }
    std::sort(out.c_attest.begin(), out.c_attest.end());
    std::sort(out.c_bridge.begin(), out.c_bridge.end());
    return out;
}

} // namespace detail

/// Greedy weighted set cover of n_attest and n_bridge by clusters of any
/// category, priced by com_overhead.  Chosen clusters touching a candidate
/// form C_attest, the rest C_bridge.  When the cover needs more than
/// `max_clusters` ids, a per-cluster charge is added, set to the smallest
/// value found that makes the cover fit; this trades overhead for fewer,
/// larger clusters.
inline ClusterSelection select_clusters(const SwarmGraph& swarm, std::span<const DeviceId> n_attest,
                                        std::span<const DeviceId> n_bridge, std::size_t max_clusters = SIZE_MAX) {
    const std::size_t n = swarm.size();
    std::vector<char> target(n, 0), is_attest(n, 0);
    std::size_t remaining = 0;
    for (DeviceId d : n_attest) {
        if (!swarm.contains(d)) throw unknown_device(d);
        is_attest[d] = 1;
        if (!target[d]) ++remaining;
        target[d] = 1;
    }
    for (DeviceId d : n_bridge) {
        if (!swarm.contains(d)) throw unknown_device(d);
        if (is_attest[d]) throw error("attest and bridge sets overlap at device " + std::to_string(d));
        if (!target[d]) ++remaining;
        target[d] = 1;
    }
    for (DeviceId d = 0; d < n; ++d)
        if (target[d] && swarm.record(d).clusters.empty()) throw error("device " + std::to_string(d) + " is in no cluster");

    auto out = detail::greedy_cover(swarm, target, is_attest, remaining, 0.0);
    auto count = [](const ClusterSelection& s) { return s.c_attest.size() + s.c_bridge.size(); };
    if (count(out) <= max_clusters) return out;
    double lo = 0, hi = std::max(1.0, out.cost / static_cast<double>(count(out)));
    for (int round = 0; round < 64; ++round, lo = hi, hi *= 2) {
        out = detail::greedy_cover(swarm, target, is_attest, remaining, hi);
        if (count(out) <= max_clusters) break;
    }
    if (count(out) > max_clusters) return out;
    // smallest charge that still fits, to a relative 1%
    while (hi - lo > 0.01 * hi) {
        double mid = (lo + hi) / 2;
        auto trial = detail::greedy_cover(swarm, target, is_attest, remaining, mid);
        if (count(trial) <= max_clusters) {
            hi = mid;
            out = std::move(trial);
        } else {
            lo = mid;
        }
    }
    return out;
}

/// Lower bound on the probability that no compromised device goes unnoticed.
inline double security_threshold(std::size_t attested, std::size_t n, std::span<const double> unselected_healthy) {
    if (n == 0 || attested > n) throw config_error("attested count must not exceed the swarm size");
    double sum = std::accumulate(unselected_healthy.begin(), unselected_healthy.end(), 0.0);
    return static_cast<double>(attested) / static_cast<double>(n) + sum / static_cast<double>(n);
}

/// Window length of a device in iterations.
inline std::size_t window_iterations(const DeviceRecord& r, Minutes period) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(r.t_max / period)));
}

/// Devices with no known outcome in their trailing window.
inline std::vector<DeviceId> enforce_window(const KnowledgeBase& kb, Minutes period) {
    std::vector<DeviceId> out;
    for (DeviceId d = 0; d < kb.size(); ++d) {
        const auto& h = kb.records[d].history;
        std::size_t w = window_iterations(kb.records[d], period);
        if (h.size() < w) continue;
        bool seen = std::any_of(h.end() - static_cast<std::ptrdiff_t>(w), h.end(),
                                [](Outcome o) { return o != Outcome::NotAttested; });
        if (!seen) out.push_back(d);
    }
    return out;
}

inline bool in_any_cluster(const SwarmGraph& swarm, DeviceId d, std::span<const ClusterId> clusters) {
    for (ClusterId c : swarm.record(d).clusters)
        if (std::binary_search(clusters.begin(), clusters.end(), c)) return true;
    return false;
}

/// Appends one outcome per device: the verdict for every device that
/// reported (Invalid counts as Compromised and raises the device's flag),
/// NotAttested for everyone else.  Reporters must belong to C_attest.
inline void update_knowledge(KnowledgeBase& kb, const SwarmGraph& swarm,
                             std::span<const std::pair<DeviceId, crypto::Verdict>> verified, const AttestPlan& plan,
                             Minutes time, std::span<const hmm::ObservationVector> observations) {
    const std::size_t n = kb.size();
    if (observations.size() != n) throw error("observations do not cover every device");
    std::vector<Outcome> outcome(n, Outcome::NotAttested);
    std::vector<char> flagged(n, 0);
    for (auto [d, v] : verified) {
        if (d >= n) throw unknown_device(d);
        if (!in_any_cluster(swarm, d, plan.c_attest))
            throw error("device " + std::to_string(d) + " reported without being planned");
        outcome[d] = v == crypto::Verdict::Healthy ? Outcome::Healthy : Outcome::Compromised;
        flagged[d] = v == crypto::Verdict::Invalid;
    }
    for (DeviceId d = 0; d < n; ++d) {
        auto& r = kb.records[d];
        r.history.push_back(outcome[d]);
        kb.observations[d].push_back(observations[d]);
        if (outcome[d] != Outcome::NotAttested) {
            r.t_last = time;
            kb.invalid_flag[d] = flagged[d];
        }
    }
    kb.current_time = time;
    ++kb.iteration;
}

// Request payload: version(1) | nonce(16) | timeout_ms(4) | |C_attest|(2) |
// ids(3 each) | |C_bridge|(2) | ids | km-MAC(32).

inline constexpr std::uint8_t kRequestVersion = 1;

inline crypto::Bytes encode_request(const AttestPlan& plan, const crypto::Key& km) {
    crypto::Bytes p;
    p.push_back(kRequestVersion);
    p.insert(p.end(), plan.nonce.bytes.begin(), plan.nonce.bytes.end());
    for (int s = 24; s >= 0; s -= 8) p.push_back(static_cast<std::uint8_t>(plan.timeout_ms >> s));
    auto put_clusters = [&](const std::vector<ClusterId>& cs) {
        if (cs.size() > 0xFFFF) throw error("too many clusters for one request");
        p.push_back(static_cast<std::uint8_t>(cs.size() >> 8));
        p.push_back(static_cast<std::uint8_t>(cs.size()));
        for (ClusterId c : cs) {
            p.push_back(c.category);
            p.push_back(static_cast<std::uint8_t>(c.index >> 8));
            p.push_back(static_cast<std::uint8_t>(c.index));
        }
    };
    put_clusters(plan.c_attest);
    put_clusters(plan.c_bridge);
    return crypto::authenticate_request(p, km);
}

inline constexpr std::size_t kRequestFixedBytes = 1 + 16 + 4 + 2 + 2 + 32;

inline std::size_t request_size(const AttestPlan& plan) {
    return kRequestFixedBytes + 3 * (plan.c_attest.size() + plan.c_bridge.size());
}

/// How many cluster ids fit into a request of `max_bytes`.
inline std::size_t request_cluster_budget(std::size_t max_bytes) {
    return max_bytes < kRequestFixedBytes + 3 ? 1 : (max_bytes - kRequestFixedBytes) / 3;
}

struct RequestPayload {
    crypto::Nonce nonce;
    std::uint32_t timeout_ms = 0;
    std::vector<ClusterId> c_attest;
    std::vector<ClusterId> c_bridge;
};

inline std::optional<RequestPayload> decode_request(std::span<const std::uint8_t> tagged, const crypto::Key& km) {
    auto payload = crypto::verify_request(tagged, km);
    if (!payload) return std::nullopt;
    const auto& p = *payload;
    std::size_t pos = 0;
    auto need = [&](std::size_t k) { return pos + k <= p.size(); };
    if (!need(21) || p[0] != kRequestVersion) return std::nullopt;
    RequestPayload out;
    std::copy_n(p.begin() + 1, 16, out.nonce.bytes.begin());
    out.timeout_ms = (std::uint32_t{p[17]} << 24) | (std::uint32_t{p[18]} << 16) | (std::uint32_t{p[19]} << 8) | p[20];
    pos = 21;
    auto get_clusters = [&](std::vector<ClusterId>& cs) {
        if (!need(2)) return false;
        std::size_t count = (std::size_t{p[pos]} << 8) | p[pos + 1];
        pos += 2;
        if (!need(3 * count)) return false;
        for (std::size_t i = 0; i < count; ++i, pos += 3)
            cs.push_back({p[pos], static_cast<std::uint16_t>((p[pos + 1] << 8) | p[pos + 2])});
        return true;
    };
    if (!get_clusters(out.c_attest) || !get_clusters(out.c_bridge) || pos != p.size()) return std::nullopt;
    return out;
}

/// Every cluster of one category: attests the whole swarm.
inline AttestPlan full_plan(const SwarmGraph& swarm, std::size_t category = 0) {
    AttestPlan plan;
    const auto& clusters = swarm.scheme().categories.at(category).clusters;
    for (std::size_t i = 0; i < clusters.size(); ++i)
        if (!clusters[i].empty())
            plan.c_attest.push_back({static_cast<std::uint8_t>(category), static_cast<std::uint16_t>(i)});
    plan.n_attest.resize(swarm.size());
    std::iota(plan.n_attest.begin(), plan.n_attest.end(), 0);
    return plan;
}

/// Candidate selection, bridging and cluster cover for one iteration.
/// Nonce and timeout are left for the caller.
inline AttestPlan make_plan(const SwarmGraph& swarm, const KnowledgeBase& kb, std::span<const double> healthy,
                            const PlanConfig& cfg) {
    AttestPlan plan;
    plan.n_attest = select_candidates(healthy, kb, cfg);
    plan.n_bridge = bridge_gaps(swarm, plan.n_attest, cfg).bridge;
    auto clusters = select_clusters(swarm, plan.n_attest, plan.n_bridge, request_cluster_budget(cfg.max_request_bytes));
    plan.c_attest = std::move(clusters.c_attest);
    plan.c_bridge = std::move(clusters.c_bridge);
    return plan;
}

} // namespace wise
