#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <vector>

#include "wise/crypto.hpp"
#include "wise/planner.hpp"
#include "wise/swarm.hpp"
#include "wise/topology.hpp"

namespace wise {

struct SimConfig {
    Millis hop_latency = 10;
    Millis hop_jitter = 2;
    double compute_ms_per_kb = 1.0;
    std::array<double, 3> platform_multiplier{1.0, 2.0, 4.0};
    double memory_kb = 32;           // modelled size, drives compute latency
    std::size_t image_bytes = 64;    // bytes actually hashed in the simulation
    double timeout_slack = 1.5;
    double loss_probability = 0.0;
    bool compromised_bridges_drop = false;

    Millis hop_max() const { return hop_latency + hop_jitter; }

    void validate() const {
        if (!(hop_latency > 0) || hop_jitter < 0 || hop_jitter >= hop_latency)
            throw config_error("hop latency must stay positive");
        if (!(compute_ms_per_kb > 0) || !(memory_kb > 0)) throw config_error("compute latency must be positive");
        for (double m : platform_multiplier)
            if (!(m > 0)) throw config_error("platform multipliers must be positive");
        if (image_bytes == 0) throw config_error("memory image must not be empty");
        if (!(timeout_slack >= 1.0)) throw config_error("timeout slack must be at least 1");
        if (loss_probability < 0 || loss_probability >= 1) throw config_error("loss probability must lie in [0, 1)");
    }
};

enum class Role : std::uint8_t { Idle, Attester, Bridge };

/// Persistent per-device state.  The reference image is what the verifier
/// provisioned; `memory` is what the device actually runs.
struct ProverState {
    DeviceId device = 0;
    crypto::DeviceKeys keys;
    crypto::Mac expected;
    crypto::MemoryImage reference;
    crypto::MemoryImage memory;
    Role role = Role::Idle;
    std::optional<DeviceId> parent; // kVerifierId for attachment devices
    std::vector<DeviceId> children;
    std::vector<crypto::Aggregate> pending;

    bool compromised() const { return memory.bytes != reference.bytes; }
};

inline constexpr DeviceId kVerifierId = std::numeric_limits<DeviceId>::max();

/// Provers plus the verifier's key material for one swarm.
struct Network {
    crypto::KeyMaterial keys;
    std::vector<ProverState> provers;

    static Network provision(std::size_t n, std::uint64_t seed, std::size_t image_bytes) {
        Network net;
        net.keys = crypto::KeyMaterial::derive(seed, n);
        net.provers.resize(n);
        std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
        for (DeviceId d = 0; d < n; ++d) {
            auto& p = net.provers[d];
            p.device = d;
            p.keys = net.keys.devices[d];
            p.reference.bytes.resize(image_bytes);
            for (auto& b : p.reference.bytes) b = static_cast<std::uint8_t>(rng());
            p.memory = p.reference;
            p.expected = crypto::measure(p.reference, p.keys.ak);
        }
        return net;
    }

    std::size_t size() const noexcept { return provers.size(); }

    std::vector<crypto::Mac> expected() const {
        std::vector<crypto::Mac> out;
        out.reserve(provers.size());
        for (const auto& p : provers) out.push_back(p.expected);
        return out;
    }

    std::vector<DeviceId> compromised() const {
        std::vector<DeviceId> out;
        for (const auto& p : provers)
            if (p.compromised()) out.push_back(p.device);
        return out;
    }

    void restore(DeviceId d) { provers.at(d).memory = provers.at(d).reference; }
};

/// Time to measure the device's memory on its platform class.
inline Millis compute_latency(const SwarmGraph& swarm, DeviceId d, const SimConfig& cfg) {
    std::size_t platform = 0;
    if (swarm.scheme().category_count() > kHardware)
        if (auto idx = swarm.cluster_of(d, kHardware)) platform = *idx % cfg.platform_multiplier.size();
    return cfg.memory_kb * cfg.compute_ms_per_kb * cfg.platform_multiplier[platform];
}

/// Roles implied by a plan: Attester for C_attest members, Bridge for
/// C_bridge members, Idle otherwise.
inline std::vector<Role> plan_roles(const SwarmGraph& swarm, const std::vector<ClusterId>& c_attest,
                                    const std::vector<ClusterId>& c_bridge) {
    std::vector<Role> roles(swarm.size(), Role::Idle);
    for (ClusterId c : c_bridge)
        for (DeviceId d : swarm.scheme().members(c)) roles[d] = Role::Bridge;
    for (ClusterId c : c_attest)
        for (DeviceId d : swarm.scheme().members(c)) roles[d] = Role::Attester;
    return roles;
}

/// Hop depth of every device inside the subgraph of planned devices
/// (SIZE_MAX where the flood cannot reach).
inline std::vector<std::size_t> flood_depths(const SwarmGraph& swarm, const std::vector<Role>& roles) {
    std::vector<std::size_t> depth(swarm.size(), SIZE_MAX);
    std::vector<DeviceId> queue;
    for (DeviceId a : swarm.attachment())
        if (roles[a] != Role::Idle) {
            depth[a] = 1;
            queue.push_back(a);
        }
    for (std::size_t head = 0; head < queue.size(); ++head) {
        DeviceId u = queue[head];
        for (DeviceId w : swarm.neighbors(u))
            if (roles[w] != Role::Idle && depth[w] == SIZE_MAX) {
                depth[w] = depth[u] + 1;
                queue.push_back(w);
            }
    }
    return depth;
}

/// (max over planned devices of depth * hop_max + compute) * slack, with
/// depth measured along planned devices only since the flood cannot use
/// idle ones.
inline Millis compute_timeout(const SwarmGraph& swarm, const AttestPlan& plan, const SimConfig& cfg) {
    auto roles = plan_roles(swarm, plan.c_attest, plan.c_bridge);
    auto depth = flood_depths(swarm, roles);
    Millis worst = 0;
    for (DeviceId d = 0; d < swarm.size(); ++d) {
        if (roles[d] == Role::Idle || depth[d] == SIZE_MAX) continue;
        Millis compute = roles[d] == Role::Attester ? compute_latency(swarm, d, cfg) : 0.0;
        worst = std::max(worst, static_cast<double>(depth[d]) * cfg.hop_max() + compute);
    }
    return worst * cfg.timeout_slack;
}

struct IterationMetrics {
    std::size_t packets = 0;
    std::size_t request_packets = 0;
    std::size_t ack_packets = 0;
    std::size_t report_packets = 0;
    double mean_agg_bytes = 0;       // over aggregates delivered to the verifier
    std::size_t max_agg_bytes = 0;
    std::size_t reports_generated = 0;
    std::size_t reports_delivered = 0;
    std::size_t late_forwards = 0;   // aggregates relayed after the local timeout
    std::size_t timeouts = 0;
    std::vector<DeviceId> detected;
    std::vector<DeviceId> missed;
    Millis elapsed = 0;
};

struct IterationResult {
    std::vector<crypto::Aggregate> delivered;
    IterationMetrics metrics;
};

namespace detail {

enum class EventKind : std::uint8_t { Request, Ack, Aggregate, ComputeDone, AckWindow, Timeout };

struct Event {
    Millis time;
    std::uint64_t seq;
    EventKind kind;
    DeviceId to;
    DeviceId from;
    std::uint32_t payload; // aggregate slot

    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

struct NodeRun {
    bool seen = false;
    bool window_closed = false;
    bool report_ready = false;
    bool forwarded = false;
    std::size_t reported_children = 0;
    std::vector<DeviceId> early; // reported before their ack arrived
    Millis deadline = 0;
    std::optional<crypto::Report> report;
};

} // namespace detail

/// One attestation round as a discrete-event simulation.  Provers keep their
/// memory across calls; per-round fields (role, parent, children, pending)
/// are reset here.  Roles come from the decoded request alone.
inline IterationResult run_iteration(const SwarmGraph& swarm, std::span<const std::uint8_t> request, Network& net,
                                     const SimConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    const std::size_t n = swarm.size();
    if (net.size() != n) throw error("network does not match the swarm");

    IterationResult result;
    auto& m = result.metrics;
    std::vector<detail::NodeRun> run(n);
    std::vector<crypto::Aggregate> slots;
    std::priority_queue<detail::Event, std::vector<detail::Event>, std::greater<>> queue;
    std::uint64_t seq = 0;
    std::uniform_real_distribution<double> jitter(-cfg.hop_jitter, cfg.hop_jitter);
    std::bernoulli_distribution lost(cfg.loss_probability);

    for (auto& p : net.provers) {
        p.role = Role::Idle;
        p.parent.reset();
        p.children.clear();
        p.pending.clear();
    }

    auto hop = [&] { return cfg.hop_latency + jitter(rng); };
    auto push = [&](Millis t, detail::EventKind k, DeviceId to, DeviceId from, std::uint32_t payload = 0) {
        queue.push({t, seq++, k, to, from, payload});
    };
    auto transmit = [&](Millis t, detail::EventKind k, DeviceId to, DeviceId from, std::uint32_t payload = 0) {
        if (cfg.loss_probability > 0 && lost(rng)) return;
        push(t + hop(), k, to, from, payload);
    };
    auto send_aggregate = [&](Millis now, DeviceId from, crypto::Aggregate agg) {
        ++m.packets;
        ++m.report_packets;
        DeviceId parent = *net.provers[from].parent;
        slots.push_back(std::move(agg));
        transmit(now, detail::EventKind::Aggregate, parent, from, static_cast<std::uint32_t>(slots.size() - 1));
    };
    auto drops_traffic = [&](DeviceId d) {
        return cfg.compromised_bridges_drop && net.provers[d].compromised();
    };
    auto forward = [&](DeviceId d, Millis now) {
        auto& r = run[d];
        auto& p = net.provers[d];
        r.forwarded = true;
        if (r.report) {
            p.pending.push_back(crypto::Aggregate::of(*r.report));
            r.report.reset();
        }
        // An empty aggregate still tells the parent this subtree is done.
        crypto::Aggregate agg = crypto::aggregate(p.pending);
        p.pending.clear();
        if (drops_traffic(d)) return;
        send_aggregate(now, d, std::move(agg));
    };
    auto try_forward = [&](DeviceId d, Millis now) {
        const auto& r = run[d];
        if (r.forwarded || !r.window_closed) return;
        if (net.provers[d].role == Role::Attester && !r.report_ready) return;
        if (r.reported_children < net.provers[d].children.size()) return;
        forward(d, now);
    };

    // Verifier broadcast to the attachment devices.
    ++m.packets;
    ++m.request_packets;
    for (DeviceId a : swarm.attachment()) transmit(0.0, detail::EventKind::Request, a, kVerifierId);

    std::optional<RequestPayload> decoded_cache;
    std::vector<Role> roles;
    Millis timeout = 0;

    while (!queue.empty()) {
        detail::Event ev = queue.top();
        queue.pop();
        const Millis now = ev.time;
        DeviceId d = ev.to;
        if (ev.kind != detail::EventKind::Timeout || !run[d].forwarded) m.elapsed = std::max(m.elapsed, now);

        if (d == kVerifierId) {
            auto& agg = slots[ev.payload];
            if (!agg.empty()) {
                std::size_t bytes = crypto::aggregate_wire_size(agg.members.size());
                m.max_agg_bytes = std::max(m.max_agg_bytes, bytes);
                m.mean_agg_bytes += static_cast<double>(bytes);
                m.reports_delivered += agg.members.size();
                result.delivered.push_back(std::move(agg));
            }
            continue;
        }

        auto& r = run[d];
        auto& p = net.provers[d];
        switch (ev.kind) {
        case detail::EventKind::Request: {
            if (r.seen) break; // duplicate for this nonce
            // Same bytes for every device, so the km check runs once.
            if (!decoded_cache) {
                decoded_cache = decode_request(request, net.keys.km);
                if (!decoded_cache) return result; // forged request: nobody responds
                roles = plan_roles(swarm, decoded_cache->c_attest, decoded_cache->c_bridge);
                timeout = decoded_cache->timeout_ms;
            }
            r.seen = true;
            p.role = roles[d];
            if (p.role == Role::Idle) break;
            p.parent = ev.from;
            r.deadline = now + timeout;
            ++m.packets;
            ++m.ack_packets;
            if (ev.from != kVerifierId) transmit(now, detail::EventKind::Ack, ev.from, d);
            bool rebroadcast = std::any_of(swarm.neighbors(d).begin(), swarm.neighbors(d).end(),
                                           [&](DeviceId w) { return w != ev.from; });
            if (rebroadcast) {
                ++m.packets;
                ++m.request_packets;
                for (DeviceId w : swarm.neighbors(d))
                    if (w != ev.from) transmit(now, detail::EventKind::Request, w, d);
                push(now + 2 * cfg.hop_max(), detail::EventKind::AckWindow, d, d);
            } else {
                r.window_closed = true;
            }
            if (p.role == Role::Attester) {
                ++m.reports_generated;
                push(now + compute_latency(swarm, d, cfg), detail::EventKind::ComputeDone, d, d);
            }
            push(r.deadline, detail::EventKind::Timeout, d, d);
            try_forward(d, now);
            break;
        }
        case detail::EventKind::Ack:
            if (p.role != Role::Idle && !r.window_closed) {
                p.children.push_back(ev.from);
                if (std::find(r.early.begin(), r.early.end(), ev.from) != r.early.end()) ++r.reported_children;
            }
            break;
        case detail::EventKind::AckWindow:
            r.window_closed = true;
            try_forward(d, now);
            break;
        case detail::EventKind::ComputeDone: {
            r.report = crypto::make_report(d, decoded_cache->nonce, p.memory, p.keys.ak, p.expected);
            r.report_ready = true;
            if (r.forwarded) {
                // Too late for the regular aggregate: relay on its own.
                ++m.late_forwards;
                auto agg = crypto::Aggregate::of(*r.report);
                r.report.reset();
                if (!drops_traffic(d)) send_aggregate(now, d, std::move(agg));
            } else {
                try_forward(d, now);
            }
            break;
        }
        case detail::EventKind::Aggregate: {
            auto& agg = slots[ev.payload];
            if (std::find(p.children.begin(), p.children.end(), ev.from) != p.children.end())
                ++r.reported_children;
            else
                r.early.push_back(ev.from);
            if (r.forwarded) {
                if (!agg.empty()) {
                    ++m.late_forwards;
                    if (!drops_traffic(d)) send_aggregate(now, d, std::move(agg));
                }
            } else {
                if (!agg.empty()) p.pending.push_back(std::move(agg));
                try_forward(d, now);
            }
            break;
        }
        case detail::EventKind::Timeout:
            if (!r.forwarded) {
                ++m.timeouts;
                r.window_closed = true;
                forward(d, now);
            }
            break;
        }
    }
    if (!result.delivered.empty()) m.mean_agg_bytes /= static_cast<double>(result.delivered.size());
    return result;
}

/// Verifier-side check of every delivered aggregate.
inline std::vector<std::pair<DeviceId, crypto::Verdict>> verify_delivered(const std::vector<crypto::Aggregate>& delivered,
                                                                          const crypto::Nonce& nonce,
                                                                          const Network& net) {
    auto expected = net.expected();
    std::vector<std::pair<DeviceId, crypto::Verdict>> out;
    for (const auto& agg : delivered) {
        auto v = crypto::verify_aggregate(agg, nonce, net.keys, expected);
        out.insert(out.end(), v.begin(), v.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace wise
