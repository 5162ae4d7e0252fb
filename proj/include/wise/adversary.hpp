#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "wise/planner.hpp"
#include "wise/sim.hpp"
#include "wise/swarm.hpp"

namespace wise {

struct AdversaryConfig {
    enum class Kind { None, Random, Targeted, Roving };
    Kind kind = Kind::None;
    double max_ratio = 0.3;          // Random and Targeted: share of n per action
    ClusterId target{static_cast<std::uint8_t>(kHardware), 0};
    double roving_fraction = 0.05;   // share of n hosting roving malware
    std::size_t observation_window = 12;
    std::size_t max_period = 6;
};

/// Software-only attacker acting on prover memory.  Infection XORs a marker
/// block into the image; restoring XORs it back out.
class Adversary {
public:
    Adversary(AdversaryConfig cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {
        if (cfg_.max_ratio < 0 || cfg_.max_ratio > 1) throw config_error("attack ratio must lie in [0, 1]");
        if (cfg_.roving_fraction < 0 || cfg_.roving_fraction > 1)
            throw config_error("roving fraction must lie in [0, 1]");
        if (cfg_.max_period == 0 || cfg_.observation_window < 2) throw config_error("invalid roving predictor window");
    }

    const AdversaryConfig& config() const noexcept { return cfg_; }

    /// Random or Targeted action: compromises ceil(u * n) healthy devices,
    /// u ~ U[0, max_ratio], from the whole swarm or the target cluster.
    std::vector<DeviceId> attack(const SwarmGraph& swarm, Network& net) {
        using K = AdversaryConfig::Kind;
        if (cfg_.kind != K::Random && cfg_.kind != K::Targeted) return {};
        std::vector<DeviceId> pool;
        if (cfg_.kind == K::Random) {
            for (DeviceId d = 0; d < net.size(); ++d)
                if (!net.provers[d].compromised()) pool.push_back(d);
        } else {
            for (DeviceId d : swarm.scheme().members(cfg_.target))
                if (!net.provers[d].compromised()) pool.push_back(d);
        }
        double u = std::uniform_real_distribution<double>(0.0, cfg_.max_ratio)(rng_);
        auto count = static_cast<std::size_t>(std::ceil(u * static_cast<double>(net.size())));
        count = std::min(count, pool.size());
        std::vector<DeviceId> out;
        out.reserve(count);
        // partial Fisher-Yates
        for (std::size_t i = 0; i < count; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
            std::swap(pool[i], pool[pick(rng_)]);
            infect(net, pool[i]);
            out.push_back(pool[i]);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    // Roving malware ------------------------------------------------------

    /// Places the malware on its initial hosts.
    void seed_roving(Network& net) {
        if (cfg_.kind != AdversaryConfig::Kind::Roving) return;
        auto count = static_cast<std::size_t>(std::ceil(cfg_.roving_fraction * static_cast<double>(net.size())));
        count = std::max<std::size_t>(1, std::min(count, net.size()));
        std::vector<DeviceId> all(net.size());
        std::iota(all.begin(), all.end(), 0);
        std::shuffle(all.begin(), all.end(), rng_);
        hosts_.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
        std::sort(hosts_.begin(), hosts_.end());
        for (DeviceId h : hosts_) infect(net, h);
    }

    const std::vector<DeviceId>& hosts() const noexcept { return hosts_; }

    /// Eavesdropped request of a finished iteration.
    void observe(const AttestPlan& plan) {
        seen_plans_.push_back(plan.c_attest);
        while (seen_plans_.size() > cfg_.observation_window) seen_plans_.pop_front();
    }

    /// Whether the host's attestation pattern is periodic enough to predict
    /// the next round, and if so whether it will be attested.
    std::optional<bool> predict(const SwarmGraph& swarm, DeviceId host) const {
        std::vector<char> seq;
        for (const auto& clusters : seen_plans_) seq.push_back(in_any_cluster(swarm, host, clusters) ? 1 : 0);
        for (std::size_t p = 1; p <= cfg_.max_period; ++p) {
            if (seq.size() < 2 * p) break;
            bool periodic = true;
            for (std::size_t i = p; i < seq.size() && periodic; ++i) periodic = seq[i] == seq[i - p];
            if (periodic) return seq[seq.size() - p] != 0;
        }
        return std::nullopt;
    }

    /// Before a round: hide on hosts that are predicted to be attested.
    void before_iteration(const SwarmGraph& swarm, Network& net) {
        hidden_.clear();
        if (cfg_.kind != AdversaryConfig::Kind::Roving) return;
        for (DeviceId h : hosts_) {
            auto next = predict(swarm, h);
            if (next && *next && net.provers[h].compromised()) {
                disinfect(net, h);
                hidden_.push_back(h);
            }
        }
    }

    /// After a round: come back on hidden hosts and move away from erased
    /// ones.
    void after_iteration(Network& net, const std::vector<DeviceId>& erased) {
        if (cfg_.kind != AdversaryConfig::Kind::Roving) return;
        for (DeviceId h : hidden_) infect(net, h);
        hidden_.clear();
        for (DeviceId e : erased) {
            auto it = std::lower_bound(hosts_.begin(), hosts_.end(), e);
            if (it == hosts_.end() || *it != e) continue;
            hosts_.erase(it);
            std::vector<DeviceId> free;
            for (DeviceId d = 0; d < net.size(); ++d)
                if (!net.provers[d].compromised() && d != e) free.push_back(d);
            if (free.empty()) continue;
            DeviceId next = free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng_)];
            infect(net, next);
            hosts_.insert(std::lower_bound(hosts_.begin(), hosts_.end(), next), next);
        }
    }

private:
    void infect(Network& net, DeviceId d) {
        auto& mem = net.provers[d].memory.bytes;
        for (std::size_t i = 0; i < std::min<std::size_t>(kMarker.size(), mem.size()); ++i) mem[i] ^= kMarker[i];
    }
    void disinfect(Network& net, DeviceId d) { infect(net, d); }

    static constexpr std::array<std::uint8_t, 8> kMarker{0xde, 0xad, 0xbe, 0xef, 0x0b, 0xad, 0xf0, 0x0d};

    AdversaryConfig cfg_;
    std::mt19937_64 rng_;
    std::vector<DeviceId> hosts_;
    std::vector<DeviceId> hidden_;
    std::deque<std::vector<ClusterId>> seen_plans_;
};

} // namespace wise
