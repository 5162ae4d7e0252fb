#pragma once

#include <chrono>
#include <cstdint>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wise/adversary.hpp"
#include "wise/planner.hpp"
#include "wise/sim.hpp"
#include "wise/swarm.hpp"

namespace wise {

struct WindowConfig {
    enum class Mode { Topology, Fixed, Variable };
    Mode mode = Mode::Topology;
    int fixed = 4;
    int lo = 4;
    int hi = 10;
};

enum class AttackSchedule { EveryIteration, BeforeAttestation };
enum class ScheduleMode { Wise, FullEveryIteration };

struct CampaignConfig {
    std::size_t warmup = 100;
    std::size_t iterations = 30;
    PlanConfig plan;
    SimConfig sim;
    AdversaryConfig adversary;
    AttackSchedule attack = AttackSchedule::EveryIteration;
    ScheduleMode schedule = ScheduleMode::Wise;
    WindowConfig window;
    bool remediate = true;
    std::uint64_t seed = 1;
};

struct IterationRecord {
    std::size_t iteration = 0;
    bool warmup = false;
    IterationMetrics metrics;
    double th_sec = 1.0;
    std::size_t compromised = 0;   // truly compromised while the round ran
    std::size_t planned_attest = 0;
    std::size_t planned_bridge = 0;
    std::size_t deadline_forced = 0;
    std::size_t attest_clusters = 0;
    std::size_t bridge_clusters = 0;
    std::size_t attested = 0;      // devices whose report reached the verifier
    std::size_t request_bytes = 0;
    std::size_t window_violations = 0;

    /// Share of the compromised devices caught this round (1 with none).
    double detection_ratio() const {
        return compromised == 0 ? 1.0
                                : static_cast<double>(metrics.detected.size()) / static_cast<double>(compromised);
    }
};

struct CampaignResult {
    std::vector<IterationRecord> records;
    KnowledgeBase kb;
    std::size_t erasures = 0;

    std::vector<const IterationRecord*> attestation_phase() const {
        std::vector<const IterationRecord*> out;
        for (const auto& r : records)
            if (!r.warmup) out.push_back(&r);
        return out;
    }
};

namespace detail {

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(id)};
    return std::mt19937_64(seq);
}

inline crypto::Nonce make_nonce(std::size_t iteration, std::mt19937_64& rng) {
    crypto::Nonce n;
    for (int i = 0; i < 8; ++i) n.bytes[i] = static_cast<std::uint8_t>(static_cast<std::uint64_t>(iteration) >> (56 - 8 * i));
    std::uint64_t r = rng();
    for (int i = 0; i < 8; ++i) n.bytes[8 + i] = static_cast<std::uint8_t>(r >> (56 - 8 * i));
    return n;
}

} // namespace detail

/// Warm-up with full attestation, then planned rounds.  Every random draw
/// comes from streams derived from `cfg.seed`.
inline CampaignResult run_campaign(const SwarmGraph& swarm, const CampaignConfig& cfg) {
    cfg.plan.validate();
    cfg.sim.validate();
    const std::size_t n = swarm.size();
    if (n == 0) throw config_error("empty swarm");
    if (!swarm.connected()) throw config_error("every device must be reachable from the verifier");

    auto sim_rng = detail::stream(cfg.seed, 1);
    auto nonce_rng = detail::stream(cfg.seed, 2);
    auto window_rng = detail::stream(cfg.seed, 3);
    Adversary adversary(cfg.adversary, cfg.seed ^ 0x5bd1e995ULL);
    Network net = Network::provision(n, cfg.seed, cfg.sim.image_bytes);

    CampaignResult result;
    auto& kb = result.kb = KnowledgeBase::from(swarm);
    const Minutes period = cfg.plan.iteration_period;
    switch (cfg.window.mode) {
    case WindowConfig::Mode::Topology: break;
    case WindowConfig::Mode::Fixed:
        if (cfg.window.fixed < 1) throw config_error("window must be at least one iteration");
        for (auto& r : kb.records) r.t_max = cfg.window.fixed * period;
        break;
    case WindowConfig::Mode::Variable: {
        if (cfg.window.lo < 1 || cfg.window.hi < cfg.window.lo) throw config_error("invalid window range");
        std::uniform_int_distribution<int> w(cfg.window.lo, cfg.window.hi);
        for (auto& r : kb.records) r.t_max = w(window_rng) * period;
        break;
    }
    }

    adversary.seed_roving(net);
    const std::size_t total = cfg.warmup + cfg.iterations;
    for (std::size_t t = 1; t <= total; ++t) {
        const bool warm = t <= cfg.warmup;
        const Minutes now = static_cast<double>(t) * period;
        kb.current_time = now;

        if (cfg.attack == AttackSchedule::EveryIteration || t == cfg.warmup + 1) adversary.attack(swarm, net);

        std::vector<hmm::ObservationVector> obs;
        std::vector<double> healthy;

        AttestPlan plan;
        if (warm || cfg.schedule == ScheduleMode::FullEveryIteration) {
            plan = full_plan(swarm, kGeographic);
            obs = current_observations(kb, swarm, cfg.plan);
        } else {
            auto scores = candidate_probabilities(kb, swarm, cfg.plan);
            obs = std::move(scores.observations);
            healthy = std::move(scores.healthy);
            plan = make_plan(swarm, kb, healthy, cfg.plan);
        }
        plan.nonce = detail::make_nonce(t, nonce_rng);
        plan.timeout_ms = static_cast<std::uint32_t>(std::ceil(compute_timeout(swarm, plan, cfg.sim)));
        auto request = encode_request(plan, net.keys.km);

        adversary.before_iteration(swarm, net);
        auto truth = net.compromised();
        auto sim = run_iteration(swarm, request, net, cfg.sim, sim_rng);
        auto verdicts = verify_delivered(sim.delivered, plan.nonce, net);
        adversary.observe(plan);

        IterationRecord rec;
        rec.iteration = t;
        rec.warmup = warm;
        rec.compromised = truth.size();
        rec.planned_attest = plan.n_attest.size();
        rec.planned_bridge = plan.n_bridge.size();
        rec.attest_clusters = plan.c_attest.size();
        rec.bridge_clusters = plan.c_bridge.size();
        for (const auto& r : kb.records) rec.deadline_forced += deadline_due(r, now, period);
        rec.request_bytes = request.size();
        rec.attested = verdicts.size();
        std::vector<char> reported(n, 0);
        for (auto [d, v] : verdicts) {
            reported[d] = 1;
            if (v != crypto::Verdict::Healthy) rec.metrics.detected.push_back(d);
        }
        for (DeviceId d : truth)
            if (!reported[d]) rec.metrics.missed.push_back(d);
        auto& m = rec.metrics;
        auto detected = std::move(m.detected);
        auto missed = std::move(m.missed);
        m = sim.metrics;
        m.detected = std::move(detected);
        m.missed = std::move(missed);

        if (healthy.empty()) {
            rec.th_sec = security_threshold(rec.attested, n, std::vector<double>(n - rec.attested, 0.0));
        } else {
            std::vector<double> rest;
            for (DeviceId d = 0; d < n; ++d)
                if (!reported[d]) rest.push_back(healthy[d]);
            rec.th_sec = security_threshold(rec.attested, n, rest);
        }

        update_knowledge(kb, swarm, verdicts, plan, now, obs);
        if (!warm) rec.window_violations = enforce_window(kb, period).size();

        std::vector<DeviceId> erased;
        if (cfg.remediate)
            for (DeviceId d : rec.metrics.detected)
                if (net.provers[d].compromised()) {
                    net.restore(d);
                    erased.push_back(d);
                }
        result.erasures += erased.size();
        adversary.after_iteration(net, erased);
        result.records.push_back(std::move(rec));
    }
    return result;
}

/// One full-coverage round on a clean network, for overhead comparison.
inline IterationMetrics baseline_full(const SwarmGraph& swarm, const SimConfig& cfg, std::uint64_t seed) {
    Network net = Network::provision(swarm.size(), seed, cfg.image_bytes);
    auto rng = detail::stream(seed, 1);
    auto nonce_rng = detail::stream(seed, 2);
    AttestPlan plan = full_plan(swarm, kGeographic);
    plan.nonce = detail::make_nonce(0, nonce_rng);
    plan.timeout_ms = static_cast<std::uint32_t>(std::ceil(compute_timeout(swarm, plan, cfg)));
    auto request = encode_request(plan, net.keys.km);
    return run_iteration(swarm, request, net, cfg, rng).metrics;
}

inline constexpr const char* kCsvHeader = "iteration,packets,mean_agg_bytes,max_agg_bytes,detected,missed,th_sec,elapsed_ms";

inline void write_csv(std::ostream& out, const CampaignResult& result) {
    out << kCsvHeader << '\n';
    char buf[256];
    for (const auto& r : result.records) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.3f,%zu,%zu,%zu,%.6f,%.3f\n", r.iteration, r.metrics.packets,
                      r.metrics.mean_agg_bytes, r.metrics.max_agg_bytes, r.metrics.detected.size(),
                      r.metrics.missed.size(), r.th_sec, r.metrics.elapsed);
        out << buf;
    }
}

inline std::string csv_string(const CampaignResult& result) {
    std::ostringstream s;
    write_csv(s, result);
    return s.str();
}

struct PhaseSummary {
    std::size_t rounds = 0;
    double mean_detection = 0;     // over rounds with at least one compromised device
    double mean_packets = 0;
    double mean_agg_bytes = 0;
    double mean_attested = 0;
    std::size_t max_request_bytes = 0;
    std::size_t window_violations = 0;
    std::size_t full_detection_rounds = 0;
};

inline PhaseSummary summarize(const CampaignResult& result) {
    PhaseSummary s;
    std::size_t scored = 0;
    for (const auto* r : result.attestation_phase()) {
        ++s.rounds;
        s.mean_packets += static_cast<double>(r->metrics.packets);
        s.mean_agg_bytes += r->metrics.mean_agg_bytes;
        s.mean_attested += static_cast<double>(r->attested);
        s.max_request_bytes = std::max(s.max_request_bytes, r->request_bytes);
        s.window_violations += r->window_violations;
        if (r->compromised > 0) {
            ++scored;
            s.mean_detection += r->detection_ratio();
            if (r->metrics.detected.size() == r->compromised) ++s.full_detection_rounds;
        }
    }
    if (s.rounds > 0) {
        s.mean_packets /= static_cast<double>(s.rounds);
        s.mean_agg_bytes /= static_cast<double>(s.rounds);
        s.mean_attested /= static_cast<double>(s.rounds);
    }
    if (scored > 0) s.mean_detection /= static_cast<double>(scored);
    return s;
}

inline nlohmann::json summary_json(const CampaignResult& result, const CampaignConfig& cfg) {
    auto s = summarize(result);
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["warmup"] = cfg.warmup;
    j["iterations"] = cfg.iterations;
    j["coverage"] = cfg.plan.th_cov;
    j["erasures"] = result.erasures;
    j["rounds"] = s.rounds;
    j["mean_detection_ratio"] = s.mean_detection;
    j["full_detection_rounds"] = s.full_detection_rounds;
    j["mean_packets"] = s.mean_packets;
    j["mean_agg_bytes"] = s.mean_agg_bytes;
    j["mean_attested"] = s.mean_attested;
    j["max_request_bytes"] = s.max_request_bytes;
    j["window_violations"] = s.window_violations;
    auto& det = j["detection_per_iteration"] = nlohmann::json::array();
    for (const auto* r : result.attestation_phase()) det.push_back(r->detection_ratio());
    return j;
}

} // namespace wise
