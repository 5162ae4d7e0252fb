#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <vector>

#include <json.hpp>

#include "wise/swarm.hpp"

namespace wise::hmm {

inline constexpr std::size_t kMaxFeatures = 4;
inline constexpr std::size_t kStates = 2;
inline constexpr double kInferenceEpsilon = 1e-9;

/// M feature values in [0, 1], stored inline.
struct ObservationVector {
    std::array<double, kMaxFeatures> values{};
    std::uint8_t count = 0;

    ObservationVector() = default;
    ObservationVector(std::initializer_list<double> v) {
        if (v.size() > kMaxFeatures) throw config_error("too many features");
        std::copy(v.begin(), v.end(), values.begin());
        count = static_cast<std::uint8_t>(v.size());
    }

    std::size_t size() const noexcept { return count; }
    double operator[](std::size_t i) const { return values[i]; }

    void push_back(double v) {
        if (count == kMaxFeatures) throw config_error("too many features");
        values[count++] = v;
    }
    friend bool operator==(const ObservationVector& a, const ObservationVector& b) {
        return a.count == b.count && std::equal(a.values.begin(), a.values.begin() + a.count, b.values.begin());
    }
};

/// Contiguous run of known states (0 = compromised, 1 = healthy) with the
/// observation recorded at each step.
struct TrainingSegment {
    std::vector<ObservationVector> observations;
    std::vector<std::uint8_t> states;
};

struct AttestHistory {
    std::vector<Outcome> outcomes;
    std::vector<ObservationVector> observations;
};

/// Equal-width bin of a value in [0, 1]; values outside are clamped.
inline std::size_t bin_of(double x, std::size_t bins) {
    x = std::clamp(x, 0.0, 1.0);
    return std::min(bins - 1, static_cast<std::size_t>(x * static_cast<double>(bins)));
}

struct HmmParams {
    std::array<double, kStates> pi{0.5, 0.5};
    std::array<std::array<double, kStates>, kStates> h{{{0.5, 0.5}, {0.5, 0.5}}}; // h[prev][next]
    std::size_t bins = 10;
    std::size_t features = 2;
    std::vector<double> emissions; // [state][feature][bin]

    static HmmParams uniform(std::size_t bins, std::size_t features) {
        HmmParams p;
        p.bins = bins;
        p.features = features;
        p.emissions.assign(kStates * features * bins, 1.0 / static_cast<double>(bins));
        return p;
    }

    double& b(std::size_t state, std::size_t feature, std::size_t bin) {
        return emissions[(state * features + feature) * bins + bin];
    }
    double b(std::size_t state, std::size_t feature, std::size_t bin) const {
        return emissions[(state * features + feature) * bins + bin];
    }
    /// Emission probability of an observed value.
    double emit(std::size_t state, std::size_t feature, double value) const {
        return b(state, feature, bin_of(value, bins));
    }
};

/// Raw tallies behind the counting estimators.
struct Counts {
    std::array<std::uint64_t, kStates> starts{};
    std::array<std::array<std::uint64_t, kStates>, kStates> transitions{}; // [prev][next]
    std::array<std::uint64_t, kStates> visits{};
    std::vector<std::uint64_t> emissions; // [state][feature][bin]
    std::size_t segments = 0;
    std::size_t bins = 0;
    std::size_t features = 0;
};

inline std::size_t feature_count(std::span<const TrainingSegment> segments) {
    for (const auto& s : segments)
        if (!s.observations.empty()) return s.observations.front().size();
    return 0;
}

inline Counts count_statistics(std::span<const TrainingSegment> segments, std::size_t bins) {
    if (segments.empty()) throw error("cannot estimate parameters from an empty corpus");
    if (bins == 0) throw config_error("bin count must be positive");
    Counts c;
    c.bins = bins;
    c.features = feature_count(segments);
    c.segments = segments.size();
    c.emissions.assign(kStates * c.features * bins, 0);
    for (const auto& seg : segments) {
        if (seg.states.empty() || seg.states.size() != seg.observations.size())
            throw error("training segment is empty or misaligned");
        ++c.starts[seg.states.front()];
        for (std::size_t t = 0; t < seg.states.size(); ++t) {
            std::uint8_t y = seg.states[t];
            if (y > 1) throw error("training segment contains an unknown state");
            if (t > 0) ++c.transitions[seg.states[t - 1]][y];
            ++c.visits[y];
            const auto& o = seg.observations[t];
            if (o.size() != c.features) throw error("inconsistent feature count in corpus");
            for (std::size_t v = 0; v < c.features; ++v) ++c.emissions[(y * c.features + v) * bins + bin_of(o[v], bins)];
        }
    }
    return c;
}

/// Pools tallies from several corpora (e.g. every device's history).
inline Counts& operator+=(Counts& acc, const Counts& c) {
    if (acc.bins == 0) {
        acc.bins = c.bins;
        acc.features = c.features;
        acc.emissions.assign(c.emissions.size(), 0);
    }
    if (acc.bins != c.bins || acc.features != c.features) throw error("cannot pool counts of different shapes");
    acc.segments += c.segments;
    for (std::size_t i = 0; i < kStates; ++i) {
        acc.starts[i] += c.starts[i];
        acc.visits[i] += c.visits[i];
        for (std::size_t j = 0; j < kStates; ++j) acc.transitions[i][j] += c.transitions[i][j];
    }
    for (std::size_t i = 0; i < c.emissions.size(); ++i) acc.emissions[i] += c.emissions[i];
    return acc;
}

/// Counting estimators with add-one smoothing.
inline HmmParams params_from_counts(const Counts& c) {
    HmmParams p;
    p.bins = c.bins;
    p.features = c.features;
    for (std::size_t i = 0; i < kStates; ++i)
        p.pi[i] = static_cast<double>(c.starts[i] + 1) / static_cast<double>(c.segments + kStates);
    for (std::size_t j = 0; j < kStates; ++j) {
        std::uint64_t out = c.transitions[j][0] + c.transitions[j][1];
        for (std::size_t i = 0; i < kStates; ++i)
            p.h[j][i] = static_cast<double>(c.transitions[j][i] + 1) / static_cast<double>(out + kStates);
    }
    p.emissions.resize(c.emissions.size());
    for (std::size_t s = 0; s < kStates; ++s)
        for (std::size_t v = 0; v < c.features; ++v)
            for (std::size_t k = 0; k < c.bins; ++k) {
                std::size_t idx = (s * c.features + v) * c.bins + k;
                p.emissions[idx] =
                    static_cast<double>(c.emissions[idx] + 1) / static_cast<double>(c.visits[s] + c.bins);
            }
    return p;
}

/// Closed-form maximum-likelihood estimate with add-one smoothing.
inline HmmParams estimate_mle(std::span<const TrainingSegment> segments, std::size_t bins) {
    return params_from_counts(count_statistics(segments, bins));
}

/// Complete-data log-likelihood of one segment.
inline double sequence_probability(const HmmParams& p, const TrainingSegment& seg) {
    if (seg.states.empty()) return 0.0;
    double lp = std::log(p.pi[seg.states.front()]);
    for (std::size_t t = 0; t < seg.states.size(); ++t) {
        std::uint8_t y = seg.states[t];
        if (t > 0) lp += std::log(p.h[seg.states[t - 1]][y]);
        const auto& o = seg.observations[t];
        for (std::size_t v = 0; v < p.features && v < o.size(); ++v) lp += std::log(p.emit(y, v, o[v]));
    }
    return lp;
}

inline double corpus_likelihood(const HmmParams& p, std::span<const TrainingSegment> segments) {
    double total = 0.0;
    for (const auto& s : segments) total += sequence_probability(p, s);
    return total;
}

/// Probability of the healthy state given the current observation and a
/// distribution over the previous state, clamped to (eps, 1 - eps).
inline double infer_healthy(const HmmParams& p, const std::array<double, kStates>& prior, const ObservationVector& obs) {
    double mix = prior[0] * p.h[0][1] + prior[1] * p.h[1][1];
    for (std::size_t v = 0; v < p.features && v < obs.size(); ++v) mix *= p.emit(1, v, obs[v]);
    return std::clamp(mix, kInferenceEpsilon, 1.0 - kInferenceEpsilon);
}

inline double infer_healthy(const HmmParams& p, const ObservationVector& obs) { return infer_healthy(p, p.pi, obs); }

/// The same joint term normalized over both current states: the posterior
/// of Healthy given the observation.  Computed in log space.
inline double posterior_healthy(const HmmParams& p, const std::array<double, kStates>& prior,
                                const ObservationVector& obs) {
    std::array<double, kStates> lp{};
    for (std::size_t i = 0; i < kStates; ++i) {
        lp[i] = std::log(prior[0] * p.h[0][i] + prior[1] * p.h[1][i]);
        for (std::size_t v = 0; v < p.features && v < obs.size(); ++v) lp[i] += std::log(p.emit(i, v, obs[v]));
    }
    return std::clamp(1.0 / (1.0 + std::exp(lp[0] - lp[1])), kInferenceEpsilon, 1.0 - kInferenceEpsilon);
}

/// Splits a history at every NotAttested entry into maximal known runs.
inline std::vector<TrainingSegment> segment_history(const AttestHistory& h) {
    if (h.outcomes.size() != h.observations.size()) throw error("history and observations are misaligned");
    std::vector<TrainingSegment> out;
    TrainingSegment current;
    auto flush = [&] {
        if (!current.states.empty()) out.push_back(std::move(current));
        current = {};
    };
    for (std::size_t t = 0; t < h.outcomes.size(); ++t) {
        if (h.outcomes[t] == Outcome::NotAttested) {
            flush();
            continue;
        }
        current.states.push_back(static_cast<std::uint8_t>(h.outcomes[t]));
        current.observations.push_back(h.observations[t]);
    }
    flush();
    return out;
}

/// Per-cluster compromise ratios for one snapshot of last-known statuses.
class FeatureContext {
public:
    FeatureContext(const SwarmGraph& swarm, std::span<const Outcome> last_known) : swarm_(swarm), status_(last_known) {
        if (last_known.size() != swarm.size()) throw error("status map does not cover the swarm");
        const auto& cats = swarm.scheme().categories;
        ratios_.resize(cats.size());
        for (std::size_t c = 0; c < cats.size(); ++c) {
            ratios_[c].reserve(cats[c].clusters.size());
            for (const auto& members : cats[c].clusters) {
                std::size_t bad = 0;
                for (DeviceId d : members) bad += compromised(d);
                ratios_[c].push_back(members.empty() ? 0.0 : static_cast<double>(bad) / static_cast<double>(members.size()));
            }
        }
    }

    bool compromised(DeviceId d) const { return status_[d] == Outcome::Compromised; }

    double neighbor_ratio(DeviceId d) const {
        const auto& nb = swarm_.neighbors(d);
        if (nb.empty()) return 0.0;
        std::size_t bad = 0;
        for (DeviceId w : nb) bad += compromised(w);
        return static_cast<double>(bad) / static_cast<double>(nb.size());
    }

    double cluster_ratio(DeviceId d) const {
        const auto& clusters = swarm_.record(d).clusters;
        if (clusters.empty()) return 0.0;
        double sum = 0.0;
        for (ClusterId c : clusters) sum += ratios_[c.category][c.index];
        return sum / static_cast<double>(clusters.size());
    }

    ObservationVector features(DeviceId d) const {
        if (!swarm_.contains(d)) throw unknown_device(d);
        return {neighbor_ratio(d), cluster_ratio(d)};
    }

private:
    const SwarmGraph& swarm_;
    std::span<const Outcome> status_;
    std::vector<std::vector<double>> ratios_;
};

/// (compromised-neighbor ratio, mean compromise ratio over d's clusters).
/// NotAttested entries in `last_known` count as healthy.
inline ObservationVector extract_features(const SwarmGraph& swarm, DeviceId d, std::span<const Outcome> last_known) {
    if (!swarm.contains(d)) throw unknown_device(d);
    return FeatureContext(swarm, last_known).features(d);
}

inline nlohmann::json to_json(const HmmParams& p) {
    nlohmann::json j;
    j["pi"] = p.pi;
    j["h"] = p.h;
    j["bins"] = p.bins;
    j["features"] = p.features;
    auto& em = j["emissions"] = nlohmann::json::array();
    for (std::size_t s = 0; s < kStates; ++s) {
        auto row = nlohmann::json::array();
        for (std::size_t v = 0; v < p.features; ++v)
            row.push_back(std::vector<double>(p.emissions.begin() + static_cast<std::ptrdiff_t>((s * p.features + v) * p.bins),
                                              p.emissions.begin() + static_cast<std::ptrdiff_t>((s * p.features + v + 1) * p.bins)));
        em.push_back(std::move(row));
    }
    return j;
}

inline HmmParams params_from_json(const nlohmann::json& j) {
    HmmParams p;
    p.pi = j.at("pi").get<std::array<double, kStates>>();
    p.h = j.at("h").get<std::array<std::array<double, kStates>, kStates>>();
    p.bins = j.at("bins").get<std::size_t>();
    p.features = j.at("features").get<std::size_t>();
    p.emissions.clear();
    for (const auto& row : j.at("emissions"))
        for (const auto& hist : row) {
            auto v = hist.get<std::vector<double>>();
            if (v.size() != p.bins) throw config_error("emission histogram has the wrong bin count");
            p.emissions.insert(p.emissions.end(), v.begin(), v.end());
        }
    if (p.emissions.size() != kStates * p.features * p.bins) throw config_error("emission table has the wrong shape");
    return p;
}

} // namespace wise::hmm
