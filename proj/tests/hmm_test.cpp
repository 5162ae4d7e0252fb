#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wise/wise.hpp"

using namespace wise;
using namespace wise::hmm;

namespace {

TrainingSegment segment(std::vector<std::uint8_t> states, double value = 0.05, std::size_t features = 1) {
    TrainingSegment s;
    s.states = std::move(states);
    for (std::size_t t = 0; t < s.states.size(); ++t) {
        ObservationVector o;
        for (std::size_t v = 0; v < features; ++v) o.push_back(value);
        s.observations.push_back(o);
    }
    return s;
}

std::vector<TrainingSegment> random_corpus(std::mt19937_64& rng, std::size_t features, std::size_t max_segments = 5,
                                           std::size_t max_len = 6) {
    std::vector<TrainingSegment> corpus(1 + rng() % max_segments);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& s : corpus) {
        std::size_t len = 1 + rng() % max_len;
        for (std::size_t t = 0; t < len; ++t) {
            s.states.push_back(static_cast<std::uint8_t>(rng() % 2));
            ObservationVector o;
            for (std::size_t v = 0; v < features; ++v) o.push_back(rng() % 8 == 0 ? 1.0 : u(rng));
            s.observations.push_back(o);
        }
    }
    return corpus;
}

void expect_matches_oracle(const std::vector<TrainingSegment>& corpus, std::size_t bins, std::size_t features) {
    auto c = count_statistics(corpus, bins);
    auto p = params_from_counts(c);
    auto o = oracle::counting_oracle(corpus, static_cast<int>(bins), static_cast<int>(features));
    for (int i = 0; i < 2; ++i) {
        EXPECT_EQ(c.starts[i] + 1, o.pi[i].num);
        EXPECT_EQ(c.segments + 2, o.pi[i].den);
        EXPECT_NEAR(p.pi[i], o.pi[i].value(), 1e-12);
        for (int j = 0; j < 2; ++j) {
            EXPECT_EQ(c.transitions[j][i] + 1, o.h[j][i].num);
            EXPECT_EQ(c.transitions[j][0] + c.transitions[j][1] + 2, o.h[j][i].den);
            EXPECT_NEAR(p.h[j][i], o.h[j][i].value(), 1e-12);
        }
    }
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t v = 0; v < features; ++v)
            for (std::size_t k = 0; k < bins; ++k) {
                const auto& r = o.b.at({static_cast<int>(s), static_cast<int>(v), static_cast<int>(k)});
                EXPECT_EQ(c.emissions[(s * features + v) * bins + k] + 1, r.num);
                EXPECT_EQ(c.visits[s] + bins, r.den);
                EXPECT_NEAR(p.b(s, v, k), r.value(), 1e-12);
            }
}

} // namespace

TEST(Features, Examples) {
    // star: 0 linked to 1..4, 4 linked to 5; device 0 alone in its clusters
    SwarmGraph::Spec spec;
    spec.n = 6;
    spec.links = {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {4, 5}};
    spec.attachment = {0};
    for (int c = 0; c < 5; ++c) spec.scheme.categories.push_back({"c", {{0}, {1, 2, 3, 4, 5}}});
    SwarmGraph g(spec);
    std::vector<Outcome> all_ok(6, Outcome::Healthy);
    auto f = extract_features(g, 0, all_ok);
    EXPECT_EQ(f[0], 0.0);
    EXPECT_EQ(f[1], 0.0);

    std::vector<Outcome> two_bad = all_ok;
    two_bad[1] = two_bad[2] = Outcome::Compromised;
    f = extract_features(g, 0, two_bad);
    EXPECT_DOUBLE_EQ(f[0], 0.5);
    EXPECT_DOUBLE_EQ(f[1], 0.0);
    // not-attested neighbors count as healthy
    two_bad[3] = Outcome::NotAttested;
    EXPECT_DOUBLE_EQ(extract_features(g, 0, two_bad)[0], 0.5);
    EXPECT_THROW(extract_features(g, 17, all_ok), unknown_device);
}

TEST(Features, ClusterRatioIsMeanOverCategories) {
    SwarmGraph::Spec spec;
    spec.n = 4;
    spec.links = {{0, 1}, {1, 2}, {2, 3}};
    spec.attachment = {0};
    // device 0 sees ratios 1/2, 2/3, 0, 0, 1/2
    spec.scheme.categories = {{"a", {{0, 1}, {2, 3}}},
                              {"b", {{0, 1, 2}, {3}}},
                              {"c", {{0}, {1, 2, 3}}},
                              {"d", {{0, 3}, {1, 2}}},
                              {"e", {{0, 1, 2, 3}}}};
    SwarmGraph g(spec);
    std::vector<Outcome> s{Outcome::Healthy, Outcome::Compromised, Outcome::Compromised, Outcome::Healthy};
    EXPECT_NEAR(extract_features(g, 0, s)[1], (0.5 + 2.0 / 3.0 + 0.5) / 5.0, 1e-15);
    FeatureContext ctx(g, s);
    // device 3: 1/2, 0, 2/3, 0, 1/2
    EXPECT_NEAR(ctx.cluster_ratio(3), (0.5 + 2.0 / 3.0 + 0.5) / 5.0, 1e-15);
    EXPECT_DOUBLE_EQ(ctx.neighbor_ratio(3), 1.0);
    EXPECT_DOUBLE_EQ(ctx.neighbor_ratio(1), 0.5);
}

TEST(Segments, Examples) {
    AttestHistory h;
    h.outcomes = {Outcome::Healthy, Outcome::Healthy, Outcome::NotAttested, Outcome::Compromised, Outcome::Healthy};
    h.observations.resize(5, ObservationVector{0.0, 0.0});
    auto segs = segment_history(h);
    ASSERT_EQ(segs.size(), 2u);
    EXPECT_EQ(segs[0].states.size(), 2u);
    EXPECT_EQ(segs[1].states, (std::vector<std::uint8_t>{0, 1}));

    h.outcomes.assign(5, Outcome::NotAttested);
    EXPECT_TRUE(segment_history(h).empty());

    h.outcomes = {Outcome::Healthy, Outcome::Compromised, Outcome::Healthy};
    h.observations.resize(3);
    EXPECT_EQ(segment_history(h).size(), 1u);
    h.observations.resize(2);
    EXPECT_THROW(segment_history(h), error);
}

TEST(Segments, JoinWithGapsIsIdentity) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        auto corpus = random_corpus(rng, 2);
        AttestHistory h;
        for (const auto& s : corpus) {
            for (std::size_t t = 0; t < s.states.size(); ++t) {
                h.outcomes.push_back(static_cast<Outcome>(s.states[t]));
                h.observations.push_back(s.observations[t]);
            }
            for (std::size_t k = 0; k < 1 + rng() % 2; ++k) {
                h.outcomes.push_back(Outcome::NotAttested);
                h.observations.push_back({});
            }
        }
        auto back = segment_history(h);
        ASSERT_EQ(back.size(), corpus.size());
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            EXPECT_EQ(back[i].states, corpus[i].states);
            EXPECT_EQ(back[i].observations, corpus[i].observations);
        }
    }
}

TEST(Estimate, TransitionCountingExample) {
    std::vector<TrainingSegment> corpus{segment({1, 1, 0})};
    auto p = estimate_mle(corpus, 10);
    EXPECT_DOUBLE_EQ(p.h[1][1], 0.5);
    EXPECT_DOUBLE_EQ(p.h[1][0], 0.5);
    EXPECT_DOUBLE_EQ(p.h[0][0], 0.5);
    EXPECT_DOUBLE_EQ(p.h[0][1], 0.5);
}

TEST(Estimate, InitialStateExample) {
    std::vector<TrainingSegment> corpus{segment({1}), segment({0})};
    auto p = estimate_mle(corpus, 10);
    EXPECT_DOUBLE_EQ(p.pi[0], 0.5);
    EXPECT_DOUBLE_EQ(p.pi[1], 0.5);
}

TEST(Estimate, EmissionExample) {
    for (std::size_t n = 1; n <= 6; ++n) {
        std::vector<TrainingSegment> corpus{segment(std::vector<std::uint8_t>(n, 1), 0.1, 2)};
        auto p = estimate_mle(corpus, 2);
        for (std::size_t v = 0; v < 2; ++v) {
            EXPECT_DOUBLE_EQ(p.b(1, v, 0), static_cast<double>(n + 1) / static_cast<double>(n + 2));
            EXPECT_DOUBLE_EQ(p.b(1, v, 1), 1.0 / static_cast<double>(n + 2));
        }
    }
    EXPECT_THROW(estimate_mle(std::vector<TrainingSegment>{}, 2), error);
}

TEST(Estimate, MatchesCountingOracleOnSmallCorpora) {
    // every single segment of length <= 6, then random multi-segment corpora
    for (std::size_t len = 1; len <= 6; ++len)
        for (std::uint32_t bits = 0; bits < (1u << len); ++bits) {
            std::vector<std::uint8_t> states;
            for (std::size_t t = 0; t < len; ++t) states.push_back(static_cast<std::uint8_t>(bits >> t & 1u));
            for (std::size_t bins : {2u, 10u})
                for (std::size_t m : {1u, 2u})
                    expect_matches_oracle({segment(states, 0.37, m)}, bins, m);
        }
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 500; ++trial)
        for (std::size_t bins : {2u, 10u})
            for (std::size_t m : {1u, 2u}) expect_matches_oracle(random_corpus(rng, m), bins, m);
}

TEST(Estimate, ProbabilitiesNormalized) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        auto p = estimate_mle(random_corpus(rng, 2), 10);
        EXPECT_NEAR(p.pi[0] + p.pi[1], 1.0, 1e-12);
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(p.h[j][0] + p.h[j][1], 1.0, 1e-12);
        for (std::size_t s = 0; s < 2; ++s)
            for (std::size_t v = 0; v < 2; ++v) {
                double sum = 0;
                for (std::size_t k = 0; k < 10; ++k) {
                    EXPECT_GT(p.b(s, v, k), 0.0);
                    sum += p.b(s, v, k);
                }
                EXPECT_NEAR(sum, 1.0, 1e-12);
            }
    }
}

TEST(Likelihood, Examples) {
    auto p = HmmParams::uniform(2, 1);
    auto seg = segment({1}, 0.2, 1);
    EXPECT_DOUBLE_EQ(sequence_probability(p, seg), std::log(0.5 * 0.5));
    EXPECT_EQ(corpus_likelihood(p, {}), 0.0);
    std::vector<TrainingSegment> one{seg};
    EXPECT_DOUBLE_EQ(corpus_likelihood(p, one), sequence_probability(p, seg));
    std::vector<TrainingSegment> two{seg, segment({0, 1}, 0.9, 1)};
    EXPECT_DOUBLE_EQ(corpus_likelihood(p, two), sequence_probability(p, two[0]) + sequence_probability(p, two[1]));

    // an event never seen in training is still finite
    std::vector<TrainingSegment> train{segment({1, 1, 1}, 0.0, 1)};
    auto fitted = estimate_mle(train, 10);
    EXPECT_TRUE(std::isfinite(sequence_probability(fitted, segment({0, 0}, 1.0, 1))));
}

TEST(Likelihood, SmoothedEstimateMaximizesPenalizedLikelihood) {
    // add-one smoothing is the exact maximizer of likelihood plus one
    // pseudo-observation per parameter
    auto log_prior = [](const HmmParams& p) {
        double s = std::log(p.pi[0]) + std::log(p.pi[1]);
        for (const auto& row : p.h) s += std::log(row[0]) + std::log(row[1]);
        for (double e : p.emissions) s += std::log(e);
        return s;
    };
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int corpus_id = 0; corpus_id < 10; ++corpus_id) {
        auto corpus = random_corpus(rng, 2, 5, 6);
        auto best = estimate_mle(corpus, 4);
        double at_best = corpus_likelihood(best, corpus) + log_prior(best);
        for (int trial = 0; trial < 300; ++trial) {
            HmmParams q = HmmParams::uniform(4, 2);
            // half the trials perturb the optimum slightly, half are random
            bool local = trial % 2 == 0;
            double a = local ? std::clamp(best.pi[0] + 0.02 * (u(rng) - 0.5), 0.001, 0.999) : u(rng);
            q.pi = {a, 1 - a};
            for (int j = 0; j < 2; ++j) {
                double b = local ? std::clamp(best.h[j][0] + 0.02 * (u(rng) - 0.5), 0.001, 0.999) : u(rng);
                q.h[j] = {b, 1 - b};
            }
            for (std::size_t s = 0; s < 2; ++s)
                for (std::size_t v = 0; v < 2; ++v) {
                    double sum = 0;
                    for (std::size_t k = 0; k < 4; ++k)
                        sum += q.b(s, v, k) = local ? best.b(s, v, k) * (1 + 0.05 * (u(rng) - 0.5)) : u(rng);
                    for (std::size_t k = 0; k < 4; ++k) q.b(s, v, k) /= sum;
                }
            EXPECT_GE(at_best + 1e-9, corpus_likelihood(q, corpus) + log_prior(q));
        }
    }
}

TEST(Inference, Examples) {
    auto p = HmmParams::uniform(2, 2);
    EXPECT_DOUBLE_EQ(infer_healthy(p, ObservationVector{0.3, 0.8}), 0.125);

    auto certain = HmmParams::uniform(1, 2);
    certain.h = {{{0.0, 1.0}, {0.0, 1.0}}};
    double v = infer_healthy(certain, ObservationVector{0.3, 0.8});
    EXPECT_LT(v, 1.0);
    EXPECT_NEAR(v, 1.0, 1e-8);

    std::vector<TrainingSegment> good{segment(std::vector<std::uint8_t>(20, 1), 0.0, 2)};
    std::vector<TrainingSegment> bad{segment(std::vector<std::uint8_t>(20, 0), 0.0, 2)};
    ObservationVector obs{0.0, 0.0};
    EXPECT_GT(infer_healthy(estimate_mle(good, 10), obs), infer_healthy(estimate_mle(bad, 10), obs));
}

TEST(Inference, MonotoneInHealthyTransitions) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        auto p = HmmParams::uniform(10, 2);
        double a = u(rng);
        p.pi = {a, 1 - a};
        for (int j = 0; j < 2; ++j) {
            double b = u(rng);
            p.h[j] = {1 - b, b};
        }
        ObservationVector obs{u(rng), u(rng)};
        auto q = p;
        for (int j = 0; j < 2; ++j) {
            double up = q.h[j][1] + (1 - q.h[j][1]) * u(rng);
            q.h[j] = {1 - up, up};
        }
        EXPECT_GE(infer_healthy(q, obs), infer_healthy(p, obs));
        EXPECT_GE(posterior_healthy(q, q.pi, obs), posterior_healthy(p, p.pi, obs) - 1e-12);
    }
}

TEST(Inference, PosteriorIsNormalizedJoint) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        auto p = estimate_mle(random_corpus(rng, 2), 10);
        ObservationVector obs{0.25, 0.6};
        double healthy = infer_healthy(p, p.pi, obs);
        double joint0 = p.pi[0] * p.h[0][0] + p.pi[1] * p.h[1][0];
        for (std::size_t v = 0; v < 2; ++v) joint0 *= p.emit(0, v, obs[v]);
        EXPECT_NEAR(posterior_healthy(p, p.pi, obs), healthy / (healthy + joint0), 1e-12);
    }
}

TEST(Params, JsonRoundTrip) {
    std::mt19937_64 rng(12);
    auto p = estimate_mle(random_corpus(rng, 2), 10);
    auto back = params_from_json(to_json(p));
    EXPECT_EQ(back.pi, p.pi);
    EXPECT_EQ(back.h, p.h);
    EXPECT_EQ(back.emissions, p.emissions);
    auto bad = to_json(p);
    bad["bins"] = 3;
    EXPECT_THROW(params_from_json(bad), config_error);
}
