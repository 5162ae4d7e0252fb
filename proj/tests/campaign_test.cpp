#include <gtest/gtest.h>

#include <sstream>

#include "wise/wise.hpp"

using namespace wise;

namespace {

SwarmGraph small_swarm(std::uint64_t seed, std::size_t n = 200) {
    TopologyConfig tc;
    tc.n = n;
    tc.seed = seed;
    return random_topology(tc).swarm;
}

CampaignConfig short_campaign(std::uint64_t seed) {
    CampaignConfig cfg;
    cfg.warmup = 10;
    cfg.iterations = 15;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST(Campaign, QuietSwarmDetectsNothing) {
    auto g = small_swarm(1);
    auto res = run_campaign(g, short_campaign(1));
    ASSERT_EQ(res.records.size(), 25u);
    for (const auto& r : res.records) {
        EXPECT_TRUE(r.metrics.detected.empty());
        EXPECT_TRUE(r.metrics.missed.empty());
        EXPECT_EQ(r.compromised, 0u);
    }
    for (const auto& rec : res.kb.records)
        for (Outcome o : rec.history) EXPECT_NE(o, Outcome::Compromised);
}

TEST(Campaign, IdenticalSeedsGiveIdenticalCsv) {
    auto g = small_swarm(2);
    auto cfg = short_campaign(9);
    cfg.adversary.kind = AdversaryConfig::Kind::Random;
    auto a = csv_string(run_campaign(g, cfg));
    auto b = csv_string(run_campaign(g, cfg));
    EXPECT_EQ(a, b);
    cfg.seed = 10;
    EXPECT_NE(a, csv_string(run_campaign(g, cfg)));
}

TEST(Campaign, CsvSchema) {
    auto g = small_swarm(3, 100);
    auto cfg = short_campaign(3);
    cfg.adversary.kind = AdversaryConfig::Kind::Random;
    auto csv = csv_string(run_campaign(g, cfg));
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, kCsvHeader);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7);
    }
    EXPECT_EQ(rows, cfg.warmup + cfg.iterations);
}

TEST(Campaign, DetectedAndMissedAreDisjoint) {
    auto g = small_swarm(4);
    auto cfg = short_campaign(4);
    cfg.adversary.kind = AdversaryConfig::Kind::Random;
    auto res = run_campaign(g, cfg);
    bool any = false;
    for (const auto& r : res.records) {
        std::set<DeviceId> det(r.metrics.detected.begin(), r.metrics.detected.end());
        for (DeviceId d : r.metrics.missed) EXPECT_FALSE(det.count(d));
        EXPECT_LE(det.size(), r.compromised);
        EXPECT_GE(r.th_sec, static_cast<double>(r.attested) / static_cast<double>(g.size()) - 1e-12);
        EXPECT_LE(r.th_sec, 1.0 + 1e-12);
        any = any || !det.empty();
    }
    EXPECT_TRUE(any);
}

TEST(Campaign, WarmupAttestsEveryone) {
    auto g = small_swarm(5, 150);
    auto res = run_campaign(g, short_campaign(5));
    for (const auto& r : res.records)
        if (r.warmup) { EXPECT_EQ(r.attested, g.size()); }
}

TEST(Campaign, WindowHoldsInBothModes) {
    auto g = small_swarm(6, 300);
    for (auto mode : {WindowConfig::Mode::Fixed, WindowConfig::Mode::Variable}) {
        auto cfg = short_campaign(6);
        cfg.iterations = 25;
        cfg.window.mode = mode;
        cfg.adversary.kind = AdversaryConfig::Kind::Random;
        auto res = run_campaign(g, cfg);
        for (const auto& r : res.records) EXPECT_EQ(r.window_violations, 0u);
    }
}

TEST(Campaign, SummaryJsonShape) {
    auto g = small_swarm(7, 100);
    auto cfg = short_campaign(7);
    auto res = run_campaign(g, cfg);
    auto j = summary_json(res, cfg);
    EXPECT_EQ(j["rounds"], cfg.iterations);
    EXPECT_EQ(j["detection_per_iteration"].size(), cfg.iterations);
    EXPECT_EQ(j["window_violations"], 0);
}
