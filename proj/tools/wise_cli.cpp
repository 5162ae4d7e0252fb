#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "wise/wise.hpp"

namespace fs = std::filesystem;
using namespace wise;

namespace {

constexpr int kUsage = 2;
constexpr int kRuntime = 3;

struct usage_error : error {
    using error::error;
};

AdversaryConfig parse_adversary(const std::string& text) {
    AdversaryConfig a;
    auto colon = text.find(':');
    std::string kind = text.substr(0, colon);
    std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    try {
        if (kind == "none") {
            a.kind = AdversaryConfig::Kind::None;
        } else if (kind == "random") {
            a.kind = AdversaryConfig::Kind::Random;
            if (!arg.empty()) a.max_ratio = std::stod(arg);
        } else if (kind == "targeted") {
            a.kind = AdversaryConfig::Kind::Targeted;
            // CLUSTER is a hardware cluster index, or CATEGORY.INDEX
            auto dot = arg.find('.');
            if (arg.empty()) throw usage_error("targeted adversary needs a cluster");
            if (dot == std::string::npos) {
                a.target = {static_cast<std::uint8_t>(kHardware), static_cast<std::uint16_t>(std::stoul(arg))};
            } else {
                a.target = {static_cast<std::uint8_t>(std::stoul(arg.substr(0, dot))),
                            static_cast<std::uint16_t>(std::stoul(arg.substr(dot + 1)))};
            }
        } else if (kind == "roving") {
            a.kind = AdversaryConfig::Kind::Roving;
            if (!arg.empty()) a.roving_fraction = std::stod(arg);
        } else {
            throw usage_error("unknown adversary '" + text + "'");
        }
    } catch (const std::logic_error&) {
        throw usage_error("bad adversary argument '" + text + "'");
    }
    if (a.max_ratio < 0 || a.max_ratio > 1) throw usage_error("attack ratio must lie in [0, 1]");
    return a;
}

WindowConfig parse_window(const std::string& text) {
    WindowConfig w;
    auto colon = text.find(':');
    std::string kind = text.substr(0, colon);
    std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
    try {
        if (kind == "topology") {
            w.mode = WindowConfig::Mode::Topology;
        } else if (kind == "fixed") {
            w.mode = WindowConfig::Mode::Fixed;
            if (!arg.empty()) w.fixed = std::stoi(arg);
        } else if (kind == "variable") {
            w.mode = WindowConfig::Mode::Variable;
            if (!arg.empty()) {
                auto comma = arg.find(',');
                if (comma == std::string::npos) throw usage_error("variable window is LO,HI");
                w.lo = std::stoi(arg.substr(0, comma));
                w.hi = std::stoi(arg.substr(comma + 1));
            }
        } else {
            throw usage_error("unknown window '" + text + "'");
        }
    } catch (const std::logic_error&) {
        throw usage_error("bad window argument '" + text + "'");
    }
    if (w.fixed < 1 || w.lo < 1 || w.hi < w.lo) throw usage_error("invalid window '" + text + "'");
    return w;
}

SwarmGraph make_topology(int scenario, std::size_t n, std::uint64_t seed) {
    if (scenario < 1 || scenario > 3) throw usage_error("scenario must be 1, 2 or 3");
    if (n < 10) throw usage_error("size must be at least 10");
    TopologyConfig tc;
    tc.n = n;
    std::tie(tc.degree_lo, tc.degree_hi) = scenario_degrees(scenario);
    tc.seed = seed;
    return random_topology(tc).swarm;
}

std::size_t thread_cap() {
    std::size_t cap = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("WISE_THREADS")) {
        try {
            long v = std::stol(env);
            if (v >= 1) cap = static_cast<std::size_t>(v);
        } catch (const std::logic_error&) {
            throw usage_error("WISE_THREADS must be a positive integer");
        }
    }
    return cap;
}

void write_file(const fs::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw error("cannot write " + path.string());
    out << body;
}

struct CampaignOptions {
    double coverage = 0.2;
    std::string adversary = "random:0.3";
    std::string window = "variable:4,10";
    std::string attack = "every";
    std::size_t warmup = 100;
    std::size_t iterations = 30;
    std::uint64_t seed = 1;

    CampaignConfig config() const {
        if (!(coverage > 0.0) || coverage > 1.0) throw usage_error("coverage must lie in (0, 1]");
        CampaignConfig cc;
        cc.plan.th_cov = coverage;
        cc.adversary = parse_adversary(adversary);
        cc.window = parse_window(window);
        if (attack == "every") cc.attack = AttackSchedule::EveryIteration;
        else if (attack == "once") cc.attack = AttackSchedule::BeforeAttestation;
        else throw usage_error("attack schedule is 'every' or 'once'");
        cc.warmup = warmup;
        cc.iterations = iterations;
        cc.seed = seed;
        return cc;
    }

    void add_to(CLI::App* app) {
        app->add_option("--coverage", coverage, "minimum share of devices attested per iteration");
        app->add_option("--adversary", adversary, "none | random:RATIO | targeted:CLUSTER | roving[:FRACTION]");
        app->add_option("--window", window, "topology | fixed:W | variable:LO,HI");
        app->add_option("--attack", attack, "every | once");
        app->add_option("--warmup", warmup, "full-attestation iterations before planning");
        app->add_option("--iterations", iterations, "planned iterations");
        app->add_option("--seed", seed, "campaign seed");
    }
};

struct RunOutcome {
    CampaignResult result;
    IterationMetrics baseline;
};

RunOutcome run_one(const SwarmGraph& swarm, const CampaignConfig& cc) {
    RunOutcome out;
    out.result = run_campaign(swarm, cc);
    out.baseline = baseline_full(swarm, cc.sim, cc.seed);
    return out;
}

std::string detection_series(const CampaignResult& r) {
    std::ostringstream s;
    s << "iteration,compromised,detected,detection_ratio\n";
    char buf[128];
    for (const auto* rec : r.attestation_phase()) {
        std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.6f\n", rec->iteration, rec->compromised,
                      rec->metrics.detected.size(), rec->detection_ratio());
        s << buf;
    }
    return s.str();
}

constexpr const char* kOverheadHeader = "n,wise_packets,full_packets,packet_ratio,wise_agg_bytes,full_agg_bytes,agg_ratio\n";

std::string overhead_row(std::size_t n, const PhaseSummary& s, const IterationMetrics& base) {
    char buf[256];
    double fp = static_cast<double>(base.packets);
    std::snprintf(buf, sizeof buf, "%zu,%.3f,%zu,%.6f,%.3f,%.3f,%.6f\n", n, s.mean_packets, base.packets,
                  fp > 0 ? s.mean_packets / fp : 0.0, s.mean_agg_bytes, base.mean_agg_bytes,
                  base.mean_agg_bytes > 0 ? s.mean_agg_bytes / base.mean_agg_bytes : 0.0);
    return buf;
}

int cmd_generate(int scenario, std::size_t n, std::uint64_t seed, const std::string& out) {
    auto swarm = make_topology(scenario, n, seed);
    if (out.empty() || out == "-") {
        std::cout << topology_to_json(swarm).dump() << '\n';
    } else {
        save_topology(swarm, out);
    }
    return 0;
}

int cmd_run(const std::string& topology, int scenario, std::size_t n, const CampaignOptions& opts,
            const std::string& out_dir) {
    auto cc = opts.config();
    SwarmGraph swarm = topology.empty() ? make_topology(scenario, n, opts.seed) : load_topology(topology);
    auto run = run_one(swarm, cc);
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "metrics.csv", csv_string(run.result));
    auto summary = summary_json(run.result, cc);
    summary["n"] = swarm.size();
    summary["baseline_packets"] = run.baseline.packets;
    summary["baseline_agg_bytes"] = run.baseline.mean_agg_bytes;
    write_file(fs::path(out_dir) / "summary.json", summary.dump(2) + "\n");
    write_file(fs::path(out_dir) / "detection_rate.csv", detection_series(run.result));
    auto s = summarize(run.result);
    std::string overhead = kOverheadHeader + overhead_row(swarm.size(), s, run.baseline);
    write_file(fs::path(out_dir) / "overhead.csv", overhead);
    std::printf("n=%zu detection=%.3f packets=%.1f (full %zu) agg_bytes=%.1f (full %.1f)\n", swarm.size(),
                s.mean_detection, s.mean_packets, run.baseline.packets, s.mean_agg_bytes, run.baseline.mean_agg_bytes);
    return 0;
}

int cmd_sweep(const std::vector<int>& scenarios, const std::vector<std::size_t>& sizes, std::size_t repeats,
              const CampaignOptions& opts, const std::string& out_dir) {
    if (sizes.empty()) throw usage_error("size list is empty");
    if (scenarios.empty()) throw usage_error("scenario list is empty");
    if (repeats == 0) throw usage_error("repeats must be positive");
    for (int sc : scenarios)
        if (sc < 1 || sc > 3) throw usage_error("scenario must be 1, 2 or 3");
    for (auto n : sizes)
        if (n < 10) throw usage_error("size must be at least 10");
    auto base_cfg = opts.config();

    struct Job {
        int scenario;
        std::size_t n;
        std::size_t repeat;
        PhaseSummary summary;
        IterationMetrics baseline;
    };
    std::vector<Job> jobs;
    for (int sc : scenarios)
        for (auto n : sizes)
            for (std::size_t r = 0; r < repeats; ++r) jobs.push_back({sc, n, r, {}, {}});

    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::string failure;
    auto worker = [&] {
        for (std::size_t i; (i = next++) < jobs.size();) {
            try {
                auto& job = jobs[i];
                auto cc = base_cfg;
                cc.seed = opts.seed + job.repeat;
                auto swarm = make_topology(job.scenario, job.n, cc.seed);
                auto run = run_one(swarm, cc);
                job.summary = summarize(run.result);
                job.baseline = run.baseline;
            } catch (const std::exception& e) {
                std::lock_guard lock(err_mu);
                if (failure.empty()) failure = e.what();
            }
        }
    };
    std::size_t threads = std::min(thread_cap(), jobs.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (!failure.empty()) throw error(failure);

    std::ostringstream det, over;
    det << "scenario,n,runs,worst_detection,mean_detection,best_detection\n";
    over << "scenario," << kOverheadHeader;
    char buf[256];
    for (int sc : scenarios)
        for (auto n : sizes) {
            double lo = 1, hi = 0, sum = 0;
            PhaseSummary mean;
            IterationMetrics base;
            std::size_t count = 0;
            for (const auto& j : jobs) {
                if (j.scenario != sc || j.n != n) continue;
                lo = std::min(lo, j.summary.mean_detection);
                hi = std::max(hi, j.summary.mean_detection);
                sum += j.summary.mean_detection;
                mean.mean_packets += j.summary.mean_packets;
                mean.mean_agg_bytes += j.summary.mean_agg_bytes;
                base.packets += j.baseline.packets;
                base.mean_agg_bytes += j.baseline.mean_agg_bytes;
                ++count;
            }
            auto c = static_cast<double>(count);
            std::snprintf(buf, sizeof buf, "%d,%zu,%zu,%.6f,%.6f,%.6f\n", sc, n, count, lo, sum / c, hi);
            det << buf;
            mean.mean_packets /= c;
            mean.mean_agg_bytes /= c;
            base.packets = static_cast<std::size_t>(std::llround(static_cast<double>(base.packets) / c));
            base.mean_agg_bytes /= c;
            over << sc << ',' << overhead_row(n, mean, base);
        }
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "sweep_detection.csv", det.str());
    write_file(fs::path(out_dir) / "sweep_overhead.csv", over.str());
    std::cout << det.str();
    return 0;
}

// Checks a metrics CSV: exact header, eight numeric columns per row.
int cmd_schema_check(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw usage_error("cannot read " + path);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) {
        std::fprintf(stderr, "%s: header mismatch\n", path.c_str());
        return kRuntime;
    }
    std::size_t row = 1, bad = 0;
    while (std::getline(in, line)) {
        ++row;
        std::stringstream ss(line);
        std::string cell;
        std::size_t cols = 0;
        bool ok = true;
        while (std::getline(ss, cell, ',')) {
            ++cols;
            char* end = nullptr;
            std::strtod(cell.c_str(), &end);
            if (cell.empty() || *end != '\0') ok = false;
        }
        if (!ok || cols != 8) {
            std::fprintf(stderr, "%s:%zu: malformed row\n", path.c_str(), row);
            ++bad;
        }
    }
    if (bad > 0) return kRuntime;
    std::printf("%s: %zu rows ok\n", path.c_str(), row - 1);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"wise: swarm attestation planner and simulator"};
    app.require_subcommand(1);

    int scenario = 1;
    std::size_t size = 1000;
    std::uint64_t gen_seed = 0;
    std::string out;
    auto* gen = app.add_subcommand("generate", "write a scenario topology as JSON");
    gen->add_option("--scenario", scenario, "1: degrees 1-5, 2: 1-7, 3: 2-10");
    gen->add_option("--size", size, "device count");
    gen->add_option("--seed", gen_seed, "topology seed");
    gen->add_option("--out", out, "output file (stdout when omitted)");

    CampaignOptions run_opts;
    std::string topology;
    std::string run_out = "out";
    auto* run = app.add_subcommand("run", "run one campaign and write metrics");
    run->add_option("--topology", topology, "topology JSON (generated from --scenario/--size otherwise)");
    run->add_option("--scenario", scenario, "scenario for a generated topology");
    run->add_option("--size", size, "device count for a generated topology");
    run->add_option("--out", run_out, "output directory");
    run_opts.add_to(run);

    CampaignOptions sweep_opts;
    std::vector<int> scenarios{1, 2, 3};
    std::vector<std::size_t> sizes{100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
    std::size_t repeats = 5;
    std::string sweep_out = "sweep";
    auto* sweep = app.add_subcommand("sweep", "detection and overhead series over sizes and scenarios");
    sweep->add_option("--scenario", scenarios, "scenarios")->delimiter(',');
    sweep->add_option("--size", sizes, "sizes")->delimiter(',');
    sweep->add_option("--repeats", repeats, "runs per (scenario, size)");
    sweep->add_option("--out", sweep_out, "output directory");
    sweep_opts.add_to(sweep);

    std::string csv_path;
    auto* check = app.add_subcommand("schema-check", "validate a metrics CSV");
    check->add_option("file", csv_path, "metrics.csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kUsage;
    }

    try {
        if (gen->parsed()) return cmd_generate(scenario, size, gen_seed, out);
        if (run->parsed()) return cmd_run(topology, scenario, size, run_opts, run_out);
        if (sweep->parsed()) return cmd_sweep(scenarios, sizes, repeats, sweep_opts, sweep_out);
        if (check->parsed()) return cmd_schema_check(csv_path);
    } catch (const usage_error& e) {
        std::fprintf(stderr, "usage: %s\n", e.what());
        return kUsage;
    } catch (const config_error& e) {
        std::fprintf(stderr, "usage: %s\n", e.what());
        return kUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntime;
    }
    return kUsage;
}
