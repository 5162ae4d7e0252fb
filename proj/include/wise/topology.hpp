#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "wise/swarm.hpp"

namespace wise {

inline const char* category_name(std::size_t c) {
    static constexpr const char* names[] = {"geographic", "software", "hardware", "security_safety",
                                            "time_sensitivity"};
    return c < 5 ? names[c] : "custom";
}

/// Per-category cluster sizing.  Geographic clusters are contiguous groups
/// whose sizes are drawn from `geo_sizes` with `geo_weights`; the other four
/// categories assign devices uniformly at random to a fixed cluster count.
struct ClusterConfig {
    std::vector<std::size_t> geo_sizes{30, 20, 10};
    std::vector<double> geo_weights{0.7, 0.2, 0.1};
    std::size_t software = 30;
    std::size_t hardware = 6;
    std::size_t security_safety = 10;
    std::size_t time_sensitivity = 10;
};

/// Ordering used to cut geographic clusters: BFS rings around the start
/// device, or subtree sectors of the BFS tree.
enum class GeoOrder { Breadth, Sector };

struct TopologyConfig {
    std::size_t n = 1000;
    int degree_lo = 1;
    int degree_hi = 5;
    ClusterConfig clusters;
    int t_max_lo_iterations = 4;
    int t_max_hi_iterations = 10;
    Minutes iteration_period = 60;
    std::size_t attachment_count = 1;
    std::size_t m_paths = 3;
    GeoOrder geo_order = GeoOrder::Sector;
    std::uint64_t seed = 0;
};

/// Where the degree targets could not be met exactly.
struct TopologyReport {
    std::size_t above_hi = 0; // devices at hi + 1 after the connectivity repair
    std::size_t below_lo = 0;
};

struct GeneratedTopology {
    SwarmGraph swarm;
    TopologyReport report;
};

/// Degree range of the three evaluation scenarios.
inline std::pair<int, int> scenario_degrees(int scenario) {
    switch (scenario) {
    case 1: return {1, 5};
    case 2: return {1, 7};
    case 3: return {2, 10};
    default: throw config_error("scenario must be 1, 2 or 3");
    }
}

namespace detail {

inline std::vector<std::vector<DeviceId>> bfs_order_adjacency(std::size_t n, const std::vector<Link>& links,
                                                              std::vector<DeviceId>& order, DeviceId start) {
    std::vector<std::vector<DeviceId>> adj(n);
    for (auto [a, b] : links) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    for (auto& row : adj) std::sort(row.begin(), row.end());
    order.clear();
    std::vector<char> seen(n, 0);
    order.push_back(start);
    seen[start] = 1;
    for (std::size_t head = 0; head < order.size(); ++head)
        for (DeviceId w : adj[order[head]])
            if (!seen[w]) {
                seen[w] = 1;
                order.push_back(w);
            }
    return adj;
}

// Preorder over the BFS shortest-path tree, so each subtree is contiguous.
inline std::vector<DeviceId> tree_preorder(std::size_t n, const std::vector<Link>& links,
                                           const std::vector<DeviceId>& bfs) {
    std::vector<std::vector<DeviceId>> adj(n);
    for (auto [a, b] : links) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    for (auto& row : adj) std::sort(row.begin(), row.end());
    std::vector<char> seen(n, 0);
    std::vector<std::vector<DeviceId>> kids(n);
    seen[bfs.front()] = 1;
    for (DeviceId u : bfs)
        for (DeviceId w : adj[u])
            if (!seen[w]) {
                seen[w] = 1;
                kids[u].push_back(w);
            }
    std::vector<DeviceId> order, stack{bfs.front()};
    order.reserve(n);
    while (!stack.empty()) {
        DeviceId u = stack.back();
        stack.pop_back();
        order.push_back(u);
        for (auto it = kids[u].rbegin(); it != kids[u].rend(); ++it) stack.push_back(*it);
    }
    return order;
}

} // namespace detail

/// Random connected topology with per-device degree targets drawn from
/// [lo, hi]: a random spanning tree first, then random extra links between
/// devices still below their target.  Devices are relabelled in BFS order
/// (or BFS-tree preorder) from the start device, so device 0 is where the
/// verifier attaches and geographic clusters are consecutive id ranges.
inline GeneratedTopology random_topology(const TopologyConfig& cfg) {
    const std::size_t n = cfg.n;
    const int lo = cfg.degree_lo, hi = cfg.degree_hi;
    if (n == 0) throw config_error("device count must be positive");
    if (lo < 1 || hi < lo) throw config_error("degree range must satisfy 1 <= lo <= hi");
    if (n > 1 && static_cast<std::size_t>(lo) > n - 1)
        throw config_error("degree range infeasible: lo exceeds n - 1");
    if (n > 2 && hi < 2) throw config_error("degree range infeasible: a connected graph needs a degree >= 2");
    if (cfg.t_max_lo_iterations < 1 || cfg.t_max_hi_iterations < cfg.t_max_lo_iterations)
        throw config_error("invalid T_max range");
    if (cfg.attachment_count == 0 || cfg.attachment_count > n) throw config_error("invalid attachment count");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> target_dist(lo, hi);
    std::vector<int> target(n);
    for (auto& t : target) t = target_dist(rng);

    std::vector<DeviceId> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<int> deg(n, 0);
    std::vector<Link> links;
    links.reserve(n * static_cast<std::size_t>(hi) / 2 + n);
    std::vector<std::vector<DeviceId>> adj(n);
    auto add_link = [&](DeviceId a, DeviceId b) {
        links.emplace_back(std::min(a, b), std::max(a, b));
        adj[a].push_back(b);
        adj[b].push_back(a);
        ++deg[a];
        ++deg[b];
    };

    TopologyReport report;
    std::vector<DeviceId> open; // earlier devices still below their target
    std::vector<DeviceId> placed;
    for (std::size_t i = 0; i < n; ++i) {
        DeviceId v = order[i];
        if (i > 0) {
            DeviceId parent;
            if (!open.empty()) {
                std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
                parent = open[pick(rng)];
            } else {
                std::vector<DeviceId> below_hi;
                for (DeviceId u : placed)
                    if (deg[u] < hi) below_hi.push_back(u);
                const auto& pool = below_hi.empty() ? placed : below_hi;
                std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
                parent = pool[pick(rng)];
            }
            add_link(v, parent);
            if (deg[parent] >= target[parent])
                open.erase(std::remove(open.begin(), open.end(), parent), open.end());
        }
        placed.push_back(v);
        if (deg[v] < target[v]) open.push_back(v);
    }

    std::vector<DeviceId> deficit;
    for (DeviceId v = 0; v < n; ++v)
        if (deg[v] < target[v]) deficit.push_back(v);
    std::shuffle(deficit.begin(), deficit.end(), rng);
    for (std::size_t attempt = 0; attempt < 4 && deficit.size() > 1; ++attempt) {
        for (DeviceId u : deficit) {
            for (int tries = 0; tries < 32 && deg[u] < target[u]; ++tries) {
                std::uniform_int_distribution<std::size_t> pick(0, deficit.size() - 1);
                DeviceId w = deficit[pick(rng)];
                if (w == u || deg[w] >= target[w]) continue;
                if (std::find(adj[u].begin(), adj[u].end(), w) != adj[u].end()) continue;
                add_link(u, w);
            }
        }
        std::erase_if(deficit, [&](DeviceId v) { return deg[v] >= target[v]; });
    }
    for (DeviceId v = 0; v < n; ++v) {
        if (deg[v] > hi) ++report.above_hi;
        if (deg[v] < lo) ++report.below_lo;
    }

    std::uniform_int_distribution<std::size_t> start_pick(0, n - 1);
    DeviceId start = static_cast<DeviceId>(start_pick(rng));
    std::vector<DeviceId> bfs;
    detail::bfs_order_adjacency(n, links, bfs, start);
    if (cfg.geo_order == GeoOrder::Sector) bfs = detail::tree_preorder(n, links, bfs);
    std::vector<DeviceId> relabel(n);
    for (std::size_t i = 0; i < n; ++i) relabel[bfs[i]] = static_cast<DeviceId>(i);
    for (auto& [a, b] : links) {
        a = relabel[a];
        b = relabel[b];
        if (a > b) std::swap(a, b);
    }
    std::sort(links.begin(), links.end());

    ClusterScheme scheme;
    scheme.categories.resize(5);
    for (std::size_t c = 0; c < 5; ++c) scheme.categories[c].name = category_name(c);

    // Geographic: consecutive chunks of the relabelled order.
    std::discrete_distribution<std::size_t> geo_pick(cfg.clusters.geo_weights.begin(), cfg.clusters.geo_weights.end());
    for (std::size_t next = 0; next < n;) {
        std::size_t size = cfg.clusters.geo_sizes.at(geo_pick(rng));
        size = std::min(size, n - next);
        std::vector<DeviceId> members(size);
        std::iota(members.begin(), members.end(), static_cast<DeviceId>(next));
        scheme.categories[kGeographic].clusters.push_back(std::move(members));
        next += size;
    }
    auto assign_uniform = [&](std::size_t category, std::size_t count) {
        if (count == 0) throw config_error("cluster count must be positive");
        auto& clusters = scheme.categories[category].clusters;
        clusters.assign(count, {});
        std::uniform_int_distribution<std::size_t> pick(0, count - 1);
        for (DeviceId d = 0; d < n; ++d) clusters[pick(rng)].push_back(d);
    };
    assign_uniform(kSoftware, cfg.clusters.software);
    assign_uniform(kHardware, cfg.clusters.hardware);
    assign_uniform(kSecuritySafety, cfg.clusters.security_safety);
    assign_uniform(kTimeSensitivity, cfg.clusters.time_sensitivity);

    std::vector<int> degree(n);
    const auto& ts = scheme.categories[kTimeSensitivity].clusters;
    for (std::size_t i = 0; i < ts.size(); ++i)
        for (DeviceId d : ts[i]) degree[d] = static_cast<int>(i) + 1;

    std::vector<Minutes> t_max(n);
    std::uniform_int_distribution<int> window(cfg.t_max_lo_iterations, cfg.t_max_hi_iterations);
    for (auto& t : t_max) t = window(rng) * cfg.iteration_period;

    std::vector<DeviceId> attachment(cfg.attachment_count);
    std::iota(attachment.begin(), attachment.end(), 0);

    SwarmGraph::Spec spec;
    spec.n = n;
    spec.links = std::move(links);
    spec.attachment = std::move(attachment);
    spec.scheme = std::move(scheme);
    spec.t_max = std::move(t_max);
    spec.degree = std::move(degree);
    spec.m_paths = cfg.m_paths;
    return {SwarmGraph(std::move(spec)), report};
}

} // namespace wise
