#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wise/paths.hpp"
#include "wise/types.hpp"

namespace wise {

// Category indices of the default five-way cluster scheme.
inline constexpr std::size_t kGeographic = 0;
inline constexpr std::size_t kSoftware = 1;
inline constexpr std::size_t kHardware = 2;
inline constexpr std::size_t kSecuritySafety = 3;
inline constexpr std::size_t kTimeSensitivity = 4;

/// Devices from the first hop after the verifier up to and including the
/// target.  The verifier itself is the implicit origin of every path, so the
/// hop count is simply `size()`.
using HopPath = std::vector<DeviceId>;

struct Category {
    std::string name;
    std::vector<std::vector<DeviceId>> clusters;
};

/// k categories, each intended to partition the device set.
struct ClusterScheme {
    std::vector<Category> categories;

    std::size_t category_count() const { return categories.size(); }
    const std::vector<DeviceId>& members(ClusterId c) const {
        return categories.at(c.category).clusters.at(c.index);
    }
    std::size_t cluster_count() const {
        std::size_t total = 0;
        for (const auto& cat : categories) total += cat.clusters.size();
        return total;
    }
};

struct SchemeViolation {
    enum class Kind { Overlap, Uncovered, UnknownDevice };
    Kind kind;
    std::size_t category;
    DeviceId device;

    friend bool operator==(const SchemeViolation&, const SchemeViolation&) = default;
};

/// Checks non-overlap, coverage and uniformity of every category over the
/// device set [0, n).  Uniformity (exactly one cluster per category) holds
/// exactly when no device is reported as overlapping or uncovered.
inline std::vector<SchemeViolation> validate_scheme(const ClusterScheme& scheme, std::size_t n) {
    std::vector<SchemeViolation> out;
    std::vector<std::uint32_t> hits(n);
    for (std::size_t c = 0; c < scheme.categories.size(); ++c) {
        std::fill(hits.begin(), hits.end(), 0);
        for (const auto& cluster : scheme.categories[c].clusters) {
            for (DeviceId d : cluster) {
                if (d >= n) {
                    out.push_back({SchemeViolation::Kind::UnknownDevice, c, d});
                    continue;
                }
                if (++hits[d] == 2) out.push_back({SchemeViolation::Kind::Overlap, c, d});
            }
        }
        for (DeviceId d = 0; d < n; ++d)
            if (hits[d] == 0) out.push_back({SchemeViolation::Kind::Uncovered, c, d});
    }
    return out;
}

/// The verifier's per-device metadata tuple.
struct DeviceRecord {
    std::vector<ClusterId> clusters;
    Minutes t_max = 0;
    std::vector<Outcome> history;
    Outcome predicted = Outcome::NotAttested;
    Minutes t_last = 0;
    std::vector<DeviceId> neighbors;
    std::vector<HopPath> paths;
    int degree = 1;
};

using Link = std::pair<DeviceId, DeviceId>;

/// Ground-truth topology known to the verifier.  Immutable once built.
class SwarmGraph {
public:
    struct Spec {
        std::size_t n = 0;
        std::vector<Link> links;
        std::vector<DeviceId> attachment;
        ClusterScheme scheme;
        std::vector<Minutes> t_max;
        std::vector<int> degree;
        std::size_t m_paths = 3;
    };

    SwarmGraph() = default;

    explicit SwarmGraph(Spec spec) : n_(spec.n), scheme_(std::move(spec.scheme)), m_paths_(spec.m_paths) {
        if (spec.t_max.empty()) spec.t_max.assign(n_, 600.0);
        if (spec.degree.empty()) spec.degree.assign(n_, 1);
        if (spec.t_max.size() != n_ || spec.degree.size() != n_)
            throw config_error("per-device metadata length does not match device count");

        adjacency_.assign(n_, {});
        for (auto [a, b] : spec.links) {
            if (a >= n_) throw unknown_device(a);
            if (b >= n_) throw unknown_device(b);
            if (a == b) throw config_error("self link on device " + std::to_string(a));
            adjacency_[a].push_back(b);
            adjacency_[b].push_back(a);
        }
        for (auto& row : adjacency_) {
            std::sort(row.begin(), row.end());
            row.erase(std::unique(row.begin(), row.end()), row.end());
        }
        for (DeviceId a = 0; a < n_; ++a)
            for (DeviceId b : adjacency_[a])
                if (a < b) links_.emplace_back(a, b);

        for (DeviceId d : spec.attachment)
            if (d >= n_) throw unknown_device(d);
        attachment_ = std::move(spec.attachment);
        std::sort(attachment_.begin(), attachment_.end());
        attachment_.erase(std::unique(attachment_.begin(), attachment_.end()), attachment_.end());

        records_.resize(n_);
        for (DeviceId d = 0; d < n_; ++d) {
            records_[d].t_max = spec.t_max[d];
            records_[d].degree = spec.degree[d];
            records_[d].neighbors = adjacency_[d];
        }
        membership_.assign(scheme_.categories.size(), std::vector<std::int32_t>(n_, -1));
        for (std::size_t c = 0; c < scheme_.categories.size(); ++c) {
            const auto& clusters = scheme_.categories[c].clusters;
            for (std::size_t i = 0; i < clusters.size(); ++i)
                for (DeviceId d : clusters[i])
                    if (d < n_ && membership_[c][d] < 0) {
                        membership_[c][d] = static_cast<std::int32_t>(i);
                        records_[d].clusters.push_back(
                            {static_cast<std::uint8_t>(c), static_cast<std::uint16_t>(i)});
                    }
        }

        max_degree_ = scheme_.categories.empty() ? 1 : static_cast<int>(scheme_.categories.back().clusters.size());
        for (const auto& r : records_) max_degree_ = std::max(max_degree_, r.degree);
        max_degree_ = std::max(max_degree_, 1);

        verifier_adjacency_ = adjacency_;
        verifier_adjacency_.emplace_back(attachment_.begin(), attachment_.end());
        graph::BfsWorkspace ws(n_ + 1);
        for (DeviceId d = 0; d < n_; ++d) records_[d].paths = compute_paths(d, m_paths_, ws);
    }

    std::size_t size() const noexcept { return n_; }
    const std::vector<Link>& links() const noexcept { return links_; }
    const std::vector<DeviceId>& attachment() const noexcept { return attachment_; }
    const ClusterScheme& scheme() const noexcept { return scheme_; }
    std::size_t m_paths() const noexcept { return m_paths_; }

    bool contains(DeviceId d) const noexcept { return d < n_; }

    const DeviceRecord& record(DeviceId d) const {
        if (d >= n_) throw unknown_device(d);
        return records_[d];
    }
    const std::vector<DeviceRecord>& records() const noexcept { return records_; }

    const std::vector<DeviceId>& neighbors(DeviceId d) const {
        if (d >= n_) throw unknown_device(d);
        return adjacency_[d];
    }

    bool linked(DeviceId a, DeviceId b) const {
        const auto& row = neighbors(a);
        return std::binary_search(row.begin(), row.end(), b);
    }

    bool is_attached(DeviceId d) const {
        return std::binary_search(attachment_.begin(), attachment_.end(), d);
    }

    /// Cluster index of `d` in `category`, if the scheme assigns one.
    std::optional<std::uint16_t> cluster_of(DeviceId d, std::size_t category) const {
        if (d >= n_) throw unknown_device(d);
        std::int32_t idx = membership_.at(category)[d];
        if (idx < 0) return std::nullopt;
        return static_cast<std::uint16_t>(idx);
    }

    /// Hop count of the shortest verifier path; throws when unreachable.
    std::size_t depth(DeviceId d) const {
        const auto& paths = record(d).paths;
        if (paths.empty()) throw unreachable_device(d);
        return paths.front().size();
    }

    bool reachable(DeviceId d) const { return !record(d).paths.empty(); }

    bool connected() const {
        for (const auto& r : records_)
            if (r.paths.empty()) return false;
        return true;
    }

    /// Largest admissible sensitivity degree: the cluster count of the last
    /// category, or a larger recorded degree.
    int max_degree() const noexcept { return max_degree_; }

    std::vector<HopPath> compute_paths(DeviceId target, std::size_t m, graph::BfsWorkspace& ws) const {
        const auto verifier = static_cast<graph::Vertex>(n_);
        auto raw = graph::yen_k_shortest(verifier_adjacency_, verifier, target, m, ws);
        std::vector<HopPath> out;
        out.reserve(raw.size());
        for (auto& p : raw) out.emplace_back(p.begin() + 1, p.end());
        return out;
    }

private:
    std::size_t n_ = 0;
    std::vector<std::vector<DeviceId>> adjacency_;
    std::vector<std::vector<DeviceId>> verifier_adjacency_;
    std::vector<Link> links_;
    std::vector<DeviceId> attachment_;
    ClusterScheme scheme_;
    std::vector<std::vector<std::int32_t>> membership_;
    std::vector<DeviceRecord> records_;
    std::size_t m_paths_ = 3;
    int max_degree_ = 1;
};

inline const std::vector<DeviceId>& neighbors(const SwarmGraph& swarm, DeviceId d) {
    return swarm.neighbors(d);
}

inline std::vector<SchemeViolation> validate_scheme(const SwarmGraph& swarm) {
    return validate_scheme(swarm.scheme(), swarm.size());
}

/// Up to m loopless verifier-to-target paths, shortest first.
inline std::vector<HopPath> k_shortest_paths(const SwarmGraph& swarm, DeviceId target, std::size_t m) {
    if (!swarm.contains(target)) throw unknown_device(target);
    if (m == 0) throw config_error("path count must be positive");
    if (m <= swarm.m_paths()) {
        const auto& stored = swarm.record(target).paths;
        if (stored.empty()) throw unreachable_device(target);
        return {stored.begin(), stored.begin() + std::min(m, stored.size())};
    }
    graph::BfsWorkspace ws(swarm.size() + 1);
    auto paths = swarm.compute_paths(target, m, ws);
    if (paths.empty()) throw unreachable_device(target);
    return paths;
}

/// True when `path` starts at an attachment device, ends at `target`, never
/// repeats a device and only uses existing links.
inline bool path_is_valid(const SwarmGraph& swarm, const HopPath& path, DeviceId target) {
    if (path.empty() || path.back() != target || !swarm.is_attached(path.front())) return false;
    std::vector<DeviceId> sorted = path;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return false;
    for (std::size_t i = 1; i < path.size(); ++i)
        if (!swarm.linked(path[i - 1], path[i])) return false;
    return true;
}

} // namespace wise
