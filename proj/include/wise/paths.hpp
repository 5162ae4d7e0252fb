#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace wise::graph {

using Vertex = std::uint32_t;
using Adjacency = std::vector<std::vector<Vertex>>;
using VertexPath = std::vector<Vertex>;

/// Unit-weight BFS search state reused across many queries.  Stamps avoid
/// clearing O(V) arrays between queries.
class BfsWorkspace {
public:
    explicit BfsWorkspace(std::size_t vertices)
        : seen_(vertices, 0), blocked_(vertices, 0), parent_(vertices, 0) {
        queue_.reserve(vertices);
    }

    void block(Vertex v) { blocked_[v] = block_stamp_; }
    void clear_blocks() { ++block_stamp_; }

    /// Shortest path from `from` to `to` avoiding blocked vertices and the
    /// edges (from, x) for x in `banned_first_hops`.  Neighbors are expanded
    /// in adjacency order, so the result is deterministic.
    bool shortest(const Adjacency& adj, Vertex from, Vertex to,
                  std::span<const Vertex> banned_first_hops, VertexPath& out) {
        ++seen_stamp_;
        queue_.clear();
        queue_.push_back(from);
        seen_[from] = seen_stamp_;
        std::size_t head = 0;
        bool found = from == to;
        while (head < queue_.size() && !found) {
            Vertex u = queue_[head++];
            for (Vertex w : adj[u]) {
                if (seen_[w] == seen_stamp_ || blocked_[w] == block_stamp_) continue;
                if (u == from && std::find(banned_first_hops.begin(), banned_first_hops.end(), w) !=
                                     banned_first_hops.end())
                    continue;
                seen_[w] = seen_stamp_;
                parent_[w] = u;
                if (w == to) {
                    found = true;
                    break;
                }
                queue_.push_back(w);
            }
        }
        if (!found) return false;
        out.clear();
        for (Vertex v = to; v != from; v = parent_[v]) out.push_back(v);
        out.push_back(from);
        std::reverse(out.begin(), out.end());
        return true;
    }

private:
    std::vector<std::uint32_t> seen_;
    std::vector<std::uint32_t> blocked_;
    std::vector<Vertex> parent_;
    std::vector<Vertex> queue_;
    std::uint32_t seen_stamp_ = 0;
    std::uint32_t block_stamp_ = 1;
};

/// Loopless k shortest paths on an unweighted graph (Yen's deviation method).
/// Returned paths include both endpoints and are ordered by length, then
/// lexicographically.
inline std::vector<VertexPath> yen_k_shortest(const Adjacency& adj, Vertex source, Vertex target,
                                              std::size_t k, BfsWorkspace& ws) {
    std::vector<VertexPath> accepted;
    if (k == 0) return accepted;

    VertexPath first;
    ws.clear_blocks();
    if (!ws.shortest(adj, source, target, {}, first)) return accepted;
    accepted.push_back(std::move(first));

    auto shorter = [](const VertexPath& a, const VertexPath& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    };
    std::set<VertexPath, decltype(shorter)> candidates(shorter);

    VertexPath spur_path;
    std::vector<Vertex> banned;
    while (accepted.size() < k) {
        const VertexPath& last = accepted.back();
        for (std::size_t i = 0; i + 1 < last.size(); ++i) {
            Vertex spur = last[i];
            banned.clear();
            for (const auto& p : accepted) {
                if (p.size() > i + 1 && std::equal(p.begin(), p.begin() + i + 1, last.begin()))
                    banned.push_back(p[i + 1]);
            }
            ws.clear_blocks();
            for (std::size_t j = 0; j < i; ++j) ws.block(last[j]);
            if (!ws.shortest(adj, spur, target, banned, spur_path)) continue;

            VertexPath total(last.begin(), last.begin() + i);
            total.insert(total.end(), spur_path.begin(), spur_path.end());
            if (std::find(accepted.begin(), accepted.end(), total) == accepted.end())
                candidates.insert(std::move(total));
        }
        if (candidates.empty()) break;
        accepted.push_back(*candidates.begin());
        candidates.erase(candidates.begin());
    }
    return accepted;
}

} // namespace wise::graph
