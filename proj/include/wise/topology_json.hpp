#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "wise/swarm.hpp"

namespace wise {

/// {n, links, categories: [{name, clusters}], t_max, degree, attachment}
inline nlohmann::json topology_to_json(const SwarmGraph& swarm) {
    nlohmann::json j;
    j["n"] = swarm.size();
    auto& links = j["links"] = nlohmann::json::array();
    for (auto [a, b] : swarm.links()) links.push_back({a, b});
    auto& cats = j["categories"] = nlohmann::json::array();
    for (const auto& c : swarm.scheme().categories) cats.push_back({{"name", c.name}, {"clusters", c.clusters}});
    std::vector<Minutes> t_max;
    std::vector<int> degree;
    for (const auto& r : swarm.records()) {
        t_max.push_back(r.t_max);
        degree.push_back(r.degree);
    }
    j["t_max"] = t_max;
    j["degree"] = degree;
    j["attachment"] = swarm.attachment();
    return j;
}

inline SwarmGraph topology_from_json(const nlohmann::json& j, std::size_t m_paths = 3) {
    SwarmGraph::Spec spec;
    try {
        spec.n = j.at("n").get<std::size_t>();
        for (const auto& l : j.at("links")) spec.links.emplace_back(l.at(0).get<DeviceId>(), l.at(1).get<DeviceId>());
        for (const auto& c : j.at("categories")) {
            Category cat;
            cat.name = c.at("name").get<std::string>();
            cat.clusters = c.at("clusters").get<std::vector<std::vector<DeviceId>>>();
            spec.scheme.categories.push_back(std::move(cat));
        }
        spec.t_max = j.at("t_max").get<std::vector<Minutes>>();
        spec.degree = j.at("degree").get<std::vector<int>>();
        if (j.contains("attachment"))
            spec.attachment = j.at("attachment").get<std::vector<DeviceId>>();
        else if (spec.n > 0)
            spec.attachment = {0};
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("malformed topology document: ") + e.what());
    }
    spec.m_paths = m_paths;
    return SwarmGraph(std::move(spec));
}

inline void save_topology(const SwarmGraph& swarm, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw error("cannot write " + path);
    out << topology_to_json(swarm).dump() << '\n';
}

inline SwarmGraph load_topology(const std::string& path, std::size_t m_paths = 3) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("malformed topology document: ") + e.what());
    }
    return topology_from_json(j, m_paths);
}

} // namespace wise
