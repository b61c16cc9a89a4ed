#include "mixagent/core/serialize.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace mixagent::core {

using nlohmann::json;

json space_to_json(const DomainSpace& space) {
    json domains = json::array();
    for (const auto& d : space.domains())
        domains.push_back({{"name", d.name}, {"field", d.field == Field::Source ? "source" : "target"}});
    return {{"version", 1}, {"domains", domains}};
}

DomainSpace space_from_json(const json& j) {
    if (!j.contains("version") || j.at("version").get<int>() != 1) throw SpecInvalid("unsupported domain space version");
    std::vector<Domain> domains;
    for (const auto& d : j.at("domains")) {
        const std::string f = d.at("field").get<std::string>();
        if (f != "source" && f != "target") throw SpecInvalid("unknown field tag: " + f);
        domains.push_back({d.at("name").get<std::string>(), f == "source" ? Field::Source : Field::Target});
    }
    return DomainSpace(std::move(domains));
}

json distribution_to_json(const MixtureDistribution& d) { return json(d.weights()); }

MixtureDistribution distribution_from_json(const json& j) {
    const auto w = j.get<std::vector<double>>();
    return validate_distribution(w, w.size());
}

std::string trajectory_to_line(const TrajectoryRecord& t) {
    t.check_feedback_shape();
    json j{{"seed", t.provenance.seed},
           {"tier", t.provenance.tier_k},
           {"config_hash", t.provenance.config_hash},
           {"start", distribution_to_json(t.start)}};
    json actions = json::array();
    for (const auto& a : t.actions) actions.push_back(distribution_to_json(a));
    j["actions"] = actions;
    if (t.has_feedback()) {
        json fb = json::array();
        for (const auto& f : t.feedback) fb.push_back(json{{"scores", f.scores}, {"standardized", f.standardized}});
        j["feedback"] = fb;
    }
    return j.dump();
}

TrajectoryRecord trajectory_from_line(const std::string& line, std::size_t dimension) {
    const json j = json::parse(line);
    auto load_dist = [&](const json& v) {
        const auto w = v.get<std::vector<double>>();
        return validate_distribution(w, dimension);
    };
    TrajectoryRecord t{load_dist(j.at("start")), {}, {}, {}};
    t.provenance.seed = j.at("seed").get<std::uint64_t>();
    t.provenance.tier_k = j.at("tier").get<int>();
    t.provenance.config_hash = j.value("config_hash", "");
    for (const auto& a : j.at("actions")) t.actions.push_back(load_dist(a));
    if (j.contains("feedback"))
        for (const auto& f : j.at("feedback"))
            t.feedback.emplace_back(f.at("scores").get<std::vector<double>>(), f.at("standardized").get<bool>());
    t.check_feedback_shape();
    return t;
}

void write_trajectories(const std::string& path, const std::vector<TrajectoryRecord>& ts) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    for (const auto& t : ts) out << trajectory_to_line(t) << '\n';
}

std::vector<TrajectoryRecord> read_trajectories(const std::string& path, std::size_t dimension) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path);
    std::vector<TrajectoryRecord> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(trajectory_from_line(line, dimension));
    return out;
}

}  // namespace mixagent::core
