#include "comove/report_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "comove/csv.hpp"

namespace comove {

namespace {

std::string join_members(const std::vector<std::string>& members) {
    std::string out;
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (i) out += ';';
        out += members[i];
    }
    return out;
}

nlohmann::json stats_json(const DistStats& s) {
    return {{"min", s.min},   {"q25", s.q25},   {"median", s.median}, {"q75", s.q75},
            {"mean", s.mean}, {"max", s.max},   {"count", s.count}};
}

nlohmann::json optional_stats_json(const std::optional<DistStats>& s) {
    if (!s) {
        return nullptr;
    }
    return stats_json(*s);
}

}  // namespace

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open output file: " + path);
    }
    out << content;
    if (!out) {
        throw std::runtime_error("write failure: " + path);
    }
}

void write_clusters_csv(const std::string& path, const std::vector<EvolvingCluster>& clusters) {
    std::ostringstream out;
    out << "members,t_start,t_end,tp\n";
    for (const auto& c : clusters) {
        out << join_members(c.members) << ',' << format_time(c.t_start) << ','
            << format_time(c.t_end) << ',' << c.tp << '\n';
    }
    write_text_file(path, out.str());
}

std::vector<EvolvingCluster> read_clusters_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open clusters file: " + path);
    }
    std::vector<EvolvingCluster> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string members, t_start, t_end, tp;
        if (!std::getline(ss, members, ',') || !std::getline(ss, t_start, ',') ||
            !std::getline(ss, t_end, ',') || !std::getline(ss, tp)) {
            if (first) {
                first = false;
                continue;
            }
            throw std::runtime_error("malformed cluster line: " + line);
        }
        first = false;
        EvolvingCluster c;
        try {
            c.t_start = std::stod(t_start);
            c.t_end = std::stod(t_end);
            c.tp = std::stoi(tp);
        } catch (const std::exception&) {
            continue;  // header or junk line
        }
        std::stringstream ms(members);
        std::string id;
        while (std::getline(ms, id, ';')) {
            if (!id.empty()) c.members.push_back(id);
        }
        std::sort(c.members.begin(), c.members.end());
        if (!c.members.empty() && (c.tp == 1 || c.tp == 2)) {
            out.push_back(std::move(c));
        }
    }
    return out;
}

void write_clusters_jsonl(const std::string& path, const std::vector<EvolvingCluster>& clusters) {
    std::ostringstream out;
    for (const auto& c : clusters) {
        nlohmann::json j{{"members", c.members},
                         {"t_start", c.t_start},
                         {"t_end", c.t_end},
                         {"tp", c.tp}};
        out << j.dump() << '\n';
    }
    write_text_file(path, out.str());
}

void write_matches_csv(const std::string& path, const MatchReport& report) {
    std::ostringstream out;
    out << "pred_members,pred_start,pred_end,act_members,act_start,act_end,"
           "sim_spatial,sim_temp,sim_member,sim_star\n";
    char num[64];
    auto sim = [&](double v) {
        std::snprintf(num, sizeof num, "%.9f", v);
        return std::string(num);
    };
    for (const auto& p : report.pairs) {
        out << join_members(p.pred.members) << ',' << format_time(p.pred.t_start) << ','
            << format_time(p.pred.t_end) << ',' << join_members(p.act.members) << ','
            << format_time(p.act.t_start) << ',' << format_time(p.act.t_end) << ','
            << sim(p.sim.spatial) << ',' << sim(p.sim.temporal) << ',' << sim(p.sim.member) << ','
            << sim(p.sim.overall) << '\n';
    }
    for (const auto& u : report.unmatched_predicted) {
        out << join_members(u.members) << ',' << format_time(u.t_start) << ','
            << format_time(u.t_end) << ",,,,,,,\n";
    }
    write_text_file(path, out.str());
}

std::string match_summary_json(const MatchSummary& summary) {
    nlohmann::json j;
    j["sim_spatial"] = optional_stats_json(summary.spatial);
    j["sim_temp"] = optional_stats_json(summary.temporal);
    j["sim_member"] = optional_stats_json(summary.member);
    j["sim_star"] = optional_stats_json(summary.overall);
    return j.dump(2);
}

std::string metrics_json(const PipelineMetrics& metrics, const MatchSummary& summary) {
    nlohmann::json j;
    j["records_produced"] = metrics.produced;
    j["malformed_lines"] = metrics.malformed;
    j["wall_seconds"] = metrics.wall_seconds;
    for (const auto& c : metrics.consumers) {
        nlohmann::json cj;
        cj["records"] = c.records;
        cj["wall_seconds"] = c.wall_seconds;
        cj["consumption_rate_overall"] = c.overall_rate;
        cj["record_lag"] = stats_json(c.record_lag);
        cj["record_lag_final"] = c.final_lag;
        cj["consumption_rate_windows"] = stats_json(c.rate_windows);
        j["consumers"][c.name] = cj;
    }
    j["match_summary"] = nlohmann::json::parse(match_summary_json(summary));
    return j.dump(2);
}

std::string clusters_geojson(const std::vector<EvolvingCluster>& clusters,
                             const PositionStore& store, double grid_step_s) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& c : clusters) {
        Mbr box;
        try {
            box = cluster_mbr(c, store, grid_step_s);
        } catch (const std::runtime_error&) {
            continue;  // positions unavailable, skip the feature
        }
        nlohmann::json feature;
        feature["type"] = "Feature";
        feature["properties"] = {{"members", join_members(c.members)},
                                 {"t_start", c.t_start},
                                 {"t_end", c.t_end},
                                 {"tp", c.tp}};
        feature["geometry"] = {
            {"type", "Polygon"},
            {"coordinates",
             {{{box.lon_min, box.lat_min},
               {box.lon_max, box.lat_min},
               {box.lon_max, box.lat_max},
               {box.lon_min, box.lat_max},
               {box.lon_min, box.lat_min}}}}};
        features.push_back(feature);
    }
    nlohmann::json j{{"type", "FeatureCollection"}, {"features", features}};
    return j.dump(2);
}

}  // namespace comove
