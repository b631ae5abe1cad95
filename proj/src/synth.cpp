#include "comove/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "comove/pipeline.hpp"

namespace comove {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLaneStepDeg = 0.3;     // corridor spacing between groups
constexpr double kAnchorStepDeg = 0.05;  // spacing between solo anchors

struct SynthRng {
    std::uint64_t state;

    explicit SynthRng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double normal() {  // Box-Muller, one value per call
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }
};

double meters_to_lat_deg(double m) { return m / kMetersPerDegree; }

double meters_to_lon_deg(double m, double at_lat_deg) {
    return m / (kMetersPerDegree * std::cos(at_lat_deg * kPi / 180.0));
}

struct ObjectPlan {
    std::string id;
    int group = -1;              // index into scenario.groups, -1 for solo objects
    double offset_east_m = 0.0;  // fixed offset from the group centroid
    double offset_north_m = 0.0;
    double anchor_lon = 0.0;  // staging / solo anchor
    double anchor_lat = 0.0;
};

}  // namespace

void SynthScenario::validate() const {
    std::vector<std::string> violations;
    if (n_objects < 1) violations.push_back("n_objects must be >= 1");
    if (!(duration_s > 0.0)) violations.push_back("duration must be positive");
    if (!(sample_rate_s > 0.0)) violations.push_back("sample_rate must be positive");
    if (!(theta_ref_m > 0.0)) violations.push_back("theta_ref must be positive");
    if (noise_sigma_m < 0.0) violations.push_back("noise_sigma must be non-negative");
    if (!(speed_ms > 0.0)) violations.push_back("speed must be positive");
    int total_members = 0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const auto& g = groups[i];
        const std::string tag = "group " + std::to_string(i) + ": ";
        if (g.members < 2) violations.push_back(tag + "needs at least two members");
        if (!(g.radius_m > 0.0)) violations.push_back(tag + "radius must be positive");
        if (g.radius_m >= theta_ref_m / 2.0) {
            violations.push_back(tag + "radius must stay below theta_ref/2 for detectability");
        }
        if (g.t_start < 0.0 || g.t_end > duration_s || !(g.t_start < g.t_end)) {
            violations.push_back(tag + "window must satisfy 0 <= t_start < t_end <= duration");
        }
        total_members += g.members;
    }
    if (total_members > n_objects) {
        violations.push_back("group members (" + std::to_string(total_members) +
                             ") exceed n_objects (" + std::to_string(n_objects) + ")");
    }
    if (!violations.empty()) {
        std::string msg = "invalid scenario:";
        for (const auto& v : violations) msg += "\n  - " + v;
        throw std::invalid_argument(msg);
    }
}

SynthResult generate(const SynthScenario& sc) {
    sc.validate();
    SynthRng rng(sc.rng_seed);

    std::vector<ObjectPlan> plans;
    plans.reserve(static_cast<std::size_t>(sc.n_objects));
    auto object_id = [&](int i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "obj%03d", i);
        return std::string(buf);
    };

    int next_object = 0;
    for (std::size_t gi = 0; gi < sc.groups.size(); ++gi) {
        const auto& g = sc.groups[gi];
        for (int m = 0; m < g.members; ++m, ++next_object) {
            ObjectPlan plan;
            plan.id = object_id(next_object);
            plan.group = static_cast<int>(gi);
            const double r = std::sqrt(rng.uniform()) * g.radius_m * 0.9;
            const double a = rng.uniform() * 2.0 * kPi;
            plan.offset_east_m = r * std::cos(a);
            plan.offset_north_m = r * std::sin(a);
            // Staging between corridors, pairwise well apart.
            plan.anchor_lat =
                sc.ref_lat + (static_cast<double>(gi) + 1.0) * kLaneStepDeg - kLaneStepDeg / 2.0;
            plan.anchor_lon = sc.ref_lon + next_object * kAnchorStepDeg;
            plans.push_back(plan);
        }
    }
    for (; next_object < sc.n_objects; ++next_object) {
        ObjectPlan plan;
        plan.id = object_id(next_object);
        plan.anchor_lat = sc.ref_lat - 1.0 - (next_object % 40) * kAnchorStepDeg;
        plan.anchor_lon = sc.ref_lon + (next_object / 40) * kAnchorStepDeg * 20.0;
        plans.push_back(plan);
    }

    const auto n_steps = static_cast<std::size_t>(std::floor(sc.duration_s / sc.sample_rate_s));

    // Centroid tracks per group, then member offsets on top.
    std::vector<std::vector<std::pair<double, double>>> centroid;  // [group][step] lon/lat
    centroid.resize(sc.groups.size());
    for (std::size_t gi = 0; gi < sc.groups.size(); ++gi) {
        const auto& g = sc.groups[gi];
        const double lane_lat = sc.ref_lat + (static_cast<double>(gi) + 1.0) * kLaneStepDeg;
        auto& track = centroid[gi];
        track.reserve(n_steps + 1);
        double lon = sc.ref_lon;
        double lat = lane_lat;
        double heading = 0.0;  // east
        for (std::size_t k = 0; k <= n_steps; ++k) {
            track.emplace_back(lon, lat);
            const double step_m = sc.speed_ms * sc.sample_rate_s;
            switch (g.motion) {
                case MotionModel::Linear:
                    lon += meters_to_lon_deg(step_m, lat);
                    break;
                case MotionModel::Arc: {
                    const double radius = 20000.0;
                    heading += step_m / radius;
                    lon += meters_to_lon_deg(step_m * std::cos(heading), lat);
                    lat += meters_to_lat_deg(step_m * std::sin(heading));
                    break;
                }
                case MotionModel::RandomWalk: {
                    // Mostly-eastward walk keeps corridors separated.
                    const double jink = (rng.uniform() - 0.5) * kPi / 2.0;
                    lon += meters_to_lon_deg(step_m * std::cos(jink), lat);
                    lat += meters_to_lat_deg(step_m * std::sin(jink));
                    break;
                }
            }
        }
    }

    SynthResult out;
    out.records.reserve((n_steps + 1) * plans.size());
    for (const auto& plan : plans) {
        double walk_lon = plan.anchor_lon;
        double walk_lat = plan.anchor_lat;
        for (std::size_t k = 0; k <= n_steps; ++k) {
            const double t = static_cast<double>(k) * sc.sample_rate_s;
            double lon, lat;
            bool in_formation = false;
            if (plan.group >= 0) {
                const auto& g = sc.groups[static_cast<std::size_t>(plan.group)];
                in_formation = t >= g.t_start && t <= g.t_end;
            }
            if (in_formation) {
                const auto& c = centroid[static_cast<std::size_t>(plan.group)][k];
                lon = c.first + meters_to_lon_deg(plan.offset_east_m, c.second);
                lat = c.second + meters_to_lat_deg(plan.offset_north_m);
            } else if (plan.group >= 0) {
                lon = plan.anchor_lon;
                lat = plan.anchor_lat;
            } else {
                const double step = 30.0;  // slow solo wander
                walk_lon += meters_to_lon_deg(step * (rng.uniform() - 0.5), walk_lat);
                walk_lat += meters_to_lat_deg(step * (rng.uniform() - 0.5));
                lon = walk_lon;
                lat = walk_lat;
            }
            if (sc.noise_sigma_m > 0.0) {
                lon += meters_to_lon_deg(rng.normal() * sc.noise_sigma_m, lat);
                lat += meters_to_lat_deg(rng.normal() * sc.noise_sigma_m);
            }
            out.records.push_back(TimestampedPoint{plan.id, lon, lat, t});
        }
    }
    sort_records(out.records);

    for (std::size_t gi = 0; gi < sc.groups.size(); ++gi) {
        const auto& g = sc.groups[gi];
        EvolvingCluster c;
        for (const auto& plan : plans) {
            if (plan.group == static_cast<int>(gi)) {
                c.members.push_back(plan.id);
            }
        }
        std::sort(c.members.begin(), c.members.end());
        c.t_start = std::ceil(g.t_start / sc.sample_rate_s) * sc.sample_rate_s;
        c.t_end = std::floor(g.t_end / sc.sample_rate_s) * sc.sample_rate_s;
        c.tp = 2;
        out.truth.push_back(std::move(c));
    }
    return out;
}

namespace {

const char* motion_name(MotionModel m) {
    switch (m) {
        case MotionModel::Linear:
            return "linear";
        case MotionModel::Arc:
            return "arc";
        case MotionModel::RandomWalk:
            return "random-walk";
    }
    return "linear";
}

MotionModel motion_from(const std::string& s) {
    if (s == "linear") return MotionModel::Linear;
    if (s == "arc") return MotionModel::Arc;
    if (s == "random-walk" || s == "random_walk") return MotionModel::RandomWalk;
    throw std::invalid_argument("unknown motion model: " + s);
}

}  // namespace

std::string scenario_to_json(const SynthScenario& s) {
    nlohmann::json j;
    j["n_objects"] = s.n_objects;
    j["duration_s"] = s.duration_s;
    j["sample_rate_s"] = s.sample_rate_s;
    j["noise_sigma_m"] = s.noise_sigma_m;
    j["rng_seed"] = s.rng_seed;
    j["theta_ref_m"] = s.theta_ref_m;
    j["ref_lon"] = s.ref_lon;
    j["ref_lat"] = s.ref_lat;
    j["speed_ms"] = s.speed_ms;
    j["groups"] = nlohmann::json::array();
    for (const auto& g : s.groups) {
        j["groups"].push_back({{"members", g.members},
                               {"radius_m", g.radius_m},
                               {"t_start", g.t_start},
                               {"t_end", g.t_end},
                               {"motion", motion_name(g.motion)}});
    }
    return j.dump(2);
}

SynthScenario scenario_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("scenario is not valid JSON: ") + e.what());
    }
    SynthScenario s;
    s.n_objects = j.value("n_objects", s.n_objects);
    s.duration_s = j.value("duration_s", s.duration_s);
    s.sample_rate_s = j.value("sample_rate_s", s.sample_rate_s);
    s.noise_sigma_m = j.value("noise_sigma_m", s.noise_sigma_m);
    s.rng_seed = j.value("rng_seed", s.rng_seed);
    s.theta_ref_m = j.value("theta_ref_m", s.theta_ref_m);
    s.ref_lon = j.value("ref_lon", s.ref_lon);
    s.ref_lat = j.value("ref_lat", s.ref_lat);
    s.speed_ms = j.value("speed_ms", s.speed_ms);
    if (j.contains("groups")) {
        for (const auto& gj : j["groups"]) {
            GroupSpec g;
            g.members = gj.value("members", g.members);
            g.radius_m = gj.value("radius_m", g.radius_m);
            g.t_start = gj.value("t_start", g.t_start);
            g.t_end = gj.value("t_end", g.t_end);
            g.motion = motion_from(gj.value("motion", std::string("linear")));
            s.groups.push_back(g);
        }
    }
    return s;
}

}  // namespace comove
