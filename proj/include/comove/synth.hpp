#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "comove/evolving_clusters.hpp"
#include "comove/geo.hpp"

namespace comove {

enum class MotionModel { Linear, Arc, RandomWalk };

struct GroupSpec {
    int members = 3;
    double radius_m = 400.0;  // formation radius around the centroid
    double t_start = 0.0;
    double t_end = 0.0;
    MotionModel motion = MotionModel::Linear;
};

struct SynthScenario {
    int n_objects = 10;
    double duration_s = 7200.0;
    double sample_rate_s = 60.0;
    std::vector<GroupSpec> groups;
    double noise_sigma_m = 0.0;  // isotropic jitter on every emitted position
    std::uint64_t rng_seed = 1;
    double theta_ref_m = 1500.0;  // detectability reference: radius < theta/2
    double ref_lon = 24.0;
    double ref_lat = 37.8;
    double speed_ms = 8.0;  // centroid speed

    // Throws std::invalid_argument listing every violation.
    void validate() const;
};

struct SynthResult {
    std::vector<TimestampedPoint> records;  // sorted by (t, object_id)
    std::vector<EvolvingCluster> truth;     // scripted groups, tp = 2
};

// Deterministic under rng_seed: identical scenario, identical bytes.
// Group corridors and staging anchors are laid out pairwise farther apart
// than theta_ref so only scripted formations can cluster.
SynthResult generate(const SynthScenario& scenario);

std::string scenario_to_json(const SynthScenario& s);
SynthScenario scenario_from_json(const std::string& text);

}  // namespace comove
