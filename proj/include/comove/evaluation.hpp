#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "comove/evolving_clusters.hpp"
#include "comove/geo.hpp"
#include "comove/stats.hpp"

namespace comove {

struct SimWeights {
    double lambda1 = 1.0 / 3.0;
    double lambda2 = 1.0 / 3.0;
    double lambda3 = 1.0 / 3.0;

    // Each weight in (0,1), sum 1 within 1e-9; throws std::invalid_argument.
    void validate() const;
};

// Object positions per aligned timestamp, one store per stream (predicted
// clusters are measured against predicted positions, actual against actual).
class PositionStore {
  public:
    void add(double t, const std::string& id, LonLat pos);
    void add_slice(const TimeSlice& ts);
    std::optional<LonLat> find(double t, const std::string& id) const;
    std::vector<double> times_in(double t_start, double t_end) const;
    bool empty() const { return slices_.empty(); }

  private:
    std::map<double, std::unordered_map<std::string, LonLat>> slices_;
};

// Bounding box over all member positions across the cluster's lifetime grid.
// Throws std::runtime_error identifying the object and timestamp when a
// position is missing.
Mbr cluster_mbr(const EvolvingCluster& c, const PositionStore& store, double grid_step_s);

double sim_spatial(const EvolvingCluster& pred, const PositionStore& pred_store,
                   const EvolvingCluster& act, const PositionStore& act_store,
                   double grid_step_s);

// Alternative spatial measure, off by default: per-timeslice box IoU averaged
// over the shared lifetime (0 when the lifetimes do not overlap).
double sim_spatial_per_slice(const EvolvingCluster& pred, const PositionStore& pred_store,
                             const EvolvingCluster& act, const PositionStore& act_store,
                             double grid_step_s);

double sim_temporal(const EvolvingCluster& pred, const EvolvingCluster& act);
double sim_member(const EvolvingCluster& pred, const EvolvingCluster& act);

enum class SpatialMode { Lifetime, PerSlice };

struct SimBreakdown {
    double spatial = 0.0;
    double temporal = 0.0;
    double member = 0.0;
    double overall = 0.0;
};

// Sim* = l1*spatial + l2*temporal + l3*member when temporal > 0, else 0.
double sim_overall(const SimBreakdown& parts, const SimWeights& w);

SimBreakdown similarity(const EvolvingCluster& pred, const PositionStore& pred_store,
                        const EvolvingCluster& act, const PositionStore& act_store,
                        const SimWeights& w, double grid_step_s,
                        SpatialMode spatial = SpatialMode::Lifetime);

struct MatchedPair {
    EvolvingCluster pred;
    EvolvingCluster act;
    SimBreakdown sim;
};

struct MatchReport {
    std::vector<MatchedPair> pairs;
    std::vector<EvolvingCluster> unmatched_predicted;  // best Sim* was 0
};

// Greedy per-predicted-cluster matching: the actual cluster of the same kind
// maximising Sim* wins; ties break on earlier actual t_start, then on the
// lexicographically smaller member set. Actual clusters may be matched by
// several predicted clusters.
MatchReport cluster_matching(const std::vector<EvolvingCluster>& predicted,
                             const std::vector<EvolvingCluster>& actual, const SimWeights& w,
                             const PositionStore& pred_store, const PositionStore& act_store,
                             double grid_step_s, SpatialMode spatial = SpatialMode::Lifetime);

struct MatchSummary {
    std::optional<DistStats> spatial;
    std::optional<DistStats> temporal;
    std::optional<DistStats> member;
    std::optional<DistStats> overall;
};

MatchSummary summarize(const MatchReport& report);

}  // namespace comove
