#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "comove/geo.hpp"

namespace comove {

struct LonLat {
    double lon = 0.0;
    double lat = 0.0;

    friend bool operator==(const LonLat&, const LonLat&) = default;
};

// Snapshot of object positions at one aligned grid timestamp.
struct TimeSlice {
    double t = 0.0;
    std::map<std::string, LonLat> positions;  // at most one position per object
};

enum class ClusterKind { MC = 1, MCS = 2 };

enum class DetectionMode { MC, MCS, Both };

struct DetectionParams {
    int c = 3;                // minimum cardinality
    double theta_m = 1500.0;  // proximity threshold, meters
    int d = 3;                // minimum duration, consecutive timeslices
    DetectionMode mode = DetectionMode::Both;
    double grid_step_s = 60.0;           // timeslice spacing
    std::size_t max_cliques = 1000000;   // enumeration guard per timeslice
    bool progressive = false;            // also report patterns when they first reach d

    void validate() const;  // throws std::invalid_argument
};

// Pattern tuple <members, t_start, t_end, tp>; members sorted by id.
struct EvolvingCluster {
    std::vector<std::string> members;
    double t_start = 0.0;
    double t_end = 0.0;
    int tp = 2;  // 1 = MC, 2 = MCS

    friend bool operator==(const EvolvingCluster&, const EvolvingCluster&) = default;
};

bool cluster_order(const EvolvingCluster& a, const EvolvingCluster& b);

// Small undirected graph over 0..n-1 with an adjacency-list view.
struct Graph {
    int n = 0;
    std::vector<std::vector<int>> adj;

    explicit Graph(int vertices = 0) : n(vertices), adj(static_cast<std::size_t>(vertices)) {}
    void add_edge(int u, int v);
    bool has_edge(int u, int v) const;
};

// Vertices sorted by object id; ids_out receives the vertex -> id mapping.
Graph build_proximity_graph(const TimeSlice& ts, double theta_m,
                            std::vector<std::string>* ids_out = nullptr);

struct GroupExtraction {
    std::vector<std::vector<int>> cliques;     // maximal cliques, |V| >= c
    std::vector<std::vector<int>> components;  // connected components, |V| >= c
};

// Bron-Kerbosch with pivoting over a degeneracy order for the cliques,
// BFS for the components. Every returned set is sorted; throws
// std::runtime_error when the clique count exceeds max_cliques.
GroupExtraction maximal_components(const Graph& g, int c, std::size_t max_cliques = 1000000);

// Online detector. Feed one TimeSlice per grid step in increasing time
// order; emitted clusters appear when a pattern ends (or via flush).
//
// Maintenance per kind: a member set is an active pattern while it stays a
// current group (maximal clique for MC; connected component or maximal
// clique, both being connected sets, for MCS). A new group's start time is
// recovered by scanning history back while the set stays valid (pairwise
// within theta for MC, connected for MCS), so sets that only become maximal
// later inherit their true start. An active pattern whose set stays valid
// but stops being a group is absorbed by the covering group and reported
// with its full extent; an invalid one is reported up to its last slice.
// Reported clusters therefore hold their validity condition on every
// slice of their lifetime.
class ClusterDetector {
  public:
    explicit ClusterDetector(DetectionParams params);

    // Throws std::invalid_argument("non-monotonic time") when ts.t does not
    // advance, and std::invalid_argument when ts.t is off-grid. A skipped
    // grid step is treated as an empty timeslice.
    std::vector<EvolvingCluster> step(const TimeSlice& ts);

    // Emit still-active patterns meeting the duration gate. Idempotent.
    std::vector<EvolvingCluster> flush();

    // Provisional reports collected in progressive mode (duration first
    // reaching d); cleared on read.
    std::vector<EvolvingCluster> take_provisional();

    const DetectionParams& params() const { return params_; }

  private:
    struct SliceRec {
        double t = 0.0;
        std::vector<int> vertices;           // present objects, ascending global index
        std::vector<std::uint64_t> adj_bits;  // row-major local adjacency matrix
        int local(int global) const;
        bool adjacent_local(int lu, int lv) const;
    };

    struct PatternMeta {
        std::size_t birth_k = 0;
        std::size_t last_k = 0;
    };

    using PatternMap = std::map<std::vector<int>, PatternMeta>;

    int intern(const std::string& id);
    SliceRec make_slice(const TimeSlice& ts) const;
    bool valid_set(const std::vector<int>& members, const SliceRec& slice, ClusterKind kind) const;
    std::size_t scan_back(const std::vector<int>& members, std::size_t k, ClusterKind kind) const;
    void step_one(const SliceRec& slice, std::vector<EvolvingCluster>& out);
    void advance_kind(ClusterKind kind, const std::vector<std::vector<int>>& groups, std::size_t k,
                      std::vector<EvolvingCluster>& out);
    EvolvingCluster to_cluster(const std::vector<int>& members, std::size_t birth_k,
                               std::size_t end_k, ClusterKind kind) const;
    void emit_if_durable(const std::vector<int>& members, std::size_t birth_k, std::size_t end_k,
                         ClusterKind kind, std::vector<EvolvingCluster>& out);

    DetectionParams params_;
    std::unordered_map<std::string, int> id_index_;
    std::vector<std::string> ids_;
    std::vector<SliceRec> history_;
    PatternMap active_mc_;
    PatternMap active_mcs_;
    std::vector<EvolvingCluster> provisional_;
    bool have_prev_ = false;
    double prev_t_ = 0.0;
};

// Whole-batch convenience: step every slice in order, then flush.
std::vector<EvolvingCluster> detect_batch(const std::vector<TimeSlice>& slices,
                                          const DetectionParams& params);

}  // namespace comove
