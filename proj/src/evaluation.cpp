#include "comove/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "comove/csv.hpp"

namespace comove {

void SimWeights::validate() const {
    auto in_open_unit = [](double v) { return v > 0.0 && v < 1.0; };
    if (!in_open_unit(lambda1) || !in_open_unit(lambda2) || !in_open_unit(lambda3)) {
        throw std::invalid_argument("similarity weights must lie in (0, 1)");
    }
    if (std::abs(lambda1 + lambda2 + lambda3 - 1.0) > 1e-9) {
        throw std::invalid_argument("similarity weights must sum to 1 (tolerance 1e-9)");
    }
}

void PositionStore::add(double t, const std::string& id, LonLat pos) {
    slices_[t][id] = pos;
}

void PositionStore::add_slice(const TimeSlice& ts) {
    auto& bucket = slices_[ts.t];
    for (const auto& [id, pos] : ts.positions) {
        bucket[id] = pos;
    }
}

std::optional<LonLat> PositionStore::find(double t, const std::string& id) const {
    auto it = slices_.find(t);
    if (it == slices_.end()) {
        return std::nullopt;
    }
    auto jt = it->second.find(id);
    if (jt == it->second.end()) {
        return std::nullopt;
    }
    return jt->second;
}

std::vector<double> PositionStore::times_in(double t_start, double t_end) const {
    std::vector<double> out;
    for (auto it = slices_.lower_bound(t_start); it != slices_.end() && it->first <= t_end; ++it) {
        out.push_back(it->first);
    }
    return out;
}

Mbr cluster_mbr(const EvolvingCluster& c, const PositionStore& store, double grid_step_s) {
    MbrBuilder box;
    const double half_step = grid_step_s / 2.0;
    for (double t = c.t_start; t <= c.t_end + half_step; t += grid_step_s) {
        for (const auto& id : c.members) {
            const auto pos = store.find(t, id);
            if (!pos) {
                throw std::runtime_error("missing position for object " + id + " at t=" +
                                         format_time(t));
            }
            box.add(pos->lon, pos->lat);
        }
    }
    return box.build();
}

double sim_spatial(const EvolvingCluster& pred, const PositionStore& pred_store,
                   const EvolvingCluster& act, const PositionStore& act_store,
                   double grid_step_s) {
    return mbr_iou(cluster_mbr(pred, pred_store, grid_step_s),
                   cluster_mbr(act, act_store, grid_step_s));
}

namespace {

Mbr slice_mbr(const EvolvingCluster& c, const PositionStore& store, double t) {
    MbrBuilder box;
    for (const auto& id : c.members) {
        const auto pos = store.find(t, id);
        if (!pos) {
            throw std::runtime_error("missing position for object " + id + " at t=" +
                                     format_time(t));
        }
        box.add(pos->lon, pos->lat);
    }
    return box.build();
}

}  // namespace

double sim_spatial_per_slice(const EvolvingCluster& pred, const PositionStore& pred_store,
                             const EvolvingCluster& act, const PositionStore& act_store,
                             double grid_step_s) {
    const double lo = std::max(pred.t_start, act.t_start);
    const double hi = std::min(pred.t_end, act.t_end);
    if (lo > hi) {
        return 0.0;
    }
    double acc = 0.0;
    std::size_t n = 0;
    for (double t = lo; t <= hi + grid_step_s / 2.0; t += grid_step_s) {
        acc += mbr_iou(slice_mbr(pred, pred_store, t), slice_mbr(act, act_store, t));
        ++n;
    }
    return acc / static_cast<double>(n);
}

double sim_temporal(const EvolvingCluster& pred, const EvolvingCluster& act) {
    return interval_iou(TimeInterval{pred.t_start, pred.t_end},
                        TimeInterval{act.t_start, act.t_end});
}

double sim_member(const EvolvingCluster& pred, const EvolvingCluster& act) {
    // Member lists are sorted; set algebra by merge.
    std::size_t inter = 0;
    std::size_t i = 0, j = 0;
    while (i < pred.members.size() && j < act.members.size()) {
        const int cmp = pred.members[i].compare(act.members[j]);
        if (cmp == 0) {
            ++inter;
            ++i;
            ++j;
        } else if (cmp < 0) {
            ++i;
        } else {
            ++j;
        }
    }
    const std::size_t uni = pred.members.size() + act.members.size() - inter;
    if (uni == 0) {
        throw std::invalid_argument("similarity of empty member sets");
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double sim_overall(const SimBreakdown& parts, const SimWeights& w) {
    w.validate();
    if (!(parts.temporal > 0.0)) {
        return 0.0;
    }
    // Dividing by the weight sum (1 by the constraint) keeps identical
    // clusters at exactly 1.0 even when the weights round, e.g. 1/3 each.
    return (w.lambda1 * parts.spatial + w.lambda2 * parts.temporal + w.lambda3 * parts.member) /
           (w.lambda1 + w.lambda2 + w.lambda3);
}

SimBreakdown similarity(const EvolvingCluster& pred, const PositionStore& pred_store,
                        const EvolvingCluster& act, const PositionStore& act_store,
                        const SimWeights& w, double grid_step_s, SpatialMode spatial) {
    SimBreakdown s;
    s.temporal = sim_temporal(pred, act);
    s.member = sim_member(pred, act);
    // The gate makes spatial overlap irrelevant for temporally disjoint
    // clusters, so position lookups are skipped there.
    if (s.temporal > 0.0) {
        s.spatial = spatial == SpatialMode::Lifetime
                        ? sim_spatial(pred, pred_store, act, act_store, grid_step_s)
                        : sim_spatial_per_slice(pred, pred_store, act, act_store, grid_step_s);
    }
    s.overall = sim_overall(s, w);
    return s;
}

MatchReport cluster_matching(const std::vector<EvolvingCluster>& predicted,
                             const std::vector<EvolvingCluster>& actual, const SimWeights& w,
                             const PositionStore& pred_store, const PositionStore& act_store,
                             double grid_step_s, SpatialMode spatial) {
    w.validate();
    MatchReport report;
    for (const auto& pred : predicted) {
        const EvolvingCluster* best = nullptr;
        SimBreakdown best_sim;
        for (const auto& act : actual) {
            if (act.tp != pred.tp) {
                continue;  // kinds are compared within their own partition
            }
            const SimBreakdown s =
                similarity(pred, pred_store, act, act_store, w, grid_step_s, spatial);
            bool better = false;
            if (!best || s.overall > best_sim.overall) {
                better = true;
            } else if (s.overall == best_sim.overall) {
                if (act.t_start < best->t_start ||
                    (act.t_start == best->t_start && act.members < best->members)) {
                    better = true;
                }
            }
            if (better) {
                best = &act;
                best_sim = s;
            }
        }
        if (best && best_sim.overall > 0.0) {
            report.pairs.push_back(MatchedPair{pred, *best, best_sim});
        } else {
            report.unmatched_predicted.push_back(pred);
        }
    }
    return report;
}

MatchSummary summarize(const MatchReport& report) {
    MatchSummary s;
    if (report.pairs.empty()) {
        return s;  // explicit empty marker: all stats absent
    }
    std::vector<double> sp, tm, mb, ov;
    for (const auto& p : report.pairs) {
        sp.push_back(p.sim.spatial);
        tm.push_back(p.sim.temporal);
        mb.push_back(p.sim.member);
        ov.push_back(p.sim.overall);
    }
    s.spatial = order_stats(sp);
    s.temporal = order_stats(tm);
    s.member = order_stats(mb);
    s.overall = order_stats(ov);
    return s;
}

}  // namespace comove
