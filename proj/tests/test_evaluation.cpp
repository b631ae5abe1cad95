#include <doctest.h>

#include <algorithm>
#include <random>
#include <stdexcept>

#include "comove/evaluation.hpp"
#include "walkthrough_fixture.hpp"

using namespace comove;

namespace {

EvolvingCluster cluster(std::vector<std::string> members, double t_start, double t_end,
                        int tp = 2) {
    EvolvingCluster c;
    c.members = std::move(members);
    std::sort(c.members.begin(), c.members.end());
    c.t_start = t_start;
    c.t_end = t_end;
    c.tp = tp;
    return c;
}

// Constant member positions over the grid [t_start, t_end].
void fill_constant(PositionStore& store, const EvolvingCluster& c,
                   const std::vector<LonLat>& at, double grid) {
    for (double t = c.t_start; t <= c.t_end + grid / 2; t += grid) {
        for (std::size_t i = 0; i < c.members.size(); ++i) {
            store.add(t, c.members[i], at[i]);
        }
    }
}

constexpr double kGrid = 5.0;

}  // namespace

TEST_CASE("weight validation") {
    SimWeights ok;
    CHECK_NOTHROW(ok.validate());
    SimWeights bad{0.5, 0.5, 0.5};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    SimWeights edge{1.0, 0.0, 0.0};
    CHECK_THROWS_AS(edge.validate(), std::invalid_argument);
}

TEST_CASE("spatial similarity from lifetime bounding boxes") {
    const auto pred = cluster({"a", "b", "c"}, 0.0, 10.0);
    const auto act = cluster({"b", "c", "d"}, 0.0, 10.0);
    PositionStore ps, as;
    // pred box [0,2]x[0,1], act box [1,3]x[0,1]
    fill_constant(ps, pred, {{0.0, 0.0}, {2.0, 1.0}, {1.0, 0.5}}, kGrid);
    fill_constant(as, act, {{1.0, 0.0}, {3.0, 1.0}, {2.0, 0.5}}, kGrid);
    CHECK(sim_spatial(pred, ps, act, as, kGrid) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(sim_spatial(pred, ps, pred, ps, kGrid) == 1.0);

    SUBCASE("missing position names the object and timestamp") {
        PositionStore sparse;
        sparse.add(0.0, "a", LonLat{0.0, 0.0});
        try {
            cluster_mbr(cluster({"a", "q"}, 0.0, 0.0), sparse, kGrid);
            FAIL("expected missing-position error");
        } catch (const std::runtime_error& e) {
            const std::string msg = e.what();
            CHECK(msg.find("q") != std::string::npos);
            CHECK(msg.find("0") != std::string::npos);
        }
    }
    SUBCASE("disjoint basins score zero") {
        const auto far = cluster({"x", "y", "z"}, 0.0, 10.0);
        PositionStore fs;
        fill_constant(fs, far, {{20.0, 20.0}, {21.0, 21.0}, {20.5, 20.5}}, kGrid);
        CHECK(sim_spatial(pred, ps, far, fs, kGrid) == 0.0);
    }
}

TEST_CASE("temporal similarity") {
    CHECK(sim_temporal(cluster({"a"}, 0, 10), cluster({"a"}, 0, 10)) == 1.0);
    CHECK(sim_temporal(cluster({"a"}, 0, 10), cluster({"a"}, 20, 30)) == 0.0);
    CHECK(sim_temporal(cluster({"a"}, 0, 10), cluster({"a"}, 5, 15)) ==
          doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("membership similarity") {
    CHECK(sim_member(cluster({"a", "b", "c"}, 0, 1), cluster({"a", "b", "c"}, 0, 1)) == 1.0);
    CHECK(sim_member(cluster({"a", "b", "c"}, 0, 1), cluster({"b", "c", "d"}, 0, 1)) == 0.5);
    CHECK(sim_member(cluster({"a", "b"}, 0, 1), cluster({"x", "y"}, 0, 1)) == 0.0);
}

TEST_CASE("overall similarity gate and weighting") {
    const SimWeights w;
    SUBCASE("temporally disjoint clusters score zero, whatever the overlap") {
        SimBreakdown parts{1.0, 0.0, 1.0, 0.0};
        CHECK(sim_overall(parts, w) == 0.0);
    }
    SUBCASE("identical clusters score exactly one") {
        SimBreakdown parts{1.0, 1.0, 1.0, 0.0};
        CHECK(sim_overall(parts, w) == 1.0);
    }
    SUBCASE("hand-computed weighted sum") {
        SimBreakdown parts{1.0 / 3.0, 1.0 / 3.0, 0.5, 0.0};
        CHECK(sim_overall(parts, w) == doctest::Approx(7.0 / 18.0).epsilon(1e-9));
        CHECK(sim_overall(parts, w) == doctest::Approx(0.3889).epsilon(1e-3));
    }
    SUBCASE("full similarity on engineered stores") {
        // spatial 1/3 (boxes), temporal 1/3 ([0,10] vs [5,15]), member 1/2
        const auto pred = cluster({"a", "b", "c"}, 0.0, 10.0);
        const auto act = cluster({"b", "c", "d"}, 5.0, 15.0);
        PositionStore ps, as;
        fill_constant(ps, pred, {{0.0, 0.0}, {2.0, 1.0}, {1.0, 0.5}}, kGrid);
        fill_constant(as, act, {{1.0, 0.0}, {3.0, 1.0}, {2.0, 0.5}}, kGrid);
        const SimBreakdown s = similarity(pred, ps, act, as, w, kGrid);
        CHECK(s.spatial == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(s.temporal == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        CHECK(s.member == 0.5);
        CHECK(s.overall == doctest::Approx(7.0 / 18.0).epsilon(1e-9));
    }
}

TEST_CASE("similarity is symmetric in its cluster arguments") {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    const SimWeights w;
    for (int round = 0; round < 20; ++round) {
        const double s1 = std::floor(u(rng)) * kGrid;
        const double s2 = std::floor(u(rng)) * kGrid;
        const auto x = cluster({"a", "b", "c"}, s1, s1 + 2 * kGrid, 2);
        const auto y = cluster({"b", "c", "d"}, s2, s2 + 2 * kGrid, 2);
        PositionStore xs, ys;
        fill_constant(xs, x, {{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}}, kGrid);
        fill_constant(ys, y, {{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}}, kGrid);
        const SimBreakdown ab = similarity(x, xs, y, ys, w, kGrid);
        const SimBreakdown ba = similarity(y, ys, x, xs, w, kGrid);
        CHECK(ab.overall == ba.overall);
        CHECK(ab.spatial == ba.spatial);
        CHECK(ab.overall >= 0.0);
        CHECK(ab.overall <= 1.0);
    }
}

TEST_CASE("matching: forced single pair and empty actual list") {
    const SimWeights w;
    const auto pred = cluster({"a", "b", "c"}, 0.0, 10.0);
    const auto act = cluster({"a", "b", "c"}, 5.0, 15.0);
    PositionStore ps, as;
    fill_constant(ps, pred, {{0.0, 0.0}, {1.0, 1.0}, {0.5, 0.5}}, kGrid);
    fill_constant(as, act, {{0.0, 0.0}, {1.0, 1.0}, {0.5, 0.5}}, kGrid);

    const MatchReport one = cluster_matching({pred}, {act}, w, ps, as, kGrid);
    REQUIRE(one.pairs.size() == 1);
    CHECK(one.unmatched_predicted.empty());
    CHECK(one.pairs[0].sim.member == 1.0);

    const MatchReport none = cluster_matching({pred}, {}, w, ps, as, kGrid);
    CHECK(none.pairs.empty());
    REQUIRE(none.unmatched_predicted.size() == 1);
    CHECK(none.unmatched_predicted[0] == pred);
}

TEST_CASE("matching: identical streams match themselves at exactly one") {
    const auto clusters = detect_batch(walkthrough::slices(6), walkthrough::params());
    REQUIRE(!clusters.empty());
    PositionStore store;
    for (const auto& ts : walkthrough::slices(6)) store.add_slice(ts);
    const SimWeights w;
    const MatchReport report =
        cluster_matching(clusters, clusters, w, store, store, walkthrough::kGrid);
    CHECK(report.unmatched_predicted.empty());
    REQUIRE(report.pairs.size() == clusters.size());
    for (const auto& p : report.pairs) {
        CHECK(p.pred == p.act);
        CHECK(p.sim.overall == 1.0);
    }
    const MatchSummary s = summarize(report);
    REQUIRE(s.overall.has_value());
    CHECK(s.overall->median == 1.0);

    // the enumerated P3 matches itself out of the walkthrough actuals
    const auto p3 = std::find_if(report.pairs.begin(), report.pairs.end(), [](const auto& pr) {
        return pr.pred.members == std::vector<std::string>{"a", "b", "c"} && pr.pred.tp == 1;
    });
    REQUIRE(p3 != report.pairs.end());
    CHECK(p3->act.members == p3->pred.members);
}

TEST_CASE("matching: kind partition keeps cliques with cliques") {
    const SimWeights w;
    const auto pred = cluster({"a", "b", "c"}, 0.0, 10.0, 1);
    const auto act_mcs = cluster({"a", "b", "c"}, 0.0, 10.0, 2);
    PositionStore ps, as;
    fill_constant(ps, pred, {{0.0, 0.0}, {1.0, 1.0}, {0.5, 0.5}}, kGrid);
    fill_constant(as, act_mcs, {{0.0, 0.0}, {1.0, 1.0}, {0.5, 0.5}}, kGrid);
    const MatchReport report = cluster_matching({pred}, {act_mcs}, w, ps, as, kGrid);
    CHECK(report.pairs.empty());
    CHECK(report.unmatched_predicted.size() == 1);
}

TEST_CASE("matching: ties break on earlier start, then smaller member set") {
    const SimWeights w;
    const auto pred = cluster({"a", "b", "c"}, 0.0, 30.0);
    PositionStore ps;
    fill_constant(ps, pred, {{0.0, 0.0}, {1.0, 1.0}, {0.5, 0.5}}, kGrid);

    SUBCASE("earlier actual start wins") {
        const auto act1 = cluster({"a", "b", "c"}, 0.0, 20.0);
        const auto act2 = cluster({"a", "b", "c"}, 10.0, 30.0);
        PositionStore as;
        fill_constant(as, act1, {{0.0, 0.0}, {1.0, 1.0}, {0.5, 0.5}}, kGrid);
        fill_constant(as, act2, {{0.0, 0.0}, {1.0, 1.0}, {0.5, 0.5}}, kGrid);
        // both: temporal 2/3, spatial 1, member 1 -> equal Sim*
        const MatchReport r = cluster_matching({pred}, {act2, act1}, w, ps, as, kGrid);
        REQUIRE(r.pairs.size() == 1);
        CHECK(r.pairs[0].act.t_start == 0.0);

        // invariant to actual-list order
        const MatchReport r2 = cluster_matching({pred}, {act1, act2}, w, ps, as, kGrid);
        CHECK(r2.pairs[0].act == r.pairs[0].act);
    }
    SUBCASE("lexicographically smaller member set wins") {
        const auto act1 = cluster({"a", "b", "x"}, 0.0, 30.0);
        const auto act2 = cluster({"a", "b", "y"}, 0.0, 30.0);
        PositionStore as;
        fill_constant(as, act1, {{0.0, 0.0}, {1.0, 1.0}, {0.5, 0.5}}, kGrid);
        fill_constant(as, act2, {{0.0, 0.0}, {1.0, 1.0}, {0.5, 0.5}}, kGrid);
        const MatchReport r = cluster_matching({pred}, {act2, act1}, w, ps, as, kGrid);
        REQUIRE(r.pairs.size() == 1);
        CHECK(r.pairs[0].act.members == std::vector<std::string>{"a", "b", "x"});
    }
}

TEST_CASE("matching: zero-similarity predictions land in unmatched") {
    const SimWeights w;
    const auto pred = cluster({"a", "b", "c"}, 0.0, 10.0);
    const auto act = cluster({"a", "b", "c"}, 100.0, 120.0);  // temporally disjoint
    PositionStore ps, as;
    fill_constant(ps, pred, {{0.0, 0.0}, {1.0, 1.0}, {0.5, 0.5}}, kGrid);
    fill_constant(as, act, {{0.0, 0.0}, {1.0, 1.0}, {0.5, 0.5}}, kGrid);
    const MatchReport r = cluster_matching({pred}, {act}, w, ps, as, kGrid);
    CHECK(r.pairs.empty());
    CHECK(r.unmatched_predicted.size() == 1);
}

TEST_CASE("summary order statistics") {
    SUBCASE("empty report marks everything absent") {
        const MatchSummary s = summarize(MatchReport{});
        CHECK(!s.spatial.has_value());
        CHECK(!s.overall.has_value());
    }
    SUBCASE("single pair pins all stats to its value") {
        MatchReport r;
        MatchedPair p;
        p.sim = SimBreakdown{0.25, 0.5, 0.75, 0.4};
        r.pairs.push_back(p);
        const MatchSummary s = summarize(r);
        REQUIRE(s.overall.has_value());
        CHECK(s.overall->min == 0.4);
        CHECK(s.overall->median == 0.4);
        CHECK(s.overall->max == 0.4);
        CHECK(s.overall->mean == 0.4);
        CHECK(s.spatial->q25 == 0.25);
    }
    SUBCASE("two-point quantiles interpolate") {
        MatchReport r;
        MatchedPair lo, hi;
        lo.sim.overall = 0.0;
        hi.sim.overall = 1.0;
        r.pairs = {lo, hi};
        const MatchSummary s = summarize(r);
        CHECK(s.overall->median == 0.5);
        CHECK(s.overall->q25 == 0.25);
        CHECK(s.overall->q75 == 0.75);
    }
    SUBCASE("uniform sample mean sits near one half") {
        std::mt19937_64 rng(1000);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        MatchReport r;
        for (int i = 0; i < 1000; ++i) {
            MatchedPair p;
            p.sim.overall = u(rng);
            r.pairs.push_back(p);
        }
        const MatchSummary s = summarize(r);
        CHECK(std::abs(s.overall->mean - 0.5) < 0.03);
    }
}

TEST_CASE("per-slice averaged spatial similarity") {
    // Two clusters diverging over time: slice IoUs 1, then smaller.
    const auto pred = cluster({"a", "b"}, 0.0, 10.0);
    const auto act = cluster({"a", "b"}, 0.0, 10.0);
    PositionStore ps, as;
    // slice 0 and 5: identical boxes; slice 10: actual shifted by half a width
    for (double t : {0.0, 5.0}) {
        ps.add(t, "a", LonLat{0.0, 0.0});
        ps.add(t, "b", LonLat{1.0, 1.0});
        as.add(t, "a", LonLat{0.0, 0.0});
        as.add(t, "b", LonLat{1.0, 1.0});
    }
    ps.add(10.0, "a", LonLat{0.0, 0.0});
    ps.add(10.0, "b", LonLat{1.0, 1.0});
    as.add(10.0, "a", LonLat{0.5, 0.0});
    as.add(10.0, "b", LonLat{1.5, 1.0});
    const double got = sim_spatial_per_slice(pred, ps, act, as, kGrid);
    CHECK(got == doctest::Approx((1.0 + 1.0 + 1.0 / 3.0) / 3.0).epsilon(1e-12));

    SUBCASE("no lifetime overlap scores zero") {
        const auto later = cluster({"a", "b"}, 100.0, 110.0);
        CHECK(sim_spatial_per_slice(pred, ps, later, as, kGrid) == 0.0);
    }
    SUBCASE("matching in per-slice mode stays deterministic") {
        const SimWeights w;
        const MatchReport r =
            cluster_matching({pred}, {act}, w, ps, as, kGrid, SpatialMode::PerSlice);
        REQUIRE(r.pairs.size() == 1);
        CHECK(r.pairs[0].sim.spatial == doctest::Approx((2.0 + 1.0 / 3.0) / 3.0));
    }
}
