#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "comove/flp.hpp"

using namespace comove;

namespace {

Trajectory line_traj(double lon_step, double lat_step, double dt, int n) {
    Trajectory t{"v1", {}};
    for (int i = 0; i < n; ++i) {
        t.points.push_back(TimestampedPoint{"v1", i * lon_step, i * lat_step, i * dt});
    }
    return t;
}

GruParams random_params(int hidden, int dense, std::uint64_t seed, double scale = 0.4) {
    GruParams p = GruParams::zeros(hidden, dense);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto* m : p.matrices()) {
        for (Eigen::Index i = 0; i < m->rows(); ++i) {
            for (Eigen::Index j = 0; j < m->cols(); ++j) (*m)(i, j) = u(rng);
        }
    }
    for (auto* v : p.vectors()) {
        for (Eigen::Index i = 0; i < v->size(); ++i) (*v)(i) = u(rng);
    }
    return p;
}

FeatureSeq random_seq(int len, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    FeatureSeq seq;
    for (int i = 0; i < len; ++i) {
        seq.push_back(FeatureVector{u(rng), u(rng), 0.5 + std::abs(u(rng)), 1.0 + std::abs(u(rng))});
    }
    return seq;
}

// Straight-line re-implementation of the gate equations, no Eigen algebra.
std::vector<double> naive_cell(const Eigen::Vector4d& x, const std::vector<double>& h_prev,
                               const GruParams& p) {
    const int H = p.hidden();
    auto affine = [&](const Eigen::MatrixXd& wp, const Eigen::MatrixXd& wh,
                      const Eigen::VectorXd& b, const std::vector<double>& rh) {
        std::vector<double> out(static_cast<std::size_t>(H), 0.0);
        for (int i = 0; i < H; ++i) {
            double acc = b(i);
            for (int j = 0; j < 4; ++j) acc += wp(i, j) * x(j);
            for (int j = 0; j < H; ++j) acc += wh(i, j) * rh[static_cast<std::size_t>(j)];
            out[static_cast<std::size_t>(i)] = acc;
        }
        return out;
    };
    const auto sz = affine(p.w_pz, p.w_hz, p.b_z, h_prev);
    const auto sr = affine(p.w_pr, p.w_hr, p.b_r, h_prev);
    std::vector<double> z(sz.size()), r(sr.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = 1.0 / (1.0 + std::exp(-sz[i]));
        r[i] = 1.0 / (1.0 + std::exp(-sr[i]));
    }
    std::vector<double> rh(z.size());
    for (std::size_t i = 0; i < rh.size(); ++i) rh[i] = r[i] * h_prev[i];
    const auto sh = affine(p.w_ph, p.w_hh, p.b_h, rh);
    std::vector<double> h(z.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double hc = std::tanh(sh[i]);
        h[i] = z[i] * h_prev[i] + (1.0 - z[i]) * hc;
    }
    return h;
}

double sample_loss(const TrainingSample& s, const GruParams& p, const NormStats& stats) {
    const Eigen::Vector2d y = forward_cached(s.seq, p, stats).y;
    const Eigen::Vector2d t = normalize_output(s.target, stats);
    return 0.5 * (y - t).squaredNorm();
}

}  // namespace

TEST_CASE("featurize contracts") {
    const auto t = line_traj(1.0, 0.0, 60.0, 2);
    const auto seq = featurize(t, 300.0);
    REQUIRE(seq.size() == 1);
    CHECK(seq[0].d_lon == 1.0);
    CHECK(seq[0].d_lat == 0.0);
    CHECK(seq[0].d_t == 60.0);
    CHECK(seq[0].horizon == 300.0);

    const auto still = featurize(line_traj(0.0, 0.0, 45.0, 2), 120.0);
    CHECK(still[0].d_lon == 0.0);
    CHECK(still[0].d_t == 45.0);

    CHECK(featurize(line_traj(1.0, 1.0, 60.0, 9), 300.0).size() == 8);
    CHECK_THROWS_WITH_AS(featurize(line_traj(1.0, 0.0, 60.0, 1), 300.0), "insufficient history",
                         std::invalid_argument);
    CHECK_THROWS_AS(featurize(t, 0.0), std::invalid_argument);
}

TEST_CASE("gru cell fixed points with zero parameters") {
    const GruParams zero = GruParams::zeros(6, 3);
    const Eigen::Vector4d x(0.3, -0.2, 1.0, 5.0);
    SUBCASE("zero state stays zero") {
        const Eigen::VectorXd h = gru_cell_step(x, Eigen::VectorXd::Zero(6), zero);
        CHECK(h.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("state halves: z = sigmoid(0) = 1/2, candidate = 0") {
        Eigen::VectorXd v(6);
        v << 1.0, -2.0, 0.5, 3.0, -0.25, 8.0;
        const Eigen::VectorXd h = gru_cell_step(x, v, zero);
        CHECK((h - 0.5 * v).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("dimension mismatch is a configuration error") {
        CHECK_THROWS_AS(gru_cell_step(x, Eigen::VectorXd::Zero(4), zero), std::invalid_argument);
    }
}

TEST_CASE("gru cell matches an independent re-implementation") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        const GruParams p = random_params(12, 5, seed);
        std::mt19937_64 rng(seed + 100);
        std::uniform_real_distribution<double> u(-1.5, 1.5);
        Eigen::Vector4d x(u(rng), u(rng), u(rng), u(rng));
        std::vector<double> h_prev(12);
        Eigen::VectorXd h_prev_e(12);
        for (int i = 0; i < 12; ++i) {
            h_prev[static_cast<std::size_t>(i)] = u(rng);
            h_prev_e(i) = h_prev[static_cast<std::size_t>(i)];
        }
        const Eigen::VectorXd got = gru_cell_step(x, h_prev_e, p);
        const auto want = naive_cell(x, h_prev, p);
        for (int i = 0; i < 12; ++i) {
            CHECK(std::abs(got(i) - want[static_cast<std::size_t>(i)]) < 1e-12);
        }
        // gates bounded, state bounded by max(|h_prev|, 1)
        const double bound = std::max(1.0, h_prev_e.cwiseAbs().maxCoeff());
        CHECK(got.cwiseAbs().maxCoeff() <= bound + 1e-12);
    }
}

TEST_CASE("forward is pure and a zero network predicts no displacement") {
    const NormStats identity;
    const auto seq = random_seq(6, 44);
    const GruParams zero = GruParams::zeros(8, 4);
    const Eigen::Vector2d d0 = forward(seq, zero, identity);
    CHECK(d0(0) == 0.0);
    CHECK(d0(1) == 0.0);

    const GruParams p = random_params(8, 4, 9);
    const Eigen::Vector2d a = forward(seq, p, identity);
    const Eigen::Vector2d b = forward(seq, p, identity);
    CHECK(a == b);
    CHECK_THROWS_WITH_AS(forward({}, p, identity), "insufficient history", std::invalid_argument);
}

TEST_CASE("analytic gradients match central finite differences (reduced network)") {
    const int hidden = 4, dense = 3;
    GruParams p = random_params(hidden, dense, 77, 0.6);
    NormStats stats;  // identity scaling keeps the oracle simple
    std::vector<TrainingSample> samples;
    for (int i = 0; i < 3; ++i) {
        TrainingSample s;
        s.seq = random_seq(5, 200 + static_cast<std::uint64_t>(i));
        s.target = Eigen::Vector2d(0.3 * i - 0.2, 0.1 * i + 0.05);
        samples.push_back(s);
    }

    Gradients analytic(p);
    for (const auto& s : samples) {
        backward(forward_cached(s.seq, p, stats), normalize_output(s.target, stats), p, analytic);
    }

    const double step = 1e-5;
    auto loss_all = [&]() {
        double acc = 0.0;
        for (const auto& s : samples) acc += sample_loss(s, p, stats);
        return acc;
    };
    auto check_block = [&](double* theta, const double* grad, Eigen::Index size,
                           const std::string& name) {
        for (Eigen::Index i = 0; i < size; ++i) {
            const double keep = theta[i];
            theta[i] = keep + step;
            const double up = loss_all();
            theta[i] = keep - step;
            const double down = loss_all();
            theta[i] = keep;
            const double numeric = (up - down) / (2.0 * step);
            const double denom = std::max({1e-8, std::abs(numeric), std::abs(grad[i])});
            CAPTURE(name);
            CAPTURE(i);
            CHECK(std::abs(numeric - grad[i]) / denom < 1e-4);
        }
    };
    auto pm = p.matrices();
    auto gm = analytic.g.matrices();
    for (std::size_t b = 0; b < pm.size(); ++b) {
        check_block(pm[b]->data(), gm[b]->data(), pm[b]->size(), GruParams::matrix_names()[b]);
    }
    auto pv = p.vectors();
    auto gv = analytic.g.vectors();
    for (std::size_t b = 0; b < pv.size(); ++b) {
        check_block(pv[b]->data(), gv[b]->data(), pv[b]->size(), GruParams::vector_names()[b]);
    }
}

TEST_CASE("training overfits a single sample below 1e-6") {
    TrainingSample s;
    s.seq = {FeatureVector{0.01, -0.02, 60.0, 300.0}, FeatureVector{0.012, -0.018, 60.0, 300.0},
             FeatureVector{0.011, -0.021, 60.0, 300.0}};
    s.target = Eigen::Vector2d(0.05, -0.1);
    PredictorConfig cfg;
    cfg.hidden_size = 16;
    cfg.dense_size = 8;
    cfg.epochs = 500;
    cfg.batch_size = 1;
    cfg.learning_rate = 1e-2;
    cfg.rng_seed = 5;
    const TrainResult r = train_bptt({s}, cfg);
    CHECK(r.loss_history.back() < 1e-6);
}

TEST_CASE("training is bit-reproducible under a fixed seed") {
    std::vector<TrainingSample> data;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-0.01, 0.01);
    for (int i = 0; i < 24; ++i) {
        TrainingSample s;
        const double vlon = u(rng), vlat = u(rng);
        for (int k = 0; k < 4; ++k) s.seq.push_back(FeatureVector{vlon, vlat, 60.0, 300.0});
        s.target = Eigen::Vector2d(vlon * 5.0, vlat * 5.0);
        data.push_back(s);
    }
    PredictorConfig cfg;
    cfg.hidden_size = 10;
    cfg.dense_size = 6;
    cfg.epochs = 12;
    cfg.batch_size = 8;
    cfg.rng_seed = 404;
    TrainResult a = train_bptt(data, cfg);
    TrainResult b = train_bptt(data, cfg);
    REQUIRE(a.loss_history.size() == b.loss_history.size());
    for (std::size_t i = 0; i < a.loss_history.size(); ++i) {
        CHECK(a.loss_history[i] == b.loss_history[i]);
    }
    auto ma = a.params.matrices();
    auto mb = b.params.matrices();
    for (std::size_t i = 0; i < ma.size(); ++i) {
        CHECK((*ma[i] - *mb[i]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("loss history trends down on a linear-motion set") {
    std::vector<TrainingSample> data;
    std::mt19937_64 rng(97);
    std::uniform_real_distribution<double> u(-0.008, 0.008);
    for (int i = 0; i < 200; ++i) {
        TrainingSample s;
        const double vlon = u(rng), vlat = u(rng);
        for (int k = 0; k < 6; ++k) s.seq.push_back(FeatureVector{vlon, vlat, 60.0, 300.0});
        s.target = Eigen::Vector2d(vlon * 5.0, vlat * 5.0);
        data.push_back(s);
    }
    PredictorConfig cfg;
    cfg.hidden_size = 16;
    cfg.dense_size = 8;
    cfg.epochs = 100;
    cfg.batch_size = 200;  // full batch keeps the trace clean
    cfg.learning_rate = 1e-3;
    cfg.rng_seed = 7;
    const TrainResult r = train_bptt(data, cfg);
    int upticks = 0;
    for (std::size_t e = 1; e < r.loss_history.size(); ++e) {
        if (r.loss_history[e] > r.loss_history[e - 1] * (1.0 + 1e-9)) ++upticks;
    }
    CHECK(upticks <= static_cast<int>(r.loss_history.size()) / 20);  // <= 5%
    CHECK(r.loss_history.back() < r.loss_history.front());
}

TEST_CASE("a trained network recovers constant-velocity displacement") {
    std::vector<TrainingSample> data;
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> u(-0.005, 0.005);
    for (int i = 0; i < 150; ++i) {
        TrainingSample s;
        const double vlon = u(rng), vlat = u(rng);
        for (int k = 0; k < 6; ++k) s.seq.push_back(FeatureVector{vlon, vlat, 60.0, 300.0});
        s.target = Eigen::Vector2d(vlon * 5.0, vlat * 5.0);
        data.push_back(s);
    }
    PredictorConfig cfg;
    cfg.hidden_size = 24;
    cfg.dense_size = 10;
    cfg.epochs = 400;
    cfg.batch_size = 150;
    cfg.learning_rate = 5e-3;
    cfg.rng_seed = 21;
    const TrainResult r = train_bptt(data, cfg);

    // held-out velocity
    const double vlon = 0.003, vlat = -0.004;
    FeatureSeq seq;
    for (int k = 0; k < 6; ++k) seq.push_back(FeatureVector{vlon, vlat, 60.0, 300.0});
    const Eigen::Vector2d pred = forward(seq, r.params, r.stats);
    CHECK(std::abs(pred(0) - vlon * 5.0) < 1e-2);
    CHECK(std::abs(pred(1) - vlat * 5.0) < 1e-2);
}

TEST_CASE("training input validation") {
    PredictorConfig cfg;
    CHECK_THROWS_AS(train_bptt({}, cfg), std::invalid_argument);
    TrainingSample empty_seq;
    empty_seq.target = Eigen::Vector2d(0.0, 0.0);
    CHECK_THROWS_AS(train_bptt({empty_seq}, cfg), std::invalid_argument);
    PredictorConfig bad = cfg;
    bad.beta1 = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("normalization round trip and moments") {
    std::vector<TrainingSample> data;
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> u(-2.0, 5.0);
    for (int i = 0; i < 64; ++i) {
        TrainingSample s;
        for (int k = 0; k < 3; ++k) {
            s.seq.push_back(FeatureVector{u(rng), u(rng), std::abs(u(rng)) + 0.1, 7.0});
        }
        s.target = Eigen::Vector2d(u(rng), u(rng));
        data.push_back(s);
    }
    const NormStats stats = fit_norm_stats(data);

    SUBCASE("round trip is the identity to 1e-12") {
        for (const auto& s : data) {
            const Eigen::Vector2d through =
                denormalize_output(normalize_output(s.target, stats), stats);
            CHECK((through - s.target).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
    SUBCASE("normalized training features have zero mean, unit variance") {
        Eigen::Vector4d sum = Eigen::Vector4d::Zero(), sq = Eigen::Vector4d::Zero();
        std::size_t n = 0;
        for (const auto& s : data) {
            for (const auto& f : s.seq) {
                const Eigen::Vector4d v = normalize_feature(f, stats);
                sum += v;
                sq += v.cwiseProduct(v);
                ++n;
            }
        }
        const Eigen::Vector4d mean = sum / static_cast<double>(n);
        const Eigen::Vector4d var = sq / static_cast<double>(n) - mean.cwiseProduct(mean);
        // the constant horizon feature has zero variance and passes through
        for (int i = 0; i < 3; ++i) {
            CHECK(std::abs(mean(i)) < 1e-9);
            CHECK(std::abs(var(i) - 1.0) < 1e-9);
        }
        CHECK(stats.in_std(3) == 1.0);
        CHECK(normalize_feature(data[0].seq[0], stats)(3) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("constant velocity predictor") {
    SUBCASE("linear extrapolation fixture") {
        const auto t = line_traj(1.0, 0.0, 60.0, 2);  // lon 0 -> 1 over 60 s
        const TimestampedPoint p = constant_velocity_predict(t, 300.0);
        CHECK(p.lon == doctest::Approx(6.0).epsilon(1e-12));
        CHECK(p.lat == 0.0);
        CHECK(p.t == 360.0);
        CHECK(p.object_id == "v1");
    }
    SUBCASE("stationary object stays put") {
        const auto t = line_traj(0.0, 0.0, 60.0, 5);
        const TimestampedPoint p = constant_velocity_predict(t, 600.0);
        CHECK(p.lon == 0.0);
        CHECK(p.lat == 0.0);
    }
    SUBCASE("exact for exact linear motion") {
        const auto t = line_traj(0.004, -0.002, 60.0, 10);
        const TimestampedPoint p = constant_velocity_predict(t, 180.0);
        CHECK(p.lon == doctest::Approx(9 * 0.004 + 3 * 0.004).epsilon(1e-12));
        CHECK(p.lat == doctest::Approx(9 * -0.002 + 3 * -0.002).epsilon(1e-12));
    }
    SUBCASE("single point shifts in time only") {
        Trajectory t{"v1", {TimestampedPoint{"v1", 3.0, 4.0, 100.0}}};
        const TimestampedPoint p = constant_velocity_predict(t, 60.0);
        CHECK(p.lon == 3.0);
        CHECK(p.lat == 4.0);
        CHECK(p.t == 160.0);
    }
}

TEST_CASE("predict_location semantics") {
    const NormStats identity;
    SUBCASE("timestamp is exactly t_n + horizon; zero network stays put") {
        const GruParams zero = GruParams::zeros(8, 4);
        const auto t = line_traj(0.001, 0.002, 60.0, 12);
        const TimestampedPoint p = predict_location(t, 300.0, zero, identity, 8);
        CHECK(p.t == t.points.back().t + 300.0);
        CHECK(p.lon == t.points.back().lon);
        CHECK(p.lat == t.points.back().lat);
    }
    SUBCASE("short history falls back to constant velocity") {
        const GruParams p = random_params(8, 4, 3);
        const auto t = line_traj(0.001, 0.0, 60.0, 4);  // 4 points < window 8 + 1
        const TimestampedPoint got = predict_location(t, 300.0, p, identity, 8);
        const TimestampedPoint cv = constant_velocity_predict(t, 300.0);
        CHECK(got.lon == cv.lon);
        CHECK(got.lat == cv.lat);
    }
}

TEST_CASE("training windows from aligned trajectories") {
    const auto t = line_traj(0.001, 0.0, 60.0, 20);
    const auto set = make_training_set({t}, 8, 300.0);
    // windows: i + 8 + 5 < 20 -> i in [0, 6]
    CHECK(set.size() == 7);
    for (const auto& s : set) {
        CHECK(s.seq.size() == 8);
        CHECK(s.target(0) == doctest::Approx(0.001 * 5.0).epsilon(1e-9));
    }
    // horizon off the grid yields nothing
    CHECK(make_training_set({t}, 8, 90.0).empty());
}

TEST_CASE("model files round-trip exactly") {
    TrainingSample s;
    s.seq = {FeatureVector{0.01, 0.02, 60.0, 300.0}, FeatureVector{0.015, 0.019, 60.0, 300.0}};
    s.target = Eigen::Vector2d(0.04, 0.09);
    PredictorConfig cfg;
    cfg.hidden_size = 9;
    cfg.dense_size = 5;
    cfg.epochs = 3;
    cfg.batch_size = 1;
    cfg.rng_seed = 8;
    const TrainResult r = train_bptt({s}, cfg);
    const Model m{r.params, r.stats, cfg.window_len};
    const std::string path = "/tmp/comove_model_test.txt";
    save_model(path, m);
    const Model back = load_model(path);
    CHECK(back.window_len == m.window_len);
    auto ma = const_cast<Model&>(m).params.matrices();
    auto mb = const_cast<Model&>(back).params.matrices();
    for (std::size_t i = 0; i < ma.size(); ++i) {
        CHECK((*ma[i] - *mb[i]).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK((back.stats.in_mean - m.stats.in_mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.stats.out_std - m.stats.out_std).cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(load_model("/tmp/definitely_missing_model.txt"), std::runtime_error);
}
