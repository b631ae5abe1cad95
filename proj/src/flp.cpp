#include "comove/flp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace comove {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// splitmix64: tiny, fully specified generator so that initialisation and
// shuffling are bit-identical everywhere.
struct DetRng {
    std::uint64_t state;

    explicit DetRng(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    double uniform() {  // [0, 1)
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    std::uint64_t bounded(std::uint64_t n) {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
    }
};

}  // namespace

void GruParams::check_shapes() const {
    const int h = hidden();
    const int dn = dense();
    auto bad = [](const char* what) {
        throw std::invalid_argument(std::string("parameter shape mismatch: ") + what);
    };
    if (h <= 0 || dn <= 0) bad("empty layers");
    if (w_pz.rows() != h || w_pz.cols() != kInputSize) bad("w_pz");
    if (w_pr.rows() != h || w_pr.cols() != kInputSize) bad("w_pr");
    if (w_ph.rows() != h || w_ph.cols() != kInputSize) bad("w_ph");
    if (w_hz.rows() != h || w_hz.cols() != h) bad("w_hz");
    if (w_hr.rows() != h || w_hr.cols() != h) bad("w_hr");
    if (w_hh.rows() != h || w_hh.cols() != h) bad("w_hh");
    if (b_r.size() != h || b_h.size() != h) bad("gate biases");
    if (w_dense.rows() != dn || w_dense.cols() != h) bad("w_dense");
    if (w_out.rows() != kOutputSize || w_out.cols() != dn) bad("w_out");
    if (b_out.size() != kOutputSize) bad("b_out");
}

GruParams GruParams::zeros(int hidden, int dense) {
    GruParams p;
    p.w_pz = Eigen::MatrixXd::Zero(hidden, kInputSize);
    p.w_pr = Eigen::MatrixXd::Zero(hidden, kInputSize);
    p.w_ph = Eigen::MatrixXd::Zero(hidden, kInputSize);
    p.w_hz = Eigen::MatrixXd::Zero(hidden, hidden);
    p.w_hr = Eigen::MatrixXd::Zero(hidden, hidden);
    p.w_hh = Eigen::MatrixXd::Zero(hidden, hidden);
    p.b_z = Eigen::VectorXd::Zero(hidden);
    p.b_r = Eigen::VectorXd::Zero(hidden);
    p.b_h = Eigen::VectorXd::Zero(hidden);
    p.w_dense = Eigen::MatrixXd::Zero(dense, hidden);
    p.b_dense = Eigen::VectorXd::Zero(dense);
    p.w_out = Eigen::MatrixXd::Zero(kOutputSize, dense);
    p.b_out = Eigen::VectorXd::Zero(kOutputSize);
    return p;
}

std::vector<Eigen::MatrixXd*> GruParams::matrices() {
    return {&w_pz, &w_pr, &w_ph, &w_hz, &w_hr, &w_hh, &w_dense, &w_out};
}

std::vector<Eigen::VectorXd*> GruParams::vectors() {
    return {&b_z, &b_r, &b_h, &b_dense, &b_out};
}

const std::vector<std::string>& GruParams::matrix_names() {
    static const std::vector<std::string> names = {"w_pz", "w_pr", "w_ph",    "w_hz",
                                                   "w_hr", "w_hh", "w_dense", "w_out"};
    return names;
}

const std::vector<std::string>& GruParams::vector_names() {
    static const std::vector<std::string> names = {"b_z", "b_r", "b_h", "b_dense", "b_out"};
    return names;
}

void PredictorConfig::validate() const {
    if (hidden_size <= 0 || dense_size <= 0 || window_len <= 0) {
        throw std::invalid_argument("layer sizes and window length must be positive");
    }
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
        throw std::invalid_argument("adam betas must lie in (0, 1)");
    }
    if (!(learning_rate > 0.0) || !(eps_adam > 0.0) || epochs <= 0 || batch_size <= 0) {
        throw std::invalid_argument("invalid training hyperparameters");
    }
}

FeatureSeq featurize(const Trajectory& traj, double horizon_s) {
    if (traj.points.size() < 2) {
        throw std::invalid_argument("insufficient history");
    }
    if (!(horizon_s > 0.0)) {
        throw std::invalid_argument("horizon must be positive");
    }
    FeatureSeq seq;
    seq.reserve(traj.points.size() - 1);
    for (std::size_t i = 1; i < traj.points.size(); ++i) {
        const auto& a = traj.points[i - 1];
        const auto& b = traj.points[i];
        seq.push_back(FeatureVector{b.lon - a.lon, b.lat - a.lat, b.t - a.t, horizon_s});
    }
    return seq;
}

NormStats fit_norm_stats(const std::vector<TrainingSample>& samples) {
    NormStats s;
    Eigen::Vector4d in_sum = Eigen::Vector4d::Zero(), in_sq = Eigen::Vector4d::Zero();
    Eigen::Vector2d out_sum = Eigen::Vector2d::Zero(), out_sq = Eigen::Vector2d::Zero();
    std::size_t n_in = 0, n_out = 0;
    for (const auto& sample : samples) {
        for (const auto& f : sample.seq) {
            const Eigen::Vector4d v(f.d_lon, f.d_lat, f.d_t, f.horizon);
            in_sum += v;
            in_sq += v.cwiseProduct(v);
            ++n_in;
        }
        out_sum += sample.target;
        out_sq += sample.target.cwiseProduct(sample.target);
        ++n_out;
    }
    auto finalize = [](auto sum, auto sq, std::size_t n, auto& mean, auto& stdev) {
        if (n == 0) return;
        mean = sum / static_cast<double>(n);
        auto var = (sq / static_cast<double>(n) - mean.cwiseProduct(mean)).cwiseMax(0.0);
        stdev = var.cwiseSqrt();
        for (int i = 0; i < stdev.size(); ++i) {
            if (stdev(i) <= 0.0) stdev(i) = 1.0;  // zero-variance feature passes through
        }
    };
    finalize(in_sum, in_sq, n_in, s.in_mean, s.in_std);
    finalize(out_sum, out_sq, n_out, s.out_mean, s.out_std);
    return s;
}

Eigen::Vector4d normalize_feature(const FeatureVector& f, const NormStats& s) {
    const Eigen::Vector4d v(f.d_lon, f.d_lat, f.d_t, f.horizon);
    return (v - s.in_mean).cwiseQuotient(s.in_std);
}

FeatureSeq normalize_features(const FeatureSeq& seq, const NormStats& s) {
    FeatureSeq out;
    out.reserve(seq.size());
    for (const auto& f : seq) {
        const Eigen::Vector4d v = normalize_feature(f, s);
        out.push_back(FeatureVector{v(0), v(1), v(2), v(3)});
    }
    return out;
}

Eigen::Vector2d normalize_output(const Eigen::Vector2d& disp, const NormStats& s) {
    return (disp - s.out_mean).cwiseQuotient(s.out_std);
}

Eigen::Vector2d denormalize_output(const Eigen::Vector2d& disp, const NormStats& s) {
    return disp.cwiseProduct(s.out_std) + s.out_mean;
}

Eigen::VectorXd gru_cell_step(const Eigen::Vector4d& x, const Eigen::VectorXd& h_prev,
                              const GruParams& p) {
    if (h_prev.size() != p.hidden()) {
        throw std::invalid_argument("hidden state size mismatch");
    }
    const Eigen::ArrayXd z = (p.w_pz * x + p.w_hz * h_prev + p.b_z).array().unaryExpr([](double v) {
        return sigmoid(v);
    });
    const Eigen::ArrayXd r = (p.w_pr * x + p.w_hr * h_prev + p.b_r).array().unaryExpr([](double v) {
        return sigmoid(v);
    });
    const Eigen::ArrayXd hc =
        (p.w_ph * x + p.w_hh * (r * h_prev.array()).matrix() + p.b_h).array().tanh();
    return (z * h_prev.array() + (1.0 - z) * hc).matrix();
}

ForwardCache forward_cached(const FeatureSeq& seq, const GruParams& p, const NormStats& stats) {
    if (seq.empty()) {
        throw std::invalid_argument("insufficient history");
    }
    p.check_shapes();
    ForwardCache c;
    const std::size_t steps = seq.size();
    c.x.reserve(steps);
    c.h.reserve(steps + 1);
    c.h.push_back(Eigen::VectorXd::Zero(p.hidden()));
    for (const auto& f : seq) {
        const Eigen::Vector4d x = normalize_feature(f, stats);
        const Eigen::VectorXd& h_prev = c.h.back();
        Eigen::VectorXd z = (p.w_pz * x + p.w_hz * h_prev + p.b_z)
                                .unaryExpr([](double v) { return sigmoid(v); });
        Eigen::VectorXd r = (p.w_pr * x + p.w_hr * h_prev + p.b_r)
                                .unaryExpr([](double v) { return sigmoid(v); });
        Eigen::VectorXd hc =
            (p.w_ph * x + p.w_hh * r.cwiseProduct(h_prev) + p.b_h).array().tanh().matrix();
        Eigen::VectorXd h =
            z.cwiseProduct(h_prev) + (Eigen::VectorXd::Ones(p.hidden()) - z).cwiseProduct(hc);
        c.x.push_back(x);
        c.z.push_back(std::move(z));
        c.r.push_back(std::move(r));
        c.hcand.push_back(std::move(hc));
        c.h.push_back(std::move(h));
    }
    c.dense_act = (p.w_dense * c.h.back() + p.b_dense).array().tanh().matrix();
    c.y = p.w_out * c.dense_act + p.b_out;
    return c;
}

Eigen::Vector2d forward(const FeatureSeq& seq, const GruParams& p, const NormStats& stats) {
    return denormalize_output(forward_cached(seq, p, stats).y, stats);
}

Gradients::Gradients(const GruParams& like) : g(GruParams::zeros(like.hidden(), like.dense())) {}

void Gradients::add_scaled(const Gradients& other, double s) {
    auto mine = g.matrices();
    auto theirs = const_cast<GruParams&>(other.g).matrices();
    for (std::size_t i = 0; i < mine.size(); ++i) {
        *mine[i] += s * *theirs[i];
    }
    auto mv = g.vectors();
    auto tv = const_cast<GruParams&>(other.g).vectors();
    for (std::size_t i = 0; i < mv.size(); ++i) {
        *mv[i] += s * *tv[i];
    }
}

void Gradients::scale(double s) {
    for (auto* m : g.matrices()) *m *= s;
    for (auto* v : g.vectors()) *v *= s;
}

double backward(const ForwardCache& c, const Eigen::Vector2d& target_norm, const GruParams& p,
                Gradients& grads) {
    const Eigen::Vector2d gy = c.y - target_norm;
    const double loss = 0.5 * gy.squaredNorm();

    grads.g.w_out += gy * c.dense_act.transpose();
    grads.g.b_out += gy;
    const Eigen::VectorXd gu = p.w_out.transpose() * gy;
    const Eigen::VectorXd gd =
        gu.cwiseProduct((1.0 - c.dense_act.array().square()).matrix());
    grads.g.w_dense += gd * c.h.back().transpose();
    grads.g.b_dense += gd;

    Eigen::VectorXd gh = p.w_dense.transpose() * gd;
    for (std::size_t k = c.x.size(); k-- > 0;) {
        const Eigen::VectorXd& h_prev = c.h[k];
        const Eigen::VectorXd& z = c.z[k];
        const Eigen::VectorXd& r = c.r[k];
        const Eigen::VectorXd& hc = c.hcand[k];
        const Eigen::Vector4d& x = c.x[k];

        const Eigen::VectorXd gz = gh.cwiseProduct(h_prev - hc);
        const Eigen::VectorXd gc = gh.cwiseProduct((1.0 - z.array()).matrix());
        Eigen::VectorXd gh_prev = gh.cwiseProduct(z);

        const Eigen::VectorXd gsc = gc.cwiseProduct((1.0 - hc.array().square()).matrix());
        grads.g.w_ph += gsc * x.transpose();
        grads.g.b_h += gsc;
        grads.g.w_hh += gsc * r.cwiseProduct(h_prev).transpose();
        const Eigen::VectorXd grh = p.w_hh.transpose() * gsc;
        const Eigen::VectorXd gr = grh.cwiseProduct(h_prev);
        gh_prev += grh.cwiseProduct(r);

        const Eigen::VectorXd gsz = gz.cwiseProduct(z.cwiseProduct(
            (1.0 - z.array()).matrix()));
        grads.g.w_pz += gsz * x.transpose();
        grads.g.b_z += gsz;
        grads.g.w_hz += gsz * h_prev.transpose();
        gh_prev += p.w_hz.transpose() * gsz;

        const Eigen::VectorXd gsr = gr.cwiseProduct(r.cwiseProduct(
            (1.0 - r.array()).matrix()));
        grads.g.w_pr += gsr * x.transpose();
        grads.g.b_r += gsr;
        grads.g.w_hr += gsr * h_prev.transpose();
        gh_prev += p.w_hr.transpose() * gsr;

        gh = std::move(gh_prev);
    }
    return loss;
}

namespace {

GruParams init_params(const PredictorConfig& cfg, DetRng& rng) {
    GruParams p = GruParams::zeros(cfg.hidden_size, cfg.dense_size);
    for (auto* m : p.matrices()) {
        const double limit = std::sqrt(6.0 / static_cast<double>(m->rows() + m->cols()));
        for (Eigen::Index i = 0; i < m->rows(); ++i) {
            for (Eigen::Index j = 0; j < m->cols(); ++j) {
                (*m)(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
            }
        }
    }
    return p;  // biases stay zero
}

struct Adam {
    Gradients m, v;
    long long t = 0;

    explicit Adam(const GruParams& like) : m(like), v(like) {}

    void update(GruParams& p, const Gradients& grad, const PredictorConfig& cfg) {
        ++t;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        auto step = [&](auto& theta, auto& gm, auto& gv, const auto& g) {
            gm = cfg.beta1 * gm + (1.0 - cfg.beta1) * g;
            gv = (cfg.beta2 * gv.array() + (1.0 - cfg.beta2) * g.array().square()).matrix();
            theta.array() -= cfg.learning_rate * (gm.array() / bc1) /
                             ((gv.array() / bc2).sqrt() + cfg.eps_adam);
        };
        auto pm = p.matrices();
        auto mm = m.g.matrices();
        auto vm = v.g.matrices();
        auto gm = const_cast<GruParams&>(grad.g).matrices();
        for (std::size_t i = 0; i < pm.size(); ++i) {
            step(*pm[i], *mm[i], *vm[i], *gm[i]);
        }
        auto pv = p.vectors();
        auto mv = m.g.vectors();
        auto vv = v.g.vectors();
        auto gv = const_cast<GruParams&>(grad.g).vectors();
        for (std::size_t i = 0; i < pv.size(); ++i) {
            step(*pv[i], *mv[i], *vv[i], *gv[i]);
        }
    }
};

}  // namespace

TrainResult train_bptt(const std::vector<TrainingSample>& dataset, const PredictorConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) {
        throw std::invalid_argument("empty training dataset");
    }
    for (const auto& s : dataset) {
        if (s.seq.empty()) {
            throw std::invalid_argument("empty training sequence");
        }
    }

    TrainResult result;
    result.stats = fit_norm_stats(dataset);
    DetRng rng(cfg.rng_seed);
    result.params = init_params(cfg, rng);
    Adam opt(result.params);

    std::vector<Eigen::Vector2d> targets_norm;
    targets_norm.reserve(dataset.size());
    for (const auto& s : dataset) {
        targets_norm.push_back(normalize_output(s.target, result.stats));
    }

    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the owned generator.
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng.bounded(i));
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t take =
                std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - done);
            Gradients batch_grad(result.params);
            for (std::size_t b = 0; b < take; ++b) {
                const std::size_t idx = order[done + b];
                const ForwardCache cache =
                    forward_cached(dataset[idx].seq, result.params, result.stats);
                epoch_loss += backward(cache, targets_norm[idx], result.params, batch_grad);
            }
            batch_grad.scale(1.0 / static_cast<double>(take));
            opt.update(result.params, batch_grad, cfg);
            done += take;
        }
        epoch_loss /= static_cast<double>(dataset.size());
        if (!std::isfinite(epoch_loss)) {
            throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
        }
        result.loss_history.push_back(epoch_loss);
    }
    return result;
}

TimestampedPoint constant_velocity_predict(const Trajectory& traj, double horizon_s) {
    if (traj.points.empty()) {
        throw std::invalid_argument("insufficient history");
    }
    const auto& last = traj.points.back();
    TimestampedPoint out = last;
    out.t = last.t + horizon_s;
    if (traj.points.size() >= 2) {
        const auto& prev = traj.points[traj.points.size() - 2];
        const double dt = last.t - prev.t;
        out.lon = last.lon + (last.lon - prev.lon) / dt * horizon_s;
        out.lat = last.lat + (last.lat - prev.lat) / dt * horizon_s;
    }
    return out;
}

TimestampedPoint predict_location(const Trajectory& traj, double horizon_s, const GruParams& p,
                                  const NormStats& stats, int window_len) {
    if (static_cast<int>(traj.points.size()) < window_len + 1) {
        return constant_velocity_predict(traj, horizon_s);
    }
    Trajectory window{traj.object_id,
                      {traj.points.end() - (window_len + 1), traj.points.end()}};
    const FeatureSeq seq = featurize(window, horizon_s);
    const Eigen::Vector2d disp = forward(seq, p, stats);
    const auto& last = traj.points.back();
    return TimestampedPoint{traj.object_id, last.lon + disp(0), last.lat + disp(1),
                            last.t + horizon_s};
}

std::vector<TrainingSample> make_training_set(const std::vector<Trajectory>& aligned,
                                              int window_len, double horizon_s) {
    std::vector<TrainingSample> out;
    for (const auto& traj : aligned) {
        if (traj.points.size() < 2) continue;
        const double rate = traj.points[1].t - traj.points[0].t;
        if (!(rate > 0.0)) continue;
        const double stride_f = horizon_s / rate;
        const auto stride = static_cast<std::size_t>(std::llround(stride_f));
        if (stride < 1 || std::abs(stride_f - static_cast<double>(stride)) > 1e-9) continue;
        const std::size_t n = traj.points.size();
        for (std::size_t i = 0; i + static_cast<std::size_t>(window_len) + stride < n; ++i) {
            const std::size_t end = i + static_cast<std::size_t>(window_len);
            const std::size_t tgt = end + stride;
            TrainingSample s;
            s.seq.reserve(static_cast<std::size_t>(window_len));
            for (std::size_t j = i + 1; j <= end; ++j) {
                const auto& a = traj.points[j - 1];
                const auto& b = traj.points[j];
                s.seq.push_back(FeatureVector{b.lon - a.lon, b.lat - a.lat, b.t - a.t, horizon_s});
            }
            s.target = Eigen::Vector2d(traj.points[tgt].lon - traj.points[end].lon,
                                       traj.points[tgt].lat - traj.points[end].lat);
            out.push_back(std::move(s));
        }
    }
    return out;
}

namespace {

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_vector_line(std::ofstream& out, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out << (i ? " " : "") << fmt17(v(i));
    }
    out << '\n';
}

}  // namespace

void save_model(const std::string& path, const Model& m) {
    m.params.check_shapes();
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open model file for writing: " + path);
    }
    out << "comove-gru v1\n";
    out << "hidden " << m.params.hidden() << "\n";
    out << "dense " << m.params.dense() << "\n";
    out << "window " << m.window_len << "\n";
    auto stat_line = [&](const char* name, const auto& v) {
        out << name;
        for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << fmt17(v(i));
        out << '\n';
    };
    stat_line("in_mean", m.stats.in_mean);
    stat_line("in_std", m.stats.in_std);
    stat_line("out_mean", m.stats.out_mean);
    stat_line("out_std", m.stats.out_std);
    auto mats = const_cast<Model&>(m).params.matrices();
    for (std::size_t i = 0; i < mats.size(); ++i) {
        out << "mat " << GruParams::matrix_names()[i] << ' ' << mats[i]->rows() << ' '
            << mats[i]->cols() << '\n';
        for (Eigen::Index r = 0; r < mats[i]->rows(); ++r) {
            write_vector_line(out, mats[i]->row(r).transpose());
        }
    }
    auto vecs = const_cast<Model&>(m).params.vectors();
    for (std::size_t i = 0; i < vecs.size(); ++i) {
        out << "vec " << GruParams::vector_names()[i] << ' ' << vecs[i]->size() << '\n';
        write_vector_line(out, *vecs[i]);
    }
    out << "end\n";
    if (!out) {
        throw std::runtime_error("write failure on model file: " + path);
    }
}

Model load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open model file: " + path);
    }
    auto fail = [&](const std::string& why) -> Model {
        throw std::runtime_error("malformed model file " + path + ": " + why);
    };
    std::string line;
    if (!std::getline(in, line) || line != "comove-gru v1") return fail("bad magic");
    auto read_kv = [&](const std::string& key) {
        std::string word;
        int value = 0;
        in >> word >> value;
        if (word != key || value <= 0) fail("expected " + key);
        return value;
    };
    const int hidden = read_kv("hidden");
    const int dense = read_kv("dense");
    Model m;
    m.window_len = read_kv("window");
    m.params = GruParams::zeros(hidden, dense);
    auto read_stat = [&](const std::string& key, auto& v) {
        std::string word;
        in >> word;
        if (word != key) fail("expected " + key);
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (!(in >> v(i))) fail("truncated " + key);
        }
    };
    read_stat("in_mean", m.stats.in_mean);
    read_stat("in_std", m.stats.in_std);
    read_stat("out_mean", m.stats.out_mean);
    read_stat("out_std", m.stats.out_std);
    auto mats = m.params.matrices();
    for (std::size_t i = 0; i < mats.size(); ++i) {
        std::string tag, name;
        Eigen::Index rows = 0, cols = 0;
        in >> tag >> name >> rows >> cols;
        if (tag != "mat" || name != GruParams::matrix_names()[i] || rows != mats[i]->rows() ||
            cols != mats[i]->cols()) {
            fail("bad matrix header for " + GruParams::matrix_names()[i]);
        }
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                if (!(in >> (*mats[i])(r, c))) fail("truncated matrix " + name);
            }
        }
    }
    auto vecs = m.params.vectors();
    for (std::size_t i = 0; i < vecs.size(); ++i) {
        std::string tag, name;
        Eigen::Index size = 0;
        in >> tag >> name >> size;
        if (tag != "vec" || name != GruParams::vector_names()[i] || size != vecs[i]->size()) {
            fail("bad vector header for " + GruParams::vector_names()[i]);
        }
        for (Eigen::Index r = 0; r < size; ++r) {
            if (!(in >> (*vecs[i])(r))) fail("truncated vector " + name);
        }
    }
    std::string tag;
    in >> tag;
    if (tag != "end") fail("missing end marker");
    m.params.check_shapes();
    for (auto* mat : m.params.matrices()) {
        if (!mat->allFinite()) fail("non-finite parameter block");
    }
    for (auto* vec : m.params.vectors()) {
        if (!vec->allFinite()) fail("non-finite parameter block");
    }
    return m;
}

}  // namespace comove
