#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "comove/geo.hpp"

namespace comove {

// One input step: spatial/temporal deltas between consecutive aligned points
// plus the prediction horizon.
struct FeatureVector {
    double d_lon = 0.0;    // degrees
    double d_lat = 0.0;    // degrees
    double d_t = 0.0;      // seconds, > 0
    double horizon = 0.0;  // seconds, > 0
};

inline constexpr int kInputSize = 4;
inline constexpr int kOutputSize = 2;

// Gate update rules, with * elementwise:
//   z_k = sigmoid(W_pz x_k + W_hz h_{k-1} + b_z)
//   r_k = sigmoid(W_pr x_k + W_hr h_{k-1} + b_r)
//   hcand_k = tanh(W_ph x_k + W_hh (r_k * h_{k-1}) + b_h)
//   h_k = z_k * h_{k-1} + (1 - z_k) * hcand_k
// followed by a tanh dense layer and a linear two-unit output.
struct GruParams {
    Eigen::MatrixXd w_pz, w_pr, w_ph;  // hidden x input
    Eigen::MatrixXd w_hz, w_hr, w_hh;  // hidden x hidden
    Eigen::VectorXd b_z, b_r, b_h;     // hidden
    Eigen::MatrixXd w_dense;           // dense x hidden
    Eigen::VectorXd b_dense;           // dense
    Eigen::MatrixXd w_out;             // 2 x dense
    Eigen::VectorXd b_out;             // 2

    int hidden() const { return static_cast<int>(b_z.size()); }
    int dense() const { return static_cast<int>(b_dense.size()); }

    void check_shapes() const;  // throws std::invalid_argument on mismatch
    static GruParams zeros(int hidden, int dense);

    // Per-block access in a fixed order, for optimisers and serialisation.
    std::vector<Eigen::MatrixXd*> matrices();
    std::vector<Eigen::VectorXd*> vectors();
    static const std::vector<std::string>& matrix_names();
    static const std::vector<std::string>& vector_names();
};

// Per-feature affine scaling fitted on the training set only.
struct NormStats {
    Eigen::Vector4d in_mean = Eigen::Vector4d::Zero();
    Eigen::Vector4d in_std = Eigen::Vector4d::Ones();  // 1 where variance was zero
    Eigen::Vector2d out_mean = Eigen::Vector2d::Zero();
    Eigen::Vector2d out_std = Eigen::Vector2d::Ones();
};

struct PredictorConfig {
    int hidden_size = 150;
    int dense_size = 50;
    int window_len = 8;  // buffered aligned steps per object
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    int epochs = 100;
    int batch_size = 32;
    std::uint64_t rng_seed = 42;

    void validate() const;
};

using FeatureSeq = std::vector<FeatureVector>;

struct TrainingSample {
    FeatureSeq seq;
    Eigen::Vector2d target = Eigen::Vector2d::Zero();  // displacement over horizon, degrees
};

// One FeatureVector per consecutive point pair; throws std::invalid_argument
// ("insufficient history") below two points.
FeatureSeq featurize(const Trajectory& traj, double horizon_s);

NormStats fit_norm_stats(const std::vector<TrainingSample>& samples);
Eigen::Vector4d normalize_feature(const FeatureVector& f, const NormStats& s);
FeatureSeq normalize_features(const FeatureSeq& seq, const NormStats& s);
Eigen::Vector2d normalize_output(const Eigen::Vector2d& disp, const NormStats& s);
Eigen::Vector2d denormalize_output(const Eigen::Vector2d& disp, const NormStats& s);

// Single recurrent step on a normalized input.
Eigen::VectorXd gru_cell_step(const Eigen::Vector4d& x, const Eigen::VectorXd& h_prev,
                              const GruParams& p);

// Full pass over a raw (unnormalized) sequence from h_0 = 0; returns the
// predicted displacement in degrees. Throws on an empty sequence.
Eigen::Vector2d forward(const FeatureSeq& seq, const GruParams& p, const NormStats& stats);

// Everything backprop needs from one forward pass (normalized inputs).
struct ForwardCache {
    std::vector<Eigen::Vector4d> x;
    std::vector<Eigen::VectorXd> h;  // h[0] = h_0 = 0, h[k] after step k
    std::vector<Eigen::VectorXd> z, r, hcand;
    Eigen::VectorXd dense_act;       // tanh output of the dense layer
    Eigen::Vector2d y = Eigen::Vector2d::Zero();  // normalized output
};

ForwardCache forward_cached(const FeatureSeq& seq, const GruParams& p, const NormStats& stats);

struct Gradients {
    GruParams g;  // same shapes as the parameters

    explicit Gradients(const GruParams& like);
    void add_scaled(const Gradients& other, double s);
    void scale(double s);
};

// Sample loss 0.5 * |y - target|^2 in normalized output space; gradients for
// every parameter block are accumulated into grads.
double backward(const ForwardCache& cache, const Eigen::Vector2d& target_norm, const GruParams& p,
                Gradients& grads);

struct TrainResult {
    GruParams params;
    NormStats stats;
    std::vector<double> loss_history;  // per-epoch mean sample loss
};

// Mini-batch BPTT with Adam. Deterministic under cfg.rng_seed (owned
// initialisation and shuffling; no library RNG distributions involved).
// Throws std::invalid_argument on an empty dataset and std::runtime_error
// naming the epoch when the loss turns non-finite.
TrainResult train_bptt(const std::vector<TrainingSample>& dataset, const PredictorConfig& cfg);

// Extrapolate with the velocity of the last two points; a single point is
// returned shifted in time only. Throws on an empty trajectory.
TimestampedPoint constant_velocity_predict(const Trajectory& traj, double horizon_s);

// GRU prediction from the last window_len steps; histories shorter than
// window_len + 1 points fall back to constant velocity.
TimestampedPoint predict_location(const Trajectory& traj, double horizon_s, const GruParams& p,
                                  const NormStats& stats, int window_len);

// Sliding-window training pairs from aligned trajectories: the target is the
// displacement between the window's last point and the point horizon_s later
// (when that point exists in the same trajectory).
std::vector<TrainingSample> make_training_set(const std::vector<Trajectory>& aligned,
                                              int window_len, double horizon_s);

struct Model {
    GruParams params;
    NormStats stats;
    int window_len = 8;
};

// Text format, exact round-trip (see FORMATS.md).
void save_model(const std::string& path, const Model& m);
Model load_model(const std::string& path);

}  // namespace comove
