#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "comove/evaluation.hpp"
#include "comove/evolving_clusters.hpp"
#include "comove/flp.hpp"
#include "comove/message_log.hpp"
#include "comove/stats.hpp"

namespace comove {

enum class PredictorKind { ConstantVelocity, Gru };

struct PipelineConfig {
    double delta_t_s = 300.0;    // lookahead; positive multiple of align_rate
    double align_rate_s = 60.0;  // shared grid step
    double gap_dt_s = 1800.0;    // watermark for closing slices / interpolation gap
    DetectionParams detect;      // grid_step_s is overwritten with align_rate
    PredictorKind predictor = PredictorKind::ConstantVelocity;
    std::string model_path;      // required for the GRU predictor
    int window_len = 8;          // GRU input window (overridden by the model file)
    SimWeights weights;
    double speed = 0.0;          // replay multiplier; <= 0 means "max"
    std::size_t log_capacity = 65536;
    std::optional<double> epoch;  // grid origin; default: stream start, whole minute

    void validate() const;
};

struct ConsumerMetrics {
    std::string name;
    std::size_t records = 0;
    double wall_seconds = 0.0;
    double overall_rate = 0.0;  // records per second over the whole run
    DistStats record_lag;       // sampled after every consumed record
    std::size_t final_lag = 0;
    DistStats rate_windows;     // per-1-second-window consumption rates
};

struct PipelineMetrics {
    std::size_t produced = 0;
    std::size_t malformed = 0;
    double wall_seconds = 0.0;
    std::vector<ConsumerMetrics> consumers;  // {flp, detection}
};

struct RunResult {
    std::vector<EvolvingCluster> actual;
    std::vector<EvolvingCluster> predicted;
    MatchReport report;    // predicted vs. actual over the predicted window
    MatchSummary summary;
    PipelineMetrics metrics;
    PositionStore actual_positions;
    PositionStore predicted_positions;
    double predicted_window_start = 0.0;
    double predicted_window_end = 0.0;
    bool has_predicted_window = false;
};

// Test surface: position lookup that plays back the true future, plus an
// optional full replacement for the predicted slice stream.
using IdentityOracle = std::function<std::optional<LonLat>(const std::string&, double)>;

struct PipelineHooks {
    IdentityOracle identity;                   // overrides the configured predictor
    std::vector<TimeSlice> predicted_override;  // injected predicted slices
    bool use_predicted_override = false;
};

// Timestamp-ordered replay of raw records. With a positive speed multiplier,
// next() sleeps so that data gaps shrink by that factor; otherwise records
// are handed out as fast as they are pulled.
class StreamReplayer {
  public:
    StreamReplayer(std::vector<TimestampedPoint> records, double speed);
    std::optional<StreamRecord> next();
    std::size_t size() const { return records_.size(); }

  private:
    std::vector<TimestampedPoint> records_;
    std::size_t pos_ = 0;
    double speed_;
    double wall_start_ = 0.0;
    double data_start_ = 0.0;
};

double wall_clock_s();

// Deterministic sort used everywhere a raw record stream is ordered.
void sort_records(std::vector<TimestampedPoint>& records);

// True-position oracle over the aligned input data; beyond an object's last
// aligned point it extrapolates linearly from the final two points.
IdentityOracle make_identity_oracle(const std::vector<TimestampedPoint>& records,
                                    double align_rate_s, double epoch, double gap_dt_s);

// Full online run: replay, per-object buffering and alignment, prediction at
// the lookahead, dual detection (actual and predicted streams), matching and
// timeliness metrics.
RunResult run_online(const PipelineConfig& cfg, std::vector<TimestampedPoint> records,
                     const PipelineHooks* hooks = nullptr);

struct CsvRunResult {
    RunResult run;
    std::size_t malformed = 0;
};

CsvRunResult run_online_csv(const PipelineConfig& cfg, const std::string& csv_path,
                            const PipelineHooks* hooks = nullptr);

}  // namespace comove
