#include "comove/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <memory>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "comove/csv.hpp"
#include "comove/preprocess.hpp"

namespace comove {

double wall_clock_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

void PipelineConfig::validate() const {
    if (!(align_rate_s > 0.0) || !(gap_dt_s > 0.0)) {
        throw std::invalid_argument("align rate and gap threshold must be positive");
    }
    const double steps = delta_t_s / align_rate_s;
    const auto n = static_cast<long long>(std::llround(steps));
    if (n < 1 || std::abs(steps - static_cast<double>(n)) > 1e-9) {
        throw std::invalid_argument("delta_t must be a positive multiple of align_rate");
    }
    DetectionParams dp = detect;
    dp.grid_step_s = align_rate_s;
    dp.validate();
    weights.validate();
    if (log_capacity == 0) {
        throw std::invalid_argument("message log capacity must be positive");
    }
    if (window_len <= 0) {
        throw std::invalid_argument("window length must be positive");
    }
}

void sort_records(std::vector<TimestampedPoint>& records) {
    std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        if (a.t != b.t) return a.t < b.t;
        if (a.object_id != b.object_id) return a.object_id < b.object_id;
        if (a.lon != b.lon) return a.lon < b.lon;
        return a.lat < b.lat;
    });
}

StreamReplayer::StreamReplayer(std::vector<TimestampedPoint> records, double speed)
    : records_(std::move(records)), speed_(speed) {
    sort_records(records_);
    if (!records_.empty()) {
        data_start_ = records_.front().t;
    }
}

std::optional<StreamRecord> StreamReplayer::next() {
    if (pos_ >= records_.size()) {
        return std::nullopt;
    }
    const TimestampedPoint& p = records_[pos_++];
    if (speed_ > 0.0) {
        if (wall_start_ == 0.0) {
            wall_start_ = wall_clock_s();
        }
        const double due = wall_start_ + (p.t - data_start_) / speed_;
        const double now = wall_clock_s();
        if (due > now) {
            std::this_thread::sleep_for(std::chrono::duration<double>(due - now));
        }
    }
    return StreamRecord{p, wall_clock_s()};
}

namespace {

// Resamples one object's raw points onto the shared grid, incrementally.
// Matches align_linear applied per gap-free segment.
class OnlineAligner {
  public:
    OnlineAligner(double rate, double epoch, double gap)
        : rate_(rate), epoch_(epoch), gap_(gap) {}

    std::vector<TimestampedPoint> feed(const TimestampedPoint& p) {
        std::vector<TimestampedPoint> out;
        auto& s = state_[p.object_id];
        if (s.has) {
            if (!(p.t > s.prev.t)) {
                return out;  // stale or duplicate record
            }
            if (p.t - s.prev.t <= gap_) {
                double k = std::ceil((s.prev.t - epoch_) / rate_);
                for (double tg = epoch_ + k * rate_; tg <= p.t; tg = epoch_ + (++k) * rate_) {
                    if (tg < s.prev.t || tg <= s.last_grid) {
                        continue;
                    }
                    const double u = (tg - s.prev.t) / (p.t - s.prev.t);
                    out.push_back(TimestampedPoint{p.object_id,
                                                   s.prev.lon + u * (p.lon - s.prev.lon),
                                                   s.prev.lat + u * (p.lat - s.prev.lat), tg});
                    s.last_grid = tg;
                }
            }
        }
        s.prev = p;
        s.has = true;
        return out;
    }

  private:
    struct ObjectState {
        TimestampedPoint prev;
        bool has = false;
        double last_grid = -1e300;
    };

    double rate_, epoch_, gap_;
    std::unordered_map<std::string, ObjectState> state_;
};

// Orders aligned points into grid timeslices; a slice closes once the
// stream clock passes it by the gap threshold (no interpolation can still
// land on it after that).
class SliceAssembler {
  public:
    explicit SliceAssembler(double gap) : gap_(gap) {}

    void add(const TimestampedPoint& p) { buckets_[p.t][p.object_id] = LonLat{p.lon, p.lat}; }

    template <typename F>
    void pop_closed(double stream_t, F&& sink) {
        while (!buckets_.empty() && buckets_.begin()->first + gap_ < stream_t) {
            emit_front(sink);
        }
    }

    template <typename F>
    void finalize(F&& sink) {
        while (!buckets_.empty()) {
            emit_front(sink);
        }
    }

  private:
    template <typename F>
    void emit_front(F&& sink) {
        auto it = buckets_.begin();
        TimeSlice ts{it->first, std::move(it->second)};
        buckets_.erase(it);
        sink(ts);
    }

    double gap_;
    std::map<double, std::map<std::string, LonLat>> buckets_;
};

struct MetricsCollector {
    std::string name;
    double start_wall = 0.0;
    double last_wall = 0.0;
    std::vector<double> lag_samples;
    std::vector<std::size_t> window_counts;
    std::size_t records = 0;

    void on_consume(double now, std::size_t lag) {
        if (records == 0) {
            start_wall = now;
        }
        last_wall = now;
        ++records;
        lag_samples.push_back(static_cast<double>(lag));
        const auto w = static_cast<std::size_t>(std::max(0.0, now - start_wall));
        if (window_counts.size() <= w) {
            window_counts.resize(w + 1, 0);
        }
        ++window_counts[w];
    }

    ConsumerMetrics finish(std::size_t final_lag) const {
        ConsumerMetrics m;
        m.name = name;
        m.records = records;
        m.final_lag = final_lag;
        m.wall_seconds = records ? std::max(1e-9, last_wall - start_wall) : 0.0;
        m.overall_rate = records ? static_cast<double>(records) / m.wall_seconds : 0.0;
        m.record_lag = order_stats(lag_samples);
        std::vector<double> rates(window_counts.begin(), window_counts.end());
        m.rate_windows = order_stats(rates);
        return m;
    }
};

// Consumer 1: actual-stream detection.
class DetectionConsumer {
  public:
    DetectionConsumer(const PipelineConfig& cfg, double epoch)
        : aligner_(cfg.align_rate_s, epoch, cfg.gap_dt_s),
          assembler_(cfg.gap_dt_s),
          detector_(make_params(cfg)) {}

    static DetectionParams make_params(const PipelineConfig& cfg) {
        DetectionParams p = cfg.detect;
        p.grid_step_s = cfg.align_rate_s;
        return p;
    }

    void consume(const StreamRecord& rec) {
        for (const auto& ap : aligner_.feed(rec.point)) {
            assembler_.add(ap);
        }
        assembler_.pop_closed(rec.point.t, [&](const TimeSlice& ts) { on_slice(ts); });
    }

    void finish() {
        assembler_.finalize([&](const TimeSlice& ts) { on_slice(ts); });
        auto tail = detector_.flush();
        clusters_.insert(clusters_.end(), tail.begin(), tail.end());
    }

    std::vector<EvolvingCluster> clusters_;
    PositionStore positions_;

  private:
    void on_slice(const TimeSlice& ts) {
        positions_.add_slice(ts);
        auto emitted = detector_.step(ts);
        clusters_.insert(clusters_.end(), emitted.begin(), emitted.end());
    }

    OnlineAligner aligner_;
    SliceAssembler assembler_;
    ClusterDetector detector_;
};

// Consumer 2: future-location prediction feeding the predicted-stream
// detector. Each closed slice triggers one prediction per present object at
// now + delta_t; the segment from the object's current position to the
// predicted one is interpolated onto the grid slices in (now, now + delta_t]
// and written once per (slice, object) - the earliest prediction covering a
// slice is the full-horizon one and wins.
class PredictionConsumer {
  public:
    PredictionConsumer(const PipelineConfig& cfg, double epoch, const PipelineHooks* hooks)
        : cfg_(cfg),
          aligner_(cfg.align_rate_s, epoch, cfg.gap_dt_s),
          assembler_(cfg.gap_dt_s),
          detector_(DetectionConsumer::make_params(cfg)),
          hooks_(hooks) {
        if (hooks_ && hooks_->use_predicted_override) {
            override_mode_ = true;
        } else if (hooks_ && hooks_->identity) {
            identity_ = hooks_->identity;
        } else if (cfg.predictor == PredictorKind::Gru) {
            if (cfg.model_path.empty()) {
                throw std::invalid_argument("GRU predictor selected but no model file given");
            }
            model_ = load_model(cfg.model_path);
        }
    }

    void consume(const StreamRecord& rec) {
        if (override_mode_) {
            return;
        }
        for (const auto& ap : aligner_.feed(rec.point)) {
            assembler_.add(ap);
        }
        assembler_.pop_closed(rec.point.t, [&](const TimeSlice& ts) { on_slice(ts); });
    }

    void finish() {
        if (override_mode_) {
            for (const auto& ts : hooks_->predicted_override) {
                step_predicted(ts);
            }
        } else {
            assembler_.finalize([&](const TimeSlice& ts) { on_slice(ts); });
            if (have_event_) {
                drain_until(last_event_t_ + cfg_.delta_t_s);
            }
        }
        auto tail = detector_.flush();
        clusters_.insert(clusters_.end(), tail.begin(), tail.end());
    }

    std::vector<EvolvingCluster> clusters_;
    PositionStore positions_;
    double window_start = 0.0;
    double window_end = 0.0;
    bool has_window = false;

  private:
    void on_slice(const TimeSlice& ts) {
        const double rate = cfg_.align_rate_s;
        for (const auto& [id, pos] : ts.positions) {
            auto& hist = history_[id];
            hist.push_back(TimestampedPoint{id, pos.lon, pos.lat, ts.t});
            const std::size_t keep = static_cast<std::size_t>(window_len()) + 1;
            if (hist.size() > keep) {
                hist.erase(hist.begin(), hist.end() - static_cast<long>(keep));
            }
            const auto target = predict(id, pos, ts.t);
            if (!target) {
                continue;
            }
            const auto steps = static_cast<long long>(std::llround(cfg_.delta_t_s / rate));
            for (long long gi = 1; gi <= steps; ++gi) {
                const double tau = ts.t + static_cast<double>(gi) * rate;
                const double u = static_cast<double>(gi) / static_cast<double>(steps);
                const LonLat sample{pos.lon + u * (target->lon - pos.lon),
                                    pos.lat + u * (target->lat - pos.lat)};
                buckets_[tau].try_emplace(id, sample);
            }
        }
        if (!have_event_) {
            have_event_ = true;
            last_stepped_t_ = ts.t;  // predicted stream starts one step later
        }
        last_event_t_ = ts.t;
        drain_until(ts.t + rate);
    }

    int window_len() const { return model_ ? model_->window_len : cfg_.window_len; }

    std::optional<LonLat> predict(const std::string& id, const LonLat& at, double now) {
        if (identity_) {
            return identity_(id, now + cfg_.delta_t_s);
        }
        const auto& hist = history_[id];
        (void)at;
        if (model_ && static_cast<int>(hist.size()) >= model_->window_len + 1) {
            const Trajectory traj{id, hist};
            const TimestampedPoint p = predict_location(traj, cfg_.delta_t_s, model_->params,
                                                        model_->stats, model_->window_len);
            if (!valid_coordinates(p.lon, p.lat)) {
                return std::nullopt;  // implausible prediction, skip the sample
            }
            return LonLat{p.lon, p.lat};
        }
        if (hist.size() >= 2) {
            const Trajectory traj{id, hist};
            const TimestampedPoint p = constant_velocity_predict(traj, cfg_.delta_t_s);
            if (!valid_coordinates(p.lon, p.lat)) {
                return std::nullopt;
            }
            return LonLat{p.lon, p.lat};
        }
        return std::nullopt;
    }

    void drain_until(double target_t) {
        const double rate = cfg_.align_rate_s;
        const double base = last_stepped_t_;
        const auto steps = static_cast<long long>(std::llround((target_t - base) / rate));
        for (long long k = 1; k <= steps; ++k) {
            const double tau = base + static_cast<double>(k) * rate;
            TimeSlice ts;
            ts.t = tau;
            auto it = buckets_.find(tau);
            if (it != buckets_.end()) {
                ts.positions = std::move(it->second);
                buckets_.erase(it);
            }
            // Stale buckets strictly before tau can no longer be stepped.
            buckets_.erase(buckets_.begin(), buckets_.lower_bound(tau));
            step_predicted(ts);
            last_stepped_t_ = tau;
        }
    }

    void step_predicted(const TimeSlice& ts) {
        positions_.add_slice(ts);
        if (!has_window) {
            window_start = ts.t;
            has_window = true;
        }
        window_end = ts.t;
        auto emitted = detector_.step(ts);
        clusters_.insert(clusters_.end(), emitted.begin(), emitted.end());
    }

    PipelineConfig cfg_;
    OnlineAligner aligner_;
    SliceAssembler assembler_;
    ClusterDetector detector_;
    const PipelineHooks* hooks_;
    bool override_mode_ = false;
    IdentityOracle identity_;
    std::optional<Model> model_;
    std::unordered_map<std::string, std::vector<TimestampedPoint>> history_;
    std::map<double, std::map<std::string, LonLat>> buckets_;
    bool have_event_ = false;
    double last_event_t_ = 0.0;
    double last_stepped_t_ = 0.0;
};

}  // namespace

IdentityOracle make_identity_oracle(const std::vector<TimestampedPoint>& records,
                                    double align_rate_s, double epoch, double gap_dt_s) {
    std::vector<TimestampedPoint> sorted(records);
    sort_records(sorted);
    auto aligned = std::make_shared<std::unordered_map<std::string, std::vector<TimestampedPoint>>>();
    for (const auto& traj : group_by_object(sorted)) {
        auto& dst = (*aligned)[traj.object_id];
        for (const auto& seg : segment_by_gap(traj, gap_dt_s)) {
            const Trajectory a = align_linear(seg, align_rate_s, epoch);
            dst.insert(dst.end(), a.points.begin(), a.points.end());
        }
    }
    return [aligned](const std::string& id, double t) -> std::optional<LonLat> {
        auto it = aligned->find(id);
        if (it == aligned->end() || it->second.empty()) {
            return std::nullopt;
        }
        const auto& pts = it->second;
        auto jt = std::lower_bound(pts.begin(), pts.end(), t,
                                   [](const TimestampedPoint& p, double v) { return p.t < v; });
        if (jt != pts.end() && std::abs(jt->t - t) < 1e-6) {
            return LonLat{jt->lon, jt->lat};
        }
        if (t > pts.back().t && pts.size() >= 2) {
            const auto& a = pts[pts.size() - 2];
            const auto& b = pts.back();
            const double u = (t - a.t) / (b.t - a.t);
            return LonLat{a.lon + u * (b.lon - a.lon), a.lat + u * (b.lat - a.lat)};
        }
        return std::nullopt;
    };
}

namespace {

struct ConsumerRig {
    DetectionConsumer* detection;
    PredictionConsumer* prediction;
    MetricsCollector* flp_metrics;
    MetricsCollector* det_metrics;
    MessageLog* log;

    void consume_one(int consumer, const StreamRecord& rec) {
        if (consumer == 0) {
            prediction->consume(rec);
            flp_metrics->on_consume(wall_clock_s(), log->lag(0));
        } else {
            detection->consume(rec);
            det_metrics->on_consume(wall_clock_s(), log->lag(1));
        }
    }
};

}  // namespace

RunResult run_online(const PipelineConfig& cfg, std::vector<TimestampedPoint> records,
                     const PipelineHooks* hooks) {
    cfg.validate();
    sort_records(records);
    const double epoch =
        cfg.epoch ? *cfg.epoch : (records.empty() ? 0.0 : default_epoch(records.front().t));

    DetectionConsumer detection(cfg, epoch);
    PredictionConsumer prediction(cfg, epoch, hooks);
    MessageLog log(cfg.log_capacity, 2);
    MetricsCollector flp_metrics;
    flp_metrics.name = "flp";
    MetricsCollector det_metrics;
    det_metrics.name = "detection";
    ConsumerRig rig{&detection, &prediction, &flp_metrics, &det_metrics, &log};

    const double run_start = wall_clock_s();
    StreamReplayer replayer(records, cfg.speed);

    if (cfg.speed > 0.0) {
        // Paced producer thread; consumers drain in lockstep on this thread.
        std::thread producer([&] {
            while (auto rec = replayer.next()) {
                if (!log.push(std::move(*rec), true)) {
                    break;
                }
            }
            log.close();
        });
        bool open0 = true, open1 = true;
        while (open0 || open1) {
            if (open0) {
                auto rec = log.pop(0, true);
                if (rec) {
                    rig.consume_one(0, *rec);
                } else {
                    open0 = false;
                }
            }
            if (open1) {
                auto rec = log.pop(1, true);
                if (rec) {
                    rig.consume_one(1, *rec);
                } else {
                    open1 = false;
                }
            }
        }
        producer.join();
    } else {
        // "max" speed: single-threaded pump, one record in, both consumers on.
        while (auto rec = replayer.next()) {
            if (!log.push(std::move(*rec), false)) {
                throw std::runtime_error("message log overflow in single-threaded pump");
            }
            auto r0 = log.pop(0, false);
            rig.consume_one(0, *r0);
            auto r1 = log.pop(1, false);
            rig.consume_one(1, *r1);
        }
        log.close();
    }

    detection.finish();
    prediction.finish();

    RunResult result;
    result.actual = std::move(detection.clusters_);
    result.predicted = std::move(prediction.clusters_);
    std::sort(result.actual.begin(), result.actual.end(), cluster_order);
    std::sort(result.predicted.begin(), result.predicted.end(), cluster_order);
    result.actual_positions = std::move(detection.positions_);
    result.predicted_positions = std::move(prediction.positions_);
    result.has_predicted_window = prediction.has_window;
    result.predicted_window_start = prediction.window_start;
    result.predicted_window_end = prediction.window_end;

    // Matching horizon: actual clusters whose lifetime never intersects the
    // predicted window stay out of the report.
    std::vector<EvolvingCluster> actual_in_window;
    for (const auto& c : result.actual) {
        if (result.has_predicted_window && c.t_end >= result.predicted_window_start &&
            c.t_start <= result.predicted_window_end) {
            actual_in_window.push_back(c);
        }
    }
    result.report =
        cluster_matching(result.predicted, actual_in_window, cfg.weights,
                         result.predicted_positions, result.actual_positions, cfg.align_rate_s);
    result.summary = summarize(result.report);

    result.metrics.produced = log.produced();
    result.metrics.wall_seconds = wall_clock_s() - run_start;
    result.metrics.consumers.push_back(flp_metrics.finish(log.lag(0)));
    result.metrics.consumers.push_back(det_metrics.finish(log.lag(1)));
    return result;
}

CsvRunResult run_online_csv(const PipelineConfig& cfg, const std::string& csv_path,
                            const PipelineHooks* hooks) {
    CsvReadResult input = read_points_csv(csv_path);
    CsvRunResult out{run_online(cfg, std::move(input.records), hooks), input.malformed};
    out.run.metrics.malformed = input.malformed;
    return out;
}

}  // namespace comove
