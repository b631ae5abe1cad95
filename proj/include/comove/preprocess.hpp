#pragma once

#include <vector>

#include "comove/geo.hpp"

namespace comove {

struct PreprocessConfig {
    double speed_max_kn = 50.0;  // drop records implying faster movement
    double gap_dt_s = 1800.0;    // split trajectories on larger time gaps
    double stop_speed_kn = 0.5;  // drop near-stationary records
    double align_rate_s = 60.0;  // shared resampling grid step

    // Throws std::invalid_argument on non-positive fields or
    // stop_speed >= speed_max.
    void validate() const;
};

// Speed implied by moving from a to b, in knots. b.t must exceed a.t.
double speed_between_kn(const TimestampedPoint& a, const TimestampedPoint& b);

// Greedy forward scan: drop any point whose speed from the last kept point
// exceeds speed_max_kn. The first point is always kept.
Trajectory filter_speed_outliers(const Trajectory& traj, double speed_max_kn);

// Drop points whose speed from the previous kept point is below stop_speed_kn.
Trajectory remove_stop_points(const Trajectory& traj, double stop_speed_kn);

// Split wherever the time difference between consecutive points exceeds
// gap_dt_s. Concatenating the result reproduces the input.
std::vector<Trajectory> segment_by_gap(const Trajectory& traj, double gap_dt_s);

// Resample onto the grid {epoch + k * rate} restricted to [t_first, t_last],
// interpolating lon and lat independently between the bracketing raw points.
// Fewer than two input points yield an empty trajectory; no extrapolation.
Trajectory align_linear(const Trajectory& traj, double align_rate_s, double epoch);

// Stream epoch convention: start-of-stream truncated to a whole minute.
double default_epoch(double stream_start_t);

// Full cleansing chain for one raw trajectory: speed filter, stop removal,
// gap segmentation, then per-segment alignment. Empty segments are dropped.
std::vector<Trajectory> preprocess_trajectory(const Trajectory& raw, const PreprocessConfig& cfg,
                                              double epoch);

// Group time-sorted records into one raw trajectory per object (order of
// first appearance). Non-increasing duplicates within an object are dropped.
std::vector<Trajectory> group_by_object(const std::vector<TimestampedPoint>& records);

}  // namespace comove
