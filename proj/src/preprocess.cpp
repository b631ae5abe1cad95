#include "comove/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace comove {

void PreprocessConfig::validate() const {
    if (!(speed_max_kn > 0.0) || !(gap_dt_s > 0.0) || !(stop_speed_kn > 0.0) ||
        !(align_rate_s > 0.0)) {
        throw std::invalid_argument("preprocess thresholds must be positive");
    }
    if (!(stop_speed_kn < speed_max_kn)) {
        throw std::invalid_argument("stop_speed must be below speed_max");
    }
}

double speed_between_kn(const TimestampedPoint& a, const TimestampedPoint& b) {
    const double dt = b.t - a.t;
    if (!(dt > 0.0)) {
        throw std::invalid_argument("speed_between_kn requires increasing timestamps");
    }
    return haversine_m(a, b) / dt / kKnotMs;
}

Trajectory filter_speed_outliers(const Trajectory& traj, double speed_max_kn) {
    Trajectory out{traj.object_id, {}};
    out.points.reserve(traj.points.size());
    for (const auto& p : traj.points) {
        if (out.points.empty() || speed_between_kn(out.points.back(), p) <= speed_max_kn) {
            out.points.push_back(p);
        }
    }
    return out;
}

Trajectory remove_stop_points(const Trajectory& traj, double stop_speed_kn) {
    Trajectory out{traj.object_id, {}};
    out.points.reserve(traj.points.size());
    for (const auto& p : traj.points) {
        if (out.points.empty() || speed_between_kn(out.points.back(), p) >= stop_speed_kn) {
            out.points.push_back(p);
        }
    }
    return out;
}

std::vector<Trajectory> segment_by_gap(const Trajectory& traj, double gap_dt_s) {
    std::vector<Trajectory> out;
    for (const auto& p : traj.points) {
        if (out.empty() || p.t - out.back().points.back().t > gap_dt_s) {
            out.push_back(Trajectory{traj.object_id, {}});
        }
        out.back().points.push_back(p);
    }
    return out;
}

Trajectory align_linear(const Trajectory& traj, double align_rate_s, double epoch) {
    if (!(align_rate_s > 0.0)) {
        throw std::invalid_argument("align rate must be positive");
    }
    Trajectory out{traj.object_id, {}};
    if (traj.points.size() < 2) {
        return out;
    }
    const double t_first = traj.points.front().t;
    const double t_last = traj.points.back().t;
    double k = std::ceil((t_first - epoch) / align_rate_s);
    std::size_t seg = 0;
    for (double tg = epoch + k * align_rate_s; tg <= t_last; tg = epoch + (++k) * align_rate_s) {
        while (seg + 2 < traj.points.size() && traj.points[seg + 1].t < tg) {
            ++seg;
        }
        const auto& a = traj.points[seg];
        const auto& b = traj.points[seg + 1];
        const double u = (tg - a.t) / (b.t - a.t);
        out.points.push_back(TimestampedPoint{traj.object_id, a.lon + u * (b.lon - a.lon),
                                              a.lat + u * (b.lat - a.lat), tg});
    }
    return out;
}

double default_epoch(double stream_start_t) {
    return std::floor(stream_start_t / 60.0) * 60.0;
}

std::vector<Trajectory> preprocess_trajectory(const Trajectory& raw, const PreprocessConfig& cfg,
                                              double epoch) {
    cfg.validate();
    // Antimeridian wrap is out of scope; interpolating across it would be wrong.
    for (std::size_t i = 1; i < raw.points.size(); ++i) {
        if (std::abs(raw.points[i].lon - raw.points[i - 1].lon) > 180.0) {
            throw std::invalid_argument("trajectory " + raw.object_id +
                                        " crosses the antimeridian; not supported");
        }
    }
    const Trajectory cleansed =
        remove_stop_points(filter_speed_outliers(raw, cfg.speed_max_kn), cfg.stop_speed_kn);
    std::vector<Trajectory> out;
    for (const auto& seg : segment_by_gap(cleansed, cfg.gap_dt_s)) {
        Trajectory aligned = align_linear(seg, cfg.align_rate_s, epoch);
        if (!aligned.points.empty()) {
            out.push_back(std::move(aligned));
        }
    }
    return out;
}

std::vector<Trajectory> group_by_object(const std::vector<TimestampedPoint>& records) {
    std::vector<Trajectory> out;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& p : records) {
        auto [it, fresh] = index.emplace(p.object_id, out.size());
        if (fresh) {
            out.push_back(Trajectory{p.object_id, {}});
        }
        auto& pts = out[it->second].points;
        if (pts.empty() || pts.back().t < p.t) {
            pts.push_back(p);
        }
    }
    return out;
}

}  // namespace comove
