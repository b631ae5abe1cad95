#include "comove/geo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace comove {

bool valid_coordinates(double lon, double lat) {
    return std::isfinite(lon) && std::isfinite(lat) && lon >= -180.0 && lon <= 180.0 &&
           lat >= -90.0 && lat <= 90.0;
}

TimestampedPoint make_point(std::string object_id, double lon, double lat, double t) {
    if (!valid_coordinates(lon, lat)) {
        throw std::invalid_argument("coordinate out of range: lon=" + std::to_string(lon) +
                                    " lat=" + std::to_string(lat));
    }
    if (!std::isfinite(t)) {
        throw std::invalid_argument("non-finite timestamp");
    }
    return TimestampedPoint{std::move(object_id), lon, lat, t};
}

void check_trajectory(const Trajectory& traj) {
    for (std::size_t i = 0; i < traj.points.size(); ++i) {
        const auto& p = traj.points[i];
        if (p.object_id != traj.object_id) {
            throw std::invalid_argument("trajectory " + traj.object_id +
                                        " contains point of object " + p.object_id);
        }
        if (i > 0 && !(traj.points[i - 1].t < p.t)) {
            throw std::invalid_argument("trajectory " + traj.object_id +
                                        " is not strictly time-ordered");
        }
    }
}

namespace {
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
}

double haversine_m(double lon1, double lat1, double lon2, double lat2) {
    const double phi1 = lat1 * kDegToRad;
    const double phi2 = lat2 * kDegToRad;
    const double dphi = (lat2 - lat1) * kDegToRad;
    const double dlam = (lon2 - lon1) * kDegToRad;
    const double sp = std::sin(dphi / 2.0);
    const double sl = std::sin(dlam / 2.0);
    const double a = sp * sp + std::cos(phi1) * std::cos(phi2) * sl * sl;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(a)));
}

double haversine_m(const TimestampedPoint& a, const TimestampedPoint& b) {
    return haversine_m(a.lon, a.lat, b.lon, b.lat);
}

void MbrBuilder::add(double lon, double lat) {
    if (empty_) {
        box_ = Mbr{lon, lon, lat, lat};
        empty_ = false;
        return;
    }
    box_.lon_min = std::min(box_.lon_min, lon);
    box_.lon_max = std::max(box_.lon_max, lon);
    box_.lat_min = std::min(box_.lat_min, lat);
    box_.lat_max = std::max(box_.lat_max, lat);
}

Mbr MbrBuilder::build() const {
    if (empty_) {
        throw std::invalid_argument("empty geometry");
    }
    return box_;
}

Mbr mbr_of_points(const std::vector<TimestampedPoint>& pts) {
    MbrBuilder b;
    for (const auto& p : pts) {
        b.add(p.lon, p.lat);
    }
    return b.build();
}

double mbr_iou(const Mbr& a, const Mbr& b) {
    const double iw = std::min(a.lon_max, b.lon_max) - std::max(a.lon_min, b.lon_min);
    const double ih = std::min(a.lat_max, b.lat_max) - std::max(a.lat_min, b.lat_min);
    const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) {
        return a == b ? 1.0 : 0.0;
    }
    return inter / uni;
}

double interval_iou(const TimeInterval& a, const TimeInterval& b) {
    const double overlap = std::min(a.end, b.end) - std::max(a.start, b.start);
    if (overlap < 0.0) {
        return 0.0;  // disjoint
    }
    const double cover = std::max(a.end, b.end) - std::min(a.start, b.start);
    if (cover <= 0.0) {
        return a == b ? 1.0 : 0.0;
    }
    return overlap / cover;
}

}  // namespace comove
