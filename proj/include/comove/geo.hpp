#pragma once

#include <string>
#include <vector>

namespace comove {

inline constexpr double kEarthRadiusM = 6371000.0;

// Length of one degree of arc on the reference sphere, in meters.
inline constexpr double kMetersPerDegree = kEarthRadiusM * 3.14159265358979323846 / 180.0;

// 1 international knot in m/s.
inline constexpr double kKnotMs = 0.514444;

struct TimestampedPoint {
    std::string object_id;
    double lon = 0.0;  // degrees, [-180, 180]
    double lat = 0.0;  // degrees, [-90, 90]
    double t = 0.0;    // seconds since epoch
};

bool valid_coordinates(double lon, double lat);

// Throws std::invalid_argument when lon/lat are out of range or t is not finite.
TimestampedPoint make_point(std::string object_id, double lon, double lat, double t);

struct Trajectory {
    std::string object_id;
    std::vector<TimestampedPoint> points;  // strictly increasing in t

    bool empty() const { return points.empty(); }
    std::size_t size() const { return points.size(); }
};

// Throws std::invalid_argument when points are not strictly time-ordered or
// carry a foreign object_id.
void check_trajectory(const Trajectory& traj);

struct Mbr {
    double lon_min = 0.0;
    double lon_max = 0.0;
    double lat_min = 0.0;
    double lat_max = 0.0;

    double width() const { return lon_max - lon_min; }
    double height() const { return lat_max - lat_min; }
    double area() const { return width() * height(); }  // squared degrees
    bool degenerate() const { return area() == 0.0; }

    friend bool operator==(const Mbr&, const Mbr&) = default;
};

struct TimeInterval {
    double start = 0.0;
    double end = 0.0;

    double length() const { return end - start; }

    friend bool operator==(const TimeInterval&, const TimeInterval&) = default;
};

// Great-circle distance in meters on a sphere of radius kEarthRadiusM.
double haversine_m(double lon1, double lat1, double lon2, double lat2);
double haversine_m(const TimestampedPoint& a, const TimestampedPoint& b);

// Incremental bounding-box accumulator; mbr_of_points is the one-shot form.
class MbrBuilder {
  public:
    void add(double lon, double lat);
    bool empty() const { return empty_; }
    // Throws std::invalid_argument("empty geometry") when nothing was added.
    Mbr build() const;

  private:
    bool empty_ = true;
    Mbr box_;
};

Mbr mbr_of_points(const std::vector<TimestampedPoint>& pts);

// Area IoU in squared degrees. Two degenerate (zero-area) boxes compare
// 1 when equal, 0 otherwise; division by zero never occurs.
double mbr_iou(const Mbr& a, const Mbr& b);

// Overlap length over covered-span length. Two degenerate (zero-length)
// intervals compare 1 when equal, 0 otherwise.
double interval_iou(const TimeInterval& a, const TimeInterval& b);

}  // namespace comove
