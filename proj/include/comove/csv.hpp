#pragma once

#include <string>
#include <vector>

#include "comove/geo.hpp"

namespace comove {

struct CsvReadResult {
    std::vector<TimestampedPoint> records;
    std::size_t malformed = 0;  // skipped lines (bad field count, ranges, parse errors)
};

// Parses "unix seconds" (integer or decimal) or ISO-8601
// "YYYY-MM-DD[T ]HH:MM:SS[.fff][Z]" as UTC. Returns NaN on failure.
double parse_timestamp(const std::string& text);

// Record format: object_id,timestamp,lon,lat. An optional header line is
// skipped. Malformed lines are counted, not fatal; an unreadable file throws
// std::runtime_error.
CsvReadResult read_points_csv(const std::string& path);

void write_points_csv(const std::string& path, const std::vector<TimestampedPoint>& records);

// Timestamps are written without decimals when integral.
std::string format_time(double t);
std::string format_coord(double v);

}  // namespace comove
