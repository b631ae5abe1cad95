#include "comove/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace comove {

namespace {

// Days since 1970-01-01 for a civil date (proleptic Gregorian).
long long days_from_civil(long long y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long long era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned long long>(y - era * 400);
    const unsigned long long doy = (153ULL * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned long long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long long>(doe) - 719468;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) {
        return false;
    }
    std::size_t pos = 0;
    try {
        out = std::stod(s, &pos);
    } catch (const std::exception&) {
        return false;
    }
    return pos == s.size() && std::isfinite(out);
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) {
        return {};
    }
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

double parse_timestamp(const std::string& text) {
    const std::string s = trim(text);
    double unix_t = 0.0;
    if (parse_number(s, unix_t)) {
        return unix_t;
    }
    // ISO-8601, date and time separated by 'T' or space, optional .fff and 'Z'.
    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    double sec = 0.0;
    char sep = 0;
    int consumed = 0;
    const int n = std::sscanf(s.c_str(), "%4d-%2d-%2d%c%2d:%2d:%lf%n", &y, &mo, &d, &sep, &h, &mi,
                              &sec, &consumed);
    if (n != 7 || (sep != 'T' && sep != ' ')) {
        return std::nan("");
    }
    std::string rest = s.substr(static_cast<std::size_t>(consumed));
    if (!rest.empty() && rest != "Z") {
        return std::nan("");
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || sec < 0.0 || sec >= 61.0) {
        return std::nan("");
    }
    return static_cast<double>(days_from_civil(y, static_cast<unsigned>(mo),
                                               static_cast<unsigned>(d))) *
               86400.0 +
           h * 3600.0 + mi * 60.0 + sec;
}

CsvReadResult read_points_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open input file: " + path);
    }
    CsvReadResult result;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        const std::string row = trim(line);
        if (row.empty()) {
            continue;
        }
        std::stringstream ss(row);
        std::string id, ts, lon_s, lat_s, extra;
        const bool four = static_cast<bool>(std::getline(ss, id, ',')) &&
                          static_cast<bool>(std::getline(ss, ts, ',')) &&
                          static_cast<bool>(std::getline(ss, lon_s, ',')) &&
                          static_cast<bool>(std::getline(ss, lat_s, ','));
        const bool trailing = static_cast<bool>(std::getline(ss, extra, ','));
        double t = four ? parse_timestamp(ts) : std::nan("");
        double lon = 0.0, lat = 0.0;
        const bool ok = four && !trailing && !std::isnan(t) && parse_number(trim(lon_s), lon) &&
                        parse_number(trim(lat_s), lat) && valid_coordinates(lon, lat) &&
                        !trim(id).empty();
        if (!ok) {
            if (first) {
                first = false;  // tolerate one header line
                continue;
            }
            ++result.malformed;
            continue;
        }
        first = false;
        result.records.push_back(TimestampedPoint{trim(id), lon, lat, t});
    }
    return result;
}

std::string format_time(double t) {
    char buf[64];
    if (t == std::floor(t) && std::abs(t) < 1e15) {
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(t));
    } else {
        std::snprintf(buf, sizeof buf, "%.3f", t);
    }
    return buf;
}

std::string format_coord(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    return buf;
}

void write_points_csv(const std::string& path, const std::vector<TimestampedPoint>& records) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open output file: " + path);
    }
    out << "object_id,t,lon,lat\n";
    for (const auto& p : records) {
        out << p.object_id << ',' << format_time(p.t) << ',' << format_coord(p.lon) << ','
            << format_coord(p.lat) << '\n';
    }
}

}  // namespace comove
