// Convergence-speed and relative-cost arithmetic plus the CSV tables.
#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "kdlw/common.hpp"

namespace kdlw {

// (n0 / (n0 + ni)) * (e0 - ei): error-rate improvement discounted by
// the amount of data spent on it.
inline double convergence_speed(double e0, double ei, double n0, double ni) {
    if (!(n0 > 0.0)) throw ConfigError("basic data size must be positive");
    if (ni < 0.0) throw ConfigError("data size must be nonnegative");
    return n0 / (n0 + ni) * (e0 - ei);
}

// Percentage degradation of the proposal's convergence speed.
inline double relative_cost(double cs_baseline, double cs_proposal) {
    if (!(cs_baseline > 0.0)) throw ConfigError("baseline convergence speed must be positive");
    return 100.0 * (cs_baseline - cs_proposal) / cs_baseline;
}

struct RunMetrics {
    std::string model;          // "dense" or "kdegree"
    int data_size_units = 1;    // multiples of the configured base size
    double error_rate_percent = 0.0;
    double cc = 0.0;
    double wall_time_seconds = 0.0;  // reporting only
    double convergence_speed = 0.0;
    double relative_cost_percent = 0.0;
};

struct ErrorTableRow {
    int data_size_units = 1;
    double error_dense_percent = 0.0;
    double error_kdegree_percent = 0.0;
};

struct SpeedTableRow {
    int data_size_units = 1;
    double error_dense_percent = 0.0;
    double error_kdegree_percent = 0.0;
    double cs_dense = 0.0;
    double cs_kdegree = 0.0;
    double relative_cost_percent = 0.0;
};

// Table-3-style arithmetic from error-rate columns; pure, no training.
inline std::vector<SpeedTableRow> speed_table(const std::vector<ErrorTableRow>& rows,
                                              double basic_error_rate = 10.0,
                                              double basic_data_size = 1.0) {
    std::vector<SpeedTableRow> out;
    for (const auto& r : rows) {
        SpeedTableRow s;
        s.data_size_units = r.data_size_units;
        s.error_dense_percent = r.error_dense_percent;
        s.error_kdegree_percent = r.error_kdegree_percent;
        s.cs_dense = convergence_speed(basic_error_rate, r.error_dense_percent, basic_data_size,
                                       r.data_size_units);
        s.cs_kdegree = convergence_speed(basic_error_rate, r.error_kdegree_percent,
                                         basic_data_size, r.data_size_units);
        // a non-positive baseline speed (error above the basic rate) has
        // no meaningful relative cost; report zero instead of throwing
        s.relative_cost_percent =
            s.cs_dense > 0.0 ? relative_cost(s.cs_dense, s.cs_kdegree) : 0.0;
        out.push_back(s);
    }
    return out;
}

// Ratios come from unrounded values; the display rounds to two decimals
// like the published tables.
inline void emit_table3(const std::vector<SpeedTableRow>& rows, std::ostream& out) {
    out << "data_size,error_dense,error_kdegree,cs_dense,cs_kdegree,relative_cost\n";
    char buf[200];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%.2f,%.2f,%.2f,%.2f,%.2f\n", r.data_size_units,
                      r.error_dense_percent, r.error_kdegree_percent, r.cs_dense, r.cs_kdegree,
                      r.relative_cost_percent);
        out << buf;
    }
}

struct CostTableRow {
    int data_size_units = 1;
    double cc_dense = 0.0;
    double cc_kdegree = 0.0;
};

inline void emit_table1(const std::vector<CostTableRow>& rows, std::ostream& out) {
    out << "data_size,cc_dense,cc_kdegree,improvement\n";
    char buf[200];
    for (const auto& r : rows) {
        const double ratio = r.cc_kdegree > 0.0 ? r.cc_dense / r.cc_kdegree : 0.0;
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g\n", r.data_size_units, r.cc_dense,
                      r.cc_kdegree, ratio);
        out << buf;
    }
}

inline void emit_metrics_csv(const std::vector<RunMetrics>& rows, std::ostream& out) {
    out << "model,data_size_units,error_rate_percent,cc,convergence_speed,"
           "relative_cost_percent,wall_time_seconds\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%d,%.9g,%.9g,%.9g,%.9g,%.3f\n", r.model.c_str(),
                      r.data_size_units, r.error_rate_percent, r.cc, r.convergence_speed,
                      r.relative_cost_percent, r.wall_time_seconds);
        out << buf;
    }
}

}  // namespace kdlw
