#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "vbn/solver.hpp"
#include "vbn/types.hpp"

namespace vbn {

/// Shortest round-trip decimal formatting; byte-identical for identical
/// doubles, which makes trace replay deterministic.
inline std::string json_number(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string json_array(const Vector& v) {
    std::string out = "[";
    for (int i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += json_number(v(i));
    }
    out += "]";
    return out;
}

/// One JSON-lines record per iteration. Field set is fixed:
/// k, lambda, newton_norm, theta, residual, inner_trials.
inline std::string to_json_line(const IterationRecord& rec) {
    std::string out = "{\"k\":" + std::to_string(rec.k);
    out += ",\"lambda\":" + json_number(rec.lambda);
    out += ",\"newton_norm\":" + json_number(rec.newton_norm);
    out += ",\"theta\":" + json_number(rec.theta);
    out += ",\"residual\":" + json_number(rec.residual);
    out += ",\"inner_trials\":" + std::to_string(rec.inner_trials);
    out += "}";
    return out;
}

inline std::string summary_json_line(const SolveOutcome& outcome, double final_residual) {
    std::string out = std::string("{\"status\":\"") + to_string(outcome.status) + "\"";
    out += ",\"iterations\":" + std::to_string(outcome.trace.size());
    out += ",\"final_residual\":" + json_number(final_residual);
    out += ",\"final_point\":" + json_array(outcome.final.coords);
    out += "}";
    return out;
}

inline void write_trace(std::ostream& os, const SolveOutcome& outcome, double final_residual) {
    for (const auto& rec : outcome.trace) os << to_json_line(rec) << "\n";
    os << summary_json_line(outcome, final_residual) << "\n";
}

}  // namespace vbn
