#pragma once

#include <string>
#include <vector>

#include "vec3.hpp"

namespace poissonize {

/// Point of the extended space (x, y, z, s).
struct ExtendedState {
    Point3 p;
    double s = 0.0;

    friend bool operator==(const ExtendedState&, const ExtendedState&) = default;
};

struct TrajectorySample {
    double t = 0.0;
    double tau = 0.0;
    ExtendedState state;
    double H = 0.0;
    double r = 0.0;  // signed w.D + s h
    double h = 0.0;
    double constraint_residual = 0.0;
};

enum class TerminalStatus { Completed, ConformalFactorVanished, StepFailure };

inline const char* to_string(TerminalStatus s) {
    switch (s) {
        case TerminalStatus::Completed: return "completed";
        case TerminalStatus::ConformalFactorVanished: return "conformal_factor_vanished";
        case TerminalStatus::StepFailure: return "step_failure";
    }
    return "?";
}

struct TrajectoryRecord {
    std::vector<TrajectorySample> samples;
    std::string method;
    double step = 0.0;
    std::string clock;
    std::string system_name;
    std::string d_name;
    TerminalStatus status = TerminalStatus::Completed;
    std::string message;
};

}  // namespace poissonize
