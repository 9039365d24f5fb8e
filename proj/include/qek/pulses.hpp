// Copyright 2026 The qek Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Layered drive protocol: three constant-amplitude global pulses separated by
// two free evolutions, plus hardware validation of (schedule, register) pairs.

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "qek/common.hpp"
#include "qek/embedder.hpp"
#include "qek/physics.hpp"

namespace qek {

/// Durations in ns: drive-on tau0, tau1, tau2 interleaved with free evolutions t0, t1.
struct WaveformParams {
    double tau0 = 0, t0 = 0, tau1 = 0, t1 = 0, tau2 = 0;

    std::array<double, 5> as_array() const { return {tau0, t0, tau1, t1, tau2}; }
    static WaveformParams from_array(const std::array<double, 5>& a) { return {a[0], a[1], a[2], a[3], a[4]}; }
    double total_ns() const { return tau0 + t0 + tau1 + t1 + tau2; }

    bool operator==(const WaveformParams&) const = default;
};

struct HardwareLimits {
    double omega_max = kDefaultOmegaMax;  // rad/us
    double max_total_ns = 500.0;
    double min_segment_ns = 5.0;
    RegisterConstraints reg{};
};

/// Every constraint the parameter set violates, one message each. Empty when valid.
inline std::vector<std::string> waveform_violations(const WaveformParams& p, const HardwareLimits& lim = {}) {
    std::vector<std::string> out;
    const char* names[] = {"tau0", "t0", "tau1", "t1", "tau2"};
    const auto a = p.as_array();
    for (std::size_t i = 0; i < 5; ++i) {
        if (!(a[i] > lim.min_segment_ns)) {
            std::ostringstream os;
            os << "min_segment: " << names[i] << " = " << a[i] << " ns <= " << lim.min_segment_ns << " ns";
            out.push_back(os.str());
        }
    }
    if (!(p.total_ns() < lim.max_total_ns)) {
        std::ostringstream os;
        os << "total_time: " << p.total_ns() << " ns >= " << lim.max_total_ns << " ns";
        out.push_back(os.str());
    }
    return out;
}

inline bool waveform_feasible(const WaveformParams& p, const HardwareLimits& lim = {}) {
    return waveform_violations(p, lim).empty();
}

struct PulseSegment {
    double duration_us = 0;  // us
    double omega = 0;        // rad/us
    double phase = 0;        // rad
    double detuning = 0;     // rad/us

    bool drive_on() const { return omega != 0.0; }
    bool operator==(const PulseSegment&) const = default;
};

struct PulseSchedule {
    std::vector<PulseSegment> segments;

    double total_duration_us() const {
        double t = 0;
        for (const auto& s : segments) t += s.duration_us;
        return t;
    }
    bool operator==(const PulseSchedule&) const = default;
};

/// Drive phase realizing a sigma^y mixing term.
inline constexpr double kMixingPhase = std::numbers::pi / 2;

/// Five segments (tau0 on, t0 off, tau1 on, t1 off, tau2 on) at constant omega0,
/// zero detuning and constant phase.
inline PulseSchedule build_schedule(const WaveformParams& p, double omega0, const HardwareLimits& lim = {},
                                    double phase = kMixingPhase) {
    auto bad = waveform_violations(p, lim);
    if (!(omega0 > 0 && omega0 <= lim.omega_max)) {
        std::ostringstream os;
        os << "omega: " << omega0 << " rad/us outside (0, " << lim.omega_max << "]";
        bad.push_back(os.str());
    }
    if (!bad.empty()) {
        std::string msg = "invalid waveform parameters:";
        for (const auto& b : bad) msg += "\n  " + b;
        throw ValidationError(msg);
    }
    PulseSchedule s;
    const auto a = p.as_array();
    for (std::size_t i = 0; i < 5; ++i)
        s.segments.push_back({a[i] / 1000.0, i % 2 == 0 ? omega0 : 0.0, phase, 0.0});
    return s;
}

/// Rotation angle omega0 * tau of every drive-on segment, rad.
inline std::vector<double> mixing_angles(const PulseSchedule& s) {
    std::vector<double> out;
    for (const auto& seg : s.segments)
        if (seg.drive_on()) out.push_back(seg.omega * seg.duration_us);
    return out;
}

/// Replaces each amplitude step by a linear ramp of `ramp_us`, discretized
/// into `steps` constant pieces. Total duration is unchanged; segments shorter
/// than two ramps are left unsmoothed.
inline PulseSchedule smooth_schedule(const PulseSchedule& s, double ramp_us, int steps = 8) {
    if (!(ramp_us > 0) || steps < 1) return s;
    PulseSchedule out;
    for (std::size_t i = 0; i < s.segments.size(); ++i) {
        const auto& seg = s.segments[i];
        const double prev = i == 0 ? 0.0 : s.segments[i - 1].omega;
        const double next = i + 1 == s.segments.size() ? 0.0 : s.segments[i + 1].omega;
        if (seg.duration_us < 2 * ramp_us || (prev == seg.omega && next == seg.omega)) {
            out.segments.push_back(seg);
            continue;
        }
        const double h = ramp_us / steps;
        // Ramp from the midpoint of the previous level to this level, and back out.
        const double in_from = 0.5 * (prev + seg.omega), out_to = 0.5 * (next + seg.omega);
        for (int k = 0; k < steps; ++k) {
            auto piece = seg;
            piece.duration_us = h;
            piece.omega = in_from + (seg.omega - in_from) * (k + 0.5) / steps;
            out.segments.push_back(piece);
        }
        auto body = seg;
        body.duration_us = seg.duration_us - 2 * ramp_us;
        if (body.duration_us > 0) out.segments.push_back(body);
        for (int k = 0; k < steps; ++k) {
            auto piece = seg;
            piece.duration_us = h;
            piece.omega = seg.omega + (out_to - seg.omega) * (k + 0.5) / steps;
            out.segments.push_back(piece);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Task validation
// ---------------------------------------------------------------------------

struct Violation {
    std::string rule;
    std::string message;
    double measured = 0;
    double allowed = 0;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool valid() const { return violations.empty(); }
};

/// Checks total time, per-segment minimum, amplitude bound and every
/// register rule. Reports all violations, never throws.
inline ValidationReport validate_task(const PulseSchedule& s, const std::vector<Vec2>& positions,
                                      const HardwareLimits& lim = {}) {
    ValidationReport rep;
    auto add = [&](std::string rule, double measured, double allowed, const std::string& text) {
        rep.violations.push_back({std::move(rule), text, measured, allowed});
    };
    auto num = [](double v) {
        std::ostringstream os;
        os << v;
        return os.str();
    };

    if (s.segments.empty()) add("schedule", 0, 1, "schedule: no segments");
    const double total_ns = s.total_duration_us() * 1000.0;
    if (!(total_ns < lim.max_total_ns))
        add("total_time", total_ns, lim.max_total_ns,
            "total_time: " + num(total_ns) + " >= " + num(lim.max_total_ns) + " ns");
    for (std::size_t i = 0; i < s.segments.size(); ++i) {
        const auto& seg = s.segments[i];
        // Compare in us so that a parameter of exactly the limit is rejected
        // exactly as in waveform_violations.
        if (!(seg.duration_us > lim.min_segment_ns / 1000.0))
            add("min_segment", seg.duration_us * 1000.0, lim.min_segment_ns,
                "min_segment: " + num(seg.duration_us * 1000.0) + " < " + num(lim.min_segment_ns) +
                    " ns (segment " + std::to_string(i) + ")");
        if (!(seg.omega >= 0 && seg.omega <= lim.omega_max))
            add("omega", seg.omega, lim.omega_max,
                "omega: " + num(seg.omega) + " outside [0, " + num(lim.omega_max) + "] rad/us (segment " +
                    std::to_string(i) + ")");
    }

    const auto& rc = lim.reg;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const auto& p = positions[i];
        if (p.x < 0) add("register_area", p.x, 0, "register area: x below 0 um (atom " + std::to_string(i) + ")");
        if (p.x > rc.width)
            add("register_area", p.x, rc.width,
                "register area: x exceeds " + num(rc.width) + " um (atom " + std::to_string(i) + ", x = " +
                    num(p.x) + ")");
        if (p.y < 0) add("register_area", p.y, 0, "register area: y below 0 um (atom " + std::to_string(i) + ")");
        if (p.y > rc.height)
            add("register_area", p.y, rc.height,
                "register area: y exceeds " + num(rc.height) + " um (atom " + std::to_string(i) + ", y = " +
                    num(p.y) + ")");
        if (rc.row_spacing > 0) {
            const double off = std::abs(p.y - rc.row_spacing * std::round(p.y / rc.row_spacing));
            if (off > 1e-9)
                add("row_spacing", p.y, rc.row_spacing,
                    "row spacing: y = " + num(p.y) + " is not a multiple of " + num(rc.row_spacing) + " um (atom " +
                        std::to_string(i) + ")");
        }
    }
    for (std::size_t i = 0; i < positions.size(); ++i)
        for (std::size_t j = i + 1; j < positions.size(); ++j) {
            const double d = distance(positions[i], positions[j]);
            if (d < rc.min_pair_distance - 1e-9)
                add("min_pair_distance", d, rc.min_pair_distance,
                    "min pair distance: " + num(d) + " < " + num(rc.min_pair_distance) + " um (atoms " +
                        std::to_string(i) + ", " + std::to_string(j) + ")");
        }
    return rep;
}

inline ValidationReport validate_task(const PulseSchedule& s, const Register& reg, const HardwareLimits& lim = {}) {
    return validate_task(s, reg.positions, lim);
}

}  // namespace qek
