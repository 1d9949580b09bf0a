#include "arpsim/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "arpsim/errors.hpp"
#include "arpsim/units.hpp"

namespace arpsim {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double raised_cosine_envelope(double tau, double total, double ramp, RampEnds ends) noexcept {
    if (ramp <= 0.0) {
        return 1.0;
    }
    if (ends != RampEnds::end && tau < ramp) {
        return 0.5 * (1.0 - std::cos(kPi * tau / ramp));
    }
    if (ends != RampEnds::start && tau > total - ramp) {
        return 0.5 * (1.0 - std::cos(kPi * (total - tau) / ramp));
    }
    return 1.0;
}

void require_sweep(const DriveParams& d) {
    if (!(d.sweep_range > 0.0)) {
        throw DomainError("adiabatic passage needs a positive sweep range");
    }
    if (!(d.chirp_rate > 0.0)) {
        throw DomainError("adiabatic passage needs a positive chirp rate");
    }
    if (!(d.rabi >= 0.0)) {
        throw DomainError("rabi frequency must be >= 0");
    }
}

}  // namespace

double Chirp::duration() const noexcept {
    return std::abs(detuning_end - detuning_start) / std::abs(rate);
}

double duration(const PulseSegment& seg) noexcept {
    return std::visit(Overloaded{[](const HardPulse& p) { return p.duration; },
                                 [](const Chirp& c) { return c.duration(); },
                                 [](const Delay& d) { return d.duration; }},
                      seg);
}

bool drives(const PulseSegment& seg) noexcept { return !std::holds_alternative<Delay>(seg); }

void validate(const PulseSegment& seg) {
    std::visit(Overloaded{[](const HardPulse& p) {
                              if (!(p.rabi >= 0.0)) throw DomainError("hard pulse rabi must be >= 0");
                              if (!(p.duration > 0.0) || !std::isfinite(p.duration))
                                  throw DomainError("hard pulse duration must be > 0");
                          },
                          [](const Chirp& c) {
                              if (!(c.rabi >= 0.0)) throw DomainError("chirp rabi must be >= 0");
                              if (!(c.rate != 0.0) || !std::isfinite(c.rate))
                                  throw DomainError("chirp rate must be nonzero");
                              const double span = c.detuning_end - c.detuning_start;
                              if (!(std::abs(span) > 0.0))
                                  throw DomainError("chirp sweeps an empty detuning range");
                              if ((span > 0.0) != (c.rate > 0.0))
                                  throw DomainError("chirp rate sign disagrees with sweep direction");
                              const double room =
                                  c.ramps == RampEnds::both ? 0.5 * c.duration() : c.duration();
                              if (!(c.edge_ramp >= 0.0) || c.edge_ramp > room)
                                  throw DomainError(fmt::format(
                                      "edge ramp {:g} s does not fit the chirp duration {:g} s",
                                      c.edge_ramp, c.duration()));
                          },
                          [](const Delay& d) {
                              if (!(d.duration > 0.0) || !std::isfinite(d.duration))
                                  throw DomainError("delay duration must be > 0");
                          }},
               seg);
}

PulseSegment make_ahp(const DriveParams& d, AhpDirection direction, double edge_ramp,
                      SweepDirection sweep, double phase) {
    require_sweep(d);
    const double s = sweep == SweepDirection::up ? 1.0 : -1.0;
    const double half = 0.5 * d.sweep_range;
    Chirp c{.rabi = d.rabi, .rate = s * d.chirp_rate, .edge_ramp = edge_ramp, .phase = phase};
    if (direction == AhpDirection::into_plane) {
        c.detuning_start = -s * half;
        c.detuning_end = 0.0;
        c.ramps = RampEnds::start;
    } else {
        c.detuning_start = 0.0;
        c.detuning_end = s * half;
        c.ramps = RampEnds::end;
    }
    PulseSegment seg = c;
    validate(seg);
    return seg;
}

PulseSegment make_afp(const DriveParams& d, double edge_ramp, SweepDirection sweep,
                      double phase) {
    require_sweep(d);
    const double s = sweep == SweepDirection::up ? 1.0 : -1.0;
    const double half = 0.5 * d.sweep_range;
    PulseSegment seg = Chirp{.rabi = d.rabi,
                             .detuning_start = -s * half,
                             .detuning_end = s * half,
                             .rate = s * d.chirp_rate,
                             .edge_ramp = edge_ramp,
                             .phase = phase};
    validate(seg);
    return seg;
}

PulseSegment make_hard_pulse(double area, double rabi, double phase) {
    if (!(rabi > 0.0)) {
        throw DomainError("hard pulse needs rabi > 0");
    }
    PulseSegment seg = HardPulse{.rabi = rabi, .duration = area / rabi, .phase = phase};
    validate(seg);
    return seg;
}

PulseSequence::PulseSequence(std::vector<PulseSegment> segments) {
    for (auto& s : segments) {
        append(std::move(s));
    }
}

PulseSequence& PulseSequence::append(PulseSegment seg) {
    validate(seg);
    const double t0 = start_times_.back();
    const double phi0 = start_phases_.back();
    double phi1 = phi0;
    if (const auto* c = std::get_if<Chirp>(&seg)) {
        const double T = c->duration();
        phi1 = phi0 + c->detuning_start * T + 0.5 * c->rate * T * T;
    }
    start_times_.push_back(t0 + duration(seg));
    start_phases_.push_back(phi1);
    segments_.push_back(std::move(seg));
    return *this;
}

std::size_t PulseSequence::segment_at(double t) const {
    if (segments_.empty()) {
        throw DomainError("empty pulse sequence");
    }
    // start_times_ has size()+1 entries; find the last start <= t.
    auto it = std::upper_bound(start_times_.begin(), start_times_.end() - 1, t);
    std::size_t k = it == start_times_.begin() ? 0 : static_cast<std::size_t>(it - start_times_.begin()) - 1;
    return std::min(k, segments_.size() - 1);
}

DriveSample PulseSequence::at_local(std::size_t k, double tau) const {
    const PulseSegment& seg = segments_.at(k);
    const double phi0 = start_phases_[k];
    DriveSample s{.t = start_times_[k] + tau, .omega1 = 0.0, .phi = phi0, .detuning = 0.0};
    std::visit(Overloaded{[&](const HardPulse& p) {
                              s.omega1 = p.rabi;
                              s.phi = phi0 + p.phase;
                          },
                          [&](const Chirp& c) {
                              s.omega1 = c.rabi * raised_cosine_envelope(tau, c.duration(), c.edge_ramp, c.ramps);
                              s.phi = phi0 + c.phase + c.detuning_start * tau + 0.5 * c.rate * tau * tau;
                              s.detuning = c.detuning_start + c.rate * tau;
                          },
                          [](const Delay&) {}},
               seg);
    return s;
}

DriveSample PulseSequence::at(double t) const {
    const double tc = std::clamp(t, 0.0, total_duration());
    const std::size_t k = segment_at(tc);
    DriveSample s = at_local(k, std::min(tc - start_times_[k], duration(segments_[k])));
    s.t = tc;
    return s;
}

double PulseSequence::segment_max_rabi(const PulseSegment& seg) noexcept {
    return std::visit(Overloaded{[](const HardPulse& p) { return p.rabi; },
                                 [](const Chirp& c) { return c.rabi; },
                                 [](const Delay&) { return 0.0; }},
                      seg);
}

double PulseSequence::segment_max_abs_detuning(const PulseSegment& seg) noexcept {
    if (const auto* c = std::get_if<Chirp>(&seg)) {
        return std::max(std::abs(c->detuning_start), std::abs(c->detuning_end));
    }
    return 0.0;
}

double PulseSequence::max_rabi() const noexcept {
    double m = 0.0;
    for (const auto& s : segments_) m = std::max(m, segment_max_rabi(s));
    return m;
}

double PulseSequence::max_abs_detuning() const noexcept {
    double m = 0.0;
    for (const auto& s : segments_) m = std::max(m, segment_max_abs_detuning(s));
    return m;
}

double max_sampling_step(const PulseSequence& seq) noexcept {
    const double fastest = std::max(seq.max_rabi(), seq.max_abs_detuning());
    if (fastest <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return (kTwoPi / 10.0) / fastest;
}

CompiledDrive compile(const PulseSequence& seq, double dt) {
    if (seq.empty()) {
        throw DomainError("cannot compile an empty pulse sequence");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw DomainError("sampling step must be positive");
    }
    const double limit = max_sampling_step(seq);
    if (dt > limit) {
        throw DomainError(fmt::format(
            "sampling step {:g} s undersamples the drive: need dt <= {:g} s "
            "(10 samples per period at {:g} Hz)",
            dt, limit, rad_to_hz(std::max(seq.max_rabi(), seq.max_abs_detuning()))));
    }
    return CompiledDrive(seq, dt);
}

std::vector<DriveSample> CompiledDrive::samples() const {
    const double T = seq_.total_duration();
    const auto n = static_cast<std::size_t>(std::floor(T / dt_));
    std::vector<DriveSample> out;
    out.reserve(n + 2);
    for (std::size_t k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * dt_;
        if (t >= T) break;
        out.push_back(seq_.at(t));
    }
    out.push_back(seq_.at(T));
    return out;
}

void write_waveform_csv(std::ostream& os, const CompiledDrive& drive) {
    os << "t_s,omega1_rad_s,phi_rad\n";
    for (const auto& s : drive.samples()) {
        os << fmt::format("{:.17g},{:.17g},{:.17g}\n", s.t, s.omega1, s.phi);
    }
}

}  // namespace arpsim
