#pragma once

#include <cstddef>
#include <iosfwd>
#include <utility>
#include <variant>
#include <vector>

#include "arpsim/core_model.hpp"

namespace arpsim {

/// Constant-amplitude, on-reference pulse. `phase` is an offset applied on
/// top of the carried drive phase for the duration of the pulse only.
struct HardPulse {
    double rabi{0.0};
    double duration{0.0};
    double phase{0.0};
    friend bool operator==(const HardPulse&, const HardPulse&) = default;
};

/// Which ends of a chirp get an amplitude ramp.
enum class RampEnds { both, start, end };

/// Linear frequency sweep. The sign of `rate` is the sweep direction and must
/// agree with detuning_end - detuning_start. Raised-cosine amplitude ramps of
/// length `edge_ramp` are applied at the ends selected by `ramps`; the other
/// end switches abruptly. `phase` is an offset inside the segment only, as for
/// HardPulse.
struct Chirp {
    double rabi{0.0};
    double detuning_start{0.0};
    double detuning_end{0.0};
    double rate{0.0};
    double edge_ramp{0.0};
    double phase{0.0};
    RampEnds ramps{RampEnds::both};

    double duration() const noexcept;
    friend bool operator==(const Chirp&, const Chirp&) = default;
};

/// rf off.
struct Delay {
    double duration{0.0};
    friend bool operator==(const Delay&, const Delay&) = default;
};

using PulseSegment = std::variant<HardPulse, Chirp, Delay>;

double duration(const PulseSegment& seg) noexcept;
bool drives(const PulseSegment& seg) noexcept;

/// Throws DomainError when a segment breaks its invariants.
void validate(const PulseSegment& seg);

inline constexpr double kDefaultEdgeRamp = 1e-6;

enum class AhpDirection { into_plane, out_of_plane };
enum class SweepDirection { up, down };

/// Adiabatic half passage. into_plane sweeps -D0/2 -> 0, out_of_plane 0 -> +D0/2
/// (mirrored for SweepDirection::down). Only the far-detuned end is ramped: the
/// field is switched off (on) abruptly at resonance so the locked magnetization
/// is left in (picked up from) the transverse plane.
PulseSegment make_ahp(const DriveParams& d, AhpDirection direction,
                      double edge_ramp = kDefaultEdgeRamp,
                      SweepDirection sweep = SweepDirection::up, double phase = 0.0);

/// Adiabatic full passage across -D0/2 .. +D0/2 at rate r.
PulseSegment make_afp(const DriveParams& d, double edge_ramp = kDefaultEdgeRamp,
                      SweepDirection sweep = SweepDirection::up, double phase = 0.0);

/// Rectangular pulse of the given rotation area.
PulseSegment make_hard_pulse(double area, double rabi, double phase = 0.0);

/// Instantaneous drive in the reference frame.
struct DriveSample {
    double t{0.0};
    double omega1{0.0};
    double phi{0.0};
    double detuning{0.0};  // instantaneous drive frequency offset, d(phi)/dt
};

/// Ordered list of segments with derived start times and carried phases.
class PulseSequence {
public:
    PulseSequence() = default;
    explicit PulseSequence(std::vector<PulseSegment> segments);

    PulseSequence& append(PulseSegment seg);

    const std::vector<PulseSegment>& segments() const noexcept { return segments_; }
    std::size_t size() const noexcept { return segments_.size(); }
    bool empty() const noexcept { return segments_.empty(); }

    double start_time(std::size_t k) const { return start_times_.at(k); }
    double end_time(std::size_t k) const { return start_times_.at(k) + duration(segments_.at(k)); }
    /// Carried drive phase at the start of segment k (and, for k == size(),
    /// at the end of the sequence).
    double start_phase(std::size_t k) const { return start_phases_.at(k); }
    double total_duration() const noexcept { return start_times_.back(); }

    /// Index of the segment containing t (segments are half-open [start, end)).
    std::size_t segment_at(double t) const;

    /// Analytic drive at time t; t is clamped to [0, total_duration()].
    DriveSample at(double t) const;
    /// Drive inside segment k at local time tau in [0, duration].
    DriveSample at_local(std::size_t k, double tau) const;

    double max_rabi() const noexcept;
    double max_abs_detuning() const noexcept;
    /// Same maxima restricted to one segment.
    static double segment_max_rabi(const PulseSegment& seg) noexcept;
    static double segment_max_abs_detuning(const PulseSegment& seg) noexcept;

    friend bool operator==(const PulseSequence& a, const PulseSequence& b) {
        return a.segments_ == b.segments_;
    }

private:
    std::vector<PulseSegment> segments_;
    std::vector<double> start_times_{0.0};
    std::vector<double> start_phases_{0.0};
};

/// A sequence validated against a sampling interval. Evaluation stays
/// analytic; samples() materializes the uniform stream.
class CompiledDrive {
public:
    const PulseSequence& sequence() const noexcept { return seq_; }
    double dt() const noexcept { return dt_; }
    double total_duration() const noexcept { return seq_.total_duration(); }
    DriveSample at(double t) const { return seq_.at(t); }

    /// Samples at k*dt for k = 0.. plus a closing sample at the exact end.
    std::vector<DriveSample> samples() const;

private:
    friend CompiledDrive compile(const PulseSequence& seq, double dt);
    CompiledDrive(PulseSequence seq, double dt) : seq_(std::move(seq)), dt_(dt) {}

    PulseSequence seq_;
    double dt_;
};

/// Largest sampling step allowed for a sequence (10 samples per fastest
/// oscillation); +inf for a sequence without drive.
double max_sampling_step(const PulseSequence& seq) noexcept;

/// Throws DomainError when dt undersamples the drive.
CompiledDrive compile(const PulseSequence& seq, double dt);

/// CSV columns: t_s, omega1_rad_s, phi_rad.
void write_waveform_csv(std::ostream& os, const CompiledDrive& drive);

}  // namespace arpsim
