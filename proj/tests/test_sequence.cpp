#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "arpsim/errors.hpp"
#include "arpsim/sequence.hpp"
#include "arpsim/units.hpp"

using namespace arpsim;
using doctest::Approx;

namespace {

const DriveParams kDrive{.rabi = hz_to_rad(0.264e6),
                         .chirp_rate = hz_to_rad(40e9),
                         .sweep_range = hz_to_rad(6e6)};

// Phase accumulated analytically by integrating the instantaneous detuning
// with Simpson's rule; independent of the closed form used by the sequence.
double integrated_phase(const PulseSequence& seq, double t_end, int n) {
    const double h = t_end / n;
    double s = seq.at(0.0).detuning + seq.at(t_end).detuning;
    for (int i = 1; i < n; ++i) {
        s += (i % 2 ? 4.0 : 2.0) * seq.at(i * h).detuning;
    }
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("AHP from the monitored passage parameters") {
    const PulseSegment into = make_ahp(kDrive, AhpDirection::into_plane);
    const auto& c = std::get<Chirp>(into);
    CHECK(duration(into) == Approx(75e-6).epsilon(1e-12).scale(0.0));
    CHECK(c.detuning_start == Approx(-hz_to_rad(3e6)).epsilon(1e-15).scale(0.0));
    CHECK(c.detuning_end == 0.0);
    CHECK(c.edge_ramp == kDefaultEdgeRamp);

    const auto& out = std::get<Chirp>(make_ahp(kDrive, AhpDirection::out_of_plane));
    CHECK(out.detuning_start == 0.0);
    CHECK(out.detuning_end == Approx(hz_to_rad(3e6)).epsilon(1e-15).scale(0.0));

    const auto& down = std::get<Chirp>(make_ahp(kDrive, AhpDirection::into_plane, 1e-6,
                                                SweepDirection::down));
    CHECK(down.detuning_start == Approx(hz_to_rad(3e6)).epsilon(1e-15).scale(0.0));
    CHECK(down.rate < 0.0);
}

TEST_CASE("AFP spans the full sweep") {
    const PulseSegment afp = make_afp(kDrive);
    CHECK(duration(afp) == Approx(150e-6).epsilon(1e-12).scale(0.0));
    const PulseSequence seq({afp});
    CHECK(std::abs(seq.at(75e-6).detuning) < 1e-6);
    CHECK(seq.at(0.0).omega1 == 0.0);
    CHECK(std::abs(seq.at(150e-6).omega1) < 1e-9);
    CHECK(seq.at(75e-6).omega1 == kDrive.rabi);
    CHECK(seq.at(0.5e-6).omega1 == Approx(0.5 * kDrive.rabi).epsilon(1e-12).scale(0.0));
}

TEST_CASE("hard pulse area") {
    const PulseSegment p = make_hard_pulse(kPi / 2.0, kDrive.rabi);
    CHECK(duration(p) == Approx(9.46969696969697e-7).epsilon(1e-12).scale(0.0));
    CHECK_THROWS_AS(make_hard_pulse(0.0, kDrive.rabi), DomainError);
    CHECK_THROWS_AS(make_hard_pulse(1.0, 0.0), DomainError);
}

TEST_CASE("segment validation") {
    CHECK_THROWS_AS(validate(PulseSegment{Delay{.duration = 0.0}}), DomainError);
    CHECK_THROWS_AS(validate(PulseSegment{Delay{.duration = -1.0}}), DomainError);
    CHECK_THROWS_AS(validate(PulseSegment{Chirp{.rabi = 1.0,
                                                .detuning_start = 0.0,
                                                .detuning_end = 1.0,
                                                .rate = -1.0}}),
                    DomainError);
    CHECK_THROWS_AS(validate(PulseSegment{Chirp{.rabi = 1.0,
                                                .detuning_start = 0.0,
                                                .detuning_end = 1.0,
                                                .rate = 1.0,
                                                .edge_ramp = 0.6}}),
                    DomainError);
    DriveParams bad = kDrive;
    bad.chirp_rate = 0.0;
    CHECK_THROWS_AS(make_afp(bad), DomainError);
    bad = kDrive;
    bad.sweep_range = 0.0;
    CHECK_THROWS_AS(make_ahp(bad, AhpDirection::into_plane), DomainError);
}

TEST_CASE("sequence timing and durations") {
    PulseSequence seq;
    seq.append(make_ahp(kDrive, AhpDirection::into_plane))
        .append(Delay{.duration = 100e-6})
        .append(make_afp(kDrive))
        .append(make_hard_pulse(kPi, kDrive.rabi))
        .append(make_ahp(kDrive, AhpDirection::out_of_plane));
    double sum = 0.0;
    for (std::size_t k = 0; k < seq.size(); ++k) {
        CHECK(std::abs(seq.start_time(k) - sum) <= 1e-15 * sum);
        sum += duration(seq.segments()[k]);
    }
    CHECK(seq.total_duration() == Approx(sum).epsilon(1e-15).scale(0.0));
    CHECK(seq.segment_at(0.0) == 0);
    CHECK(seq.segment_at(seq.start_time(1)) == 1);
    CHECK(seq.segment_at(0.5 * seq.start_time(1)) == 0);
    CHECK(seq.segment_at(seq.total_duration()) == seq.size() - 1);
    CHECK(seq.max_rabi() == kDrive.rabi);
    CHECK(seq.max_abs_detuning() == Approx(hz_to_rad(3e6)).epsilon(1e-15).scale(0.0));
}

TEST_CASE("drive phase is continuous across segment boundaries") {
    PulseSequence seq;
    seq.append(make_ahp(kDrive, AhpDirection::into_plane))
        .append(Delay{.duration = 37e-6})
        .append(make_afp(kDrive))
        .append(Delay{.duration = 37e-6})
        .append(make_afp(kDrive, kDefaultEdgeRamp, SweepDirection::down))
        .append(make_ahp(kDrive, AhpDirection::out_of_plane));
    for (std::size_t k = 1; k < seq.size(); ++k) {
        const double t = seq.start_time(k);
        const double left = seq.at_local(k - 1, duration(seq.segments()[k - 1])).phi;
        const double right = seq.at_local(k, 0.0).phi;
        CHECK(std::abs(left - right) <= 1e-12 * std::max(1.0, std::abs(left)));
        CHECK(seq.at(t).phi == Approx(right).epsilon(1e-12).scale(0.0));
    }
}

TEST_CASE("chirp phase matches the integrated detuning") {
    const PulseSequence seq({make_afp(kDrive)});
    const double T = seq.total_duration();
    for (double frac : {0.1, 0.37, 0.5, 0.8, 1.0}) {
        const double t = frac * T;
        const double ref = integrated_phase(seq, t, 2000);
        CHECK(seq.at(t).phi == Approx(ref).epsilon(1e-10).scale(1.0));
    }
}

TEST_CASE("reversed AFP retraces the detuning") {
    const PulseSequence up({make_afp(kDrive)});
    const PulseSequence down({make_afp(kDrive, kDefaultEdgeRamp, SweepDirection::down)});
    const double T = up.total_duration();
    CHECK(down.total_duration() == Approx(T).epsilon(1e-15).scale(0.0));
    for (double frac : {0.0, 0.004, 0.25, 0.5, 0.77, 1.0}) {
        const double t = frac * T;
        CHECK(down.at(t).detuning == Approx(up.at(T - t).detuning).epsilon(1e-9).scale(1e3));
        CHECK(down.at(t).omega1 == Approx(up.at(T - t).omega1).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("hard pulse phase applies inside the pulse only") {
    PulseSequence seq;
    seq.append(make_afp(kDrive)).append(make_hard_pulse(kPi, kDrive.rabi, 1.0)).append(
        Delay{.duration = 1e-6});
    const double carried = seq.start_phase(1);
    CHECK(seq.at_local(1, 0.5 * duration(seq.segments()[1])).phi == Approx(carried + 1.0).scale(0.0));
    CHECK(seq.start_phase(2) == carried);
    CHECK(seq.at_local(2, 0.5e-6).phi == carried);
    CHECK(seq.at_local(2, 0.5e-6).omega1 == 0.0);
}

TEST_CASE("compile refuses undersampling") {
    const PulseSequence seq({make_afp(kDrive)});
    const double limit = max_sampling_step(seq);
    CHECK(limit == Approx(kTwoPi / 10.0 / hz_to_rad(3e6)).epsilon(1e-14).scale(0.0));
    CHECK_NOTHROW(compile(seq, limit));
    CHECK_THROWS_AS(compile(seq, 1.01 * limit), DomainError);
    CHECK_THROWS_AS(compile(seq, 0.0), DomainError);
    CHECK_THROWS_AS(compile(PulseSequence{}, 1e-9), DomainError);
    const PulseSequence idle({Delay{.duration = 1.0}});
    CHECK(std::isinf(max_sampling_step(idle)));
    CHECK_NOTHROW(compile(idle, 0.5));
}

TEST_CASE("compiled samples cover the sequence") {
    const PulseSequence seq({make_ahp(kDrive, AhpDirection::into_plane)});
    const double dt = 2e-8;
    const CompiledDrive drv = compile(seq, dt);
    const auto s = drv.samples();
    CHECK(s.front().t == 0.0);
    CHECK(s.back().t == seq.total_duration());
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        CHECK(s[i].t - s[i - 1].t == Approx(dt).epsilon(1e-9).scale(0.0));
    }

    std::ostringstream os;
    write_waveform_csv(os, drv);
    const std::string csv = os.str();
    CHECK(csv.rfind("t_s,omega1_rad_s,phi_rad\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == s.size() + 1);
}

TEST_CASE("delay carries no drive") {
    const CompiledDrive drv = compile(PulseSequence({Delay{.duration = 10e-6}}), 1e-7);
    for (const auto& s : drv.samples()) CHECK(s.omega1 == 0.0);
}

TEST_CASE("symmetric chirp phase is an even parabola about the crossing") {
    const PulseSequence seq({make_afp(kDrive)});
    const double tc = 0.5 * seq.total_duration();
    for (double u : {1e-6, 13e-6, 40e-6, 74e-6}) {
        CHECK(seq.at(tc + u).phi == Approx(seq.at(tc - u).phi).epsilon(1e-12).scale(0.0));
        CHECK(seq.at(tc + u).phi > seq.at(tc).phi);
    }
}

TEST_CASE("phase derivative recovers the programmed detuning") {
    const PulseSequence seq({make_afp(kDrive)});
    const double dt = 1e-9;
    for (double t : {5e-6, 50e-6, 120e-6}) {
        const double d = (seq.at(t + dt).phi - seq.at(t - dt).phi) / (2.0 * dt);
        CHECK(d == Approx(seq.at(t).detuning).epsilon(1e-5).scale(hz_to_rad(1e3)));
    }
}

TEST_CASE("reversed sweep with negated phase is the time-reversed drive") {
    const PulseSequence up({make_afp(kDrive)});
    const PulseSequence down({make_afp(kDrive, kDefaultEdgeRamp, SweepDirection::down)});
    const double T = up.total_duration();
    for (int i = 0; i <= 100; ++i) {
        const double t = T * i / 100.0;
        CHECK(-down.at(t).phi == Approx(up.at(T - t).phi).epsilon(1e-10).scale(1.0));
    }
}

TEST_CASE("half passages switch abruptly at resonance") {
    const PulseSequence into({make_ahp(kDrive, AhpDirection::into_plane)});
    const double T = into.total_duration();
    CHECK(into.at(0.0).omega1 == 0.0);
    CHECK(into.at(T).omega1 == kDrive.rabi);
    const PulseSequence out({make_ahp(kDrive, AhpDirection::out_of_plane)});
    CHECK(out.at(0.0).omega1 == kDrive.rabi);
    CHECK(std::abs(out.at(out.total_duration()).omega1) < 1e-9);
    CHECK(std::get<Chirp>(make_afp(kDrive)).ramps == RampEnds::both);
    // A single ramp may take the whole segment.
    CHECK_NOTHROW(validate(PulseSegment{Chirp{.rabi = 1.0,
                                              .detuning_start = 0.0,
                                              .detuning_end = 1.0,
                                              .rate = 1.0,
                                              .edge_ramp = 0.9,
                                              .ramps = RampEnds::start}}));
}

TEST_CASE("chirp phase offset applies inside the segment only") {
    PulseSequence plain, shifted;
    plain.append(make_afp(kDrive)).append(make_afp(kDrive));
    shifted.append(make_afp(kDrive, kDefaultEdgeRamp, SweepDirection::up, 0.7)).append(make_afp(kDrive));
    const double mid = 0.5 * plain.end_time(0);
    CHECK(shifted.at(mid).phi == Approx(plain.at(mid).phi + 0.7).epsilon(1e-12).scale(0.0));
    CHECK(shifted.start_phase(1) == plain.start_phase(1));
    const double later = plain.start_time(1) + 10e-6;
    CHECK(shifted.at(later).phi == plain.at(later).phi);
}
