#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "arpsim/core_model.hpp"
#include "arpsim/noise.hpp"
#include "arpsim/sequence.hpp"

namespace arpsim {

// Equation of motion in the frame rotating at the nominal resonance:
//
//   dM/dt = W(t) x M - R(M),   W = (w1 cos(phi), w1 sin(phi), -(D_inhom + D_noise(t)))
//
// R = (Mx/T2, My/T2, (Mz - 1)/T1) for Bloch relaxation, (0, 0, (Mz - 1)/T1) for
// the stochastic model (dephasing only through D_noise) and 0 otherwise. The
// equilibrium is Mz = +1, the optically pumped state.
//
// With this sign convention a chirp sweeping the drive upward through
// resonance carries W from +z to -z.

enum class Stepper {
    /// Fourth-order commutator-free Magnus rotation, Strang-split with the
    /// exact relaxation map. Norm-preserving; rf-off spans are propagated
    /// exactly between noise jumps.
    magnus4,
    /// Classical fourth-order Runge-Kutta on the full right-hand side.
    rk4,
};

struct IntegratorOptions {
    Stepper stepper{Stepper::magnus4};
    /// Accuracy knob in [1e-12, 1e-4]; bounds the rotation angle per step to
    /// min(2 pi / 20, 5 tol^(1/5)).
    double tol{1e-6};
    /// Spacing of recorded states; <= 0 records only the initial and final state.
    double record_dt{0.0};
};

struct Trajectory {
    std::vector<double> times;
    std::vector<BlochVector> states;

    const BlochVector& initial_state() const { return states.front(); }
    const BlochVector& final_state() const { return states.back(); }
    std::size_t size() const noexcept { return times.size(); }
};

/// Largest rotation angle per integration step for a tolerance.
double max_step_angle(double tol);

/// Integrates one spin. `noise` may be null; when given it is advanced in
/// place and its jumps are resolved exactly by splitting steps.
Trajectory integrate(const BlochVector& m0, const CompiledDrive& drive, double inhom_detuning,
                     const RelaxationSpec& rel, NoiseProcess* noise,
                     const IntegratorOptions& opts = {});

struct EnsembleSpec {
    double inhom_width{0.0};  // FWHM of the Gaussian detuning profile, rad/s
    std::size_t n_spins{1};
    std::size_t n_noise{1};
    std::uint64_t master_seed{0};

    friend bool operator==(const EnsembleSpec&, const EnsembleSpec&) = default;
};

void validate(const EnsembleSpec& ens);

/// Member detunings: Gaussian quantiles at (i + 1/2) / n_spins (stratified,
/// deterministic); a single member sits at line center.
std::vector<double> ensemble_detunings(const EnsembleSpec& ens);

struct MemberFinal {
    std::size_t member{0};
    double detuning{0.0};    // rad/s
    BlochVector final_state; // averaged over the member's noise realizations
};

struct EnsembleResult {
    Trajectory average;
    std::vector<MemberFinal> members;
};

struct RunOptions {
    IntegratorOptions integrator;
    std::size_t threads{1};
    /// Added to every member detuning (line center offset from the frame).
    double detuning_offset{0.0};
};

/// Averages over n_spins detunings x n_noise noise realizations. Trajectory
/// (member, k) draws its noise from derive_seed(master_seed, member, k); the
/// sum is accumulated in index order, so the result does not depend on the
/// thread count. Without a noise source every realization of a member is
/// identical and only one is integrated.
EnsembleResult run_ensemble(const BlochVector& m0, const CompiledDrive& drive,
                            const EnsembleSpec& ens, const RelaxationSpec& rel,
                            const RunOptions& opts = {});

/// eta = (Mz_initial - Mz_final) / (2 Mz_initial).
double flipping_efficiency(const Trajectory& traj);
double flipping_efficiency(double mz_initial, double mz_final);

/// CSV columns: t_s, mx, my, mz.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
/// CSV columns: member, detuning_hz, final_mx, final_my, final_mz.
void write_ensemble_summary_csv(std::ostream& os, const std::vector<MemberFinal>& members);

}  // namespace arpsim
