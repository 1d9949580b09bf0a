#pragma once

#include <cmath>
#include <optional>
#include <variant>

namespace arpsim {

/// Magnetization in the frame rotating at the nominal spin resonance.
struct BlochVector {
    double mx{0.0};
    double my{0.0};
    double mz{0.0};

    double norm() const noexcept { return std::sqrt(mx * mx + my * my + mz * mz); }
    double transverse() const noexcept { return std::hypot(mx, my); }

    BlochVector& operator+=(const BlochVector& o) noexcept {
        mx += o.mx;
        my += o.my;
        mz += o.mz;
        return *this;
    }
    BlochVector& operator*=(double s) noexcept {
        mx *= s;
        my *= s;
        mz *= s;
        return *this;
    }
    friend BlochVector operator+(BlochVector a, const BlochVector& b) noexcept { return a += b; }
    friend BlochVector operator*(BlochVector a, double s) noexcept { return a *= s; }
    friend BlochVector operator*(double s, BlochVector a) noexcept { return a *= s; }
    friend bool operator==(const BlochVector&, const BlochVector&) = default;
};

/// Drive description, all angular: rabi = gamma*H1 (rad/s), chirp_rate = r
/// (rad/s^2), sweep_range = Delta_0 (rad/s), static_detuning = Delta (rad/s).
struct DriveParams {
    double rabi{0.0};
    double chirp_rate{0.0};
    double sweep_range{0.0};
    double static_detuning{0.0};
};

struct NoRelaxation {
    friend bool operator==(const NoRelaxation&, const NoRelaxation&) = default;
};

/// Phenomenological Bloch relaxation. t1 may be +infinity.
struct BlochRelaxation {
    double t1{0.0};
    double t2{0.0};
    friend bool operator==(const BlochRelaxation&, const BlochRelaxation&) = default;
};

enum class NoiseKind { jump, ornstein_uhlenbeck };

/// Explicit reservoir: a fluctuating frequency offset of RMS `delta` (rad/s)
/// and correlation time `tau_c` (s), optionally plus spin-lattice relaxation.
struct StochasticRelaxation {
    double delta{0.0};
    double tau_c{0.0};
    std::optional<double> t1;
    NoiseKind kind{NoiseKind::jump};
    friend bool operator==(const StochasticRelaxation&, const StochasticRelaxation&) = default;
};

using RelaxationSpec = std::variant<NoRelaxation, BlochRelaxation, StochasticRelaxation>;

/// Throws DomainError when a relaxation spec is unphysical.
void validate(const RelaxationSpec& rel);

/// "<<" is checked as lhs <= rhs / margin.
inline constexpr double kDefaultMargin = 10.0;

struct ConditionReport {
    double adiabaticity{0.0};       // rabi^2 / r
    // Relaxation-free flip from a longitudinal start: tau_f << T(H1).
    double longitudinal_lhs{0.0};   // delta^2 / r
    double longitudinal_rhs{0.0};   // rabi * tau_c / pi
    // Stricter version for a transverse start.
    double transverse_lhs{0.0};     // delta^2 / r
    double transverse_rhs{2.0};
    double flipping_time{0.0};      // s
    double locked_decay_time{0.0};  // T(H1) without the T1 channel, s
    double margin{kDefaultMargin};
    bool adiabatic{false};
    bool longitudinal_satisfied{false};
    bool transverse_satisfied{false};
};

/// tau_f = pi * rabi / chirp_rate.
double flipping_time(const DriveParams& d);

/// Inverse of flipping_time at fixed rabi.
double chirp_rate_for_flipping_time(double rabi, double tau_f);

/// 1/T2' = delta^2 * tau_c.
double t2_prime(const StochasticRelaxation& rel);

/// Field-dependent decay time of the locked magnetization:
///   1/T(H1) = 1/T1 + delta^2 tau_c / (1 + (rabi tau_c)^2).
/// Without t1 the spin-lattice term is dropped (and the result may be +inf
/// only if delta == 0, which the precondition excludes).
double locked_decay_time(const StochasticRelaxation& rel, double rabi);

/// T2'/T2 as a function of zeta = sqrt(3) delta tau_c.
double t2_prime_ratio(double zeta);

/// T2' from the zero-field T2 for uniformly distributed noise of RMS delta.
double t2_prime_from_t2(double t2, double delta, double tau_c);

/// theta = detuning^2 * tau / (2 rabi): differential precession angle of a
/// spin offset by `detuning` while locked to a drive of strength `rabi`.
double locking_angle_drift(double detuning, double tau, double rabi);

ConditionReport check_conditions(const DriveParams& d, const StochasticRelaxation& rel,
                                 double margin = kDefaultMargin);

}  // namespace arpsim
