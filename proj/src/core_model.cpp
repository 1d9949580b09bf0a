#include "arpsim/core_model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "arpsim/errors.hpp"
#include "arpsim/units.hpp"

namespace arpsim {

namespace {

constexpr double kSeriesSwitchover = 1e-2;

bool positive(double x) { return x > 0.0 && !std::isnan(x); }

struct Validator {
    void operator()(const NoRelaxation&) const {}
    void operator()(const BlochRelaxation& b) const {
        if (!positive(b.t1) || !positive(b.t2)) {
            throw DomainError("Bloch relaxation times must be positive");
        }
        if (b.t2 > 2.0 * b.t1) {
            throw DomainError("Bloch relaxation requires t2 <= 2*t1");
        }
    }
    void operator()(const StochasticRelaxation& s) const {
        if (!(s.delta >= 0.0) || !std::isfinite(s.delta)) {
            throw DomainError("noise amplitude delta must be finite and >= 0");
        }
        if (!positive(s.tau_c) || !std::isfinite(s.tau_c)) {
            throw DomainError("noise correlation time tau_c must be finite and > 0");
        }
        if (s.t1 && !positive(*s.t1)) {
            throw DomainError("t1 must be positive");
        }
    }
};

}  // namespace

void validate(const RelaxationSpec& rel) { std::visit(Validator{}, rel); }

double flipping_time(const DriveParams& d) {
    if (!positive(d.chirp_rate)) {
        throw DomainError("flipping time needs a positive chirp rate");
    }
    return kPi * d.rabi / d.chirp_rate;
}

double chirp_rate_for_flipping_time(double rabi, double tau_f) {
    if (!positive(rabi) || !positive(tau_f)) {
        throw DomainError("rabi and flipping time must be positive");
    }
    return kPi * rabi / tau_f;
}

double t2_prime(const StochasticRelaxation& rel) {
    if (!positive(rel.delta) || !positive(rel.tau_c)) {
        throw DomainError("T2' needs delta > 0 and tau_c > 0");
    }
    return 1.0 / (rel.delta * rel.delta * rel.tau_c);
}

double locked_decay_time(const StochasticRelaxation& rel, double rabi) {
    if (rabi < 0.0) {
        throw DomainError("rabi must be >= 0");
    }
    const double x = rabi * rel.tau_c;
    double rate = 1.0 / (t2_prime(rel) * (1.0 + x * x));
    if (rel.t1) {
        rate += 1.0 / *rel.t1;
    }
    return 1.0 / rate;
}

double t2_prime_ratio(double zeta) {
    if (!(zeta >= 0.0)) {
        throw DomainError("zeta must be >= 0");
    }
    if (zeta < kSeriesSwitchover) {
        const double z2 = zeta * zeta;
        return 1.0 + z2 * (-4.0 / 15.0 + z2 * (44.0 / 315.0 + z2 * (-428.0 / 4725.0 + z2 * 10196.0 / 155925.0)));
    }
    // zeta/atan(zeta) - 1 cancels badly near the switchover.
    const long double z = zeta;
    const long double r = 3.0L / (z * z) * (z / std::atan(z) - 1.0L);
    return static_cast<double>(r);
}

double t2_prime_from_t2(double t2, double delta, double tau_c) {
    if (!positive(t2) || !positive(delta) || !positive(tau_c)) {
        throw DomainError("t2, delta and tau_c must be positive");
    }
    return t2 * t2_prime_ratio(std::sqrt(3.0) * delta * tau_c);
}

double locking_angle_drift(double detuning, double tau, double rabi) {
    if (!positive(rabi)) {
        throw DomainError("locking angle needs rabi > 0");
    }
    return detuning * detuning * tau / (2.0 * rabi);
}

ConditionReport check_conditions(const DriveParams& d, const StochasticRelaxation& rel,
                                 double margin) {
    if (!positive(d.chirp_rate)) {
        throw DomainError("condition check needs a positive chirp rate");
    }
    if (!positive(margin)) {
        throw DomainError("margin factor must be positive");
    }
    ConditionReport rep;
    rep.margin = margin;
    rep.flipping_time = flipping_time(d);
    rep.adiabaticity = d.rabi * d.rabi / d.chirp_rate;
    rep.longitudinal_lhs = rel.delta * rel.delta / d.chirp_rate;
    rep.longitudinal_rhs = d.rabi * rel.tau_c / kPi;
    rep.transverse_lhs = rep.longitudinal_lhs;
    rep.transverse_rhs = 2.0;
    StochasticRelaxation no_t1 = rel;
    no_t1.t1.reset();
    rep.locked_decay_time = rel.delta > 0.0 ? locked_decay_time(no_t1, d.rabi)
                                            : std::numeric_limits<double>::infinity();
    rep.adiabatic = rep.adiabaticity >= margin;
    rep.longitudinal_satisfied = rep.longitudinal_lhs <= rep.longitudinal_rhs / margin;
    rep.transverse_satisfied = rep.transverse_lhs <= rep.transverse_rhs / margin;
    return rep;
}

}  // namespace arpsim
