#include "arpsim/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <ostream>
#include <thread>

#include <boost/math/special_functions/erf.hpp>
#include <fmt/format.h>

#include "arpsim/errors.hpp"
#include "arpsim/units.hpp"

namespace arpsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxStepsPerSpan = 1e12;

struct Vec3 {
    double x, y, z;
};

Vec3 cross(const Vec3& a, const BlochVector& m) noexcept {
    return {a.y * m.mz - a.z * m.my, a.z * m.mx - a.x * m.mz, a.x * m.my - a.y * m.mx};
}

// Right-handed rotation of m by the rotation vector v (axis * angle).
void rotate(BlochVector& m, const Vec3& v) noexcept {
    const double theta = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
    if (theta == 0.0) return;
    const double kx = v.x / theta, ky = v.y / theta, kz = v.z / theta;
    const double c = std::cos(theta), s = std::sin(theta);
    const double kdotm = kx * m.mx + ky * m.my + kz * m.mz;
    const double cx = ky * m.mz - kz * m.my;
    const double cy = kz * m.mx - kx * m.mz;
    const double cz = kx * m.my - ky * m.mx;
    const double k1 = kdotm * (1.0 - c);
    m = {m.mx * c + cx * s + kx * k1, m.my * c + cy * s + ky * k1, m.mz * c + cz * s + kz * k1};
}

struct Rates {
    double r1{0.0};  // 1/T1
    double r2{0.0};  // 1/T2, transverse
    double meq{1.0};
    double tau_c{kInf};
    bool stochastic{false};
};

Rates rates_of(const RelaxationSpec& rel) {
    Rates r;
    if (const auto* b = std::get_if<BlochRelaxation>(&rel)) {
        r.r1 = 1.0 / b->t1;
        r.r2 = 1.0 / b->t2;
    } else if (const auto* s = std::get_if<StochasticRelaxation>(&rel)) {
        r.r1 = s->t1 ? 1.0 / *s->t1 : 0.0;
        r.tau_c = s->tau_c;
        r.stochastic = true;
    }
    return r;
}

struct RelaxMap {
    double f1{1.0}, f2{1.0}, meq{1.0};
    RelaxMap(const Rates& r, double h) : f1(std::exp(-r.r1 * h)), f2(std::exp(-r.r2 * h)), meq(r.meq) {}
    void apply(BlochVector& m) const noexcept {
        m.mx *= f2;
        m.my *= f2;
        m.mz = meq + (m.mz - meq) * f1;
    }
};

Vec3 field(const DriveSample& s, double detuning) noexcept {
    return {s.omega1 * std::cos(s.phi), s.omega1 * std::sin(s.phi), -detuning};
}

class Propagator {
public:
    Propagator(const PulseSequence& seq, const Rates& rates, const IntegratorOptions& opts,
               double base_step)
        : seq_(seq), rates_(rates), opts_(opts), base_step_(base_step),
          max_angle_(max_step_angle(opts.tol)) {}

    // Advance m over [tau0, tau0 + span] inside segment k at constant detuning.
    void advance(BlochVector& m, std::size_t k, double tau0, double span, double detuning) const {
        if (span <= 0.0) return;
        const PulseSegment& seg = seq_.segments()[k];
        if (opts_.stepper == Stepper::magnus4 && !drives(seg)) {
            rotate(m, {0.0, 0.0, -detuning * span});
            RelaxMap(rates_, span).apply(m);
            return;
        }
        const double rate = PulseSequence::segment_max_rabi(seg) + std::abs(detuning) +
                            PulseSequence::segment_max_abs_detuning(seg);
        double hmax = base_step_;
        if (rate > 0.0) hmax = std::min(hmax, max_angle_ / rate);
        const double nsteps = std::ceil(span / hmax);
        if (!(nsteps < kMaxStepsPerSpan)) {
            throw NumericalError(fmt::format("step-size underflow: {:g} steps over {:g} s", nsteps, span));
        }
        const auto n = static_cast<std::size_t>(std::max(1.0, nsteps));
        const double h = span / static_cast<double>(n);
        if (opts_.stepper == Stepper::magnus4) {
            magnus(m, k, tau0, h, n, detuning);
        } else {
            rk4(m, k, tau0, h, n, detuning);
        }
    }

private:
    void magnus(BlochVector& m, std::size_t k, double tau0, double h, std::size_t n,
                double detuning) const {
        static const double s3 = std::sqrt(3.0);
        static const double c1 = 0.5 - s3 / 6.0, c2 = 0.5 + s3 / 6.0;
        static const double a1 = 0.25 + s3 / 6.0, a2 = 0.25 - s3 / 6.0;
        const RelaxMap half(rates_, 0.5 * h);
        for (std::size_t i = 0; i < n; ++i) {
            const double tau = tau0 + static_cast<double>(i) * h;
            const Vec3 w1 = field(seq_.at_local(k, tau + c1 * h), detuning);
            const Vec3 w2 = field(seq_.at_local(k, tau + c2 * h), detuning);
            half.apply(m);
            rotate(m, {h * (a1 * w1.x + a2 * w2.x), h * (a1 * w1.y + a2 * w2.y),
                       h * (a1 * w1.z + a2 * w2.z)});
            rotate(m, {h * (a2 * w1.x + a1 * w2.x), h * (a2 * w1.y + a1 * w2.y),
                       h * (a2 * w1.z + a1 * w2.z)});
            half.apply(m);
        }
    }

    BlochVector rhs(const Vec3& w, const BlochVector& m) const noexcept {
        const Vec3 c = cross(w, m);
        return {c.x - rates_.r2 * m.mx, c.y - rates_.r2 * m.my,
                c.z - rates_.r1 * (m.mz - rates_.meq)};
    }

    void rk4(BlochVector& m, std::size_t k, double tau0, double h, std::size_t n,
             double detuning) const {
        for (std::size_t i = 0; i < n; ++i) {
            const double tau = tau0 + static_cast<double>(i) * h;
            const Vec3 w0 = field(seq_.at_local(k, tau), detuning);
            const Vec3 wm = field(seq_.at_local(k, tau + 0.5 * h), detuning);
            const Vec3 w1 = field(seq_.at_local(k, tau + h), detuning);
            const BlochVector k1 = rhs(w0, m);
            const BlochVector k2 = rhs(wm, m + (0.5 * h) * k1);
            const BlochVector k3 = rhs(wm, m + (0.5 * h) * k2);
            const BlochVector k4 = rhs(w1, m + h * k3);
            m += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    }

    const PulseSequence& seq_;
    Rates rates_;
    IntegratorOptions opts_;
    double base_step_;
    double max_angle_;
};

bool finite(const BlochVector& m) noexcept {
    return std::isfinite(m.mx) && std::isfinite(m.my) && std::isfinite(m.mz);
}

}  // namespace

double max_step_angle(double tol) {
    if (!(tol >= 1e-12 && tol <= 1e-4)) {
        throw DomainError(fmt::format("integrator tolerance {:g} outside [1e-12, 1e-4]", tol));
    }
    return std::min(kTwoPi / 20.0, 5.0 * std::pow(tol, 0.2));
}

Trajectory integrate(const BlochVector& m0, const CompiledDrive& drive, double inhom_detuning,
                     const RelaxationSpec& rel, NoiseProcess* noise, const IntegratorOptions& opts) {
    validate(rel);
    if (!finite(m0) || !std::isfinite(inhom_detuning)) {
        throw DomainError("initial state and detuning must be finite");
    }
    const PulseSequence& seq = drive.sequence();
    const Rates rates = rates_of(rel);
    double base_step = drive.dt();
    if (rates.stochastic) base_step = std::min(base_step, rates.tau_c / 20.0);
    const Propagator prop(seq, rates, opts, base_step);

    const double total = seq.total_duration();
    const bool recording = opts.record_dt > 0.0;
    std::size_t next_rec = 1;
    auto record_time = [&] {
        return recording ? static_cast<double>(next_rec) * opts.record_dt : kInf;
    };

    Trajectory out;
    if (recording) {
        const auto expected = static_cast<std::size_t>(total / opts.record_dt) + 2;
        out.times.reserve(expected);
        out.states.reserve(expected);
    }
    out.times.push_back(0.0);
    out.states.push_back(m0);

    BlochVector m = m0;
    double t = 0.0;
    for (std::size_t k = 0; k < seq.size(); ++k) {
        const double seg_start = seq.start_time(k);
        const double seg_end = seq.start_time(k + 1);
        while (t < seg_end) {
            double tb = std::min(seg_end, record_time());
            if (noise) tb = std::min(tb, noise->next_change());
            if (tb <= t) tb = seg_end;
            const double detuning = inhom_detuning + (noise ? noise->value() : 0.0);
            prop.advance(m, k, t - seg_start, tb - t, detuning);
            if (!finite(m)) {
                throw NumericalError(fmt::format("non-finite magnetization at t = {:g} s", tb));
            }
            t = tb;
            if (noise) noise->advance_to(t);
            while (recording && record_time() <= t) {
                if (record_time() < total) {
                    out.times.push_back(t);
                    out.states.push_back(m);
                }
                ++next_rec;
            }
        }
    }
    if (out.times.back() < total || out.times.size() == 1) {
        out.times.push_back(total);
        out.states.push_back(m);
    }
    return out;
}

void validate(const EnsembleSpec& ens) {
    if (ens.n_spins < 1 || ens.n_noise < 1) {
        throw DomainError("ensemble needs n_spins >= 1 and n_noise >= 1");
    }
    if (!(ens.inhom_width >= 0.0) || !std::isfinite(ens.inhom_width)) {
        throw DomainError("inhomogeneous width must be finite and >= 0");
    }
}

std::vector<double> ensemble_detunings(const EnsembleSpec& ens) {
    validate(ens);
    const double sigma = ens.inhom_width / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    std::vector<double> out(ens.n_spins, 0.0);
    if (sigma == 0.0) return out;
    const auto n = static_cast<double>(ens.n_spins);
    for (std::size_t i = 0; i < ens.n_spins; ++i) {
        const double p = (static_cast<double>(i) + 0.5) / n;
        out[i] = sigma * std::sqrt(2.0) * boost::math::erf_inv(2.0 * p - 1.0);
    }
    return out;
}

EnsembleResult run_ensemble(const BlochVector& m0, const CompiledDrive& drive,
                            const EnsembleSpec& ens, const RelaxationSpec& rel,
                            const RunOptions& opts) {
    validate(rel);
    const std::vector<double> detunings = ensemble_detunings(ens);
    const auto* stoch = std::get_if<StochasticRelaxation>(&rel);
    const bool noisy = stoch && stoch->delta > 0.0;
    const std::size_t n_noise = noisy ? ens.n_noise : 1;
    const std::size_t total = detunings.size() * n_noise;
    const std::size_t threads = std::max<std::size_t>(1, opts.threads);

    struct Slot {
        std::optional<Trajectory> traj;
        std::exception_ptr error;
    };

    auto run_one = [&](std::size_t idx) {
        const std::size_t member = idx / n_noise;
        const std::size_t realization = idx % n_noise;
        const double det = detunings[member] + opts.detuning_offset;
        if (noisy) {
            NoiseProcess proc(noise_params(*stoch), derive_seed(ens.master_seed, member, realization));
            return integrate(m0, drive, det, rel, &proc, opts.integrator);
        }
        return integrate(m0, drive, det, rel, nullptr, opts.integrator);
    };

    EnsembleResult result;
    std::vector<BlochVector> sum;
    std::vector<BlochVector> member_sum(detunings.size());

    const std::size_t chunk = 16 * threads;
    std::vector<Slot> slots;
    for (std::size_t base = 0; base < total; base += chunk) {
        const std::size_t count = std::min(chunk, total - base);
        slots.assign(count, Slot{});
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    slots[i].traj = run_one(base + i);
                } catch (...) {
                    slots[i].error = std::current_exception();
                }
            }
        };
        if (threads == 1) {
            worker();
        } else {
            std::vector<std::jthread> pool;
            pool.reserve(threads);
            for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker);
        }
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t member = (base + i) / n_noise;
            if (slots[i].error) {
                try {
                    std::rethrow_exception(slots[i].error);
                } catch (const NumericalError& e) {
                    throw NumericalError(fmt::format("ensemble member {}: {}", member, e.what()));
                }
            }
            const Trajectory& tr = *slots[i].traj;
            if (base + i == 0) {
                result.average.times = tr.times;
                sum.assign(tr.size(), BlochVector{});
            } else if (tr.size() != sum.size()) {
                throw NumericalError("ensemble trajectories disagree on the record grid");
            }
            for (std::size_t j = 0; j < tr.size(); ++j) sum[j] += tr.states[j];
            member_sum[member] += tr.final_state();
        }
    }

    const double inv_total = 1.0 / static_cast<double>(total);
    result.average.states.resize(sum.size());
    for (std::size_t j = 0; j < sum.size(); ++j) result.average.states[j] = sum[j] * inv_total;
    const double inv_noise = 1.0 / static_cast<double>(n_noise);
    result.members.reserve(detunings.size());
    for (std::size_t i = 0; i < detunings.size(); ++i) {
        result.members.push_back({.member = i,
                                  .detuning = detunings[i] + opts.detuning_offset,
                                  .final_state = member_sum[i] * inv_noise});
    }
    return result;
}

double flipping_efficiency(double mz_initial, double mz_final) {
    if (mz_initial == 0.0) {
        throw DomainError("flipping efficiency undefined for zero initial Mz");
    }
    return (mz_initial - mz_final) / (2.0 * mz_initial);
}

double flipping_efficiency(const Trajectory& traj) {
    if (traj.states.empty()) {
        throw DomainError("empty trajectory");
    }
    return flipping_efficiency(traj.initial_state().mz, traj.final_state().mz);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << "t_s,mx,my,mz\n";
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const auto& m = traj.states[i];
        os << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g}\n", traj.times[i], m.mx, m.my, m.mz);
    }
}

void write_ensemble_summary_csv(std::ostream& os, const std::vector<MemberFinal>& members) {
    os << "member,detuning_hz,final_mx,final_my,final_mz\n";
    for (const auto& m : members) {
        os << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", m.member, rad_to_hz(m.detuning),
                          m.final_state.mx, m.final_state.my, m.final_state.mz);
    }
}

}  // namespace arpsim
