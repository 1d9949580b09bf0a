#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "arpsim/dynamics.hpp"
#include "arpsim/errors.hpp"

namespace arpsim {

/// y(t) = amplitude * exp(-t / time_constant) + offset.
struct DecayFit {
    double amplitude{0.0};
    double time_constant{0.0};
    double offset{0.0};
    /// Parameter order (amplitude, time_constant, offset); the offset row and
    /// column are zero when the offset was not fitted.
    std::array<std::array<double, 3>, 3> covariance{};
    double residual_rms{0.0};
    std::size_t iterations{0};
    bool with_offset{false};

    double operator()(double t) const noexcept;
    double time_constant_sd() const noexcept;
};

/// Fit failure; carries the best iterate reached, if any.
class FitError : public NumericalError {
public:
    FitError(const std::string& what, DecayFit best) : NumericalError(what), best_(best) {}
    const DecayFit& best_iterate() const noexcept { return best_; }

private:
    DecayFit best_;
};

struct DataPoint {
    double t{0.0};
    double y{0.0};
};

/// Damped Gauss-Newton (Levenberg-Marquardt) fit of an exponential decay.
/// Starts from a log-linear regression of y - min(y) (y itself without the
/// offset term); stops when every relative parameter change is below 1e-9, or
/// fails after 200 iterations.
DecayFit fit_exp_decay(std::span<const DataPoint> points, bool with_offset = false);

struct ReadoutParams {
    double alpha_l{0.6};
    double i_in{1.0};
};

/// Transmitted probe intensity i_in * exp(-2 alphaL pop) with probed-level
/// population pop = (1 - mz) / 2: the pumped state mz = +1 is transparent.
double transmission(double mz, const ReadoutParams& p);

/// Mean <Mz> of the trajectory inside [t_start, t_end] (the last sample when
/// the window holds none).
double window_mean_mz(const Trajectory& traj, double t_start, double t_end);

/// Longitudinal contrast after the closing half passage, normalized by the
/// same window of a relaxation-free reference run.
double echo_amplitude(const Trajectory& result, const Trajectory& reference, double t_start,
                      double t_end);

/// Same contrast from a pair of runs whose closing AHP phases differ by pi:
/// (Mz - Mz_pi) / (Mz_ref - Mz_ref_pi).
double phase_cycled_echo_amplitude(const Trajectory& result, const Trajectory& result_pi,
                                   const Trajectory& reference, const Trajectory& reference_pi,
                                   double t_start, double t_end);

/// JSON record of a fit (field names mirror DecayFit).
std::string fit_report_json(const DecayFit& fit);

/// CSV columns: t_s, signal, fit.
void write_decay_curve_csv(std::ostream& os, std::span<const DataPoint> points,
                           const DecayFit* fit);

/// Reads two-column (t_s, signal) CSV with a header row.
std::vector<DataPoint> read_decay_csv(std::istream& is);

}  // namespace arpsim
