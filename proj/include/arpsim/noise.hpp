#pragma once

#include <cstdint>
#include <vector>

#include "arpsim/core_model.hpp"
#include "arpsim/seeding.hpp"

namespace arpsim {

struct NoiseParams {
    double delta{0.0};  // RMS, rad/s
    double tau_c{0.0};  // s
    NoiseKind kind{NoiseKind::jump};
};

NoiseParams noise_params(const StochasticRelaxation& rel) noexcept;

/// Piecewise-constant random frequency offset Delta(t), started in its
/// stationary state at t = 0.
///
/// jump: the value is redrawn uniformly on [-sqrt(3) delta, +sqrt(3) delta] at
/// the events of a Poisson process with mean interval tau_c, which gives
/// <Delta(t) Delta(0)> = delta^2 exp(-|t|/tau_c).
///
/// ornstein_uhlenbeck: exact OU update held constant over intervals of
/// tau_c / kOuHoldsPerTauC. Same stationary variance and correlation time,
/// Gaussian marginal.
class NoiseProcess {
public:
    static constexpr double kOuHoldsPerTauC = 50.0;

    NoiseProcess(NoiseParams params, std::uint64_t seed);

    double value() const noexcept { return value_; }
    /// Time of the next value change (+inf when delta == 0).
    double next_change() const noexcept { return next_; }
    /// Move past every change at or before t.
    void advance_to(double t);
    /// Value at time t >= current position (advances the process).
    double sample(double t);

    const NoiseParams& params() const noexcept { return p_; }

private:
    void draw_next();

    NoiseParams p_;
    Engine eng_;
    double value_{0.0};
    double now_{0.0};
    double next_;
};

struct AutocorrelationPoint {
    double lag{0.0};          // s
    double correlation{0.0};  // (rad/s)^2
    double std_error{0.0};
};

/// Empirical <Delta(t) Delta(t + lag)> at lags k * max_lag / (n_lags - 1),
/// each from n_samples independent stationary realizations, so the standard
/// error is the plain sample standard deviation over sqrt(n_samples).
std::vector<AutocorrelationPoint> noise_autocorrelation(const NoiseParams& params,
                                                        std::uint64_t seed, double max_lag,
                                                        std::size_t n_lags,
                                                        std::size_t n_samples);

}  // namespace arpsim
