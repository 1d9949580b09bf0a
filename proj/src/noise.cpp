#include "arpsim/noise.hpp"

#include <cmath>
#include <limits>

#include "arpsim/errors.hpp"

namespace arpsim {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

NoiseParams noise_params(const StochasticRelaxation& rel) noexcept {
    return {.delta = rel.delta, .tau_c = rel.tau_c, .kind = rel.kind};
}

NoiseProcess::NoiseProcess(NoiseParams params, std::uint64_t seed) : p_(params), eng_(seed) {
    if (!(p_.delta >= 0.0) || !(p_.tau_c > 0.0)) {
        throw DomainError("noise needs delta >= 0 and tau_c > 0");
    }
    if (p_.delta == 0.0) {
        next_ = kInf;
        return;
    }
    if (p_.kind == NoiseKind::jump) {
        const double a = std::sqrt(3.0) * p_.delta;
        value_ = uniform(eng_, -a, a);
    } else {
        value_ = p_.delta * standard_normal(eng_);
    }
    draw_next();
}

void NoiseProcess::draw_next() {
    if (p_.kind == NoiseKind::jump) {
        next_ = now_ + exponential(eng_, p_.tau_c);
    } else {
        next_ = now_ + p_.tau_c / kOuHoldsPerTauC;
    }
}

void NoiseProcess::advance_to(double t) {
    while (next_ <= t) {
        now_ = next_;
        if (p_.kind == NoiseKind::jump) {
            const double a = std::sqrt(3.0) * p_.delta;
            value_ = uniform(eng_, -a, a);
        } else {
            const double h = p_.tau_c / kOuHoldsPerTauC;
            const double rho = std::exp(-h / p_.tau_c);
            value_ = rho * value_ + p_.delta * std::sqrt(1.0 - rho * rho) * standard_normal(eng_);
        }
        draw_next();
    }
    if (t > now_) now_ = t;
}

double NoiseProcess::sample(double t) {
    advance_to(t);
    return value_;
}

std::vector<AutocorrelationPoint> noise_autocorrelation(const NoiseParams& params,
                                                        std::uint64_t seed, double max_lag,
                                                        std::size_t n_lags,
                                                        std::size_t n_samples) {
    if (n_samples < 10000) {
        throw DomainError("autocorrelation estimate needs at least 1e4 samples");
    }
    if (n_lags == 0 || !(max_lag >= 0.0)) {
        throw DomainError("autocorrelation needs n_lags >= 1 and max_lag >= 0");
    }
    std::vector<AutocorrelationPoint> out(n_lags);
    std::vector<double> sum(n_lags, 0.0), sum2(n_lags, 0.0);
    const double step = n_lags > 1 ? max_lag / static_cast<double>(n_lags - 1) : 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) {
        NoiseProcess proc(params, derive_seed(seed, 0, s));
        const double v0 = proc.value();
        for (std::size_t k = 0; k < n_lags; ++k) {
            const double prod = v0 * proc.sample(static_cast<double>(k) * step);
            sum[k] += prod;
            sum2[k] += prod * prod;
        }
    }
    const auto n = static_cast<double>(n_samples);
    for (std::size_t k = 0; k < n_lags; ++k) {
        const double mean = sum[k] / n;
        const double var = std::max(0.0, (sum2[k] / n - mean * mean) * n / (n - 1.0));
        out[k] = {.lag = static_cast<double>(k) * step,
                  .correlation = mean,
                  .std_error = std::sqrt(var / n)};
    }
    return out;
}

}  // namespace arpsim
