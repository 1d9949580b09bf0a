#include "arpsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <json.hpp>

namespace arpsim {

namespace {

constexpr std::size_t kMaxIterations = 200;
constexpr double kRelativeStepTol = 1e-9;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Model evaluated in scaled time s = t / t_scale; params (A, T_scaled[, C]).
struct Model {
    std::span<const DataPoint> pts;
    double t_scale;
    bool with_offset;

    Eigen::Index n_params() const { return with_offset ? 3 : 2; }

    double cost(const Vec& p, Vec* residual = nullptr, Mat* jac = nullptr) const {
        const auto n = static_cast<Eigen::Index>(pts.size());
        if (residual) residual->resize(n);
        if (jac) jac->resize(n, n_params());
        double ssr = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double s = pts[static_cast<std::size_t>(i)].t / t_scale;
            const double e = std::exp(-s / p(1));
            const double model = p(0) * e + (with_offset ? p(2) : 0.0);
            const double r = pts[static_cast<std::size_t>(i)].y - model;
            ssr += r * r;
            if (residual) (*residual)(i) = r;
            if (jac) {
                (*jac)(i, 0) = e;
                (*jac)(i, 1) = p(0) * s * e / (p(1) * p(1));
                if (with_offset) (*jac)(i, 2) = 1.0;
            }
        }
        return ssr;
    }
};

DecayFit to_fit(const Model& m, const Vec& p, std::size_t iterations, double ssr, const Mat* jac) {
    DecayFit f;
    f.with_offset = m.with_offset;
    f.amplitude = p(0);
    f.time_constant = p(1) * m.t_scale;
    f.offset = m.with_offset ? p(2) : 0.0;
    f.iterations = iterations;
    const auto n = static_cast<double>(m.pts.size());
    f.residual_rms = std::sqrt(ssr / n);
    if (jac) {
        const Mat normal = jac->transpose() * (*jac);
        Eigen::FullPivLU<Mat> lu(normal);
        if (lu.isInvertible()) {
            const double dof = n - static_cast<double>(m.n_params());
            const Mat cov = (dof > 0.0 ? ssr / dof : 0.0) * lu.inverse();
            // Undo the time scaling on the T row/column.
            for (Eigen::Index i = 0; i < m.n_params(); ++i) {
                for (Eigen::Index j = 0; j < m.n_params(); ++j) {
                    const double si = i == 1 ? m.t_scale : 1.0;
                    const double sj = j == 1 ? m.t_scale : 1.0;
                    f.covariance[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                        cov(i, j) * si * sj;
                }
            }
        }
    }
    return f;
}

}  // namespace

double DecayFit::operator()(double t) const noexcept {
    return amplitude * std::exp(-t / time_constant) + offset;
}

double DecayFit::time_constant_sd() const noexcept { return std::sqrt(covariance[1][1]); }

DecayFit fit_exp_decay(std::span<const DataPoint> points, bool with_offset) {
    const std::size_t min_points = with_offset ? 5 : 4;
    if (points.size() < min_points) {
        throw DomainError(fmt::format("exponential fit needs at least {} points, got {}", min_points,
                                      points.size()));
    }
    std::vector<double> ts;
    ts.reserve(points.size());
    double t_scale = 0.0, y_min = std::numeric_limits<double>::infinity();
    for (const auto& pt : points) {
        if (!std::isfinite(pt.t) || !std::isfinite(pt.y)) {
            throw DomainError("exponential fit needs finite data");
        }
        ts.push_back(pt.t);
        t_scale = std::max(t_scale, std::abs(pt.t));
        y_min = std::min(y_min, pt.y);
    }
    std::sort(ts.begin(), ts.end());
    if (std::adjacent_find(ts.begin(), ts.end()) != ts.end()) {
        throw DomainError("exponential fit needs distinct time values");
    }
    if (t_scale == 0.0) t_scale = 1.0;
    const double span = (ts.back() - ts.front()) / t_scale;

    // Log-linear start.
    const double baseline = with_offset ? y_min : 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t used = 0;
    for (const auto& pt : points) {
        const double v = pt.y - baseline;
        if (v <= 0.0) continue;
        const double s = pt.t / t_scale, l = std::log(v);
        sx += s;
        sy += l;
        sxx += s * s;
        sxy += s * l;
        ++used;
    }
    const double denom = static_cast<double>(used) * sxx - sx * sx;
    if (used < 2 || denom <= 0.0) {
        throw FitError("decay not identifiable: no positive signal above baseline", DecayFit{});
    }
    const double slope = (static_cast<double>(used) * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / static_cast<double>(used);
    if (!(slope < 0.0)) {
        throw FitError("decay not identifiable: data do not decrease", DecayFit{});
    }

    const Model model{points, t_scale, with_offset};
    Vec p(model.n_params());
    p(0) = std::exp(intercept);
    p(1) = -1.0 / slope;
    if (with_offset) p(2) = baseline;

    Vec r;
    Mat jac;
    double cost = model.cost(p, &r, &jac);
    double lambda = 1e-3;
    for (std::size_t it = 1; it <= kMaxIterations; ++it) {
        const Mat normal = jac.transpose() * jac;
        Mat damped = normal;
        damped.diagonal() += lambda * normal.diagonal().cwiseMax(1e-300);
        const Vec step = damped.ldlt().solve(jac.transpose() * r);
        if (!step.allFinite()) {
            throw FitError("singular normal equations", to_fit(model, p, it, cost, nullptr));
        }
        double rel = 0.0;
        for (Eigen::Index j = 0; j < p.size(); ++j) {
            rel = std::max(rel, std::abs(step(j)) / std::max(std::abs(p(j)), 1e-300));
        }
        const Vec trial = p + step;
        double trial_cost = std::numeric_limits<double>::infinity();
        if (trial(1) > 0.0) trial_cost = model.cost(trial);
        if (trial_cost <= cost) {
            p = trial;
            cost = model.cost(p, &r, &jac);
            lambda = std::max(lambda * 0.1, 1e-12);
        } else {
            lambda *= 10.0;
        }
        if (p(1) > 1e6 * std::max(span, 1e-300)) {
            throw FitError("decay not identifiable: time constant unbounded",
                           to_fit(model, p, it, cost, nullptr));
        }
        if (rel < kRelativeStepTol) {
            return to_fit(model, p, it, cost, &jac);
        }
        if (lambda > 1e20) {
            throw FitError("fit stalled", to_fit(model, p, it, cost, &jac));
        }
    }
    throw FitError(fmt::format("exponential fit did not converge in {} iterations", kMaxIterations),
                   to_fit(model, p, kMaxIterations, cost, &jac));
}

double transmission(double mz, const ReadoutParams& p) {
    constexpr double slack = 1e-9;
    if (!(mz >= -1.0 - slack && mz <= 1.0 + slack)) {
        throw DomainError(fmt::format("mz = {:g} outside [-1, 1]", mz));
    }
    if (!(p.alpha_l >= 0.0)) {
        throw DomainError("optical depth must be >= 0");
    }
    const double pop = 0.5 * (1.0 - std::clamp(mz, -1.0, 1.0));
    return p.i_in * std::exp(-2.0 * p.alpha_l * pop);
}

double window_mean_mz(const Trajectory& traj, double t_start, double t_end) {
    if (traj.states.empty()) {
        throw DomainError("empty trajectory");
    }
    if (t_start > t_end || t_end < traj.times.front() || t_start > traj.times.back()) {
        throw DomainError("readout window outside the trajectory span");
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (traj.times[i] >= t_start && traj.times[i] <= t_end) {
            sum += traj.states[i].mz;
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : traj.final_state().mz;
}

double echo_amplitude(const Trajectory& result, const Trajectory& reference, double t_start,
                      double t_end) {
    const double ref = window_mean_mz(reference, t_start, t_end);
    if (std::abs(ref) < 1e-12) {
        throw NumericalError("echo reference contrast is zero");
    }
    return window_mean_mz(result, t_start, t_end) / ref;
}

double phase_cycled_echo_amplitude(const Trajectory& result, const Trajectory& result_pi,
                                   const Trajectory& reference, const Trajectory& reference_pi,
                                   double t_start, double t_end) {
    const double ref = window_mean_mz(reference, t_start, t_end) -
                       window_mean_mz(reference_pi, t_start, t_end);
    if (std::abs(ref) < 1e-12) {
        throw NumericalError("echo reference contrast is zero");
    }
    return (window_mean_mz(result, t_start, t_end) - window_mean_mz(result_pi, t_start, t_end)) /
           ref;
}

std::string fit_report_json(const DecayFit& fit) {
    nlohmann::ordered_json j;
    j["amplitude"] = fit.amplitude;
    j["timeConstant_s"] = fit.time_constant;
    j["timeConstantSd_s"] = fit.time_constant_sd();
    j["offset"] = fit.offset;
    j["withOffset"] = fit.with_offset;
    j["covariance"] = fit.covariance;
    j["residualRms"] = fit.residual_rms;
    j["iterations"] = fit.iterations;
    return j.dump(2);
}

void write_decay_curve_csv(std::ostream& os, std::span<const DataPoint> points,
                           const DecayFit* fit) {
    os << "t_s,signal,fit\n";
    for (const auto& pt : points) {
        if (fit) {
            os << fmt::format("{:.17g},{:.17g},{:.17g}\n", pt.t, pt.y, (*fit)(pt.t));
        } else {
            os << fmt::format("{:.17g},{:.17g},nan\n", pt.t, pt.y);
        }
    }
}

std::vector<DataPoint> read_decay_csv(std::istream& is) {
    std::vector<DataPoint> out;
    std::string line;
    std::size_t lineno = 0;
    bool header_skipped = false;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) {
            throw ConfigError(fmt::format("line {}: expected two comma-separated columns", lineno));
        }
        try {
            out.push_back({std::stod(a), std::stod(b)});
        } catch (const std::exception&) {
            if (out.empty() && !header_skipped) {
                header_skipped = true;
                continue;
            }
            throw ConfigError(fmt::format("line {}: not a number", lineno));
        }
    }
    return out;
}

}  // namespace arpsim
