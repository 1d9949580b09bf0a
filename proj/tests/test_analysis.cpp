#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "arpsim/analysis.hpp"
#include "arpsim/config.hpp"
#include "arpsim/experiments.hpp"
#include "arpsim/seeding.hpp"
#include "arpsim/units.hpp"

using namespace arpsim;
using doctest::Approx;

namespace {

std::vector<DataPoint> decay(double a, double t, double c, std::size_t n, double t0, double t1) {
    std::vector<DataPoint> out;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n - 1);
        out.push_back({x, a * std::exp(-x / t) + c});
    }
    return out;
}

std::vector<DataPoint> fixture() {
    std::ifstream in(ARPSIM_TEST_DATA_DIR "/echo_decay_550us.csv");
    REQUIRE(in.good());
    return read_decay_csv(in);
}

}  // namespace

TEST_CASE("exact recovery on noiseless data") {
    const auto pts = decay(1.0, 550e-6, 0.0, 20, 0.0, 2e-3);
    const DecayFit f = fit_exp_decay(pts);
    CHECK(f.time_constant == Approx(550e-6).epsilon(1e-6).scale(0.0));
    CHECK(f.amplitude == Approx(1.0).epsilon(1e-6).scale(0.0));
    CHECK(f.offset == 0.0);
    CHECK(f.residual_rms < 1e-8);
    CHECK(f.iterations <= 200);

    const DecayFit g = fit_exp_decay(decay(0.7, 3.0, 0.2, 30, 0.0, 10.0), true);
    CHECK(g.time_constant == Approx(3.0).epsilon(1e-6).scale(0.0));
    CHECK(g.amplitude == Approx(0.7).epsilon(1e-6).scale(0.0));
    CHECK(g.offset == Approx(0.2).epsilon(1e-6).scale(0.0));
    CHECK(g.residual_rms < 1e-8);
}

TEST_CASE("fit matches an independent least-squares solution") {
    const auto pts = fixture();
    REQUIRE(pts.size() == 16);
    const DecayFit f = fit_exp_decay(pts);
    CHECK(f.amplitude == Approx(0.8011854624056263).epsilon(1e-7).scale(0.0));
    CHECK(f.time_constant == Approx(5.366794225116239e-4).epsilon(1e-7).scale(0.0));
    CHECK(f.time_constant_sd() == Approx(7.63131842756595e-06).epsilon(1e-5).scale(0.0));
    CHECK(std::sqrt(f.covariance[0][0]) == Approx(0.0078037895026703405).epsilon(1e-5).scale(0.0));

    const DecayFit g = fit_exp_decay(pts, true);
    CHECK(g.amplitude == Approx(0.803427017946871).epsilon(1e-6).scale(0.0));
    CHECK(g.time_constant == Approx(5.517188724851895e-4).epsilon(1e-6).scale(0.0));
    CHECK(g.offset == Approx(-0.00672041100999565).epsilon(1e-5).scale(0.0));
    CHECK(g.time_constant_sd() == Approx(1.451798454555618e-05).epsilon(1e-4).scale(0.0));
    CHECK(std::sqrt(g.covariance[2][2]) == Approx(0.00547933794538119).epsilon(1e-4).scale(0.0));
}

TEST_CASE("covariance is symmetric positive semidefinite") {
    const DecayFit g = fit_exp_decay(fixture(), true);
    for (int i = 0; i < 3; ++i) {
        CHECK(g.covariance[i][i] >= 0.0);
        for (int j = 0; j < 3; ++j) {
            CHECK(g.covariance[i][j] == Approx(g.covariance[j][i]).epsilon(1e-12).scale(0.0));
            CHECK(g.covariance[i][j] * g.covariance[i][j] <=
                  g.covariance[i][i] * g.covariance[j][j] * (1.0 + 1e-12));
        }
    }
    const DecayFit f = fit_exp_decay(fixture());
    CHECK(f.covariance[2][2] == 0.0);
    CHECK(f.covariance[0][2] == 0.0);
}

TEST_CASE("reported standard deviation is calibrated") {
    // Noise sigma 0.01 on 20 points over [0, 2 ms]; count how often the true T
    // lies within 3 reported standard deviations.
    Engine eng(2024);
    int inside = 0;
    const int trials = 400;
    double pulls = 0.0;
    for (int k = 0; k < trials; ++k) {
        auto pts = decay(1.0, 550e-6, 0.0, 20, 0.0, 2e-3);
        for (auto& p : pts) p.y += 0.01 * standard_normal(eng);
        const DecayFit f = fit_exp_decay(pts);
        const double pull = (f.time_constant - 550e-6) / f.time_constant_sd();
        pulls += pull * pull;
        if (std::abs(pull) <= 3.0) ++inside;
    }
    CHECK(inside >= trials * 0.98);
    CHECK(std::sqrt(pulls / trials) == Approx(1.0).epsilon(0.15).scale(0.0));
}

TEST_CASE("shift equivariance") {
    const double t = 550e-6, t0 = 300e-6;
    const auto base = decay(0.9, t, 0.0, 20, 0.0, 2e-3);
    auto shifted = base;
    for (auto& p : shifted) p.t += t0;
    const DecayFit a = fit_exp_decay(base);
    const DecayFit b = fit_exp_decay(shifted);
    CHECK(b.time_constant == Approx(a.time_constant).epsilon(1e-8).scale(0.0));
    CHECK(b.amplitude == Approx(a.amplitude * std::exp(t0 / t)).epsilon(1e-8).scale(0.0));
}

TEST_CASE("degenerate fits") {
    std::vector<DataPoint> flat;
    for (int i = 0; i < 10; ++i) flat.push_back({i * 1e-4, 0.5});
    CHECK_THROWS_AS(fit_exp_decay(flat, true), FitError);
    CHECK_THROWS_AS(fit_exp_decay(flat, false), FitError);

    const auto pts = decay(1.0, 1.0, 0.0, 3, 0.0, 1.0);
    CHECK_THROWS_AS(fit_exp_decay(pts), DomainError);
    CHECK_THROWS_AS(fit_exp_decay(decay(1.0, 1.0, 0.0, 4, 0.0, 1.0), true), DomainError);
    std::vector<DataPoint> dup{{0, 1}, {1, 0.5}, {1, 0.4}, {2, 0.2}};
    CHECK_THROWS_AS(fit_exp_decay(dup), DomainError);
    std::vector<DataPoint> rising{{0, 0.1}, {1, 0.2}, {2, 0.4}, {3, 0.8}};
    CHECK_THROWS_AS(fit_exp_decay(rising), FitError);
}

TEST_CASE("transmission") {
    const ReadoutParams p{.alpha_l = 0.6};
    CHECK(transmission(1.0, p) == 1.0);
    CHECK(std::abs(transmission(-1.0, p) - 0.301194211912202) < 1e-12);
    CHECK(std::abs(transmission(0.0, p) - 0.548811636094026) < 1e-12);
    CHECK(transmission(0.3, {.alpha_l = 0.0}) == 1.0);
    CHECK(transmission(-1.0, {.alpha_l = 0.6, .i_in = 2.0}) == Approx(2.0 * 0.301194211912202).scale(0.0));
    CHECK_THROWS_AS(transmission(1.01, p), DomainError);
    CHECK_THROWS_AS(transmission(0.0, {.alpha_l = -0.1}), DomainError);
}

TEST_CASE("transmission identity and monotonicity") {
    for (double al : {0.0, 0.1, 0.6, 2.0, 5.0}) {
        const ReadoutParams p{.alpha_l = al};
        const double mid = transmission(0.0, p);
        CHECK(transmission(1.0, p) * transmission(-1.0, p) == Approx(mid * mid).epsilon(1e-14).scale(0.0));
        double prev = transmission(1.0, p);
        for (double mz = 0.95; mz >= -1.0; mz -= 0.05) {
            const double cur = transmission(mz, p);
            if (al > 0.0) {
                CHECK(cur < prev);
            } else {
                CHECK(cur == prev);
            }
            prev = cur;
        }
    }
}

TEST_CASE("window mean") {
    const Trajectory tr{.times = {0.0, 1.0, 2.0, 3.0},
                        .states = {{0, 0, 1}, {0, 0, 0.5}, {0, 0, 0.25}, {0, 0, 0.125}}};
    CHECK(window_mean_mz(tr, 1.0, 2.0) == 0.375);
    CHECK(window_mean_mz(tr, 2.5, 2.7) == 0.125);
    CHECK_THROWS_AS(window_mean_mz(tr, 4.0, 5.0), DomainError);
    CHECK_THROWS_AS(window_mean_mz(tr, 2.0, 1.0), DomainError);
    const Trajectory zero{.times = {0.0, 1.0}, .states = {{1, 0, 0}, {1, 0, 0}}};
    CHECK_THROWS_AS(echo_amplitude(tr, zero, 0.0, 1.0), NumericalError);
}

TEST_CASE("echo amplitude under Bloch dephasing") {
    // Strongly adiabatic, short passages (adiabaticity ~18, AFP ~14 us) so that
    // the free evolution dominates.
    PhysicalParams p;
    p.rabi_hz = 2e6;
    p.sweep_range_hz = 20e6;
    const BlochRelaxation bloch{.t1 = INFINITY, .t2 = 550e-6};
    for (auto [free, expected] : {std::pair{550e-6, std::exp(-1.0)}, std::pair{1100e-6, std::exp(-2.0)}}) {
        CAPTURE(free);
        const PulseSequence seq = echo_sequence(p, free);
        const PulseSequence seq_pi = echo_sequence(p, free, kPi);
        const CompiledDrive drv = compile(seq, max_sampling_step(seq));
        const CompiledDrive drv_pi = compile(seq_pi, max_sampling_step(seq_pi));
        const auto ref = integrate({0, 0, 1}, drv, 0.0, NoRelaxation{}, nullptr);
        const auto res = integrate({0, 0, 1}, drv, 0.0, bloch, nullptr);
        const auto ref_pi = integrate({0, 0, 1}, drv_pi, 0.0, NoRelaxation{}, nullptr);
        const auto res_pi = integrate({0, 0, 1}, drv_pi, 0.0, bloch, nullptr);
        const double T = seq.total_duration();
        CHECK(echo_amplitude(ref, ref, T, T) == 1.0);
        CHECK(echo_amplitude(res, ref, T, T) == Approx(expected).epsilon(0.05).scale(0.0));
        CHECK(phase_cycled_echo_amplitude(ref, ref_pi, ref, ref_pi, T, T) == 1.0);
        CHECK(phase_cycled_echo_amplitude(res, res_pi, ref, ref_pi, T, T) ==
              Approx(expected).epsilon(0.05).scale(0.0));
        // The closing phase flips the refocused magnetization.
        CHECK(ref.final_state().mz == Approx(-ref_pi.final_state().mz).epsilon(1e-3).scale(0.0));
    }
}

TEST_CASE("fit report and curve io") {
    const auto pts = fixture();
    const DecayFit f = fit_exp_decay(pts);
    const auto j = nlohmann::json::parse(fit_report_json(f));
    CHECK(j.at("timeConstant_s").get<double>() == f.time_constant);
    CHECK(j.at("timeConstantSd_s").get<double>() == f.time_constant_sd());
    CHECK(j.at("withOffset").get<bool>() == false);
    CHECK(j.at("covariance").size() == 3);

    std::ostringstream os;
    write_decay_curve_csv(os, pts, &f);
    std::istringstream is(os.str());
    const auto back = read_decay_csv(is);
    REQUIRE(back.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(back[i].t == pts[i].t);
        CHECK(back[i].y == pts[i].y);
    }
    std::istringstream bad("t,y\n1,2\nx,3\n");
    CHECK_THROWS_AS(read_decay_csv(bad), ConfigError);
    std::istringstream one("1\n");
    CHECK_THROWS_AS(read_decay_csv(one), ConfigError);
}
