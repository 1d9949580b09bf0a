#include "arpsim/experiments.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "arpsim/dynamics.hpp"
#include "arpsim/errors.hpp"
#include "arpsim/units.hpp"

namespace arpsim {

namespace {

CompiledDrive compile_at_limit(const PulseSequence& seq) {
    return compile(seq, max_sampling_step(seq));
}

RunOptions run_options(const ExperimentConfig& cfg, std::size_t threads) {
    RunOptions o;
    o.integrator = integrator_options(cfg);
    o.threads = threads;
    return o;
}

SweepGrid grid_or_default(const ExperimentConfig& cfg, const SweepGrid& fallback) {
    return cfg.sweep_grid ? *cfg.sweep_grid : fallback;
}

}  // namespace

SweepGrid default_echo_grid() {
    return {.variable = GridVariable::free_time_s,
            .kind = SweepGrid::Kind::lin_range,
            .values = {},
            .start = 100e-6,
            .stop = 2e-3,
            .count = 8};
}

SweepGrid default_efficiency_grid() {
    return {.variable = GridVariable::tau_f_over_t2,
            .kind = SweepGrid::Kind::log_range,
            .values = {},
            .start = 0.1,
            .stop = 6.4,
            .count = 13};
}

PulseSequence echo_sequence(const PhysicalParams& p, double free_time, double closing_phase) {
    if (!(free_time > 0.0)) {
        throw DomainError("echo free-evolution time must be positive");
    }
    DriveParams d = drive_params(p);
    d.chirp_rate = chirp_rate_for_flipping_time(d.rabi, p.echo_flip_time_s);
    const double tau1 = 0.5 * p.tau1_fraction * free_time;
    const double tau2 = 0.5 * (1.0 - p.tau1_fraction) * free_time;

    PulseSequence seq;
    auto delay = [&](double t) {
        if (t > 0.0) seq.append(Delay{t});
    };
    seq.append(make_ahp(d, AhpDirection::into_plane, p.edge_ramp_s));
    delay(tau1);
    seq.append(make_afp(d, p.edge_ramp_s));
    delay(tau2);
    delay(tau2);
    seq.append(make_afp(d, p.edge_ramp_s));
    delay(tau1);
    seq.append(make_ahp(d, AhpDirection::out_of_plane, p.edge_ramp_s, SweepDirection::up,
                        closing_phase));
    return seq;
}

EchoResult exp_t2_echo(const ExperimentConfig& cfg, std::size_t threads) {
    validate(cfg);
    const SweepGrid grid = grid_or_default(cfg, default_echo_grid());
    if (grid.variable != GridVariable::free_time_s) {
        throw ConfigError("t2-echo sweeps free_time_s");
    }
    const auto times = grid.points();
    if (times.size() < 4) {
        throw ConfigError(fmt::format("t2-echo needs at least 4 grid points for the fit, got {}",
                                      times.size()));
    }
    const RelaxationSpec rel = relaxation(cfg.physical, cfg.model);
    const EnsembleSpec ens = ensemble_spec(cfg);
    const RunOptions opts = run_options(cfg, threads);
    const BlochVector m0{0.0, 0.0, 1.0};

    EchoResult out;
    for (double ft : times) {
        const CompiledDrive drive = compile_at_limit(echo_sequence(cfg.physical, ft));
        const double end = drive.total_duration();
        const auto res = run_ensemble(m0, drive, ens, rel, opts);
        const auto ref = run_ensemble(m0, drive, ens, NoRelaxation{}, opts);
        if (cfg.echo_readout == EchoReadout::direct) {
            out.curve.push_back({ft, echo_amplitude(res.average, ref.average, end, end)});
            continue;
        }
        const CompiledDrive flipped = compile_at_limit(echo_sequence(cfg.physical, ft, kPi));
        const auto res_pi = run_ensemble(m0, flipped, ens, rel, opts);
        const auto ref_pi = run_ensemble(m0, flipped, ens, NoRelaxation{}, opts);
        out.curve.push_back({ft, phase_cycled_echo_amplitude(res.average, res_pi.average,
                                                             ref.average, ref_pi.average, end,
                                                             end)});
    }
    try {
        out.fit = fit_exp_decay(out.curve, false);
    } catch (const FitError& e) {
        out.fit_error = e.what();
    }
    return out;
}

std::vector<TracePoint> exp_arp_trace(const ExperimentConfig& cfg, std::size_t threads,
                                      std::size_t n_records) {
    validate(cfg);
    const PhysicalParams& p = cfg.physical;
    PulseSequence seq;
    seq.append(make_afp(drive_params(p), p.edge_ramp_s));
    const CompiledDrive drive = compile_at_limit(seq);
    RunOptions opts = run_options(cfg, threads);
    opts.integrator.record_dt = drive.total_duration() / static_cast<double>(std::max<std::size_t>(1, n_records));
    const auto res = run_ensemble({0.0, 0.0, 1.0}, drive, ensemble_spec(cfg),
                                  relaxation(p, cfg.model), opts);
    const ReadoutParams readout = readout_params(p);
    std::vector<TracePoint> out;
    out.reserve(res.average.size());
    for (std::size_t i = 0; i < res.average.size(); ++i) {
        const double mz = res.average.states[i].mz;
        out.push_back({res.average.times[i], mz, transmission(mz, readout)});
    }
    return out;
}

std::vector<EfficiencyRow> exp_efficiency_sweep(const ExperimentConfig& cfg, ModelKind model,
                                                std::size_t threads) {
    validate(cfg);
    const SweepGrid grid = grid_or_default(cfg, default_efficiency_grid());
    if (grid.variable == GridVariable::free_time_s) {
        throw ConfigError("arp-efficiency sweeps tau_f_over_t2 or chirp_rate_hz_per_s");
    }
    const PhysicalParams& p = cfg.physical;
    const RelaxationSpec rel = relaxation(p, model);
    const EnsembleSpec ens = ensemble_spec(cfg);
    const RunOptions opts = run_options(cfg, threads);

    std::vector<EfficiencyRow> rows;
    for (double v : grid.points()) {
        DriveParams d = drive_params(p);
        if (grid.variable == GridVariable::tau_f_over_t2) {
            d.chirp_rate = chirp_rate_for_flipping_time(d.rabi, v * p.t2_s);
        } else {
            d.chirp_rate = hz_to_rad(v);
        }
        PulseSequence seq;
        seq.append(make_afp(d, p.edge_ramp_s));
        const auto res = run_ensemble({0.0, 0.0, 1.0}, compile_at_limit(seq), ens, rel, opts);
        EfficiencyRow row;
        row.tau_f = flipping_time(d);
        row.tau_f_over_t2 = row.tau_f / p.t2_s;
        row.eta = flipping_efficiency(res.average);
        row.model = model;
        row.adiabaticity = d.rabi * d.rabi / d.chirp_rate;
        row.non_adiabatic = row.adiabaticity < kDefaultMargin;
        rows.push_back(row);
    }
    return rows;
}

void write_trace_csv(std::ostream& os, const std::vector<TracePoint>& trace) {
    os << "t_s,mz,transmission_rel\n";
    for (const auto& pt : trace) {
        os << fmt::format("{:.17g},{:.17g},{:.17g}\n", pt.t, pt.mz, pt.transmission);
    }
}

void write_efficiency_csv(std::ostream& os, const std::vector<EfficiencyRow>& rows) {
    os << "tau_f_s,tau_f_over_t2,eta,model,adiabaticity,non_adiabatic\n";
    for (const auto& r : rows) {
        os << fmt::format("{:.17g},{:.17g},{:.17g},{},{:.17g},{}\n", r.tau_f, r.tau_f_over_t2,
                          r.eta, to_string(r.model), r.adiabaticity, r.non_adiabatic ? 1 : 0);
    }
}

}  // namespace arpsim
