#include "arpsim/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "arpsim/analysis.hpp"
#include "arpsim/config.hpp"
#include "arpsim/core_model.hpp"
#include "arpsim/errors.hpp"
#include "arpsim/experiments.hpp"
#include "arpsim/sequence_io.hpp"
#include "arpsim/units.hpp"

namespace arpsim {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct GlobalOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::size_t threads{1};
};

ExperimentConfig resolve_config(const std::string& path, const GlobalOptions& g) {
    ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
    if (g.seed) cfg.ensemble.master_seed = *g.seed;
    if (g.out_dir) cfg.output.directory = *g.out_dir;
    return cfg;
}

std::ofstream open_output(const ExperimentConfig& cfg, const std::string& name, fs::path* where) {
    const fs::path dir(cfg.output.directory);
    std::error_code ec;
    fs::create_directories(dir, ec);
    const fs::path file = dir / name;
    std::ofstream os(file);
    if (!os) throw ConfigError(fmt::format("cannot write '{}'", file.string()));
    if (where) *where = file;
    return os;
}

json check_report(const ExperimentConfig& cfg, double margin) {
    const PhysicalParams& p = cfg.physical;
    const DriveParams d = drive_params(p);
    const StochasticRelaxation rel = stochastic_relaxation(p);
    const ConditionReport rep = check_conditions(d, rel, margin);
    const double delta_from_t2 = std::sqrt(1.0 / (p.t2_s * p.tau_c_s));

    json j;
    j["rabi_hz"] = p.rabi_hz;
    j["chirpRate_hz_per_s"] = p.chirp_rate_hz_per_s;
    j["flippingTime_s"] = rep.flipping_time;
    j["margin"] = rep.margin;
    j["adiabaticity"] = {{"value", rep.adiabaticity}, {"satisfied", rep.adiabatic}};
    // delta^2 / r against rabi * tau_c / pi and against 2
    j["longitudinal"] = {{"lhs", rep.longitudinal_lhs},
                         {"rhs", rep.longitudinal_rhs},
                         {"satisfied", rep.longitudinal_satisfied}};
    j["transverse"] = {{"lhs", rep.transverse_lhs},
                       {"rhs", rep.transverse_rhs},
                       {"satisfied", rep.transverse_satisfied}};
    j["delta"] = {{"used_hz", rad_to_hz(rel.delta)},
                  {"source", p.delta_hz ? "config" : "derived from t2_s and tauC_s"},
                  {"fromT2_hz", rad_to_hz(delta_from_t2)},
                  {"t2PrimeFromDelta_s", rel.delta > 0.0 ? t2_prime(rel) : INFINITY},
                  {"t2_s", p.t2_s}};
    StochasticRelaxation with_t1 = rel;
    j["lockedDecayTime_s"] = rep.locked_decay_time;
    j["lockedDecayTimeWithT1_s"] =
        rel.delta > 0.0 ? locked_decay_time(with_t1, d.rabi) : p.t1_s;
    j["lockedDecayTimeOverT1"] = rep.locked_decay_time / p.t1_s;
    return j;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Adiabatic rapid passage simulator: Bloch vs stochastic-dephasing relaxation",
                 "arpsim"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("--seed", g.seed, "Override the ensemble master seed");
    app.add_option("--out-dir", g.out_dir, "Directory for output files");
    app.add_option("--threads", g.threads, "Worker threads (results do not depend on it)")
        ->check(CLI::PositiveNumber);

    std::string config_path;

    auto* simulate = app.add_subcommand("simulate", "Integrate an ensemble through a pulse sequence");
    std::string sequence_path;
    double record_dt = 0.0;
    simulate->add_option("sequence", sequence_path, "Sequence JSON file")->required();
    simulate->add_option("--config", config_path, "Experiment config JSON");
    simulate->add_option("--record-dt", record_dt, "Trajectory sampling interval in s (0: ends only)");

    auto* experiment = app.add_subcommand("experiment", "Run a canned experiment");
    std::string experiment_name;
    std::string model_name = "both";
    experiment->add_option("name", experiment_name, "t2-echo | arp-trace | arp-efficiency")
        ->required()
        ->check(CLI::IsMember({"t2-echo", "arp-trace", "arp-efficiency"}));
    experiment->add_option("--config", config_path, "Experiment config JSON");
    experiment->add_option("--model", model_name, "arp-efficiency model: bloch | stochastic | both")
        ->check(CLI::IsMember({"bloch", "stochastic", "both"}));

    auto* fit = app.add_subcommand("fit", "Fit measured or simulated curves");
    fit->require_subcommand(1);
    auto* fit_exp = fit->add_subcommand("exp-decay", "Exponential decay fit of a (t_s, signal) CSV");
    std::string data_path;
    bool with_offset = false;
    fit_exp->add_option("data", data_path, "CSV file")->required();
    fit_exp->add_flag("--offset", with_offset, "Fit a constant offset as well");

    auto* check = app.add_subcommand("check", "Print adiabaticity and relaxation-free conditions");
    double margin = kDefaultMargin;
    check->add_option("--config", config_path, "Experiment config JSON");
    check->add_option("--margin", margin, "Factor that stands for 'much less than'");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        err << app.help();
        return kExitConfig;
    }

    try {
        if (*simulate) {
            ExperimentConfig cfg = resolve_config(config_path, g);
            const SequenceFile file = load_sequence(sequence_path, cfg.physical);
            const CompiledDrive drive = compile(file.sequence, max_sampling_step(file.sequence));
            RunOptions opts;
            opts.integrator = integrator_options(cfg);
            opts.integrator.record_dt = record_dt;
            opts.threads = g.threads;
            opts.detuning_offset = file.reference_detuning;
            const auto res = run_ensemble({0.0, 0.0, 1.0}, drive, ensemble_spec(cfg),
                                          relaxation(cfg.physical, cfg.model), opts);
            fs::path p1, p2;
            {
                auto os = open_output(cfg, "trajectory.csv", &p1);
                write_trajectory_csv(os, res.average);
            }
            {
                auto os = open_output(cfg, "ensemble_summary.csv", &p2);
                write_ensemble_summary_csv(os, res.members);
            }
            const auto& m = res.average.final_state();
            out << fmt::format("final <M> = ({:.6f}, {:.6f}, {:.6f})\n", m.mx, m.my, m.mz);
            out << "wrote " << p1.string() << "\nwrote " << p2.string() << "\n";
            return kExitOk;
        }
        if (*experiment) {
            ExperimentConfig cfg = resolve_config(config_path, g);
            if (experiment_name == "t2-echo") {
                const EchoResult res = exp_t2_echo(cfg, g.threads);
                fs::path p;
                {
                    auto os = open_output(cfg, "t2_echo.csv", &p);
                    write_decay_curve_csv(os, res.curve, res.fit ? &*res.fit : nullptr);
                }
                out << "wrote " << p.string() << "\n";
                if (!res.fit) {
                    err << "fit rejected: " << res.fit_error << "\n";
                    return kExitNumerical;
                }
                {
                    auto os = open_output(cfg, "t2_echo_fit.json", &p);
                    os << fit_report_json(*res.fit) << "\n";
                }
                out << fmt::format("T2 = {:.4g} s +/- {:.2g} s\n", res.fit->time_constant,
                                   res.fit->time_constant_sd());
                out << "wrote " << p.string() << "\n";
                return kExitOk;
            }
            if (experiment_name == "arp-trace") {
                const auto trace = exp_arp_trace(cfg, g.threads);
                fs::path p;
                auto os = open_output(cfg, "arp_trace.csv", &p);
                write_trace_csv(os, trace);
                out << fmt::format("final I/I_in = {:.6f}\n", trace.back().transmission);
                out << "wrote " << p.string() << "\n";
                return kExitOk;
            }
            std::vector<EfficiencyRow> rows;
            for (ModelKind m : {ModelKind::bloch, ModelKind::stochastic}) {
                if (model_name != "both" && parse_model(model_name) != m) continue;
                auto part = exp_efficiency_sweep(cfg, m, g.threads);
                rows.insert(rows.end(), part.begin(), part.end());
            }
            fs::path p;
            auto os = open_output(cfg, "arp_efficiency.csv", &p);
            write_efficiency_csv(os, rows);
            for (const auto& r : rows) {
                out << fmt::format("{:<10} tau_f/T2 = {:7.3f}  eta = {:.4f}{}\n", to_string(r.model),
                                   r.tau_f_over_t2, r.eta, r.non_adiabatic ? "  (non-adiabatic)" : "");
            }
            out << "wrote " << p.string() << "\n";
            return kExitOk;
        }
        if (*fit_exp) {
            std::ifstream in(data_path);
            if (!in) throw ConfigError(fmt::format("cannot open '{}'", data_path));
            const auto pts = read_decay_csv(in);
            const DecayFit f = fit_exp_decay(pts, with_offset);
            out << fit_report_json(f) << "\n";
            return kExitOk;
        }
        if (*check) {
            const ExperimentConfig cfg = resolve_config(config_path, g);
            out << check_report(cfg, margin).dump(2) << "\n";
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DomainError& e) {
        err << "invalid parameters: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitConfig;
}

}  // namespace arpsim
