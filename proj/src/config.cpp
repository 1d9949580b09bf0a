#include "arpsim/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "arpsim/errors.hpp"
#include "arpsim/units.hpp"

namespace arpsim {

namespace {

using json = nlohmann::json;

// Reads members of one JSON object and rejects keys nobody asked for.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) {
            throw ConfigError(fmt::format("{}: expected an object", where_));
        }
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(fmt::format("{}.{}: {}", where_, key, e.what()));
        }
    }

    template <class T>
    void get(const char* key, std::optional<T>& out) {
        seen_.insert(key);
        if (!j_.contains(key) || j_.at(key).is_null()) return;
        T v{};
        get(key, v);
        out = v;
    }

    const json* child(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) {
                throw ConfigError(fmt::format("{}: unknown key '{}'", where_, k));
            }
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

const char* to_string(GridVariable v) {
    switch (v) {
        case GridVariable::free_time_s: return "free_time_s";
        case GridVariable::tau_f_over_t2: return "tau_f_over_t2";
        case GridVariable::chirp_rate_hz_per_s: return "chirp_rate_hz_per_s";
    }
    return "";
}

GridVariable parse_variable(const std::string& s) {
    if (s == "free_time_s") return GridVariable::free_time_s;
    if (s == "tau_f_over_t2") return GridVariable::tau_f_over_t2;
    if (s == "chirp_rate_hz_per_s") return GridVariable::chirp_rate_hz_per_s;
    throw ConfigError(fmt::format("sweepGrid.variable: unknown variable '{}'", s));
}

const char* to_string(Stepper s) { return s == Stepper::magnus4 ? "magnus4" : "rk4"; }

Stepper parse_stepper(const std::string& s) {
    if (s == "magnus4") return Stepper::magnus4;
    if (s == "rk4") return Stepper::rk4;
    throw ConfigError(fmt::format("integrator.stepper: unknown stepper '{}'", s));
}

SweepGrid parse_grid(const json& j) {
    ObjectReader r(j, "sweepGrid");
    SweepGrid g;
    std::string variable = to_string(g.variable);
    r.get("variable", variable);
    g.variable = parse_variable(variable);
    const json* values = r.child("values");
    const json* lin = r.child("linRange");
    const json* log = r.child("logRange");
    if ((values != nullptr) + (lin != nullptr) + (log != nullptr) != 1) {
        throw ConfigError("sweepGrid: give exactly one of values, linRange, logRange");
    }
    if (values) {
        g.kind = SweepGrid::Kind::values;
        try {
            g.values = values->get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw ConfigError(fmt::format("sweepGrid.values: {}", e.what()));
        }
    } else {
        g.kind = lin ? SweepGrid::Kind::lin_range : SweepGrid::Kind::log_range;
        ObjectReader rr(lin ? *lin : *log, lin ? "sweepGrid.linRange" : "sweepGrid.logRange");
        rr.get("start", g.start);
        rr.get("stop", g.stop);
        rr.get("count", g.count);
        rr.finish();
    }
    r.finish();
    return g;
}

json grid_to_json(const SweepGrid& g) {
    json j;
    j["variable"] = to_string(g.variable);
    if (g.kind == SweepGrid::Kind::values) {
        j["values"] = g.values;
    } else {
        j[g.kind == SweepGrid::Kind::lin_range ? "linRange" : "logRange"] = {
            {"start", g.start}, {"stop", g.stop}, {"count", g.count}};
    }
    return j;
}

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw ConfigError(fmt::format("{} must be positive and finite (got {:g})", name, v));
    }
}

}  // namespace

std::vector<double> SweepGrid::points() const {
    if (kind == Kind::values) return values;
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double f = count > 1 ? static_cast<double>(i) / static_cast<double>(count - 1) : 0.0;
        out[i] = kind == Kind::lin_range ? start + f * (stop - start)
                                         : start * std::pow(stop / start, f);
    }
    return out;
}

std::string to_string(ModelKind m) {
    switch (m) {
        case ModelKind::none: return "none";
        case ModelKind::bloch: return "bloch";
        case ModelKind::stochastic: return "stochastic";
    }
    return "";
}

ModelKind parse_model(const std::string& s) {
    if (s == "none") return ModelKind::none;
    if (s == "bloch") return ModelKind::bloch;
    if (s == "stochastic") return ModelKind::stochastic;
    throw ConfigError(fmt::format("unknown relaxation model '{}'", s));
}

std::string to_string(EchoReadout r) {
    return r == EchoReadout::direct ? "direct" : "phaseCycled";
}

EchoReadout parse_echo_readout(const std::string& s) {
    if (s == "direct") return EchoReadout::direct;
    if (s == "phaseCycled") return EchoReadout::phase_cycled;
    throw ConfigError(fmt::format("unknown echo readout '{}'", s));
}

ExperimentConfig parse_config(const json& j) {
    ObjectReader top(j, "config");
    ExperimentConfig cfg;
    if (const json* pj = top.child("physicalParams")) {
        ObjectReader r(*pj, "physicalParams");
        auto& p = cfg.physical;
        r.get("rabi_hz", p.rabi_hz);
        r.get("sweepRange_hz", p.sweep_range_hz);
        r.get("chirpRate_hz_per_s", p.chirp_rate_hz_per_s);
        r.get("delta_hz", p.delta_hz);
        r.get("tauC_s", p.tau_c_s);
        r.get("t1_s", p.t1_s);
        r.get("t2_s", p.t2_s);
        r.get("inhomFwhm_hz", p.inhom_fwhm_hz);
        r.get("alphaL", p.alpha_l);
        r.get("edgeRamp_s", p.edge_ramp_s);
        r.get("echoFlipTime_s", p.echo_flip_time_s);
        r.get("tau1Fraction", p.tau1_fraction);
        r.finish();
    }
    std::string model = to_string(cfg.model);
    top.get("model", model);
    cfg.model = parse_model(model);
    std::string readout = to_string(cfg.echo_readout);
    top.get("echoReadout", readout);
    cfg.echo_readout = parse_echo_readout(readout);
    if (const json* ej = top.child("ensemble")) {
        ObjectReader r(*ej, "ensemble");
        r.get("nSpins", cfg.ensemble.n_spins);
        r.get("nNoise", cfg.ensemble.n_noise);
        r.get("masterSeed", cfg.ensemble.master_seed);
        r.finish();
    }
    if (const json* ij = top.child("integrator")) {
        ObjectReader r(*ij, "integrator");
        std::string stepper = to_string(cfg.integrator.stepper);
        r.get("stepper", stepper);
        cfg.integrator.stepper = parse_stepper(stepper);
        r.get("tol", cfg.integrator.tol);
        r.finish();
    }
    if (const json* gj = top.child("sweepGrid"); gj && !gj->is_null()) {
        cfg.sweep_grid = parse_grid(*gj);
    }
    if (const json* oj = top.child("outputPaths")) {
        ObjectReader r(*oj, "outputPaths");
        r.get("directory", cfg.output.directory);
        r.finish();
    }
    top.finish();
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open config '{}'", path));
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& cfg) {
    const auto& p = cfg.physical;
    json phys = {{"rabi_hz", p.rabi_hz},
                 {"sweepRange_hz", p.sweep_range_hz},
                 {"chirpRate_hz_per_s", p.chirp_rate_hz_per_s},
                 {"tauC_s", p.tau_c_s},
                 {"t1_s", p.t1_s},
                 {"t2_s", p.t2_s},
                 {"inhomFwhm_hz", p.inhom_fwhm_hz},
                 {"alphaL", p.alpha_l},
                 {"edgeRamp_s", p.edge_ramp_s},
                 {"echoFlipTime_s", p.echo_flip_time_s},
                 {"tau1Fraction", p.tau1_fraction}};
    if (p.delta_hz) phys["delta_hz"] = *p.delta_hz;
    json j = {{"physicalParams", phys},
              {"model", to_string(cfg.model)},
              {"echoReadout", to_string(cfg.echo_readout)},
              {"ensemble",
               {{"nSpins", cfg.ensemble.n_spins},
                {"nNoise", cfg.ensemble.n_noise},
                {"masterSeed", cfg.ensemble.master_seed}}},
              {"integrator",
               {{"stepper", to_string(cfg.integrator.stepper)}, {"tol", cfg.integrator.tol}}},
              {"outputPaths", {{"directory", cfg.output.directory}}}};
    if (cfg.sweep_grid) j["sweepGrid"] = grid_to_json(*cfg.sweep_grid);
    return j;
}

void validate(const ExperimentConfig& cfg) {
    const auto& p = cfg.physical;
    if (!(p.rabi_hz >= 0.0) || !std::isfinite(p.rabi_hz)) {
        throw ConfigError("rabi_hz must be >= 0 and finite");
    }
    require_positive(p.sweep_range_hz, "sweepRange_hz");
    require_positive(p.chirp_rate_hz_per_s, "chirpRate_hz_per_s");
    if (p.delta_hz && (!(*p.delta_hz >= 0.0) || !std::isfinite(*p.delta_hz))) {
        throw ConfigError("delta_hz must be >= 0 and finite");
    }
    require_positive(p.tau_c_s, "tauC_s");
    require_positive(p.t1_s, "t1_s");
    require_positive(p.t2_s, "t2_s");
    if (p.t2_s > 2.0 * p.t1_s) throw ConfigError("t2_s must not exceed 2 * t1_s");
    if (!(p.inhom_fwhm_hz >= 0.0) || !std::isfinite(p.inhom_fwhm_hz)) {
        throw ConfigError("inhomFwhm_hz must be >= 0 and finite");
    }
    if (!(p.alpha_l >= 0.0) || !std::isfinite(p.alpha_l)) throw ConfigError("alphaL must be >= 0");
    if (!(p.edge_ramp_s >= 0.0) || !std::isfinite(p.edge_ramp_s)) {
        throw ConfigError("edgeRamp_s must be >= 0");
    }
    require_positive(p.echo_flip_time_s, "echoFlipTime_s");
    if (!(p.tau1_fraction > 0.0 && p.tau1_fraction <= 1.0)) {
        throw ConfigError("tau1Fraction must lie in (0, 1]");
    }
    if (cfg.ensemble.n_spins < 1 || cfg.ensemble.n_noise < 1) {
        throw ConfigError("ensemble.nSpins and ensemble.nNoise must be >= 1");
    }
    if (!(cfg.integrator.tol >= 1e-12 && cfg.integrator.tol <= 1e-4)) {
        throw ConfigError("integrator.tol must lie in [1e-12, 1e-4]");
    }
    if (cfg.sweep_grid) {
        const auto& g = *cfg.sweep_grid;
        if (g.kind != SweepGrid::Kind::values) {
            if (g.count < 1) throw ConfigError("sweepGrid range count must be >= 1");
            require_positive(g.start, "sweepGrid start");
            require_positive(g.stop, "sweepGrid stop");
        }
        const auto pts = g.points();
        if (pts.empty()) throw ConfigError("sweepGrid is empty");
        for (double v : pts) require_positive(v, "sweepGrid value");
    }
}

DriveParams drive_params(const PhysicalParams& p) {
    return {.rabi = hz_to_rad(p.rabi_hz),
            .chirp_rate = hz_to_rad(p.chirp_rate_hz_per_s),
            .sweep_range = hz_to_rad(p.sweep_range_hz),
            .static_detuning = 0.0};
}

double noise_delta(const PhysicalParams& p) {
    if (p.delta_hz) return hz_to_rad(*p.delta_hz);
    return std::sqrt(1.0 / (p.t2_s * p.tau_c_s));
}

StochasticRelaxation stochastic_relaxation(const PhysicalParams& p) {
    return {.delta = noise_delta(p), .tau_c = p.tau_c_s, .t1 = p.t1_s, .kind = NoiseKind::jump};
}

RelaxationSpec relaxation(const PhysicalParams& p, ModelKind model) {
    switch (model) {
        case ModelKind::none: return NoRelaxation{};
        case ModelKind::bloch: return BlochRelaxation{.t1 = p.t1_s, .t2 = p.t2_s};
        case ModelKind::stochastic: return stochastic_relaxation(p);
    }
    return NoRelaxation{};
}

EnsembleSpec ensemble_spec(const ExperimentConfig& cfg) {
    return {.inhom_width = hz_to_rad(cfg.physical.inhom_fwhm_hz),
            .n_spins = cfg.ensemble.n_spins,
            .n_noise = cfg.ensemble.n_noise,
            .master_seed = cfg.ensemble.master_seed};
}

ReadoutParams readout_params(const PhysicalParams& p) { return {.alpha_l = p.alpha_l, .i_in = 1.0}; }

IntegratorOptions integrator_options(const ExperimentConfig& cfg) {
    return {.stepper = cfg.integrator.stepper, .tol = cfg.integrator.tol, .record_dt = 0.0};
}

}  // namespace arpsim
