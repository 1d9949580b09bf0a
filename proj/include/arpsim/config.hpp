#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "arpsim/analysis.hpp"
#include "arpsim/core_model.hpp"
#include "arpsim/dynamics.hpp"

namespace arpsim {

/// Physical parameters in ordinary-frequency units, as they appear in files.
/// Defaults follow the Tm:YAG ARP experiment; t1_s is not a measured value
/// ("several seconds") and only sets the scale of the spin-lattice channel.
struct PhysicalParams {
    double rabi_hz{0.264e6};
    double sweep_range_hz{6e6};
    double chirp_rate_hz_per_s{40e9};
    /// RMS noise amplitude; when absent it is derived from t2_s and tau_c_s
    /// through 1/T2' = delta^2 tau_c.
    std::optional<double> delta_hz;
    double tau_c_s{2e-4};
    double t1_s{6.0};
    double t2_s{5.5e-4};
    double inhom_fwhm_hz{5e5};
    double alpha_l{0.6};
    double edge_ramp_s{1e-6};
    /// Flipping time of the passages in the echo sequence.
    double echo_flip_time_s{4.4e-6};
    /// tau1 / (tau1 + tau2) in the echo sequence.
    double tau1_fraction{0.5};

    friend bool operator==(const PhysicalParams&, const PhysicalParams&) = default;
};

enum class ModelKind { none, bloch, stochastic };

/// How the echo amplitude is read out after the closing half passage.
enum class EchoReadout {
    /// Mz after the closing AHP, normalized by the relaxation-free run.
    direct,
    /// Difference of two runs whose closing AHP phases differ by pi, normalized
    /// the same way; longitudinal magnetization left behind by imperfect
    /// passages cancels.
    phase_cycled,
};

enum class GridVariable { free_time_s, tau_f_over_t2, chirp_rate_hz_per_s };

struct SweepGrid {
    enum class Kind { values, lin_range, log_range };

    GridVariable variable{GridVariable::tau_f_over_t2};
    Kind kind{Kind::values};
    std::vector<double> values;  // Kind::values
    double start{0.0};           // ranges
    double stop{0.0};
    std::size_t count{0};

    std::vector<double> points() const;
    friend bool operator==(const SweepGrid&, const SweepGrid&) = default;
};

struct EnsembleConfig {
    std::size_t n_spins{4};
    std::size_t n_noise{8};
    std::uint64_t master_seed{1};
    friend bool operator==(const EnsembleConfig&, const EnsembleConfig&) = default;
};

struct IntegratorConfig {
    Stepper stepper{Stepper::magnus4};
    double tol{1e-6};
    friend bool operator==(const IntegratorConfig&, const IntegratorConfig&) = default;
};

struct OutputPaths {
    std::string directory{"."};
    friend bool operator==(const OutputPaths&, const OutputPaths&) = default;
};

struct ExperimentConfig {
    PhysicalParams physical;
    ModelKind model{ModelKind::stochastic};
    EchoReadout echo_readout{EchoReadout::phase_cycled};
    EnsembleConfig ensemble;
    IntegratorConfig integrator;
    std::optional<SweepGrid> sweep_grid;
    OutputPaths output;

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws ConfigError on unknown keys, wrong types or out-of-range values.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

void validate(const ExperimentConfig& cfg);

std::string to_string(ModelKind m);
ModelKind parse_model(const std::string& s);
std::string to_string(EchoReadout r);
EchoReadout parse_echo_readout(const std::string& s);

// Internal (angular) views of a config.

DriveParams drive_params(const PhysicalParams& p);
/// RMS noise amplitude in rad/s (explicit or derived from T2 and tau_c).
double noise_delta(const PhysicalParams& p);
RelaxationSpec relaxation(const PhysicalParams& p, ModelKind model);
StochasticRelaxation stochastic_relaxation(const PhysicalParams& p);
EnsembleSpec ensemble_spec(const ExperimentConfig& cfg);
ReadoutParams readout_params(const PhysicalParams& p);
IntegratorOptions integrator_options(const ExperimentConfig& cfg);

}  // namespace arpsim
