#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "arpsim/analysis.hpp"
#include "arpsim/config.hpp"
#include "arpsim/sequence.hpp"

namespace arpsim {

/// 8 points of 2(tau1 + tau2) evenly spread over [100 us, 2 ms].
SweepGrid default_echo_grid();
/// 13 log-spaced flipping times over [0.1, 6.4] T2.
SweepGrid default_efficiency_grid();

/// AHP - tau1 - AFP - tau2 - tau2 - AFP - tau1 - AHP with
/// tau1 = f * free_time / 2 and tau2 = (1 - f) * free_time / 2. The passages
/// run at the echo flipping time; the closing AHP carries `closing_phase`.
PulseSequence echo_sequence(const PhysicalParams& p, double free_time, double closing_phase = 0.0);

struct EchoResult {
    std::vector<DataPoint> curve;  // (2(tau1 + tau2), echo amplitude)
    std::optional<DecayFit> fit;
    std::string fit_error;         // set when the fit was rejected
};

EchoResult exp_t2_echo(const ExperimentConfig& cfg, std::size_t threads = 1);

struct TracePoint {
    double t{0.0};
    double mz{0.0};
    double transmission{0.0};  // I / I_in
};

/// Single AFP at the configured chirp rate, read out through the optical
/// transmission model.
std::vector<TracePoint> exp_arp_trace(const ExperimentConfig& cfg, std::size_t threads = 1,
                                      std::size_t n_records = 400);

struct EfficiencyRow {
    double tau_f{0.0};
    double tau_f_over_t2{0.0};
    double eta{0.0};
    ModelKind model{ModelKind::stochastic};
    double adiabaticity{0.0};
    bool non_adiabatic{false};  // adiabaticity below the condition margin
};

/// AFP at fixed sweep range and rabi frequency for each grid point.
std::vector<EfficiencyRow> exp_efficiency_sweep(const ExperimentConfig& cfg, ModelKind model,
                                                std::size_t threads = 1);

/// CSV columns: t_s, mz, transmission_rel.
void write_trace_csv(std::ostream& os, const std::vector<TracePoint>& trace);
/// CSV columns: tau_f_s, tau_f_over_t2, eta, model, adiabaticity, non_adiabatic.
void write_efficiency_csv(std::ostream& os, const std::vector<EfficiencyRow>& rows);

}  // namespace arpsim
