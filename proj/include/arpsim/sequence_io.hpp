#pragma once

#include <string>

#include <json.hpp>

#include "arpsim/config.hpp"
#include "arpsim/sequence.hpp"

namespace arpsim {

/// Sequence file:
///   {"segments": [{"type": "ahp"|"afp"|"hard"|"delay"|"chirp", ...}],
///    "frame": {"referenceDetuningHz": number}}
///
/// ahp:   direction ("into"|"out"), sweep ("up"|"down"), rabi_hz, sweepRange_hz,
///        chirpRate_hz_per_s or flipTime_s, edgeRamp_s
/// afp:   sweep, rabi_hz, sweepRange_hz, chirpRate_hz_per_s or flipTime_s, edgeRamp_s
/// hard:  area_rad, rabi_hz, phase_rad
/// delay: duration_s
/// chirp: rabi_hz, detuningStart_hz, detuningEnd_hz, rate_hz_per_s, edgeRamp_s
///
/// Passage parameters left out fall back to the physical defaults.
/// referenceDetuningHz is the offset of the spin line center from the frame.
struct SequenceFile {
    PulseSequence sequence;
    double reference_detuning{0.0};  // rad/s
};

SequenceFile parse_sequence(const nlohmann::json& j, const PhysicalParams& defaults = {});
SequenceFile load_sequence(const std::string& path, const PhysicalParams& defaults = {});

/// Writes the compiled primitive segments (hard, chirp, delay).
nlohmann::json to_json(const SequenceFile& file);

}  // namespace arpsim
