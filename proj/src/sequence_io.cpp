#include "arpsim/sequence_io.hpp"

#include <fstream>

#include <fmt/format.h>

#include "arpsim/errors.hpp"
#include "arpsim/units.hpp"

namespace arpsim {

namespace {

using json = nlohmann::json;

double number(const json& seg, const char* key, std::size_t index) {
    if (!seg.contains(key)) {
        throw ConfigError(fmt::format("segments[{}]: missing '{}'", index, key));
    }
    if (!seg.at(key).is_number()) {
        throw ConfigError(fmt::format("segments[{}].{}: expected a number", index, key));
    }
    return seg.at(key).get<double>();
}

double number_or(const json& seg, const char* key, double fallback, std::size_t index) {
    return seg.contains(key) ? number(seg, key, index) : fallback;
}

std::string text_or(const json& seg, const char* key, const char* fallback, std::size_t index) {
    if (!seg.contains(key)) return fallback;
    if (!seg.at(key).is_string()) {
        throw ConfigError(fmt::format("segments[{}].{}: expected a string", index, key));
    }
    return seg.at(key).get<std::string>();
}

void only_keys(const json& seg, std::initializer_list<const char*> keys, std::size_t index) {
    for (const auto& [k, v] : seg.items()) {
        bool ok = k == "type";
        for (const char* allowed : keys) ok = ok || k == allowed;
        if (!ok) throw ConfigError(fmt::format("segments[{}]: unknown key '{}'", index, k));
    }
}

SweepDirection parse_sweep(const json& seg, std::size_t index) {
    const std::string s = text_or(seg, "sweep", "up", index);
    if (s == "up") return SweepDirection::up;
    if (s == "down") return SweepDirection::down;
    throw ConfigError(fmt::format("segments[{}].sweep: expected 'up' or 'down'", index));
}

RampEnds parse_ramps(const json& seg, std::size_t index) {
    const std::string s = text_or(seg, "ramps", "both", index);
    if (s == "both") return RampEnds::both;
    if (s == "start") return RampEnds::start;
    if (s == "end") return RampEnds::end;
    throw ConfigError(fmt::format("segments[{}].ramps: expected 'both', 'start' or 'end'", index));
}

const char* to_string(RampEnds r) {
    switch (r) {
        case RampEnds::both: return "both";
        case RampEnds::start: return "start";
        case RampEnds::end: return "end";
    }
    return "";
}

DriveParams passage_params(const json& seg, const PhysicalParams& defaults, std::size_t index) {
    DriveParams d;
    d.rabi = hz_to_rad(number_or(seg, "rabi_hz", defaults.rabi_hz, index));
    d.sweep_range = hz_to_rad(number_or(seg, "sweepRange_hz", defaults.sweep_range_hz, index));
    if (seg.contains("flipTime_s")) {
        if (seg.contains("chirpRate_hz_per_s")) {
            throw ConfigError(fmt::format(
                "segments[{}]: give either chirpRate_hz_per_s or flipTime_s", index));
        }
        d.chirp_rate = chirp_rate_for_flipping_time(d.rabi, number(seg, "flipTime_s", index));
    } else {
        d.chirp_rate =
            hz_to_rad(number_or(seg, "chirpRate_hz_per_s", defaults.chirp_rate_hz_per_s, index));
    }
    return d;
}

PulseSegment parse_segment(const json& seg, const PhysicalParams& defaults, std::size_t index) {
    if (!seg.is_object() || !seg.contains("type") || !seg.at("type").is_string()) {
        throw ConfigError(fmt::format("segments[{}]: expected an object with a 'type'", index));
    }
    const std::string type = seg.at("type").get<std::string>();
    if (type == "ahp") {
        only_keys(seg, {"direction", "sweep", "rabi_hz", "sweepRange_hz", "chirpRate_hz_per_s",
                        "flipTime_s", "edgeRamp_s", "phase_rad"},
                  index);
        const std::string dir = text_or(seg, "direction", "into", index);
        if (dir != "into" && dir != "out") {
            throw ConfigError(fmt::format("segments[{}].direction: expected 'into' or 'out'", index));
        }
        return make_ahp(passage_params(seg, defaults, index),
                        dir == "into" ? AhpDirection::into_plane : AhpDirection::out_of_plane,
                        number_or(seg, "edgeRamp_s", defaults.edge_ramp_s, index),
                        parse_sweep(seg, index), number_or(seg, "phase_rad", 0.0, index));
    }
    if (type == "afp") {
        only_keys(seg, {"sweep", "rabi_hz", "sweepRange_hz", "chirpRate_hz_per_s", "flipTime_s",
                        "edgeRamp_s", "phase_rad"},
                  index);
        return make_afp(passage_params(seg, defaults, index),
                        number_or(seg, "edgeRamp_s", defaults.edge_ramp_s, index),
                        parse_sweep(seg, index), number_or(seg, "phase_rad", 0.0, index));
    }
    if (type == "hard") {
        only_keys(seg, {"area_rad", "rabi_hz", "phase_rad"}, index);
        return make_hard_pulse(number(seg, "area_rad", index),
                               hz_to_rad(number_or(seg, "rabi_hz", defaults.rabi_hz, index)),
                               number_or(seg, "phase_rad", 0.0, index));
    }
    if (type == "delay") {
        only_keys(seg, {"duration_s"}, index);
        return Delay{number(seg, "duration_s", index)};
    }
    if (type == "chirp") {
        only_keys(seg, {"rabi_hz", "detuningStart_hz", "detuningEnd_hz", "rate_hz_per_s",
                        "edgeRamp_s", "phase_rad", "ramps"},
                  index);
        return Chirp{.rabi = hz_to_rad(number(seg, "rabi_hz", index)),
                     .detuning_start = hz_to_rad(number(seg, "detuningStart_hz", index)),
                     .detuning_end = hz_to_rad(number(seg, "detuningEnd_hz", index)),
                     .rate = hz_to_rad(number(seg, "rate_hz_per_s", index)),
                     .edge_ramp = number_or(seg, "edgeRamp_s", 0.0, index),
                     .phase = number_or(seg, "phase_rad", 0.0, index),
                     .ramps = parse_ramps(seg, index)};
    }
    throw ConfigError(fmt::format("segments[{}]: unknown segment type '{}'", index, type));
}

}  // namespace

SequenceFile parse_sequence(const json& j, const PhysicalParams& defaults) {
    if (!j.is_object() || !j.contains("segments") || !j.at("segments").is_array()) {
        throw ConfigError("sequence: expected an object with a 'segments' array");
    }
    for (const auto& [k, v] : j.items()) {
        if (k != "segments" && k != "frame") {
            throw ConfigError(fmt::format("sequence: unknown key '{}'", k));
        }
    }
    SequenceFile out;
    const auto& segs = j.at("segments");
    if (segs.empty()) throw ConfigError("sequence: no segments");
    try {
        for (std::size_t i = 0; i < segs.size(); ++i) {
            out.sequence.append(parse_segment(segs[i], defaults, i));
        }
    } catch (const DomainError& e) {
        throw ConfigError(fmt::format("sequence: {}", e.what()));
    }
    if (j.contains("frame")) {
        const auto& f = j.at("frame");
        if (!f.is_object()) throw ConfigError("sequence.frame: expected an object");
        for (const auto& [k, v] : f.items()) {
            if (k != "referenceDetuningHz") {
                throw ConfigError(fmt::format("sequence.frame: unknown key '{}'", k));
            }
            if (!v.is_number()) throw ConfigError("sequence.frame.referenceDetuningHz: expected a number");
            out.reference_detuning = hz_to_rad(v.get<double>());
        }
    }
    return out;
}

SequenceFile load_sequence(const std::string& path, const PhysicalParams& defaults) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open sequence '{}'", path));
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
    return parse_sequence(j, defaults);
}

json to_json(const SequenceFile& file) {
    json segs = json::array();
    for (const auto& seg : file.sequence.segments()) {
        if (const auto* p = std::get_if<HardPulse>(&seg)) {
            segs.push_back({{"type", "hard"},
                            {"area_rad", p->rabi * p->duration},
                            {"rabi_hz", rad_to_hz(p->rabi)},
                            {"phase_rad", p->phase}});
        } else if (const auto* c = std::get_if<Chirp>(&seg)) {
            segs.push_back({{"type", "chirp"},
                            {"rabi_hz", rad_to_hz(c->rabi)},
                            {"detuningStart_hz", rad_to_hz(c->detuning_start)},
                            {"detuningEnd_hz", rad_to_hz(c->detuning_end)},
                            {"rate_hz_per_s", rad_to_hz(c->rate)},
                            {"edgeRamp_s", c->edge_ramp},
                            {"phase_rad", c->phase},
                            {"ramps", to_string(c->ramps)}});
        } else {
            segs.push_back({{"type", "delay"}, {"duration_s", std::get<Delay>(seg).duration}});
        }
    }
    return {{"segments", segs}, {"frame", {{"referenceDetuningHz", rad_to_hz(file.reference_detuning)}}}};
}

}  // namespace arpsim
