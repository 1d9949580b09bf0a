#pragma once

#include <numbers>

namespace arpsim {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Public I/O is in ordinary frequency (Hz, Hz/s); everything internal is
// angular (rad/s, rad/s^2). These two functions are the only conversion site.
constexpr double hz_to_rad(double hz) noexcept { return kTwoPi * hz; }
constexpr double rad_to_hz(double omega) noexcept { return omega / kTwoPi; }

}  // namespace arpsim
