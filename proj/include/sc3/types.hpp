// SPDX-License-Identifier: Apache-2.0
//
// types.hpp - shared scalar/vector aliases and physical constants

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace sc3 {

using cdouble = std::complex<double>;
using CVec = std::vector<cdouble>;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Rng = std::mt19937_64;

// Propagation speed used throughout (link budgets, Doppler, SAR ranging).
inline constexpr double kSpeedOfLight = 3.0e8;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kBoltzmann = 1.380649e-23;
inline constexpr double kNoiseTemperature = 290.0;

/// Base class for every error raised by the simulator.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when inputs violate a documented precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Raised when a configuration document is missing a section or is inconsistent.
class ConfigError : public Error {
public:
    using Error::Error;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

/// Derives an independent generator for a (stream, index) pair of a base seed.
/// Used so Monte-Carlo work can be split across threads without changing results.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

}  // namespace sc3
