// SPDX-License-Identifier: Apache-2.0
//
// fft.hpp - thin FFTW wrapper with a process-wide plan cache
//
// Plans are created once per (size, direction) with FFTW_ESTIMATE so results
// are reproducible run to run, and executed through the new-array interface so
// the same plan is safe to use from several threads.

#pragma once

#include <span>

#include "sc3/types.hpp"

namespace sc3::fft {

enum class Direction { forward, inverse };

/// Unnormalized in-place transform: forward uses e^{-j2pi kn/N}, inverse e^{+j2pi kn/N}.
void transform(std::span<cdouble> data, Direction dir);

/// Unitary forward DFT (scaled by 1/sqrt(N)).
CVec dft_unitary(std::span<const cdouble> x);

/// Unitary inverse DFT (scaled by 1/sqrt(N)).
CVec idft_unitary(std::span<const cdouble> x);

}  // namespace sc3::fft
