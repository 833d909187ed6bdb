#pragma once

#include <complex>
#include <span>
#include <vector>

namespace earkd::detail {

// Thin wrappers over FFTW. Plans are created once per length behind a mutex
// and executed with the new-array interface, which is thread safe.

// Real-to-complex forward transform; returns n/2 + 1 bins.
std::vector<std::complex<double>> rfft(std::span<const double> x);

// Complex-to-real inverse transform of n/2 + 1 bins into n samples,
// unnormalised (FFTW convention).
std::vector<double> irfft(std::span<const std::complex<double>> bins, std::size_t n);

}  // namespace earkd::detail
