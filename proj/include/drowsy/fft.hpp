#pragma once

#include <complex>
#include <vector>

namespace drowsy {

// In-place radix-2 FFT, power-of-two lengths only. Forward transform uses
// the e^{-i 2 pi jk/N} convention.
void fft_inplace(std::vector<std::complex<double>>& data);

// Forward FFT of a real signal zero-padded (or rejected) to n points.
// Throws std::invalid_argument if n is not a power of two or the signal is
// longer than n.
std::vector<std::complex<double>> fft_real(const std::vector<double>& signal, std::size_t n);

bool is_power_of_two(std::size_t n);

// Magnitude peak search over bins [bin_lo, bin_hi] of a spectrum; returns the
// peak bin index.
std::size_t peak_bin(const std::vector<std::complex<double>>& spectrum, std::size_t bin_lo, std::size_t bin_hi);

} // namespace drowsy
