#include "drowsy/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace drowsy {

bool is_power_of_two(std::size_t n) {
    return n != 0 && (n & (n - 1)) == 0;
}

void fft_inplace(std::vector<std::complex<double>>& data) {
    const std::size_t n = data.size();
    if (!is_power_of_two(n)) throw std::invalid_argument("fft: length must be a power of two");
    if (n == 1) return;

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }

    static const double kTwoPi = 6.283185307179586476925286766559;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -kTwoPi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = data[i + k];
                std::complex<double> v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

std::vector<std::complex<double>> fft_real(const std::vector<double>& signal, std::size_t n) {
    if (!is_power_of_two(n)) throw std::invalid_argument("fft: length must be a power of two");
    if (signal.size() > n) throw std::invalid_argument("fft: signal longer than transform length");
    std::vector<std::complex<double>> data(n, {0.0, 0.0});
    for (std::size_t i = 0; i < signal.size(); ++i) data[i] = {signal[i], 0.0};
    fft_inplace(data);
    return data;
}

std::size_t peak_bin(const std::vector<std::complex<double>>& spectrum, std::size_t bin_lo, std::size_t bin_hi) {
    if (bin_hi >= spectrum.size() || bin_lo > bin_hi) throw std::invalid_argument("peak_bin: bad range");
    std::size_t best = bin_lo;
    double best_mag = std::norm(spectrum[bin_lo]);
    for (std::size_t k = bin_lo + 1; k <= bin_hi; ++k) {
        double m = std::norm(spectrum[k]);
        if (m > best_mag) {
            best_mag = m;
            best = k;
        }
    }
    return best;
}

} // namespace drowsy
