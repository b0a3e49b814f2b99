#pragma once

// Radix-2 complex FFT used by the time-collocation solver.  Forward maps
// samples x_j to coefficients X_k = sum_j x_j exp(-2*pi*i*j*k/M); inverse
// includes the 1/M factor, so inverse(forward(x)) == x.

#include <complex>
#include <stdexcept>
#include <vector>

namespace bdps {

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

namespace detail {
inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const int n = static_cast<int>(a.size());
    if (!is_power_of_two(n)) throw std::invalid_argument("fft: length must be a power of two");
    // bit-reversal permutation
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double pi = 3.14159265358979323846;
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * pi / len;
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / n;
        for (auto& x : a) x *= inv;
    }
}
}  // namespace detail

inline void fft_forward(std::vector<std::complex<double>>& a) { detail::fft_radix2(a, false); }
inline void fft_inverse(std::vector<std::complex<double>>& a) { detail::fft_radix2(a, true); }

}  // namespace bdps
