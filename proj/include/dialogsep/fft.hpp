#pragma once

// Complex FFT of arbitrary size: iterative radix-2 for powers of two,
// Bluestein's chirp-z for everything else. Plans are immutable.

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "dialogsep/error.hpp"

namespace dialogsep {

using Complex = std::complex<double>;

class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n) {
    if (n == 0) throw ArgumentError("Fft: size must be positive");
    if (std::has_single_bit(n)) {
      init_radix2();
    } else {
      init_bluestein();
    }
  }

  [[nodiscard]] std::size_t size() const noexcept { return n_; }

  /// In-place forward transform, X[k] = sum_n x[n] e^{-2 pi i k n / N}.
  void forward(std::span<Complex> data) const { transform(data, false); }

  /// In-place inverse transform, including the 1/N factor.
  void inverse(std::span<Complex> data) const {
    transform(data, true);
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& v : data) v *= scale;
  }

 private:
  void init_radix2() {
    twiddles_.resize(n_ / 2);
    for (std::size_t k = 0; k < n_ / 2; ++k) {
      const double phi = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_);
      twiddles_[k] = {std::cos(phi), std::sin(phi)};
    }
    bitrev_.resize(n_);
    const int bits = std::countr_zero(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      std::size_t r = 0;
      for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
      bitrev_[i] = r;
    }
  }

  void init_bluestein() {
    const std::size_t m = std::bit_ceil(2 * n_ - 1);
    inner_ = std::make_shared<const Fft>(m);
    chirp_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      // k^2 mod 2N keeps the phase argument small for large k.
      const auto k2 = static_cast<double>((k * k) % (2 * n_));
      const double phi = std::numbers::pi * k2 / static_cast<double>(n_);
      chirp_[k] = {std::cos(phi), -std::sin(phi)};
    }
    chirp_spectrum_.assign(m, Complex{});
    chirp_spectrum_[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n_; ++k) {
      chirp_spectrum_[k] = std::conj(chirp_[k]);
      chirp_spectrum_[m - k] = std::conj(chirp_[k]);
    }
    inner_->forward(chirp_spectrum_);
  }

  void transform(std::span<Complex> data, bool inverse) const {
    if (data.size() != n_) throw ArgumentError("Fft: buffer size does not match plan");
    if (inner_) {
      bluestein(data, inverse);
    } else {
      radix2(data, inverse);
    }
  }

  void radix2(std::span<Complex> a, bool inverse) const {
    for (std::size_t i = 0; i < n_; ++i) {
      if (i < bitrev_[i]) std::swap(a[i], a[bitrev_[i]]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      const std::size_t stride = n_ / len;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t j = 0; j < half; ++j) {
          Complex w = twiddles_[j * stride];
          if (inverse) w = std::conj(w);
          const Complex u = a[start + j];
          const Complex v = a[start + j + half] * w;
          a[start + j] = u + v;
          a[start + j + half] = u - v;
        }
      }
    }
  }

  void bluestein(std::span<Complex> a, bool inverse) const {
    const std::size_t m = inner_->size();
    std::vector<Complex> work(m, Complex{});
    for (std::size_t k = 0; k < n_; ++k) {
      const Complex c = inverse ? std::conj(chirp_[k]) : chirp_[k];
      work[k] = a[k] * c;
    }
    inner_->forward(work);
    for (std::size_t k = 0; k < m; ++k) {
      work[k] *= inverse ? std::conj(chirp_spectrum_[(m - k) % m]) : chirp_spectrum_[k];
    }
    inner_->inverse(work);
    for (std::size_t k = 0; k < n_; ++k) {
      const Complex c = inverse ? std::conj(chirp_[k]) : chirp_[k];
      a[k] = work[k] * c;
    }
  }

  std::size_t n_;
  std::vector<Complex> twiddles_;
  std::vector<std::size_t> bitrev_;
  std::shared_ptr<const Fft> inner_;
  std::vector<Complex> chirp_;
  std::vector<Complex> chirp_spectrum_;
};

/// Real-input FFT returning the n/2 + 1 non-negative-frequency bins.
class RealFft {
 public:
  explicit RealFft(std::size_t n) : fft_(n) {}

  [[nodiscard]] std::size_t size() const noexcept { return fft_.size(); }
  [[nodiscard]] std::size_t bins() const noexcept { return fft_.size() / 2 + 1; }

  /// `input` may be shorter than the transform size; it is zero-padded.
  void forward(std::span<const double> input, std::span<Complex> spectrum) const {
    if (input.size() > size() || spectrum.size() != bins()) throw ArgumentError("RealFft: bad buffer sizes");
    std::vector<Complex> buf(size(), Complex{});
    for (std::size_t i = 0; i < input.size(); ++i) buf[i] = input[i];
    fft_.forward(buf);
    std::copy_n(buf.begin(), bins(), spectrum.begin());
  }

  /// Inverse of `forward`; the spectrum is treated as Hermitian-symmetric.
  void inverse(std::span<const Complex> spectrum, std::span<double> output) const {
    if (output.size() != size() || spectrum.size() != bins()) throw ArgumentError("RealFft: bad buffer sizes");
    const std::size_t n = size();
    std::vector<Complex> buf(n);
    for (std::size_t k = 0; k < bins(); ++k) buf[k] = spectrum[k];
    for (std::size_t k = bins(); k < n; ++k) buf[k] = std::conj(spectrum[n - k]);
    fft_.inverse(buf);
    for (std::size_t i = 0; i < n; ++i) output[i] = buf[i].real();
  }

 private:
  Fft fft_;
};

}  // namespace dialogsep
