#pragma once

#include <cassert>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace degenmix {

// Iterative radix-2 complex FFT for power-of-two sizes. Grids in this
// project are tiny (16..64 per dimension), and a fixed in-tree transform
// keeps results bit-reproducible across runs, which the reporting layer
// relies on.
class Fft {
 public:
  explicit Fft(std::size_t n) : n_(n) {
    if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("Fft: size must be a power of 2");
    log2n_ = 0;
    while ((std::size_t(1) << log2n_) < n) ++log2n_;
    tw_.resize(n / 2);
    const double two_pi = 6.283185307179586476925286766559;
    for (std::size_t k = 0; k < n / 2; ++k) {
      double ang = -two_pi * static_cast<double>(k) / static_cast<double>(n);
      tw_[k] = {std::cos(ang), std::sin(ang)};
    }
    rev_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t r = 0;
      for (unsigned b = 0; b < log2n_; ++b)
        if (i & (std::size_t(1) << b)) r |= std::size_t(1) << (log2n_ - 1 - b);
      rev_[i] = r;
    }
  }

  std::size_t size() const { return n_; }

  // In-place forward transform with stride (for multi-dimensional passes):
  // X[k] = sum_j x[j] e^{-2pi i jk/n}.
  void forward(std::complex<double>* x, std::size_t stride = 1) const {
    for (std::size_t i = 0; i < n_; ++i) {
      std::size_t r = rev_[i];
      if (i < r) std::swap(x[i * stride], x[r * stride]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      std::size_t half = len >> 1;
      std::size_t step = n_ / len;
      for (std::size_t i = 0; i < n_; i += len) {
        for (std::size_t k = 0; k < half; ++k) {
          std::complex<double> w = tw_[k * step];
          std::complex<double>& a = x[(i + k) * stride];
          std::complex<double>& b = x[(i + k + half) * stride];
          std::complex<double> t = w * b;
          b = a - t;
          a = a + t;
        }
      }
    }
  }

  // In-place inverse transform (unitary pairing with forward: includes 1/n).
  void inverse(std::complex<double>* x, std::size_t stride = 1) const {
    for (std::size_t i = 0; i < n_; ++i) x[i * stride] = std::conj(x[i * stride]);
    forward(x, stride);
    double inv = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) x[i * stride] = std::conj(x[i * stride]) * inv;
  }

 private:
  std::size_t n_;
  unsigned log2n_ = 0;
  std::vector<std::complex<double>> tw_;
  std::vector<std::size_t> rev_;
};

// d-dimensional transform on a contiguous row-major M^d array.
class FftNd {
 public:
  FftNd(int dims, std::size_t m) : dims_(dims), m_(m), fft_(m) {}

  void forward(std::complex<double>* data) const { run(data, true); }
  void inverse(std::complex<double>* data) const { run(data, false); }

  std::size_t total() const {
    std::size_t t = 1;
    for (int d = 0; d < dims_; ++d) t *= m_;
    return t;
  }

 private:
  void run(std::complex<double>* data, bool fwd) const {
    std::size_t total_sz = total();
    // Transform along each axis; axis d has stride m_^(dims-1-d) in row-major.
    std::size_t stride = total_sz / m_;
    for (int d = 0; d < dims_; ++d) {
      std::size_t nlines = total_sz / m_;
      for (std::size_t line = 0; line < nlines; ++line) {
        // Decompose line index into (outer, inner) around the active axis.
        std::size_t outer = line / stride;
        std::size_t inner = line % stride;
        std::complex<double>* p = data + outer * stride * m_ + inner;
        if (fwd)
          fft_.forward(p, stride);
        else
          fft_.inverse(p, stride);
      }
      stride /= m_;
    }
  }

  int dims_;
  std::size_t m_;
  Fft fft_;
};

}  // namespace degenmix
