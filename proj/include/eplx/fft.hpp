#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <stdexcept>

namespace eplx {

namespace detail {
// FFTW's planner is not re-entrant; execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

// Unitary DFT applied independently to `howmany` contiguous rows of length n.
// forward: X_k = n^{-1/2} sum_j x_j e^{-2 pi i jk/n}; backward is its inverse.
class BatchedFft {
 public:
  BatchedFft(std::size_t n, std::size_t howmany) : n_(n), howmany_(howmany), scale_(1.0 / std::sqrt(double(n))) {
    if (n == 0 || howmany == 0) throw std::invalid_argument("BatchedFft: empty transform");
    std::lock_guard lock(detail::fftw_planner_mutex());
    auto* scratch = fftw_alloc_complex(n * howmany);
    const int len = static_cast<int>(n);
    const int count = static_cast<int>(howmany);
    // ESTIMATE keeps plan selection, and therefore roundoff, reproducible.
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    forward_ = fftw_plan_many_dft(1, &len, count, scratch, nullptr, 1, len, scratch, nullptr, 1, len,
                                  FFTW_FORWARD, flags);
    backward_ = fftw_plan_many_dft(1, &len, count, scratch, nullptr, 1, len, scratch, nullptr, 1, len,
                                   FFTW_BACKWARD, flags);
    fftw_free(scratch);
    if (!forward_ || !backward_) throw std::runtime_error("BatchedFft: FFTW planning failed");
  }

  BatchedFft(const BatchedFft&) = delete;
  BatchedFft& operator=(const BatchedFft&) = delete;

  BatchedFft(BatchedFft&& other) noexcept { swap(other); }
  BatchedFft& operator=(BatchedFft&& other) noexcept {
    swap(other);
    return *this;
  }

  ~BatchedFft() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    if (forward_) fftw_destroy_plan(forward_);
    if (backward_) fftw_destroy_plan(backward_);
  }

  std::size_t length() const { return n_; }
  std::size_t batch() const { return howmany_; }

  void forward(std::span<std::complex<double>> data) const { run(forward_, data, scale_); }
  void backward(std::span<std::complex<double>> data) const { run(backward_, data, scale_); }

  // Raw transforms; a forward/backward pair multiplies by n.
  void forward_unscaled(std::span<std::complex<double>> data) const { run(forward_, data, 1.0); }
  void backward_unscaled(std::span<std::complex<double>> data) const { run(backward_, data, 1.0); }

 private:
  void run(fftw_plan plan, std::span<std::complex<double>> data, double scale) const {
    if (data.size() != n_ * howmany_) throw std::invalid_argument("BatchedFft: size mismatch");
    auto* raw = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan, raw, raw);
    if (scale != 1.0)
      for (auto& x : data) x *= scale;
  }

  void swap(BatchedFft& o) noexcept {
    std::swap(n_, o.n_);
    std::swap(howmany_, o.howmany_);
    std::swap(scale_, o.scale_);
    std::swap(forward_, o.forward_);
    std::swap(backward_, o.backward_);
  }

  std::size_t n_ = 0;
  std::size_t howmany_ = 0;
  double scale_ = 1.0;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

}  // namespace eplx
