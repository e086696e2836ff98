#include "tpflow/fourier.hpp"

#include "tpflow/errors.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

namespace tpflow::fourier {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// FFTW planning is not thread safe; execution via the new-array interface
// is, as long as each call uses its own buffers.  Plans are cached per
// size and created with FFTW_ESTIMATE so results do not depend on wisdom
// accumulated across runs.
struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

std::mutex g_plan_mutex;
std::map<int, PlanPair>& plan_cache() {
  static std::map<int, PlanPair> cache;
  return cache;
}

PlanPair plans_for(int n) {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto& cache = plan_cache();
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  fftw_complex* a = fftw_alloc_complex(static_cast<size_t>(n));
  fftw_complex* b = fftw_alloc_complex(static_cast<size_t>(n));
  PlanPair p;
  p.forward = fftw_plan_dft_1d(n, a, b, FFTW_FORWARD, FFTW_ESTIMATE);
  p.inverse = fftw_plan_dft_1d(n, a, b, FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_free(a);
  fftw_free(b);
  cache.emplace(n, p);
  return p;
}

void run_plan(fftw_plan plan, const VectorXcd& in, VectorXcd& out) {
  const int n = static_cast<int>(in.size());
  out.resize(n);
  fftw_complex* a = fftw_alloc_complex(static_cast<size_t>(n));
  fftw_complex* b = fftw_alloc_complex(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    a[i][0] = in[i].real();
    a[i][1] = in[i].imag();
  }
  fftw_execute_dft(plan, a, b);
  for (int i = 0; i < n; ++i) out[i] = std::complex<double>(b[i][0], b[i][1]);
  fftw_free(a);
  fftw_free(b);
}

} // namespace

void fft_forward(const VectorXcd& in, VectorXcd& out) {
  run_plan(plans_for(static_cast<int>(in.size())).forward, in, out);
}

void fft_inverse(const VectorXcd& in, VectorXcd& out) {
  run_plan(plans_for(static_cast<int>(in.size())).inverse, in, out);
}

int bin_frequency(int j, int n) { return (j < (n + 1) / 2) ? j : j - n; }

VectorXcd coeffs(const VectorXd& vals) {
  const int n = static_cast<int>(vals.size());
  if (n < 8) throw ConfigError("grid too small for spectral transforms (need N >= 8)");
  VectorXcd in(n), out;
  for (int i = 0; i < n; ++i) in[i] = vals[i];
  fft_forward(in, out);
  out /= static_cast<double>(n);
  return out;
}

VectorXd values(const VectorXcd& c) {
  const int n = static_cast<int>(c.size());
  VectorXcd out;
  fft_inverse(c, out);
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = out[i].real();
  return v;
}

VectorXcd derivative_coeffs(const VectorXcd& c) {
  const int n = static_cast<int>(c.size());
  VectorXcd d(n);
  for (int j = 0; j < n; ++j) {
    const int k = bin_frequency(j, n);
    if (2 * k == -n) {
      d[j] = 0.0; // Nyquist carries no usable derivative information
    } else {
      d[j] = c[j] * std::complex<double>(0.0, kTwoPi * k);
    }
  }
  return d;
}

VectorXd derivative(const VectorXd& vals) {
  return values(derivative_coeffs(coeffs(vals)));
}

MatrixXd derivative_cols(const MatrixXd& vals) {
  MatrixXd out(vals.rows(), vals.cols());
  for (int c = 0; c < vals.cols(); ++c) out.col(c) = derivative(vals.col(c));
  return out;
}

VectorXd shifted_values(const VectorXcd& c, double w) {
  const int n = static_cast<int>(c.size());
  VectorXcd shifted(n);
  for (int j = 0; j < n; ++j) {
    const int k = bin_frequency(j, n);
    if (2 * k == -n) {
      // symmetric Nyquist: phase collapses to a real cosine factor
      shifted[j] = c[j] * std::cos(kTwoPi * 0.5 * n * w);
    } else {
      const double ang = kTwoPi * k * w;
      shifted[j] = c[j] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
  }
  return values(shifted);
}

std::complex<double> phase_difference(int k, int n, double w) {
  if (2 * k == -n) {
    const double s = std::sin(kTwoPi * 0.25 * n * w);
    return {-2.0 * s * s, 0.0};
  }
  const double half = kTwoPi * 0.5 * k * w;
  const double s = std::sin(half);
  return {-2.0 * s * s, 2.0 * s * std::cos(half)};
}

VectorXd shifted_difference(const VectorXcd& c, double w) {
  const int n = static_cast<int>(c.size());
  VectorXcd diff(n);
  for (int j = 0; j < n; ++j) {
    diff[j] = c[j] * phase_difference(bin_frequency(j, n), n, w);
  }
  return values(diff);
}

double evaluate(const VectorXcd& c, double x) {
  const int n = static_cast<int>(c.size());
  std::complex<double> acc = 0.0;
  for (int j = 0; j < n; ++j) {
    const int k = bin_frequency(j, n);
    if (2 * k == -n) {
      acc += c[j] * std::cos(kTwoPi * 0.5 * n * x);
    } else {
      const double ang = kTwoPi * k * x;
      acc += c[j] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
  }
  return acc.real();
}

double evaluate_derivative(const VectorXcd& c, double x) {
  const int n = static_cast<int>(c.size());
  std::complex<double> acc = 0.0;
  for (int j = 0; j < n; ++j) {
    const int k = bin_frequency(j, n);
    if (2 * k == -n) continue;
    const double ang = kTwoPi * k * x;
    acc += c[j] * std::complex<double>(0.0, kTwoPi * k) *
           std::complex<double>(std::cos(ang), std::sin(ang));
  }
  return acc.real();
}

MatrixXcd coeffs_cols(const MatrixXd& vals) {
  MatrixXcd out(vals.rows(), vals.cols());
  for (int c = 0; c < vals.cols(); ++c) out.col(c) = coeffs(vals.col(c));
  return out;
}

MatrixXcd derivative_coeffs_cols(const MatrixXcd& c) {
  MatrixXcd out(c.rows(), c.cols());
  for (int j = 0; j < c.cols(); ++j) out.col(j) = derivative_coeffs(c.col(j));
  return out;
}

MatrixXd values_cols(const MatrixXcd& c) {
  MatrixXd out(c.rows(), c.cols());
  for (int j = 0; j < c.cols(); ++j) out.col(j) = values(c.col(j));
  return out;
}

MatrixXd shifted_values_cols(const MatrixXcd& c, double w) {
  const int n = static_cast<int>(c.rows());
  VectorXcd phase(n);
  for (int j = 0; j < n; ++j) {
    const int k = bin_frequency(j, n);
    if (2 * k == -n) {
      phase[j] = std::cos(kTwoPi * 0.5 * n * w);
    } else {
      const double ang = kTwoPi * k * w;
      phase[j] = std::complex<double>(std::cos(ang), std::sin(ang));
    }
  }
  MatrixXd out(n, c.cols());
  VectorXcd tmp(n), res;
  for (int col = 0; col < c.cols(); ++col) {
    tmp = c.col(col).cwiseProduct(phase);
    fft_inverse(tmp, res);
    for (int i = 0; i < n; ++i) out(i, col) = res[i].real();
  }
  return out;
}

MatrixXd shifted_difference_cols(const MatrixXcd& c, double w) {
  const int n = static_cast<int>(c.rows());
  VectorXcd phase(n);
  for (int j = 0; j < n; ++j) {
    phase[j] = phase_difference(bin_frequency(j, n), n, w);
  }
  MatrixXd out(n, c.cols());
  VectorXcd tmp(n), res;
  for (int col = 0; col < c.cols(); ++col) {
    tmp = c.col(col).cwiseProduct(phase);
    fft_inverse(tmp, res);
    for (int i = 0; i < n; ++i) out(i, col) = res[i].real();
  }
  return out;
}

VectorXcd antiderivative_coeffs(const VectorXcd& c) {
  const int n = static_cast<int>(c.size());
  VectorXcd a(n);
  a[0] = 0.0;
  for (int j = 1; j < n; ++j) {
    const int k = bin_frequency(j, n);
    if (2 * k == -n) {
      a[j] = 0.0;
    } else {
      a[j] = c[j] / std::complex<double>(0.0, kTwoPi * k);
    }
  }
  return a;
}

} // namespace tpflow::fourier
