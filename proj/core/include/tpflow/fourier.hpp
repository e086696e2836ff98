#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

// Thin spectral layer over FFTW for periodic data on the uniform grid
// x_i = i/N of the unit circle R/Z.  Conventions:
//   analysis    c_k = (1/N) sum_i f(x_i) e^{-2 pi i k x_i}
//   synthesis   f(x) = sum_k c_k e^{2 pi i k x},  k = -N/2 .. N/2-1
// The Nyquist bin (k = -N/2 for even N) is treated symmetrically: it
// contributes c * cos(pi N x) to evaluation and nothing to derivatives.

namespace tpflow::fourier {

using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Unnormalized FFTW transforms on std::complex buffers.
void fft_forward(const VectorXcd& in, VectorXcd& out);
void fft_inverse(const VectorXcd& in, VectorXcd& out);

// Analysis coefficients of a real sample vector, 1/N normalized, bin
// order as produced by the FFT (bin j holds frequency j for j < N/2,
// j - N for j >= N/2).
VectorXcd coeffs(const VectorXd& values);

// Signed frequency of bin j.
int bin_frequency(int j, int n);

// Synthesis back to grid samples.
VectorXd values(const VectorXcd& coeffs);

// Spectral derivative of grid samples (Nyquist bin dropped).
VectorXd derivative(const VectorXd& values);
MatrixXd derivative_cols(const MatrixXd& values);

// In-place coefficient maps.
VectorXcd derivative_coeffs(const VectorXcd& coeffs);

// Samples of the interpolant on the shifted grid {x_i + w}.
VectorXd shifted_values(const VectorXcd& coeffs, double w);

// e^{i 2 pi k w} - 1 for bin frequency k (the symmetric Nyquist bin maps
// to cos - 1), written so the magnitude comes from sin(pi k w) rather
// than by subtracting two order-one numbers; full relative accuracy at
// any |w|.
std::complex<double> phase_difference(int k, int n, double w);

// Samples of f(x_i + w) - f(x_i), computed with cancellation-free phase
// factors so the result keeps full relative accuracy even when |w| is far
// below the grid spacing.
VectorXd shifted_difference(const VectorXcd& coeffs, double w);

// Evaluate the interpolant (or its derivative) at one arbitrary point.
double evaluate(const VectorXcd& coeffs, double x);
double evaluate_derivative(const VectorXcd& coeffs, double x);

// Coefficients of the periodic part of the antiderivative: input samples
// f with mean m; returns coefficients of P with P' = f - m.  The full
// antiderivative is m*x + P(x).
VectorXcd antiderivative_coeffs(const VectorXcd& coeffs);

// Column-batched variants used by dense form assembly.
using Eigen::MatrixXcd;
MatrixXcd coeffs_cols(const MatrixXd& values);
MatrixXcd derivative_coeffs_cols(const MatrixXcd& coeffs);
MatrixXd values_cols(const MatrixXcd& coeffs);
MatrixXd shifted_values_cols(const MatrixXcd& coeffs, double w);
MatrixXd shifted_difference_cols(const MatrixXcd& coeffs, double w);

} // namespace tpflow::fourier
