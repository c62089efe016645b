#pragma once

// Small independent helpers shared by the test suites. Nothing here calls
// into the library's numerical code, so it can serve as an oracle.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace oracle {

inline constexpr double kPi = std::numbers::pi;

/// |X(f)|^2 of the plain (rectangular-window) DFT evaluated at frequency f.
inline double dft_power(std::span<const double> x, double f_hz, double fs_hz) {
  std::complex<double> acc{0.0, 0.0};
  for (std::size_t k = 0; k < x.size(); ++k)
    acc += x[k] * std::exp(std::complex<double>(0.0, -2.0 * kPi * f_hz * static_cast<double>(k) / fs_hz));
  return std::norm(acc);
}

/// Direct evaluation of B(z)/A(z) on the unit circle, coefficients in z^-1.
inline std::complex<double> polyval_response(const std::vector<double>& b, const std::vector<double>& a, double f_hz,
                                             double fs_hz) {
  const std::complex<double> zinv = std::polar(1.0, -2.0 * kPi * f_hz / fs_hz);
  std::complex<double> num{0.0, 0.0}, den{0.0, 0.0}, p{1.0, 0.0};
  for (std::size_t i = 0; i < std::max(b.size(), a.size()); ++i) {
    if (i < b.size()) num += b[i] * p;
    if (i < a.size()) den += a[i] * p;
    p *= zinv;
  }
  return num / den;
}

inline double db(double magnitude) { return 20.0 * std::log10(magnitude); }

/// Bitwise reflected CRC-32 (poly 0xEDB88320), no tables.
inline std::uint32_t crc32_bitwise(std::span<const std::uint8_t> bytes) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::uint8_t byte : bytes) {
    crc ^= byte;
    for (int i = 0; i < 8; ++i) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

inline std::vector<double> white_noise(std::size_t n, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

}  // namespace oracle

#include <Eigen/Dense>

namespace oracle {

/// Brute-force largest canonical correlation for two 2-row sets: maximizes
/// |corr(w'X, v'Y)| over unit vectors w, v on an angle grid of `steps` x
/// `steps` points in [0, pi).
inline double grid_cca_2x2(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, int steps = 3600) {
  auto centered = [](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd c = m;
    for (Eigen::Index r = 0; r < c.rows(); ++r) c.row(r).array() -= c.row(r).mean();
    return c;
  };
  const Eigen::MatrixXd xc = centered(x), yc = centered(y);
  const Eigen::Matrix2d a = xc * xc.transpose();
  const Eigen::Matrix2d b = yc * yc.transpose();
  const Eigen::Matrix2d c = xc * yc.transpose();
  std::vector<Eigen::Vector2d> v(static_cast<std::size_t>(steps));
  std::vector<double> vbv(static_cast<std::size_t>(steps));
  for (int j = 0; j < steps; ++j) {
    const double phi = kPi * j / steps;
    v[static_cast<std::size_t>(j)] = {std::cos(phi), std::sin(phi)};
    vbv[static_cast<std::size_t>(j)] = v[static_cast<std::size_t>(j)].dot(b * v[static_cast<std::size_t>(j)]);
  }
  double best = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double th = kPi * i / steps;
    const Eigen::Vector2d w{std::cos(th), std::sin(th)};
    const double waw = w.dot(a * w);
    const Eigen::RowVector2d u = w.transpose() * c;
    for (int j = 0; j < steps; ++j) {
      const double den = std::sqrt(waw * vbv[static_cast<std::size_t>(j)]);
      if (den <= 0.0) continue;
      best = std::max(best, std::abs(u.dot(v[static_cast<std::size_t>(j)].transpose())) / den);
    }
  }
  return best;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index k = 0; k < cols; ++k) m(r, k) = g(rng);
  return m;
}

}  // namespace oracle
