#pragma once

// Filter-bank canonical correlation analysis.
//
// The epoch is split into sub-bands that share a high cutoff at the 4th
// harmonic of the highest stimulus and start at successive multiples of the
// lowest stimulus. In each sub-band the largest canonical correlation with a
// sine/cosine reference set is computed per target, and the squared
// correlations are fused across sub-bands with weights n^-a + b.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mindlink/cca.hpp"
#include "mindlink/dsp.hpp"
#include "mindlink/eeg_synth.hpp"

namespace mindlink {

struct ReferenceSet {
  double target_hz = 0.0;
  int n_harmonics = 0;
  /// Rows 2(m-1) and 2(m-1)+1 hold sin and cos of harmonic m.
  Eigen::MatrixXd signals;
};

inline ReferenceSet build_references(double target_hz, int n_harmonics, double fs_hz, std::size_t n_samples) {
  if (n_harmonics < 1) throw InvalidArgument("build_references: n_harmonics must be >= 1");
  if (!(target_hz > 0.0 && n_harmonics * target_hz < fs_hz / 2.0))
    throw InvalidArgument("build_references: harmonic above Nyquist");
  ReferenceSet ref{target_hz, n_harmonics, Eigen::MatrixXd(2 * n_harmonics, static_cast<Eigen::Index>(n_samples))};
  for (int m = 1; m <= n_harmonics; ++m) {
    for (std::size_t k = 0; k < n_samples; ++k) {
      const double arg = kTwoPi * m * target_hz * static_cast<double>(k) / fs_hz;
      ref.signals(2 * (m - 1), static_cast<Eigen::Index>(k)) = std::sin(arg);
      ref.signals(2 * (m - 1) + 1, static_cast<Eigen::Index>(k)) = std::cos(arg);
    }
  }
  return ref;
}

struct FilterBank {
  std::vector<std::pair<double, double>> subbands;  // (lo_hz, hi_hz)
  std::size_t n_subbands() const noexcept { return subbands.size(); }
  bool operator==(const FilterBank&) const = default;
};

inline FilterBank build_filter_bank(const StimulusConfig& stimulus, int n_subbands) {
  stimulus.validate();
  if (n_subbands < 1) throw InvalidArgument("build_filter_bank: need at least one sub-band");
  const double hi = 4.0 * stimulus.max_hz();
  if (!(n_subbands * stimulus.min_hz() < hi))
    throw InvalidArgument("build_filter_bank: " + std::to_string(n_subbands) + " sub-bands starting at " +
                          std::to_string(stimulus.min_hz()) + " Hz exceed the " + std::to_string(hi) +
                          " Hz high cutoff");
  FilterBank bank;
  for (int n = 1; n <= n_subbands; ++n) bank.subbands.emplace_back(n * stimulus.min_hz(), hi);
  return bank;
}

struct FbccaConfig {
  StimulusConfig stimulus = StimulusConfig::default_set();
  int n_harmonics = 4;
  int n_subbands = 4;
  double weight_a = 1.25;
  double weight_b = 0.25;
  /// Minimum best-minus-runner-up score gap for a recognized decision.
  double decision_margin = 0.15;
  double fs_hz = 250.0;
  /// Total band-pass order of each sub-band filter.
  int filter_order = 4;

  double weight(int subband) const { return std::pow(static_cast<double>(subband), -weight_a) + weight_b; }

  void validate() const {
    stimulus.validate();
    if (n_harmonics < 1) throw InvalidArgument("fbcca: n_harmonics must be >= 1");
    if (n_subbands < 1) throw InvalidArgument("fbcca: n_subbands must be >= 1");
    if (!(n_subbands * stimulus.min_hz() < 4.0 * stimulus.max_hz()))
      throw InvalidArgument("fbcca: filter bank invalid for stimulus set");
    if (!(decision_margin >= 0.0)) throw InvalidArgument("fbcca: decision_margin must be >= 0");
    if (!(4.0 * stimulus.max_hz() < fs_hz / 2.0)) throw InvalidArgument("fbcca: bank high cutoff above Nyquist");
    if (!(n_harmonics * stimulus.max_hz() < fs_hz / 2.0)) throw InvalidArgument("fbcca: reference harmonic above Nyquist");
  }
};

struct Decision {
  std::size_t predicted_index = 0;
  std::vector<double> scores;
  double margin = 0.0;
  bool recognized = false;
};

/// Scales each channel to zero mean and unit variance. Flat channels are
/// zeroed; an epoch with no varying channel is degenerate.
inline Eigen::MatrixXd standardize_channels(const EegEpoch& epoch) {
  Eigen::MatrixXd x = epoch.samples;
  bool any = false;
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    auto row = x.row(c);
    const double mean = row.mean();
    row.array() -= mean;
    const double sd = std::sqrt(row.squaredNorm() / static_cast<double>(row.size()));
    if (sd > 0.0 && std::isfinite(sd)) {
      row /= sd;
      any = true;
    } else {
      row.setZero();
    }
  }
  if (!any) throw DegenerateInput("classify: every channel is flat");
  return x;
}

/// Per-sub-band, per-target canonical correlations rho[n][k].
inline std::vector<std::vector<double>> subband_correlations(const EegEpoch& epoch, const FbccaConfig& config,
                                                             const FilterBank& bank) {
  config.validate();
  if (bank.n_subbands() != static_cast<std::size_t>(config.n_subbands))
    throw InvalidArgument("classify: filter bank has " + std::to_string(bank.n_subbands()) +
                          " sub-bands, config expects " + std::to_string(config.n_subbands));
  if (epoch.fs_hz != config.fs_hz) throw InvalidArgument("classify: epoch fs differs from decoder fs");
  if (epoch.n_channels() == 0) throw InvalidArgument("classify: epoch has no channels");
  const std::size_t n = epoch.n_samples();
  const Eigen::MatrixXd standardized = standardize_channels(epoch);

  std::vector<Eigen::MatrixXd> ref_bases;
  ref_bases.reserve(config.stimulus.count());
  for (double f : config.stimulus.frequencies_hz)
    ref_bases.push_back(centered_row_basis(build_references(f, config.n_harmonics, config.fs_hz, n).signals));

  if (n < static_cast<std::size_t>(std::max<Eigen::Index>(standardized.rows(), 2 * config.n_harmonics) + 2))
    throw InvalidArgument("classify: epoch too short for the channel and reference count");

  std::vector<std::vector<double>> rho(bank.n_subbands(), std::vector<double>(config.stimulus.count()));
  Eigen::MatrixXd band(standardized.rows(), standardized.cols());
  for (std::size_t b = 0; b < bank.n_subbands(); ++b) {
    const auto [lo, hi] = bank.subbands[b];
    const FilterCoeffs filter = design_bandpass(config.filter_order, lo, hi, config.fs_hz);
    for (Eigen::Index c = 0; c < standardized.rows(); ++c) {
      const Eigen::VectorXd row = standardized.row(c).transpose();
      const auto y = filtfilt(filter, std::span<const double>(row.data(), n));
      for (std::size_t k = 0; k < n; ++k) band(c, static_cast<Eigen::Index>(k)) = y[k];
    }
    const Eigen::MatrixXd qx = centered_row_basis(band);
    if (qx.cols() == 0) throw DegenerateInput("classify: sub-band carries no variance");
    for (std::size_t k = 0; k < ref_bases.size(); ++k) rho[b][k] = canonical_correlation(qx, ref_bases[k]);
  }
  return rho;
}

/// Decodes the attended target. Scores are fused in fixed sub-band order.
inline Decision classify(const EegEpoch& epoch, const FbccaConfig& config, const FilterBank& bank) {
  const auto rho = subband_correlations(epoch, config, bank);
  Decision d;
  d.scores.assign(config.stimulus.count(), 0.0);
  for (std::size_t b = 0; b < rho.size(); ++b) {
    const double w = config.weight(static_cast<int>(b) + 1);
    for (std::size_t k = 0; k < d.scores.size(); ++k) d.scores[k] += w * rho[b][k] * rho[b][k];
  }
  double best = -1.0, second = -1.0;
  for (std::size_t k = 0; k < d.scores.size(); ++k) {
    if (d.scores[k] > best) {
      second = best;
      best = d.scores[k];
      d.predicted_index = k;
    } else if (d.scores[k] > second) {
      second = d.scores[k];
    }
  }
  d.margin = second < 0.0 ? best : best - second;
  d.recognized = d.margin >= config.decision_margin;
  return d;
}

}  // namespace mindlink
