#pragma once

// Epoch preprocessing: Butterworth band-pass and notch design as cascaded
// second-order sections, zero-phase (forward-backward) application, and
// frontal-channel artifact gating.

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "mindlink/common.hpp"
#include "mindlink/eeg_synth.hpp"

namespace mindlink {

/// y = b0 x + b1 x[-1] + b2 x[-2] - a1 y[-1] - a2 y[-2]
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::complex<double> response(std::complex<double> zinv) const {
    return (b0 + zinv * (b1 + zinv * b2)) / (1.0 + zinv * (a1 + zinv * a2));
  }

  std::array<std::complex<double>, 2> poles() const {
    const std::complex<double> disc = std::sqrt(std::complex<double>(a1 * a1 - 4.0 * a2, 0.0));
    return {(-a1 + disc) / 2.0, (-a1 - disc) / 2.0};
  }

  double dc_gain() const { return (b0 + b1 + b2) / (1.0 + a1 + a2); }
};

struct FilterCoeffs {
  std::vector<Biquad> sections;
  double gain = 1.0;

  /// Cascade transfer function evaluated on the unit circle at `f_hz`.
  std::complex<double> response(double f_hz, double fs_hz) const {
    const std::complex<double> zinv = std::polar(1.0, -kTwoPi * f_hz / fs_hz);
    std::complex<double> h = gain;
    for (const auto& s : sections) h *= s.response(zinv);
    return h;
  }

  double magnitude_db(double f_hz, double fs_hz) const {
    return 20.0 * std::log10(std::abs(response(f_hz, fs_hz)));
  }

  double max_pole_radius() const {
    double r = 0.0;
    for (const auto& s : sections)
      for (auto p : s.poles()) r = std::max(r, std::abs(p));
    return r;
  }
};

/// Butterworth band-pass of total order `order` (a prototype of order/2
/// mapped low-pass to band-pass), bilinear transform with prewarped edges.
/// Edges sit at -3 dB; the cascade is normalized to unit gain at the
/// band's digital center frequency.
inline FilterCoeffs design_bandpass(int order, double lo_hz, double hi_hz, double fs_hz) {
  if (order != 2 && order != 4 && order != 6 && order != 8)
    throw DesignError("design_bandpass: order must be one of 2, 4, 6, 8");
  if (!(fs_hz > 0.0 && lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fs_hz / 2.0))
    throw DesignError("design_bandpass: need 0 < lo < hi < fs/2");

  using cd = std::complex<double>;
  const int proto = order / 2;
  const double k = 2.0 * fs_hz;
  const double wl = k * std::tan(std::numbers::pi * lo_hz / fs_hz);
  const double wh = k * std::tan(std::numbers::pi * hi_hz / fs_hz);
  const double bw = wh - wl;
  const double w0sq = wl * wh;

  // Analog band-pass poles in the upper half plane (plus real pairs).
  std::vector<cd> upper;
  std::vector<double> reals;
  for (int i = 0; i < proto; ++i) {
    const cd p = std::polar(1.0, std::numbers::pi * (2.0 * i + proto + 1.0) / (2.0 * proto));
    const cd half = p * bw / 2.0;
    const cd disc = std::sqrt(half * half - w0sq);
    for (cd s : {half + disc, half - disc}) {
      if (std::abs(s.imag()) < 1e-9 * std::abs(s))
        reals.push_back(s.real());
      else if (s.imag() > 0.0)
        upper.push_back(s);
    }
  }

  auto to_z = [k](cd s) { return (k + s) / (k - s); };
  FilterCoeffs out;
  for (cd s : upper) {
    const cd z = to_z(s);
    Biquad q;
    q.b0 = 1.0;
    q.b1 = 0.0;
    q.b2 = -1.0;  // one zero at z = 1 (DC) and one at z = -1 (Nyquist)
    q.a1 = -2.0 * z.real();
    q.a2 = std::norm(z);
    out.sections.push_back(q);
  }
  std::sort(reals.begin(), reals.end());
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    const double z1 = to_z(reals[i]).real(), z2 = to_z(reals[i + 1]).real();
    out.sections.push_back(Biquad{1.0, 0.0, -1.0, -(z1 + z2), z1 * z2});
  }
  if (static_cast<int>(out.sections.size()) != proto)
    throw DesignError("design_bandpass: pole pairing failed");

  const double fc = fs_hz / std::numbers::pi * std::atan(std::sqrt(w0sq) / k);
  out.gain = 1.0 / std::abs(out.response(fc, fs_hz));
  return out;
}

/// Second-order IIR notch at `center_hz` with -3 dB bandwidth center/q.
inline FilterCoeffs design_notch(double center_hz, double q, double fs_hz) {
  if (!(fs_hz > 0.0 && center_hz > 0.0 && center_hz < fs_hz / 2.0))
    throw DesignError("design_notch: need 0 < center < fs/2");
  if (!(q > 0.0)) throw DesignError("design_notch: q must be > 0");
  const double w0 = kTwoPi * center_hz / fs_hz;
  const double beta = std::tan(w0 / q / 2.0);
  const double g = 1.0 / (1.0 + beta);
  FilterCoeffs out;
  out.sections.push_back(Biquad{1.0, -2.0 * std::cos(w0), 1.0, -2.0 * g * std::cos(w0), 2.0 * g - 1.0});
  out.gain = g;
  return out;
}

/// Filters `x` in place with the cascade (transposed direct form II). `zi`
/// holds per-section state and is updated.
inline void sos_filter(const FilterCoeffs& f, std::span<double> x, std::vector<std::array<double, 2>>& zi) {
  for (double& v : x) {
    double y = v * f.gain;
    for (std::size_t s = 0; s < f.sections.size(); ++s) {
      const auto& q = f.sections[s];
      auto& z = zi[s];
      const double in = y;
      y = q.b0 * in + z[0];
      z[0] = q.b1 * in - q.a1 * y + z[1];
      z[1] = q.b2 * in - q.a2 * y;
    }
    v = y;
  }
}

/// Steady-state section states for a unit step at the cascade input.
inline std::vector<std::array<double, 2>> sos_step_state(const FilterCoeffs& f) {
  std::vector<std::array<double, 2>> zi(f.sections.size());
  double level = f.gain;
  for (std::size_t s = 0; s < f.sections.size(); ++s) {
    const auto& q = f.sections[s];
    const double g = q.dc_gain();
    const double z2 = level * (q.b2 - q.a2 * g);
    const double z1 = level * (q.b1 - q.a1 * g) + z2;
    zi[s] = {z1, z2};
    level *= g;
  }
  return zi;
}

/// Forward-backward filtering of one channel. The signal is extended by odd
/// reflection of 6 x (section count) samples at each end and both passes start
/// from the steady state for the extension's first sample.
inline std::vector<double> filtfilt(const FilterCoeffs& f, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) throw InvalidArgument("filtfilt: empty signal");
  const std::size_t pad = std::min<std::size_t>(6 * f.sections.size(), n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const auto unit = sos_step_state(f);
  auto run = [&](std::vector<double>& sig) {
    auto zi = unit;
    for (auto& z : zi) {
      z[0] *= sig.front();
      z[1] *= sig.front();
    }
    sos_filter(f, sig, zi);
  };
  run(ext);
  std::reverse(ext.begin(), ext.end());
  run(ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

/// Zero-phase filtering of every channel; shape is preserved.
inline EegEpoch apply_zero_phase(const FilterCoeffs& coeffs, const EegEpoch& epoch) {
  if (epoch.n_channels() == 0 || epoch.n_samples() == 0)
    throw InvalidArgument("apply_zero_phase: empty epoch");
  EegEpoch out = epoch;
  for (std::size_t c = 0; c < epoch.n_channels(); ++c) {
    const auto y = filtfilt(coeffs, epoch.channel(c));
    std::copy(y.begin(), y.end(), out.channel(c).begin());
  }
  return out;
}

struct GateResult {
  bool contaminated = false;
  std::vector<std::string> offending;  // frontal channels over threshold
};

/// Flags the epoch when any frontal channel's peak-to-peak amplitude exceeds
/// `threshold_uV`. Non-frontal channels never trigger the gate.
inline GateResult gate_artifacts(const EegEpoch& epoch, double threshold_uV) {
  if (!(threshold_uV > 0.0)) throw InvalidArgument("gate_artifacts: threshold must be > 0");
  GateResult r;
  for (std::size_t c = 0; c < epoch.n_channels(); ++c) {
    if (region_of(epoch.channel_names[c]) != ScalpRegion::Frontal) continue;
    const auto x = epoch.channel(c);
    if (x.empty()) continue;
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    if (*hi - *lo > threshold_uV) r.offending.push_back(epoch.channel_names[c]);
  }
  r.contaminated = !r.offending.empty();
  return r;
}

}  // namespace mindlink
