#pragma once

// Synthetic SSVEP EEG.
//
// An epoch is a channels x samples block of scalp potentials (uV). The evoked
// response to the attended stimulus is a sum of four harmonics of the flicker
// frequency, weighted per channel by ChannelModel::ssvep_gain, on top of
// white + 1/f background noise and a wandering alpha rhythm. The evoked
// amplitude is calibrated so that, on the channel with the largest SSVEP gain,
// the evoked power over the +-0.5 Hz harmonic bands equals
// 10^(snr_db/10) times the noise power in those same bands.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mindlink/common.hpp"

namespace mindlink {

using SignalMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Number of harmonics in the simulated evoked response (f, 2f, 3f, 4f).
inline constexpr int kEvokedHarmonics = 4;

inline constexpr double kMinStimulusHz = 6.0;
inline constexpr double kMaxStimulusHz = 15.0;
inline constexpr double kMinStimulusSpacingHz = 0.2;

struct StimulusConfig {
  std::vector<double> frequencies_hz;
  std::vector<double> phases_rad;

  std::size_t count() const noexcept { return frequencies_hz.size(); }
  double min_hz() const { return frequencies_hz.front(); }
  double max_hz() const { return frequencies_hz.back(); }

  void validate() const {
    if (frequencies_hz.empty()) throw InvalidArgument("stimulus: no frequencies");
    if (phases_rad.size() != frequencies_hz.size())
      throw InvalidArgument("stimulus: phases and frequencies differ in length");
    for (std::size_t i = 0; i < frequencies_hz.size(); ++i) {
      const double f = frequencies_hz[i];
      if (!(f >= kMinStimulusHz && f <= kMaxStimulusHz))
        throw InvalidArgument("stimulus: frequency " + std::to_string(f) +
                              " Hz outside [6, 15] Hz");
      if (i > 0 && !(f - frequencies_hz[i - 1] >= kMinStimulusSpacingHz - 1e-12))
        throw InvalidArgument("stimulus: frequencies must increase by >= 0.2 Hz");
      if (!std::isfinite(phases_rad[i])) throw InvalidArgument("stimulus: non-finite phase");
    }
  }

  /// `count` targets starting at `first_hz`, spaced `step_hz`, zero phase.
  static StimulusConfig evenly_spaced(double first_hz, double step_hz, std::size_t count) {
    StimulusConfig s;
    for (std::size_t i = 0; i < count; ++i) {
      s.frequencies_hz.push_back(first_hz + step_hz * static_cast<double>(i));
      s.phases_rad.push_back(0.0);
    }
    s.validate();
    return s;
  }

  /// Eight targets at 8, 9, ..., 15 Hz.
  static StimulusConfig default_set() { return evenly_spaced(8.0, 1.0, 8); }
};

enum class ScalpRegion { Frontal, Central, Parietal, Occipital, Temporal };

/// Region from a 10-10 label: Fp/AF/F* frontal, PO/O/I* occipital,
/// CP/P* parietal, T* temporal, everything else central.
inline ScalpRegion region_of(const std::string& name) {
  auto starts = [&](const char* p) { return name.rfind(p, 0) == 0; };
  if (starts("PO") || starts("O") || starts("I")) return ScalpRegion::Occipital;
  if (starts("Fp") || starts("FP") || starts("AF") || starts("F")) return ScalpRegion::Frontal;
  if (starts("CP") || starts("P")) return ScalpRegion::Parietal;
  if (starts("T")) return ScalpRegion::Temporal;
  return ScalpRegion::Central;
}

struct ChannelModel {
  std::vector<std::string> channel_names;
  std::vector<double> ssvep_gain;
  std::vector<double> blink_gain;
  std::string reference_name = "CPz";
  std::string ground_name = "AFz";

  std::size_t size() const noexcept { return channel_names.size(); }

  std::optional<std::size_t> index_of(const std::string& name) const {
    auto it = std::find(channel_names.begin(), channel_names.end(), name);
    if (it == channel_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - channel_names.begin());
  }

  /// Channel with the largest SSVEP gain (first on ties).
  std::size_t strongest_ssvep_channel() const {
    return static_cast<std::size_t>(
        std::max_element(ssvep_gain.begin(), ssvep_gain.end()) - ssvep_gain.begin());
  }

  /// Labels of non-frontal channels; these carry the decode.
  std::vector<std::string> decode_channels() const {
    std::vector<std::string> out;
    for (const auto& n : channel_names)
      if (region_of(n) != ScalpRegion::Frontal) out.push_back(n);
    return out;
  }

  std::vector<std::string> frontal_channels() const {
    std::vector<std::string> out;
    for (const auto& n : channel_names)
      if (region_of(n) == ScalpRegion::Frontal) out.push_back(n);
    return out;
  }

  void validate() const {
    const auto n = channel_names.size();
    if (n == 0) throw InvalidArgument("montage: no channels");
    if (ssvep_gain.size() != n || blink_gain.size() != n)
      throw InvalidArgument("montage: gain lists must match channel count");
    if (reference_name != "CPz") throw InvalidArgument("montage: reference must be CPz");
    if (ground_name != "AFz") throw InvalidArgument("montage: ground must be AFz");
    double max_frontal_ssvep = 0.0, min_occ_ssvep = 1.0;
    double min_frontal_blink = 1.0, max_occ_blink = 0.0;
    bool any_frontal = false, any_occ = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (double g : {ssvep_gain[i], blink_gain[i]})
        if (!(g >= 0.0 && g <= 1.0)) throw InvalidArgument("montage: gains must lie in [0, 1]");
      switch (region_of(channel_names[i])) {
        case ScalpRegion::Frontal:
          any_frontal = true;
          max_frontal_ssvep = std::max(max_frontal_ssvep, ssvep_gain[i]);
          min_frontal_blink = std::min(min_frontal_blink, blink_gain[i]);
          break;
        case ScalpRegion::Occipital:
          any_occ = true;
          min_occ_ssvep = std::min(min_occ_ssvep, ssvep_gain[i]);
          max_occ_blink = std::max(max_occ_blink, blink_gain[i]);
          break;
        default:
          break;
      }
    }
    if (any_frontal && any_occ) {
      if (min_occ_ssvep < max_frontal_ssvep)
        throw InvalidArgument("montage: an occipital channel has lower SSVEP gain than a frontal one");
      if (min_frontal_blink < max_occ_blink)
        throw InvalidArgument("montage: a frontal channel has lower blink gain than an occipital one");
    }
  }

  /// Pz, PO3, POz, PO4, O1, Oz, O2 for SSVEP pickup plus Fp1, Fp2 to carry blinks.
  static ChannelModel default_montage() {
    ChannelModel m;
    m.channel_names = {"Pz", "PO3", "POz", "PO4", "O1", "Oz", "O2", "Fp1", "Fp2"};
    m.ssvep_gain = {0.5, 0.7, 0.8, 0.7, 0.9, 1.0, 0.9, 0.1, 0.1};
    m.blink_gain = {0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 1.0, 1.0};
    return m;
  }
};

struct NoiseModel {
  double snr_db = 0.0;
  double pink_fraction = 0.5;
  double alpha_amp_uV = 1.0;
  double harmonic_decay = 0.5;
  /// RMS of the broadband (white + pink) background on every channel.
  double noise_rms_uV = 8.0;

  void validate() const {
    if (!std::isfinite(snr_db)) throw InvalidArgument("noise: snr_db must be finite");
    if (!(pink_fraction >= 0.0 && pink_fraction <= 1.0))
      throw InvalidArgument("noise: pink_fraction must lie in [0, 1]");
    if (!(harmonic_decay > 0.0 && harmonic_decay <= 1.0))
      throw InvalidArgument("noise: harmonic_decay must lie in (0, 1]");
    if (!(alpha_amp_uV >= 0.0)) throw InvalidArgument("noise: alpha_amp_uV must be >= 0");
    if (!(noise_rms_uV > 0.0)) throw InvalidArgument("noise: noise_rms_uV must be > 0");
  }
};

struct EegEpoch {
  SignalMatrix samples;  // channels x samples, uV
  double fs_hz = 0.0;
  std::vector<std::string> channel_names;
  std::optional<std::size_t> attended_index;
  std::uint64_t seed = 0;

  std::size_t n_channels() const noexcept { return static_cast<std::size_t>(samples.rows()); }
  std::size_t n_samples() const noexcept { return static_cast<std::size_t>(samples.cols()); }
  double duration_s() const noexcept { return static_cast<double>(n_samples()) / fs_hz; }

  std::span<const double> channel(std::size_t c) const {
    return {samples.data() + c * n_samples(), n_samples()};
  }
  std::span<double> channel(std::size_t c) { return {samples.data() + c * n_samples(), n_samples()}; }

  std::optional<std::size_t> index_of(const std::string& name) const {
    auto it = std::find(channel_names.begin(), channel_names.end(), name);
    if (it == channel_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - channel_names.begin());
  }
};

/// Copy of `epoch` restricted to `names`, in that order.
inline EegEpoch select_channels(const EegEpoch& epoch, const std::vector<std::string>& names) {
  EegEpoch out;
  out.fs_hz = epoch.fs_hz;
  out.attended_index = epoch.attended_index;
  out.seed = epoch.seed;
  out.channel_names = names;
  out.samples.resize(static_cast<Eigen::Index>(names.size()), epoch.samples.cols());
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto src = epoch.index_of(names[i]);
    if (!src) throw InvalidArgument("select_channels: no channel named " + names[i]);
    out.samples.row(static_cast<Eigen::Index>(i)) = epoch.samples.row(static_cast<Eigen::Index>(*src));
  }
  return out;
}

namespace detail {

// 1/f approximation: three first-order pole/zero sections.
inline constexpr std::array<double, 3> kPinkPoles{0.9951689689158147, 0.9438417737128202,
                                                  0.5559452593713643};
inline constexpr std::array<double, 3> kPinkZeros{0.9822315700153789, 0.8326566059537197,
                                                  0.10798089377134783};
inline constexpr std::size_t kPinkWarmup = 2048;

class PinkFilter {
 public:
  double operator()(double x) {
    for (std::size_t s = 0; s < 3; ++s) {
      const double y = x - kPinkZeros[s] * xprev_[s] + kPinkPoles[s] * yprev_[s];
      xprev_[s] = x;
      yprev_[s] = y;
      x = y;
    }
    return x;
  }

 private:
  std::array<double, 3> xprev_{}, yprev_{};
};

/// Energy of the pink filter's impulse response (its output variance for unit white input).
inline double pink_impulse_energy() {
  static const double energy = [] {
    PinkFilter f;
    double e = 0.0;
    double y = f(1.0);
    e += y * y;
    for (int i = 1; i < (1 << 16); ++i) {
      y = f(0.0);
      e += y * y;
    }
    return e;
  }();
  return energy;
}

inline double pink_power_gain(double f_hz, double fs_hz) {
  const std::complex<double> zinv = std::polar(1.0, -kTwoPi * f_hz / fs_hz);
  double g = 1.0;
  for (std::size_t s = 0; s < 3; ++s)
    g *= std::norm(1.0 - kPinkZeros[s] * zinv) / std::norm(1.0 - kPinkPoles[s] * zinv);
  return g;
}

/// One-sided PSD (uV^2/Hz) of the broadband background.
inline double background_psd(const NoiseModel& noise, double f_hz, double fs_hz) {
  const double var = noise.noise_rms_uV * noise.noise_rms_uV;
  const double white = (1.0 - noise.pink_fraction) * var;
  const double pink = noise.pink_fraction * var * pink_power_gain(f_hz, fs_hz) / pink_impulse_energy();
  return 2.0 / fs_hz * (white + pink);
}

/// Background power inside [f - half_width, f + half_width] summed over
/// harmonics 1..n_harmonics of `f_hz` (clipped at Nyquist).
inline double background_band_power(const NoiseModel& noise, double f_hz, int n_harmonics,
                                    double fs_hz, double half_width = 0.5) {
  constexpr int kSteps = 200;
  double total = 0.0;
  const double nyq = fs_hz / 2.0;
  for (int m = 1; m <= n_harmonics; ++m) {
    const double lo = std::max(0.0, m * f_hz - half_width);
    const double hi = std::min(nyq, m * f_hz + half_width);
    if (hi <= lo) continue;
    const double h = (hi - lo) / kSteps;
    double acc = 0.5 * (background_psd(noise, lo, fs_hz) + background_psd(noise, hi, fs_hz));
    for (int k = 1; k < kSteps; ++k) acc += background_psd(noise, lo + k * h, fs_hz);
    total += acc * h;
  }
  return total;
}

}  // namespace detail

/// Peak evoked amplitude (uV, fundamental, unit channel gain) that realizes
/// `noise.snr_db` on a channel of gain `max_gain`.
inline double evoked_amplitude(const NoiseModel& noise, double f_hz, double fs_hz, double max_gain) {
  if (max_gain <= 0.0) return 0.0;
  const double band_noise = detail::background_band_power(noise, f_hz, kEvokedHarmonics, fs_hz);
  const double target_power = std::pow(10.0, noise.snr_db / 10.0) * band_noise;
  double shape = 0.0;  // sum of squared harmonic weights
  for (int m = 0; m < kEvokedHarmonics; ++m) shape += std::pow(noise.harmonic_decay, 2.0 * m);
  return std::sqrt(2.0 * target_power / shape) / max_gain;
}

namespace detail {

struct EvokedSpec {
  double f_hz;
  double phase_rad;
};

inline EegEpoch synthesize(std::optional<EvokedSpec> evoked_spec, const ChannelModel& channels,
                           const NoiseModel& noise, double duration_s, double fs_hz, std::uint64_t seed) {
  const auto n = static_cast<Eigen::Index>(std::llround(duration_s * fs_hz));
  if (n < 1) throw InvalidArgument("generate_epoch: epoch shorter than one sample");

  EegEpoch epoch;
  epoch.fs_hz = fs_hz;
  epoch.channel_names = channels.channel_names;
  epoch.seed = seed;
  epoch.samples.setZero(static_cast<Eigen::Index>(channels.size()), n);

  std::vector<double> evoked(static_cast<std::size_t>(n), 0.0);
  if (evoked_spec) {
    const double f = evoked_spec->f_hz;
    const double phase = evoked_spec->phase_rad;
    const double gmax = channels.ssvep_gain[channels.strongest_ssvep_channel()];
    const double amp = evoked_amplitude(noise, f, fs_hz, gmax);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) / fs_hz;
      double v = 0.0;
      double w = 1.0;
      for (int m = 1; m <= kEvokedHarmonics; ++m, w *= noise.harmonic_decay)
        v += w * std::sin(kTwoPi * m * f * t + m * phase);
      evoked[static_cast<std::size_t>(k)] = amp * v;
    }
  }

  // Alpha: one shared posterior source, frequency and phase drawn per epoch.
  std::vector<double> alpha(static_cast<std::size_t>(n), 0.0);
  if (noise.alpha_amp_uV > 0.0) {
    std::mt19937_64 rng(derive_seed(seed, 0xA1FA));
    std::uniform_real_distribution<double> fdist(9.0, 11.0), pdist(0.0, kTwoPi);
    const double fa = fdist(rng), pa = pdist(rng);
    for (Eigen::Index k = 0; k < n; ++k)
      alpha[static_cast<std::size_t>(k)] =
          noise.alpha_amp_uV * std::sin(kTwoPi * fa * static_cast<double>(k) / fs_hz + pa);
  }

  const double var = noise.noise_rms_uV * noise.noise_rms_uV;
  const double white_sd = std::sqrt((1.0 - noise.pink_fraction) * var);
  const double pink_sd = std::sqrt(noise.pink_fraction * var / detail::pink_impulse_energy());
  for (std::size_t c = 0; c < channels.size(); ++c) {
    std::mt19937_64 rng(derive_seed(seed, c + 1));
    std::normal_distribution<double> gauss(0.0, 1.0);
    detail::PinkFilter pink;
    for (std::size_t k = 0; k < detail::kPinkWarmup; ++k) pink(gauss(rng));
    auto row = epoch.channel(c);
    const double g = channels.ssvep_gain[c];
    for (std::size_t k = 0; k < row.size(); ++k) {
      const double w = gauss(rng);
      const double p = pink(gauss(rng));
      row[k] = g * (evoked[k] + alpha[k]) + white_sd * w + pink_sd * p;
    }
  }
  return epoch;
}

}  // namespace detail

/// Simulated epoch with the evoked response to `stimulus[attended_index]`.
/// Pure: equal arguments give bit-identical samples. Channel c's background
/// is drawn from a stream seeded by (seed, c), so it does not depend on the
/// gains of other channels.
inline EegEpoch generate_epoch(const StimulusConfig& stimulus, std::size_t attended_index,
                               const ChannelModel& channels, const NoiseModel& noise,
                               double duration_s, double fs_hz, std::uint64_t seed) {
  stimulus.validate();
  channels.validate();
  noise.validate();
  if (attended_index >= stimulus.count())
    throw InvalidArgument("generate_epoch: attended_index " + std::to_string(attended_index) +
                          " out of range for " + std::to_string(stimulus.count()) + " targets");
  if (!(duration_s > 0.0)) throw InvalidArgument("generate_epoch: duration must be > 0");
  if (!(fs_hz >= 2.0 * kEvokedHarmonics * stimulus.max_hz()))
    throw AliasingError("generate_epoch: fs " + std::to_string(fs_hz) +
                        " Hz cannot represent the 4th harmonic of " +
                        std::to_string(stimulus.max_hz()) + " Hz");
  auto epoch = detail::synthesize(
      detail::EvokedSpec{stimulus.frequencies_hz[attended_index], stimulus.phases_rad[attended_index]},
      channels, noise, duration_s, fs_hz, seed);
  epoch.attended_index = attended_index;
  return epoch;
}

/// Background activity only (no evoked response, no ground truth). Shares
/// the noise streams of generate_epoch for the same seed.
inline EegEpoch generate_background(const ChannelModel& channels, const NoiseModel& noise, double duration_s,
                                    double fs_hz, std::uint64_t seed) {
  channels.validate();
  noise.validate();
  if (!(duration_s > 0.0)) throw InvalidArgument("generate_background: duration must be > 0");
  if (!(fs_hz > 0.0)) throw InvalidArgument("generate_background: fs must be > 0");
  return detail::synthesize(std::nullopt, channels, noise, duration_s, fs_hz, seed);
}

/// Narrowband SNR (dB) of `channel` around `target_hz` and its first
/// `n_harmonics` harmonics: mean Welch PSD within +-0.5 Hz of each harmonic
/// over mean PSD in the flanks 1.0-1.5 Hz either side (equal total width).
/// Hann-windowed 4 s segments (or the whole epoch, if shorter), 50% overlap.
inline double measure_snr(const EegEpoch& epoch, double target_hz, int n_harmonics,
                          std::size_t channel) {
  if (n_harmonics < 1) throw InvalidArgument("measure_snr: n_harmonics must be >= 1");
  if (channel >= epoch.n_channels()) throw InvalidArgument("measure_snr: channel out of range");
  const double nyq = epoch.fs_hz / 2.0;
  if (!(target_hz > 0.0) || !(n_harmonics * target_hz < nyq))
    throw InvalidArgument("measure_snr: harmonic above Nyquist");
  if (epoch.duration_s() < 1.0 - 1e-9) throw InvalidArgument("measure_snr: epoch shorter than 1 s");

  const auto x = epoch.channel(channel);
  const std::size_t n = x.size();
  const std::size_t seg = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(4.0 * epoch.fs_hz)));
  const std::size_t hop = std::max<std::size_t>(1, seg / 2);
  const double df = epoch.fs_hz / static_cast<double>(seg);

  std::vector<double> window(seg);
  for (std::size_t k = 0; k < seg; ++k)
    window[k] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(k) / static_cast<double>(seg));

  // Bins of interest: 0 = harmonic band, 1 = flank.
  std::vector<std::pair<std::size_t, int>> bins;
  for (std::size_t b = 1; b * df < nyq; ++b) {
    const double fb = static_cast<double>(b) * df;
    for (int m = 1; m <= n_harmonics; ++m) {
      const double d = std::abs(fb - m * target_hz);
      if (d <= 0.5 + 1e-9) {
        bins.emplace_back(b, 0);
        break;
      }
      if (d >= 1.0 - 1e-9 && d <= 1.5 + 1e-9) {
        bins.emplace_back(b, 1);
        break;
      }
    }
  }

  std::array<double, 2> sum{0.0, 0.0};
  std::array<std::size_t, 2> count{0, 0};
  for (auto [b, kind] : bins) ++count[static_cast<std::size_t>(kind)];
  if (count[0] == 0 || count[1] == 0) throw InvalidArgument("measure_snr: epoch too short to resolve bands");

  std::vector<double> buf(seg);
  for (std::size_t start = 0; start + seg <= n; start += hop) {
    double mean = 0.0;
    for (std::size_t k = 0; k < seg; ++k) mean += x[start + k];
    mean /= static_cast<double>(seg);
    for (std::size_t k = 0; k < seg; ++k) buf[k] = (x[start + k] - mean) * window[k];
    for (auto [b, kind] : bins) {
      std::complex<double> acc{0.0, 0.0};
      const double w = -kTwoPi * static_cast<double>(b) / static_cast<double>(seg);
      for (std::size_t k = 0; k < seg; ++k) acc += buf[k] * std::polar(1.0, w * static_cast<double>(k));
      sum[static_cast<std::size_t>(kind)] += std::norm(acc);
    }
    if (seg == n) break;
  }
  const double band = sum[0] / static_cast<double>(count[0]);
  const double flank = std::max(sum[1] / static_cast<double>(count[1]), std::numeric_limits<double>::min());
  return 10.0 * std::log10(std::max(band, std::numeric_limits<double>::min()) / flank);
}

/// Blink duration; the transient is one half period of a cosine bump.
inline constexpr double kBlinkDurationS = 0.3;

/// New epoch with a 300 ms half-cosine blink starting at `onset_s`, scaled per
/// channel by the montage's blink gain (channels absent from the montage get 0).
inline EegEpoch inject_blink(const EegEpoch& epoch, const ChannelModel& channels, double onset_s,
                             double amplitude_uV) {
  if (!(onset_s >= 0.0 && onset_s < epoch.duration_s()))
    throw InvalidArgument("inject_blink: onset outside epoch");
  if (!(amplitude_uV > 0.0)) throw InvalidArgument("inject_blink: amplitude must be > 0");
  EegEpoch out = epoch;
  const std::size_t n = epoch.n_samples();
  for (std::size_t c = 0; c < epoch.n_channels(); ++c) {
    auto idx = channels.index_of(epoch.channel_names[c]);
    const double gain = idx ? channels.blink_gain[*idx] : 0.0;
    if (gain == 0.0) continue;
    auto row = out.channel(c);
    const auto first = static_cast<std::size_t>(std::ceil(onset_s * epoch.fs_hz - 1e-9));
    for (std::size_t k = first; k < n; ++k) {
      const double tau = static_cast<double>(k) / epoch.fs_hz - onset_s;
      if (tau > kBlinkDurationS) break;
      row[k] += gain * amplitude_uV * std::sin(std::numbers::pi * tau / kBlinkDurationS);
    }
  }
  return out;
}

}  // namespace mindlink
