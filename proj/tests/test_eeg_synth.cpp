#include <catch_amalgamated.hpp>

#include <sstream>

#include "mindlink/eeg_synth.hpp"
#include "mindlink/epoch_io.hpp"
#include "support.hpp"

using namespace mindlink;
using Catch::Matchers::WithinAbs;

namespace {

const StimulusConfig kStim = StimulusConfig::default_set();  // 8..15 Hz
const ChannelModel kMontage = ChannelModel::default_montage();

NoiseModel noise_at(double snr_db) {
  NoiseModel n;
  n.snr_db = snr_db;
  return n;
}

std::size_t oz(const EegEpoch& e) { return *e.index_of("Oz"); }

std::vector<double> row(const EegEpoch& e, std::size_t c) {
  auto s = e.channel(c);
  return {s.begin(), s.end()};
}

}  // namespace

TEST_CASE("stimulus sets enforce band, spacing and phase length") {
  CHECK_NOTHROW(kStim.validate());
  CHECK(kStim.count() == 8);
  CHECK(kStim.min_hz() == 8.0);
  CHECK(kStim.max_hz() == 15.0);

  auto bad = kStim;
  bad.frequencies_hz[0] = 5.9;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = kStim;
  bad.frequencies_hz[7] = 15.1;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  StimulusConfig close{{8.0, 8.1}, {0.0, 0.0}};
  CHECK_THROWS_AS(close.validate(), InvalidArgument);
  StimulusConfig edge{{6.0, 6.2, 15.0}, {0.0, 0.0, 0.0}};
  CHECK_NOTHROW(edge.validate());
  StimulusConfig descending{{10.0, 9.0}, {0.0, 0.0}};
  CHECK_THROWS_AS(descending.validate(), InvalidArgument);
  StimulusConfig phases{{8.0, 9.0}, {0.0}};
  CHECK_THROWS_AS(phases.validate(), InvalidArgument);
}

TEST_CASE("default montage follows the occipital/frontal gain topology") {
  CHECK_NOTHROW(kMontage.validate());
  CHECK(kMontage.channel_names.size() == 9);
  CHECK(kMontage.reference_name == "CPz");
  CHECK(kMontage.ground_name == "AFz");
  CHECK(kMontage.channel_names[kMontage.strongest_ssvep_channel()] == "Oz");
  CHECK(kMontage.frontal_channels() == std::vector<std::string>{"Fp1", "Fp2"});
  CHECK(kMontage.decode_channels().size() == 7);

  auto m = kMontage;
  m.ssvep_gain[*m.index_of("Fp1")] = 0.95;  // above O1's 0.9
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  m = kMontage;
  m.blink_gain[*m.index_of("Oz")] = 1.0;
  m.blink_gain[*m.index_of("Fp2")] = 0.5;
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  m = kMontage;
  m.reference_name = "Cz";
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
}

TEST_CASE("generated epochs have the documented shape and metadata") {
  const auto e = generate_epoch(kStim, 2, kMontage, noise_at(0.0), 2.0, 250.0, 7);
  CHECK(e.n_channels() == 9);
  CHECK(e.n_samples() == 500);
  CHECK(e.attended_index == std::optional<std::size_t>(2));
  CHECK(e.seed == 7u);
  CHECK(e.samples.allFinite());

  const auto odd = generate_epoch(kStim, 0, kMontage, noise_at(0.0), 0.3013, 250.0, 7);
  CHECK(odd.n_samples() == 75);  // round(75.325)
}

TEST_CASE("generation is a pure function of its arguments") {
  const auto a = generate_epoch(kStim, 4, kMontage, noise_at(-3.0), 2.0, 250.0, 99);
  const auto b = generate_epoch(kStim, 4, kMontage, noise_at(-3.0), 2.0, 250.0, 99);
  CHECK(a.samples == b.samples);  // bit-identical
  const auto c = generate_epoch(kStim, 4, kMontage, noise_at(-3.0), 2.0, 250.0, 100);
  CHECK(a.samples != c.samples);
}

TEST_CASE("generation rejects bad targets, durations and aliasing rates") {
  CHECK_THROWS_AS(generate_epoch(kStim, 8, kMontage, noise_at(0), 2.0, 250.0, 1), InvalidArgument);
  CHECK_THROWS_AS(generate_epoch(kStim, 0, kMontage, noise_at(0), 0.0, 250.0, 1), InvalidArgument);
  CHECK_THROWS_AS(generate_epoch(kStim, 0, kMontage, noise_at(0), 2.0, 119.0, 1), AliasingError);
  CHECK_NOTHROW(generate_epoch(kStim, 0, kMontage, noise_at(0), 2.0, 120.0, 1));
  NoiseModel bad = noise_at(0);
  bad.pink_fraction = 1.5;
  CHECK_THROWS_AS(generate_epoch(kStim, 0, kMontage, bad, 2.0, 250.0, 1), InvalidArgument);
  bad = noise_at(0);
  bad.harmonic_decay = 0.0;
  CHECK_THROWS_AS(generate_epoch(kStim, 0, kMontage, bad, 2.0, 250.0, 1), InvalidArgument);
}

TEST_CASE("at +40 dB the attended fundamental dominates every non-harmonic bin") {
  const auto e = generate_epoch(kStim, 2, kMontage, noise_at(40.0), 2.0, 250.0, 3);  // 10 Hz
  const auto x = row(e, oz(e));
  const double df = 250.0 / static_cast<double>(x.size());
  const double peak = oracle::dft_power(x, 10.0, 250.0);
  for (std::size_t b = 1; b * df < 125.0; ++b) {
    const double f = static_cast<double>(b) * df;
    bool harmonic = false;
    for (int m = 1; m <= 4; ++m) harmonic |= std::abs(f - 10.0 * m) < 1e-9;
    if (harmonic) continue;
    INFO("bin " << f << " Hz");
    CHECK(oracle::dft_power(x, f, 250.0) < peak);
  }
}

TEST_CASE("at +30 dB the attended target owns the largest fundamental bin") {
  for (std::size_t k = 0; k < kStim.count(); ++k) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto e = generate_epoch(kStim, k, kMontage, noise_at(30.0), 2.0, 250.0, seed);
      const auto x = row(e, oz(e));
      std::size_t best = 0;
      double best_p = -1.0;
      for (std::size_t j = 0; j < kStim.count(); ++j) {
        const double p = oracle::dft_power(x, kStim.frequencies_hz[j], 250.0);
        if (p > best_p) {
          best_p = p;
          best = j;
        }
      }
      INFO("target " << k << " seed " << seed);
      CHECK(best == k);
    }
  }
}

TEST_CASE("measure_snr of a clean sinusoid reflects only numerical noise") {
  EegEpoch e;
  e.fs_hz = 250.0;
  e.channel_names = {"Oz"};
  e.samples.resize(1, 1000);
  for (Eigen::Index k = 0; k < 1000; ++k) e.samples(0, k) = std::sin(2.0 * oracle::kPi * 10.0 * k / 250.0);
  CHECK(measure_snr(e, 10.0, 4, 0) >= 30.0);
}

TEST_CASE("measure_snr of white noise averages to 0 dB") {
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    EegEpoch e;
    e.fs_hz = 250.0;
    e.channel_names = {"Oz"};
    const auto x = oracle::white_noise(1000, 5.0, 1000 + seed);
    e.samples = Eigen::Map<const SignalMatrix>(x.data(), 1, 1000);
    sum += measure_snr(e, 10.0, 4, 0);
  }
  CHECK_THAT(sum / 100.0, WithinAbs(0.0, 3.0));
}

// The measured band/flank ratio of a calibrated epoch is (S + N) / N, i.e.
// 10 log10(1 + 10^(snr/10)) dB, because the harmonic bands hold noise too.
TEST_CASE("measure_snr tracks the generator's calibrated SNR") {
  auto mean_measured = [](double snr_db, double duration) {
    double sum = 0.0;
    const int n = 50;
    for (int s = 0; s < n; ++s) {
      const auto e = generate_epoch(kStim, 2, kMontage, noise_at(snr_db), duration, 250.0, 500 + s);
      sum += measure_snr(e, 10.0, 4, oz(e));
    }
    return sum / n;
  };
  auto expected = [](double snr_db) { return 10.0 * std::log10(1.0 + std::pow(10.0, snr_db / 10.0)); };
  CHECK_THAT(mean_measured(10.0, 4.0), WithinAbs(10.0, 1.5));
  CHECK_THAT(mean_measured(10.0, 4.0), WithinAbs(expected(10.0), 1.5));
  CHECK_THAT(mean_measured(0.0, 4.0), WithinAbs(expected(0.0), 1.5));
  CHECK_THAT(mean_measured(20.0, 4.0), WithinAbs(expected(20.0), 1.5));
}

TEST_CASE("measure_snr rejects harmonics above Nyquist and short epochs") {
  const auto e = generate_epoch(kStim, 0, kMontage, noise_at(0), 2.0, 250.0, 1);
  CHECK_THROWS_AS(measure_snr(e, 40.0, 4, 0), InvalidArgument);
  const auto short_e = generate_epoch(kStim, 0, kMontage, noise_at(0), 0.5, 250.0, 1);
  CHECK_THROWS_AS(measure_snr(short_e, 10.0, 4, 0), InvalidArgument);
}

TEST_CASE("raising a channel's SSVEP gain raises its measured SNR") {
  double last = -1e9;
  for (double g : {0.3, 0.6, 0.9}) {
    auto m = kMontage;
    m.ssvep_gain[*m.index_of("PO3")] = g;  // Oz stays the strongest channel
    double sum = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto e = generate_epoch(kStim, 2, m, noise_at(0.0), 4.0, 250.0, s);
      sum += measure_snr(e, 10.0, 4, *e.index_of("PO3"));
    }
    INFO("gain " << g);
    CHECK(sum > last);
    last = sum;
  }
}

TEST_CASE("blinks scale with each channel's blink gain") {
  const auto e = generate_epoch(kStim, 1, kMontage, noise_at(0), 2.0, 250.0, 11);
  const auto b = inject_blink(e, kMontage, 0.5, 100.0);
  auto peak_dev = [&](const char* name) {
    const auto c = *e.index_of(name);
    double worst = 0.0;
    for (std::size_t k = 0; k < e.n_samples(); ++k)
      worst = std::max(worst, std::abs(b.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k)) -
                                       e.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k))));
    return worst;
  };
  CHECK_THAT(peak_dev("Fp1"), WithinAbs(100.0, 1.0));
  CHECK_THAT(peak_dev("Oz"), WithinAbs(10.0, 1.0));
  // Half-sine bump over 300 ms: sample 163 sits 152 ms after onset.
  const auto fp1 = static_cast<Eigen::Index>(*e.index_of("Fp1"));
  const double expected = 100.0 * std::sin(std::numbers::pi * (163.0 / 250.0 - 0.5) / 0.3);
  CHECK_THAT(b.samples(fp1, 163) - e.samples(fp1, 163), WithinAbs(expected, 1e-9));
  // Outside the 300 ms window nothing changes.
  CHECK(b.samples(fp1, 100) == e.samples(fp1, 100));
  CHECK(b.samples(fp1, 125 + 76) == e.samples(fp1, 125 + 76));
}

TEST_CASE("zero blink gain leaves a channel untouched and the input is not modified") {
  auto m = kMontage;
  m.blink_gain[*m.index_of("Oz")] = 0.0;
  const auto e = generate_epoch(kStim, 1, m, noise_at(0), 2.0, 250.0, 12);
  const auto copy = e.samples;
  const auto b = inject_blink(e, m, 1.0, 80.0);
  const auto c = static_cast<Eigen::Index>(*e.index_of("Oz"));
  CHECK(b.samples.row(c) == e.samples.row(c));
  CHECK(e.samples == copy);
}

TEST_CASE("blink injection is linear in amplitude") {
  const auto e = generate_epoch(kStim, 5, kMontage, noise_at(0), 2.0, 250.0, 13);
  const auto twice = inject_blink(inject_blink(e, kMontage, 0.7, 60.0), kMontage, 0.7, 60.0);
  const auto doubled = inject_blink(e, kMontage, 0.7, 120.0);
  CHECK((twice.samples - doubled.samples).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("blink injection validates onset and amplitude") {
  const auto e = generate_epoch(kStim, 0, kMontage, noise_at(0), 2.0, 250.0, 1);
  CHECK_THROWS_AS(inject_blink(e, kMontage, -0.1, 100.0), InvalidArgument);
  CHECK_THROWS_AS(inject_blink(e, kMontage, 2.0, 100.0), InvalidArgument);
  CHECK_THROWS_AS(inject_blink(e, kMontage, 0.5, 0.0), InvalidArgument);
}

TEST_CASE("background epochs carry no ground truth") {
  const auto e = generate_background(kMontage, noise_at(0), 2.0, 250.0, 4);
  CHECK_FALSE(e.attended_index.has_value());
  CHECK(e.n_samples() == 500);
}

TEST_CASE("select_channels keeps the requested order") {
  const auto e = generate_epoch(kStim, 0, kMontage, noise_at(0), 1.0, 250.0, 1);
  const auto s = select_channels(e, {"O2", "Pz"});
  REQUIRE(s.n_channels() == 2);
  CHECK(s.samples.row(0) == e.samples.row(static_cast<Eigen::Index>(*e.index_of("O2"))));
  CHECK(s.samples.row(1) == e.samples.row(static_cast<Eigen::Index>(*e.index_of("Pz"))));
  CHECK_THROWS_AS(select_channels(e, {"Cz"}), InvalidArgument);
}

TEST_CASE("CSV export keeps six significant digits and the metadata line") {
  const auto e = generate_epoch(kStim, 6, kMontage, noise_at(0), 1.0, 250.0, 424242);
  std::stringstream ss;
  write_epoch_csv(ss, e);
  const std::string text = ss.str();
  CHECK(text.rfind("#meta attended_index=6 seed=424242\nfs_hz,Pz,PO3,POz,PO4,O1,Oz,O2,Fp1,Fp2\n", 0) == 0);
  const auto back = read_epoch_csv(ss);
  CHECK(back.attended_index == e.attended_index);
  CHECK(back.seed == e.seed);
  CHECK(back.fs_hz == 250.0);
  CHECK(back.channel_names == e.channel_names);
  REQUIRE(back.samples.rows() == e.samples.rows());
  REQUIRE(back.samples.cols() == e.samples.cols());
  for (Eigen::Index c = 0; c < e.samples.rows(); ++c)
    for (Eigen::Index k = 0; k < e.samples.cols(); ++k) {
      const double v = e.samples(c, k);
      CHECK(std::abs(back.samples(c, k) - v) <= 5e-6 * std::abs(v) + 1e-300);
    }

  std::stringstream bg;
  write_epoch_csv(bg, generate_background(kMontage, noise_at(0), 0.1, 250.0, 1));
  CHECK(bg.str().rfind("#meta attended_index=none seed=1\n", 0) == 0);
  CHECK_FALSE(read_epoch_csv(bg).attended_index.has_value());

  std::stringstream broken("fs_hz,Oz\n250,1\n");
  CHECK_THROWS_AS(read_epoch_csv(broken), InvalidArgument);
}
