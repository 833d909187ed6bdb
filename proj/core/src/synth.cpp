#include "earkd/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "earkd/errors.hpp"
#include "fft.hpp"

namespace earkd::synth {
namespace {

using Rng = std::mt19937_64;

// Independent, reproducible stream per (seed, subject, purpose).
Rng make_rng(std::uint64_t seed, std::size_t index, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), stream};
  return Rng(seq);
}

constexpr double kContactSpread = 0.15;

enum Stream : std::uint32_t { kHypnogram = 1, kSubject, kLatent, kScalpNoise, kEarNoise, kCommon, kContact };

// Rows: from-stage, columns: to-stage, order W N1 N2 N3 REM.
constexpr std::array<std::array<double, kNumStages>, kNumStages> kTransitions{{
    {0.80, 0.14, 0.04, 0.00, 0.02},
    {0.10, 0.50, 0.34, 0.00, 0.06},
    {0.03, 0.05, 0.79, 0.09, 0.04},
    {0.02, 0.01, 0.12, 0.85, 0.00},
    {0.05, 0.06, 0.06, 0.00, 0.83},
}};

struct Band {
  double low_hz;
  double high_hz;
  double rms_uv;
};

struct StageRecipe {
  std::vector<Band> bands;
  double spindle_peak_uv = 0.0;  // 12-14 Hz bursts when > 0
};

const std::array<StageRecipe, kNumStages>& recipes() {
  static const std::array<StageRecipe, kNumStages> table{{
      {{{8.0, 12.0, 20.0}, {15.0, 30.0, 5.0}, {0.5, 4.0, 5.0}}, 0.0},   // W
      {{{4.0, 7.0, 18.0}, {8.0, 12.0, 6.0}, {0.5, 4.0, 6.0}}, 0.0},     // N1
      {{{4.0, 7.0, 16.0}, {0.5, 4.0, 10.0}}, 35.0},                     // N2
      {{{0.5, 4.0, 55.0}, {4.0, 7.0, 10.0}}, 0.0},                      // N3
      {{{4.0, 10.0, 12.0}, {15.0, 30.0, 4.0}, {0.5, 4.0, 5.0}}, 0.0},   // REM
  }};
  return table;
}

constexpr std::size_t kComponentsPerBand = 12;
constexpr double kBackgroundRmsUv = 6.0;
constexpr double kEpochJitter = 0.2;

struct SubjectTraits {
  double freq_scale;
  double amp_scale;
  std::array<double, 3> channel_gain;
};

double rms(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

// Unit-variance 1/f noise of length n.
std::vector<double> pink_noise(std::size_t n, double sample_rate, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> white(n);
  for (double& v : white) v = normal(rng);
  auto bins = detail::rfft(white);
  const double df = sample_rate / static_cast<double>(n);
  constexpr double kCornerHz = 0.5;
  bins[0] = 0.0;
  for (std::size_t k = 1; k < bins.size(); ++k) {
    const double f = std::max(static_cast<double>(k) * df, kCornerHz);
    bins[k] /= std::sqrt(f);
  }
  auto out = detail::irfft(bins, n);
  const double r = rms(out);
  for (double& v : out) v /= r;
  return out;
}

void add_band(std::span<double> out, const Band& band, double freq_scale, double rms_uv,
              double sample_rate, Rng& rng) {
  std::uniform_real_distribution<double> freq(band.low_hz * freq_scale, band.high_hz * freq_scale);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  std::vector<double> component(out.size(), 0.0);
  for (std::size_t k = 0; k < kComponentsPerBand; ++k) {
    const double w = 2.0 * std::numbers::pi * freq(rng) / sample_rate;
    const double p = phase(rng);
    const double a = weight(rng);
    // Phasor recurrence; drift over one epoch stays near machine precision.
    const std::complex<double> step = std::polar(1.0, w);
    std::complex<double> z = std::polar(a, p);
    for (std::size_t t = 0; t < out.size(); ++t) {
      component[t] += z.imag();
      z *= step;
    }
  }
  const double scale = rms_uv / std::max(rms(component), 1e-12);
  for (std::size_t t = 0; t < out.size(); ++t) out[t] += scale * component[t];
}

void add_spindles(std::span<double> out, double peak_uv, double freq_scale, double sample_rate,
                  Rng& rng) {
  std::uniform_int_distribution<int> count(1, 3);
  std::uniform_real_distribution<double> duration(1.0, 2.0);
  std::uniform_real_distribution<double> freq(12.0 * freq_scale, 14.0 * freq_scale);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  const int bursts = count(rng);
  for (int b = 0; b < bursts; ++b) {
    const auto len = static_cast<std::size_t>(duration(rng) * sample_rate);
    if (len >= out.size()) continue;
    std::uniform_int_distribution<std::size_t> start(0, out.size() - len);
    const std::size_t s0 = start(rng);
    const double w = 2.0 * std::numbers::pi * freq(rng) / sample_rate;
    const double p = phase(rng);
    for (std::size_t t = 0; t < len; ++t) {
      const double env = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(t) /
                                             static_cast<double>(len));
      out[s0 + t] += peak_uv * env * std::sin(w * static_cast<double>(t) + p);
    }
  }
}

std::vector<std::vector<double>> make_latent(const SynthConfig& config,
                                             std::span<const Stage> hypnogram,
                                             const SubjectTraits& traits, Rng& rng) {
  const std::size_t per_epoch = samples_per_epoch(config.sample_rate);
  const std::size_t total = per_epoch * hypnogram.size();
  std::vector<std::vector<double>> latent(3, std::vector<double>(total, 0.0));
  std::normal_distribution<double> jitter(0.0, kEpochJitter);

  for (std::size_t c = 0; c < 3; ++c) {
    const auto background = pink_noise(total, config.sample_rate, rng);
    for (std::size_t t = 0; t < total; ++t) latent[c][t] = kBackgroundRmsUv * background[t];
  }

  for (std::size_t e = 0; e < hypnogram.size(); ++e) {
    const StageRecipe& recipe = recipes()[static_cast<std::size_t>(hypnogram[e])];
    const double epoch_gain = traits.amp_scale * std::exp(jitter(rng));
    for (std::size_t c = 0; c < 3; ++c) {
      std::span<double> window(latent[c].data() + e * per_epoch, per_epoch);
      const double gain = epoch_gain * traits.channel_gain[c];
      for (const Band& band : recipe.bands) {
        add_band(window, band, traits.freq_scale, gain * band.rms_uv, config.sample_rate, rng);
      }
      if (recipe.spindle_peak_uv > 0.0) {
        add_spindles(window, gain * recipe.spindle_peak_uv, traits.freq_scale, config.sample_rate,
                     rng);
      }
    }
  }
  return latent;
}

// Rescales the noise (derivation and electrode level together) epoch by epoch
// so that derivation power ratio signal/noise equals the target.
void scale_noise_to_snr(const std::vector<std::vector<double>>& signal_derivations,
                        std::vector<std::vector<double>>& noise_derivations,
                        std::vector<std::vector<double>>& noise_electrodes, double snr_db,
                        std::size_t per_epoch) {
  const std::size_t total = signal_derivations.front().size();
  const double target = std::pow(10.0, snr_db / 10.0);
  for (std::size_t start = 0; start + per_epoch <= total; start += per_epoch) {
    double ps = 0.0;
    double pn = 0.0;
    for (std::size_t c = 0; c < signal_derivations.size(); ++c) {
      for (std::size_t t = start; t < start + per_epoch; ++t) {
        ps += signal_derivations[c][t] * signal_derivations[c][t];
        pn += noise_derivations[c][t] * noise_derivations[c][t];
      }
    }
    const double factor = std::sqrt(ps / (pn * target));
    for (auto& ch : noise_derivations) {
      for (std::size_t t = start; t < start + per_epoch; ++t) ch[t] *= factor;
    }
    for (auto& ch : noise_electrodes) {
      for (std::size_t t = start; t < start + per_epoch; ++t) ch[t] *= factor;
    }
  }
}

struct Generated {
  std::vector<Stage> hypnogram;
  Components components;
  Recording scalp_electrodes;
  Recording ear_electrodes;
};

Generated generate(const SynthConfig& config, std::uint64_t seed, std::size_t index,
                   bool want_electrodes) {
  config.validate();
  const std::size_t per_epoch = samples_per_epoch(config.sample_rate);
  const double fs = config.sample_rate;

  Generated g;
  {
    Rng rng = make_rng(seed, index, kHypnogram);
    g.hypnogram = synth_hypnogram(config.epochs_per_subject, rng());
  }
  const std::size_t total = per_epoch * g.hypnogram.size();

  SubjectTraits traits{};
  {
    Rng rng = make_rng(seed, index, kSubject);
    std::uniform_real_distribution<double> freq(0.92, 1.08);
    std::uniform_real_distribution<double> amp(0.85, 1.15);
    std::uniform_real_distribution<double> gain(0.8, 1.2);
    traits.freq_scale = freq(rng);
    traits.amp_scale = amp(rng);
    for (double& v : traits.channel_gain) v = gain(rng);
  }

  Rng latent_rng = make_rng(seed, index, kLatent);
  const auto latent = make_latent(config, g.hypnogram, traits, latent_rng);

  std::vector<std::vector<double>> ear_signal(3, std::vector<double>(total));
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t t = 0; t < total; ++t) ear_signal[c][t] = config.ear_attenuation * latent[c][t];
  }

  // Electrode noise, then its derivations.
  Rng scalp_rng = make_rng(seed, index, kScalpNoise);
  Recording scalp_noise;
  scalp_noise.sample_rate = fs;
  for (const auto& name : preprocess::kScalpElectrodes) {
    scalp_noise.channel_ids.push_back(name);
    scalp_noise.channels.push_back(pink_noise(total, fs, scalp_rng));
  }
  Rng ear_rng = make_rng(seed, index, kEarNoise);
  Recording ear_noise;
  ear_noise.sample_rate = fs;
  for (const auto& name : preprocess::kEarElectrodes) {
    ear_noise.channel_ids.push_back(name);
    ear_noise.channels.push_back(pink_noise(total, fs, ear_rng));
  }
  // Contact quality differs per electrode: log amplitudes evenly spaced over
  // +-kContactSpread, shuffled onto the electrodes.
  {
    Rng rng = make_rng(seed, index, kContact);
    const std::size_t n = ear_noise.channels.size();
    std::vector<double> log_gain(n);
    for (std::size_t i = 0; i < n; ++i) {
      log_gain[i] = kContactSpread * (2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0);
    }
    std::shuffle(log_gain.begin(), log_gain.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      for (double& v : ear_noise.channels[i]) v *= std::exp(log_gain[i]);
    }
  }
  const std::set<std::string> all_ear(preprocess::kEarElectrodes.begin(),
                                      preprocess::kEarElectrodes.end());
  auto scalp_noise_deriv = preprocess::scalp_derivations(scalp_noise);
  auto ear_noise_deriv = preprocess::ear_derivations(ear_noise, all_ear);

  scale_noise_to_snr(latent, scalp_noise_deriv.data, scalp_noise.channels, config.snr_scalp_db,
                     per_epoch);
  scale_noise_to_snr(ear_signal, ear_noise_deriv.data, ear_noise.channels, config.snr_ear_db,
                     per_epoch);

  g.components.scalp_signal = {{preprocess::kScalpDerivationNames.begin(),
                                preprocess::kScalpDerivationNames.end()},
                               latent,
                               fs};
  g.components.scalp_noise = std::move(scalp_noise_deriv);
  g.components.ear_signal = {{preprocess::kEarDerivationNames.begin(),
                              preprocess::kEarDerivationNames.end()},
                             std::move(ear_signal),
                             fs};
  g.components.ear_noise = std::move(ear_noise_deriv);

  if (!want_electrodes) return g;

  Rng common_rng = make_rng(seed, index, kCommon);
  auto common = pink_noise(total, fs, common_rng);
  for (double& v : common) v *= config.common_mode_uv;

  // Scalp: each derivation splits symmetrically over its electrode pair.
  g.scalp_electrodes = std::move(scalp_noise);
  {
    auto& r = g.scalp_electrodes;
    const std::array<std::pair<const char*, const char*>, 3> pairs{
        {{"C3", "O1"}, {"C4", "O2"}, {"A1", "A2"}}};
    for (std::size_t d = 0; d < 3; ++d) {
      auto& plus = r.channels[r.index_of(pairs[d].first)];
      auto& minus = r.channels[r.index_of(pairs[d].second)];
      for (std::size_t t = 0; t < total; ++t) {
        plus[t] += common[t] + 0.5 * latent[d][t];
        minus[t] += common[t] - 0.5 * latent[d][t];
      }
    }
    for (const char* frontal : {"F3", "F4"}) {
      auto& ch = r.channels[r.index_of(frontal)];
      for (std::size_t t = 0; t < total; ++t) {
        ch[t] += common[t] + 0.25 * (latent[0][t] + latent[1][t]);
      }
    }
  }

  // Ear: canal = side + 2/3 * within-ear term, concha = side - 1/3 * within-ear
  // term, which reproduces L-R, LE and RE under group means.
  g.ear_electrodes = std::move(ear_noise);
  {
    auto& r = g.ear_electrodes;
    const auto& e = g.components.ear_signal.data;
    const auto place = [&](const auto& group, double side, std::size_t within, double coeff) {
      for (const auto& name : group) {
        auto& ch = r.channels[r.index_of(name)];
        for (std::size_t t = 0; t < total; ++t) {
          ch[t] += common[t] + side * 0.5 * e[0][t] + coeff * e[within][t];
        }
      }
    };
    place(preprocess::kLeftCanal, 1.0, 1, 2.0 / 3.0);
    place(preprocess::kLeftConcha, 1.0, 1, -1.0 / 3.0);
    place(preprocess::kRightCanal, -1.0, 2, 2.0 / 3.0);
    place(preprocess::kRightConcha, -1.0, 2, -1.0 / 3.0);
  }
  return g;
}

DerivationSet sum(const DerivationSet& a, const DerivationSet& b) {
  DerivationSet out = a;
  for (std::size_t c = 0; c < out.data.size(); ++c) {
    for (std::size_t t = 0; t < out.data[c].size(); ++t) out.data[c][t] += b.data[c][t];
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
  if (n_subjects < 1) fail("n_subjects must be >= 1");
  if (epochs_per_subject < 1) fail("epochs_per_subject must be >= 1");
  if (!(sample_rate > 2.0 * signal::kBandpassHighHz)) {
    fail("sample_rate must exceed twice the 42 Hz upper band edge");
  }
  if (!(snr_ear_db < snr_scalp_db)) fail("snr_ear_db must be below snr_scalp_db");
  if (!(ear_attenuation > 0.0 && ear_attenuation <= 1.0)) fail("ear_attenuation must be in (0, 1]");
  if (!(common_mode_uv >= 0.0)) fail("common_mode_uv must be >= 0");
}

std::string subject_name(std::size_t index) {
  std::ostringstream ss;
  ss << "S" << std::setw(2) << std::setfill('0') << (index + 1);
  return ss.str();
}

std::vector<Stage> synth_hypnogram(std::size_t epochs, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Stage> out;
  out.reserve(epochs);
  std::size_t state = 0;
  for (std::size_t e = 0; e < epochs; ++e) {
    out.push_back(static_cast<Stage>(state));
    std::discrete_distribution<std::size_t> next(kTransitions[state].begin(),
                                                 kTransitions[state].end());
    state = next(rng);
  }
  return out;
}

ElectrodeRecordings synth_subject_electrodes(const SynthConfig& config, std::uint64_t seed,
                                             std::size_t index) {
  Generated g = generate(config, seed, index, true);
  return {subject_name(index), std::move(g.hypnogram), std::move(g.scalp_electrodes),
          std::move(g.ear_electrodes)};
}

SyntheticSubject synth_subject(const SynthConfig& config, std::uint64_t seed, std::size_t index,
                               bool keep_components) {
  Generated g = generate(config, seed, index, false);
  SyntheticSubject s;
  s.id = subject_name(index);
  s.hypnogram = std::move(g.hypnogram);
  s.scalp = sum(g.components.scalp_signal, g.components.scalp_noise);
  s.ear = sum(g.components.ear_signal, g.components.ear_noise);
  if (keep_components) s.components = std::move(g.components);
  return s;
}

std::vector<SyntheticSubject> synth_paired_dataset(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  std::vector<SyntheticSubject> out;
  out.reserve(config.n_subjects);
  for (std::size_t i = 0; i < config.n_subjects; ++i) out.push_back(synth_subject(config, seed, i));
  return out;
}

SubjectData to_subject_data(const SyntheticSubject& subject, bool bandpass) {
  if (!bandpass) {
    return {subject.id,
            dataset::make_paired_epochs(subject.scalp, subject.ear, subject.hypnogram, subject.id)};
  }
  const auto scalp = DerivationSet::from_recording(signal::bandpass_filter(subject.scalp.as_recording()));
  const auto ear = DerivationSet::from_recording(signal::bandpass_filter(subject.ear.as_recording()));
  return {subject.id, dataset::make_paired_epochs(scalp, ear, subject.hypnogram, subject.id)};
}

}  // namespace earkd::synth
