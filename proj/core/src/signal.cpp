#include "earkd/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "earkd/errors.hpp"
#include "fft.hpp"

namespace earkd {

bool Recording::has_channel(std::string_view id) const {
  return std::find(channel_ids.begin(), channel_ids.end(), id) != channel_ids.end();
}

std::size_t Recording::index_of(std::string_view id) const {
  auto it = std::find(channel_ids.begin(), channel_ids.end(), id);
  if (it == channel_ids.end()) throw MissingChannel(std::string(id));
  return static_cast<std::size_t>(it - channel_ids.begin());
}

const std::vector<double>& Recording::channel(std::string_view id) const {
  return channels[index_of(id)];
}

void Recording::validate() const {
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
    throw Error(ErrorKind::CorruptContainer, "sample rate must be positive");
  }
  if (channel_ids.size() != channels.size()) {
    throw Error(ErrorKind::CorruptContainer, "channel id count does not match data columns");
  }
  const std::size_t n = num_samples();
  for (std::size_t c = 0; c < channels.size(); ++c) {
    if (channels[c].size() != n) {
      throw Error(ErrorKind::CorruptContainer, "channel '" + channel_ids[c] + "' has ragged length");
    }
    for (double v : channels[c]) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::CorruptContainer, "non-finite sample in '" + channel_ids[c] + "'");
      }
    }
  }
}

std::size_t samples_per_epoch(double sample_rate, double epoch_seconds) {
  return static_cast<std::size_t>(std::llround(epoch_seconds * sample_rate));
}

}  // namespace earkd

namespace earkd::signal {
namespace {

using cplx = std::complex<double>;

double prewarp(double freq_hz, double fs) {
  return 2.0 * fs * std::tan(std::numbers::pi * freq_hz / fs);
}

cplx bilinear(cplx s, double fs) { return (1.0 + s / (2.0 * fs)) / (1.0 - s / (2.0 * fs)); }

Biquad conjugate_pair_section(cplx z) {
  Biquad q;
  q.b0 = 1.0;
  q.b1 = 0.0;
  q.b2 = -1.0;
  q.a1 = -2.0 * z.real();
  q.a2 = std::norm(z);
  return q;
}

cplx section_response(const Biquad& q, double omega) {
  const cplx z1 = std::polar(1.0, -omega);
  const cplx z2 = z1 * z1;
  return (q.b0 + q.b1 * z1 + q.b2 * z2) / (1.0 + q.a1 * z1 + q.a2 * z2);
}

void check_band(double fs, double low, double high) {
  if (!(fs > 0.0) || !(low > 0.0) || !(low < high) || !(high < fs / 2.0)) {
    throw Error(ErrorKind::InvalidBand, "band [" + std::to_string(low) + ", " +
                                            std::to_string(high) + "] Hz invalid at " +
                                            std::to_string(fs) + " Hz");
  }
}

}  // namespace

ButterworthBandpass::ButterworthBandpass(double sample_rate, double low_hz, double high_hz,
                                         int prototype_order)
    : sample_rate_(sample_rate), low_(low_hz), high_(high_hz), prototype_order_(prototype_order) {
  check_band(sample_rate, low_hz, high_hz);
  if (prototype_order < 1) throw Error(ErrorKind::InvalidConfig, "filter order must be >= 1");

  const double wl = prewarp(low_hz, sample_rate);
  const double wh = prewarp(high_hz, sample_rate);
  const double w0 = std::sqrt(wl * wh);
  const double bw = wh - wl;
  const int n = prototype_order;

  for (int k = 1; k <= n; ++k) {
    const cplx p = std::polar(1.0, std::numbers::pi * (2.0 * k + n - 1) / (2.0 * n));
    if (p.imag() < -1e-12) continue;  // conjugates are covered by their partner
    const cplx half = p * bw / 2.0;
    const cplx root = std::sqrt(half * half - w0 * w0);
    const cplx s1 = half + root;
    const cplx s2 = half - root;
    if (std::abs(p.imag()) <= 1e-12) {
      // Real prototype pole: the two bandpass poles form one conjugate pair.
      sections_.push_back(conjugate_pair_section(bilinear(s1, sample_rate)));
    } else {
      sections_.push_back(conjugate_pair_section(bilinear(s1, sample_rate)));
      sections_.push_back(conjugate_pair_section(bilinear(s2, sample_rate)));
    }
  }

  // Unity gain at the digital image of the analog centre frequency.
  const double omega0 = 2.0 * std::atan(w0 / (2.0 * sample_rate));
  cplx h = 1.0;
  for (const auto& q : sections_) h *= section_response(q, omega0);
  const double g = std::pow(1.0 / std::abs(h), 1.0 / static_cast<double>(sections_.size()));
  for (auto& q : sections_) {
    q.b0 *= g;
    q.b1 *= g;
    q.b2 *= g;
  }
}

std::complex<double> ButterworthBandpass::response(double freq_hz) const {
  const double omega = 2.0 * std::numbers::pi * freq_hz / sample_rate_;
  cplx h = 1.0;
  for (const auto& q : sections_) h *= section_response(q, omega);
  return h;
}

void ButterworthBandpass::run(std::span<double> x, bool steady_start) const {
  if (x.empty()) return;
  for (const auto& q : sections_) {
    double z1 = 0.0;
    double z2 = 0.0;
    if (steady_start) {
      // State that a constant input equal to x[0] would have settled into.
      const double u = x[0];
      const double gain = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
      z2 = (q.b2 - q.a2 * gain) * u;
      z1 = (q.b1 - q.a1 * gain) * u + z2;
    }
    for (double& v : x) {
      const double in = v;
      const double out = q.b0 * in + z1;
      z1 = q.b1 * in - q.a1 * out + z2;
      z2 = q.b2 * in - q.a2 * out;
      v = out;
    }
  }
}

std::vector<double> ButterworthBandpass::apply(std::span<const double> x) const {
  std::vector<double> y(x.begin(), x.end());
  run(y, false);
  return y;
}

std::vector<double> ButterworthBandpass::filtfilt(std::span<const double> x) const {
  const std::size_t n = x.size();
  if (n < pad_length()) {
    throw Error(ErrorKind::SignalTooShort, "signal of " + std::to_string(n) +
                                               " samples shorter than " +
                                               std::to_string(pad_length()));
  }
  const std::size_t pad = std::min(pad_length(), n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  run(ext, true);
  std::reverse(ext.begin(), ext.end());
  run(ext, true);
  std::reverse(ext.begin(), ext.end());

  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

std::vector<double> bandpass_filter(std::span<const double> signal, double sample_rate,
                                    double low_hz, double high_hz) {
  return ButterworthBandpass(sample_rate, low_hz, high_hz).filtfilt(signal);
}

Recording bandpass_filter(const Recording& recording, double low_hz, double high_hz) {
  const ButterworthBandpass filter(recording.sample_rate, low_hz, high_hz);
  Recording out;
  out.channel_ids = recording.channel_ids;
  out.sample_rate = recording.sample_rate;
  out.channels.reserve(recording.channels.size());
  for (const auto& ch : recording.channels) out.channels.push_back(filter.filtfilt(ch));
  return out;
}

std::vector<EpochTensor> segment_epochs(std::span<const std::vector<double>> channels,
                                        double sample_rate, double epoch_seconds) {
  if (channels.empty()) throw Error(ErrorKind::EmptyResult, "no channels to segment");
  const std::size_t per_epoch = samples_per_epoch(sample_rate, epoch_seconds);
  const std::size_t total = channels.front().size();
  if (per_epoch == 0 || total < per_epoch) {
    throw Error(ErrorKind::EmptyResult, "recording of " + std::to_string(total) +
                                            " samples is shorter than one epoch of " +
                                            std::to_string(per_epoch));
  }
  const std::size_t count = total / per_epoch;
  std::vector<EpochTensor> epochs;
  epochs.reserve(count);
  for (std::size_t e = 0; e < count; ++e) {
    EpochTensor epoch(per_epoch, channels.size());
    for (std::size_t c = 0; c < channels.size(); ++c) {
      const auto begin = channels[c].begin() + static_cast<std::ptrdiff_t>(e * per_epoch);
      std::copy(begin, begin + static_cast<std::ptrdiff_t>(per_epoch), epoch.channel(c).begin());
    }
    epochs.push_back(std::move(epoch));
  }
  return epochs;
}

std::vector<EpochTensor> segment_epochs(const Recording& recording, double epoch_seconds) {
  return segment_epochs(recording.channels, recording.sample_rate, epoch_seconds);
}

Spectrum welch_psd(std::span<const double> signal, double sample_rate,
                   const WelchOptions& options) {
  const auto segment = static_cast<std::size_t>(std::llround(options.window_seconds * sample_rate));
  if (segment < 2) throw Error(ErrorKind::InvalidConfig, "Welch window shorter than 2 samples");
  if (signal.size() < segment) {
    throw Error(ErrorKind::SignalTooShort, "signal shorter than one Welch window");
  }
  const auto overlap = static_cast<std::size_t>(std::llround(options.overlap * static_cast<double>(segment)));
  const std::size_t hop = std::max<std::size_t>(1, segment - std::min(overlap, segment - 1));

  std::vector<double> window(segment);
  double window_energy = 0.0;
  for (std::size_t i = 0; i < segment; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(segment));
    window_energy += window[i] * window[i];
  }
  const double scale = 1.0 / (sample_rate * window_energy);

  Spectrum spectrum;
  spectrum.resolution_hz = sample_rate / static_cast<double>(segment);
  spectrum.psd.assign(segment / 2 + 1, 0.0);

  std::size_t count = 0;
  std::vector<double> buffer(segment);
  for (std::size_t start = 0; start + segment <= signal.size(); start += hop, ++count) {
    double mean = 0.0;
    for (std::size_t i = 0; i < segment; ++i) mean += signal[start + i];
    mean /= static_cast<double>(segment);
    for (std::size_t i = 0; i < segment; ++i) buffer[i] = (signal[start + i] - mean) * window[i];
    const auto bins = detail::rfft(buffer);
    for (std::size_t k = 0; k < bins.size(); ++k) spectrum.psd[k] += std::norm(bins[k]);
  }

  const std::size_t nyquist = (segment % 2 == 0) ? segment / 2 : segment;
  for (std::size_t k = 0; k < spectrum.psd.size(); ++k) {
    double v = spectrum.psd[k] * scale / static_cast<double>(count);
    if (k != 0 && k != nyquist) v *= 2.0;
    spectrum.psd[k] = v;
  }
  return spectrum;
}

double band_power(std::span<const double> signal, double sample_rate, double low_hz,
                  double high_hz, const WelchOptions& options) {
  if (!(sample_rate > 0.0) || !(low_hz >= 0.0) || !(low_hz < high_hz) ||
      !(high_hz <= sample_rate / 2.0)) {
    throw Error(ErrorKind::InvalidBand, "band outside [0, Nyquist]");
  }
  const Spectrum spectrum = welch_psd(signal, sample_rate, options);
  double power = 0.0;
  for (std::size_t k = 0; k < spectrum.psd.size(); ++k) {
    const double f = static_cast<double>(k) * spectrum.resolution_hz;
    if (f >= low_hz - 1e-9 && f <= high_hz + 1e-9) power += spectrum.psd[k];
  }
  return power * spectrum.resolution_hz;
}

}  // namespace earkd::signal
