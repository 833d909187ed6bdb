#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace earkd {

// Multichannel time series in microvolts. Channels are stored contiguously,
// one vector per channel, in `channel_ids` order.
struct Recording {
  std::vector<std::string> channel_ids;
  std::vector<std::vector<double>> channels;
  double sample_rate = 0.0;

  std::size_t num_channels() const noexcept { return channels.size(); }
  std::size_t num_samples() const noexcept {
    return channels.empty() ? 0 : channels.front().size();
  }
  bool has_channel(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;  // throws MissingChannel
  const std::vector<double>& channel(std::string_view id) const;

  // Throws CorruptContainer if the shape invariants or finiteness fail.
  void validate() const;
};

// One fixed-length window of a multichannel signal, channel-major:
// data[c * samples + t].
struct EpochTensor {
  std::size_t samples = 0;
  std::size_t channels = 0;
  std::vector<double> data;

  EpochTensor() = default;
  EpochTensor(std::size_t samples, std::size_t channels)
      : samples(samples), channels(channels), data(samples * channels, 0.0) {}

  std::span<double> channel(std::size_t c) {
    return {data.data() + c * samples, samples};
  }
  std::span<const double> channel(std::size_t c) const {
    return {data.data() + c * samples, samples};
  }
  double& at(std::size_t t, std::size_t c) { return data[c * samples + t]; }
  double at(std::size_t t, std::size_t c) const { return data[c * samples + t]; }

  bool operator==(const EpochTensor&) const = default;
};

inline constexpr double kEpochSeconds = 30.0;

std::size_t samples_per_epoch(double sample_rate, double epoch_seconds = kEpochSeconds);

}  // namespace earkd

namespace earkd::signal {

// Direct-form II transposed biquad; a0 is normalised to 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

// Digital Butterworth bandpass realised as a cascade of biquads. The
// prototype order applies to each band edge, so the resulting filter has
// order 2 * prototype_order.
class ButterworthBandpass {
 public:
  ButterworthBandpass(double sample_rate, double low_hz, double high_hz, int prototype_order = 4);

  std::span<const Biquad> sections() const noexcept { return sections_; }
  int order() const noexcept { return 2 * prototype_order_; }
  double sample_rate() const noexcept { return sample_rate_; }
  double low() const noexcept { return low_; }
  double high() const noexcept { return high_; }

  // Complex response of a single causal pass at `freq_hz`.
  std::complex<double> response(double freq_hz) const;

  // Single causal pass starting from rest.
  std::vector<double> apply(std::span<const double> x) const;

  // Zero-phase forward-backward pass with odd-extension padding and
  // steady-state initial conditions.
  std::vector<double> filtfilt(std::span<const double> x) const;

  std::size_t pad_length() const noexcept { return 3 * static_cast<std::size_t>(order()); }

 private:
  void run(std::span<double> x, bool steady_start) const;

  double sample_rate_;
  double low_;
  double high_;
  int prototype_order_;
  std::vector<Biquad> sections_;
};

inline constexpr double kBandpassLowHz = 0.2;
inline constexpr double kBandpassHighHz = 42.0;

// Zero-phase 4th-order Butterworth bandpass.
std::vector<double> bandpass_filter(std::span<const double> signal, double sample_rate,
                                    double low_hz, double high_hz);

// Filters every channel of a whole recording.
Recording bandpass_filter(const Recording& recording, double low_hz = kBandpassLowHz,
                          double high_hz = kBandpassHighHz);

// Non-overlapping windows of `epoch_seconds`; the trailing partial window is
// discarded. Throws EmptyResult when the recording is shorter than one epoch.
std::vector<EpochTensor> segment_epochs(const Recording& recording,
                                        double epoch_seconds = kEpochSeconds);
std::vector<EpochTensor> segment_epochs(std::span<const std::vector<double>> channels,
                                        double sample_rate,
                                        double epoch_seconds = kEpochSeconds);

struct WelchOptions {
  double window_seconds = 2.0;
  double overlap = 0.5;
};

struct Spectrum {
  double resolution_hz = 0.0;
  std::vector<double> psd;  // one-sided density, units^2 / Hz, bin k at k * resolution_hz
};

// Welch averaged periodogram: periodic Hann window, mean detrend per segment.
Spectrum welch_psd(std::span<const double> signal, double sample_rate,
                   const WelchOptions& options = {});

// Power (units^2) contained in [low_hz, high_hz] of the Welch estimate.
double band_power(std::span<const double> signal, double sample_rate, double low_hz,
                  double high_hz, const WelchOptions& options = {});

}  // namespace earkd::signal
