#pragma once

#include <array>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "earkd/signal.hpp"

namespace earkd {

// Three derived channels (e.g. C3-O1, C4-O2, A1-A2) over a whole recording.
struct DerivationSet {
  std::vector<std::string> names;
  std::vector<std::vector<double>> data;  // one vector per derivation
  double sample_rate = 0.0;

  std::size_t num_samples() const noexcept { return data.empty() ? 0 : data.front().size(); }
  Recording as_recording() const { return {names, data, sample_rate}; }
  static DerivationSet from_recording(const Recording& r) {
    return {r.channel_ids, r.channels, r.sample_rate};
  }
};

}  // namespace earkd

namespace earkd::preprocess {

inline const std::array<std::string, 3> kScalpDerivationNames{"C3-O1", "C4-O2", "A1-A2"};
inline const std::array<std::string, 3> kEarDerivationNames{"L-R", "LE", "RE"};

inline const std::array<std::string, 8> kScalpElectrodes{"O1", "O2", "C3", "C4",
                                                         "A1", "A2", "F3", "F4"};
inline const std::array<std::string, 2> kLeftCanal{"ELA", "ELB"};
inline const std::array<std::string, 4> kLeftConcha{"ELE", "ELI", "ELG", "ELK"};
inline const std::array<std::string, 2> kRightCanal{"ERA", "ERB"};
inline const std::array<std::string, 4> kRightConcha{"ERE", "ERI", "ERG", "ERK"};
// Left ear first, canal before concha.
inline const std::array<std::string, 12> kEarElectrodes{"ELA", "ELB", "ELE", "ELI", "ELG", "ELK",
                                                        "ERA", "ERB", "ERE", "ERI", "ERG", "ERK"};

inline constexpr double kRejectionLowHz = 10.0;
inline constexpr double kRejectionHighHz = 35.0;
inline constexpr double kRejectionZ = 3.0;
inline constexpr double kMadToSigma = 1.4826;

// Symmetric matrix of derivation band powers; the diagonal is undefined (NaN).
struct PairPower {
  std::vector<std::string> channel_ids;
  std::vector<double> values;  // row-major C x C

  std::size_t size() const noexcept { return channel_ids.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
};

struct RejectionReport {
  std::vector<std::string> channel_ids;
  PairPower pair_power;
  std::vector<double> channel_medians;
  std::set<std::string> rejected;
  // Cut-off on log(m_i); channels above it are rejected.
  double threshold_value = 0.0;
  double log_median = 0.0;
  double log_mad = 0.0;

  std::set<std::string> usable() const;
};

// P_ij = band power of (channel_i - channel_j) in [low, high] Hz.
PairPower pairwise_band_power(const Recording& recording, double low_hz = kRejectionLowHz,
                              double high_hz = kRejectionHighHz);

// One-sided robust z-score on log channel medians.
RejectionReport reject_channels(const PairPower& power, double z_threshold = kRejectionZ);

DerivationSet scalp_derivations(const Recording& recording);

// Ear derivations from the usable electrodes only. Throws RecordingRejected
// if a canal or concha subgroup has no usable member.
DerivationSet ear_derivations(const Recording& recording, const std::set<std::string>& usable);

// Median of a copy; averages the two middle values for even counts.
double median(std::vector<double> values);

}  // namespace earkd::preprocess
