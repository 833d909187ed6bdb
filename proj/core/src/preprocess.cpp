#include "earkd/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "earkd/errors.hpp"

namespace earkd::preprocess {
namespace {

// Floor that keeps log() finite for identical channel pairs.
constexpr double kPowerFloor = 1e-300;

template <std::size_t N>
std::vector<const std::vector<double>*> usable_members(const Recording& recording,
                                                       const std::array<std::string, N>& group,
                                                       const std::set<std::string>& usable) {
  std::vector<const std::vector<double>*> members;
  for (const auto& name : group) {
    if (usable.contains(name)) members.push_back(&recording.channel(name));
  }
  return members;
}

std::vector<double> mean_of(const std::vector<const std::vector<double>*>& members,
                            std::size_t samples) {
  std::vector<double> out(samples, 0.0);
  for (const auto* m : members) {
    for (std::size_t t = 0; t < samples; ++t) out[t] += (*m)[t];
  }
  const auto count = static_cast<double>(members.size());
  for (double& v : out) v /= count;
  return out;
}

std::vector<double> difference(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size());
  for (std::size_t t = 0; t < a.size(); ++t) out[t] = a[t] - b[t];
  return out;
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

std::set<std::string> RejectionReport::usable() const {
  std::set<std::string> out;
  for (const auto& id : channel_ids) {
    if (!rejected.contains(id)) out.insert(id);
  }
  return out;
}

PairPower pairwise_band_power(const Recording& recording, double low_hz, double high_hz) {
  const std::size_t c = recording.num_channels();
  if (c < 2) throw Error(ErrorKind::NotEnoughChannels, "pairwise power needs at least 2 channels");
  PairPower power;
  power.channel_ids = recording.channel_ids;
  power.values.assign(c * c, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = i + 1; j < c; ++j) {
      const auto derivation = difference(recording.channels[i], recording.channels[j]);
      const double p = signal::band_power(derivation, recording.sample_rate, low_hz, high_hz);
      power.values[i * c + j] = p;
      power.values[j * c + i] = p;
    }
  }
  return power;
}

RejectionReport reject_channels(const PairPower& power, double z_threshold) {
  const std::size_t c = power.size();
  if (c < 2) throw Error(ErrorKind::NotEnoughChannels, "rejection needs at least 2 channels");

  RejectionReport report;
  report.channel_ids = power.channel_ids;
  report.pair_power = power;
  report.channel_medians.resize(c);
  std::vector<double> log_medians(c);
  for (std::size_t i = 0; i < c; ++i) {
    std::vector<double> row;
    row.reserve(c - 1);
    for (std::size_t j = 0; j < c; ++j) {
      if (j != i) row.push_back(power.at(i, j));
    }
    report.channel_medians[i] = median(std::move(row));
    log_medians[i] = std::log(std::max(report.channel_medians[i], kPowerFloor));
  }

  report.log_median = median(log_medians);
  std::vector<double> deviations(c);
  for (std::size_t i = 0; i < c; ++i) deviations[i] = std::abs(log_medians[i] - report.log_median);
  report.log_mad = median(std::move(deviations));
  report.threshold_value = report.log_median + z_threshold * kMadToSigma * report.log_mad;

  for (std::size_t i = 0; i < c; ++i) {
    if (log_medians[i] > report.threshold_value) report.rejected.insert(power.channel_ids[i]);
  }
  if (report.rejected.size() == c) {
    throw Error(ErrorKind::AllChannelsRejected, "every channel was flagged as an outlier");
  }
  return report;
}

DerivationSet scalp_derivations(const Recording& recording) {
  const std::size_t n = recording.num_samples();
  DerivationSet out;
  out.sample_rate = recording.sample_rate;
  out.names.assign(kScalpDerivationNames.begin(), kScalpDerivationNames.end());
  const std::array<std::pair<const char*, const char*>, 3> pairs{
      {{"C3", "O1"}, {"C4", "O2"}, {"A1", "A2"}}};
  for (const auto& [a, b] : pairs) {
    const auto& x = recording.channel(a);
    const auto& y = recording.channel(b);
    std::vector<double> d(n);
    for (std::size_t t = 0; t < n; ++t) d[t] = x[t] - y[t];
    out.data.push_back(std::move(d));
  }
  return out;
}

DerivationSet ear_derivations(const Recording& recording, const std::set<std::string>& usable) {
  for (const auto& name : usable) {
    if (!recording.has_channel(name)) throw MissingChannel(name);
  }
  const std::size_t n = recording.num_samples();
  const auto left_canal = usable_members(recording, kLeftCanal, usable);
  const auto left_concha = usable_members(recording, kLeftConcha, usable);
  const auto right_canal = usable_members(recording, kRightCanal, usable);
  const auto right_concha = usable_members(recording, kRightConcha, usable);

  const auto require = [](const auto& members, const char* what) {
    if (members.empty()) {
      throw RecordingRejected(std::string("no usable ") + what + " channel");
    }
  };
  require(left_canal, "left ear canal");
  require(left_concha, "left concha");
  require(right_canal, "right ear canal");
  require(right_concha, "right concha");

  auto left = left_canal;
  left.insert(left.end(), left_concha.begin(), left_concha.end());
  auto right = right_canal;
  right.insert(right.end(), right_concha.begin(), right_concha.end());

  DerivationSet out;
  out.sample_rate = recording.sample_rate;
  out.names.assign(kEarDerivationNames.begin(), kEarDerivationNames.end());
  out.data.push_back(difference(mean_of(left, n), mean_of(right, n)));
  out.data.push_back(difference(mean_of(left_canal, n), mean_of(left_concha, n)));
  out.data.push_back(difference(mean_of(right_canal, n), mean_of(right_concha, n)));
  return out;
}

}  // namespace earkd::preprocess
