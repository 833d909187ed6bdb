#include <algorithm>
#include <map>

#include "earkd/preprocess.hpp"
#include "earkd/signal.hpp"
#include "test_support.hpp"

using namespace earkd;
using namespace earkd::preprocess;

namespace {

Recording ear_recording(const std::map<std::string, std::vector<double>>& values) {
  Recording r;
  r.sample_rate = 100.0;
  for (const auto& id : kEarElectrodes) {
    r.channel_ids.push_back(id);
    r.channels.push_back(values.at(id));
  }
  return r;
}

std::set<std::string> all_ear() { return {kEarElectrodes.begin(), kEarElectrodes.end()}; }

// Integer-valued random ear recording, n samples.
Recording integer_ear(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dist(-50, 50);
  std::map<std::string, std::vector<double>> v;
  for (const auto& id : kEarElectrodes) {
    auto& ch = v[id];
    for (std::size_t i = 0; i < n; ++i) ch.push_back(dist(rng));
  }
  return ear_recording(v);
}

// The five group quantities written out electrode by electrode.
struct DirectEar {
  std::vector<double> l_minus_r, le, re;
};

DirectEar direct_ear(const Recording& r) {
  const auto& c = [&](const char* id) -> const std::vector<double>& { return r.channel(id); };
  DirectEar d;
  for (std::size_t t = 0; t < r.num_samples(); ++t) {
    const double left_sum = c("ELA")[t] + c("ELB")[t] + c("ELE")[t] + c("ELI")[t] + c("ELG")[t] + c("ELK")[t];
    const double right_sum = c("ERA")[t] + c("ERB")[t] + c("ERE")[t] + c("ERI")[t] + c("ERG")[t] + c("ERK")[t];
    const double l1 = left_sum / 6.0;
    const double r1 = right_sum / 6.0;
    d.l_minus_r.push_back(l1 - r1);
    const double lc = (c("ELA")[t] + c("ELB")[t]) / 2.0;
    const double lk = (c("ELE")[t] + c("ELI")[t] + c("ELG")[t] + c("ELK")[t]) / 4.0;
    const double rc = (c("ERA")[t] + c("ERB")[t]) / 2.0;
    const double rk = (c("ERE")[t] + c("ERI")[t] + c("ERG")[t] + c("ERK")[t]) / 4.0;
    d.le.push_back(lc - lk);
    d.re.push_back(rc - rk);
  }
  return d;
}

Recording noisy_ear(std::uint64_t seed, const std::string& loud = {}) {
  Recording r;
  r.sample_rate = 100.0;
  std::uint64_t k = 0;
  for (const auto& id : kEarElectrodes) {
    r.channel_ids.push_back(id);
    auto x = testing::gaussian(6000, seed * 100 + k++);
    if (id == loud) {
      for (double& v : x) v *= 10.0;  // 100x power
    }
    r.channels.push_back(std::move(x));
  }
  return r;
}

// Independent evaluation of the rejection rule.
struct RuleOracle {
  std::vector<double> medians;
  double threshold;
  std::set<std::string> rejected;
};

RuleOracle rule_oracle(const PairPower& p) {
  const std::size_t c = p.size();
  const auto middle = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  RuleOracle o;
  std::vector<double> logs;
  for (std::size_t i = 0; i < c; ++i) {
    std::vector<double> row;
    for (std::size_t j = 0; j < c; ++j) {
      if (j != i) row.push_back(p.at(i, j));
    }
    o.medians.push_back(middle(row));
    logs.push_back(std::log(o.medians.back()));
  }
  const double med = middle(logs);
  std::vector<double> dev;
  for (double l : logs) dev.push_back(std::abs(l - med));
  o.threshold = med + 3.0 * 1.4826 * middle(dev);
  for (std::size_t i = 0; i < c; ++i) {
    if (logs[i] > o.threshold) o.rejected.insert(p.channel_ids[i]);
  }
  return o;
}

}  // namespace

TEST_CASE("pairwise band power examples") {
  Recording r;
  r.sample_rate = 200.0;
  const auto x = testing::sine(20.0, 200.0, 6000);
  std::vector<double> neg(x.size());
  std::transform(x.begin(), x.end(), neg.begin(), [](double v) { return -v; });

  r.channel_ids = {"a", "b"};
  r.channels = {x, x};
  CHECK(pairwise_band_power(r).at(0, 1) == 0.0);

  r.channels = {x, neg};
  const double single = signal::band_power(x, 200.0, 10.0, 35.0);
  CHECK(std::abs(pairwise_band_power(r).at(0, 1) - 4.0 * single) <= 1e-6 * 4.0 * single);

  r.channel_ids = {"a", "b", "c"};
  r.channels = {x, testing::gaussian(6000, 1), testing::gaussian(6000, 2)};
  const auto p = pairwise_band_power(r);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::isnan(p.at(i, i)));
    for (std::size_t j = 0; j < 3; ++j) {
      if (i != j) CHECK(p.at(i, j) == p.at(j, i));
    }
  }

  r.channel_ids = {"a"};
  r.channels = {x};
  CHECK_ERROR_KIND(pairwise_band_power(r), ErrorKind::NotEnoughChannels);
}

TEST_CASE("channel rejection on constructed instances") {
  SUBCASE("homogeneous noise rejects nothing") {
    const auto report = reject_channels(pairwise_band_power(noisy_ear(3)));
    CHECK(report.rejected.empty());
    CHECK(report.usable().size() == 12);
  }
  SUBCASE("one loud channel is rejected alone") {
    for (const std::string loud : {"ELA", "ERG", "ELK"}) {
      const auto power = pairwise_band_power(noisy_ear(5, loud));
      const auto report = reject_channels(power);
      const auto oracle = rule_oracle(power);
      CHECK(report.rejected == std::set<std::string>{loud});
      CHECK(oracle.rejected == report.rejected);
      CHECK(report.channel_medians.size() == 12);
      CHECK(std::isfinite(report.threshold_value));
      CHECK(report.threshold_value == doctest::Approx(oracle.threshold).epsilon(1e-12));
      for (std::size_t i = 0; i < 12; ++i) {
        CHECK(report.channel_medians[i] == oracle.medians[i]);
      }
    }
  }
  SUBCASE("rule is invariant to scaling P") {
    auto power = pairwise_band_power(noisy_ear(7, "ERB"));
    const auto base = reject_channels(power).rejected;
    for (double s : {1e-6, 0.5, 3.0, 1e8}) {
      auto scaled = power;
      for (double& v : scaled.values) v *= s;
      CHECK(reject_channels(scaled).rejected == base);
    }
  }
}

TEST_CASE("rejecting every channel is an error") {
  PairPower p;
  p.channel_ids = {"a", "b", "c"};
  // Medians 5.5, 50.5, 55; a strongly negative z puts the cut-off below all of them.
  p.values = {NAN, 1, 10, 1, NAN, 100, 10, 100, NAN};
  CHECK(reject_channels(p).rejected.empty());
  CHECK_ERROR_KIND(reject_channels(p, -20.0), ErrorKind::AllChannelsRejected);
}

TEST_CASE("scalp derivation examples") {
  Recording r;
  r.sample_rate = 100.0;
  for (const auto& id : kScalpElectrodes) {
    r.channel_ids.push_back(id);
    r.channels.push_back({1.0, 1.0});
  }
  auto d = scalp_derivations(r);
  CHECK(d.names == std::vector<std::string>(kScalpDerivationNames.begin(), kScalpDerivationNames.end()));
  for (const auto& ch : d.data) CHECK(ch == std::vector<double>{0.0, 0.0});

  for (auto& ch : r.channels) ch = {0.0, 0.0};
  r.channels[r.index_of("C3")] = {1.0, 2.0};
  r.channels[r.index_of("O1")] = {0.0, 1.0};
  d = scalp_derivations(r);
  CHECK(d.data[0] == std::vector<double>{1.0, 1.0});

  const auto a2 = r.index_of("A2");
  r.channel_ids.erase(r.channel_ids.begin() + static_cast<std::ptrdiff_t>(a2));
  r.channels.erase(r.channels.begin() + static_cast<std::ptrdiff_t>(a2));
  try {
    scalp_derivations(r);
    FAIL("expected MissingChannel");
  } catch (const MissingChannel& e) {
    CHECK(e.channel() == "A2");
  }
}

TEST_CASE("ear derivation hand cases") {
  std::map<std::string, std::vector<double>> v;
  for (const auto& id : kEarElectrodes) v[id] = {7.0};
  auto d = ear_derivations(ear_recording(v), all_ear());
  CHECK(d.names == std::vector<std::string>(kEarDerivationNames.begin(), kEarDerivationNames.end()));
  for (const auto& ch : d.data) CHECK(ch[0] == 0.0);

  for (const auto& id : kEarElectrodes) v[id] = {id[1] == 'L' ? 1.0 : 0.0};
  v["ELA"] = {4.0};
  v["ELB"] = {2.0};
  d = ear_derivations(ear_recording(v), all_ear());
  CHECK(d.data[1][0] == 2.0);
  CHECK(d.data[0][0] == 5.0 / 3.0);
  CHECK(d.data[2][0] == 0.0);
}

TEST_CASE("ear derivations match direct evaluation bit-exactly") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = integer_ear(seed, 64);
    const auto d = ear_derivations(r, all_ear());
    const auto o = direct_ear(r);
    CHECK(d.data[0] == o.l_minus_r);
    CHECK(d.data[1] == o.le);
    CHECK(d.data[2] == o.re);
  }
}

TEST_CASE("ear derivations use only usable electrodes") {
  const auto r = integer_ear(11, 16);
  auto usable = all_ear();
  usable.erase("ELB");
  usable.erase("ERK");
  const auto d = ear_derivations(r, usable);
  const auto& c = [&](const char* id) { return r.channel(id); };
  for (std::size_t t = 0; t < 16; ++t) {
    const double l1 = (c("ELA")[t] + c("ELE")[t] + c("ELI")[t] + c("ELG")[t] + c("ELK")[t]) / 5.0;
    const double r1 = (c("ERA")[t] + c("ERB")[t] + c("ERE")[t] + c("ERI")[t] + c("ERG")[t]) / 5.0;
    CHECK(d.data[0][t] == l1 - r1);
    CHECK(d.data[1][t] == c("ELA")[t] - (c("ELE")[t] + c("ELI")[t] + c("ELG")[t] + c("ELK")[t]) / 4.0);
    CHECK(d.data[2][t] == (c("ERA")[t] + c("ERB")[t]) / 2.0 - (c("ERE")[t] + c("ERI")[t] + c("ERG")[t]) / 3.0);
  }
}

TEST_CASE("ear derivation properties") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Recording r = noisy_ear(seed);
    const auto base = ear_derivations(r, all_ear());

    const double alpha = 0.37 + static_cast<double>(seed);
    Recording scaled = r;
    for (auto& ch : scaled.channels) {
      for (double& v : ch) v *= alpha;
    }
    const auto ds = ear_derivations(scaled, all_ear());
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t t = 0; t < r.num_samples(); ++t) {
        CHECK(std::abs(ds.data[k][t] - alpha * base.data[k][t]) <=
              1e-12 * std::max(1.0, std::abs(alpha * base.data[k][t])));
      }
    }

    // Swap the two ears: L-R negates exactly, LE and RE trade places.
    Recording swapped = r;
    for (std::size_t i = 0; i < 6; ++i) std::swap(swapped.channels[i], swapped.channels[i + 6]);
    const auto dw = ear_derivations(swapped, all_ear());
    for (std::size_t t = 0; t < r.num_samples(); ++t) {
      CHECK(dw.data[0][t] == -base.data[0][t]);
    }
    CHECK(dw.data[1] == base.data[2]);
    CHECK(dw.data[2] == base.data[1]);
  }
}

TEST_CASE("ear derivations reject recordings without a usable subgroup") {
  const auto r = integer_ear(1, 8);
  auto usable = all_ear();
  usable.erase("ERA");
  usable.erase("ERB");
  CHECK_ERROR_KIND(ear_derivations(r, usable), ErrorKind::RecordingRejected);

  usable = all_ear();
  for (const auto& id : kLeftConcha) usable.erase(id);
  CHECK_ERROR_KIND(ear_derivations(r, usable), ErrorKind::RecordingRejected);

  usable = all_ear();
  usable.insert("XYZ");
  CHECK_ERROR_KIND(ear_derivations(r, usable), ErrorKind::MissingChannel);
}

TEST_CASE("median helper") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
}
