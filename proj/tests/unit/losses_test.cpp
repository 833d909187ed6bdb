#include "earkd/training.hpp"
#include "test_support.hpp"

using namespace earkd;
using namespace earkd::losses;

namespace {

// -log softmax(row)[label] in extended precision without max-shifting.
double reference_ce(std::span<const double> row, int label) {
  long double z = 0.0L;
  for (double v : row) z += std::exp(static_cast<long double>(v));
  return static_cast<double>(-std::log(std::exp(static_cast<long double>(row[label])) / z));
}

template <typename F>
std::vector<double> numeric_grad(std::vector<double> x, F&& f, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max(std::abs(a[i]), std::abs(b[i]));
    if (scale < 1e-9) continue;
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("cross-entropy examples") {
  const std::vector<double> uniform(5, 0.3);
  const std::vector<int> zero{0};
  CHECK(std::abs(ce_loss(uniform, zero).value - std::log(5.0)) < 1e-6);

  const std::vector<double> saturated{25.0, 0.0, 0.0, 0.0, 0.0};
  CHECK(ce_loss(saturated, zero).value < 1e-6);

  // -log(e / (e + 4)), evaluated to 30 digits.
  const std::vector<double> one_hot{1.0, 0.0, 0.0, 0.0, 0.0};
  CHECK(ce_loss(one_hot, zero).value == doctest::Approx(0.904832441554448025).epsilon(1e-14));

  const std::vector<int> bad{5};
  CHECK_ERROR_KIND(ce_loss(one_hot, bad), ErrorKind::InvalidLabel);
  const std::vector<int> two{0, 1};
  CHECK_ERROR_KIND(ce_loss(one_hot, two), ErrorKind::ShapeError);
}

TEST_CASE("cross-entropy agrees with the extended-precision oracle") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 3.0);
  std::uniform_int_distribution<int> label(0, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t batch = 1 + static_cast<std::size_t>(trial % 7);
    std::vector<double> logits(batch * 5);
    for (double& v : logits) v = normal(rng);
    std::vector<int> labels(batch);
    for (int& l : labels) l = label(rng);
    double expected = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      expected += reference_ce(std::span(logits).subspan(b * 5, 5), labels[b]);
    }
    expected /= static_cast<double>(batch);
    const auto r = ce_loss(logits, labels);
    CHECK(r.value == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.value >= 0.0);
  }
}

TEST_CASE("feature MSE examples") {
  const std::vector<double> a{1.0, 0.0};
  const std::vector<double> b{0.0, 1.0};
  CHECK(feature_mse(a, b, 2).value == 2.0);
  CHECK(feature_mse(a, a, 2).value == 0.0);

  const auto x = testing::gaussian(40, 1);
  const auto y = testing::gaussian(40, 2);
  const double base = feature_mse(x, y, 8).value;
  for (double alpha : {0.5, 2.0, -3.0}) {
    std::vector<double> sx(x), sy(y);
    for (double& v : sx) v *= alpha;
    for (double& v : sy) v *= alpha;
    CHECK(feature_mse(sx, sy, 8).value == doctest::Approx(alpha * alpha * base).epsilon(1e-12));
  }
  CHECK_ERROR_KIND(feature_mse(x, testing::gaussian(32, 3), 8), ErrorKind::ShapeError);
}

TEST_CASE("distillation loss is the sum of its parts") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t batch = 1 + seed % 5;
    const std::size_t dim = 4 + seed % 3;
    const auto logits = testing::gaussian(batch * 5, seed, 2.0);
    const auto s = testing::gaussian(batch * dim, seed + 1000);
    const auto t = testing::gaussian(batch * dim, seed + 2000);
    std::vector<int> labels(batch);
    for (std::size_t i = 0; i < batch; ++i) labels[i] = static_cast<int>((seed + i) % 5);

    const auto kd = kd_loss(logits, s, t, labels, dim);
    const double ce = ce_loss(logits, labels).value;
    const double mse = feature_mse(s, t, dim).value;
    CHECK(std::abs(kd.value - mse - ce) <= 1e-12);
    CHECK(kd.value >= ce);
    CHECK(kd_loss(logits, s, s, labels, dim).value == ce);
  }
}

TEST_CASE("loss gradients match central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t batch = 3;
    const std::size_t dim = 6;
    const auto logits = testing::gaussian(batch * 5, seed, 2.0);
    const auto s = testing::gaussian(batch * dim, seed + 1);
    const auto t = testing::gaussian(batch * dim, seed + 2);
    const std::vector<int> labels{static_cast<int>(seed % 5), 2, 4};

    const auto ce_num = numeric_grad(logits, [&](const auto& z) { return ce_loss(z, labels).value; });
    CHECK(rel_error(ce_loss(logits, labels).grad, ce_num) < 1e-4);

    const auto mse_num = numeric_grad(s, [&](const auto& z) { return feature_mse(z, t, dim).value; });
    CHECK(rel_error(feature_mse(s, t, dim).grad, mse_num) < 1e-4);

    const double lambda = 0.5 + static_cast<double>(seed) * 0.1;
    const auto kd = kd_loss(logits, s, t, labels, dim, lambda);
    const auto kd_logit_num =
        numeric_grad(logits, [&](const auto& z) { return kd_loss(z, s, t, labels, dim, lambda).value; });
    const auto kd_feat_num =
        numeric_grad(s, [&](const auto& z) { return kd_loss(logits, z, t, labels, dim, lambda).value; });
    CHECK(rel_error(kd.d_logits, kd_logit_num) < 1e-4);
    CHECK(rel_error(kd.d_feature, kd_feat_num) < 1e-4);
  }
}

TEST_CASE("empty batch") {
  const auto r = ce_loss({}, {});
  CHECK(r.value == 0.0);
  CHECK(r.grad.empty());
}
