#include <set>

#include "earkd/training.hpp"
#include "gradcheck.hpp"
#include "test_support.hpp"

using namespace earkd;
using namespace earkd::training;

namespace {

// Two separable classes: scalp carries a clean tone whose frequency encodes
// the label, ear carries the same tone in noise.
std::vector<PairedEpoch> toy_pairs(std::size_t n, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 6.28);
  std::vector<PairedEpoch> out;
  for (std::size_t i = 0; i < n; ++i) {
    const Stage label = i % 2 ? Stage::N3 : Stage::W;
    const double freq = label == Stage::N3 ? 2.0 : 11.0;
    PairedEpoch p{EpochTensor(samples, 3), EpochTensor(samples, 3), label, "toy"};
    for (std::size_t c = 0; c < 3; ++c) {
      const double ph = phase(rng);
      for (std::size_t t = 0; t < samples; ++t) {
        const double s = std::sin(2.0 * M_PI * freq * static_cast<double>(t) / 100.0 + ph);
        p.scalp.at(t, c) = s + 0.1 * noise(rng);
        p.ear.at(t, c) = 0.5 * s + noise(rng);
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<const PairedEpoch*> pointers(const std::vector<PairedEpoch>& v) {
  std::vector<const PairedEpoch*> out;
  for (const auto& p : v) out.push_back(&p);
  return out;
}

bool same_parameters(const SleepStager& a, const SleepStager& b) {
  if (a.parameters().size() != b.parameters().size()) return false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i) {
    if (a.parameters()[i].values != b.parameters()[i].values) return false;
  }
  return true;
}

double train_accuracy(const SleepStager& m, const EpochSet& data) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    hit += static_cast<int>(argmax(m.forward(*data.inputs[i]).logits)) == data.labels[i];
  }
  return static_cast<double>(hit) / static_cast<double>(data.size());
}

TrainConfig quick(std::size_t epochs, std::uint64_t seed = 0) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 8;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.learning_rate == 1e-3);
  CHECK(c.beta1 == 0.9);
  CHECK(c.beta2 == 0.999);
  CHECK(c.epochs == 100);
  CHECK(c.batch_size == 32);
  CHECK(c.kd_weight == 1.0);
  c.learning_rate = 0.0;
  CHECK_ERROR_KIND(c.validate(), ErrorKind::InvalidConfig);
  c = {};
  c.batch_size = 0;
  CHECK_ERROR_KIND(c.validate(), ErrorKind::InvalidConfig);
}

TEST_CASE("epoch order is a seeded permutation") {
  const auto a = epoch_order(100, 3, 0);
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 100);
  CHECK(epoch_order(100, 3, 0) == a);
  CHECK(epoch_order(100, 3, 1) != a);
  CHECK(epoch_order(100, 4, 0) != a);
}

TEST_CASE("Adam step matches the update rule") {
  ParameterSet params{{"w", {3}, {0.5, -1.0, 2.0}}};
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  Adam adam(params, cfg);
  const Gradients g1{{0.2, -0.4, 0.0}};
  const Gradients g2{{-0.1, 0.3, 1.0}};
  adam.step(params, g1);
  adam.step(params, g2);

  std::vector<double> w{0.5, -1.0, 2.0};
  for (std::size_t i = 0; i < 3; ++i) {
    double m = 0.0;
    double v = 0.0;
    int t = 0;
    for (const auto* g : {&g1, &g2}) {
      ++t;
      m = 0.9 * m + 0.1 * (*g)[0][i];
      v = 0.999 * v + 0.001 * (*g)[0][i] * (*g)[0][i];
      const double mh = m / (1.0 - std::pow(0.9, t));
      const double vh = v / (1.0 - std::pow(0.999, t));
      w[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK(params[0].values[i] == doctest::Approx(w[i]).epsilon(1e-14));
  }
  CHECK(adam.steps() == 2);
}

TEST_CASE("supervised training") {
  const auto cfg = testing::small_model(Arch::Cnn, 1);
  const auto pairs = toy_pairs(40, cfg.epoch_samples, 1);
  const auto view = pointers(pairs);
  const auto scalp = domain_view(view, Domain::Scalp);
  const auto initial = build_stager(cfg);

  SUBCASE("separable toy data is learned") {
    const auto r = train_supervised(*initial, scalp, quick(100));
    CHECK(r.loss_trace.size() == 100);
    CHECK(train_accuracy(*r.model, scalp) > 0.95);
  }
  SUBCASE("zero epochs leaves the model unchanged") {
    const auto r = train_supervised(*initial, scalp, quick(0));
    CHECK(same_parameters(*r.model, *initial));
    CHECK(r.loss_trace.empty());
  }
  SUBCASE("same seed reproduces parameters") {
    const auto a = train_supervised(*initial, scalp, quick(3, 5));
    const auto b = train_supervised(*initial, scalp, quick(3, 5));
    CHECK(same_parameters(*a.model, *b.model));
    CHECK(a.loss_trace == b.loss_trace);
    const auto c = train_supervised(*initial, scalp, quick(3, 6));
    CHECK_FALSE(same_parameters(*a.model, *c.model));
  }
  SUBCASE("empty data") {
    CHECK_ERROR_KIND(train_supervised(*initial, EpochSet{}, quick(1)), ErrorKind::EmptyDataset);
  }
}

TEST_CASE("transfer training") {
  const auto cfg = testing::small_model(Arch::Cnn, 2);
  const auto pairs = toy_pairs(24, cfg.epoch_samples, 2);
  const auto view = pointers(pairs);
  const auto scalp = domain_view(view, Domain::Scalp);
  const auto ear = domain_view(view, Domain::Ear);

  const auto r = train_transfer(cfg, scalp, ear, quick(3));
  CHECK(r.loss_trace.size() == 6);
  // Phase two starts from the phase-one result.
  const auto phase1 = train_supervised(*build_stager(cfg), scalp, quick(3));
  CHECK(same_parameters(*r.companion, *phase1.model));
  const auto phase2 = train_supervised(*phase1.model, ear, quick(3));
  CHECK(same_parameters(*r.model, *phase2.model));

  CHECK_ERROR_KIND(train_transfer(cfg, scalp, EpochSet{}, quick(1)), ErrorKind::EmptyDataset);
}

TEST_CASE("offline distillation") {
  const auto cfg = testing::small_model(Arch::Cnn, 3);
  const auto pairs = toy_pairs(24, cfg.epoch_samples, 3);
  const auto view = pointers(pairs);
  const auto teacher = train_supervised(*build_stager(cfg), domain_view(view, Domain::Scalp), quick(3)).model;

  const auto before = parameter_hash(teacher->parameters());
  std::vector<std::vector<double>> features_before;
  for (const auto* p : view) features_before.push_back(teacher->forward(p->scalp).feature);

  const auto r = train_offline_kd(*teacher, cfg, view, quick(3));
  CHECK(parameter_hash(teacher->parameters()) == before);
  for (std::size_t i = 0; i < view.size(); ++i) {
    CHECK(teacher->forward(view[i]->scalp).feature == features_before[i]);
  }
  CHECK(r.loss_trace.size() == 3);

  const auto again = train_offline_kd(*teacher, cfg, view, quick(3));
  CHECK(same_parameters(*r.model, *again.model));

  auto wide = cfg;
  wide.feature_dim = 16;
  CHECK_ERROR_KIND(train_offline_kd(*teacher, wide, view, quick(1)), ErrorKind::FeatureShapeMismatch);
}

TEST_CASE("online distillation") {
  const auto cfg = testing::small_model(Arch::Cnn, 4);
  const auto pairs = toy_pairs(24, cfg.epoch_samples, 4);
  const auto view = pointers(pairs);
  const auto scalp = domain_view(view, Domain::Scalp);

  SUBCASE("both models move") {
    const auto e0 = train_online_kd(cfg, cfg, view, quick(0));
    const auto e1 = train_online_kd(cfg, cfg, view, quick(1));
    CHECK_FALSE(same_parameters(*e0.model, *e1.model));
    CHECK_FALSE(same_parameters(*e0.companion, *e1.companion));
    CHECK(e1.loss_trace.size() == 1);
    CHECK(e1.teacher_loss_trace.size() == 1);
  }
  SUBCASE("teacher trajectory equals scalp supervision") {
    OnlineOptions teacher_only;
    teacher_only.train_student = false;
    const auto solo = train_online_kd(cfg, cfg, view, quick(3), teacher_only);
    const auto supervised = train_supervised(*build_stager(cfg), scalp, quick(3));
    CHECK(same_parameters(*solo.companion, *supervised.model));
    CHECK(solo.teacher_loss_trace == supervised.loss_trace);
    // The student's loss never reaches the teacher.
    const auto joint = train_online_kd(cfg, cfg, view, quick(3));
    CHECK(same_parameters(*joint.companion, *supervised.model));
  }
  SUBCASE("deterministic") {
    const auto a = train_online_kd(cfg, cfg, view, quick(2, 9));
    const auto b = train_online_kd(cfg, cfg, view, quick(2, 9));
    CHECK(same_parameters(*a.model, *b.model));
    CHECK(a.loss_trace == b.loss_trace);
  }
  SUBCASE("errors") {
    auto wide = cfg;
    wide.feature_dim = 16;
    CHECK_ERROR_KIND(train_online_kd(cfg, wide, view, quick(1)), ErrorKind::FeatureShapeMismatch);
    CHECK_ERROR_KIND(train_online_kd(cfg, cfg, {}, quick(1)), ErrorKind::EmptyDataset);
  }
}
