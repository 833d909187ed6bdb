#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "earkd/errors.hpp"
#include "earkd/evaluation.hpp"

namespace earkd {
namespace {

constexpr std::array<std::pair<Strategy, std::string_view>, 5> kStrategyNames{{
    {Strategy::SupervisedScalp, "supervised-scalp"},
    {Strategy::SupervisedEar, "supervised-ear"},
    {Strategy::Transfer, "transfer"},
    {Strategy::KdOffline, "kd-offline"},
    {Strategy::KdOnline, "kd-online"},
}};

}  // namespace

std::string_view to_string(Strategy s) {
  for (const auto& [k, name] : kStrategyNames) {
    if (k == s) return name;
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (const auto& [k, n] : kStrategyNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

Domain evaluation_domain(Strategy s) {
  return s == Strategy::SupervisedScalp ? Domain::Scalp : Domain::Ear;
}

std::string_view to_string(Domain d) { return d == Domain::Scalp ? "scalp" : "ear"; }

std::optional<Domain> parse_domain(std::string_view name) {
  if (name == "scalp") return Domain::Scalp;
  if (name == "ear") return Domain::Ear;
  return std::nullopt;
}

}  // namespace earkd

namespace earkd::evaluation {
namespace {

ModelConfig fold_model_config(const ModelConfig& base, std::size_t fold_index) {
  ModelConfig cfg = base;
  cfg.seed = base.seed + fold_index;
  return cfg;
}

TrainConfig fold_train_config(const TrainConfig& base, std::size_t fold_index) {
  TrainConfig cfg = base;
  cfg.seed = base.seed + fold_index;
  return cfg;
}

}  // namespace

std::vector<int> predict(const SleepStager& model, std::span<const EpochTensor* const> epochs) {
  std::vector<int> out;
  out.reserve(epochs.size());
  for (const EpochTensor* e : epochs) {
    const auto r = model.forward(*e);
    out.push_back(static_cast<int>(argmax(r.logits)));
  }
  return out;
}

FoldResult run_fold(Strategy strategy, const ModelConfig& model_config,
                    std::span<const SubjectData> subjects, const Fold& fold, std::size_t fold_index,
                    const TrainConfig& train_config, std::shared_ptr<const SleepStager> teacher) {
  std::vector<SubjectData> train_subjects;
  const SubjectData* test = nullptr;
  for (const auto& s : subjects) {
    if (s.id == fold.test_subject) {
      test = &s;
    } else if (std::find(fold.train_subjects.begin(), fold.train_subjects.end(), s.id) !=
               fold.train_subjects.end()) {
      train_subjects.push_back(s);
    }
  }
  if (!test) throw Error(ErrorKind::InvalidConfig, "test subject " + fold.test_subject + " not found");
  if (train_subjects.size() != fold.train_subjects.size()) {
    throw Error(ErrorKind::InvalidConfig, "fold references unknown training subjects");
  }

  const ModelConfig mcfg = fold_model_config(model_config, fold_index);
  const TrainConfig tcfg = fold_train_config(train_config, fold_index);
  const auto paired = paired_view(train_subjects);

  TrainResult trained;
  switch (strategy) {
    case Strategy::SupervisedScalp:
    case Strategy::SupervisedEar: {
      const auto initial = build_stager(mcfg);
      trained = training::train_supervised(*initial, domain_view(paired, evaluation_domain(strategy)),
                                           tcfg);
      break;
    }
    case Strategy::Transfer:
      trained = training::train_transfer(mcfg, domain_view(paired, Domain::Scalp),
                                         domain_view(paired, Domain::Ear), tcfg);
      break;
    case Strategy::KdOffline: {
      if (!teacher) {
        const auto initial = build_stager(mcfg);
        auto t = training::train_supervised(*initial, domain_view(paired, Domain::Scalp), tcfg);
        teacher = std::shared_ptr<const SleepStager>(std::move(t.model));
      }
      trained = training::train_offline_kd(*teacher, mcfg, paired, tcfg);
      break;
    }
    case Strategy::KdOnline:
      trained = training::train_online_kd(mcfg, mcfg, paired, tcfg);
      teacher = std::shared_ptr<const SleepStager>(std::move(trained.companion));
      break;
  }

  const std::vector<const PairedEpoch*> test_view = [&] {
    std::vector<const PairedEpoch*> v;
    for (const auto& e : test->epochs) v.push_back(&e);
    return v;
  }();
  const EpochSet test_set = domain_view(test_view, evaluation_domain(strategy));

  FoldResult r;
  r.index = fold_index;
  r.fold = fold;
  r.predictions = predict(*trained.model, test_set.inputs);
  r.labels = test_set.labels;
  r.confusion = confusion(r.predictions, r.labels);
  r.metrics = metrics_report(r.confusion);
  r.loss_trace = std::move(trained.loss_trace);
  r.teacher_loss_trace = std::move(trained.teacher_loss_trace);
  r.model = std::shared_ptr<const SleepStager>(std::move(trained.model));
  r.teacher = std::move(teacher);
  return r;
}

LosoResult loso_evaluate(Strategy strategy, const ModelConfig& model_config,
                         std::span<const SubjectData> subjects, const TrainConfig& train_config,
                         const LosoOptions& options) {
  model_config.validate();
  train_config.validate();
  std::vector<std::string> ids;
  for (const auto& s : subjects) ids.push_back(s.id);
  const SplitPlan plan = dataset::loso_splits(ids);
  const std::size_t n_folds = plan.folds.size();

  std::vector<std::shared_ptr<const SleepStager>> teachers(n_folds);
  if (options.teachers && strategy == Strategy::KdOffline) {
    const LosoResult& prior = *options.teachers;
    if (prior.strategy != Strategy::SupervisedScalp || prior.folds.size() != n_folds) {
      throw Error(ErrorKind::InvalidConfig, "teacher run must be supervised-scalp over the same folds");
    }
    for (std::size_t k = 0; k < n_folds; ++k) {
      if (prior.folds[k].fold.test_subject != plan.folds[k].test_subject || !prior.folds[k].model) {
        throw Error(ErrorKind::InvalidConfig, "teacher fold " + std::to_string(k) + " does not match");
      }
      teachers[k] = prior.folds[k].model;
    }
  }

  LosoResult result;
  result.strategy = strategy;
  result.folds.resize(n_folds);

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  const auto worker = [&] {
    for (std::size_t k = next++; k < n_folds; k = next++) {
      try {
        if (options.log) {
          options.log(k, "training on " + std::to_string(plan.folds[k].train_subjects.size()) +
                             " subjects, testing on " + plan.folds[k].test_subject);
        }
        result.folds[k] = run_fold(strategy, model_config, subjects, plan.folds[k], k, train_config,
                                   teachers[k]);
        if (options.log) {
          options.log(k, "accuracy " + std::to_string(result.folds[k].metrics.accuracy));
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next = n_folds;
      }
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, n_folds);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  for (const auto& f : result.folds) {
    result.pooled_confusion += f.confusion;
    result.mean_fold_accuracy += f.metrics.accuracy;
    result.mean_fold_kappa += f.metrics.kappa;
  }
  result.mean_fold_accuracy /= static_cast<double>(n_folds);
  result.mean_fold_kappa /= static_cast<double>(n_folds);
  result.pooled = metrics_report(result.pooled_confusion);
  return result;
}

}  // namespace earkd::evaluation
