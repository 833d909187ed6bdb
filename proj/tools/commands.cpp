#include "commands.hpp"

#include <cstdlib>
#include <iostream>
#include <sstream>

#include "earkd/checkpoint.hpp"
#include "earkd/config.hpp"
#include "earkd/errors.hpp"
#include "earkd/evaluation.hpp"
#include "earkd/preprocess.hpp"
#include "earkd/synth.hpp"
#include "manifest.hpp"
#include "run_io.hpp"

namespace earkd::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void usage(const std::string& what) { throw Error(ErrorKind::UsageError, what); }

Strategy strategy_flag(const std::string& name) {
  const auto s = parse_strategy(name);
  if (!s) usage("unknown strategy '" + name + "'");
  return *s;
}

ExperimentConfig experiment_config(const std::optional<Path>& path,
                                   const std::optional<std::string>& arch) {
  ExperimentConfig cfg = path ? load_experiment_config(*path) : ExperimentConfig{};
  if (arch) {
    const auto a = parse_arch(*arch);
    if (!a) usage("unknown architecture '" + *arch + "'");
    cfg.model.arch = *a;
  }
  return cfg;
}

// The input shape is a property of the data, not of the config file.
void fit_input_shape(ModelConfig& model, const std::vector<SubjectData>& subjects) {
  for (const auto& s : subjects) {
    if (s.epochs.empty()) continue;
    model.epoch_samples = s.epochs.front().scalp.samples;
    model.in_channels = s.epochs.front().scalp.channels;
    return;
  }
  throw Error(ErrorKind::EmptyDataset, "no epochs in the data directory");
}

const Fold& select_fold(const SplitPlan& plan, std::size_t fold) {
  if (fold >= plan.folds.size()) {
    usage("--fold " + std::to_string(fold) + " out of range; the data has " +
          std::to_string(plan.folds.size()) + " folds");
  }
  return plan.folds[fold];
}

SplitPlan plan_for(const std::vector<SubjectData>& subjects) {
  std::vector<std::string> ids;
  for (const auto& s : subjects) ids.push_back(s.id);
  return dataset::loso_splits(ids);
}

const SubjectData& find_subject(const std::vector<SubjectData>& subjects, const std::string& id) {
  for (const auto& s : subjects) {
    if (s.id == id) return s;
  }
  throw Error(ErrorKind::IOError, "subject " + id + " not found");
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

std::string loss_csv(const std::vector<double>& loss, const std::vector<double>& teacher_loss) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss" << (teacher_loss.empty() ? "" : ",teacher_loss") << '\n';
  const std::size_t n = std::max(loss.size(), teacher_loss.size());
  for (std::size_t e = 0; e < n; ++e) {
    out << e + 1 << ',';
    if (e < loss.size()) out << loss[e];
    if (!teacher_loss.empty()) out << ',' << (e < teacher_loss.size() ? teacher_loss[e] : 0.0);
    out << '\n';
  }
  return out.str();
}

json report_config(const ExperimentConfig& cfg) { return json::parse(to_json(cfg)); }

std::vector<const EpochTensor*> domain_inputs(const SubjectData& s, Domain d) {
  std::vector<const EpochTensor*> out;
  for (const auto& e : s.epochs) out.push_back(d == Domain::Scalp ? &e.scalp : &e.ear);
  return out;
}

std::vector<int> labels_of(const SubjectData& s) {
  std::vector<int> out;
  for (const auto& e : s.epochs) out.push_back(code(e.label));
  return out;
}

}  // namespace

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  if (const char* env = std::getenv("EARKD_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used != std::string_view(env).size()) throw std::invalid_argument(env);
      return v;
    } catch (const std::exception&) {
      usage(std::string("EARKD_SEED is not an unsigned integer: '") + env + "'");
    }
  }
  return flag.value_or(fallback);
}

void run_synth(const SynthOptions& o, const Invocation& inv) {
  const synth::SynthConfig cfg = o.config ? synth::load_synth_config(*o.config) : synth::SynthConfig{};
  cfg.validate();
  const std::uint64_t seed = resolve_seed(o.seed, 0);
  RunManifest manifest("synth", inv.arguments);
  manifest.set_seed(seed);
  manifest.set_config(json::parse(synth::to_json(cfg)));
  if (o.config) manifest.add_input(*o.config);

  for (std::size_t i = 0; i < cfg.n_subjects; ++i) {
    const auto subject = synth::synth_subject_electrodes(cfg, seed, i);
    const fs::path dir = o.out / subject.id;
    dataset::write_recording_container(dir / kScalpDir, subject.scalp);
    dataset::write_recording_container(dir / kEarDir, subject.ear);
    dataset::write_hypnogram(dir / kHypnogramFile, subject.hypnogram);
    manifest.add_output(dir);
    std::cerr << "synth: wrote " << dir.string() << '\n';
  }
  manifest.write(o.out);
}

void run_preprocess(const PreprocessOptions& o, const Invocation& inv) {
  RunManifest manifest("preprocess", inv.arguments);
  manifest.add_input(o.in);
  json subjects = json::object();
  json rejected_recordings = json::array();
  json reasons = json::object();

  for (const auto& dir : subject_dirs(o.in)) {
    const std::string id = dir.filename().string();
    const auto labels = dataset::load_hypnogram(dir / kHypnogramFile);
    const Recording scalp = signal::bandpass_filter(dataset::load_recording_container(dir / kScalpDir));
    const Recording ear = signal::bandpass_filter(dataset::load_recording_container(dir / kEarDir));
    const fs::path out_dir = o.out / id;

    json report = {{"subject", id}};
    std::optional<DerivationSet> ear_derived;
    try {
      const auto rejection = preprocess::reject_channels(preprocess::pairwise_band_power(ear));
      const auto usable = rejection.usable();
      report["channels"] = rejection.channel_ids;
      report["channel_medians"] = rejection.channel_medians;
      report["rejected"] = rejection.rejected;
      report["usable"] = usable;
      report["log_median"] = rejection.log_median;
      report["log_mad"] = rejection.log_mad;
      report["threshold"] = rejection.threshold_value;
      ear_derived = preprocess::ear_derivations(ear, usable);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::RecordingRejected && e.kind() != ErrorKind::AllChannelsRejected) throw;
      rejected_recordings.push_back(id);
      reasons[id] = e.what();
      report["recording_rejected"] = e.what();
    }
    write_text(out_dir / "rejection_report.json", report.dump(2) + '\n');
    manifest.add_output(out_dir / "rejection_report.json");
    subjects[id] = report.contains("rejected") ? report["rejected"] : json::array();

    if (!ear_derived) {
      std::cerr << "preprocess: " << id << " rejected: " << reasons[id].get<std::string>() << '\n';
      continue;
    }
    const auto scalp_derived = preprocess::scalp_derivations(scalp);
    dataset::write_recording_container(out_dir / kScalpDir, scalp_derived.as_recording());
    dataset::write_recording_container(out_dir / kEarDir, ear_derived->as_recording());
    dataset::write_hypnogram(out_dir / kHypnogramFile, labels);
    manifest.add_output(out_dir / kScalpDir);
    manifest.add_output(out_dir / kEarDir);
    manifest.add_output(out_dir / kHypnogramFile);
    std::cerr << "preprocess: " << id << " ok\n";
  }

  const json summary{{"rejected_channels", subjects},
                     {"rejected_recordings", rejected_recordings},
                     {"reasons", reasons}};
  write_text(o.out / "rejection_report.json", summary.dump(2) + '\n');
  manifest.add_output(o.out / "rejection_report.json");
  manifest.write(o.out);
}

void run_train(const TrainOptions& o, const Invocation& inv) {
  const Strategy strategy = strategy_flag(o.strategy);
  if (strategy == Strategy::KdOffline && !o.teacher) {
    usage("kd-offline requires --teacher <checkpoint of a supervised-scalp model>");
  }
  if (strategy != Strategy::KdOffline && o.teacher) usage("--teacher only applies to kd-offline");

  ExperimentConfig cfg = experiment_config(o.config, o.arch);
  const std::uint64_t seed = resolve_seed(o.seed, cfg.train.seed);
  cfg.train.seed = seed;
  cfg.model.seed = seed;

  const auto subjects = load_subjects(o.data);
  fit_input_shape(cfg.model, subjects);
  const auto plan = plan_for(subjects);
  const Fold& fold = select_fold(plan, o.fold);

  std::shared_ptr<const SleepStager> teacher;
  if (o.teacher) teacher = checkpoint::load(*o.teacher, cfg.model).model;

  RunManifest manifest("train", inv.arguments);
  manifest.set_seed(seed);
  manifest.set_config(report_config(cfg));
  manifest.add_input(o.data);
  if (o.config) manifest.add_input(*o.config);
  if (o.teacher) manifest.add_input(*o.teacher);

  std::cerr << "train: " << to_string(strategy) << " fold " << o.fold << ", " << fold.train_subjects.size()
            << " training subjects, held out " << fold.test_subject << '\n';
  const auto result = evaluation::run_fold(strategy, cfg.model, subjects, fold, o.fold, cfg.train, teacher);

  const checkpoint::Metadata meta{{"strategy", std::string(to_string(strategy))},
                                  {"fold", std::to_string(o.fold)},
                                  {"test_subject", fold.test_subject},
                                  {"train_subjects", join(fold.train_subjects, ',')},
                                  {"seed", std::to_string(seed)}};
  fs::create_directories(o.out);
  checkpoint::save(o.out / "model.ckpt", *result.model, meta);
  manifest.add_output(o.out / "model.ckpt");
  if (strategy == Strategy::KdOnline && result.teacher) {
    auto teacher_meta = meta;
    teacher_meta["strategy"] = "supervised-scalp";
    teacher_meta["role"] = "online-teacher";
    checkpoint::save(o.out / "teacher.ckpt", *result.teacher, teacher_meta);
    manifest.add_output(o.out / "teacher.ckpt");
  }
  write_text(o.out / "loss.csv", loss_csv(result.loss_trace, result.teacher_loss_trace));
  manifest.add_output(o.out / "loss.csv");
  manifest.write(o.out);
}

void run_evaluate(const EvaluateOptions& o, const Invocation& inv) {
  EmbedMethod method = EmbedMethod::Pca;
  if (o.embed == "sne") {
    method = EmbedMethod::Sne;
  } else if (o.embed != "pca") {
    usage("--embed must be pca or sne");
  }

  auto loaded = o.config ? checkpoint::load(o.checkpoint, load_experiment_config(*o.config).model)
                         : checkpoint::load(o.checkpoint);
  const SleepStager& model = *loaded.model;
  const auto subjects = load_subjects(o.data);
  const auto plan = plan_for(subjects);
  const Fold& fold = select_fold(plan, o.fold);
  const SubjectData& test = find_subject(subjects, fold.test_subject);

  const ModelConfig& mc = model.config();
  for (const auto& e : test.epochs) {
    if (e.scalp.samples != mc.epoch_samples || e.scalp.channels != mc.in_channels) {
      throw Error(ErrorKind::CheckpointMismatch,
                  "checkpoint expects " + std::to_string(mc.in_channels) + " x " +
                      std::to_string(mc.epoch_samples) + " epochs, data has " +
                      std::to_string(e.scalp.channels) + " x " + std::to_string(e.scalp.samples));
    }
  }

  std::optional<Strategy> strategy;
  if (const auto it = loaded.metadata.find("strategy"); it != loaded.metadata.end()) {
    strategy = parse_strategy(it->second);
  }
  const Domain domain = strategy ? evaluation_domain(*strategy) : Domain::Ear;

  const auto inputs = domain_inputs(test, domain);
  const auto labels = labels_of(test);
  const auto predictions = evaluation::predict(model, inputs);
  const auto cm = evaluation::confusion(predictions, labels);

  json metrics = metrics_json(evaluation::metrics_report(cm));
  metrics["strategy"] = strategy ? json(std::string(to_string(*strategy))) : json(nullptr);
  metrics["arch"] = std::string(to_string(mc.arch));
  metrics["domain"] = std::string(to_string(domain));
  metrics["fold"] = o.fold;
  metrics["test_subject"] = fold.test_subject;

  RunManifest manifest("evaluate", inv.arguments);
  manifest.add_input(o.checkpoint);
  manifest.add_input(o.data);
  if (o.config) manifest.add_input(*o.config);

  if (o.teacher) {
    const auto teacher = checkpoint::load(*o.teacher, mc).model;
    manifest.add_input(*o.teacher);
    const auto teacher_features =
        evaluation::extract_features(*teacher, domain_inputs(test, Domain::Scalp), labels, Domain::Scalp);
    const auto features = evaluation::extract_features(model, inputs, labels, domain);
    metrics["feature_distance"] = evaluation::mean_squared_distance(teacher_features, features);
    const std::uint64_t seed = resolve_seed(o.seed, 0);
    manifest.set_seed(seed);
    const auto embedding = evaluation::embed_2d(evaluation::concat(teacher_features, features), method, seed);
    write_text(o.out / "embedding.csv", embedding_csv(embedding));
    manifest.add_output(o.out / "embedding.csv");
  }

  write_text(o.out / "metrics.json", metrics.dump(2) + '\n');
  write_text(o.out / "confusion.csv", confusion_csv(cm));
  manifest.add_output(o.out / "metrics.json");
  manifest.add_output(o.out / "confusion.csv");
  manifest.write(o.out);
  std::cout << "accuracy " << metrics["accuracy"].get<double>() << " kappa " << metrics["kappa"].get<double>()
            << '\n';
}

void run_loso(const LosoOptions& o, const Invocation& inv) {
  const Strategy strategy = strategy_flag(o.strategy);
  ExperimentConfig cfg = experiment_config(o.config, o.arch);
  const std::uint64_t seed = resolve_seed(o.seed, cfg.train.seed);
  cfg.train.seed = seed;
  cfg.model.seed = seed;
  const auto subjects = load_subjects(o.data);
  fit_input_shape(cfg.model, subjects);

  evaluation::LosoOptions options;
  options.threads = o.threads;
  options.log = [](std::size_t fold, const std::string& message) {
    std::cerr << "loso: fold " << fold << ": " << message << '\n';
  };
  const auto result = evaluation::loso_evaluate(strategy, cfg.model, subjects, cfg.train, options);

  json metrics = metrics_json(result.pooled);
  metrics["strategy"] = std::string(to_string(strategy));
  metrics["arch"] = std::string(to_string(cfg.model.arch));
  metrics["domain"] = std::string(to_string(evaluation_domain(strategy)));
  metrics["aggregation"] = "pooled";
  metrics["mean_fold_accuracy"] = result.mean_fold_accuracy;
  metrics["mean_fold_kappa"] = result.mean_fold_kappa;
  json folds = json::array();
  RunManifest manifest("loso", inv.arguments);
  for (const auto& f : result.folds) {
    folds.push_back({{"fold", f.index},
                     {"test_subject", f.fold.test_subject},
                     {"epochs", f.metrics.epochs},
                     {"accuracy", f.metrics.accuracy},
                     {"kappa", f.metrics.kappa}});
    const fs::path loss = o.out / ("loss_fold" + std::to_string(f.index) + ".csv");
    write_text(loss, loss_csv(f.loss_trace, f.teacher_loss_trace));
    manifest.add_output(loss);
  }
  metrics["folds"] = folds;

  write_text(o.out / "metrics.json", metrics.dump(2) + '\n');
  write_text(o.out / "confusion.csv", confusion_csv(result.pooled_confusion));
  manifest.set_seed(seed);
  manifest.set_config(report_config(cfg));
  manifest.add_input(o.data);
  if (o.config) manifest.add_input(*o.config);
  manifest.add_output(o.out / "metrics.json");
  manifest.add_output(o.out / "confusion.csv");
  manifest.write(o.out);
  std::cout << to_string(strategy) << " pooled accuracy " << result.pooled.accuracy << " kappa "
            << result.pooled.kappa << '\n';
}

}  // namespace earkd::cli
