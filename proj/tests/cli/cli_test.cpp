#include <doctest.h>
#include <json.hpp>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "earkd/checkpoint.hpp"
#include "earkd/dataset.hpp"
#include "earkd/evaluation.hpp"
#include "earkd/models.hpp"
#include "earkd/preprocess.hpp"
#include "earkd/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace earkd;

namespace {

struct Scratch {
  fs::path root = fs::temp_directory_path() / ("earkd_cli_test_" + std::to_string(::getpid()));
  Scratch() { fs::create_directories(root); }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(root, ec);
  }
};

const fs::path& scratch() {
  static Scratch s;
  return s.root;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

struct Outcome {
  int code = -1;
  std::string output;
};

Outcome cli(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const fs::path log = scratch() / ("log_" + std::to_string(counter++) + ".txt");
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" EARKD_CLI_PATH "' " + args + " > '" +
                          log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  o.output = slurp(log);
  return o;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Every regular file under `dir` except run manifests (they record wall time).
std::map<std::string, std::string> tree_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() != "manifest.json") {
      out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
  }
  return out;
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

const fs::path& small_synth_config() {
  static const fs::path p = [] {
    const fs::path path = scratch() / "synth.json";
    spit(path, R"({"n_subjects": 3, "epochs_per_subject": 12})");
    return path;
  }();
  return p;
}

const fs::path& train_config() {
  static const fs::path p = [] {
    const fs::path path = scratch() / "experiment.json";
    spit(path, R"({"train": {"epochs": 2, "batch_size": 8}, "model": {"width": 4, "feature_dim": 16}})");
    return path;
  }();
  return p;
}

// Three raw subjects and their preprocessed form, shared by the tests below.
const fs::path& raw_cohort() {
  static const fs::path p = [] {
    const fs::path out = scratch() / "raw";
    REQUIRE(cli("synth --config " + q(small_synth_config()) + " --out " + q(out) + " --seed 0").code == 0);
    return out;
  }();
  return p;
}

const fs::path& prepared_cohort() {
  static const fs::path p = [] {
    const fs::path out = scratch() / "prep";
    REQUIRE(cli("preprocess --in " + q(raw_cohort()) + " --out " + q(out)).code == 0);
    return out;
  }();
  return p;
}

// Trained and evaluated fold-0 runs for every strategy, keyed by strategy.
const std::map<std::string, fs::path>& evaluated_runs() {
  static const std::map<std::string, fs::path> runs = [] {
    std::map<std::string, fs::path> out;
    const fs::path base = scratch() / "runs";
    const std::string common = " --data " + q(prepared_cohort()) + " --fold 0 --config " + q(train_config());
    const fs::path teacher = base / "supervised-scalp" / "model.ckpt";
    for (const std::string s : {"supervised-scalp", "supervised-ear", "transfer", "kd-offline", "kd-online"}) {
      const fs::path train_dir = base / s;
      const std::string extra = s == "kd-offline" ? " --teacher " + q(teacher) : "";
      const auto t = cli("train --strategy " + s + common + " --out " + q(train_dir) + extra);
      REQUIRE_MESSAGE(t.code == 0, t.output);
      const fs::path eval_dir = base / (s + "-eval");
      const std::string embed = s == "supervised-scalp" ? "" : " --teacher " + q(teacher);
      const auto e = cli("evaluate --checkpoint " + q(train_dir / "model.ckpt") + " --data " +
                           q(prepared_cohort()) + " --fold 0 --out " + q(eval_dir) + embed);
      REQUIRE_MESSAGE(e.code == 0, e.output);
      out[s] = eval_dir;
    }
    return out;
  }();
  return runs;
}

// The subset of JSON Schema used by docs/metrics.schema.json.
void validate(const json& value, const json& schema, const std::string& where,
              std::vector<std::string>& errors) {
  if (schema.contains("type")) {
    std::vector<std::string> types;
    if (schema["type"].is_array()) {
      for (const auto& t : schema["type"]) types.push_back(t);
    } else {
      types.push_back(schema["type"]);
    }
    const auto matches = [&](const std::string& t) {
      if (t == "object") return value.is_object();
      if (t == "array") return value.is_array();
      if (t == "string") return value.is_string();
      if (t == "boolean") return value.is_boolean();
      if (t == "null") return value.is_null();
      if (t == "integer") return value.is_number_integer();
      if (t == "number") return value.is_number();
      return false;
    };
    if (std::none_of(types.begin(), types.end(), matches)) {
      errors.push_back(where + ": wrong type");
      return;
    }
  }
  if (schema.contains("enum")) {
    const auto& options = schema["enum"];
    if (std::find(options.begin(), options.end(), value) == options.end()) {
      errors.push_back(where + ": not in enum");
    }
  }
  if (value.is_number()) {
    if (schema.contains("minimum") && value.get<double>() < schema["minimum"].get<double>()) {
      errors.push_back(where + ": below minimum");
    }
    if (schema.contains("maximum") && value.get<double>() > schema["maximum"].get<double>()) {
      errors.push_back(where + ": above maximum");
    }
  }
  if (value.is_object()) {
    for (const auto& key : schema.value("required", json::array())) {
      if (!value.contains(key.get<std::string>())) errors.push_back(where + ": missing " + key.get<std::string>());
    }
    const json props = schema.value("properties", json::object());
    for (const auto& [key, item] : value.items()) {
      if (props.contains(key)) {
        validate(item, props[key], where + "." + key, errors);
      } else if (schema.value("additionalProperties", true) == false) {
        errors.push_back(where + ": unexpected " + key);
      }
    }
  }
  if (value.is_array() && schema.contains("items")) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      validate(value[i], schema["items"], where + "[" + std::to_string(i) + "]", errors);
    }
  }
}

std::vector<std::string> schema_errors(const json& value) {
  std::vector<std::string> errors;
  validate(value, read_json(EARKD_SCHEMA_PATH), "$", errors);
  return errors;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string line; std::getline(ss, line);) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

// Copies one raw subject into its own cohort so it can be tampered with.
fs::path single_subject_copy(const std::string& name) {
  const fs::path dir = scratch() / name;
  fs::create_directories(dir);
  fs::copy(raw_cohort() / "S01", dir / "S01", fs::copy_options::recursive);
  return dir;
}

}  // namespace

TEST_CASE("exit codes: usage errors are 2") {
  CHECK(cli("").code == 2);
  CHECK(cli("no-such-command").code == 2);
  CHECK(cli("train --strategy supervised-ear").code == 2);
  const auto bad = cli("train --strategy distill --data " + q(prepared_cohort()) + " --fold 0 --out " +
                         q(scratch() / "bad_strategy"));
  CHECK(bad.code == 2);
  CHECK(bad.output.find("UsageError") != std::string::npos);
  CHECK(cli("--help").code == 0);
}

TEST_CASE("synth with the default subject count writes eight subjects") {
  const fs::path cfg = scratch() / "short.json";
  spit(cfg, R"({"epochs_per_subject": 12})");
  const fs::path out = scratch() / "synth_default";
  REQUIRE(cli("synth --config " + q(cfg) + " --out " + q(out) + " --seed 0").code == 0);
  std::size_t subjects = 0;
  for (const auto& e : fs::directory_iterator(out)) subjects += e.is_directory();
  CHECK(subjects == 8);
  CHECK(fs::exists(out / "manifest.json"));
}

TEST_CASE("synth is reproducible and EARKD_SEED overrides --seed") {
  const fs::path a = scratch() / "seed_a";
  const fs::path b = scratch() / "seed_b";
  const fs::path env = scratch() / "seed_env";
  const std::string cfg = " --config " + q(small_synth_config());
  REQUIRE(cli("synth" + cfg + " --out " + q(a) + " --seed 2").code == 0);
  REQUIRE(cli("synth" + cfg + " --out " + q(b) + " --seed 2").code == 0);
  REQUIRE(cli("synth" + cfg + " --out " + q(env) + " --seed 1", "EARKD_SEED=2").code == 0);
  const auto bytes = tree_bytes(a);
  CHECK(bytes.size() > 3);
  CHECK(bytes == tree_bytes(b));
  CHECK(bytes == tree_bytes(env));
  CHECK(tree_bytes(raw_cohort()) != bytes);

  const auto manifest = read_json(a / "manifest.json");
  CHECK(manifest["seed"] == 2);
  CHECK(manifest["command"] == "synth");
  CHECK(read_json(env / "manifest.json")["seed"] == 2);
  CHECK(cli("synth --out " + q(scratch() / "seed_bad"), "EARKD_SEED=abc").code == 2);
}

TEST_CASE("synth with a missing config file fails with ConfigNotFound") {
  const auto r = cli("synth --config " + q(scratch() / "absent.json") + " --out " + q(scratch() / "never"));
  CHECK(r.code == 1);
  CHECK(r.output.find("ConfigNotFound") != std::string::npos);
}

TEST_CASE("preprocess of clean subjects rejects no channel") {
  const auto summary = read_json(prepared_cohort() / "rejection_report.json");
  CHECK(summary["rejected_recordings"].empty());
  REQUIRE(summary["rejected_channels"].size() == 3);
  for (const auto& [subject, rejected] : summary["rejected_channels"].items()) {
    CAPTURE(subject);
    CHECK(rejected.empty());
    const auto per_subject = read_json(prepared_cohort() / subject / "rejection_report.json");
    CHECK(per_subject["usable"].size() == 12);
    CHECK(fs::exists(prepared_cohort() / subject / "ear"));
  }
  CHECK(fs::exists(prepared_cohort() / "manifest.json"));
}

TEST_CASE("preprocess rejects a channel with 100x power") {
  const fs::path in = single_subject_copy("noisy_in");
  const fs::path ear_dir = in / "S01" / "ear";
  auto ear = dataset::load_recording_container(ear_dir);
  for (double& v : ear.channels[ear.index_of("ELG")]) v *= 10.0;
  fs::remove_all(ear_dir);
  dataset::write_recording_container(ear_dir, ear);

  const fs::path out = scratch() / "noisy_out";
  REQUIRE(cli("preprocess --in " + q(in) + " --out " + q(out)).code == 0);
  const auto summary = read_json(out / "rejection_report.json");
  CHECK(summary["rejected_channels"]["S01"] == json::array({"ELG"}));
  CHECK(summary["rejected_recordings"].empty());
}

TEST_CASE("preprocess lists a recording without right canal electrodes as rejected") {
  const fs::path in = single_subject_copy("canal_in");
  const fs::path ear_dir = in / "S01" / "ear";
  auto ear = dataset::load_recording_container(ear_dir);
  for (const char* name : {"ERA", "ERB"}) {
    const auto i = ear.index_of(name);
    ear.channel_ids.erase(ear.channel_ids.begin() + static_cast<std::ptrdiff_t>(i));
    ear.channels.erase(ear.channels.begin() + static_cast<std::ptrdiff_t>(i));
  }
  fs::remove_all(ear_dir);
  dataset::write_recording_container(ear_dir, ear);

  const fs::path out = scratch() / "canal_out";
  REQUIRE(cli("preprocess --in " + q(in) + " --out " + q(out)).code == 0);
  const auto summary = read_json(out / "rejection_report.json");
  CHECK(summary["rejected_recordings"] == json::array({"S01"}));
  CHECK(summary["reasons"]["S01"].get<std::string>().find("RecordingRejected") != std::string::npos);
  CHECK_FALSE(fs::exists(out / "S01" / "ear"));
}

TEST_CASE("kd-offline without a teacher names the missing flag") {
  const auto r = cli("train --strategy kd-offline --data " + q(prepared_cohort()) + " --fold 0 --out " +
                       q(scratch() / "no_teacher"));
  CHECK(r.code == 2);
  CHECK(r.output.find("--teacher") != std::string::npos);
  const auto misplaced = cli("train --strategy supervised-ear --data " + q(prepared_cohort()) +
                               " --fold 0 --out " + q(scratch() / "misplaced") + " --teacher x.ckpt");
  CHECK(misplaced.code == 2);
}

TEST_CASE("a fold trains on every subject but the held-out one") {
  const auto& runs = evaluated_runs();
  const auto loaded = checkpoint::load(scratch() / "runs" / "supervised-ear" / "model.ckpt");
  const std::string held_out = loaded.metadata.at("test_subject");
  const std::string train = loaded.metadata.at("train_subjects");
  CHECK(held_out == "S01");
  CHECK(train == "S02,S03");
  CHECK(read_json(runs.at("supervised-ear") / "metrics.json")["test_subject"] == held_out);
  CHECK(fs::exists(scratch() / "runs" / "kd-online" / "teacher.ckpt"));
  CHECK(fs::exists(scratch() / "runs" / "supervised-ear" / "loss.csv"));
  CHECK(fs::exists(scratch() / "runs" / "supervised-ear" / "manifest.json"));

  const auto out_of_range = cli("train --strategy supervised-ear --data " + q(prepared_cohort()) +
                                  " --fold 3 --out " + q(scratch() / "fold3"));
  CHECK(out_of_range.code == 2);
}

TEST_CASE("same flags and seed give identical checkpoints") {
  const std::string args = "train --strategy supervised-ear --data " + q(prepared_cohort()) +
                           " --fold 1 --config " + q(train_config()) + " --seed 5 --out ";
  REQUIRE(cli(args + q(scratch() / "repeat_a")).code == 0);
  REQUIRE(cli(args + q(scratch() / "repeat_b")).code == 0);
  const auto a = slurp(scratch() / "repeat_a" / "model.ckpt");
  CHECK_FALSE(a.empty());
  CHECK(a == slurp(scratch() / "repeat_b" / "model.ckpt"));
  CHECK(read_json(scratch() / "repeat_a" / "manifest.json")["seed"] == 5);
}

TEST_CASE("an oracle checkpoint scores accuracy and kappa of one") {
  // Train on the held-out subject itself until it is memorised.
  const fs::path subject_dir = prepared_cohort() / "S01";
  const auto scalp = DerivationSet::from_recording(dataset::load_recording_container(subject_dir / "scalp"));
  const auto ear = DerivationSet::from_recording(dataset::load_recording_container(subject_dir / "ear"));
  const auto epochs = dataset::make_paired_epochs(
      scalp, ear, dataset::load_hypnogram(subject_dir / "hypnogram.txt"), "S01");
  std::vector<const PairedEpoch*> view;
  for (const auto& e : epochs) view.push_back(&e);
  const EpochSet data = domain_view(view, Domain::Scalp);

  ModelConfig mc;
  mc.epoch_samples = epochs.front().scalp.samples;
  TrainConfig tc;
  tc.epochs = 150;
  tc.batch_size = 4;
  const auto trained = training::train_supervised(*build_stager(mc), data, tc);
  const auto predictions = evaluation::predict(*trained.model, data.inputs);
  REQUIRE(std::equal(predictions.begin(), predictions.end(), data.labels.begin()));

  const fs::path ckpt = scratch() / "oracle.ckpt";
  checkpoint::save(ckpt, *trained.model, {{"strategy", "supervised-scalp"}});
  const fs::path out = scratch() / "oracle_eval";
  const auto r = cli("evaluate --checkpoint " + q(ckpt) + " --data " + q(prepared_cohort()) +
                       " --fold 0 --out " + q(out));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto metrics = read_json(out / "metrics.json");
  CHECK(metrics["accuracy"].get<double>() == 1.0);
  CHECK(metrics["kappa"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(metrics["domain"] == "scalp");
  CHECK(metrics["epochs"] == epochs.size());
}

TEST_CASE("metrics.json follows the documented schema") {
  for (const auto& [strategy, dir] : evaluated_runs()) {
    CAPTURE(strategy);
    const auto errors = schema_errors(read_json(dir / "metrics.json"));
    CHECK_MESSAGE(errors.empty(), (errors.empty() ? "" : errors.front()));
  }
  const fs::path loso = scratch() / "loso";
  const auto r = cli("loso --strategy supervised-ear --data " + q(prepared_cohort()) + " --config " +
                       q(train_config()) + " --out " + q(loso));
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const auto metrics = read_json(loso / "metrics.json");
  CHECK(schema_errors(metrics).empty());
  CHECK(metrics["folds"].size() == 3);
  CHECK(metrics["epochs"] == 36);

  auto broken = metrics;
  broken["accuracy"] = 1.5;
  CHECK_FALSE(schema_errors(broken).empty());
  broken = metrics;
  broken.erase("kappa");
  CHECK_FALSE(schema_errors(broken).empty());
}

TEST_CASE("evaluate reports missing data and mismatched checkpoints") {
  const fs::path ckpt = scratch() / "runs" / "supervised-ear" / "model.ckpt";
  evaluated_runs();
  const auto missing = cli("evaluate --checkpoint " + q(ckpt) + " --data " + q(scratch() / "nowhere") +
                             " --fold 0 --out " + q(scratch() / "missing_eval"));
  CHECK(missing.code == 1);
  CHECK(missing.output.find("IOError") != std::string::npos);

  const fs::path other = scratch() / "other_model.json";
  spit(other, R"({"model": {"width": 4, "feature_dim": 32}})");
  const auto mismatch = cli("evaluate --checkpoint " + q(ckpt) + " --data " + q(prepared_cohort()) +
                              " --fold 0 --config " + q(other) + " --out " + q(scratch() / "mismatch_eval"));
  CHECK(mismatch.code == 1);
  CHECK(mismatch.output.find("CheckpointMismatch") != std::string::npos);
}

TEST_CASE("report builds one row per strategy and is idempotent") {
  std::string runs;
  for (const auto& [strategy, dir] : evaluated_runs()) runs += " " + q(dir);
  const fs::path a = scratch() / "report_a";
  const fs::path b = scratch() / "report_b";
  REQUIRE(cli("report --runs" + runs + " --out " + q(a)).code == 0);
  REQUIRE(cli("report --runs" + runs + " --out " + q(b)).code == 0);

  const auto table = lines_of(slurp(a / "table.md"));
  REQUIRE(table.size() == 7);
  CHECK(table[0] == "| Architecture | Modality | Method | ACC (%) | κ | Runs | Epochs |");
  CHECK(table[2].find("| Scalp-EEG | Supervised |") != std::string::npos);
  CHECK(table[6].find("| Ear-EEG | Online KD |") != std::string::npos);
  CHECK(lines_of(slurp(a / "table.csv")).size() == 6);
  CHECK(tree_bytes(a) == tree_bytes(b));

  std::size_t svgs = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    if (e.path().extension() != ".svg") continue;
    ++svgs;
    const std::string name = e.path().stem().string();
    const auto run = std::find_if(evaluated_runs().begin(), evaluated_runs().end(), [&](const auto& kv) {
      const std::string suffix = "_" + kv.second.filename().string();
      return name.size() > suffix.size() && name.ends_with(suffix);
    });
    REQUIRE(run != evaluated_runs().end());
    const auto points = lines_of(slurp(run->second / "embedding.csv")).size() - 1;
    CHECK(count_of(slurp(e.path()), "<circle class=\"point\"") == points);
  }
  CHECK(svgs == 4);

  CHECK(cli("report --out " + q(scratch() / "report_empty")).code == 2);
}
