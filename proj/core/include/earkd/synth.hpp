#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "earkd/dataset.hpp"
#include "earkd/preprocess.hpp"
#include "earkd/signal.hpp"

namespace earkd::synth {

struct SynthConfig {
  std::size_t n_subjects = 8;
  std::size_t epochs_per_subject = 200;
  double sample_rate = 100.0;
  double snr_scalp_db = 10.0;
  double snr_ear_db = -5.0;
  double ear_attenuation = 0.5;
  // Common-mode background shared by every electrode (RMS, microvolts).
  double common_mode_uv = 20.0;

  // Throws InvalidConfig.
  void validate() const;
};

// Throws ConfigNotFound / InvalidConfig.
SynthConfig load_synth_config(const std::filesystem::path& path);
std::string to_json(const SynthConfig& config);
SynthConfig synth_config_from_json(const std::string& text);

// Derivation-level parts of one synthetic subject, kept separate so the
// realised SNR can be checked.
struct Components {
  DerivationSet scalp_signal;  // latent
  DerivationSet scalp_noise;
  DerivationSet ear_signal;    // ear_attenuation * latent
  DerivationSet ear_noise;
};

struct SyntheticSubject {
  std::string id;
  std::vector<Stage> hypnogram;
  DerivationSet scalp;  // C3-O1, C4-O2, A1-A2
  DerivationSet ear;    // L-R, LE, RE
  std::optional<Components> components;
};

struct ElectrodeRecordings {
  std::string id;
  std::vector<Stage> hypnogram;
  Recording scalp;  // O1 O2 C3 C4 A1 A2 F3 F4
  Recording ear;    // ELA..ELK, ERA..ERK
};

std::string subject_name(std::size_t index);

// Electrode-level recordings for subject `index`; deterministic in (config, seed, index).
ElectrodeRecordings synth_subject_electrodes(const SynthConfig& config, std::uint64_t seed,
                                             std::size_t index);

// Paired derivation recordings for subject `index`.
SyntheticSubject synth_subject(const SynthConfig& config, std::uint64_t seed, std::size_t index,
                               bool keep_components = false);

// Every subject of the configured cohort, in subject order.
std::vector<SyntheticSubject> synth_paired_dataset(const SynthConfig& config, std::uint64_t seed);

// Stage sequence of the fixed Markov chain, starting awake.
std::vector<Stage> synth_hypnogram(std::size_t epochs, std::uint64_t seed);

// Filters both derivation sets and segments them into normalised paired epochs.
SubjectData to_subject_data(const SyntheticSubject& subject, bool bandpass = true);

}  // namespace earkd::synth
