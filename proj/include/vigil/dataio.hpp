#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vigil/kvconfig.hpp"
#include "vigil/labels.hpp"

namespace vigil {

inline constexpr double kDefaultFs = 500.0;
inline constexpr double kDefaultEpochSeconds = 10.0;
inline constexpr std::size_t kDefaultEpochSamples = 5000;

/// A continuous single-channel recording (amplitudes in µV).
struct Recording {
  std::string subject_id;
  double fs = kDefaultFs;
  Eigen::VectorXd samples;
};

struct Epoch {
  std::size_t index = 0;
  Eigen::VectorXd samples;
  std::optional<VigilanceState> label;
  std::string subject_id;
};

struct Dataset {
  std::vector<Epoch> epochs;
  std::string schema_note;
  double fs = kDefaultFs;

  std::size_t size() const { return epochs.size(); }
  std::size_t epoch_length() const {
    return epochs.empty() ? 0 : static_cast<std::size_t>(epochs.front().samples.size());
  }
  /// Label codes; throws StratificationError if any epoch is unlabeled.
  std::vector<int> label_codes() const;
};

/// Reads `label,s0,...,s{N-1}` rows. Label text may be empty.
Dataset load_dataset_csv(const std::filesystem::path& path,
                         std::size_t expected_samples = kDefaultEpochSamples);
Dataset read_dataset_csv(std::istream& is,
                         std::size_t expected_samples = kDefaultEpochSamples);

/// Amplitudes are written with 6 significant digits (%.6g), so a file that was
/// produced by this writer re-serializes byte-identically after reading.
void write_dataset_csv(const Dataset& ds, std::ostream& os);
void save_dataset_csv(const Dataset& ds, const std::filesystem::path& path);

/// Cuts contiguous non-overlapping epochs; the tail remainder is discarded and
/// reported through `dropped` when given.
std::vector<Epoch> segment(const Recording& rec,
                           double epoch_seconds = kDefaultEpochSeconds,
                           std::size_t* dropped = nullptr);

struct SplitFractions {
  double train = 0.8;
  double validation = 0.0;
  double test = 0.2;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;

  bool operator==(const SplitIndices&) const = default;
};

enum class SplitGrouping {
  pooled,       // one stratified cut over all epochs
  per_subject,  // stratified cut inside every subject, then merged
};

/// Within each class: seeded shuffle, then cut at the rounded cumulative
/// fractions. Every subset holds its class share within ±1 sample.
SplitIndices stratified_split(std::span<const int> labels,
                              const SplitFractions& fractions,
                              std::uint64_t seed);

SplitIndices stratified_split(const Dataset& ds,
                              const SplitFractions& fractions,
                              std::uint64_t seed,
                              SplitGrouping grouping = SplitGrouping::pooled);

/// Oscillatory signature of one synthetic class.
struct ClassSignature {
  double center_hz = 0.0;
  double spread_hz = 0.0;     // frequencies drawn from center ± spread
  double amplitude_uv = 0.0;
  double duty_cycle = 1.0;    // fraction of 0.5 s blocks with the burst on
  int components = 1;
};

struct SynthConfig {
  std::size_t n_per_class = 200;
  double fs = kDefaultFs;
  double epoch_seconds = kDefaultEpochSeconds;
  double noise_sigma = 8.0;
  ClassSignature wake{27.5, 12.5, 12.0, 1.0, 5};
  ClassSignature sws{2.0, 1.0, 90.0, 1.0, 1};
  ClassSignature rem{7.0, 0.5, 40.0, 0.5, 1};

  void validate() const;
  std::size_t epoch_samples() const;
};

/// Keys: n_per_class, fs, epoch_seconds, noise_sigma and
/// <wake|sws|rem>_<center_hz|spread_hz|amplitude_uv|duty_cycle|components>.
SynthConfig synth_config_from(const KeyValueConfig& kv);
std::string synth_config_text(const SynthConfig& cfg);

/// Epochs are emitted class-interleaved (Wake, SWS, REM, Wake, ...).
Dataset synth_dataset(const SynthConfig& cfg, std::uint64_t seed);

}  // namespace vigil
