#include "vigil/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "vigil/errors.hpp"
#include "vigil/rng.hpp"
#include "vigil/textio.hpp"

namespace vigil {

std::vector<int> Dataset::label_codes() const {
  std::vector<int> out;
  out.reserve(epochs.size());
  for (const auto& e : epochs) {
    if (!e.label) {
      throw StratificationError("epoch " + std::to_string(e.index) +
                                " is unlabeled");
    }
    out.push_back(code(*e.label));
  }
  return out;
}

Dataset read_dataset_csv(std::istream& is, std::size_t expected_samples) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("dataset file is empty");
  {
    const auto header = split(trim(line), ',');
    if (header.size() != expected_samples + 1 || trim(header[0]) != "label") {
      throw FormatError("header: expected label,s0,...,s" +
                        std::to_string(expected_samples - 1) + " (" +
                        std::to_string(expected_samples) + " samples), got " +
                        std::to_string(header.size() ? header.size() - 1 : 0));
    }
  }
  Dataset ds;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    const auto content = trim(line);
    if (content.empty()) continue;
    ++row;
    const auto cells = split(content, ',');
    if (cells.size() != expected_samples + 1) {
      throw FormatError("row " + std::to_string(row) + ": expected " +
                        std::to_string(expected_samples) +
                        " sample columns, found " +
                        std::to_string(cells.size() - 1));
    }
    Epoch e;
    e.index = row - 1;
    e.label = parse_optional_label(trim(cells[0]));
    e.samples.resize(static_cast<Eigen::Index>(expected_samples));
    for (std::size_t j = 0; j < expected_samples; ++j) {
      e.samples[static_cast<Eigen::Index>(j)] = parse_double(
          cells[j + 1],
          "row " + std::to_string(row) + " column s" + std::to_string(j));
      if (!std::isfinite(e.samples[static_cast<Eigen::Index>(j)])) {
        throw ParseError("row " + std::to_string(row) + " column s" +
                         std::to_string(j) + ": non-finite sample");
      }
    }
    ds.epochs.push_back(std::move(e));
  }
  return ds;
}

Dataset load_dataset_csv(const std::filesystem::path& path,
                         std::size_t expected_samples) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open dataset '" + path.string() + "'");
  auto ds = read_dataset_csv(is, expected_samples);
  ds.schema_note = "loaded from " + path.filename().string();
  return ds;
}

void write_dataset_csv(const Dataset& ds, std::ostream& os) {
  const std::size_t n = ds.epoch_length();
  os << "label";
  for (std::size_t j = 0; j < n; ++j) os << ",s" << j;
  os << '\n';
  for (const auto& e : ds.epochs) {
    if (static_cast<std::size_t>(e.samples.size()) != n) {
      throw FormatError("epoch " + std::to_string(e.index) +
                        " length differs from the dataset epoch length");
    }
    if (e.label) os << to_string(*e.label);
    for (Eigen::Index j = 0; j < e.samples.size(); ++j) {
      os << ',' << format_sig(e.samples[j], 6);
    }
    os << '\n';
  }
}

void save_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
  write_file_atomic(path, [&](std::ostream& os) { write_dataset_csv(ds, os); });
}

std::vector<Epoch> segment(const Recording& rec, double epoch_seconds,
                           std::size_t* dropped) {
  if (!(rec.fs > 0.0) || !(epoch_seconds > 0.0)) {
    throw ConfigError("sampling rate and epoch length must be positive");
  }
  const auto len = static_cast<std::size_t>(std::llround(rec.fs * epoch_seconds));
  const auto total = static_cast<std::size_t>(rec.samples.size());
  if (len == 0 || total < len) {
    throw InsufficientDataError(
        "recording '" + rec.subject_id + "' has " + std::to_string(total) +
        " samples, fewer than one epoch of " + std::to_string(len));
  }
  if (!rec.samples.allFinite()) {
    throw InputError("recording '" + rec.subject_id +
                     "' contains non-finite samples");
  }
  const std::size_t count = total / len;
  std::vector<Epoch> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Epoch e;
    e.index = i;
    e.samples = rec.samples.segment(static_cast<Eigen::Index>(i * len),
                                    static_cast<Eigen::Index>(len));
    e.subject_id = rec.subject_id;
    out.push_back(std::move(e));
  }
  if (dropped) *dropped = total - count * len;
  return out;
}

namespace {

void check_fractions(const SplitFractions& f) {
  if (f.train <= 0.0 || f.test <= 0.0 || f.validation < 0.0) {
    throw ConfigError("split fractions must be positive");
  }
  if (std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

// Appends one class's (or one subject-class cell's) members to the subsets.
void cut_members(std::vector<std::size_t> members, const SplitFractions& f,
                 Pcg32& rng, SplitIndices& out) {
  shuffle(members, rng);
  const double n = static_cast<double>(members.size());
  const auto c1 = static_cast<std::size_t>(std::llround(n * f.train));
  const auto c2 = static_cast<std::size_t>(std::llround(n * (f.train + f.validation)));
  for (std::size_t i = 0; i < members.size(); ++i) {
    auto& dst = i < c1 ? out.train : (i < c2 ? out.validation : out.test);
    dst.push_back(members[i]);
  }
}

void finish(SplitIndices& s) {
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
}

}  // namespace

SplitIndices stratified_split(std::span<const int> labels,
                              const SplitFractions& fractions,
                              std::uint64_t seed) {
  check_fractions(fractions);
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  SplitIndices out;
  out.seed = seed;
  for (auto& [cls, members] : by_class) {
    Pcg32 rng(derive_seed(seed, static_cast<std::uint64_t>(cls)));
    cut_members(std::move(members), fractions, rng, out);
  }
  finish(out);
  return out;
}

SplitIndices stratified_split(const Dataset& ds,
                              const SplitFractions& fractions,
                              std::uint64_t seed, SplitGrouping grouping) {
  const auto labels = ds.label_codes();
  if (grouping == SplitGrouping::pooled) {
    return stratified_split(labels, fractions, seed);
  }
  check_fractions(fractions);
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    cells[{ds.epochs[i].subject_id, labels[i]}].push_back(i);
  }
  SplitIndices out;
  out.seed = seed;
  std::uint64_t cell_no = 0;
  for (auto& [key, members] : cells) {
    Pcg32 rng(derive_seed(seed, static_cast<std::uint64_t>(key.second),
                          ++cell_no));
    cut_members(std::move(members), fractions, rng, out);
  }
  finish(out);
  return out;
}

void SynthConfig::validate() const {
  if (n_per_class == 0) throw ConfigError("n_per_class must be > 0");
  if (!(fs > 0.0)) throw ConfigError("fs must be > 0");
  if (!(epoch_seconds > 0.0)) throw ConfigError("epoch_seconds must be > 0");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  const std::pair<const char*, const ClassSignature*> sigs[] = {
      {"wake", &wake}, {"sws", &sws}, {"rem", &rem}};
  for (const auto& [name, s] : sigs) {
    const std::string n(name);
    if (s->components <= 0) throw ConfigError(n + "_components must be > 0");
    if (s->center_hz - s->spread_hz <= 0.0 ||
        s->center_hz + s->spread_hz >= fs / 2.0) {
      throw ConfigError(n + " frequencies must lie in (0, fs/2)");
    }
    if (s->spread_hz < 0.0) throw ConfigError(n + "_spread_hz must be >= 0");
    if (s->amplitude_uv < 0.0) throw ConfigError(n + "_amplitude_uv must be >= 0");
    if (s->duty_cycle <= 0.0 || s->duty_cycle > 1.0) {
      throw ConfigError(n + "_duty_cycle must be in (0, 1]");
    }
  }
}

std::size_t SynthConfig::epoch_samples() const {
  return static_cast<std::size_t>(std::llround(fs * epoch_seconds));
}

SynthConfig synth_config_from(const KeyValueConfig& kv) {
  SynthConfig cfg;
  const auto n = kv.get_int("n_per_class", static_cast<long long>(cfg.n_per_class));
  if (n <= 0) throw ConfigError("n_per_class must be > 0");
  cfg.n_per_class = static_cast<std::size_t>(n);
  cfg.fs = kv.get_double("fs", cfg.fs);
  cfg.epoch_seconds = kv.get_double("epoch_seconds", cfg.epoch_seconds);
  cfg.noise_sigma = kv.get_double("noise_sigma", cfg.noise_sigma);
  const std::pair<const char*, ClassSignature*> sigs[] = {
      {"wake", &cfg.wake}, {"sws", &cfg.sws}, {"rem", &cfg.rem}};
  for (auto [name, s] : sigs) {
    const std::string p = std::string(name) + "_";
    s->center_hz = kv.get_double(p + "center_hz", s->center_hz);
    s->spread_hz = kv.get_double(p + "spread_hz", s->spread_hz);
    s->amplitude_uv = kv.get_double(p + "amplitude_uv", s->amplitude_uv);
    s->duty_cycle = kv.get_double(p + "duty_cycle", s->duty_cycle);
    s->components = static_cast<int>(kv.get_int(p + "components", s->components));
  }
  cfg.validate();
  return cfg;
}

std::string synth_config_text(const SynthConfig& cfg) {
  std::ostringstream os;
  os << "n_per_class = " << cfg.n_per_class << "  # epochs per class\n"
     << "fs = " << format_exact(cfg.fs) << "  # Hz\n"
     << "epoch_seconds = " << format_exact(cfg.epoch_seconds) << "  # s\n"
     << "noise_sigma = " << format_exact(cfg.noise_sigma) << "  # uV\n";
  const std::pair<const char*, const ClassSignature*> sigs[] = {
      {"wake", &cfg.wake}, {"sws", &cfg.sws}, {"rem", &cfg.rem}};
  for (auto [name, s] : sigs) {
    const std::string p = name;
    os << p << "_center_hz = " << format_exact(s->center_hz) << "  # Hz\n"
       << p << "_spread_hz = " << format_exact(s->spread_hz) << "  # Hz\n"
       << p << "_amplitude_uv = " << format_exact(s->amplitude_uv) << "  # uV\n"
       << p << "_duty_cycle = " << format_exact(s->duty_cycle)
       << "  # fraction of 0.5 s blocks bursting\n"
       << p << "_components = " << s->components << "  # sinusoids\n";
  }
  return os.str();
}

namespace {

Eigen::VectorXd synth_epoch(const ClassSignature& sig, const SynthConfig& cfg,
                            std::size_t n, Pcg32& rng) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  const double amp_scale = 1.0 / std::sqrt(static_cast<double>(sig.components));
  for (int c = 0; c < sig.components; ++c) {
    const double f = rng.uniform(sig.center_hz - sig.spread_hz,
                                 sig.center_hz + sig.spread_hz);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double a = sig.amplitude_uv * amp_scale * rng.uniform(0.8, 1.2);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / cfg.fs;
      x[static_cast<Eigen::Index>(i)] +=
          a * std::sin(2.0 * std::numbers::pi * f * t + phase);
    }
  }
  if (sig.duty_cycle < 1.0) {
    // Burst envelope over 0.5 s blocks; "off" blocks keep 20% amplitude.
    const auto block = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.fs / 2.0));
    for (std::size_t b = 0; b < n; b += block) {
      const double gain = rng.uniform() < sig.duty_cycle ? 1.0 : 0.2;
      const std::size_t end = std::min(n, b + block);
      for (std::size_t i = b; i < end; ++i) x[static_cast<Eigen::Index>(i)] *= gain;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    x[static_cast<Eigen::Index>(i)] += cfg.noise_sigma * rng.normal();
  }
  return x;
}

}  // namespace

Dataset synth_dataset(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = cfg.epoch_samples();
  Dataset ds;
  ds.fs = cfg.fs;
  ds.schema_note = "synthetic, seed " + std::to_string(seed);
  ds.epochs.reserve(cfg.n_per_class * kNumStates);
  Pcg32 root(seed);
  for (std::size_t i = 0; i < cfg.n_per_class; ++i) {
    for (auto state : kAllStates) {
      const ClassSignature& sig = state == VigilanceState::Wake  ? cfg.wake
                                  : state == VigilanceState::SWS ? cfg.sws
                                                                 : cfg.rem;
      Pcg32 rng = root.split(ds.epochs.size());
      Epoch e;
      e.index = ds.epochs.size();
      e.label = state;
      e.subject_id = "synthetic";
      e.samples = synth_epoch(sig, cfg, n, rng);
      ds.epochs.push_back(std::move(e));
    }
  }
  return ds;
}

}  // namespace vigil
