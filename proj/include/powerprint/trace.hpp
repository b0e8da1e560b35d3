#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace powerprint {

/// Malformed or inconsistent input data. line() is 1-based, 0 when unknown.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what, std::size_t line = 0);
  /// For messages that already name their location.
  static DataError located(const std::string& what, std::size_t line);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Uniformly sampled current-magnitude series (amperes).
///
/// Samples are non-empty, finite and non-negative; the rate is positive.
/// Immutable after construction.
class PowerTrace {
 public:
  static constexpr double kDefaultRateHz = 120.0;

  explicit PowerTrace(Eigen::VectorXd samples, double sample_rate_hz = kDefaultRateHz,
                      std::string source_id = {});

  const Eigen::VectorXd& samples() const noexcept { return samples_; }
  double sample_rate_hz() const noexcept { return rate_hz_; }
  const std::string& source_id() const noexcept { return source_id_; }
  Eigen::Index size() const noexcept { return samples_.size(); }
  double duration_seconds() const noexcept {
    return static_cast<double>(samples_.size()) / rate_hz_;
  }

  friend bool operator==(const PowerTrace& a, const PowerTrace& b) {
    return a.rate_hz_ == b.rate_hz_ && a.source_id_ == b.source_id_ &&
           a.samples_.size() == b.samples_.size() && a.samples_ == b.samples_;
  }

 private:
  Eigen::VectorXd samples_;
  double rate_hz_;
  std::string source_id_;
};

/// Clean when noise_level == 0; otherwise a synthetic mixture built from `seed`.
struct Provenance {
  unsigned noise_level = 0;
  std::uint64_t seed = 0;

  static Provenance clean() { return {}; }
  static Provenance noisy(unsigned level, std::uint64_t seed);

  bool is_clean() const noexcept { return noise_level == 0; }
  std::string to_string() const;
  static Provenance parse(std::string_view tag);

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct LabeledSample {
  std::string id;
  PowerTrace trace;
  std::string label;
  Provenance provenance;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

/// Samples plus their label vocabulary in first-appearance order.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  explicit LabeledDataset(std::vector<LabeledSample> samples);
  /// Fixed vocabulary; every sample label must be in it.
  LabeledDataset(std::vector<LabeledSample> samples, std::vector<std::string> labels);

  const std::vector<LabeledSample>& samples() const noexcept { return samples_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  const LabeledSample& operator[](std::size_t i) const { return samples_[i]; }

  /// Index of `label` in the vocabulary, or nullopt.
  std::optional<int> label_index(std::string_view label) const;
  /// Vocabulary index for each sample, in sample order.
  std::vector<int> label_indices() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

 private:
  std::vector<LabeledSample> samples_;
  std::vector<std::string> labels_;
};

// Trace CSV: "# powerprint-trace v1", "rate_hz=<r>,source=<s>", one value per line.
PowerTrace read_trace(std::istream& in);
void write_trace(const PowerTrace& trace, std::ostream& out);
PowerTrace load_trace(const std::filesystem::path& path);
void save_trace(const PowerTrace& trace, const std::filesystem::path& path);

// Manifest: "<sample_id>,<label>,<relative_path>,<provenance>" per line, '#' comments.
LabeledDataset load_manifest(const std::filesystem::path& path);

/// Writes every trace to <dir>/<trace_subdir>/<id>.csv and the manifest listing them.
/// `header_comments` are emitted as leading '#' lines.
void save_manifest(const LabeledDataset& dataset, const std::filesystem::path& manifest_path,
                   const std::vector<std::string>& header_comments = {},
                   const std::string& trace_subdir = "traces");

/// Sample ids double as file names: [A-Za-z0-9._-]+.
bool is_valid_sample_id(std::string_view id) noexcept;

}  // namespace powerprint
