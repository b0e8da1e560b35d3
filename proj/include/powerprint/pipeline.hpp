#pragma once

#include "powerprint/features.hpp"
#include "powerprint/forest.hpp"
#include "powerprint/trace.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace powerprint {

/// Trained forest plus the feature configuration its inputs must follow.
struct FingerprintModel {
  ForestModel forest;
  FeatureConfig features;

  const std::vector<std::string>& labels() const noexcept { return forest.labels; }

  friend bool operator==(const FingerprintModel&, const FingerprintModel&) = default;
};

struct FitOptions {
  /// Drop labels whose samples are all shorter than the minimum length
  /// instead of failing.
  bool drop_short_labels = false;
};

struct FitReport {
  std::vector<std::string> excluded_samples;  // failed the length filter
  std::vector<std::string> dropped_labels;    // every sample excluded
  Eigen::Index training_rows = 0;
};

struct FitResult {
  FingerprintModel model;
  FitReport report;
};

/// Featurizes every sample (each window group inherits the sample label) and
/// trains the forest. Throws DataError when a label loses all its samples to
/// the length filter (unless dropped via options) or fewer than two labels remain.
FitResult fit(const LabeledDataset& dataset, const FeatureConfig& features, const ForestParams& params, Seed seed,
              const FitOptions& options = {});

/// Same, starting from per-sample feature rows already computed with `features`
/// (nullopt marks a sample that failed the length filter).
FitResult fit_rows(const LabeledDataset& dataset, const std::vector<std::optional<Eigen::MatrixXd>>& rows,
                   const FeatureConfig& features, const ForestParams& params, Seed seed,
                   const FitOptions& options = {});

struct SamplePrediction {
  std::string sample_id;
  int predicted = 0;                // vocabulary index
  std::vector<int> group_labels;    // per window group, in order
  std::vector<int> group_votes;     // per vocabulary entry
  double confidence = 0.0;          // modal count / group count
};

/// Mode of per-group labels; ties go to the earlier vocabulary entry.
SamplePrediction aggregate_groups(std::vector<int> group_labels, std::size_t n_labels, std::string sample_id = {});

/// Throws TooShortError for traces failing the length filter.
SamplePrediction classify(const FingerprintModel& model, const PowerTrace& trace, std::string sample_id = {});

/// Classification from feature rows already computed with model.features.
SamplePrediction classify_rows(const FingerprintModel& model, const Eigen::Ref<const Eigen::MatrixXd>& rows,
                               std::string sample_id = {});

struct BatchResult {
  std::string sample_id;
  std::string true_label;
  std::optional<SamplePrediction> prediction;
  std::string error;  // set when prediction is empty
};

/// Order-preserving; per-sample failures are recorded rather than thrown.
std::vector<BatchResult> classify_batch(const FingerprintModel& model, const LabeledDataset& dataset);

/// CSV "sample_id,true_label,predicted_label,confidence,n_groups"; failed rows
/// carry "error:<reason>" as the predicted label.
void write_prediction_report(const FingerprintModel& model, const std::vector<BatchResult>& results,
                             std::ostream& out, const std::vector<std::string>& header_comments = {});

// Model file: "# powerprint-model v1", a [features] block, then the forest.
void write_model(const FingerprintModel& model, std::ostream& out);
FingerprintModel read_model(std::istream& in);
void save_model(const FingerprintModel& model, const std::filesystem::path& path);
FingerprintModel load_model(const std::filesystem::path& path);

}  // namespace powerprint
