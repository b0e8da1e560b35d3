#pragma once

#include "powerprint/features.hpp"
#include "powerprint/forest.hpp"
#include "powerprint/pipeline.hpp"
#include "powerprint/synth.hpp"
#include "powerprint/trace.hpp"

#include <Eigen/Core>

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace powerprint {

/// Rows are true labels, columns predicted labels.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXi counts;

  long total() const { return counts.cast<long>().sum(); }
  long correct() const { return counts.cast<long>().trace(); }
  /// trace / total; 0 for an empty matrix.
  double accuracy() const;

  friend bool operator==(const ConfusionMatrix& a, const ConfusionMatrix& b) {
    return a.labels == b.labels && a.counts.rows() == b.counts.rows() && a.counts == b.counts;
  }
};

/// Throws std::invalid_argument on a label outside the vocabulary.
ConfusionMatrix confusion(std::span<const std::pair<std::string, std::string>> true_predicted,
                          const std::vector<std::string>& labels);
ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          const std::vector<std::string>& labels);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  long support = 0;                 // true instances of the label
  bool precision_undefined = false;  // 0/0, reported as 0
  bool recall_undefined = false;

  bool undefined() const noexcept { return precision_undefined || recall_undefined; }
};

/// Harmonic mean with equal weights; 0 when both inputs are 0.
double f_score(double precision, double recall) noexcept;

ClassMetrics precision_recall_f(const ConfusionMatrix& matrix, std::string_view label);
ClassMetrics precision_recall_f(const ConfusionMatrix& matrix, std::size_t label_index);

/// Fold id per sample. Within each label the samples are shuffled and dealt
/// round-robin, so fold sizes per label differ by at most one.
/// Throws std::invalid_argument if some present label has fewer than k samples.
std::vector<int> stratified_folds(std::span<const int> labels, int n_labels, int k, Seed seed);

struct RandomGuess {
  double analytic = 0.0;     // 1 / n_labels
  double monte_carlo = 0.0;  // mode of random per-group labels vs a random true label
  double std_error = 0.0;
};

/// `group_counts` lists the window-group count of each evaluated sample; each
/// draw picks one of them uniformly.
RandomGuess random_guess_baseline(int n_labels, std::span<const int> group_counts, std::size_t draws = 100'000,
                                  Seed seed = kDefaultSeed);

struct MutualInformation {
  double bits = 0.0;  // H(X) + H(Y) - H(X,Y)
  double entropy_x = 0.0;
  double entropy_y = 0.0;
  double joint_entropy = 0.0;
  double normalized = 0.0;  // bits / max(H(X), H(Y)), in [0, 1]
};

/// Histogram estimate with `bins` equal-width bins over each series' own range.
/// When both entropies are zero, normalized is 1 for identical series, else 0.
MutualInformation mutual_information(const Eigen::Ref<const Eigen::VectorXd>& x,
                                     const Eigen::Ref<const Eigen::VectorXd>& y, int bins = 32);

enum class WilcoxonMethod { Auto, Exact, Normal };

struct WilcoxonResult {
  double w_plus = 0.0;    // sum of ranks of positive differences a - b
  double w_minus = 0.0;
  int n = 0;              // nonzero differences
  double p_greater = 1.0;  // one-sided, alternative a > b
  double p_two_sided = 1.0;
  bool exact = false;
};

/// Signed-rank test on paired samples. Zero differences are dropped and tied
/// magnitudes share their average rank. Auto uses exact enumeration for
/// n <= 12 and the continuity-corrected normal approximation above.
/// Throws std::invalid_argument with fewer than 5 nonzero differences.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    WilcoxonMethod method = WilcoxonMethod::Auto);

/// Everything needed to train and evaluate.
struct PipelineConfig {
  FeatureConfig features;
  ForestParams forest;
  unsigned train_noise_level = 0;
  MixOptions mix;
  int mi_bins = 32;
  std::size_t random_guess_draws = 100'000;
};

struct EvalReport {
  std::vector<std::string> labels;
  std::vector<ClassMetrics> per_label;
  double micro_accuracy = 0.0;
  double macro_accuracy = 0.0;  // mean per-label recall
  ConfusionMatrix confusion;
  int folds = 0;
  int trials = 1;
  unsigned noise_level = 0;
  Seed seed = 0;
  int mi_bins = 32;
  std::vector<double> trial_accuracy;
  double mean_accuracy = 0.0;  // mean of trial_accuracy
  RandomGuess baseline_random;
  std::optional<double> baseline_mi;  // mean normalized MI, target vs mixed
  std::optional<WilcoxonResult> significance;
  std::vector<std::string> excluded_samples;
  std::vector<std::string> dropped_labels;
};

/// Per-label metrics and accuracies derived from report.confusion.
void fill_metrics(EvalReport& report);

/// Stratified k-fold cross validation on clean test samples.
EvalReport kfold_cv(const LabeledDataset& dataset, int k, const PipelineConfig& config, Seed seed);

struct SweepResult {
  std::vector<EvalReport> levels;
};

/// Trains one model per fold (on clean samples unless config.train_noise_level
/// is set), then for every level and trial mixes each test sample with
/// `level` other-label samples and classifies it. Level 0 reproduces kfold_cv.
SweepResult noise_sweep(const LabeledDataset& dataset, const std::vector<unsigned>& levels, int trials, int k,
                        const PipelineConfig& config, Seed seed);

void write_report(const EvalReport& report, std::ostream& out);
/// Parses write_report output (metrics, confusion and summary values).
EvalReport read_report(std::istream& in);

/// Percent table: label, precision (%), recall (%), F.
void write_summary_table(const EvalReport& report, std::ostream& out);
/// "level,accuracy,random,mi"
void write_sweep_curves(const SweepResult& sweep, std::ostream& out);
/// "level,label,precision,recall,f_score"
void write_label_curves(const SweepResult& sweep, std::ostream& out);

}  // namespace powerprint
