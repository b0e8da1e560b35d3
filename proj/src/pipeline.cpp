#include "powerprint/pipeline.hpp"

#include "powerprint/parallel.hpp"
#include "powerprint/text.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace powerprint {

namespace {
constexpr std::string_view kModelMagic = "# powerprint-model v1";
}

FitResult fit(const LabeledDataset& dataset, const FeatureConfig& features, const ForestParams& params, Seed seed,
              const FitOptions& options) {
  features.validate();
  std::vector<std::optional<Eigen::MatrixXd>> rows(dataset.size());
  parallel_for(dataset.size(), [&](std::size_t i) {
    try {
      rows[i] = featurize(dataset[i].trace, features);
    } catch (const TooShortError&) {
      rows[i].reset();
    }
  });
  return fit_rows(dataset, rows, features, params, seed, options);
}

FitResult fit_rows(const LabeledDataset& dataset, const std::vector<std::optional<Eigen::MatrixXd>>& rows,
                   const FeatureConfig& features, const ForestParams& params, Seed seed, const FitOptions& options) {
  features.validate();
  params.validate();
  if (rows.size() != dataset.size()) throw std::invalid_argument("one feature block per sample is required");

  FitReport report;
  const auto& vocab = dataset.labels();
  std::vector<int> surviving(vocab.size(), 0);
  std::vector<int> present(vocab.size(), 0);
  const auto label_of = dataset.label_indices();
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    ++present[static_cast<std::size_t>(label_of[i])];
    if (rows[i]) ++surviving[static_cast<std::size_t>(label_of[i])];
    else report.excluded_samples.push_back(dataset[i].id);
  }

  std::vector<std::string> kept;
  std::vector<int> remap(vocab.size(), -1);
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    if (present[k] == 0) continue;
    if (surviving[k] == 0) {
      report.dropped_labels.push_back(vocab[k]);
      continue;
    }
    remap[k] = static_cast<int>(kept.size());
    kept.push_back(vocab[k]);
  }
  if (!report.dropped_labels.empty() && !options.drop_short_labels)
    throw DataError("every sample of label(s) " + text::join(report.dropped_labels, ", ") + " is shorter than " +
                    text::format_double(features.min_sample_seconds) + " s");
  if (kept.size() < 2) throw DataError("training needs at least two labels with usable samples");

  FeatureTable table;
  table.feature_names = features.feature_names();
  table.label_names = kept;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (rows[i]) append_rows(table, *rows[i], remap[static_cast<std::size_t>(label_of[i])], dataset[i].id);
  report.training_rows = table.rows();

  FingerprintModel model{train(table.values, table.labels, kept, table.feature_names, params, seed), features};
  return {std::move(model), std::move(report)};
}

SamplePrediction aggregate_groups(std::vector<int> group_labels, std::size_t n_labels, std::string sample_id) {
  if (group_labels.empty()) throw std::invalid_argument("no window groups to aggregate");
  SamplePrediction out;
  out.sample_id = std::move(sample_id);
  out.group_votes.assign(n_labels, 0);
  for (const int l : group_labels) ++out.group_votes.at(static_cast<std::size_t>(l));
  out.predicted = static_cast<int>(std::max_element(out.group_votes.begin(), out.group_votes.end()) - out.group_votes.begin());
  out.confidence = static_cast<double>(out.group_votes[static_cast<std::size_t>(out.predicted)]) /
                   static_cast<double>(group_labels.size());
  out.group_labels = std::move(group_labels);
  return out;
}

SamplePrediction classify_rows(const FingerprintModel& model, const Eigen::Ref<const Eigen::MatrixXd>& rows,
                               std::string sample_id) {
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index g = 0; g < rows.rows(); ++g) labels.push_back(predict(model.forest, rows.row(g)).label);
  return aggregate_groups(std::move(labels), model.labels().size(), std::move(sample_id));
}

SamplePrediction classify(const FingerprintModel& model, const PowerTrace& trace, std::string sample_id) {
  return classify_rows(model, featurize(trace, model.features), std::move(sample_id));
}

std::vector<BatchResult> classify_batch(const FingerprintModel& model, const LabeledDataset& dataset) {
  std::vector<BatchResult> out(dataset.size());
  parallel_for(dataset.size(), [&](std::size_t i) {
    const auto& s = dataset[i];
    out[i].sample_id = s.id;
    out[i].true_label = s.label;
    try {
      out[i].prediction = classify(model, s.trace, s.id);
    } catch (const TooShortError&) {
      out[i].error = "too-short";
    } catch (const std::exception&) {
      out[i].error = "invalid";
    }
  });
  return out;
}

void write_prediction_report(const FingerprintModel& model, const std::vector<BatchResult>& results,
                             std::ostream& out, const std::vector<std::string>& header_comments) {
  for (const auto& c : header_comments) out << "# " << c << '\n';
  out << "sample_id,true_label,predicted_label,confidence,n_groups\n";
  for (const auto& r : results) {
    out << r.sample_id << ',' << r.true_label << ',';
    if (r.prediction)
      out << model.labels()[static_cast<std::size_t>(r.prediction->predicted)] << ','
          << text::format_double(r.prediction->confidence) << ',' << r.prediction->group_labels.size() << '\n';
    else
      out << "error:" << r.error << ",0,0\n";
  }
}

void write_model(const FingerprintModel& model, std::ostream& out) {
  out << kModelMagic << '\n' << "[features]\n";
  write_feature_config(model.features, out);
  out << "[end features]\n";
  write_forest(model.forest, out);
}

FingerprintModel read_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != kModelMagic) throw DataError("not a powerprint-model v1 file", 1);
  if (!std::getline(in, line) || text::trim(line) != "[features]") throw DataError("expected '[features]'", 2);
  std::ostringstream block;
  std::size_t line_no = 2;
  while (true) {
    if (!std::getline(in, line)) throw DataError("unterminated [features] block", line_no);
    ++line_no;
    if (text::trim(line) == "[end features]") break;
    block << line << '\n';
  }
  FingerprintModel model;
  std::istringstream features_in(block.str());
  model.features = read_feature_config(features_in);
  model.forest = read_forest(in);
  if (static_cast<std::size_t>(model.forest.n_features()) != model.features.vector_length())
    throw DataError("forest expects " + std::to_string(model.forest.n_features()) +
                    " features but the feature config produces " + std::to_string(model.features.vector_length()));
  return model;
}

void save_model(const FingerprintModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write model '" + path.string() + "'");
  write_model(model, out);
  if (!out.flush()) throw std::runtime_error("I/O failure writing '" + path.string() + "'");
}

FingerprintModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model '" + path.string() + "'");
  return read_model(in);
}

}  // namespace powerprint
