#include "powerprint/eval.hpp"

#include "powerprint/parallel.hpp"
#include "powerprint/text.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace powerprint {

double ConfusionMatrix::accuracy() const {
  const long n = total();
  return n ? static_cast<double>(correct()) / static_cast<double>(n) : 0.0;
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> predicted,
                          const std::vector<std::string>& labels) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("truth and prediction lengths differ");
  const auto k = static_cast<Eigen::Index>(labels.size());
  ConfusionMatrix m{labels, Eigen::MatrixXi::Zero(k, k)};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= k || predicted[i] < 0 || predicted[i] >= k)
      throw std::invalid_argument("label index outside the vocabulary");
    ++m.counts(truth[i], predicted[i]);
  }
  return m;
}

ConfusionMatrix confusion(std::span<const std::pair<std::string, std::string>> true_predicted,
                          const std::vector<std::string>& labels) {
  std::map<std::string, int, std::less<>> index;
  for (std::size_t i = 0; i < labels.size(); ++i) index.emplace(labels[i], static_cast<int>(i));
  auto lookup = [&](const std::string& l) {
    const auto it = index.find(l);
    if (it == index.end()) throw std::invalid_argument("unknown label '" + l + "'");
    return it->second;
  };
  std::vector<int> truth;
  std::vector<int> predicted;
  for (const auto& [t, p] : true_predicted) {
    truth.push_back(lookup(t));
    predicted.push_back(lookup(p));
  }
  return confusion(truth, predicted, labels);
}

double f_score(double precision, double recall) noexcept {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

ClassMetrics precision_recall_f(const ConfusionMatrix& matrix, std::size_t label_index) {
  const auto k = static_cast<Eigen::Index>(label_index);
  if (k >= matrix.counts.rows()) throw std::out_of_range("label index outside the confusion matrix");
  ClassMetrics m;
  const long tp = matrix.counts(k, k);
  const long predicted = matrix.counts.col(k).cast<long>().sum();
  const long actual = matrix.counts.row(k).cast<long>().sum();
  m.support = actual;
  if (predicted == 0) m.precision_undefined = true;
  else m.precision = static_cast<double>(tp) / static_cast<double>(predicted);
  if (actual == 0) m.recall_undefined = true;
  else m.recall = static_cast<double>(tp) / static_cast<double>(actual);
  m.f_score = f_score(m.precision, m.recall);
  return m;
}

ClassMetrics precision_recall_f(const ConfusionMatrix& matrix, std::string_view label) {
  const auto it = std::find(matrix.labels.begin(), matrix.labels.end(), label);
  if (it == matrix.labels.end()) throw std::invalid_argument("unknown label '" + std::string(label) + "'");
  return precision_recall_f(matrix, static_cast<std::size_t>(it - matrix.labels.begin()));
}

std::vector<int> stratified_folds(std::span<const int> labels, int n_labels, int k, Seed seed) {
  if (k < 2) throw std::invalid_argument("cross validation needs at least 2 folds");
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(n_labels));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_labels) throw std::invalid_argument("label index outside the vocabulary");
    members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::vector<int> fold(labels.size(), -1);
  for (std::size_t l = 0; l < members.size(); ++l) {
    auto& m = members[l];
    if (m.empty()) continue;
    if (m.size() < static_cast<std::size_t>(k))
      throw std::invalid_argument("label " + std::to_string(l) + " has " + std::to_string(m.size()) +
                                  " samples, fewer than " + std::to_string(k) + " folds");
    Rng rng(derive_seed(seed, l));
    std::shuffle(m.begin(), m.end(), rng);
    for (std::size_t j = 0; j < m.size(); ++j) fold[m[j]] = static_cast<int>(j % static_cast<std::size_t>(k));
  }
  return fold;
}

RandomGuess random_guess_baseline(int n_labels, std::span<const int> group_counts, std::size_t draws, Seed seed) {
  if (n_labels < 2) throw std::invalid_argument("random guessing needs at least two labels");
  RandomGuess out;
  out.analytic = 1.0 / static_cast<double>(n_labels);
  if (group_counts.empty() || draws == 0) {
    out.monte_carlo = out.analytic;
    return out;
  }
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_sample(0, group_counts.size() - 1);
  std::uniform_int_distribution<int> pick_label(0, n_labels - 1);
  std::vector<int> votes(static_cast<std::size_t>(n_labels));
  std::size_t hits = 0;
  for (std::size_t d = 0; d < draws; ++d) {
    const int groups = std::max(1, group_counts[pick_sample(rng)]);
    const int truth = pick_label(rng);
    std::fill(votes.begin(), votes.end(), 0);
    for (int g = 0; g < groups; ++g) ++votes[static_cast<std::size_t>(pick_label(rng))];
    const auto mode = std::max_element(votes.begin(), votes.end()) - votes.begin();
    if (mode == truth) ++hits;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(draws);
  out.monte_carlo = p;
  out.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(draws));
  return out;
}

namespace {

std::vector<int> histogram_bins(const Eigen::Ref<const Eigen::VectorXd>& x, int bins) {
  const double lo = x.minCoeff();
  const double hi = x.maxCoeff();
  std::vector<int> out(static_cast<std::size_t>(x.size()), 0);
  if (!(hi > lo)) return out;
  const double width = (hi - lo) / bins;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    out[static_cast<std::size_t>(i)] = std::min(bins - 1, static_cast<int>((x(i) - lo) / width));
  return out;
}

double entropy_bits(const std::vector<long>& counts, double n) {
  double h = 0.0;
  for (const long c : counts)
    if (c > 0) {
      const double p = static_cast<double>(c) / n;
      h -= p * std::log2(p);
    }
  return h;
}

}  // namespace

MutualInformation mutual_information(const Eigen::Ref<const Eigen::VectorXd>& x,
                                     const Eigen::Ref<const Eigen::VectorXd>& y, int bins) {
  if (x.size() != y.size()) throw std::invalid_argument("mutual information needs equal-length series");
  if (x.size() == 0) throw std::invalid_argument("mutual information of empty series");
  if (bins < 2) throw std::invalid_argument("mutual information needs at least 2 bins");
  const auto bx = histogram_bins(x, bins);
  const auto by = histogram_bins(y, bins);
  const auto b = static_cast<std::size_t>(bins);
  std::vector<long> cx(b, 0), cy(b, 0), cxy(b * b, 0);
  for (std::size_t i = 0; i < bx.size(); ++i) {
    const auto ix = static_cast<std::size_t>(bx[i]);
    const auto iy = static_cast<std::size_t>(by[i]);
    ++cx[ix];
    ++cy[iy];
    ++cxy[ix * b + iy];
  }
  const double n = static_cast<double>(x.size());
  MutualInformation mi;
  mi.entropy_x = entropy_bits(cx, n);
  mi.entropy_y = entropy_bits(cy, n);
  mi.joint_entropy = entropy_bits(cxy, n);
  mi.bits = std::max(0.0, mi.entropy_x + mi.entropy_y - mi.joint_entropy);
  const double norm = std::max(mi.entropy_x, mi.entropy_y);
  if (norm > 0.0) mi.normalized = std::clamp(mi.bits / norm, 0.0, 1.0);
  else mi.normalized = x == y ? 1.0 : 0.0;
  return mi;
}

// ---------------------------------------------------------------------------

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, WilcoxonMethod method) {
  if (a.size() != b.size()) throw std::invalid_argument("signed-rank test needs paired samples of equal length");
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) diff.push_back(a[i] - b[i]);
  const auto n = diff.size();
  if (n < 5) throw std::invalid_argument("signed-rank test needs at least 5 nonzero differences, got " + std::to_string(n));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(diff[i]) < std::abs(diff[j]); });
  std::vector<double> rank(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(diff[order[j + 1]]) == std::abs(diff[order[i]])) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    const double ties = static_cast<double>(j - i + 1);
    tie_term += ties * ties * ties - ties;
    i = j + 1;
  }

  WilcoxonResult r;
  r.n = static_cast<int>(n);
  for (std::size_t i = 0; i < n; ++i) (diff[i] > 0 ? r.w_plus : r.w_minus) += rank[i];

  const bool exact = method == WilcoxonMethod::Exact || (method == WilcoxonMethod::Auto && n <= 12);
  if (exact) {
    if (n > 30) throw std::invalid_argument("exact signed-rank enumeration limited to 30 differences");
    const std::uint64_t patterns = std::uint64_t{1} << n;
    std::uint64_t at_least = 0;
    std::uint64_t at_most = 0;
    constexpr double eps = 1e-9;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
      double w = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1U) w += rank[i];
      if (w >= r.w_plus - eps) ++at_least;
      if (w <= r.w_plus + eps) ++at_most;
    }
    r.p_greater = static_cast<double>(at_least) / static_cast<double>(patterns);
    const double p_less = static_cast<double>(at_most) / static_cast<double>(patterns);
    r.p_two_sided = std::min(1.0, 2.0 * std::min(r.p_greater, p_less));
    r.exact = true;
  } else {
    const double nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    const double sd = std::sqrt(nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0);
    auto upper_tail = [](double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); };
    r.p_greater = upper_tail((r.w_plus - mean - 0.5) / sd);
    const double p_less = upper_tail((mean - r.w_plus - 0.5) / sd);
    r.p_two_sided = std::min(1.0, 2.0 * std::min(r.p_greater, p_less));
  }
  return r;
}

// ---------------------------------------------------------------------------

void fill_metrics(EvalReport& report) {
  const auto& m = report.confusion;
  report.labels = m.labels;
  report.per_label.clear();
  double recall_sum = 0.0;
  int with_support = 0;
  for (std::size_t k = 0; k < m.labels.size(); ++k) {
    report.per_label.push_back(precision_recall_f(m, k));
    if (!report.per_label.back().recall_undefined) {
      recall_sum += report.per_label.back().recall;
      ++with_support;
    }
  }
  report.micro_accuracy = m.accuracy();
  report.macro_accuracy = with_support ? recall_sum / with_support : 0.0;
}

namespace {

/// Shared state of a cross-validated experiment over the usable samples.
struct Experiment {
  const LabeledDataset& dataset;
  const PipelineConfig& config;
  Seed seed;
  int k;
  std::vector<std::size_t> kept;  // dataset indices passing the length filter
  std::vector<int> label;         // per kept sample, index into vocab
  std::vector<std::string> vocab;
  std::vector<Eigen::MatrixXd> clean_rows;
  std::vector<int> fold;
  std::vector<FingerprintModel> models;
  std::vector<std::string> excluded;
  std::vector<std::string> dropped;

  Experiment(const LabeledDataset& d, const PipelineConfig& c, Seed s, int folds)
      : dataset(d), config(c), seed(s), k(folds) {
    config.features.validate();
    config.forest.validate();
    std::vector<std::optional<Eigen::MatrixXd>> rows(d.size());
    parallel_for(d.size(), [&](std::size_t i) {
      try {
        rows[i] = featurize(d[i].trace, c.features);
      } catch (const TooShortError&) {
      }
    });
    const auto full_labels = d.label_indices();
    std::vector<int> remap(d.labels().size(), -1);
    std::vector<int> present(d.labels().size(), 0);
    for (std::size_t i = 0; i < d.size(); ++i) {
      ++present[static_cast<std::size_t>(full_labels[i])];
      if (rows[i]) remap[static_cast<std::size_t>(full_labels[i])] = 0;
      else excluded.push_back(d[i].id);
    }
    for (std::size_t l = 0; l < remap.size(); ++l) {
      if (remap[l] == 0) {
        remap[l] = static_cast<int>(vocab.size());
        vocab.push_back(d.labels()[l]);
      } else if (present[l]) {
        dropped.push_back(d.labels()[l]);
      }
    }
    if (vocab.size() < 2) throw DataError("evaluation needs at least two labels with usable samples");
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!rows[i]) continue;
      if (!d[i].provenance.is_clean()) throw DataError("evaluation corpus must contain clean samples only");
      kept.push_back(i);
      label.push_back(remap[static_cast<std::size_t>(full_labels[i])]);
      clean_rows.push_back(std::move(*rows[i]));
    }
    try {
      fold = stratified_folds(label, static_cast<int>(vocab.size()), k, derive_seed(seed, 1));
    } catch (const std::invalid_argument& e) {
      throw DataError(e.what());
    }
    train_models();
  }

  Eigen::MatrixXd mixed_rows(std::size_t j, unsigned level, Seed mix_seed, double* nmi) const {
    const auto i = kept[j];
    auto [mixed, recipe] = mix_noise(dataset, i, level, mix_seed, config.mix);
    if (nmi) *nmi = mutual_information(dataset[i].trace.samples(), mixed.trace.samples(), config.mi_bins).normalized;
    return featurize(mixed.trace, config.features);
  }

  void train_models() {
    const auto names = config.features.feature_names();
    std::vector<Eigen::MatrixXd> train_rows;
    if (config.train_noise_level > 0) {
      train_rows.resize(kept.size());
      parallel_for(kept.size(), [&](std::size_t j) {
        train_rows[j] = mixed_rows(j, config.train_noise_level, derive_seed(seed, 3, j), nullptr);
      });
    }
    const auto& source = config.train_noise_level > 0 ? train_rows : clean_rows;
    for (int f = 0; f < k; ++f) {
      FeatureTable table;
      table.feature_names = names;
      table.label_names = vocab;
      for (std::size_t j = 0; j < kept.size(); ++j)
        if (fold[j] != f) append_rows(table, source[j], label[j], dataset[kept[j]].id);
      models.push_back({train(table.values, table.labels, vocab, names, config.forest, derive_seed(seed, 2, f)),
                        config.features});
    }
  }

  EvalReport run_level(unsigned level, int trials) const {
    EvalReport report;
    report.folds = k;
    report.trials = trials;
    report.noise_level = level;
    report.seed = seed;
    report.mi_bins = config.mi_bins;
    report.excluded_samples = excluded;
    report.dropped_labels = dropped;

    const auto n_labels = static_cast<Eigen::Index>(vocab.size());
    report.confusion = {vocab, Eigen::MatrixXi::Zero(n_labels, n_labels)};
    double nmi_total = 0.0;
    std::vector<int> group_counts(kept.size());
    for (int t = 0; t < trials; ++t) {
      std::vector<int> predicted(kept.size());
      std::vector<double> nmi(kept.size(), 1.0);
      if (level == 0 && t > 0) {
        // clean evaluation does not depend on the trial
        const auto& first = report.confusion;
        report.confusion.counts += first.counts / t;
        report.trial_accuracy.push_back(report.trial_accuracy.front());
        nmi_total += nmi_total / t;
        continue;
      }
      const Seed trial_seed = derive_seed(seed, 5, derive_seed(level, t));
      parallel_for(kept.size(), [&](std::size_t j) {
        Eigen::MatrixXd rows;
        if (level == 0) {
          rows = clean_rows[j];
          nmi[j] = mutual_information(dataset[kept[j]].trace.samples(), dataset[kept[j]].trace.samples(),
                                      config.mi_bins).normalized;
        } else {
          rows = mixed_rows(j, level, derive_seed(trial_seed, j), &nmi[j]);
        }
        const auto prediction = classify_rows(models[static_cast<std::size_t>(fold[j])], rows);
        predicted[j] = prediction.predicted;
        group_counts[j] = static_cast<int>(rows.rows());
      });
      const auto m = confusion(label, predicted, vocab);
      report.confusion.counts += m.counts;
      report.trial_accuracy.push_back(m.accuracy());
      nmi_total += std::accumulate(nmi.begin(), nmi.end(), 0.0) / static_cast<double>(nmi.size());
    }
    fill_metrics(report);
    report.mean_accuracy =
        std::accumulate(report.trial_accuracy.begin(), report.trial_accuracy.end(), 0.0) / trials;
    report.baseline_mi = nmi_total / trials;
    report.baseline_random = random_guess_baseline(static_cast<int>(vocab.size()), group_counts,
                                                   config.random_guess_draws, derive_seed(seed, 4));
    std::vector<double> recall;
    for (const auto& m : report.per_label) recall.push_back(m.recall);
    const std::vector<double> chance(recall.size(), report.baseline_random.analytic);
    try {
      report.significance = wilcoxon_signed_rank(recall, chance);
    } catch (const std::invalid_argument&) {
      report.significance.reset();
    }
    return report;
  }
};

}  // namespace

EvalReport kfold_cv(const LabeledDataset& dataset, int k, const PipelineConfig& config, Seed seed) {
  return Experiment(dataset, config, seed, k).run_level(0, 1);
}

SweepResult noise_sweep(const LabeledDataset& dataset, const std::vector<unsigned>& levels, int trials, int k,
                        const PipelineConfig& config, Seed seed) {
  if (trials < 1) throw std::invalid_argument("at least one trial is required");
  const Experiment experiment(dataset, config, seed, k);
  SweepResult out;
  for (const unsigned level : levels) out.levels.push_back(experiment.run_level(level, trials));
  return out;
}

// ---------------------------------------------------------------------------
// Report text
// ---------------------------------------------------------------------------

namespace {
constexpr std::string_view kReportMagic = "# powerprint-report v1";

std::string join_doubles(const std::vector<double>& v) {
  std::vector<std::string> parts;
  for (const double d : v) parts.push_back(text::format_double(d));
  return text::join(parts, ",");
}
}  // namespace

void write_report(const EvalReport& r, std::ostream& out) {
  using text::format_double;
  out << kReportMagic << '\n'
      << "seed=" << r.seed << '\n'
      << "noise_level=" << r.noise_level << '\n'
      << "folds=" << r.folds << '\n'
      << "trials=" << r.trials << '\n'
      << "mi_bins=" << r.mi_bins << '\n'
      << "mi_normalization=max-entropy\n"
      << "excluded_samples=" << text::join(r.excluded_samples, ",") << '\n'
      << "dropped_labels=" << text::join(r.dropped_labels, ",") << '\n'
      << "[per-label]\n"
      << "label,precision,recall,f_score,support,undefined\n";
  for (std::size_t k = 0; k < r.labels.size(); ++k) {
    const auto& m = r.per_label[k];
    out << r.labels[k] << ',' << format_double(m.precision) << ',' << format_double(m.recall) << ','
        << format_double(m.f_score) << ',' << m.support << ','
        << (m.precision_undefined ? (m.recall_undefined ? "both" : "precision") : (m.recall_undefined ? "recall" : "none"))
        << '\n';
  }
  out << "[summary]\n"
      << "micro_accuracy=" << format_double(r.micro_accuracy) << '\n'
      << "macro_accuracy=" << format_double(r.macro_accuracy) << '\n'
      << "mean_accuracy=" << format_double(r.mean_accuracy) << '\n'
      << "trial_accuracy=" << join_doubles(r.trial_accuracy) << '\n'
      << "baseline_random=" << format_double(r.baseline_random.analytic) << '\n'
      << "baseline_random_mc=" << format_double(r.baseline_random.monte_carlo) << '\n'
      << "baseline_random_mc_stderr=" << format_double(r.baseline_random.std_error) << '\n'
      << "baseline_mi=" << (r.baseline_mi ? format_double(*r.baseline_mi) : std::string("none")) << '\n';
  if (r.significance)
    out << "wilcoxon_w_plus=" << format_double(r.significance->w_plus) << '\n'
        << "wilcoxon_n=" << r.significance->n << '\n'
        << "wilcoxon_p_greater=" << format_double(r.significance->p_greater) << '\n'
        << "wilcoxon_exact=" << (r.significance->exact ? "true" : "false") << '\n';
  else
    out << "wilcoxon_w_plus=none\n";
  out << "[confusion]\n"
      << "true\\predicted";
  for (const auto& l : r.confusion.labels) out << ',' << l;
  out << '\n';
  for (std::size_t k = 0; k < r.confusion.labels.size(); ++k) {
    out << r.confusion.labels[k];
    for (Eigen::Index c = 0; c < r.confusion.counts.cols(); ++c) out << ',' << r.confusion.counts(static_cast<Eigen::Index>(k), c);
    out << '\n';
  }
  out << "[end]\n";
}

EvalReport read_report(std::istream& in) {
  EvalReport r;
  std::string raw;
  std::size_t line = 0;
  auto next = [&](const char* what) {
    if (!std::getline(in, raw)) throw DataError(std::string("report ends early, expected ") + what, line + 1);
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    return raw;
  };
  auto value = [&](std::string_view key) {
    const auto l = next(std::string(key).c_str());
    if (l.rfind(std::string(key) + "=", 0) != 0) throw DataError("expected '" + std::string(key) + "='", line);
    return l.substr(key.size() + 1);
  };
  auto num = [&](const std::string& s) {
    const auto v = text::parse_double(s);
    if (!v) throw DataError("expected a number, got '" + s + "'", line);
    return *v;
  };
  auto integer = [&](const std::string& s) {
    const auto v = text::parse_int(s);
    if (!v) throw DataError("expected an integer, got '" + s + "'", line);
    return *v;
  };
  auto list = [](const std::string& s) {
    std::vector<std::string> out;
    if (!s.empty())
      for (const auto p : text::split(s, ',')) out.emplace_back(p);
    return out;
  };

  if (next("header") != kReportMagic) throw DataError("not a powerprint-report v1 file", line);
  r.seed = static_cast<Seed>(std::stoull(value("seed")));
  r.noise_level = static_cast<unsigned>(integer(value("noise_level")));
  r.folds = static_cast<int>(integer(value("folds")));
  r.trials = static_cast<int>(integer(value("trials")));
  r.mi_bins = static_cast<int>(integer(value("mi_bins")));
  value("mi_normalization");
  r.excluded_samples = list(value("excluded_samples"));
  r.dropped_labels = list(value("dropped_labels"));
  if (next("[per-label]") != "[per-label]") throw DataError("expected [per-label]", line);
  next("per-label header");
  while (next("per-label row") != "[summary]") {
    const auto f = text::split(raw, ',');
    if (f.size() != 6) throw DataError("per-label rows have 6 fields", line);
    r.labels.emplace_back(f[0]);
    ClassMetrics m;
    m.precision = num(std::string(f[1]));
    m.recall = num(std::string(f[2]));
    m.f_score = num(std::string(f[3]));
    m.support = integer(std::string(f[4]));
    m.precision_undefined = f[5] == "precision" || f[5] == "both";
    m.recall_undefined = f[5] == "recall" || f[5] == "both";
    r.per_label.push_back(m);
  }
  r.micro_accuracy = num(value("micro_accuracy"));
  r.macro_accuracy = num(value("macro_accuracy"));
  r.mean_accuracy = num(value("mean_accuracy"));
  for (const auto& s : list(value("trial_accuracy"))) r.trial_accuracy.push_back(num(s));
  r.baseline_random.analytic = num(value("baseline_random"));
  r.baseline_random.monte_carlo = num(value("baseline_random_mc"));
  r.baseline_random.std_error = num(value("baseline_random_mc_stderr"));
  if (const auto mi = value("baseline_mi"); mi != "none") r.baseline_mi = num(mi);
  if (const auto w = value("wilcoxon_w_plus"); w != "none") {
    WilcoxonResult s;
    s.w_plus = num(w);
    s.n = static_cast<int>(integer(value("wilcoxon_n")));
    s.p_greater = num(value("wilcoxon_p_greater"));
    s.exact = value("wilcoxon_exact") == "true";
    s.w_minus = s.n * (s.n + 1) / 2.0 - s.w_plus;
    r.significance = s;
  }
  if (next("[confusion]") != "[confusion]") throw DataError("expected [confusion]", line);
  const std::string header_line = next("confusion header");
  const auto header = text::split(header_line, ',');
  for (std::size_t i = 1; i < header.size(); ++i) r.confusion.labels.emplace_back(header[i]);
  const auto n = static_cast<Eigen::Index>(r.confusion.labels.size());
  r.confusion.counts = Eigen::MatrixXi::Zero(n, n);
  for (Eigen::Index row = 0; row < n; ++row) {
    const std::string row_line = next("confusion row");
    const auto f = text::split(row_line, ',');
    if (static_cast<Eigen::Index>(f.size()) != n + 1) throw DataError("confusion row has the wrong width", line);
    for (Eigen::Index c = 0; c < n; ++c) r.confusion.counts(row, c) = static_cast<int>(integer(std::string(f[static_cast<std::size_t>(c + 1)])));
  }
  if (next("[end]") != "[end]") throw DataError("expected [end]", line);
  return r;
}

void write_summary_table(const EvalReport& r, std::ostream& out) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %14s %11s %8s\n", "Program", "Precision (%)", "Recall (%)", "F Score");
  out << buf;
  for (std::size_t k = 0; k < r.labels.size(); ++k) {
    const auto& m = r.per_label[k];
    std::snprintf(buf, sizeof buf, "%-16s %14.2f %11.2f %8.2f\n", r.labels[k].c_str(), 100.0 * m.precision,
                  100.0 * m.recall, m.f_score);
    out << buf;
  }
  for (const auto& l : r.dropped_labels) {
    std::snprintf(buf, sizeof buf, "%-16s %14s %11s %8s\n", l.c_str(), "--", "--", "--");
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "accuracy %.4f (macro %.4f), random guess %.4f\n", r.micro_accuracy,
                r.macro_accuracy, r.baseline_random.analytic);
  out << buf;
}

void write_sweep_curves(const SweepResult& sweep, std::ostream& out) {
  out << "level,accuracy,random,mi\n";
  for (const auto& r : sweep.levels)
    out << r.noise_level << ',' << text::format_double(r.mean_accuracy) << ','
        << text::format_double(r.baseline_random.monte_carlo) << ','
        << (r.baseline_mi ? text::format_double(*r.baseline_mi) : std::string("nan")) << '\n';
}

void write_label_curves(const SweepResult& sweep, std::ostream& out) {
  out << "level,label,precision,recall,f_score\n";
  for (const auto& r : sweep.levels)
    for (std::size_t k = 0; k < r.labels.size(); ++k)
      out << r.noise_level << ',' << r.labels[k] << ',' << text::format_double(r.per_label[k].precision) << ','
          << text::format_double(r.per_label[k].recall) << ',' << text::format_double(r.per_label[k].f_score) << '\n';
}

}  // namespace powerprint
