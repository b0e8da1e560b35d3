// powerprint: synthesize corpora, train fingerprint models, classify traces
// and run the cross-validated noise experiments.

#include "powerprint/eval.hpp"
#include "powerprint/features.hpp"
#include "powerprint/forest.hpp"
#include "powerprint/pipeline.hpp"
#include "powerprint/synth.hpp"
#include "powerprint/text.hpp"
#include "powerprint/trace.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace powerprint;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitAlert = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  Seed seed = kDefaultSeed;
  std::string features_path;
  std::string forest_path;
  std::string out = ".";
};

FeatureConfig feature_config(const Globals& g) {
  return g.features_path.empty() ? FeatureConfig{} : load_feature_config(g.features_path);
}

ForestParams forest_params(const Globals& g) {
  return g.forest_path.empty() ? ForestParams{} : load_forest_params(g.forest_path);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

/// Config echo written next to every command's outputs.
void write_run_config(const Globals& g, const std::string& command, const std::vector<std::string>& settings,
                      const FeatureConfig* features, const ForestParams* forest) {
  auto out = open_out(fs::path(g.out) / "run_config.txt");
  out << "# powerprint run config\n"
      << "# seed=" << g.seed << '\n'
      << "command=" << command << '\n'
      << "seed=" << g.seed << '\n';
  for (const auto& s : settings) out << s << '\n';
  if (features) {
    out << "[features]\n";
    write_feature_config(*features, out);
    out << "[end features]\n";
  }
  if (forest) {
    out << "[forest]\n";
    write_forest_params(*forest, out);
    out << "[end forest]\n";
  }
}

/// "0..10" or "0,2,5".
std::vector<unsigned> parse_levels(const std::string& spec) {
  std::vector<unsigned> levels;
  auto level = [&](std::string_view s) {
    const auto v = text::parse_uint(text::trim(s));
    if (!v || *v > 1000) throw UsageError("bad noise level '" + std::string(s) + "'");
    return static_cast<unsigned>(*v);
  };
  if (const auto dots = spec.find(".."); dots != std::string::npos) {
    const unsigned lo = level(std::string_view(spec).substr(0, dots));
    const unsigned hi = level(std::string_view(spec).substr(dots + 2));
    if (hi < lo) throw UsageError("empty level range '" + spec + "'");
    for (unsigned l = lo; l <= hi; ++l) levels.push_back(l);
  } else {
    for (const auto part : text::split(spec, ',')) levels.push_back(level(part));
  }
  return levels;
}

std::string level_list(const std::vector<unsigned>& levels) {
  std::vector<std::string> parts;
  for (const auto l : levels) parts.push_back(std::to_string(l));
  return text::join(parts, ",");
}

bool is_trace_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::string first;
  std::getline(in, first);
  return text::trim(first) == "# powerprint-trace v1";
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string profiles;
  std::size_t n = 50;
  double rate = 120.0;
  int noise_level = -1;
};

int run_synth(const Globals& g, const SynthArgs& a) {
  const auto profiles = a.profiles.empty() ? default_profiles() : load_profiles(a.profiles);
  const auto dataset = generate_corpus(profiles, a.n, a.rate, g.seed);
  const fs::path out(g.out);
  const std::string seed_line = "seed=" + std::to_string(g.seed);
  save_manifest(dataset, out / "manifest.csv",
                {"powerprint-manifest v1", seed_line, "profiles=" + (a.profiles.empty() ? "bundled" : a.profiles),
                 "n_per_program=" + std::to_string(a.n), "rate_hz=" + text::format_double(a.rate)});
  std::vector<std::string> settings{"profiles=" + (a.profiles.empty() ? std::string("bundled") : a.profiles),
                                    "n_per_program=" + std::to_string(a.n),
                                    "rate_hz=" + text::format_double(a.rate)};
  if (a.noise_level >= 0) {
    const auto level = static_cast<unsigned>(a.noise_level);
    const auto noisy = build_noisy_dataset(dataset, level, derive_seed(g.seed, 7), {});
    const std::string tag = "noise" + std::to_string(level);
    save_manifest(noisy.dataset, out / ("manifest_" + tag + ".csv"),
                  {"powerprint-manifest v1", seed_line, "noise_level=" + std::to_string(level)}, "traces_" + tag);
    auto log = open_out(out / ("recipes_" + tag + ".txt"));
    log << "# " << seed_line << "\n# noise_level=" << level << '\n';
    write_recipe_log(dataset, noisy, log);
    settings.push_back("noise_level=" + std::to_string(level));
  }
  write_run_config(g, "synth", settings, nullptr, nullptr);
  std::cout << "wrote " << dataset.size() << " samples to " << (out / "manifest.csv").string() << '\n';
  return kExitOk;
}

struct TrainArgs {
  std::string manifest;
  std::string model;
  std::string export_features;
  bool drop_short_labels = false;
  unsigned train_noise_level = 0;
};

int run_train(const Globals& g, const TrainArgs& a) {
  const auto features = feature_config(g);
  const auto forest = forest_params(g);
  auto dataset = load_manifest(a.manifest);
  if (a.train_noise_level > 0) dataset = build_noisy_dataset(dataset, a.train_noise_level, derive_seed(g.seed, 3)).dataset;
  const auto result = fit(dataset, features, forest, g.seed, {a.drop_short_labels});
  const fs::path out(g.out);
  const fs::path model_path = a.model.empty() ? out / "model.txt" : fs::path(a.model);
  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  save_model(result.model, model_path);

  auto report = open_out(out / "fit_report.txt");
  report << "# powerprint fit report\n# seed=" << g.seed << '\n'
         << "samples=" << dataset.size() << '\n'
         << "training_rows=" << result.report.training_rows << '\n'
         << "labels=" << text::join(result.model.labels(), ",") << '\n'
         << "excluded_samples=" << text::join(result.report.excluded_samples, ",") << '\n'
         << "dropped_labels=" << text::join(result.report.dropped_labels, ",") << '\n';

  if (!a.export_features.empty()) {
    FeatureTable table;
    table.feature_names = features.feature_names();
    table.label_names = result.model.labels();
    for (const auto& s : dataset.samples()) {
      const auto it = std::find(table.label_names.begin(), table.label_names.end(), s.label);
      if (it == table.label_names.end()) continue;
      try {
        append_rows(table, featurize(s.trace, features), static_cast<int>(it - table.label_names.begin()), s.id);
      } catch (const TooShortError&) {
      }
    }
    auto csv = open_out(a.export_features);
    csv << "# seed=" << g.seed << '\n';
    write_feature_table(table, csv);
  }
  write_run_config(g, "train",
                   {"manifest=" + a.manifest, "model=" + model_path.string(),
                    "drop_short_labels=" + std::string(a.drop_short_labels ? "true" : "false"),
                    "train_noise_level=" + std::to_string(a.train_noise_level)},
                   &features, &forest);
  std::cout << "trained on " << result.report.training_rows << " window groups, "
            << result.report.excluded_samples.size() << " samples excluded; model " << model_path.string() << '\n';
  return kExitOk;
}

struct ClassifyArgs {
  std::string model;
  std::string input;
  double threshold = 0.5;
  std::string report;
};

int run_classify(const Globals& g, const ClassifyArgs& a) {
  const auto model = load_model(a.model);
  LabeledDataset dataset;
  if (is_trace_file(a.input)) {
    dataset = LabeledDataset(std::vector<LabeledSample>{
        {fs::path(a.input).stem().string(), load_trace(a.input), "unknown", Provenance::clean()}});
  } else {
    dataset = load_manifest(a.input);
  }
  const auto results = classify_batch(model, dataset);
  const fs::path report_path = a.report.empty() ? fs::path(g.out) / "predictions.csv" : fs::path(a.report);
  {
    auto out = open_out(report_path);
    write_prediction_report(model, results, out,
                            {"seed=" + std::to_string(g.seed), "threshold=" + text::format_double(a.threshold)});
  }
  bool errors = false;
  bool alert = false;
  for (const auto& r : results) {
    if (!r.prediction) errors = true;
    else if (r.prediction->confidence < a.threshold) alert = true;
  }
  write_run_config(g, "classify",
                   {"model=" + a.model, "input=" + a.input, "threshold=" + text::format_double(a.threshold),
                    "report=" + report_path.string()},
                   &model.features, &model.forest.params);
  std::cout << "classified " << results.size() << " samples; report " << report_path.string() << '\n';
  if (errors) {
    std::cerr << "powerprint: some samples could not be classified (see error rows)\n";
    return kExitData;
  }
  if (alert) {
    std::cerr << "powerprint: alert, at least one prediction below confidence " << a.threshold << '\n';
    return kExitAlert;
  }
  return kExitOk;
}

struct EvalArgs {
  std::string manifest;
  int folds = 3;
  int trials = 8;
  std::string levels = "0..10";
  int mi_bins = 32;
  std::size_t random_draws = 100'000;
  unsigned train_noise_level = 0;
  bool subtract_baseline = false;
};

int run_evaluate(const Globals& g, const EvalArgs& a, bool full) {
  if (a.folds < 2) throw UsageError("--folds must be at least 2");
  if (a.trials < 1) throw UsageError("--trials must be at least 1");
  if (a.mi_bins < 2) throw UsageError("--mi-bins must be at least 2");
  const auto levels = parse_levels(a.levels);
  PipelineConfig config;
  config.features = feature_config(g);
  config.forest = forest_params(g);
  config.train_noise_level = a.train_noise_level;
  config.mix.subtract_noise_baseline = a.subtract_baseline;
  config.mi_bins = a.mi_bins;
  config.random_guess_draws = a.random_draws;
  const auto dataset = load_manifest(a.manifest);
  const auto sweep = noise_sweep(dataset, levels, a.trials, a.folds, config, g.seed);

  const fs::path out(g.out);
  const std::string header = "# seed=" + std::to_string(g.seed) + " folds=" + std::to_string(a.folds) +
                             " trials=" + std::to_string(a.trials) + "\n";
  if (full) {
    for (const auto& r : sweep.levels) {
      auto f = open_out(out / ("report_level" + std::to_string(r.noise_level) + ".txt"));
      write_report(r, f);
      auto t = open_out(out / ("summary_level" + std::to_string(r.noise_level) + ".txt"));
      t << header;
      write_summary_table(r, t);
    }
  }
  {
    auto f = open_out(out / "curves.csv");
    f << header;
    write_sweep_curves(sweep, f);
  }
  {
    auto f = open_out(out / "label_curves.csv");
    f << header;
    write_label_curves(sweep, f);
  }
  write_run_config(g, full ? "evaluate" : "noise-sweep",
                   {"manifest=" + a.manifest, "folds=" + std::to_string(a.folds),
                    "trials=" + std::to_string(a.trials), "levels=" + level_list(levels),
                    "mi_bins=" + std::to_string(a.mi_bins), "random_guess_draws=" + std::to_string(a.random_draws),
                    "train_noise_level=" + std::to_string(a.train_noise_level),
                    "subtract_noise_baseline=" + std::string(a.subtract_baseline ? "true" : "false")},
                   &config.features, &config.forest);
  for (const auto& r : sweep.levels)
    std::cout << "level " << r.noise_level << ": accuracy " << r.mean_accuracy << " (macro " << r.macro_accuracy
              << "), random " << r.baseline_random.monte_carlo << ", mi "
              << (r.baseline_mi ? *r.baseline_mi : 0.0) << '\n';
  return kExitOk;
}

void add_eval_options(CLI::App* cmd, EvalArgs& a) {
  cmd->add_option("manifest", a.manifest, "Clean corpus manifest")->required();
  cmd->add_option("--folds,-k", a.folds, "Cross-validation folds")->capture_default_str();
  cmd->add_option("--trials", a.trials, "Trials per noise level")->capture_default_str();
  cmd->add_option("--levels", a.levels, "Noise levels, 'lo..hi' or a comma list")->capture_default_str();
  cmd->add_option("--mi-bins", a.mi_bins, "Histogram bins for mutual information")->capture_default_str();
  cmd->add_option("--random-draws", a.random_draws, "Monte-Carlo draws for the random-guess baseline")
      ->capture_default_str();
  cmd->add_option("--train-noise-level", a.train_noise_level, "Train on mixed samples at this level")
      ->capture_default_str();
  cmd->add_flag("--subtract-noise-baseline", a.subtract_baseline, "Remove each noise trace's floor before mixing");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"powerprint: program identification from rack-level current traces"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
  app.add_option("--features", g.features_path, "Feature configuration file");
  app.add_option("--forest", g.forest_path, "Forest parameter file");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth_cmd->add_option("--profiles", synth.profiles, "Profile file (default: bundled profiles)");
  synth_cmd->add_option("--n", synth.n, "Samples per program")->capture_default_str();
  synth_cmd->add_option("--rate", synth.rate, "Sample rate in Hz")->capture_default_str();
  synth_cmd->add_option("--noise-level", synth.noise_level, "Also write a mixed copy at this noise level");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a fingerprint model");
  train_cmd->add_option("manifest", train_args.manifest, "Training manifest")->required();
  train_cmd->add_option("--model", train_args.model, "Model output path (default: <out>/model.txt)");
  train_cmd->add_option("--export-features", train_args.export_features, "Write the feature table as CSV");
  train_cmd->add_flag("--drop-short-labels", train_args.drop_short_labels,
                      "Drop labels whose samples are all too short");
  train_cmd->add_option("--train-noise-level", train_args.train_noise_level, "Mix training samples first")
      ->capture_default_str();

  ClassifyArgs classify_args;
  auto* classify_cmd = app.add_subcommand("classify", "Classify a manifest or a single trace");
  classify_cmd->add_option("model", classify_args.model, "Model file")->required();
  classify_cmd->add_option("input", classify_args.input, "Manifest or trace file")->required();
  classify_cmd->add_option("--threshold", classify_args.threshold, "Alert below this confidence")
      ->capture_default_str();
  classify_cmd->add_option("--report", classify_args.report, "Report path (default: <out>/predictions.csv)");

  EvalArgs evaluate_args;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Cross-validated evaluation over noise levels");
  add_eval_options(evaluate_cmd, evaluate_args);

  EvalArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("noise-sweep", "Accuracy, random-guess and MI curves only");
  add_eval_options(sweep_cmd, sweep_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*synth_cmd) return run_synth(g, synth);
    if (*train_cmd) return run_train(g, train_args);
    if (*classify_cmd) return run_classify(g, classify_args);
    if (*evaluate_cmd) return run_evaluate(g, evaluate_args, true);
    if (*sweep_cmd) return run_evaluate(g, sweep_args, false);
  } catch (const UsageError& e) {
    std::cerr << "powerprint: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "powerprint: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
