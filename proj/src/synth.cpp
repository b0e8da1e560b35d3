#include "powerprint/synth.hpp"

#include "powerprint/text.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace powerprint {

char to_char(PhaseKind kind) noexcept {
  switch (kind) {
    case PhaseKind::Input: return 'I';
    case PhaseKind::Processing: return 'P';
    case PhaseKind::Output: return 'O';
  }
  return '?';
}

namespace {

void require(bool ok, const std::string& profile, const std::string& what) {
  if (!ok) throw std::invalid_argument("profile '" + profile + "': " + what);
}

bool finite_non_negative(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

void ProgramProfile::validate() const {
  require(is_valid_sample_id(name), name, "name must match [A-Za-z0-9._-]+");
  require(finite_non_negative(idle_baseline_amps), name, "idle baseline must be >= 0");
  require(finite_non_negative(jitter_std_amps), name, "jitter must be >= 0");
  require(std::isfinite(min_duration_seconds) && min_duration_seconds > 0.0 &&
              std::isfinite(max_duration_seconds) && max_duration_seconds >= min_duration_seconds,
          name, "duration range must be positive with min <= max");
  require(!phases.empty(), name, "phase plan is empty");
  double total = 0.0;
  for (const auto& phase : phases) {
    require(finite_non_negative(phase.mean_amps), name, "phase mean must be >= 0");
    require(std::isfinite(phase.duration_seconds) && phase.duration_seconds > 0.0, name,
            "phase duration must be positive");
    for (const auto& c : phase.periodic) {
      require(std::isfinite(c.frequency_hz) && c.frequency_hz > 0.0, name, "periodic frequency must be positive");
      require(finite_non_negative(c.amplitude_amps), name, "periodic amplitude must be >= 0");
    }
    total += phase.duration_seconds;
  }
  require(total >= min_duration_seconds - 1e-9 && total <= max_duration_seconds + 1e-9, name,
          "phase durations must sum to within the duration range");
}

void ProgramProfile::validate_for_rate(double sample_rate_hz) const {
  validate();
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz))
    throw std::invalid_argument("sample rate must be positive");
  for (const auto& phase : phases)
    for (const auto& c : phase.periodic)
      require(c.frequency_hz < sample_rate_hz / 2.0, name,
              "periodic component at " + text::format_double(c.frequency_hz) +
                  " Hz aliases at sample rate " + text::format_double(sample_rate_hz) + " Hz");
}

// ---------------------------------------------------------------------------
// Profile file
//
//   # comment
//   [profile NAME]
//   family=high-draw
//   idle_baseline_amps=20
//   jitter_std_amps=0.3
//   duration_seconds=40,60
//   [phase P]
//   mean_amps=7
//   duration_seconds=50
//   periodic=1.5:2.0,6:0.5
// ---------------------------------------------------------------------------

namespace {

PhaseKind parse_kind(std::string_view s, std::size_t line) {
  if (s == "I") return PhaseKind::Input;
  if (s == "P") return PhaseKind::Processing;
  if (s == "O") return PhaseKind::Output;
  throw DataError("phase kind must be I, P or O", line);
}

double number(std::string_view s, std::size_t line) {
  const auto v = text::parse_double(s);
  if (!v || !std::isfinite(*v)) throw DataError("expected a number, got '" + std::string(s) + "'", line);
  return *v;
}

}  // namespace

std::vector<ProgramProfile> read_profiles(std::istream& in) {
  std::vector<ProgramProfile> profiles;
  Phase* phase = nullptr;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto body = text::trim(raw);
    if (body.empty() || body.front() == '#') continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw DataError("unterminated section header", line);
      const auto inner = text::trim(body.substr(1, body.size() - 2));
      const auto space = inner.find(' ');
      const auto kind = inner.substr(0, space);
      const auto arg = space == std::string_view::npos ? std::string_view{} : text::trim(inner.substr(space));
      if (kind == "profile") {
        if (arg.empty()) throw DataError("profile section needs a name", line);
        profiles.push_back({});
        profiles.back().name = std::string(arg);
        phase = nullptr;
      } else if (kind == "phase") {
        if (profiles.empty()) throw DataError("phase section outside a profile", line);
        profiles.back().phases.push_back({});
        phase = &profiles.back().phases.back();
        phase->kind = parse_kind(arg, line);
      } else {
        throw DataError("unknown section '" + std::string(kind) + "'", line);
      }
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw DataError("expected key=value", line);
    const auto key = text::trim(body.substr(0, eq));
    const auto value = text::trim(body.substr(eq + 1));
    if (profiles.empty()) throw DataError("key outside a profile section", line);
    auto& profile = profiles.back();
    if (phase) {
      if (key == "mean_amps") {
        phase->mean_amps = number(value, line);
      } else if (key == "duration_seconds") {
        phase->duration_seconds = number(value, line);
      } else if (key == "periodic") {
        for (const auto item : text::split(value, ',')) {
          const auto parts = text::split(text::trim(item), ':');
          if (parts.size() != 2) throw DataError("periodic entries are <frequency_hz>:<amplitude_amps>", line);
          phase->periodic.push_back({number(parts[0], line), number(parts[1], line)});
        }
      } else {
        throw DataError("unknown phase key '" + std::string(key) + "'", line);
      }
    } else {
      if (key == "family") {
        profile.family = std::string(value);
      } else if (key == "idle_baseline_amps") {
        profile.idle_baseline_amps = number(value, line);
      } else if (key == "jitter_std_amps") {
        profile.jitter_std_amps = number(value, line);
      } else if (key == "duration_seconds") {
        const auto parts = text::split(value, ',');
        if (parts.size() == 1) {
          profile.min_duration_seconds = profile.max_duration_seconds = number(parts[0], line);
        } else if (parts.size() == 2) {
          profile.min_duration_seconds = number(parts[0], line);
          profile.max_duration_seconds = number(parts[1], line);
        } else {
          throw DataError("duration_seconds is <s> or <min>,<max>", line);
        }
      } else {
        throw DataError("unknown profile key '" + std::string(key) + "'", line);
      }
    }
  }
  std::set<std::string> names;
  for (const auto& p : profiles) {
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw DataError(e.what());
    }
    if (!names.insert(p.name).second) throw DataError("duplicate profile '" + p.name + "'");
  }
  return profiles;
}

std::vector<ProgramProfile> load_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open profile file '" + path.string() + "'");
  return read_profiles(in);
}

void write_profiles(const std::vector<ProgramProfile>& profiles, std::ostream& out) {
  using text::format_double;
  out << "# powerprint-profiles v1\n";
  for (const auto& p : profiles) {
    out << "\n[profile " << p.name << "]\n";
    if (!p.family.empty()) out << "family=" << p.family << '\n';
    out << "idle_baseline_amps=" << format_double(p.idle_baseline_amps) << '\n'
        << "jitter_std_amps=" << format_double(p.jitter_std_amps) << '\n'
        << "duration_seconds=" << format_double(p.min_duration_seconds) << ','
        << format_double(p.max_duration_seconds) << '\n';
    for (const auto& phase : p.phases) {
      out << "[phase " << to_char(phase.kind) << "]\n"
          << "mean_amps=" << format_double(phase.mean_amps) << '\n'
          << "duration_seconds=" << format_double(phase.duration_seconds) << '\n';
      if (!phase.periodic.empty()) {
        out << "periodic=";
        for (std::size_t i = 0; i < phase.periodic.size(); ++i)
          out << (i ? "," : "") << format_double(phase.periodic[i].frequency_hz) << ':'
              << format_double(phase.periodic[i].amplitude_amps);
        out << '\n';
      }
    }
  }
}

std::vector<ProgramProfile> default_profiles() {
  std::istringstream in{std::string(default_profiles_text())};
  return read_profiles(in);
}

// ---------------------------------------------------------------------------

PowerTrace generate_sample(const ProgramProfile& profile, double sample_rate_hz, Seed seed) {
  profile.validate_for_rate(sample_rate_hz);
  Rng rng(seed);

  std::uniform_real_distribution<double> duration_dist(profile.min_duration_seconds,
                                                       profile.max_duration_seconds);
  const double duration = profile.min_duration_seconds == profile.max_duration_seconds
                              ? profile.min_duration_seconds
                              : duration_dist(rng);
  const auto n = std::max<Eigen::Index>(1, std::llround(duration * sample_rate_hz));

  double plan_total = 0.0;
  for (const auto& phase : profile.phases) plan_total += phase.duration_seconds;
  const double stretch = duration / plan_total;

  // Each periodic component gets a random starting phase per run.
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::vector<std::vector<double>> phase_offsets;
  for (const auto& phase : profile.phases) {
    auto& offs = phase_offsets.emplace_back();
    for (std::size_t c = 0; c < phase.periodic.size(); ++c) offs.push_back(angle(rng));
  }

  std::normal_distribution<double> jitter(0.0, 1.0);
  Eigen::VectorXd samples(n);
  std::size_t current = 0;
  double phase_end = profile.phases[0].duration_seconds * stretch;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate_hz;
    while (t >= phase_end && current + 1 < profile.phases.size()) {
      ++current;
      phase_end += profile.phases[current].duration_seconds * stretch;
    }
    const auto& phase = profile.phases[current];
    double v = profile.idle_baseline_amps + phase.mean_amps;
    for (std::size_t c = 0; c < phase.periodic.size(); ++c) {
      const auto& comp = phase.periodic[c];
      v += comp.amplitude_amps * std::sin(2.0 * std::numbers::pi * comp.frequency_hz * t + phase_offsets[current][c]);
    }
    if (profile.jitter_std_amps > 0.0) v += profile.jitter_std_amps * jitter(rng);
    samples[i] = std::max(0.0, v);
  }
  return PowerTrace(std::move(samples), sample_rate_hz, profile.name);
}

LabeledDataset generate_corpus(const std::vector<ProgramProfile>& profiles, std::size_t n_per_program,
                               double sample_rate_hz, Seed seed) {
  std::vector<LabeledSample> samples;
  std::vector<std::string> labels;
  samples.reserve(profiles.size() * n_per_program);
  for (std::size_t p = 0; p < profiles.size(); ++p) {
    labels.push_back(profiles[p].name);
    for (std::size_t i = 0; i < n_per_program; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "-%03zu", i);
      auto trace = generate_sample(profiles[p], sample_rate_hz, derive_seed(seed, p, i));
      samples.push_back({profiles[p].name + id, std::move(trace), profiles[p].name, Provenance::clean()});
    }
  }
  return LabeledDataset(std::move(samples), std::move(labels));
}

// ---------------------------------------------------------------------------

Eigen::VectorXd apply_recipe(const LabeledDataset& dataset, const MixRecipe& recipe, const MixOptions& options) {
  if (recipe.noise_indices.size() != recipe.offsets.size())
    throw std::invalid_argument("recipe has mismatched noise/offset counts");
  Eigen::VectorXd mixed = dataset[recipe.target_index].trace.samples();
  const Eigen::Index n = mixed.size();
  for (std::size_t j = 0; j < recipe.noise_indices.size(); ++j) {
    const auto& noise = dataset[recipe.noise_indices[j]].trace.samples();
    const Eigen::Index offset = recipe.offsets[j];
    if (offset < 0 || offset >= n) throw std::invalid_argument("recipe offset outside the target");
    const Eigen::Index len = std::min(noise.size(), n - offset);
    if (options.subtract_noise_baseline)
      mixed.segment(offset, len).array() += noise.head(len).array() - noise.minCoeff();
    else
      mixed.segment(offset, len) += noise.head(len);
  }
  return mixed;
}

std::pair<LabeledSample, MixRecipe> mix_noise(const LabeledDataset& dataset, std::size_t target,
                                              unsigned noise_level, Seed seed, const MixOptions& options) {
  if (target >= dataset.size()) throw std::out_of_range("target index out of range");
  const auto& base = dataset[target];
  if (!base.provenance.is_clean()) throw std::invalid_argument("target sample '" + base.id + "' is not clean");

  MixRecipe recipe{target, {}, {}, seed};
  if (noise_level > 0) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < dataset.size(); ++i)
      if (dataset[i].provenance.is_clean() && dataset[i].label != base.label) pool.push_back(i);
    if (pool.empty())
      throw std::invalid_argument("no clean sample with a label other than '" + base.label + "'");

    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::uniform_int_distribution<Eigen::Index> place(0, base.trace.size() - 1);
    for (unsigned j = 0; j < noise_level; ++j) {
      recipe.noise_indices.push_back(pool[pick(rng)]);
      recipe.offsets.push_back(place(rng));
    }
  }

  LabeledSample mixed{base.id,
                      PowerTrace(apply_recipe(dataset, recipe, options), base.trace.sample_rate_hz(),
                                 base.trace.source_id()),
                      base.label, noise_level ? Provenance::noisy(noise_level, seed) : Provenance::clean()};
  return {std::move(mixed), std::move(recipe)};
}

NoisyDataset build_noisy_dataset(const LabeledDataset& dataset, unsigned noise_level, Seed seed,
                                 const MixOptions& options) {
  std::vector<LabeledSample> samples;
  std::vector<MixRecipe> recipes;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!dataset[i].provenance.is_clean()) continue;
    auto [sample, recipe] = mix_noise(dataset, i, noise_level, derive_seed(seed, i), options);
    samples.push_back(std::move(sample));
    recipes.push_back(std::move(recipe));
  }
  return {LabeledDataset(std::move(samples), dataset.labels()), std::move(recipes)};
}

void write_recipe_log(const LabeledDataset& source, const NoisyDataset& noisy, std::ostream& out) {
  for (std::size_t i = 0; i < noisy.recipes.size(); ++i) {
    const auto& r = noisy.recipes[i];
    out << noisy.dataset[i].id;
    for (std::size_t j = 0; j < r.noise_indices.size(); ++j)
      out << ' ' << source[r.noise_indices[j]].id << '@' << r.offsets[j];
    out << '\n';
  }
}

}  // namespace powerprint
