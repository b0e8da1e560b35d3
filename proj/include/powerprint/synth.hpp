#pragma once

#include "powerprint/rng.hpp"
#include "powerprint/trace.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace powerprint {

enum class PhaseKind { Input, Processing, Output };

char to_char(PhaseKind kind) noexcept;

struct PeriodicComponent {
  double frequency_hz = 0.0;
  double amplitude_amps = 0.0;
};

/// One stretch of a run: input reading (I), processing (P) or output writing (O).
struct Phase {
  PhaseKind kind = PhaseKind::Processing;
  double mean_amps = 0.0;
  std::vector<PeriodicComponent> periodic;
  double duration_seconds = 1.0;
};

/// Parameterized power signature of one program.
///
/// A generated run draws its duration uniformly from [min, max] and stretches
/// the phase plan proportionally to fill it. `family` is free-form metadata
/// (the bundled profiles use high-draw, low-patterned and low-flat).
struct ProgramProfile {
  std::string name;
  std::string family;
  double idle_baseline_amps = 0.0;
  std::vector<Phase> phases;
  double jitter_std_amps = 0.0;
  double min_duration_seconds = 1.0;
  double max_duration_seconds = 1.0;

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;
  /// Additionally rejects periodic components at or above rate / 2.
  void validate_for_rate(double sample_rate_hz) const;
};

std::vector<ProgramProfile> read_profiles(std::istream& in);
std::vector<ProgramProfile> load_profiles(const std::filesystem::path& path);
void write_profiles(const std::vector<ProgramProfile>& profiles, std::ostream& out);

/// The bundled 12-profile corpus definition (data/default_profiles.txt).
std::string_view default_profiles_text() noexcept;
std::vector<ProgramProfile> default_profiles();

/// idle + phase mean + periodic terms + Gaussian jitter, clipped at zero.
/// Deterministic in (profile, rate, seed).
PowerTrace generate_sample(const ProgramProfile& profile, double sample_rate_hz, Seed seed);

/// `n_per_program` clean samples per profile, ids "<name>-<index>" (index zero-padded to 3 digits).
LabeledDataset generate_corpus(const std::vector<ProgramProfile>& profiles, std::size_t n_per_program,
                               double sample_rate_hz, Seed seed);

/// Where each noise sample was added to the target.
struct MixRecipe {
  std::size_t target_index = 0;
  std::vector<std::size_t> noise_indices;
  std::vector<Eigen::Index> offsets;
  Seed seed = 0;

  friend bool operator==(const MixRecipe&, const MixRecipe&) = default;
};

struct MixOptions {
  /// Subtract each noise trace's minimum (its idle floor) before adding it.
  bool subtract_noise_baseline = false;
};

/// Adds the recipe's noise samples to its target, truncated at the target's end.
Eigen::VectorXd apply_recipe(const LabeledDataset& dataset, const MixRecipe& recipe,
                             const MixOptions& options = {});

/// Draws `noise_level` clean samples of other labels and random offsets in
/// [0, len(target)) from `seed`, and mixes them into the target.
/// Throws std::invalid_argument if the target is not clean or no eligible noise exists.
std::pair<LabeledSample, MixRecipe> mix_noise(const LabeledDataset& dataset, std::size_t target,
                                              unsigned noise_level, Seed seed,
                                              const MixOptions& options = {});

struct NoisyDataset {
  LabeledDataset dataset;
  std::vector<MixRecipe> recipes;
};

/// One mixed sample per clean input sample; sample i uses derive_seed(seed, i).
/// Level 0 returns clean copies with empty recipes.
NoisyDataset build_noisy_dataset(const LabeledDataset& dataset, unsigned noise_level, Seed seed,
                                 const MixOptions& options = {});

/// "<sample_id> <noise_sample_id>@<offset> ..." per mixed sample.
void write_recipe_log(const LabeledDataset& source, const NoisyDataset& noisy, std::ostream& out);

}  // namespace powerprint
