#pragma once

#include "powerprint/trace.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <numbers>
#include <string>
#include <vector>

namespace powerprint {

/// Per-window feature count required of every configuration.
inline constexpr std::size_t kFeaturesPerWindow = 24;

struct WelchParams {
  Eigen::Index segment_length = 64;
  Eigen::Index overlap = 32;
};

/// Windowing and per-window feature allocation.
///
/// The default allocation yields 24 values per window: max, five
/// percentiles, four autocorrelation lags, std, three ECDF points,
/// stationarity, absolute energy, variance/std ratio, mean and max |c| of the
/// Ricker transform at widths 2, 4 and 8, and max |c| at width 16.
struct FeatureConfig {
  double window_seconds = 2.0;
  int group_size = 4;
  std::vector<double> percentiles{5, 25, 50, 75, 95};
  std::vector<int> autocorr_lags{1, 12, 60, 120};
  std::vector<double> ecdf_points{-1, 0, 1};
  std::vector<double> wavelet_widths{2, 4, 8};  // mean |c| and max |c|
  std::vector<double> wavelet_peak_widths{16};  // max |c| only
  double min_sample_seconds = 32.0;
  WelchParams welch{};

  std::size_t time_feature_count() const noexcept;
  std::size_t wavelet_feature_count() const noexcept;
  std::size_t per_window_count() const noexcept { return time_feature_count() + wavelet_feature_count(); }
  std::size_t vector_length() const noexcept { return per_window_count() * static_cast<std::size_t>(group_size); }

  std::vector<std::string> time_feature_names() const;
  std::vector<std::string> wavelet_feature_names() const;
  /// Names for a whole group vector: "w<k>.<feature>".
  std::vector<std::string> feature_names() const;

  Eigen::Index window_length(double sample_rate_hz) const;

  /// Throws std::invalid_argument, including when per_window_count() != 24.
  void validate() const;

  friend bool operator==(const FeatureConfig& a, const FeatureConfig& b);
};

FeatureConfig read_feature_config(std::istream& in);
FeatureConfig load_feature_config(const std::filesystem::path& path);
void write_feature_config(const FeatureConfig& config, std::ostream& out);

/// A trace shorter than the minimum sample length (or too short for one group).
class TooShortError : public DataError {
 public:
  using DataError::DataError;
};

struct Window {
  Eigen::VectorXd values;
  Eigen::Index start_index = 0;
};

struct WindowGroup {
  std::vector<Window> windows;
};

/// Consecutive, non-overlapping windows gathered into non-overlapping groups;
/// samples that cannot complete a group are dropped.
std::vector<WindowGroup> segment(const PowerTrace& trace, const FeatureConfig& config);

// ---------------------------------------------------------------------------
// Window statistics. Generic over any Eigen vector expression.
// ---------------------------------------------------------------------------

namespace detail {
template <typename Scalar>
bool negligible_spread(Scalar spread, Scalar scale) {
  return spread <= Scalar(64) * std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), scale);
}
}  // namespace detail

/// Standard deviation with the n-1 denominator; 0 for fewer than two values.
template <typename Derived>
typename Derived::Scalar sample_std(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const auto n = x.size();
  if (n < 2) return Scalar(0);
  const Scalar mean = x.mean();
  return std::sqrt((x.array() - mean).square().sum() / Scalar(n - 1));
}

/// Zero mean, unit sample standard deviation. Constant input maps to zeros.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> normalize_window(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Scalar mean = x.mean();
  const Scalar sd = sample_std(x);
  if (detail::negligible_spread(sd, std::abs(mean))) return Vec::Zero(x.size());
  return (x.array() - mean) / sd;
}

/// Linear interpolation between order statistics of an ascending sequence.
template <typename Derived>
typename Derived::Scalar percentile_sorted(const Eigen::MatrixBase<Derived>& sorted, double q) {
  using Scalar = typename Derived::Scalar;
  const auto n = sorted.size();
  const double pos = q / 100.0 * static_cast<double>(n - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(pos));
  if (lo >= n - 1) return sorted(n - 1);
  const Scalar frac = Scalar(pos - static_cast<double>(lo));
  return sorted(lo) + frac * (sorted(lo + 1) - sorted(lo));
}

template <typename Derived>
typename Derived::Scalar percentile(const Eigen::MatrixBase<Derived>& x, double q) {
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> s = x;
  std::sort(s.begin(), s.end());
  return percentile_sorted(s, q);
}

/// Lag-k autocorrelation about the window mean, normalized so lag 0 is 1.
/// Zero for constant input or lags beyond the window.
template <typename Derived>
typename Derived::Scalar autocorrelation(const Eigen::MatrixBase<Derived>& x, Eigen::Index lag) {
  using Scalar = typename Derived::Scalar;
  const auto n = x.size();
  if (lag < 0 || lag >= n) return Scalar(0);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> centered = x.array() - x.mean();
  const Scalar denom = centered.squaredNorm();
  if (denom == Scalar(0)) return Scalar(0);
  return centered.head(n - lag).dot(centered.tail(n - lag)) / denom;
}

/// Right-continuous empirical CDF: fraction of values <= point.
template <typename Derived>
double ecdf(const Eigen::MatrixBase<Derived>& x, double point) {
  return static_cast<double>((x.array() <= typename Derived::Scalar(point)).count()) / static_cast<double>(x.size());
}

/// std(first half) / std(second half); 1 if either half is constant.
template <typename Derived>
typename Derived::Scalar stationarity_coefficient(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const auto half = x.size() / 2;
  const Scalar s1 = sample_std(x.head(half));
  const Scalar s2 = sample_std(x.tail(x.size() - half));
  const Scalar scale = x.size() ? x.cwiseAbs().maxCoeff() : Scalar(0);
  if (detail::negligible_spread(s1, scale) || detail::negligible_spread(s2, scale)) return Scalar(1);
  return s1 / s2;
}

template <typename Derived>
typename Derived::Scalar absolute_energy(const Eigen::MatrixBase<Derived>& x) {
  return x.squaredNorm();
}

/// variance / std, which equals std; 0 for constant input.
template <typename Derived>
typename Derived::Scalar variance_std_ratio(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar sd = sample_std(x);
  return sd > Scalar(0) ? (sd * sd) / sd : Scalar(0);
}

// ---------------------------------------------------------------------------
// Ricker (Mexican hat) continuous wavelet transform.
// ---------------------------------------------------------------------------

/// psi_a(t) = 2 / (sqrt(3a) pi^(1/4)) (1 - t^2/a^2) exp(-t^2 / (2a^2)),
/// sampled at `points` positions centred on zero.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ricker_wavelet(Eigen::Index points, Scalar width) {
  const Scalar amplitude = Scalar(2) / (std::sqrt(Scalar(3) * width) * std::pow(std::numbers::pi_v<Scalar>, Scalar(0.25)));
  const Scalar wsq = width * width;
  const Scalar centre = Scalar(points - 1) / Scalar(2);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(points);
  for (Eigen::Index i = 0; i < points; ++i) {
    const Scalar t = Scalar(i) - centre;
    const Scalar tsq = t * t;
    out(i) = amplitude * (Scalar(1) - tsq / wsq) * std::exp(-tsq / (Scalar(2) * wsq));
  }
  return out;
}

/// Filter taps used at `width`: min(ceil(10 * width), n).
inline Eigen::Index ricker_taps(double width, Eigen::Index n) {
  return std::min<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(10.0 * width)), n);
}

/// CWT row at one width: 'same'-mode convolution of the signal with the
/// sampled wavelet (output length equals input length).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> ricker_cwt(const Eigen::MatrixBase<Derived>& x,
                                                                      typename Derived::Scalar width) {
  using Scalar = typename Derived::Scalar;
  if (!(width > Scalar(0))) throw std::invalid_argument("wavelet width must be positive");
  const Eigen::Index n = x.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(n);
  if (n == 0) return out;
  const Eigen::Index m = ricker_taps(static_cast<double>(width), n);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> reversed = ricker_wavelet<Scalar>(m, width).reverse();
  const Eigen::Index shift = (m - 1) / 2;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index k = i + shift;  // index into the full convolution
    const Eigen::Index lo = std::max<Eigen::Index>(0, k - m + 1);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, k);
    const Eigen::Index len = hi - lo + 1;
    out(i) = x.segment(lo, len).dot(reversed.segment(m - 1 - k + lo, len));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral analysis (exported for inspection; not part of the feature vector).
// ---------------------------------------------------------------------------

struct Spectrum {
  Eigen::VectorXd frequency_hz;
  Eigen::VectorXd power;  // one-sided density, units^2 / Hz
};

/// Welch estimate: mean-detrended, periodic-Hann-tapered segments with the
/// configured overlap, averaged one-sided periodograms. Throws if the input is
/// shorter than one segment.
Spectrum welch_psd(const Eigen::Ref<const Eigen::VectorXd>& x, double sample_rate_hz, const WelchParams& params = {});

struct SpectralPeak {
  double frequency_hz = 0.0;
  double power = 0.0;
  friend bool operator==(const SpectralPeak&, const SpectralPeak&) = default;
};

/// The k strongest positive local maxima (endpoints included), by descending
/// power then ascending frequency, padded with (0, 0).
std::vector<SpectralPeak> top_peaks(const Spectrum& spectrum, std::size_t k = 4);

// ---------------------------------------------------------------------------
// Feature vectors.
// ---------------------------------------------------------------------------

/// Time-domain values in time_feature_names() order. Expects a normalized window.
Eigen::VectorXd time_features(const Eigen::Ref<const Eigen::VectorXd>& window, const FeatureConfig& config);

/// Ricker summaries in wavelet_feature_names() order.
Eigen::VectorXd wavelet_features(const Eigen::Ref<const Eigen::VectorXd>& window, const FeatureConfig& config);

/// normalize -> time features ++ wavelet summaries, for one raw window.
Eigen::VectorXd window_features(const Eigen::Ref<const Eigen::VectorXd>& raw_window, const FeatureConfig& config);

/// Concatenation of window_features over the group, window by window.
Eigen::VectorXd feature_vector(const WindowGroup& group, const FeatureConfig& config);

/// One row per window group of the trace.
Eigen::MatrixXd featurize(const PowerTrace& trace, const FeatureConfig& config);

/// Feature rows with the label (vocabulary index) and provenance of each row.
struct FeatureTable {
  Eigen::MatrixXd values;
  std::vector<int> labels;
  std::vector<std::string> sample_ids;
  std::vector<int> group_index;
  std::vector<std::string> feature_names;
  std::vector<std::string> label_names;

  Eigen::Index rows() const noexcept { return values.rows(); }
};

/// Appends `rows` for sample `sample_id` with vocabulary label `label`.
void append_rows(FeatureTable& table, const Eigen::MatrixXd& rows, int label, const std::string& sample_id);

/// CSV: feature columns then label,sample_id,group_index.
void write_feature_table(const FeatureTable& table, std::ostream& out);

struct FeatureImportance {
  std::string name;
  double importance = 0.0;
};

/// Mean Gini decrease per feature from a screening forest, sorted descending
/// (ties by column order). Needs at least two distinct labels.
std::vector<FeatureImportance> gini_feature_screen(const FeatureTable& table, std::uint64_t seed,
                                                   int n_trees = 50);

}  // namespace powerprint
