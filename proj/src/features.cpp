#include "powerprint/features.hpp"

#include "powerprint/forest.hpp"
#include "powerprint/text.hpp"

#include <unsupported/Eigen/FFT>

#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

namespace powerprint {

namespace {

std::string compact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

template <typename T>
std::string join_numbers(const std::vector<T>& values) {
  std::vector<std::string> parts;
  for (const auto v : values) {
    if constexpr (std::is_floating_point_v<T>) parts.push_back(text::format_double(v));
    else parts.push_back(std::to_string(v));
  }
  return text::join(parts, ",");
}

}  // namespace

std::size_t FeatureConfig::time_feature_count() const noexcept {
  // max, std, stationarity, energy, variance/std ratio
  return 5 + percentiles.size() + autocorr_lags.size() + ecdf_points.size();
}

std::size_t FeatureConfig::wavelet_feature_count() const noexcept {
  return 2 * wavelet_widths.size() + wavelet_peak_widths.size();
}

std::vector<std::string> FeatureConfig::time_feature_names() const {
  std::vector<std::string> names{"max"};
  for (const double q : percentiles) names.push_back("p" + compact(q));
  for (const int lag : autocorr_lags) names.push_back("acf" + std::to_string(lag));
  names.emplace_back("std");
  for (const double p : ecdf_points) names.push_back("ecdf" + compact(p));
  names.emplace_back("stationarity");
  names.emplace_back("abs_energy");
  names.emplace_back("var_std_ratio");
  return names;
}

std::vector<std::string> FeatureConfig::wavelet_feature_names() const {
  std::vector<std::string> names;
  for (const double w : wavelet_widths) {
    names.push_back("ricker" + compact(w) + "_mean");
    names.push_back("ricker" + compact(w) + "_max");
  }
  for (const double w : wavelet_peak_widths) names.push_back("ricker" + compact(w) + "_max");
  return names;
}

std::vector<std::string> FeatureConfig::feature_names() const {
  auto per_window = time_feature_names();
  const auto wavelet = wavelet_feature_names();
  per_window.insert(per_window.end(), wavelet.begin(), wavelet.end());
  std::vector<std::string> names;
  for (int w = 0; w < group_size; ++w)
    for (const auto& n : per_window) names.push_back("w" + std::to_string(w) + "." + n);
  return names;
}

Eigen::Index FeatureConfig::window_length(double sample_rate_hz) const {
  return static_cast<Eigen::Index>(std::llround(window_seconds * sample_rate_hz));
}

void FeatureConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("feature config: ") + what);
  };
  require(std::isfinite(window_seconds) && window_seconds > 0.0, "window_seconds must be positive");
  require(group_size >= 1, "group_size must be positive");
  require(std::isfinite(min_sample_seconds) && min_sample_seconds > 0.0, "min_sample_seconds must be positive");
  for (const double q : percentiles) require(q > 0.0 && q < 100.0, "percentiles must lie in (0, 100)");
  for (const int lag : autocorr_lags) require(lag > 0, "autocorrelation lags must be positive");
  for (const double p : ecdf_points) require(std::isfinite(p), "ECDF points must be finite");
  for (const double w : wavelet_widths) require(std::isfinite(w) && w > 0.0, "wavelet widths must be positive");
  for (const double w : wavelet_peak_widths) require(std::isfinite(w) && w > 0.0, "wavelet widths must be positive");
  require(welch.segment_length >= 2, "welch segment must have at least 2 samples");
  require(welch.overlap >= 0 && welch.overlap < welch.segment_length, "welch overlap must be in [0, segment)");
  if (per_window_count() != kFeaturesPerWindow)
    throw std::invalid_argument("feature config: allocation yields " + std::to_string(per_window_count()) +
                                " values per window, expected " + std::to_string(kFeaturesPerWindow));
}

bool operator==(const FeatureConfig& a, const FeatureConfig& b) {
  return a.window_seconds == b.window_seconds && a.group_size == b.group_size && a.percentiles == b.percentiles &&
         a.autocorr_lags == b.autocorr_lags && a.ecdf_points == b.ecdf_points &&
         a.wavelet_widths == b.wavelet_widths && a.wavelet_peak_widths == b.wavelet_peak_widths &&
         a.min_sample_seconds == b.min_sample_seconds && a.welch.segment_length == b.welch.segment_length &&
         a.welch.overlap == b.welch.overlap;
}

FeatureConfig read_feature_config(std::istream& in) {
  FeatureConfig c;
  std::string raw;
  std::size_t line = 0;
  auto number = [&](std::string_view s) {
    const auto v = text::parse_double(s);
    if (!v) throw DataError("expected a number, got '" + std::string(s) + "'", line);
    return *v;
  };
  auto integer = [&](std::string_view s) {
    const auto v = text::parse_int(s);
    if (!v || *v < -1'000'000'000 || *v > 1'000'000'000) throw DataError("expected an integer, got '" + std::string(s) + "'", line);
    return static_cast<int>(*v);
  };
  auto numbers = [&](std::string_view s) {
    std::vector<double> out;
    if (s.empty()) return out;
    for (const auto part : text::split(s, ',')) out.push_back(number(part));
    return out;
  };
  while (std::getline(in, raw)) {
    ++line;
    const auto body = text::trim(raw);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw DataError("expected key=value", line);
    const auto key = text::trim(body.substr(0, eq));
    const auto value = text::trim(body.substr(eq + 1));
    if (key == "window_seconds") c.window_seconds = number(value);
    else if (key == "group_size") c.group_size = integer(value);
    else if (key == "percentiles") c.percentiles = numbers(value);
    else if (key == "autocorr_lags") {
      c.autocorr_lags.clear();
      if (!value.empty())
        for (const auto part : text::split(value, ',')) c.autocorr_lags.push_back(integer(part));
    } else if (key == "ecdf_points") c.ecdf_points = numbers(value);
    else if (key == "wavelet_widths") c.wavelet_widths = numbers(value);
    else if (key == "wavelet_peak_widths") c.wavelet_peak_widths = numbers(value);
    else if (key == "min_sample_seconds") c.min_sample_seconds = number(value);
    else if (key == "welch_segment") c.welch.segment_length = integer(value);
    else if (key == "welch_overlap") c.welch.overlap = integer(value);
    else throw DataError("unknown feature key '" + std::string(key) + "'", line);
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return c;
}

FeatureConfig load_feature_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature config '" + path.string() + "'");
  return read_feature_config(in);
}

void write_feature_config(const FeatureConfig& c, std::ostream& out) {
  out << "window_seconds=" << text::format_double(c.window_seconds) << '\n'
      << "group_size=" << c.group_size << '\n'
      << "percentiles=" << join_numbers(c.percentiles) << '\n'
      << "autocorr_lags=" << join_numbers(c.autocorr_lags) << '\n'
      << "ecdf_points=" << join_numbers(c.ecdf_points) << '\n'
      << "wavelet_widths=" << join_numbers(c.wavelet_widths) << '\n'
      << "wavelet_peak_widths=" << join_numbers(c.wavelet_peak_widths) << '\n'
      << "min_sample_seconds=" << text::format_double(c.min_sample_seconds) << '\n'
      << "welch_segment=" << c.welch.segment_length << '\n'
      << "welch_overlap=" << c.welch.overlap << '\n';
}

// ---------------------------------------------------------------------------

std::vector<WindowGroup> segment(const PowerTrace& trace, const FeatureConfig& config) {
  if (trace.duration_seconds() < config.min_sample_seconds)
    throw TooShortError("trace '" + trace.source_id() + "' lasts " + text::format_double(trace.duration_seconds()) +
                        " s, shorter than the " + text::format_double(config.min_sample_seconds) + " s minimum");
  const Eigen::Index len = config.window_length(trace.sample_rate_hz());
  if (len < 2) throw std::invalid_argument("window shorter than two samples at this sample rate");
  const Eigen::Index per_group = len * config.group_size;
  const Eigen::Index n_groups = trace.size() / per_group;
  if (n_groups == 0) throw TooShortError("trace '" + trace.source_id() + "' cannot fill one window group");

  std::vector<WindowGroup> groups(static_cast<std::size_t>(n_groups));
  for (Eigen::Index g = 0; g < n_groups; ++g) {
    auto& windows = groups[static_cast<std::size_t>(g)].windows;
    for (int w = 0; w < config.group_size; ++w) {
      const Eigen::Index start = g * per_group + w * len;
      windows.push_back({trace.samples().segment(start, len), start});
    }
  }
  return groups;
}

// ---------------------------------------------------------------------------

Spectrum welch_psd(const Eigen::Ref<const Eigen::VectorXd>& x, double sample_rate_hz, const WelchParams& params) {
  const Eigen::Index seg = params.segment_length;
  if (seg < 2 || params.overlap < 0 || params.overlap >= seg) throw std::invalid_argument("invalid Welch parameters");
  if (x.size() < seg)
    throw std::invalid_argument("signal of " + std::to_string(x.size()) + " samples is shorter than one " +
                                std::to_string(seg) + "-sample Welch segment");
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("sample rate must be positive");

  Eigen::VectorXd taper(seg);
  for (Eigen::Index i = 0; i < seg; ++i)
    taper(i) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(seg));
  const double scale = 1.0 / (sample_rate_hz * taper.squaredNorm());

  const Eigen::Index bins = seg / 2 + 1;
  Eigen::VectorXd power = Eigen::VectorXd::Zero(bins);
  Eigen::FFT<double> fft;
  std::vector<double> buffer(static_cast<std::size_t>(seg));
  std::vector<std::complex<double>> spectrum;
  const Eigen::Index step = seg - params.overlap;
  Eigen::Index segments = 0;
  for (Eigen::Index start = 0; start + seg <= x.size(); start += step, ++segments) {
    const auto piece = x.segment(start, seg);
    const double mean = piece.mean();
    for (Eigen::Index i = 0; i < seg; ++i) buffer[static_cast<std::size_t>(i)] = (piece(i) - mean) * taper(i);
    fft.fwd(spectrum, buffer);
    for (Eigen::Index k = 0; k < bins; ++k) power(k) += std::norm(spectrum[static_cast<std::size_t>(k)]);
  }
  power *= scale / static_cast<double>(segments);
  // One-sided: fold negative frequencies, except DC and (even length) Nyquist.
  const Eigen::Index last_doubled = seg % 2 == 0 ? bins - 2 : bins - 1;
  if (last_doubled >= 1) power.segment(1, last_doubled) *= 2.0;

  Spectrum out;
  out.frequency_hz = Eigen::VectorXd::LinSpaced(bins, 0.0, static_cast<double>(bins - 1)) * (sample_rate_hz / static_cast<double>(seg));
  out.power = std::move(power);
  return out;
}

std::vector<SpectralPeak> top_peaks(const Spectrum& spectrum, std::size_t k) {
  const auto& p = spectrum.power;
  const Eigen::Index n = p.size();
  std::vector<SpectralPeak> peaks;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool rises = i == 0 || p(i) > p(i - 1);
    const bool falls = i == n - 1 || p(i) >= p(i + 1);
    if (rises && falls && p(i) > 0.0) peaks.push_back({spectrum.frequency_hz(i), p(i)});
  }
  std::stable_sort(peaks.begin(), peaks.end(), [](const SpectralPeak& a, const SpectralPeak& b) {
    if (a.power != b.power) return a.power > b.power;
    return a.frequency_hz < b.frequency_hz;
  });
  peaks.resize(k);
  return peaks;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd time_features(const Eigen::Ref<const Eigen::VectorXd>& window, const FeatureConfig& config) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(config.time_feature_count()));
  Eigen::VectorXd sorted = window;
  std::sort(sorted.begin(), sorted.end());
  Eigen::Index i = 0;
  out(i++) = sorted(sorted.size() - 1);
  for (const double q : config.percentiles) out(i++) = percentile_sorted(sorted, q);
  for (const int lag : config.autocorr_lags) out(i++) = autocorrelation(window, lag);
  out(i++) = sample_std(window);
  for (const double p : config.ecdf_points) out(i++) = ecdf(window, p);
  out(i++) = stationarity_coefficient(window);
  out(i++) = absolute_energy(window);
  out(i++) = variance_std_ratio(window);
  return out;
}

Eigen::VectorXd wavelet_features(const Eigen::Ref<const Eigen::VectorXd>& window, const FeatureConfig& config) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(config.wavelet_feature_count()));
  Eigen::Index i = 0;
  for (const double w : config.wavelet_widths) {
    const Eigen::VectorXd mag = ricker_cwt(window, w).cwiseAbs();
    out(i++) = mag.mean();
    out(i++) = mag.maxCoeff();
  }
  for (const double w : config.wavelet_peak_widths) out(i++) = ricker_cwt(window, w).cwiseAbs().maxCoeff();
  return out;
}

Eigen::VectorXd window_features(const Eigen::Ref<const Eigen::VectorXd>& raw_window, const FeatureConfig& config) {
  const Eigen::VectorXd normalized = normalize_window(raw_window);
  Eigen::VectorXd out(static_cast<Eigen::Index>(config.per_window_count()));
  out << time_features(normalized, config), wavelet_features(normalized, config);
  return out;
}

Eigen::VectorXd feature_vector(const WindowGroup& group, const FeatureConfig& config) {
  const auto per = static_cast<Eigen::Index>(config.per_window_count());
  Eigen::VectorXd out(per * static_cast<Eigen::Index>(group.windows.size()));
  for (std::size_t w = 0; w < group.windows.size(); ++w)
    out.segment(static_cast<Eigen::Index>(w) * per, per) = window_features(group.windows[w].values, config);
  return out;
}

Eigen::MatrixXd featurize(const PowerTrace& trace, const FeatureConfig& config) {
  const auto groups = segment(trace, config);
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(groups.size()), static_cast<Eigen::Index>(config.vector_length()));
  for (std::size_t g = 0; g < groups.size(); ++g)
    rows.row(static_cast<Eigen::Index>(g)) = feature_vector(groups[g], config).transpose();
  return rows;
}

void append_rows(FeatureTable& table, const Eigen::MatrixXd& rows, int label, const std::string& sample_id) {
  if (table.values.size() == 0) table.values.resize(0, rows.cols());
  if (rows.cols() != table.values.cols()) throw std::invalid_argument("feature width mismatch");
  const Eigen::Index old = table.values.rows();
  table.values.conservativeResize(old + rows.rows(), Eigen::NoChange);
  table.values.bottomRows(rows.rows()) = rows;
  for (Eigen::Index g = 0; g < rows.rows(); ++g) {
    table.labels.push_back(label);
    table.sample_ids.push_back(sample_id);
    table.group_index.push_back(static_cast<int>(g));
  }
}

void write_feature_table(const FeatureTable& table, std::ostream& out) {
  for (const auto& name : table.feature_names) out << name << ',';
  out << "label,sample_id,group_index\n";
  for (Eigen::Index r = 0; r < table.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) out << text::format_double(table.values(r, c)) << ',';
    const auto i = static_cast<std::size_t>(r);
    out << table.label_names.at(static_cast<std::size_t>(table.labels[i])) << ',' << table.sample_ids[i] << ','
        << table.group_index[i] << '\n';
  }
}

std::vector<FeatureImportance> gini_feature_screen(const FeatureTable& table, std::uint64_t seed, int n_trees) {
  ForestParams params;
  params.n_trees = n_trees;
  const auto model = train(table.values, table.labels, table.label_names, table.feature_names, params, seed);
  const Eigen::VectorXd imp = importances(model);
  std::vector<std::size_t> order(table.feature_names.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return imp(static_cast<Eigen::Index>(a)) > imp(static_cast<Eigen::Index>(b));
  });
  std::vector<FeatureImportance> out;
  for (const auto i : order) out.push_back({table.feature_names[i], imp(static_cast<Eigen::Index>(i))});
  return out;
}

}  // namespace powerprint
