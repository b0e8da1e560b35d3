#pragma once

// Independent reference implementations used as test oracles. Plain loops
// over std::vector, written from the definitions rather than shared with the
// library code.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline double mean(const Vec& x) {
  double s = 0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double stdev(const Vec& x) {
  const double m = mean(x);
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

inline Vec normalize(const Vec& x) {
  const double m = mean(x);
  const double s = stdev(x);
  Vec out;
  for (double v : x) out.push_back((v - m) / s);
  return out;
}

inline double percentile(Vec x, double q) {
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1) * q / 100.0;
  const std::size_t i = static_cast<std::size_t>(h);
  if (i + 1 >= x.size()) return x.back();
  return x[i] + (h - static_cast<double>(i)) * (x[i + 1] - x[i]);
}

inline double autocorr(const Vec& x, std::size_t lag) {
  const double m = mean(x);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    den += (x[i] - m) * (x[i] - m);
    if (i + lag < x.size()) num += (x[i] - m) * (x[i + lag] - m);
  }
  return num / den;
}

inline double ecdf(const Vec& x, double p) {
  std::size_t c = 0;
  for (double v : x)
    if (v <= p) ++c;
  return static_cast<double>(c) / static_cast<double>(x.size());
}

inline double stationarity(const Vec& x) {
  const std::size_t h = x.size() / 2;
  const Vec a(x.begin(), x.begin() + static_cast<long>(h));
  const Vec b(x.begin() + static_cast<long>(h), x.end());
  return stdev(a) / stdev(b);
}

inline double energy(const Vec& x) {
  double s = 0;
  for (double v : x) s += v * v;
  return s;
}

inline double ricker(double t, double a) {
  const double amp = 2.0 / (std::sqrt(3.0 * a) * std::pow(std::numbers::pi, 0.25));
  return amp * (1 - t * t / (a * a)) * std::exp(-t * t / (2 * a * a));
}

/// 'same' convolution of x with the wavelet sampled on ceil(10a) points
/// centred on zero, as in the classic CWT formulation.
inline Vec cwt(const Vec& x, double a) {
  const long n = static_cast<long>(x.size());
  const long m = std::min<long>(static_cast<long>(std::ceil(10 * a)), n);
  Vec w(static_cast<std::size_t>(m));
  for (long i = 0; i < m; ++i) w[static_cast<std::size_t>(i)] = ricker(static_cast<double>(i) - (m - 1) / 2.0, a);
  // full convolution, then the centred slice
  Vec full(static_cast<std::size_t>(n + m - 1), 0.0);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < m; ++j) full[static_cast<std::size_t>(i + j)] += x[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(m - 1 - j)];
  const long start = (m - 1) / 2;
  return Vec(full.begin() + start, full.begin() + start + n);
}

/// The default 24 per-window values, in library order, from a raw window.
inline Vec window_features(const Vec& raw) {
  const Vec x = normalize(raw);
  Vec f;
  f.push_back(*std::max_element(x.begin(), x.end()));
  for (double q : {5.0, 25.0, 50.0, 75.0, 95.0}) f.push_back(percentile(x, q));
  for (std::size_t lag : {1, 12, 60, 120}) f.push_back(autocorr(x, lag));
  const double s = stdev(x);
  f.push_back(s);
  for (double p : {-1.0, 0.0, 1.0}) f.push_back(ecdf(x, p));
  f.push_back(stationarity(x));
  f.push_back(energy(x));
  f.push_back(s * s / s);
  for (double a : {2.0, 4.0, 8.0, 16.0}) {
    const Vec c = cwt(x, a);
    double sum = 0, mx = 0;
    for (double v : c) {
      sum += std::abs(v);
      mx = std::max(mx, std::abs(v));
    }
    if (a != 16.0) f.push_back(sum / static_cast<double>(c.size()));
    f.push_back(mx);
  }
  return f;
}

/// Direct-DFT Welch estimate with the library's conventions.
inline Vec welch(const Vec& x, double fs, std::size_t seg = 64, std::size_t overlap = 32) {
  const std::size_t bins = seg / 2 + 1;
  Vec w(seg), p(bins, 0.0);
  double wsq = 0;
  for (std::size_t i = 0; i < seg; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(seg));
    wsq += w[i] * w[i];
  }
  std::size_t count = 0;
  for (std::size_t start = 0; start + seg <= x.size(); start += seg - overlap, ++count) {
    const Vec piece(x.begin() + static_cast<long>(start), x.begin() + static_cast<long>(start + seg));
    const double m = mean(piece);
    for (std::size_t k = 0; k < bins; ++k) {
      std::complex<double> acc = 0;
      for (std::size_t i = 0; i < seg; ++i)
        acc += (piece[i] - m) * w[i] *
               std::polar(1.0, -2 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(seg));
      p[k] += std::norm(acc);
    }
  }
  for (std::size_t k = 0; k < bins; ++k) {
    p[k] /= fs * wsq * static_cast<double>(count);
    if (k != 0 && !(seg % 2 == 0 && k == bins - 1)) p[k] *= 2;
  }
  return p;
}

/// Index of the largest |DFT| bin in [0, n/2] of the whole signal.
inline std::size_t dft_argmax(const Vec& x) {
  const std::size_t n = x.size();
  std::size_t best = 0;
  double best_mag = -1;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0;
    for (std::size_t i = 0; i < n; ++i)
      acc += x[i] * std::polar(1.0, -2 * std::numbers::pi * static_cast<double>(k * i) / static_cast<double>(n));
    if (std::abs(acc) > best_mag) {
      best_mag = std::abs(acc);
      best = k;
    }
  }
  return best;
}

inline double gini(const std::vector<int>& counts) {
  double n = 0;
  for (int c : counts) n += c;
  double s = 1;
  for (int c : counts) s -= (c / n) * (c / n);
  return s;
}

/// Greedy CART tree grown with brute-force split search: every feature and
/// every midpoint between distinct values, partitions rebuilt explicitly.
struct Node {
  long feature = -1;
  double threshold = 0;
  std::vector<int> counts;
  int left = -1, right = -1;
};

struct BruteSplit {
  long feature;
  double threshold;
  double decrease;
};

inline std::optional<BruteSplit> brute_split(const std::vector<Vec>& rows, const std::vector<int>& labels,
                                             const std::vector<std::size_t>& idx, int k) {
  std::vector<int> parent(static_cast<std::size_t>(k), 0);
  for (auto i : idx) ++parent[static_cast<std::size_t>(labels[i])];
  const double g = gini(parent);
  std::optional<BruteSplit> best;
  const long d = static_cast<long>(rows.front().size());
  for (long f = 0; f < d; ++f) {
    Vec values;
    for (auto i : idx) values.push_back(rows[i][static_cast<std::size_t>(f)]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t v = 0; v + 1 < values.size(); ++v) {
      double t = values[v] + (values[v + 1] - values[v]) / 2;
      if (!(t < values[v + 1])) t = values[v];
      std::vector<int> l(static_cast<std::size_t>(k), 0), r(static_cast<std::size_t>(k), 0);
      double nl = 0, nr = 0;
      for (auto i : idx) {
        if (rows[i][static_cast<std::size_t>(f)] <= t) {
          ++l[static_cast<std::size_t>(labels[i])];
          ++nl;
        } else {
          ++r[static_cast<std::size_t>(labels[i])];
          ++nr;
        }
      }
      const double dec = g - (nl * gini(l) + nr * gini(r)) / (nl + nr);
      if (dec <= 1e-12) continue;
      if (!best || dec > best->decrease + 1e-12) best = BruteSplit{f, t, dec};
    }
  }
  return best;
}

inline int grow(std::vector<Node>& nodes, const std::vector<Vec>& rows, const std::vector<int>& labels,
                const std::vector<std::size_t>& idx, int k) {
  const int at = static_cast<int>(nodes.size());
  nodes.emplace_back();
  const auto split = idx.size() >= 2 ? brute_split(rows, labels, idx, k) : std::nullopt;
  if (!split) {
    nodes[static_cast<std::size_t>(at)].counts.assign(static_cast<std::size_t>(k), 0);
    for (auto i : idx) ++nodes[static_cast<std::size_t>(at)].counts[static_cast<std::size_t>(labels[i])];
    return at;
  }
  std::vector<std::size_t> li, ri;
  for (auto i : idx) (rows[i][static_cast<std::size_t>(split->feature)] <= split->threshold ? li : ri).push_back(i);
  const int l = grow(nodes, rows, labels, li, k);
  const int r = grow(nodes, rows, labels, ri, k);
  auto& n = nodes[static_cast<std::size_t>(at)];
  n.feature = split->feature;
  n.threshold = split->threshold;
  n.left = l;
  n.right = r;
  return at;
}

}  // namespace oracle
