#include "powerprint/trace.hpp"

#include "powerprint/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace powerprint {

namespace {
constexpr std::string_view kTraceMagic = "# powerprint-trace v1";

std::string with_line(const std::string& what, std::size_t line) {
  return line ? "line " + std::to_string(line) + ": " + what : what;
}

bool getline_stripped(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}
}  // namespace

DataError::DataError(const std::string& what, std::size_t line)
    : std::runtime_error(with_line(what, line)), line_(line) {}

DataError DataError::located(const std::string& what, std::size_t line) {
  DataError e(what);
  e.line_ = line;
  return e;
}

PowerTrace::PowerTrace(Eigen::VectorXd samples, double sample_rate_hz, std::string source_id)
    : samples_(std::move(samples)), rate_hz_(sample_rate_hz), source_id_(std::move(source_id)) {
  if (samples_.size() == 0) throw std::invalid_argument("power trace has no samples");
  if (!(rate_hz_ > 0.0) || !std::isfinite(rate_hz_))
    throw std::invalid_argument("sample rate must be positive and finite");
  if (!samples_.allFinite()) throw std::invalid_argument("power trace has non-finite samples");
  if ((samples_.array() < 0.0).any()) throw std::invalid_argument("power trace has negative samples");
  if (source_id_.find_first_of("\r\n") != std::string::npos)
    throw std::invalid_argument("source id may not contain line breaks");
}

Provenance Provenance::noisy(unsigned level, std::uint64_t seed) {
  if (level == 0) throw std::invalid_argument("noisy provenance requires noise level >= 1");
  return {level, seed};
}

std::string Provenance::to_string() const {
  if (is_clean()) return "clean";
  return "noisy:" + std::to_string(noise_level) + ":" + std::to_string(seed);
}

Provenance Provenance::parse(std::string_view tag) {
  tag = text::trim(tag);
  if (tag == "clean") return clean();
  const auto parts = text::split(tag, ':');
  if (parts.size() == 3 && parts[0] == "noisy") {
    const auto level = text::parse_uint(parts[1]);
    const auto seed = text::parse_uint(parts[2]);
    if (level && seed && *level > 0 && *level <= 1'000'000)
      return noisy(static_cast<unsigned>(*level), *seed);
  }
  throw DataError("unknown provenance tag '" + std::string(tag) + "'");
}

LabeledDataset::LabeledDataset(std::vector<LabeledSample> samples) : samples_(std::move(samples)) {
  for (const auto& s : samples_)
    if (std::find(labels_.begin(), labels_.end(), s.label) == labels_.end()) labels_.push_back(s.label);
}

LabeledDataset::LabeledDataset(std::vector<LabeledSample> samples, std::vector<std::string> labels)
    : samples_(std::move(samples)), labels_(std::move(labels)) {
  std::set<std::string> unique(labels_.begin(), labels_.end());
  if (unique.size() != labels_.size()) throw std::invalid_argument("duplicate label in vocabulary");
  for (const auto& s : samples_)
    if (!unique.count(s.label))
      throw std::invalid_argument("sample label '" + s.label + "' not in vocabulary");
}

std::optional<int> LabeledDataset::label_index(std::string_view label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<int>(it - labels_.begin());
}

std::vector<int> LabeledDataset::label_indices() const {
  std::vector<int> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(*label_index(s.label));
  return out;
}

PowerTrace read_trace(std::istream& in) {
  std::string line;
  if (!getline_stripped(in, line)) throw DataError("empty trace file", 1);
  if (text::trim(line) != kTraceMagic) throw DataError("malformed header: expected '" + std::string(kTraceMagic) + "'", 1);
  if (!getline_stripped(in, line)) throw DataError("malformed header: missing rate line", 2);

  const std::string_view meta = line;
  constexpr std::string_view rate_key = "rate_hz=";
  constexpr std::string_view source_key = ",source=";
  const auto source_pos = meta.find(source_key);
  if (meta.substr(0, rate_key.size()) != rate_key || source_pos == std::string_view::npos)
    throw DataError("malformed header: expected 'rate_hz=<decimal>,source=<string>'", 2);
  const auto rate = text::parse_double(meta.substr(rate_key.size(), source_pos - rate_key.size()));
  if (!rate || !(*rate > 0.0) || !std::isfinite(*rate)) throw DataError("malformed header: invalid rate", 2);
  std::string source(meta.substr(source_pos + source_key.size()));

  std::vector<double> values;
  std::size_t line_no = 2;
  while (getline_stripped(in, line)) {
    ++line_no;
    const auto v = text::parse_double(line);
    if (!v || !std::isfinite(*v)) throw DataError("non-numeric sample '" + line + "'", line_no);
    if (*v < 0.0) throw DataError("negative sample '" + line + "'", line_no);
    values.push_back(*v);
  }
  if (values.empty()) throw DataError("trace has no samples", line_no + 1);
  return PowerTrace(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())),
                    *rate, std::move(source));
}

void write_trace(const PowerTrace& trace, std::ostream& out) {
  out << kTraceMagic << '\n'
      << "rate_hz=" << text::format_double(trace.sample_rate_hz()) << ",source=" << trace.source_id() << '\n';
  for (const double v : trace.samples()) out << text::format_double(v) << '\n';
}

PowerTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open trace file '" + path.string() + "'");
  try {
    return read_trace(in);
  } catch (const DataError& e) {
    throw DataError::located(path.string() + ": " + e.what(), e.line());
  }
}

void save_trace(const PowerTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write trace file '" + path.string() + "'");
  write_trace(trace, out);
  if (!out.flush()) throw std::runtime_error("I/O failure writing '" + path.string() + "'");
}

bool is_valid_sample_id(std::string_view id) noexcept {
  return !id.empty() && id != "." && id != ".." && std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
           c == '_' || c == '-';
  });
}

LabeledDataset load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  const auto base = path.parent_path();

  std::vector<LabeledSample> samples;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (getline_stripped(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = text::split(body, ',');
    if (fields.size() != 4) throw DataError("expected 4 comma-separated fields", line_no);
    const std::string id(text::trim(fields[0]));
    const std::string label(text::trim(fields[1]));
    const std::string rel(text::trim(fields[2]));
    if (!is_valid_sample_id(id)) throw DataError("invalid sample id '" + id + "'", line_no);
    if (label.empty()) throw DataError("empty label", line_no);
    if (!seen.insert(id).second) throw DataError("duplicate sample id '" + id + "'", line_no);
    Provenance prov;
    try {
      prov = Provenance::parse(fields[3]);
    } catch (const DataError& e) {
      throw DataError(e.what(), line_no);
    }
    const auto trace_path = base / rel;
    if (!std::filesystem::exists(trace_path))
      throw DataError("referenced trace file '" + trace_path.string() + "' does not exist", line_no);
    samples.push_back({id, load_trace(trace_path), label, prov});
  }
  return LabeledDataset(std::move(samples));
}

void save_manifest(const LabeledDataset& dataset, const std::filesystem::path& manifest_path,
                   const std::vector<std::string>& header_comments, const std::string& trace_subdir) {
  if (!is_valid_sample_id(trace_subdir)) throw std::invalid_argument("invalid trace directory name");
  const auto base = manifest_path.parent_path();
  const auto trace_dir = base / trace_subdir;
  std::filesystem::create_directories(trace_dir);

  std::ostringstream manifest;
  manifest << "# powerprint-manifest v1\n";
  for (const auto& c : header_comments) manifest << "# " << c << '\n';
  for (const auto& s : dataset.samples()) {
    if (!is_valid_sample_id(s.id)) throw std::invalid_argument("invalid sample id '" + s.id + "'");
    if (s.label.find_first_of(",\r\n") != std::string::npos)
      throw std::invalid_argument("label '" + s.label + "' cannot be stored in a manifest");
    const std::string rel = trace_subdir + "/" + s.id + ".csv";
    save_trace(s.trace, base / rel);
    manifest << s.id << ',' << s.label << ',' << rel << ',' << s.provenance.to_string() << '\n';
  }
  std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest '" + manifest_path.string() + "'");
  out << manifest.str();
  if (!out.flush()) throw std::runtime_error("I/O failure writing '" + manifest_path.string() + "'");
}

}  // namespace powerprint
