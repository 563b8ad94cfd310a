#pragma once

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "linphot/calibration.hpp"
#include "linphot/detector_model.hpp"
#include "linphot/error.hpp"
#include "linphot/reconstruction.hpp"

namespace linphot::io {

/// Full-precision scientific notation; parses back to the identical double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17e", x);
  return buf;
}

inline double parse_double(std::string_view text, const std::string& where) {
  std::string s(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  // ERANGE also flags subnormals; only overflow is an error.
  detail::require(end != s.c_str() && !(errno == ERANGE && std::isinf(v)), ErrorKind::io,
                  where + ": cannot parse number '" + s + "'");
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  detail::require(*end == '\0', ErrorKind::io, where + ": trailing characters in '" + s + "'");
  return v;
}

inline std::uint64_t parse_u64(std::string_view text, const std::string& where) {
  std::string s(text);
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  detail::require(end != s.c_str() && *end == '\0' && errno != ERANGE, ErrorKind::io,
                  where + ": cannot parse integer '" + s + "'");
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  detail::require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  detail::require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
  out << text;
  out.flush();
  detail::require(static_cast<bool>(out), ErrorKind::io, "write failed for " + path.string());
}

/// Ensemble interchange format: `# key=value` header rows (eta, seed,
/// gain_scale, optionally config_hash) followed by one voltage per line.
inline std::string ensemble_to_csv(const VoltageEnsemble& ens, std::string_view config_hash = {}) {
  std::string out;
  out.reserve(ens.samples.size() * 25 + 128);
  out += "# eta=" + format_double(ens.eta) + "\n";
  out += "# seed=" + std::to_string(ens.seed) + "\n";
  out += "# gain_scale=" + format_double(ens.gain_scale) + "\n";
  if (!config_hash.empty()) out += "# config_hash=" + std::string(config_hash) + "\n";
  for (double v : ens.samples) {
    out += format_double(v);
    out += '\n';
  }
  return out;
}

struct EnsembleFile {
  VoltageEnsemble ensemble;
  std::optional<std::string> config_hash;
};

inline EnsembleFile ensemble_from_csv(std::string_view text, const std::string& name = "ensemble") {
  EnsembleFile f;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    if (line.front() == '#') {
      line.remove_prefix(1);
      while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) continue;
      const auto key = line.substr(0, eq);
      const auto value = line.substr(eq + 1);
      if (key == "eta") f.ensemble.eta = parse_double(value, where);
      else if (key == "seed") f.ensemble.seed = parse_u64(value, where);
      else if (key == "gain_scale") f.ensemble.gain_scale = parse_double(value, where);
      else if (key == "config_hash") f.config_hash = std::string(value);
      continue;
    }
    const double v = parse_double(line, where);
    detail::require(std::isfinite(v), ErrorKind::io, where + ": non-finite voltage");
    f.ensemble.samples.push_back(v);
  }
  return f;
}

inline EnsembleFile read_ensemble(const std::filesystem::path& path) {
  return ensemble_from_csv(read_file(path), path.string());
}

/// Reconstructed histogram: columns m, pmf_hat, count.
inline std::string pm_to_csv(const ReconstructionResult& res, std::string_view config_hash = {}) {
  std::string out;
  if (!config_hash.empty()) out += "# config_hash=" + std::string(config_hash) + "\n";
  out += "# gamma_bar=" + format_double(res.gamma_bar_used) + "\n";
  out += "m,pmf_hat,count\n";
  for (std::size_t m = 0; m < res.pmf_hat.size(); ++m) {
    out += std::to_string(m) + "," + format_double(res.pmf_hat[m]) + "," + std::to_string(res.counts[m]) + "\n";
  }
  return out;
}

struct PmTable {
  std::vector<double> pmf_hat;
  std::vector<std::uint64_t> counts;
  std::optional<std::string> config_hash;
};

inline PmTable pm_from_csv(std::string_view text, const std::string& name = "pm.csv") {
  PmTable t;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# config_hash=", 0) == 0) {
      t.config_hash = line.substr(14);
      continue;
    }
    if (line[0] == '#' || line.rfind("m,", 0) == 0) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    detail::require(c1 != std::string::npos && c2 != std::string::npos, ErrorKind::io, where + ": expected 3 columns");
    const auto m = parse_u64(std::string_view(line).substr(0, c1), where);
    detail::require(m == t.pmf_hat.size(), ErrorKind::io, where + ": rows must list m = 0, 1, 2, ...");
    t.pmf_hat.push_back(parse_double(std::string_view(line).substr(c1 + 1, c2 - c1 - 1), where));
    t.counts.push_back(parse_u64(std::string_view(line).substr(c2 + 1), where));
  }
  return t;
}

/// Sweep-point table: eta, mean_v, fano_v, se_mean_v, se_fano_v, n_samples.
inline std::string points_to_csv(std::span<const EtaSeriesPoint> points) {
  std::string out = "eta,mean_v,fano_v,se_mean_v,se_fano_v,n_samples\n";
  for (const auto& p : points) {
    out += format_double(p.eta) + "," + format_double(p.mean_v) + "," + format_double(p.fano_v) + "," +
           format_double(p.se_mean_v) + "," + format_double(p.se_fano_v) + "," + std::to_string(p.n_samples) + "\n";
  }
  return out;
}

inline std::vector<EtaSeriesPoint> points_from_csv(std::string_view text, const std::string& name = "points.csv") {
  std::vector<EtaSeriesPoint> pts;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#' || line.rfind("eta", 0) == 0) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    std::vector<std::string_view> cols;
    std::string_view rest(line);
    while (true) {
      const auto c = rest.find(',');
      cols.push_back(rest.substr(0, c));
      if (c == std::string_view::npos) break;
      rest.remove_prefix(c + 1);
    }
    detail::require(cols.size() == 6, ErrorKind::io, where + ": expected 6 columns");
    EtaSeriesPoint p;
    p.eta = parse_double(cols[0], where);
    p.mean_v = parse_double(cols[1], where);
    p.fano_v = parse_double(cols[2], where);
    p.se_mean_v = parse_double(cols[3], where);
    p.se_fano_v = parse_double(cols[4], where);
    p.n_samples = parse_u64(cols[5], where);
    pts.push_back(p);
  }
  return pts;
}

}  // namespace linphot::io
