#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "linphot/detector_model.hpp"
#include "linphot/ensemble_io.hpp"
#include "linphot/error.hpp"
#include "linphot/photon_sources.hpp"

namespace linphot {

using Json = nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;

struct SourceSpec {
  std::string kind = "poisson";  // poisson | thermal | multimode_thermal | fock | pmf
  double mean = 0.0;
  std::uint64_t modes = 1;
  std::uint64_t n = 0;
  std::vector<double> table;
  bool operator==(const SourceSpec&) const = default;
};

struct GainSpec {
  std::string family = "gaussian";  // gaussian | gamma | empirical
  double gamma_bar = 100.0;
  double sigma = 0.0;
  std::vector<double> table_gamma;
  std::vector<double> table_density;
  bool operator==(const GainSpec&) const = default;
};

struct DarkSpec {
  double sigma0 = 0.0;
  double offset = 0.0;
  bool operator==(const DarkSpec&) const = default;
};

struct ReconstructSpec {
  int eta_index = -1;                        // negative counts from the end
  std::string gamma_bar_source = "calibrated";  // calibrated | truth
  bool operator==(const ReconstructSpec&) const = default;
};

/// Fully resolved experiment description; defaults are materialized when
/// parsing so that serialization round-trips exactly.
struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  SourceSpec source;
  GainSpec gain;
  DarkSpec dark;
  std::vector<double> eta_series;
  std::size_t n_samples = 100000;
  std::size_t dark_samples = 100000;
  std::uint64_t seed = 1;
  std::vector<double> gain_scale_factors;
  std::string output_dir = "out";
  int moment_order = 4;
  unsigned workers = 1;
  double tail_epsilon = kDefaultTailEpsilon;
  ReconstructSpec reconstruct;
  bool operator==(const RunConfig&) const = default;
};

/// 10 equally spaced efficiencies from 0.05 eta_max to eta_max.
inline std::vector<double> default_eta_series(double eta_max) {
  std::vector<double> etas;
  for (int i = 0; i < 10; ++i) etas.push_back(eta_max * (0.05 + 0.95 * i / 9.0));
  return etas;
}

namespace detail {

[[noreturn]] inline void config_fail(const std::string& field, const std::string& msg) {
  fail(ErrorKind::config, "field '" + field + "': " + msg);
}

inline const Json* find(const Json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline double get_number(const Json& obj, const char* key, const std::string& path, std::optional<double> fallback) {
  const Json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    config_fail(path + key, "required number is missing");
  }
  if (!v->is_number()) config_fail(path + key, "expected a number");
  return v->get<double>();
}

inline std::uint64_t get_uint(const Json& obj, const char* key, const std::string& path,
                              std::optional<std::uint64_t> fallback) {
  const Json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    config_fail(path + key, "required integer is missing");
  }
  if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
    config_fail(path + key, "expected a nonnegative integer");
  }
  return v->get<std::uint64_t>();
}

inline std::string get_string(const Json& obj, const char* key, const std::string& path,
                              std::optional<std::string> fallback) {
  const Json* v = find(obj, key);
  if (!v) {
    if (fallback) return *fallback;
    config_fail(path + key, "required string is missing");
  }
  if (!v->is_string()) config_fail(path + key, "expected a string");
  return v->get<std::string>();
}

inline std::vector<double> get_numbers(const Json& obj, const char* key, const std::string& path) {
  const Json* v = find(obj, key);
  if (!v) return {};
  if (!v->is_array()) config_fail(path + key, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    if (!(*v)[i].is_number()) config_fail(path + key + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back((*v)[i].get<double>());
  }
  return out;
}

}  // namespace detail

/// Parse and validate; errors name the offending field.
inline RunConfig config_from_json(const Json& j) {
  using namespace detail;
  if (!j.is_object()) config_fail("<root>", "config must be a JSON object");
  RunConfig c;
  c.schema_version = static_cast<int>(get_uint(j, "schema_version", "", kConfigSchemaVersion));
  if (c.schema_version != kConfigSchemaVersion) {
    config_fail("schema_version", "unsupported version " + std::to_string(c.schema_version));
  }

  const Json* src = find(j, "source");
  if (!src || !src->is_object()) config_fail("source", "required object is missing");
  c.source.kind = get_string(*src, "kind", "source.", std::nullopt);
  const auto& kind = c.source.kind;
  if (kind == "poisson" || kind == "thermal" || kind == "multimode_thermal") {
    c.source.mean = get_number(*src, "mean", "source.", std::nullopt);
    if (!(c.source.mean >= 0.0) || !std::isfinite(c.source.mean)) config_fail("source.mean", "must be finite and >= 0");
    if (kind == "multimode_thermal") {
      c.source.modes = get_uint(*src, "modes", "source.", std::nullopt);
      if (c.source.modes == 0) config_fail("source.modes", "must be >= 1");
    }
  } else if (kind == "fock") {
    c.source.n = get_uint(*src, "n", "source.", std::nullopt);
  } else if (kind == "pmf") {
    c.source.table = get_numbers(*src, "table", "source.");
    if (c.source.table.empty()) config_fail("source.table", "must be a nonempty array");
    bool positive = false;
    for (std::size_t i = 0; i < c.source.table.size(); ++i) {
      const double p = c.source.table[i];
      if (!(p >= 0.0) || !std::isfinite(p)) config_fail("source.table[" + std::to_string(i) + "]", "must be >= 0");
      positive = positive || p > 0.0;
    }
    if (!positive) config_fail("source.table", "needs at least one positive entry");
  } else {
    config_fail("source.kind", "unknown source kind '" + kind + "'");
  }

  const Json* gain = find(j, "gain");
  if (!gain || !gain->is_object()) config_fail("gain", "required object is missing");
  c.gain.family = get_string(*gain, "family", "gain.", "gaussian");
  if (c.gain.family == "empirical") {
    const Json* t = find(*gain, "table");
    if (!t || !t->is_object()) config_fail("gain.table", "empirical gain needs {\"gamma\": [...], \"density\": [...]}");
    c.gain.table_gamma = get_numbers(*t, "gamma", "gain.table.");
    c.gain.table_density = get_numbers(*t, "density", "gain.table.");
    if (c.gain.table_gamma.size() < 2 || c.gain.table_gamma.size() != c.gain.table_density.size()) {
      config_fail("gain.table", "gamma and density must have equal length >= 2");
    }
    for (std::size_t i = 0; i < c.gain.table_density.size(); ++i) {
      if (!(c.gain.table_density[i] >= 0.0)) {
        config_fail("gain.table.density[" + std::to_string(i) + "]", "must be >= 0");
      }
    }
    // Resolved moments of the table become the nominal gamma_bar and sigma.
    try {
      const auto g = make_gain(GainFamily::empirical, 1.0, 0.0,
                               EmpiricalTable{c.gain.table_gamma, c.gain.table_density});
      c.gain.gamma_bar = g.gamma_bar();
      c.gain.sigma = g.sigma();
    } catch (const Error& e) {
      config_fail("gain.table", e.what());
    }
  } else if (c.gain.family == "gaussian" || c.gain.family == "gamma") {
    c.gain.gamma_bar = get_number(*gain, "gamma_bar", "gain.", std::nullopt);
    if (!(c.gain.gamma_bar > 0.0) || !std::isfinite(c.gain.gamma_bar)) config_fail("gain.gamma_bar", "must be > 0");
    c.gain.sigma = get_number(*gain, "sigma", "gain.", 0.0);
    if (!(c.gain.sigma >= 0.0) || !std::isfinite(c.gain.sigma)) config_fail("gain.sigma", "must be >= 0");
  } else {
    config_fail("gain.family", "unknown gain family '" + c.gain.family + "'");
  }

  const Json empty = Json::object();
  const Json* dark = find(j, "dark");
  if (dark && !dark->is_object()) config_fail("dark", "expected an object");
  const Json& d = dark ? *dark : empty;
  c.dark.sigma0 = get_number(d, "sigma0", "dark.", 0.1 * c.gain.gamma_bar);
  if (!(c.dark.sigma0 >= 0.0) || !std::isfinite(c.dark.sigma0)) config_fail("dark.sigma0", "must be >= 0");
  c.dark.offset = get_number(d, "offset", "dark.", 0.0);
  if (!std::isfinite(c.dark.offset)) config_fail("dark.offset", "must be finite");

  if (find(j, "eta_series")) {
    c.eta_series = get_numbers(j, "eta_series", "");
  } else {
    const double eta_max = get_number(j, "eta_max", "", 1.0);
    if (!(eta_max > 0.0 && eta_max <= 1.0)) config_fail("eta_max", "must lie in (0, 1]");
    c.eta_series = default_eta_series(eta_max);
  }
  for (std::size_t i = 0; i < c.eta_series.size(); ++i) {
    const double e = c.eta_series[i];
    if (!(e > 0.0 && e <= 1.0)) {
      config_fail("eta_series[" + std::to_string(i) + "]", "efficiency " + io::format_double(e) + " outside (0, 1]");
    }
  }
  if (c.eta_series.size() < 3) config_fail("eta_series", "needs at least 3 efficiencies");

  c.n_samples = get_uint(j, "n_samples", "", 100000);
  if (c.n_samples < 10000) config_fail("n_samples", "must be >= 10000");
  c.dark_samples = get_uint(j, "dark_samples", "", c.n_samples);
  if (c.dark_samples < 2) config_fail("dark_samples", "must be >= 2");
  c.seed = get_uint(j, "seed", "", 1);
  c.gain_scale_factors = get_numbers(j, "gain_scale_factors", "");
  for (std::size_t i = 0; i < c.gain_scale_factors.size(); ++i) {
    if (!(c.gain_scale_factors[i] > 0.0) || !std::isfinite(c.gain_scale_factors[i])) {
      config_fail("gain_scale_factors[" + std::to_string(i) + "]", "must be > 0");
    }
  }
  c.output_dir = get_string(j, "output_dir", "", "out");
  c.moment_order = static_cast<int>(get_uint(j, "moment_order", "", 4));
  if (c.moment_order < 2 || c.moment_order > 5) config_fail("moment_order", "must lie in [2, 5]");
  c.workers = static_cast<unsigned>(get_uint(j, "workers", "", 1));
  if (c.workers < 1) config_fail("workers", "must be >= 1");
  c.tail_epsilon = get_number(j, "tail_epsilon", "", kDefaultTailEpsilon);
  if (!(c.tail_epsilon > 0.0 && c.tail_epsilon < 1.0)) config_fail("tail_epsilon", "must lie in (0, 1)");

  if (const Json* r = find(j, "reconstruct")) {
    if (!r->is_object()) config_fail("reconstruct", "expected an object");
    if (const Json* idx = find(*r, "eta_index")) {
      if (!idx->is_number_integer()) config_fail("reconstruct.eta_index", "expected an integer");
      c.reconstruct.eta_index = idx->get<int>();
    }
    c.reconstruct.gamma_bar_source = get_string(*r, "gamma_bar_source", "reconstruct.", "calibrated");
  }
  const int n_eta = static_cast<int>(c.eta_series.size());
  if (c.reconstruct.eta_index >= n_eta || c.reconstruct.eta_index < -n_eta) {
    config_fail("reconstruct.eta_index", "out of range for " + std::to_string(n_eta) + " efficiencies");
  }
  if (c.reconstruct.gamma_bar_source != "calibrated" && c.reconstruct.gamma_bar_source != "truth") {
    config_fail("reconstruct.gamma_bar_source", "must be 'calibrated' or 'truth'");
  }
  return c;
}

inline Json config_to_json(const RunConfig& c) {
  Json src = {{"kind", c.source.kind}};
  if (c.source.kind == "poisson" || c.source.kind == "thermal") src["mean"] = c.source.mean;
  if (c.source.kind == "multimode_thermal") {
    src["mean"] = c.source.mean;
    src["modes"] = c.source.modes;
  }
  if (c.source.kind == "fock") src["n"] = c.source.n;
  if (c.source.kind == "pmf") src["table"] = c.source.table;
  Json gain = {{"family", c.gain.family}, {"gamma_bar", c.gain.gamma_bar}, {"sigma", c.gain.sigma}};
  if (c.gain.family == "empirical") gain["table"] = {{"gamma", c.gain.table_gamma}, {"density", c.gain.table_density}};
  return Json{{"schema_version", c.schema_version},
              {"source", src},
              {"gain", gain},
              {"dark", {{"sigma0", c.dark.sigma0}, {"offset", c.dark.offset}}},
              {"eta_series", c.eta_series},
              {"n_samples", c.n_samples},
              {"dark_samples", c.dark_samples},
              {"seed", c.seed},
              {"gain_scale_factors", c.gain_scale_factors},
              {"output_dir", c.output_dir},
              {"moment_order", c.moment_order},
              {"workers", c.workers},
              {"tail_epsilon", c.tail_epsilon},
              {"reconstruct", {{"eta_index", c.reconstruct.eta_index},
                               {"gamma_bar_source", c.reconstruct.gamma_bar_source}}}};
}

inline RunConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    detail::fail(ErrorKind::config, std::string("malformed JSON: ") + e.what());
  }
  return config_from_json(j);
}

inline RunConfig load_config(const std::filesystem::path& path) { return parse_config(io::read_file(path)); }

/// FNV-1a of the canonical config (output_dir excluded: it does not affect
/// any generated value).
inline std::string config_hash(const RunConfig& c) {
  Json j = config_to_json(c);
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline PhotonNumberDistribution build_source(const RunConfig& c) {
  const auto& s = c.source;
  if (s.kind == "poisson") return make_poisson(s.mean, c.tail_epsilon);
  if (s.kind == "thermal") return make_thermal(s.mean, c.tail_epsilon);
  if (s.kind == "multimode_thermal") return make_multimode_thermal(s.mean, s.modes, c.tail_epsilon);
  if (s.kind == "fock") return make_fock(s.n);
  return from_pmf(s.table);
}

inline GainModel build_gain(const RunConfig& c) {
  const auto& g = c.gain;
  if (g.family == "gamma") return make_gain(GainFamily::gamma, g.gamma_bar, g.sigma);
  if (g.family == "empirical") {
    return make_gain(GainFamily::empirical, g.gamma_bar, g.sigma, EmpiricalTable{g.table_gamma, g.table_density});
  }
  return make_gain(GainFamily::gaussian, g.gamma_bar, g.sigma);
}

inline DarkNoiseModel build_dark(const RunConfig& c) { return DarkNoiseModel{c.dark.sigma0, c.dark.offset}; }

}  // namespace linphot
