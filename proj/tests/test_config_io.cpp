#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>

#include "support.hpp"

using namespace linphot;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("linphot_test_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig small_config(const std::string& source_json) {
  return parse_config(R"({"schema_version": 1, "source": )" + source_json +
                      R"(, "gain": {"family": "gaussian", "gamma_bar": 100, "sigma": 2},
                         "eta_series": [0.2, 0.4, 0.6, 0.8], "n_samples": 10000, "seed": 42})");
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
    return e.what();
  }
  ADD_FAILURE() << "config accepted: " << text;
  return {};
}

}  // namespace

TEST(Config, DefaultsAreMaterialized) {
  const auto c = parse_config(R"({"source": {"kind": "poisson", "mean": 100}, "gain": {"gamma_bar": 50}})");
  EXPECT_EQ(c.schema_version, 1);
  EXPECT_EQ(c.gain.family, "gaussian");
  EXPECT_DOUBLE_EQ(c.dark.sigma0, 5.0);
  ASSERT_EQ(c.eta_series.size(), 10u);
  EXPECT_DOUBLE_EQ(c.eta_series.front(), 0.05);
  EXPECT_DOUBLE_EQ(c.eta_series.back(), 1.0);
  const auto half = parse_config(R"({"source": {"kind": "fock", "n": 3}, "gain": {"gamma_bar": 1}, "eta_max": 0.5})");
  EXPECT_DOUBLE_EQ(half.eta_series.front(), 0.025);
  EXPECT_DOUBLE_EQ(half.eta_series.back(), 0.5);
}

TEST(Config, FieldLevelDiagnostics) {
  const std::string base = R"("source": {"kind": "poisson", "mean": 10}, "gain": {"gamma_bar": 100})";
  EXPECT_NE(config_error("{" + base + R"(, "eta_series": [0.2, 1.5, 0.4]})").find("eta_series[1]"), std::string::npos);
  EXPECT_NE(config_error(R"({"gain": {"gamma_bar": 1}})").find("source"), std::string::npos);
  EXPECT_NE(config_error(R"({"source": {"kind": "squeezed"}, "gain": {"gamma_bar": 1}})").find("source.kind"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"source": {"kind": "poisson", "mean": -2}, "gain": {"gamma_bar": 1}})").find("source.mean"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"source": {"kind": "poisson", "mean": 2}, "gain": {"gamma_bar": 0}})").find("gain.gamma_bar"),
            std::string::npos);
  EXPECT_NE(config_error("{" + base + R"(, "schema_version": 2})").find("schema_version"), std::string::npos);
  EXPECT_NE(config_error("{" + base + R"(, "n_samples": 10})").find("n_samples"), std::string::npos);
  EXPECT_NE(config_error("{" + base + R"(, "eta_series": [0.2, 0.4]})").find("eta_series"), std::string::npos);
  EXPECT_NE(config_error("{" + base + R"(, "moment_order": 7})").find("moment_order"), std::string::npos);
  EXPECT_NE(config_error("{" + base + R"(, "seed": "abc"})").find("seed"), std::string::npos);
  EXPECT_NE(config_error("{" + base + R"(, "reconstruct": {"eta_index": 12}})").find("reconstruct.eta_index"),
            std::string::npos);
  EXPECT_NE(config_error("{ not json").find("malformed"), std::string::npos);
}

TEST(Config, RoundTripIsLossless) {
  testing_support::Gen g(61);
  const char* kinds[] = {"poisson", "thermal", "multimode_thermal", "fock", "pmf"};
  for (int t = 0; t < 200; ++t) {
    RunConfig c;
    c.source.kind = kinds[g.integer(0, 4)];
    if (c.source.kind == "fock") c.source.n = g.integer(0, 100);
    else if (c.source.kind == "pmf") c.source.table = {g.uniform(0.1, 1), g.uniform(0, 1), 1.0 / 3.0};
    else c.source.mean = g.uniform(0, 200);
    if (c.source.kind == "multimode_thermal") c.source.modes = g.integer(1, 30);
    c.gain.family = g.integer(0, 1) ? "gamma" : "gaussian";
    c.gain.gamma_bar = g.uniform(0.1, 1000);
    c.gain.sigma = g.uniform(0, 50);
    c.dark.sigma0 = g.uniform(0, 10);
    c.dark.offset = g.uniform(-100, 100);
    c.eta_series = {g.uniform(0.01, 0.3), g.uniform(0.3, 0.6), g.uniform(0.6, 1.0)};
    c.n_samples = g.integer(10000, 1000000);
    c.dark_samples = g.integer(2, 1000000);
    c.seed = g.integer(0, ~0ULL);
    c.gain_scale_factors = {g.uniform(0.1, 5.0)};
    c.output_dir = "dir" + std::to_string(t);
    c.moment_order = static_cast<int>(g.integer(2, 5));
    c.workers = static_cast<unsigned>(g.integer(1, 8));
    c.tail_epsilon = g.uniform(1e-15, 1e-6);
    c.reconstruct.eta_index = static_cast<int>(g.integer(0, 2));
    c.reconstruct.gamma_bar_source = g.integer(0, 1) ? "truth" : "calibrated";
    const auto back = parse_config(config_to_json(c).dump());
    EXPECT_TRUE(back == c) << config_to_json(c).dump();
    EXPECT_EQ(config_hash(back), config_hash(c));
  }
}

TEST(Config, EmpiricalGainRoundTrip) {
  const auto c = parse_config(R"({"source": {"kind": "poisson", "mean": 5},
      "gain": {"family": "empirical", "table": {"gamma": [80, 100, 120], "density": [0, 1, 0]}}})");
  EXPECT_NEAR(c.gain.gamma_bar, 100.0, 1e-12);
  EXPECT_TRUE(parse_config(config_to_json(c).dump()) == c);
  EXPECT_EQ(build_gain(c).family(), GainFamily::empirical);
}

TEST(Config, HashTracksGeneratingParametersOnly) {
  auto a = small_config(R"({"kind": "poisson", "mean": 10})");
  auto b = a;
  b.output_dir = "elsewhere";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed += 1;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(EnsembleCsv, RoundTripIsBitExact) {
  VoltageEnsemble e;
  e.eta = 0.123456789012345;
  e.seed = 18446744073709551615ULL;
  e.gain_scale = 0.5;
  e.samples = {0.0, -1e-300, 1.0 / 3.0, 12345.678901234567, -987.5, 5e-324};
  const auto f = io::ensemble_from_csv(io::ensemble_to_csv(e, "abcdef0123456789"));
  EXPECT_EQ(f.ensemble.samples, e.samples);
  EXPECT_EQ(f.ensemble.eta, e.eta);
  EXPECT_EQ(f.ensemble.seed, e.seed);
  EXPECT_EQ(f.ensemble.gain_scale, e.gain_scale);
  EXPECT_EQ(f.config_hash, "abcdef0123456789");
  EXPECT_LINPHOT_ERROR(io::ensemble_from_csv("# eta=0.5\n1.0\nbanana\n"), ErrorKind::io);
  EXPECT_LINPHOT_ERROR(io::read_ensemble("/nonexistent/linphot.csv"), ErrorKind::io);
}

TEST(PmCsv, RoundTrip) {
  const auto r = rebin(VoltageEnsemble{{0.0, 100.0, 100.0, 310.0}, 1.0, 0, 1.0, {}}, 100.0);
  const auto t = io::pm_from_csv(io::pm_to_csv(r, "hash"));
  EXPECT_EQ(t.counts, r.counts);
  EXPECT_EQ(t.pmf_hat, r.pmf_hat);
  EXPECT_EQ(t.config_hash, "hash");
}

TEST(PointsCsv, RoundTrip) {
  std::vector<EtaSeriesPoint> pts(3);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {0.1 * (i + 1), 100.0 * i + 1.0 / 7.0, 100.1, 0.3, 0.2, 10000 + i};
  const auto back = io::points_from_csv(io::points_to_csv(pts));
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].mean_v, pts[i].mean_v);
    EXPECT_EQ(back[i].se_fano_v, pts[i].se_fano_v);
    EXPECT_EQ(back[i].n_samples, pts[i].n_samples);
  }
}

TEST(Pipeline, DeterministicByteIdenticalOutputs) {
  auto c = small_config(R"({"kind": "thermal", "mean": 20})");
  c.gain_scale_factors = {2.0};
  c.workers = 2;
  const auto a = scratch("det_a"), b = scratch("det_b");
  run_experiment(c, a);
  run_experiment(c, b);
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    EXPECT_EQ(io::read_file(entry.path()), io::read_file(b / rel)) << rel;
    ++files;
  }
  EXPECT_GE(files, 10u);
  std::ostringstream log;
  EXPECT_TRUE(check_output(a, log)) << log.str();
}

TEST(Pipeline, VacuumRunIsDarkOnly) {
  auto c = small_config(R"({"kind": "poisson", "mean": 0})");
  const auto out = scratch("vacuum");
  const auto r = run_experiment(c, out);
  EXPECT_FALSE(r.calibration.has_value());
  ASSERT_FALSE(r.reconstruction.result.pmf_hat.empty());
  EXPECT_EQ(r.reconstruction.result.pmf_hat[0], 1.0);
  EXPECT_TRUE(r.pass);
  EXPECT_FALSE(fs::exists(out / "calibration.json"));
  const auto report = io::read_file(out / "report.md");
  EXPECT_NE(report.find("Dark statistics"), std::string::npos);
  std::ostringstream log;
  EXPECT_TRUE(check_output(out, log)) << log.str();
}

TEST(Pipeline, CheckDetectsTampering) {
  auto c = small_config(R"({"kind": "poisson", "mean": 50})");
  const auto out = scratch("tamper");
  run_experiment(c, out);
  auto text = io::read_file(out / "ensembles" / "eta_02.csv");
  const auto pos = text.find('\n', text.find("config_hash"));
  text.insert(pos + 1, "1.0e+03\n");
  io::write_file(out / "ensembles" / "eta_02.csv", text);
  std::ostringstream log;
  EXPECT_FALSE(check_output(out, log));
  EXPECT_NE(log.str().find("[FAIL] every eta ensemble has n_samples shots"), std::string::npos) << log.str();
}
