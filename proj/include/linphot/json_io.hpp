#pragma once

#include <optional>
#include <span>
#include <string>

#include "json.hpp"
#include "linphot/calibration.hpp"
#include "linphot/error.hpp"
#include "linphot/reconstruction.hpp"
#include "linphot/stat_engine.hpp"

namespace linphot {

using Json = nlohmann::json;

inline Json to_json(const MomentSet& m) {
  Json central = Json::object();
  Json raw = Json::object();
  for (int r = 1; r <= m.order; ++r) raw[std::to_string(r)] = m.raw[r];
  for (int r = 2; r <= m.order; ++r) central[std::to_string(r)] = m.central[r];
  return Json{{"order", m.order}, {"mean", m.mean}, {"central", central}, {"raw", raw}};
}

inline Json to_json(const EtaSeriesPoint& p) {
  return Json{{"eta", p.eta},         {"mean_v", p.mean_v},       {"fano_v", p.fano_v},
              {"se_mean_v", p.se_mean_v}, {"se_fano_v", p.se_fano_v}, {"n_samples", p.n_samples}};
}

inline EtaSeriesPoint point_from_json(const Json& j) {
  EtaSeriesPoint p;
  p.eta = j.at("eta").get<double>();
  p.mean_v = j.at("mean_v").get<double>();
  p.fano_v = j.at("fano_v").get<double>();
  p.se_mean_v = j.at("se_mean_v").get<double>();
  p.se_fano_v = j.at("se_fano_v").get<double>();
  p.n_samples = j.at("n_samples").get<std::size_t>();
  return p;
}

inline Json to_json(const CalibrationFit& f) {
  Json pts = Json::array();
  for (const auto& p : f.points) pts.push_back(to_json(p));
  return Json{{"slope", f.slope},
              {"slope_se", f.slope_se},
              {"intercept", f.intercept},
              {"intercept_se", f.intercept_se},
              {"covariance", f.covariance},
              {"gamma_bar_est", f.gamma_bar_est},
              {"r_squared", f.r_squared},
              {"chi2", f.chi2},
              {"dof", f.dof},
              {"valid", f.valid},
              {"points", pts}};
}

/// Accepts either a bare fit object or a calibration.json document that
/// stores it under "fit".
inline CalibrationFit fit_from_json(const Json& doc) {
  const Json& j = doc.contains("fit") ? doc.at("fit") : doc;
  try {
    CalibrationFit f;
    f.slope = j.at("slope").get<double>();
    f.slope_se = j.at("slope_se").get<double>();
    f.intercept = j.at("intercept").get<double>();
    f.intercept_se = j.at("intercept_se").get<double>();
    f.gamma_bar_est = j.at("gamma_bar_est").get<double>();
    f.covariance = j.value("covariance", 0.0);
    f.r_squared = j.value("r_squared", 0.0);
    f.chi2 = j.value("chi2", 0.0);
    f.dof = j.value("dof", std::size_t{0});
    f.valid = j.value("valid", f.intercept > 0.0);
    if (j.contains("points")) {
      for (const auto& p : j.at("points")) f.points.push_back(point_from_json(p));
    }
    return f;
  } catch (const Json::exception& e) {
    detail::fail(ErrorKind::io, std::string("calibration document is incomplete: ") + e.what());
  }
}

inline Json to_json(const GainScalingReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"factor", e.factor},
                       {"intercept", e.fit.intercept},
                       {"intercept_se", e.fit.intercept_se},
                       {"slope", e.fit.slope},
                       {"ratio", e.ratio},
                       {"ratio_se", e.ratio_se},
                       {"pass", e.pass}});
  }
  return Json{{"baseline_intercept", r.baseline.intercept},
              {"baseline_intercept_se", r.baseline.intercept_se},
              {"tolerance_se", r.tolerance_se},
              {"entries", entries},
              {"pass", r.pass}};
}

inline Json to_json(const MeanConstancyReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    entries.push_back(
        {{"eta", e.eta}, {"ratio", e.ratio}, {"ratio_se", e.ratio_se}, {"z", e.z_constancy}, {"pass", e.pass}});
  }
  return Json{{"entries", entries},
              {"weighted_ratio", r.weighted_ratio},
              {"weighted_ratio_se", r.weighted_ratio_se},
              {"z_gamma_bar", r.z_gamma_bar},
              {"constant", r.constant},
              {"matches_gamma_bar", r.matches_gamma_bar},
              {"pass", r.pass}};
}

inline Json to_json(const SelfConsistencyReport& r) {
  return Json{{"mean_m_hat", r.mean_m_hat},
              {"mean_m_from_v", r.mean_m_from_v},
              {"difference", r.difference},
              {"tolerance", r.tolerance},
              {"pass", r.pass}};
}

inline Json reconstruction_metrics_json(const ReconstructionResult& res, const SelfConsistencyReport& sc,
                                        const std::optional<ComparisonMetrics>& cmp) {
  Json j{{"gamma_bar_used", res.gamma_bar_used},
         {"n_samples", res.n_samples},
         {"underflow_fraction", res.underflow_fraction},
         {"underflow_shift", res.underflow_shift},
         {"mean_m_hat", res.mean_m_hat},
         {"self_consistency", to_json(sc)}};
  if (cmp) {
    j["tv_distance"] = cmp->tv_distance;
    j["fidelity"] = cmp->fidelity;
    double zmax = 0.0;
    for (double z : cmp->z_scores) zmax = std::max(zmax, std::fabs(z));
    j["max_abs_z"] = zmax;
  }
  return j;
}

}  // namespace linphot
