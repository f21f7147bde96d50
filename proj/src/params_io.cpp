#include "capita/params_io.hpp"

#include <json.hpp>

namespace capita {

std::string params_to_json(const CapitationParams& p) {
  nlohmann::ordered_json j;
  j["a_low"] = p.a_low;
  j["a_med"] = p.a_med;
  j["a_high"] = p.a_high;
  j["b"] = p.b;
  j["method"] = std::string(to_string(p.method));
  j["calibration_period"] = p.calibration_period.label();
  nlohmann::ordered_json tiers = nlohmann::ordered_json::object();
  for (const auto& [id, t] : p.tiers) tiers[id] = std::string(to_string(t));
  j["tiers"] = tiers;
  nlohmann::ordered_json groups = nlohmann::ordered_json::object();
  for (const auto& [id, g] : p.capture_groups) groups[id] = g;
  j["capture_groups"] = groups;
  j["group_median_u"] = p.group_median_u;
  j["diagnostics"] = {{"r2", p.diagnostics.r2},
                      {"condition_number", p.diagnostics.condition_number},
                      {"iterations", p.diagnostics.iterations},
                      {"inliers", p.diagnostics.inliers},
                      {"samples", p.diagnostics.samples}};
  nlohmann::ordered_json findings = nlohmann::ordered_json::array();
  for (const auto& f : p.findings) findings.push_back({{"code", f.code}, {"record", f.record}, {"detail", f.detail}});
  j["findings"] = findings;
  return j.dump(2) + "\n";
}

CapitationParams params_from_json(std::string_view text) {
  CapitationParams p;
  try {
    const auto j = nlohmann::json::parse(text);
    p.a_low = j.at("a_low").get<double>();
    p.a_med = j.at("a_med").get<double>();
    p.a_high = j.at("a_high").get<double>();
    p.b = j.at("b").get<double>();
    const auto method = parse_fit_method(j.at("method").get<std::string>());
    if (!method) throw CapitaError(ErrorKind::ConfigError, "unknown fit method in params");
    p.method = *method;
    p.calibration_period = Period::parse(j.at("calibration_period").get<std::string>());
    for (const auto& [id, t] : j.at("tiers").items()) {
      const auto tier = parse_tier(t.get<std::string>());
      if (!tier) throw CapitaError(ErrorKind::ConfigError, "unknown tier for " + id);
      p.tiers.emplace(id, *tier);
    }
    for (const auto& [id, g] : j.at("capture_groups").items()) p.capture_groups.emplace(id, g.get<int>());
    p.group_median_u = j.at("group_median_u").get<std::vector<double>>();
    if (j.contains("diagnostics")) {
      const auto& d = j["diagnostics"];
      p.diagnostics.r2 = d.value("r2", 0.0);
      p.diagnostics.condition_number = d.value("condition_number", 0.0);
      p.diagnostics.iterations = d.value("iterations", 0);
      p.diagnostics.inliers = d.value("inliers", std::size_t{0});
      p.diagnostics.samples = d.value("samples", std::size_t{0});
    }
    if (j.contains("findings"))
      for (const auto& f : j["findings"])
        p.findings.push_back(Finding{f.value("code", ""), f.value("record", ""), f.value("detail", "")});
  } catch (const nlohmann::json::exception& e) {
    throw CapitaError(ErrorKind::ConfigError, std::string("malformed params JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CapitaError(ErrorKind::ConfigError, std::string("malformed params JSON: ") + e.what());
  }
  return p;
}

}  // namespace capita
