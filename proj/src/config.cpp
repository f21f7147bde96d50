#include "capita/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "capita/csv.hpp"
#include "capita/domain.hpp"

namespace capita {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw CapitaError(ErrorKind::ConfigError, "config key '" + key + "' has malformed value '" + value + "'");
}

}  // namespace

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw CapitaError(ErrorKind::ConfigError, "config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw CapitaError(ErrorKind::ConfigError, "config line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second)
      throw CapitaError(ErrorKind::ConfigError, "config key '" + key + "' given twice");
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw CapitaError(ErrorKind::MissingFile, "cannot open config file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

double kv_double(const KeyValues& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  double v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) bad_value(key, s);
  return v;
}

std::int64_t kv_int(const KeyValues& kv, const std::string& key, std::int64_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::int64_t v = 0;
  const auto& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) bad_value(key, s);
  return v;
}

bool kv_bool(const KeyValues& kv, const std::string& key, bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second == "true") return true;
  if (it->second == "false") return false;
  bad_value(key, it->second);
}

std::string kv_string(const KeyValues& kv, const std::string& key, const std::string& fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

Config Config::from_key_values(const KeyValues& kv) {
  static const std::set<std::string> known = {
      "fiscal_year_anchor_month", "calibration_anchor_month", "adjustment_threshold", "ambulance_copay_rate",
      "capture_group_count", "seed", "iqr_multiplier", "bhattacharyya_threshold",
      "bhattacharyya_bins", "quarantine_fraction", "train_fraction", "robustness_splits", "payment_tolerance",
      "min_category_visits", "lab_code_prefix", "carry_split", "pediatric_age_cutoff", "cost_groups",
      "top_antibiotics"};
  for (const auto& [k, v] : kv)
    if (!known.contains(k)) throw CapitaError(ErrorKind::ConfigError, "unknown config key '" + k + "'");

  Config c;
  c.fiscal_year_anchor_month = static_cast<int>(kv_int(kv, "fiscal_year_anchor_month", c.fiscal_year_anchor_month));
  c.calibration_anchor_month = static_cast<int>(kv_int(kv, "calibration_anchor_month", c.calibration_anchor_month));
  c.adjustment_threshold = kv_double(kv, "adjustment_threshold", c.adjustment_threshold);
  c.ambulance_copay_rate = kv_double(kv, "ambulance_copay_rate", c.ambulance_copay_rate);
  c.capture_group_count = static_cast<int>(kv_int(kv, "capture_group_count", c.capture_group_count));
  c.seed = static_cast<std::uint64_t>(kv_int(kv, "seed", static_cast<std::int64_t>(c.seed)));
  c.iqr_multiplier = kv_double(kv, "iqr_multiplier", c.iqr_multiplier);
  c.bhattacharyya_threshold = kv_double(kv, "bhattacharyya_threshold", c.bhattacharyya_threshold);
  c.bhattacharyya_bins = static_cast<int>(kv_int(kv, "bhattacharyya_bins", c.bhattacharyya_bins));
  c.quarantine_fraction = kv_double(kv, "quarantine_fraction", c.quarantine_fraction);
  c.train_fraction = kv_double(kv, "train_fraction", c.train_fraction);
  c.robustness_splits = static_cast<int>(kv_int(kv, "robustness_splits", c.robustness_splits));
  c.payment_tolerance = kv_double(kv, "payment_tolerance", c.payment_tolerance);
  c.min_category_visits = static_cast<int>(kv_int(kv, "min_category_visits", c.min_category_visits));
  c.lab_code_prefix = kv_string(kv, "lab_code_prefix", c.lab_code_prefix);
  c.carry_split = static_cast<int>(kv_int(kv, "carry_split", c.carry_split));
  c.pediatric_age_cutoff = static_cast<int>(kv_int(kv, "pediatric_age_cutoff", c.pediatric_age_cutoff));
  c.cost_groups = static_cast<int>(kv_int(kv, "cost_groups", c.cost_groups));
  c.top_antibiotics = static_cast<int>(kv_int(kv, "top_antibiotics", c.top_antibiotics));

  auto require = [](bool ok, const char* what) {
    if (!ok) throw CapitaError(ErrorKind::ConfigError, std::string("config: ") + what);
  };
  require(c.fiscal_year_anchor_month >= 1 && c.fiscal_year_anchor_month <= 12, "fiscal_year_anchor_month in 1..12");
  require(c.calibration_anchor_month >= 1 && c.calibration_anchor_month <= 12, "calibration_anchor_month in 1..12");
  require(c.adjustment_threshold > 0, "adjustment_threshold > 0");
  require(c.ambulance_copay_rate >= 0 && c.ambulance_copay_rate <= 1, "ambulance_copay_rate in [0,1]");
  require(c.capture_group_count >= 1, "capture_group_count >= 1");
  require(c.bhattacharyya_bins >= 1, "bhattacharyya_bins >= 1");
  require(c.quarantine_fraction >= 0 && c.quarantine_fraction <= 1, "quarantine_fraction in [0,1]");
  require(c.train_fraction > 0 && c.train_fraction < 1, "train_fraction in (0,1)");
  require(c.robustness_splits >= 1, "robustness_splits >= 1");
  require(c.carry_split >= 1, "carry_split >= 1");
  require(c.cost_groups >= 1 && c.top_antibiotics >= 1, "cost_groups and top_antibiotics >= 1");
  return c;
}

Config Config::from_file(const std::filesystem::path& file) { return from_key_values(read_key_values(file)); }

KeyValues Config::to_key_values() const {
  return KeyValues{
      {"fiscal_year_anchor_month", std::to_string(fiscal_year_anchor_month)},
      {"calibration_anchor_month", std::to_string(calibration_anchor_month)},
      {"adjustment_threshold", csv::fmt(adjustment_threshold, 6)},
      {"ambulance_copay_rate", csv::fmt(ambulance_copay_rate, 6)},
      {"capture_group_count", std::to_string(capture_group_count)},
      {"seed", std::to_string(seed)},
      {"iqr_multiplier", csv::fmt(iqr_multiplier, 6)},
      {"bhattacharyya_threshold", csv::fmt(bhattacharyya_threshold, 6)},
      {"bhattacharyya_bins", std::to_string(bhattacharyya_bins)},
      {"quarantine_fraction", csv::fmt(quarantine_fraction, 6)},
      {"train_fraction", csv::fmt(train_fraction, 6)},
      {"robustness_splits", std::to_string(robustness_splits)},
      {"payment_tolerance", csv::fmt(payment_tolerance, 6)},
      {"min_category_visits", std::to_string(min_category_visits)},
      {"lab_code_prefix", lab_code_prefix},
      {"carry_split", std::to_string(carry_split)},
      {"pediatric_age_cutoff", std::to_string(pediatric_age_cutoff)},
      {"cost_groups", std::to_string(cost_groups)},
      {"top_antibiotics", std::to_string(top_antibiotics)},
  };
}

std::string Config::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : to_key_values()) out += k + "=" + v + "\n";
  return out;
}

}  // namespace capita
