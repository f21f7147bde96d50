#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace capita {

/// Flat `key = value` text: one pair per line, `#` starts a comment, blank
/// lines ignored, surrounding whitespace trimmed. Duplicate keys are an error.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::filesystem::path& file);

/// Typed accessors that throw CapitaError(ConfigError) on malformed values.
double kv_double(const KeyValues&, const std::string& key, double fallback);
std::int64_t kv_int(const KeyValues&, const std::string& key, std::int64_t fallback);
bool kv_bool(const KeyValues&, const std::string& key, bool fallback);
std::string kv_string(const KeyValues&, const std::string& key, const std::string& fallback);

/// Run-time configuration shared by every pipeline stage.
struct Config {
  int fiscal_year_anchor_month = 7;
  int calibration_anchor_month = 1;
  double adjustment_threshold = 0.30;
  double ambulance_copay_rate = 0.10;
  int capture_group_count = 5;
  std::uint64_t seed = 42;
  double iqr_multiplier = 1.5;
  double bhattacharyya_threshold = 0.223;
  int bhattacharyya_bins = 20;
  double quarantine_fraction = 0.01;
  double train_fraction = 0.8;
  int robustness_splits = 500;
  double payment_tolerance = 0.30;
  int min_category_visits = 10;
  std::string lab_code_prefix = "LAB";
  int carry_split = 1;
  int pediatric_age_cutoff = 15;
  int cost_groups = 4;
  int top_antibiotics = 8;

  /// Unknown keys are rejected so typos do not silently fall back to defaults.
  static Config from_key_values(const KeyValues&);
  static Config from_file(const std::filesystem::path&);
  KeyValues to_key_values() const;
  /// Canonical `key=value` rendering (sorted keys), used for hashing.
  std::string canonical_text() const;
};

}  // namespace capita
