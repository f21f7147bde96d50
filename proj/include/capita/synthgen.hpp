#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "capita/bundle.hpp"
#include "capita/config.hpp"
#include "capita/segmentation.hpp"

namespace capita {

/// Entry of the antibiotic catalog.
struct AntibioticProduct {
  std::string code;
  std::string name;
  Money unit_cost;
  std::int64_t quantity = 1;  // units per prescription
};

/// The default 39-product catalog. The first eight are the frequent group;
/// index 0 is the capsule amoxicillin and index 1 its syrup counterpart.
std::vector<AntibioticProduct> default_antibiotic_catalog();

struct GeneratorSpec {
  std::uint64_t seed = 42;
  int n_health_centers = 500;
  int n_districts = 30;
  int n_provinces = 5;
  int public_posts_min = 1, public_posts_max = 3;    // per Health Center, uniform
  int private_posts_min = 0, private_posts_max = 2;  // per Health Center, uniform
  double medicalized_fraction = 0.022;

  // Catchment size: log-normal with this median and log-SD, times population_scale.
  double catchment_median = 20209;
  double catchment_log_sd = 0.4259;  // ln(26391 / 14858) / 1.349
  double population_scale = 0.02;
  int min_members = 60;
  double inactive_fraction = 0.03;
  double semester_fraction = 0.05;    // status blank, updated on a semester start: counted
  double stale_fraction = 0.02;       // status blank, updated mid-semester: not counted
  double other_scheme_fraction = 0.01;

  // Utilization structure.
  double phc_util_median = 1.57;
  double phc_util_log_sd = 0.2037;  // ln(1.79 / 1.36) / 1.349
  double capture_mean = 0.43;
  double capture_sd = 0.148;
  double capture_min = 0.08, capture_max = 0.92;
  double private_share = 0.40;           // of away visits that go to private posts
  double out_of_district_share = 0.10;   // of away visits to other Health Centers
  double post_share = 0.25;              // of unit visits that happen at managed posts

  // Planted capitation parameters (RWF).
  double a_low = 912, a_med = 1278, a_high = 1562, b = 1126;

  // Cost noise: relative SD of each visit's cost and of each facility's level.
  double cost_noise_sd = 0.0;
  double facility_noise_sd = 0.0;
  double private_cost_median = 883;
  double private_cost_log_sd = 0.22;

  // Calendar.
  Month start{2023, 1};
  int months = 24;
  bool stationary = false;
  std::array<double, 4> seasonality{1.0, 1.0, 1.0, 1.0};  // calendar quarters

  // Visit content.
  double unapproved_fraction = 0.02;
  double pediatric_fraction = 0.336;
  std::array<double, 3> category_count_probs{0.501, 0.37, 0.129};  // 1, 2, 3 categories
  std::array<double, kDiagnosisCount> category_weights{0.34, 0.22, 0.2, 0.08, 0.1, 0.06};
  std::array<double, kDiagnosisCount> abx_rates{0.78, 0.86, 0.72, 0.82, 0.58, 0.45};
  double adult_abx_factor = 0.6;
  double top8_concentration = 0.82;
  double low_cost_syrup_share = 0.2;   // amoxicillin syrup share in low-cost facilities
  double high_cost_syrup_share = 0.7;
  double antihistamine_rate = 0.35;
  double lab_rate = 0.30;
  double referral_rate = 0.05;
  double admission_rate = 0.01;
  double ambulance_rate = 0.004;
  double ambulance_copay_error_rate = 0.2;  // recorded ambulance share below 10%
  double ambulance_copay_rate = 0.10;
  double non_phc_rate = 0.03;  // at medicalized Health Centers
  Money copay = Money::from_rwf(200);

  /// Unknown keys are rejected. Arrays use comma-separated values.
  static GeneratorSpec from_key_values(const KeyValues&);
  KeyValues to_key_values() const;
  /// Throws InfeasibleSpec.
  void validate() const;
};

struct PlantedFacility {
  std::string facility_id;
  std::string catchment_id;
  std::int64_t members = 0;         // M
  std::int64_t annual_total = 0;    // catchment visits, any facility
  std::int64_t annual_own = 0;      // catchment visits at own unit
  std::int64_t annual_inflow = 0;   // visits at the unit by other catchments
  std::int64_t annual_unit = 0;
  double phc_utilization = 0;
  double capture_ratio = 0;
  double u = 0;
  Tier tier = Tier::Low;
  int capture_group = 0;
  double U = 0;
  double target_annual_cost = 0;  // a_tier·U·M + b·I, RWF
  bool medicalized = false;
  bool low_cost = false;          // below-median expected cost per visit
};

struct GroundTruth {
  GeneratorSpec spec;
  std::array<double, 4> params{};
  std::vector<PlantedFacility> facilities;  // Health Centers, by id
  SegmentationResult segmentation;          // of the planted annual counts
  std::vector<std::string> low_cost_posts;  // posts in the low-cost class
  std::vector<AntibioticProduct> catalog;
  Period first_year;                        // first aligned 12-month window

  const PlantedFacility* find(const std::string& id) const;
  std::string to_json() const;
};

struct Generated {
  DatasetBundle bundle;
  GroundTruth truth;
};

/// Builds a synthetic bundle in which every Health Center's expected
/// annualized cost over any aligned 12-month window equals the capitation
/// formula under the planted parameters and the segmentation implied by the
/// planted visit counts. Output is a pure function of the spec.
Generated generate(const GeneratorSpec& spec);

enum class ScenarioKind { Identity, UtilizationShift, InflowShift, CostOutliers };

struct Scenario {
  ScenarioKind kind = ScenarioKind::Identity;
  double factor = 1.0;      // visit multiplier or cost multiplier
  double fraction = 0.0;    // cost_outliers share of Health Centers
  std::optional<Period> quarter;
  std::vector<std::string> facilities;  // empty: every Health Center

  /// "identity", "utilization_shift:1.5:2024-Q3", "inflow_shift:1.5:2024-Q3[:HC001,HC002]",
  /// "cost_outliers:0.05:10". Throws UnknownScenario.
  static Scenario parse(std::string_view text);
};

struct PerturbResult {
  DatasetBundle bundle;
  std::vector<std::string> affected;  // Health Centers touched
};

/// Deterministic copy of `bundle` with the scenario applied.
/// utilization_shift / inflow_shift resample the quarter's approved visits at
/// the selected units (all visits, or inflow visits only) by `factor`;
/// cost_outliers multiplies every cost and co-payment of ceil(fraction · n)
/// Health Centers (with their posts) by `factor`.
PerturbResult perturb(const DatasetBundle& bundle, const Scenario& scenario, std::uint64_t seed = 42);

}  // namespace capita
