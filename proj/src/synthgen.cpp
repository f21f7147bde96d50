#include "capita/synthgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>

#include <json.hpp>

#include "capita/metrics.hpp"
#include "capita/rng.hpp"
#include "capita/stats.hpp"

namespace capita {

namespace {

// Substream purposes.
constexpr std::uint32_t kFacilityStream = 0x46414353;  // "FACS"
constexpr std::uint32_t kMemberStream = 0x4d454d42;    // "MEMB"
constexpr std::uint32_t kDestStream = 0x44455354;      // "DEST"
constexpr std::uint32_t kVisitStream = 0x56495354;     // "VIST"
constexpr std::uint32_t kMonthStream = 0x4d4e5448;     // "MNTH"
constexpr std::uint32_t kCostStream = 0x434f5354;      // "COST"
constexpr std::uint32_t kPrivateStream = 0x50524956;   // "PRIV"
constexpr std::uint32_t kLevelStream = 0x4c45564c;     // "LEVL"

/// Rounds continuous draws to a 1e-9 grid so tiny libm differences between
/// platforms rarely change generated integers.
double quantize(double x) { return std::round(x * 1e9) / 1e9; }

double lognormal(Philox& rng, double median, double log_sd) {
  return quantize(std::exp(std::log(median) + log_sd * quantize(rng.normal())));
}

std::string padded(const char* prefix, int value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return prefix + digits;
}

int digits(int n) { return n < 10 ? 1 : 1 + digits(n / 10); }

// ---------------------------------------------------------------------------
// Spec key=value binding
// ---------------------------------------------------------------------------

std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <std::size_t N>
std::string fmt_array(const std::array<double, N>& a) {
  std::string s;
  for (std::size_t i = 0; i < N; ++i) s += (i ? "," : "") + fmt_double(a[i]);
  return s;
}

template <std::size_t N>
std::array<double, N> parse_array(const std::string& key, const std::string& text) {
  std::array<double, N> out{};
  std::size_t pos = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto comma = text.find(',', pos);
    if ((i + 1 < N) == (comma == std::string::npos))
      throw CapitaError(ErrorKind::ConfigError, "key '" + key + "' needs " + std::to_string(N) + " comma-separated values");
    KeyValues one{{key, text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos)}};
    out[i] = kv_double(one, key, 0);
    pos = comma + 1;
  }
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const GeneratorSpec&)> get;
  std::function<void(GeneratorSpec&, const KeyValues&)> set;
};

Field dbl(const char* key, double GeneratorSpec::*m) {
  return {key, [m](const GeneratorSpec& s) { return fmt_double(s.*m); },
          [key, m](GeneratorSpec& s, const KeyValues& kv) { s.*m = kv_double(kv, key, s.*m); }};
}

Field integer(const char* key, int GeneratorSpec::*m) {
  return {key, [m](const GeneratorSpec& s) { return std::to_string(s.*m); },
          [key, m](GeneratorSpec& s, const KeyValues& kv) { s.*m = static_cast<int>(kv_int(kv, key, s.*m)); }};
}

template <std::size_t N>
Field arr(const char* key, std::array<double, N> GeneratorSpec::*m) {
  return {key, [m](const GeneratorSpec& s) { return fmt_array(s.*m); },
          [key, m](GeneratorSpec& s, const KeyValues& kv) {
            if (auto it = kv.find(key); it != kv.end()) s.*m = parse_array<N>(key, it->second);
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"seed", [](const GeneratorSpec& s) { return std::to_string(s.seed); },
       [](GeneratorSpec& s, const KeyValues& kv) { s.seed = static_cast<std::uint64_t>(kv_int(kv, "seed", static_cast<std::int64_t>(s.seed))); }},
      integer("n_health_centers", &GeneratorSpec::n_health_centers),
      integer("n_districts", &GeneratorSpec::n_districts),
      integer("n_provinces", &GeneratorSpec::n_provinces),
      integer("public_posts_min", &GeneratorSpec::public_posts_min),
      integer("public_posts_max", &GeneratorSpec::public_posts_max),
      integer("private_posts_min", &GeneratorSpec::private_posts_min),
      integer("private_posts_max", &GeneratorSpec::private_posts_max),
      dbl("medicalized_fraction", &GeneratorSpec::medicalized_fraction),
      dbl("catchment_median", &GeneratorSpec::catchment_median),
      dbl("catchment_log_sd", &GeneratorSpec::catchment_log_sd),
      dbl("population_scale", &GeneratorSpec::population_scale),
      integer("min_members", &GeneratorSpec::min_members),
      dbl("inactive_fraction", &GeneratorSpec::inactive_fraction),
      dbl("semester_fraction", &GeneratorSpec::semester_fraction),
      dbl("stale_fraction", &GeneratorSpec::stale_fraction),
      dbl("other_scheme_fraction", &GeneratorSpec::other_scheme_fraction),
      dbl("phc_util_median", &GeneratorSpec::phc_util_median),
      dbl("phc_util_log_sd", &GeneratorSpec::phc_util_log_sd),
      dbl("capture_mean", &GeneratorSpec::capture_mean),
      dbl("capture_sd", &GeneratorSpec::capture_sd),
      dbl("capture_min", &GeneratorSpec::capture_min),
      dbl("capture_max", &GeneratorSpec::capture_max),
      dbl("private_share", &GeneratorSpec::private_share),
      dbl("out_of_district_share", &GeneratorSpec::out_of_district_share),
      dbl("post_share", &GeneratorSpec::post_share),
      dbl("a_low", &GeneratorSpec::a_low),
      dbl("a_med", &GeneratorSpec::a_med),
      dbl("a_high", &GeneratorSpec::a_high),
      dbl("b", &GeneratorSpec::b),
      dbl("cost_noise_sd", &GeneratorSpec::cost_noise_sd),
      dbl("facility_noise_sd", &GeneratorSpec::facility_noise_sd),
      dbl("private_cost_median", &GeneratorSpec::private_cost_median),
      dbl("private_cost_log_sd", &GeneratorSpec::private_cost_log_sd),
      {"start", [](const GeneratorSpec& s) { return s.start.to_string(); },
       [](GeneratorSpec& s, const KeyValues& kv) {
         if (auto it = kv.find("start"); it != kv.end()) {
           try {
             s.start = Month::parse(it->second);
           } catch (const std::invalid_argument& e) {
             throw CapitaError(ErrorKind::ConfigError, std::string("key 'start': ") + e.what());
           }
         }
       }},
      integer("months", &GeneratorSpec::months),
      {"stationary", [](const GeneratorSpec& s) { return std::string(s.stationary ? "true" : "false"); },
       [](GeneratorSpec& s, const KeyValues& kv) { s.stationary = kv_bool(kv, "stationary", s.stationary); }},
      arr("seasonality", &GeneratorSpec::seasonality),
      dbl("unapproved_fraction", &GeneratorSpec::unapproved_fraction),
      dbl("pediatric_fraction", &GeneratorSpec::pediatric_fraction),
      arr("category_count_probs", &GeneratorSpec::category_count_probs),
      arr("category_weights", &GeneratorSpec::category_weights),
      arr("abx_rates", &GeneratorSpec::abx_rates),
      dbl("adult_abx_factor", &GeneratorSpec::adult_abx_factor),
      dbl("top8_concentration", &GeneratorSpec::top8_concentration),
      dbl("low_cost_syrup_share", &GeneratorSpec::low_cost_syrup_share),
      dbl("high_cost_syrup_share", &GeneratorSpec::high_cost_syrup_share),
      dbl("antihistamine_rate", &GeneratorSpec::antihistamine_rate),
      dbl("lab_rate", &GeneratorSpec::lab_rate),
      dbl("referral_rate", &GeneratorSpec::referral_rate),
      dbl("admission_rate", &GeneratorSpec::admission_rate),
      dbl("ambulance_rate", &GeneratorSpec::ambulance_rate),
      dbl("ambulance_copay_error_rate", &GeneratorSpec::ambulance_copay_error_rate),
      dbl("ambulance_copay_rate", &GeneratorSpec::ambulance_copay_rate),
      dbl("non_phc_rate", &GeneratorSpec::non_phc_rate),
      {"copay", [](const GeneratorSpec& s) { return s.copay.to_string(); },
       [](GeneratorSpec& s, const KeyValues& kv) {
         if (auto it = kv.find("copay"); it != kv.end()) {
           try {
             s.copay = Money::parse(it->second);
           } catch (const std::invalid_argument& e) {
             throw CapitaError(ErrorKind::ConfigError, std::string("key 'copay': ") + e.what());
           }
         }
       }},
  };
  return f;
}

}  // namespace

GeneratorSpec GeneratorSpec::from_key_values(const KeyValues& kv) {
  GeneratorSpec s;
  for (const auto& [key, _] : kv)
    if (std::none_of(fields().begin(), fields().end(), [&](const Field& f) { return key == f.key; }))
      throw CapitaError(ErrorKind::ConfigError, "unknown generator key '" + key + "'");
  for (const auto& f : fields()) f.set(s, kv);
  s.validate();
  return s;
}

KeyValues GeneratorSpec::to_key_values() const {
  KeyValues kv;
  for (const auto& f : fields()) kv.emplace(f.key, f.get(*this));
  return kv;
}

void GeneratorSpec::validate() const {
  auto fail = [](const std::string& why) { throw CapitaError(ErrorKind::InfeasibleSpec, why); };
  auto prob = [&](double p, const char* name) {
    if (!(p >= 0 && p <= 1)) fail(std::string(name) + " must lie in [0, 1]");
  };
  if (n_health_centers < static_cast<int>(kMinSegmentFacilities))
    fail("n_health_centers must be at least " + std::to_string(kMinSegmentFacilities));
  if (n_districts < 1 || n_provinces < 1 || n_provinces > n_districts) fail("need 1 <= n_provinces <= n_districts");
  if (public_posts_min < 0 || public_posts_max < public_posts_min) fail("bad public post range");
  if (private_posts_min < 0 || private_posts_max < private_posts_min) fail("bad private post range");
  if (!(a_low > 0 && a_med > 0 && a_high > 0 && b > 0)) fail("planted parameters must be positive");
  if (!(catchment_median > 0 && population_scale > 0)) fail("catchment size must be positive");
  if (!(phc_util_median > 0)) fail("phc_util_median must be positive");
  if (min_members < 1) fail("min_members must be positive");
  if (months < 1) fail("months must be positive");
  if (!start.valid()) fail("invalid start month");
  if (capture_min > capture_max) fail("capture_min exceeds capture_max");
  if (capture_max > 1 || capture_min <= 0) fail("capture ratios must lie in (0, 1]");
  if (cost_noise_sd < 0 || facility_noise_sd < 0) fail("noise SDs must be non-negative");
  for (auto [p, n] : {std::pair{medicalized_fraction, "medicalized_fraction"}, {inactive_fraction, "inactive_fraction"},
                      {semester_fraction, "semester_fraction"}, {stale_fraction, "stale_fraction"},
                      {other_scheme_fraction, "other_scheme_fraction"}, {private_share, "private_share"},
                      {out_of_district_share, "out_of_district_share"}, {post_share, "post_share"},
                      {unapproved_fraction, "unapproved_fraction"}, {pediatric_fraction, "pediatric_fraction"},
                      {adult_abx_factor, "adult_abx_factor"}, {top8_concentration, "top8_concentration"},
                      {low_cost_syrup_share, "low_cost_syrup_share"}, {high_cost_syrup_share, "high_cost_syrup_share"},
                      {antihistamine_rate, "antihistamine_rate"}, {lab_rate, "lab_rate"},
                      {referral_rate, "referral_rate"}, {admission_rate, "admission_rate"},
                      {ambulance_rate, "ambulance_rate"}, {ambulance_copay_error_rate, "ambulance_copay_error_rate"},
                      {ambulance_copay_rate, "ambulance_copay_rate"}, {non_phc_rate, "non_phc_rate"}})
    prob(p, n);
  if (inactive_fraction + semester_fraction + stale_fraction + other_scheme_fraction > 1)
    fail("member status fractions exceed 1");
  for (double r : abx_rates) prob(r, "abx_rates");
  for (double w : seasonality)
    if (!(w > 0)) fail("seasonality weights must be positive");
  for (double w : category_weights)
    if (w < 0) fail("category_weights must be non-negative");
  for (double w : category_count_probs)
    if (w < 0) fail("category_count_probs must be non-negative");
  if (copay.cents() < 0) fail("copay must be non-negative");
}

std::vector<AntibioticProduct> default_antibiotic_catalog() {
  std::vector<AntibioticProduct> c = {
      {"AMOX-CAP250", "Amoxicillin 250mg capsule", Money::from_rwf(15), 15},
      {"AMOX-SYR125", "Amoxicillin 125mg/5ml syrup 100ml", Money::from_rwf(950), 1},
      {"METRO-TAB250", "Metronidazole 250mg tablet", Money::from_rwf(4), 15},
      {"COTRI-SYR240", "Cotrimoxazole 240mg/5ml syrup 100ml", Money::from_rwf(700), 1},
      {"COTRI-TAB480", "Cotrimoxazole 480mg tablet", Money::from_rwf(12), 10},
      {"AMOXCLAV-SYR", "Amoxicillin/clavulanate syrup 100ml", Money::from_rwf(2600), 1},
      {"ERY-SYR125", "Erythromycin 125mg/5ml syrup 100ml", Money::from_rwf(1400), 1},
      {"CLOXA-CAP250", "Cloxacillin 250mg capsule", Money::from_rwf(25), 20},
  };
  for (int k = 1; k <= 31; ++k)
    c.push_back({padded("ABX-O", k, 2), "Other antibiotic " + std::to_string(k), Money::from_rwf(300 + 90 * k), 1});
  return c;
}

const PlantedFacility* GroundTruth::find(const std::string& id) const {
  auto it = std::lower_bound(facilities.begin(), facilities.end(), id,
                             [](const PlantedFacility& f, const std::string& x) { return f.facility_id < x; });
  return it != facilities.end() && it->facility_id == id ? &*it : nullptr;
}

std::string GroundTruth::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json s;
  for (const auto& [k, v] : spec.to_key_values()) s[k] = v;
  j["spec"] = s;
  j["params"] = {{"a_low", params[0]}, {"a_med", params[1]}, {"a_high", params[2]}, {"b", params[3]}};
  j["first_year"] = first_year.label();
  nlohmann::ordered_json tiers = nlohmann::ordered_json::array();
  for (const auto& r : segmentation.tier_ranges) tiers.push_back({{"lo", r.lo}, {"hi", r.hi}, {"count", r.count}});
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (std::size_t g = 0; g < segmentation.capture_group_ranges.size(); ++g) {
    const auto& r = segmentation.capture_group_ranges[g];
    groups.push_back({{"group", g + 1}, {"lo", r.lo}, {"hi", r.hi}, {"count", r.count},
                      {"median_u", segmentation.group_median_u[g]}});
  }
  j["tiers"] = tiers;
  j["capture_groups"] = groups;
  nlohmann::ordered_json fac = nlohmann::ordered_json::array();
  for (const auto& f : facilities)
    fac.push_back({{"facility_id", f.facility_id},
                   {"catchment_id", f.catchment_id},
                   {"members", f.members},
                   {"annual_total", f.annual_total},
                   {"annual_own", f.annual_own},
                   {"annual_inflow", f.annual_inflow},
                   {"annual_unit", f.annual_unit},
                   {"phc_utilization", f.phc_utilization},
                   {"capture_ratio", f.capture_ratio},
                   {"u", f.u},
                   {"tier", std::string(to_string(f.tier))},
                   {"capture_group", f.capture_group},
                   {"U", f.U},
                   {"target_annual_cost", f.target_annual_cost},
                   {"medicalized", f.medicalized},
                   {"low_cost", f.low_cost}});
  j["facilities"] = fac;
  j["low_cost_posts"] = low_cost_posts;
  nlohmann::ordered_json cat = nlohmann::ordered_json::array();
  for (const auto& p : catalog)
    cat.push_back({{"code", p.code}, {"name", p.name}, {"unit_cost", p.unit_cost.rwf()}, {"quantity", p.quantity}});
  j["antibiotic_catalog"] = cat;
  j["abx_rates"] = spec.abx_rates;
  j["top8_concentration"] = spec.top8_concentration;
  return j.dump(2) + "\n";
}

namespace {

struct Proto {
  int facility = 0;      // index into facilities
  int unit = -1;         // Health Center index, -1 for private posts
  int catchment = 0;
  std::size_t member = 0;
  bool approved = true;
  bool cost_bearing = false;
  int month_of_year = 0;  // 1..12 (periodic mode)
  double day = 0;         // fraction of the month
  int stay_days = 0;
  VisitRecord rec;        // everything except id and dates
};

struct Item {
  const char* code;
  CostKind kind;
  std::int64_t quantity;
  std::int64_t unit_rwf;
};

constexpr Item kLabItems[] = {{"LAB-MRDT", CostKind::Service, 1, 300}, {"LAB-STOOL", CostKind::Service, 1, 400},
                              {"LAB-URINE", CostKind::Service, 1, 350}};
constexpr Item kOtherDrugs[] = {{"DRG-PARA", CostKind::Drug, 10, 3}, {"DRG-ORS", CostKind::Drug, 2, 60},
                                {"DRG-ZINC", CostKind::Drug, 10, 15}, {"DRG-IRON", CostKind::Drug, 30, 2}};
constexpr Item kAntihistamine = {"AH-CHLOR", CostKind::Drug, 10, 5};
constexpr Item kNonPhc = {"NPHC-CSEC", CostKind::Service, 1, 60000};
constexpr const char* kConsultHc = "CONS-HC";
constexpr const char* kConsultPost = "CONS-HP";
constexpr const char* kAmbulance = "AMB-TRANSFER";
constexpr double kTop8Weights[8] = {0.19, 0.16, 0.17, 0.12, 0.11, 0.09, 0.09, 0.07};

CostItem make_item(const Item& it) {
  CostItem c;
  c.kind = it.kind;
  c.item_code = it.code;
  c.quantity = it.quantity;
  c.unit_cost = Money::from_rwf(it.unit_rwf);
  return c;
}

DiagnosisSet draw_categories(Philox& rng, const GeneratorSpec& spec) {
  const std::size_t count = 1 + rng.pick(spec.category_count_probs);
  std::array<double, kDiagnosisCount> w = spec.category_weights;
  DiagnosisSet set;
  for (std::size_t k = 0; k < count; ++k) {
    if (std::all_of(w.begin(), w.end(), [](double x) { return x <= 0; })) break;
    const std::size_t c = rng.pick(w);
    set.insert(static_cast<Diagnosis>(c));
    w[c] = 0;
  }
  if (set.empty()) set.insert(Diagnosis::Other);
  return set;
}

}  // namespace

Generated generate(const GeneratorSpec& spec) {
  spec.validate();
  const int n = spec.n_health_centers;
  const int width = std::max(4, digits(n));
  const Month first = spec.start;
  const Month last = spec.start.plus(spec.months - 1);

  Generated out;
  DatasetBundle& bundle = out.bundle;
  GroundTruth& truth = out.truth;
  truth.spec = spec;
  truth.params = {spec.a_low, spec.a_med, spec.a_high, spec.b};
  truth.catalog = default_antibiotic_catalog();
  truth.first_year = Period{first, first.plus(11), Granularity::Custom};

  // --- facilities --------------------------------------------------------
  std::vector<FacilityRecord> facilities;
  std::vector<int> facility_unit;  // HC index for HCs and public posts, -1 for private
  std::vector<int> facility_home;  // HC whose catchment hosts the facility
  std::vector<std::vector<int>> public_posts(n);
  std::vector<std::vector<int>> hcs_in_district(spec.n_districts), private_in_district(spec.n_districts);
  std::vector<int> all_private;
  auto add_facility = [&](FacilityRecord f, int unit, int home) {
    facilities.push_back(std::move(f));
    facility_unit.push_back(unit);
    facility_home.push_back(home);
    return static_cast<int>(facilities.size() - 1);
  };
  for (int i = 0; i < n; ++i) {
    Philox rng(spec.seed, stream_id(kFacilityStream, static_cast<std::uint32_t>(i)));
    const int district = i % spec.n_districts;
    FacilityRecord hc;
    hc.facility_id = padded("HC", i + 1, width);
    hc.kind = FacilityKind::HealthCenter;
    hc.medicalized = rng.bernoulli(spec.medicalized_fraction);
    hc.catchment_id = padded("C", i + 1, width);
    hc.district_id = padded("D", district + 1, 2);
    hc.province_id = padded("P", district % spec.n_provinces + 1, 1);
    hc.first_active_month = first;
    hc.last_active_month = last;
    add_facility(hc, i, i);
    hcs_in_district[district].push_back(i);
    const int n_public = spec.public_posts_min +
                         static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.public_posts_max - spec.public_posts_min + 1)));
    const int n_private = spec.private_posts_min + static_cast<int>(rng.below(
                                                       static_cast<std::uint64_t>(spec.private_posts_max - spec.private_posts_min + 1)));
    for (int k = 0; k < n_public; ++k) {
      FacilityRecord p = hc;
      p.facility_id = hc.facility_id + "-P" + std::to_string(k + 1);
      p.kind = FacilityKind::PublicHealthPost;
      p.medicalized = false;
      p.parent_hc_id = hc.facility_id;
      p.catchment_id.reset();
      public_posts[i].push_back(add_facility(p, i, i));
    }
    for (int k = 0; k < n_private; ++k) {
      FacilityRecord p = hc;
      p.facility_id = padded("PP", i + 1, width) + "-" + std::to_string(k + 1);
      p.kind = FacilityKind::PrivateHealthPost;
      p.medicalized = false;
      p.catchment_id.reset();
      const int idx = add_facility(p, -1, i);
      private_in_district[district].push_back(idx);
      all_private.push_back(idx);
    }
  }

  // --- members and catchment behaviour ----------------------------------
  std::vector<std::size_t> member_begin(n + 1, 0);
  std::vector<std::int64_t> counted(n, 0);
  std::vector<double> phc_draw(n), capture_draw(n);
  const int member_year = first.year;
  for (int j = 0; j < n; ++j) {
    Philox rng(spec.seed, stream_id(kMemberStream, static_cast<std::uint32_t>(j)));
    const double size = lognormal(rng, spec.catchment_median, spec.catchment_log_sd) * spec.population_scale;
    const auto m = std::max<std::int64_t>(spec.min_members, std::llround(size));
    phc_draw[j] = lognormal(rng, spec.phc_util_median, spec.phc_util_log_sd);
    capture_draw[j] = std::clamp(quantize(spec.capture_mean + spec.capture_sd * quantize(rng.normal())),
                                 spec.capture_min, spec.capture_max);
    member_begin[j] = bundle.members.size();
    std::int64_t household = 0, left_in_household = 0;
    for (std::int64_t k = 0; k < m; ++k) {
      if (left_in_household == 0) {
        ++household;
        left_in_household = 1 + static_cast<std::int64_t>(rng.below(6));
      }
      --left_in_household;
      MemberRecord mr;
      mr.member_id = padded("M", j + 1, width) + "-" + padded("", static_cast<int>(k + 1), 5);
      mr.household_id = padded("H", j + 1, width) + "-" + padded("", static_cast<int>(household), 5);
      mr.catchment_id = padded("C", j + 1, width);
      const double r = rng.uniform();
      const std::array<double, 4> cut = {spec.inactive_fraction, spec.semester_fraction, spec.stale_fraction,
                                         spec.other_scheme_fraction};
      double acc = 0;
      int bucket = 4;  // active CBHI
      for (int c = 0; c < 4; ++c) {
        acc += cut[c];
        if (r < acc) {
          bucket = c;
          break;
        }
      }
      if (k == 0) bucket = 4;  // every catchment has at least one counted member
      const int rm = 1 + static_cast<int>(rng.below(12)), rd = 1 + static_cast<int>(rng.below(28));
      switch (bucket) {
        case 0: mr.status = MemberStatus::Inactive; mr.last_updated = Date{member_year, rm, rd}; break;
        case 1:
          mr.status = MemberStatus::Unspecified;
          mr.last_updated = Date{member_year, rng.bernoulli(0.5) ? 1 : 7, 1};
          break;
        case 2: mr.status = MemberStatus::Unspecified; mr.last_updated = Date{member_year, rm, std::max(2, rd)}; break;
        case 3: mr.status = MemberStatus::Active; mr.scheme = Scheme::Other; mr.last_updated = Date{member_year, rm, rd}; break;
        default: mr.status = MemberStatus::Active; mr.last_updated = Date{member_year, rm, rd};
      }
      if (bucket == 1 || bucket == 4) ++counted[j];
      bundle.members.push_back(std::move(mr));
    }
  }
  member_begin[n] = bundle.members.size();

  // --- visit skeletons -----------------------------------------------------
  // Counts are planned per block: one month (stationary) or one year.
  const int block_months = spec.stationary ? 1 : 12;
  const std::int64_t per_year = 12 / block_months;
  std::vector<Proto> protos;
  std::vector<std::int64_t> total(n, 0), own(n, 0), inflow(n, 0);

  auto pick_at_unit = [&](Philox& rng, int hc) {
    if (!public_posts[hc].empty() && rng.bernoulli(spec.post_share))
      return public_posts[hc][rng.below(public_posts[hc].size())];
    return hc;  // HC facilities occupy indices in creation order; map below
  };
  // facility index of each HC
  std::vector<int> hc_facility(n);
  for (std::size_t f = 0; f < facilities.size(); ++f)
    if (facilities[f].kind == FacilityKind::HealthCenter) hc_facility[facility_unit[f]] = static_cast<int>(f);

  for (int j = 0; j < n; ++j) {
    Philox rng(spec.seed, stream_id(kDestStream, static_cast<std::uint32_t>(j)));
    const double expected = phc_draw[j] * static_cast<double>(counted[j]) / static_cast<double>(per_year);
    const std::int64_t t = std::max<std::int64_t>(1, std::llround(expected));
    const std::int64_t o = std::clamp<std::int64_t>(std::llround(capture_draw[j] * static_cast<double>(t)), 1, t);
    const std::int64_t away = t - o;
    const int district = j % spec.n_districts;
    const auto& local_private = private_in_district[district];
    const std::int64_t to_private =
        all_private.empty() ? 0 : std::llround(spec.private_share * static_cast<double>(away));
    const std::size_t mcount = member_begin[j + 1] - member_begin[j];

    auto push = [&](int facility, int unit) {
      Proto p;
      p.facility = facility;
      p.unit = unit;
      p.catchment = j;
      p.member = member_begin[j] + rng.below(mcount);
      protos.push_back(std::move(p));
    };
    for (std::int64_t k = 0; k < o; ++k) {
      const int f = pick_at_unit(rng, j);
      push(f == j ? hc_facility[j] : f, j);
    }
    for (std::int64_t k = 0; k < away - to_private; ++k) {
      int dest;
      const auto& local = hcs_in_district[district];
      if (local.size() > 1 && !rng.bernoulli(spec.out_of_district_share)) {
        do dest = local[rng.below(local.size())];
        while (dest == j);
      } else {
        do dest = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        while (dest == j);
      }
      const int f = pick_at_unit(rng, dest);
      push(f == dest ? hc_facility[dest] : f, dest);
      ++inflow[dest];
    }
    for (std::int64_t k = 0; k < to_private; ++k) {
      const auto& pool = local_private.empty() ? all_private : local_private;
      push(pool[rng.below(pool.size())], -1);
    }
    const std::int64_t unapproved = std::llround(spec.unapproved_fraction * static_cast<double>(t));
    for (std::int64_t k = 0; k < unapproved; ++k) {
      push(hc_facility[j], j);
      protos.back().approved = false;
    }
    total[j] = t;
    own[j] = o;
  }

  // --- planted metrics, segmentation and targets ---------------------------
  std::vector<FacilityMetrics> planned(n);
  for (int i = 0; i < n; ++i) {
    FacilityMetrics& m = planned[i];
    m.facility_id = facilities[hc_facility[i]].facility_id;
    m.months_active = 12;
    m.member_count = counted[i];
    m.catchment_visits_total = total[i] * per_year;
    m.catchment_visits_own = own[i] * per_year;
    m.inflow_visits = inflow[i] * per_year;
    m.unit_visits = m.catchment_visits_own + m.inflow_visits;
    const double members = static_cast<double>(m.member_count);
    m.phc_utilization_rate = annualize(static_cast<double>(m.catchment_visits_total), 12) / members;
    m.hc_utilization_rate_u = annualize(static_cast<double>(m.catchment_visits_own), 12) / members;
    m.capture_ratio = static_cast<double>(m.catchment_visits_own) / static_cast<double>(m.catchment_visits_total);
    m.inflow = annualize(static_cast<double>(m.inflow_visits), 12);
  }
  truth.segmentation = segment(planned, 5);
  const SegmentationResult& seg = truth.segmentation;

  std::vector<double> target(n);
  std::vector<double> expected_cpv(n);
  for (int i = 0; i < n; ++i) {
    const FacilityMetrics& m = planned[i];
    const Tier tier = seg.tier.at(m.facility_id);
    const double U = lookup_U(m.facility_id, seg);
    const double a = tier == Tier::Low ? spec.a_low : tier == Tier::Medium ? spec.a_med : spec.a_high;
    double y = a * U * static_cast<double>(m.member_count) + spec.b * m.inflow;
    if (spec.facility_noise_sd > 0) {
      Philox rng(spec.seed, stream_id(kLevelStream, static_cast<std::uint32_t>(i)));
      y *= std::max(0.05, 1.0 + spec.facility_noise_sd * quantize(rng.normal()));
    }
    target[i] = y;
    expected_cpv[i] = y / static_cast<double>(m.unit_visits);

    PlantedFacility pf;
    pf.facility_id = m.facility_id;
    pf.catchment_id = *facilities[hc_facility[i]].catchment_id;
    pf.members = m.member_count;
    pf.annual_total = m.catchment_visits_total;
    pf.annual_own = m.catchment_visits_own;
    pf.annual_inflow = m.inflow_visits;
    pf.annual_unit = m.unit_visits;
    pf.phc_utilization = m.phc_utilization_rate;
    pf.capture_ratio = m.capture_ratio;
    pf.u = m.hc_utilization_rate_u;
    pf.tier = tier;
    pf.capture_group = seg.capture_group.at(m.facility_id);
    pf.U = U;
    pf.target_annual_cost = y;
    pf.medicalized = facilities[hc_facility[i]].medicalized;
    truth.facilities.push_back(pf);
  }
  const double cpv_median = stats::median(expected_cpv);
  std::vector<bool> low_cost_hc(n);
  for (int i = 0; i < n; ++i) {
    low_cost_hc[i] = expected_cpv[i] < cpv_median;
    truth.facilities[i].low_cost = low_cost_hc[i];
  }
  std::vector<double> private_cpv(facilities.size(), 0.0);
  {
    std::vector<double> draws;
    for (int f : all_private) {
      Philox rng(spec.seed, stream_id(kPrivateStream, static_cast<std::uint32_t>(f)));
      private_cpv[f] = lognormal(rng, spec.private_cost_median, spec.private_cost_log_sd);
      draws.push_back(private_cpv[f]);
    }
    const double med = stats::median(draws);
    for (int f : all_private)
      if (private_cpv[f] < med) truth.low_cost_posts.push_back(facilities[f].facility_id);
    for (int i = 0; i < n; ++i)
      if (low_cost_hc[i])
        for (int f : public_posts[i]) truth.low_cost_posts.push_back(facilities[f].facility_id);
    std::sort(truth.low_cost_posts.begin(), truth.low_cost_posts.end());
  }
  auto low_cost_facility = [&](int f) {
    return facility_unit[f] >= 0 ? static_cast<bool>(low_cost_hc[facility_unit[f]])
                                 : std::binary_search(truth.low_cost_posts.begin(), truth.low_cost_posts.end(),
                                                      facilities[f].facility_id);
  };
  std::sort(truth.facilities.begin(), truth.facilities.end(),
            [](const PlantedFacility& a, const PlantedFacility& b) { return a.facility_id < b.facility_id; });

  // --- visit content -------------------------------------------------------
  const auto& catalog = truth.catalog;
  const std::vector<double> top8(std::begin(kTop8Weights), std::end(kTop8Weights));
  for (std::size_t v = 0; v < protos.size(); ++v) {
    Proto& p = protos[v];
    Philox rng(spec.seed, stream_id(kVisitStream, static_cast<std::uint32_t>(v)));
    VisitRecord& r = p.rec;
    r.facility_id = facilities[p.facility].facility_id;
    r.member_id = bundle.members[p.member].member_id;
    r.approved = p.approved;
    p.day = rng.uniform();
    const bool pediatric = rng.bernoulli(spec.pediatric_fraction);
    r.patient_age_years = pediatric ? static_cast<int>(rng.below(15)) : 15 + static_cast<int>(rng.below(65));
    r.diagnosis_categories = draw_categories(rng, spec);
    r.referred = rng.bernoulli(spec.referral_rate);
    r.admitted = rng.bernoulli(spec.admission_rate);
    if (r.admitted) p.stay_days = 1 + static_cast<int>(rng.below(5));

    if (rng.bernoulli(spec.lab_rate)) r.cost_items.push_back(make_item(kLabItems[rng.below(std::size(kLabItems))]));
    double abx_rate = 0;
    for (Diagnosis d : r.diagnosis_categories.members()) abx_rate = std::max(abx_rate, spec.abx_rates[static_cast<int>(d)]);
    if (!pediatric) abx_rate *= spec.adult_abx_factor;
    if (rng.bernoulli(abx_rate)) {
      std::size_t idx = rng.bernoulli(spec.top8_concentration) ? rng.pick(top8) : 8 + rng.below(catalog.size() - 8);
      if (idx <= 1) {
        const double syrup = low_cost_facility(p.facility) ? spec.low_cost_syrup_share : spec.high_cost_syrup_share;
        idx = rng.bernoulli(syrup) ? 1 : 0;
      }
      const auto& prod = catalog[idx];
      CostItem c;
      c.kind = CostKind::Drug;
      c.item_code = prod.code;
      c.quantity = prod.quantity;
      c.unit_cost = prod.unit_cost;
      c.is_antibiotic = true;
      r.cost_items.push_back(c);
    }
    if (rng.bernoulli(spec.antihistamine_rate)) {
      CostItem c = make_item(kAntihistamine);
      c.is_antihistamine = true;
      r.cost_items.push_back(c);
    }
    const int n_other = static_cast<int>(rng.below(3));
    for (int k = 0; k < n_other; ++k) r.cost_items.push_back(make_item(kOtherDrugs[rng.below(std::size(kOtherDrugs))]));
    if (rng.bernoulli(spec.ambulance_rate)) {
      CostItem c;
      c.kind = CostKind::Ambulance;
      c.item_code = kAmbulance;
      c.unit_cost = Money::from_rwf(100 * (150 + static_cast<std::int64_t>(rng.below(251))));
      r.cost_items.push_back(c);
    }
    if (p.unit >= 0 && p.facility == hc_facility[p.unit] && facilities[p.facility].medicalized &&
        rng.bernoulli(spec.non_phc_rate)) {
      CostItem c = make_item(kNonPhc);
      c.is_non_phc = true;
      r.cost_items.push_back(c);
    }
    const bool copay_error = rng.bernoulli(spec.ambulance_copay_error_rate);
    Money amb;
    for (const auto& c : r.cost_items)
      if (c.kind == CostKind::Ambulance) amb += c.total();
    const std::int64_t est = std::llround(static_cast<double>(amb.cents()) * spec.ambulance_copay_rate);
    r.recorded_copay_total = spec.copay + Money::from_cents(copay_error ? est / 2 : est);
    const bool non_phc = std::any_of(r.cost_items.begin(), r.cost_items.end(), [](const CostItem& c) { return c.is_non_phc; });
    p.cost_bearing = p.approved && p.unit >= 0 && !non_phc;
  }

  // --- months (periodic mode) ---------------------------------------------
  if (!spec.stationary) {
    std::vector<double> weights(12);
    for (int m = 0; m < 12; ++m) weights[m] = spec.seasonality[m / 3];
    std::vector<int> seen(n, 0);
    for (std::size_t v = 0; v < protos.size(); ++v) {
      Proto& p = protos[v];
      if (p.approved && p.unit >= 0 && seen[p.unit] < 12) {
        p.month_of_year = 1 + seen[p.unit]++;  // every unit is active in every month
        continue;
      }
      Philox rng(spec.seed, stream_id(kMonthStream, static_cast<std::uint32_t>(v)));
      p.month_of_year = 1 + static_cast<int>(rng.pick(weights));
    }
    for (int i = 0; i < n; ++i)
      if (seen[i] < 12)
        throw CapitaError(ErrorKind::InfeasibleSpec, facilities[hc_facility[i]].facility_id +
                                                         " has fewer than 12 approved visits per year; raise min_members");
  }

  // --- costs ---------------------------------------------------------------
  std::vector<std::vector<std::size_t>> bearing(n);
  for (std::size_t v = 0; v < protos.size(); ++v)
    if (protos[v].cost_bearing) bearing[protos[v].unit].push_back(v);
  std::vector<std::int64_t> visit_target(protos.size(), 0);
  for (int i = 0; i < n; ++i) {
    const auto& list = bearing[i];
    if (list.empty())
      throw CapitaError(ErrorKind::InfeasibleSpec, facilities[hc_facility[i]].facility_id + " has no cost-bearing visits");
    const std::int64_t block_cents = std::llround(target[i] * 100.0 * block_months / 12.0);
    const auto count = static_cast<std::int64_t>(list.size());
    if (spec.cost_noise_sd == 0) {
      const std::int64_t base = block_cents / count;
      std::int64_t rem = block_cents - base * count;
      for (std::size_t k = 0; k < list.size(); ++k) visit_target[list[k]] = base + (rem-- > 0 ? 1 : 0);
    } else {
      const double mean = static_cast<double>(block_cents) / static_cast<double>(count);
      for (std::size_t v : list) {
        Philox rng(spec.seed, stream_id(kCostStream, static_cast<std::uint32_t>(v)));
        visit_target[v] = std::max<std::int64_t>(0, std::llround(mean * (1.0 + spec.cost_noise_sd * quantize(rng.normal()))));
      }
    }
  }
  for (std::size_t v = 0; v < protos.size(); ++v) {
    Proto& p = protos[v];
    if (p.cost_bearing) continue;
    const double cpv = p.unit >= 0 ? expected_cpv[p.unit] : private_cpv[p.facility];
    double noise = 1.0;
    if (spec.cost_noise_sd > 0) {
      Philox rng(spec.seed, stream_id(kCostStream, static_cast<std::uint32_t>(v)));
      noise = std::max(0.0, 1.0 + spec.cost_noise_sd * quantize(rng.normal()));
    }
    visit_target[v] = std::llround(cpv * 100.0 * noise);
  }
  // Consultation fee closes each visit to its target net cost; when the fixed
  // items alone exceed the target, the co-payment absorbs the difference.
  for (std::size_t v = 0; v < protos.size(); ++v) {
    VisitRecord& r = protos[v].rec;
    Money fixed, amb;
    for (const auto& c : r.cost_items) (c.kind == CostKind::Ambulance ? amb : fixed) += c.total();
    const std::int64_t est = std::llround(static_cast<double>(amb.cents()) * spec.ambulance_copay_rate);
    const std::int64_t share = std::min(r.recorded_copay_total.cents(), est);
    const std::int64_t deducted = r.recorded_copay_total.cents() - share;
    std::int64_t consult = visit_target[v] + deducted - fixed.cents();
    if (consult < 0) {
      r.recorded_copay_total = Money::from_cents(fixed.cents() - visit_target[v] + est);
      consult = 0;
    }
    CostItem c;
    c.kind = CostKind::Service;
    c.item_code = facilities[protos[v].facility].kind == FacilityKind::HealthCenter ? kConsultHc : kConsultPost;
    c.unit_cost = Money::from_cents(consult);
    r.cost_items.insert(r.cost_items.begin(), c);
  }

  // --- emission ------------------------------------------------------------
  std::int64_t seq = 0;
  for (Month m = first; m <= last; m = m.plus(1)) {
    const int dim = days_in_month(m.year, m.month);
    for (const Proto& p : protos) {
      if (!spec.stationary && p.month_of_year != m.month) continue;
      VisitRecord r = p.rec;
      char id[24];
      std::snprintf(id, sizeof id, "V%09lld", static_cast<long long>(++seq));
      r.visit_id = id;
      const int day = 1 + std::min(dim - 1, static_cast<int>(p.day * dim));
      r.visit_date = Date{m.year, m.month, day};
      if (r.admitted) {
        r.admission_date = r.visit_date;
        r.discharge_date = Date::from_serial(r.visit_date.serial() + p.stay_days);
      }
      bundle.visits.push_back(std::move(r));
    }
  }

  std::sort(facilities.begin(), facilities.end(),
            [](const FacilityRecord& a, const FacilityRecord& b) { return a.facility_id < b.facility_id; });
  bundle.facilities = std::move(facilities);

  for (const auto& v : bundle.visits)
    for (const auto& c : v.cost_items)
      bundle.code_map.emplace(c.item_code, CodeFlags{c.is_antibiotic, c.is_antihistamine, c.is_non_phc});
  for (const auto& prod : catalog) bundle.code_map.emplace(prod.code, CodeFlags{true, false, false});
  return out;
}

}  // namespace capita
