#include "capita/validate.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace capita {

ValidationReport validate_dataset(std::span<const FacilityRecord> facilities,
                                  std::span<const MemberRecord> members,
                                  std::span<const VisitRecord> visits) {
  ValidationReport report;
  auto add = [&](std::string code, const std::string& record, std::string detail = {}) {
    report.findings.push_back(Finding{std::move(code), record, std::move(detail)});
  };

  std::unordered_map<std::string, const FacilityRecord*> by_id;
  std::unordered_set<std::string> catchments;
  for (const auto& f : facilities) {
    if (!by_id.emplace(f.facility_id, &f).second) add("DuplicateFacilityId", f.facility_id);
    if (f.kind == FacilityKind::HealthCenter && f.catchment_id) catchments.insert(*f.catchment_id);
  }

  for (const auto& f : facilities) {
    if (f.last_active_month < f.first_active_month)
      add("ActiveRangeOrder", f.facility_id, f.first_active_month.to_string() + ">" + f.last_active_month.to_string());
    if (f.medicalized && f.kind != FacilityKind::HealthCenter) add("MedicalizedNotHealthCenter", f.facility_id);
    if (f.kind == FacilityKind::HealthCenter && (!f.catchment_id || f.catchment_id->empty()))
      add("MissingCatchment", f.facility_id);
    if (f.kind == FacilityKind::PublicHealthPost) {
      if (!f.parent_hc_id || f.parent_hc_id->empty()) {
        add("MissingParent", f.facility_id);
      } else {
        auto it = by_id.find(*f.parent_hc_id);
        if (it == by_id.end())
          add("DanglingParentKey", f.facility_id, *f.parent_hc_id);
        else if (it->second->kind != FacilityKind::HealthCenter)
          add("ParentNotHealthCenter", f.facility_id, *f.parent_hc_id);
      }
    }
  }

  std::unordered_set<std::string> member_ids;
  for (const auto& m : members) {
    if (!member_ids.insert(m.member_id).second) add("DuplicateMemberId", m.member_id);
    if (!catchments.contains(m.catchment_id)) add("DanglingCatchmentKey", m.member_id, m.catchment_id);
    if (!m.last_updated.valid()) add("InvalidDate", m.member_id, "last_updated");
  }

  std::unordered_set<std::string> visit_ids;
  for (const auto& v : visits) {
    if (!visit_ids.insert(v.visit_id).second) add("DuplicateVisitId", v.visit_id);
    if (!by_id.contains(v.facility_id)) add("DanglingFacilityKey", v.visit_id, v.facility_id);
    if (!member_ids.contains(v.member_id)) add("DanglingMemberKey", v.visit_id, v.member_id);
    if (!v.visit_date.valid()) add("InvalidDate", v.visit_id, "visit_date");
    if (v.patient_age_years < 0) add("NegativeAge", v.visit_id);
    if (v.recorded_copay_total < Money{}) add("NegativeCopay", v.visit_id);
    if (v.admitted && v.admission_date && v.discharge_date && *v.discharge_date < *v.admission_date)
      add("DateOrderViolation", v.visit_id,
          v.admission_date->to_string() + ">" + v.discharge_date->to_string());
    for (const auto& item : v.cost_items) {
      if (item.unit_cost < Money{}) add("NegativeUnitCost", v.visit_id, item.item_code);
      if (item.quantity <= 0) add("NonPositiveQuantity", v.visit_id, item.item_code);
      if (item.is_antibiotic && item.kind != CostKind::Drug) add("AntibioticNotDrug", v.visit_id, item.item_code);
      if (item.is_non_phc && item.kind != CostKind::Service) add("NonPhcNotService", v.visit_id, item.item_code);
    }
  }

  std::sort(report.findings.begin(), report.findings.end());
  return report;
}

}  // namespace capita
