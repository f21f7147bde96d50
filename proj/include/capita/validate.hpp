#pragma once

#include <span>

#include "capita/domain.hpp"

namespace capita {

struct ValidationReport {
  Findings findings;  // sorted, so permuted inputs give identical reports
  bool clean() const { return findings.empty(); }
};

/// Checks every record invariant and every cross-record key. Never mutates input.
///
/// Finding codes: DanglingFacilityKey, DanglingMemberKey, DanglingParentKey,
/// DanglingCatchmentKey, DuplicateFacilityId, DuplicateMemberId, DuplicateVisitId,
/// MissingParent, MissingCatchment, ParentNotHealthCenter, MedicalizedNotHealthCenter,
/// ActiveRangeOrder, InvalidDate, DateOrderViolation, NegativeCopay, NegativeUnitCost,
/// NonPositiveQuantity, AntibioticNotDrug, NonPhcNotService, NegativeAge.
ValidationReport validate_dataset(std::span<const FacilityRecord> facilities,
                                  std::span<const MemberRecord> members,
                                  std::span<const VisitRecord> visits);

}  // namespace capita
