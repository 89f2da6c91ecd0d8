#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "c2g/types.hpp"

namespace c2g {

/// Per-treated-sample response-effect intervals plus their population
/// summaries. `indices` are dataset rows of the treated samples.
struct EstimandReport {
  IndexList indices;
  Eigen::VectorXd care_lo;
  Eigen::VectorXd care_hi;
  Eigen::VectorXd pi;           // prior responder probability used per sample
  std::vector<bool> unbounded;  // no responder mass detected at this sample
  double are_lo = 0.0;
  double are_hi = 0.0;
  double erpf = 0.0;
  Index unbounded_count = 0;
};

/// Population averages over the samples where `mask[k]` is true (all when
/// the mask is absent). Unbounded samples are left out of the ARE average
/// but still count toward ERPF. Throws ValidationError on an empty subgroup.
void summarize(EstimandReport& report, const std::optional<std::vector<bool>>& mask = std::nullopt);

/// Copy of `report` whose summaries are restricted to a subgroup.
EstimandReport restrict_to(const EstimandReport& report, const std::vector<bool>& mask);

}  // namespace c2g
