#include "c2g/estimands.hpp"

#include <limits>

#include "c2g/error.hpp"

namespace c2g {

void summarize(EstimandReport& report, const std::optional<std::vector<bool>>& mask) {
  const Index m = report.care_lo.size();
  if (mask && static_cast<Index>(mask->size()) != m) {
    throw ValidationError("subgroup mask has " + std::to_string(mask->size()) +
                          " entries for " + std::to_string(m) + " treated samples");
  }
  double lo = 0.0;
  double hi = 0.0;
  double pi = 0.0;
  Index members = 0;
  Index bounded = 0;
  Index unbounded = 0;
  for (Index k = 0; k < m; ++k) {
    if (mask && !(*mask)[static_cast<std::size_t>(k)]) continue;
    ++members;
    pi += report.pi[k];
    if (!report.unbounded.empty() && report.unbounded[static_cast<std::size_t>(k)]) {
      ++unbounded;
      continue;
    }
    lo += report.care_lo[k];
    hi += report.care_hi[k];
    ++bounded;
  }
  if (members == 0) throw ValidationError("estimands: empty subgroup");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  report.erpf = pi / static_cast<double>(members);
  report.are_lo = bounded > 0 ? lo / static_cast<double>(bounded) : nan;
  report.are_hi = bounded > 0 ? hi / static_cast<double>(bounded) : nan;
  report.unbounded_count = unbounded;
}

EstimandReport restrict_to(const EstimandReport& report, const std::vector<bool>& mask) {
  EstimandReport out = report;
  summarize(out, mask);
  return out;
}

}  // namespace c2g
