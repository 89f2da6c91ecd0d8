#pragma once

#include <vector>

#include <Eigen/Core>

namespace c2g {

using Index = Eigen::Index;
using IndexList = std::vector<Index>;

}  // namespace c2g
