#pragma once

#include <Eigen/Dense>
#include <vector>

namespace rankscope {

/// Minimum-cost assignment of every row of `cost` (rows <= cols) to a distinct
/// column. Returns the chosen column per row.
std::vector<int> solve_assignment(const Eigen::Ref<const Eigen::MatrixXd>& cost);

}  // namespace rankscope
