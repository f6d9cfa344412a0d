#include "rankscope/hungarian.hpp"

#include <limits>

#include "rankscope/error.hpp"

namespace rankscope {

// Shortest augmenting path with row/column potentials, O(n^2 m).
std::vector<int> solve_assignment(const Eigen::Ref<const Eigen::MatrixXd>& cost) {
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    require(n <= m, ErrorKind::Parameter, "solve_assignment: more rows than columns");
    require(cost.allFinite(), ErrorKind::Input, "solve_assignment: non-finite cost");
    if (n == 0) return {};

    const double inf = std::numeric_limits<double>::infinity();
    // 1-based internals; index 0 is the virtual source.
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
    std::vector<int> owner(m + 1, 0), way(m + 1, 0);

    for (int i = 1; i <= n; ++i) {
        owner[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = owner[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (owner[j0] != 0);
        do {
            const int j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> result(n, -1);
    for (int j = 1; j <= m; ++j)
        if (owner[j] != 0) result[owner[j] - 1] = j - 1;
    return result;
}

}  // namespace rankscope
