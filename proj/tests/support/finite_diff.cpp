#include "finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace braingnn::testing {

FdCheck probe_entry(Matrix& param, std::size_t flat_index, const std::function<double()>& eval,
                    double analytic, double eps, double floor) {
    if (flat_index >= param.size())
        throw std::out_of_range("probe_entry: flat index out of range");
    const double saved = param.data()[flat_index];
    param.data()[flat_index] = saved + eps;
    const double up = eval();
    param.data()[flat_index] = saved - eps;
    const double down = eval();
    param.data()[flat_index] = saved;
    FdCheck check;
    check.analytic = analytic;
    check.numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(check.analytic), std::abs(check.numeric), floor});
    check.rel_err = std::abs(check.analytic - check.numeric) / denom;
    return check;
}

double max_rel_err(const std::vector<Matrix*>& params, const std::vector<Matrix>& analytic,
                   const std::function<double()>& eval, double eps, double floor) {
    if (params.size() != analytic.size())
        throw std::invalid_argument("max_rel_err: parameter/gradient count mismatch");
    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!params[p]->same_shape(analytic[p]))
            throw std::invalid_argument("max_rel_err: gradient shape mismatch for parameter " +
                                        std::to_string(p));
        for (std::size_t i = 0; i < params[p]->size(); ++i) {
            const FdCheck c =
                probe_entry(*params[p], i, eval, analytic[p].data()[i], eps, floor);
            worst = std::max(worst, c.rel_err);
        }
    }
    return worst;
}

}  // namespace braingnn::testing
