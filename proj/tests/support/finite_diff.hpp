#pragma once

#include <functional>
#include <vector>

#include "braingnn/matrix.hpp"

namespace braingnn::testing {

struct FdCheck {
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

/// Central difference on one parameter entry. `eval` recomputes the scalar
/// objective from the parameters' current values; the entry is restored
/// before returning. rel_err = |analytic - numeric| / max(|analytic|,
/// |numeric|, floor), so near-zero gradients compare absolutely at `floor`.
FdCheck probe_entry(Matrix& param, std::size_t flat_index,
                    const std::function<double()>& eval, double analytic, double eps = 1e-5,
                    double floor = 1e-6);

/// Worst guarded relative error over every entry of every parameter.
/// `analytic[i]` must match `params[i]`'s shape.
double max_rel_err(const std::vector<Matrix*>& params,
                   const std::vector<Matrix>& analytic, const std::function<double()>& eval,
                   double eps = 1e-5, double floor = 1e-6);

}  // namespace braingnn::testing
