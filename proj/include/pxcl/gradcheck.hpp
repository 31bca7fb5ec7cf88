#pragma once

#include <functional>
#include <span>

#include "pxcl/optim.hpp"
#include "pxcl/rng.hpp"

namespace pxcl {

// Compares the analytic gradients already stored in params[i]->grad against
// central finite differences of loss_fn at probe_count randomly chosen
// coordinates. loss_fn must recompute the scalar loss from the params'
// current values. Returns max |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double gradient_check(const std::function<double()>& loss_fn, std::span<ParamState* const> params,
                      int probe_count, Rng& rng, double step = 1e-4);

}  // namespace pxcl
