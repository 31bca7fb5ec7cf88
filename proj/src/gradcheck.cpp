#include "pxcl/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace pxcl {

double gradient_check(const std::function<double()>& loss_fn, std::span<ParamState* const> params,
                      int probe_count, Rng& rng, double step) {
    if (params.empty()) throw std::invalid_argument("gradient_check: no parameters");
    if (probe_count <= 0) throw std::invalid_argument("gradient_check: probe_count must be positive");

    std::size_t total = 0;
    for (const ParamState* p : params) total += p->value.size();

    double max_rel_error = 0.0;
    for (int probe = 0; probe < probe_count; ++probe) {
        std::size_t pick = static_cast<std::size_t>(rng.below(total));
        ParamState* param = nullptr;
        for (ParamState* p : params) {
            if (pick < p->value.size()) {
                param = p;
                break;
            }
            pick -= p->value.size();
        }

        const double saved = param->value[pick];
        param->value[pick] = saved + step;
        const double loss_plus = loss_fn();
        param->value[pick] = saved - step;
        const double loss_minus = loss_fn();
        param->value[pick] = saved;

        const double numeric = (loss_plus - loss_minus) / (2.0 * step);
        const double analytic = param->grad[pick];
        const double rel =
            std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
        max_rel_error = std::max(max_rel_error, rel);
    }
    return max_rel_error;
}

}  // namespace pxcl
