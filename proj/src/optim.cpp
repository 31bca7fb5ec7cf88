#include "pxcl/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace pxcl {

ParamState::ParamState(std::string param_name, Tensor init)
    : name(std::move(param_name)),
      value(std::move(init)),
      grad(value.shape),
      moment1(value.shape),
      moment2(value.shape) {}

void adam_step(ParamState& param, const OptimizerConfig& config) {
    if (config.kind != OptimizerKind::Adam)
        throw std::invalid_argument("adam_step: config.kind is not Adam");
    if (config.learning_rate <= 0.0) throw std::invalid_argument("adam_step: learning_rate must be > 0");

    param.step_count += 1;
    const double t = static_cast<double>(param.step_count);
    const double correction1 = 1.0 - std::pow(config.beta1, t);
    const double correction2 = 1.0 - std::pow(config.beta2, t);

    for (std::size_t i = 0; i < param.value.size(); ++i) {
        const double g = param.grad[i];
        param.moment1[i] = config.beta1 * param.moment1[i] + (1.0 - config.beta1) * g;
        param.moment2[i] = config.beta2 * param.moment2[i] + (1.0 - config.beta2) * g * g;
        const double m_hat = param.moment1[i] / correction1;
        const double v_hat = param.moment2[i] / correction2;
        param.value[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
    check_finite(param.value, "adam_step");
}

void sgd_step(ParamState& param, const OptimizerConfig& config) {
    if (config.kind != OptimizerKind::Sgd)
        throw std::invalid_argument("sgd_step: config.kind is not SGD");
    if (config.learning_rate <= 0.0) throw std::invalid_argument("sgd_step: learning_rate must be > 0");
    if (config.sgd_momentum < 0.0 || config.sgd_momentum >= 1.0)
        throw std::invalid_argument("sgd_step: momentum must be in [0,1)");

    param.step_count += 1;
    if (config.sgd_momentum > 0.0) {
        // v <- mu*v + g; value <- value - lr*v
        for (std::size_t i = 0; i < param.value.size(); ++i) {
            param.moment1[i] = config.sgd_momentum * param.moment1[i] + param.grad[i];
            param.value[i] -= config.learning_rate * param.moment1[i];
        }
    } else {
        for (std::size_t i = 0; i < param.value.size(); ++i)
            param.value[i] -= config.learning_rate * param.grad[i];
    }
    check_finite(param.value, "sgd_step");
}

void optimizer_step(ParamState& param, const OptimizerConfig& config) {
    if (config.kind == OptimizerKind::Adam)
        adam_step(param, config);
    else
        sgd_step(param, config);
}

}  // namespace pxcl
