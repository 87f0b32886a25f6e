#pragma once

#include "mtc/errors.hpp"
#include "mtc/rainbow/network.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace mtc::rainbow {

struct AdamConfig {
    double learning_rate = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction over a flat parameter vector.
template <typename T>
class Adam {
public:
    Adam(std::size_t size, AdamConfig config) : config_(config), m_(size, 0.0), v_(size, 0.0) {}

    /// Throws NumericalError (leaving params untouched) when any gradient is non-finite.
    void step(ParamVector<T>& params, const ParamVector<T>& grad) {
        if (params.size() != m_.size() || grad.size() != m_.size()) {
            throw ContractViolation("adam: size mismatch");
        }
        for (T g : grad) {
            if (!std::isfinite(static_cast<double>(g))) throw NumericalError("non-finite gradient");
        }
        ++t_;
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = grad[i];
            m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
            v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g * g;
            // Flush before the decay reaches the (very slow) denormal range.
            if (std::abs(m_[i]) < kFlush) m_[i] = 0.0;
            if (v_[i] < kFlush) v_[i] = 0.0;
            const double m_hat = m_[i] / c1;
            const double v_hat = v_[i] / c2;
            params[i] = static_cast<T>(params[i] - config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon));
        }
    }

    std::uint64_t steps() const { return t_; }
    const AdamConfig& config() const { return config_; }
    const std::vector<double>& first_moment() const { return m_; }
    const std::vector<double>& second_moment() const { return v_; }

private:
    static constexpr double kFlush = 1e-30;

    AdamConfig config_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::uint64_t t_ = 0;
};

}  // namespace mtc::rainbow
