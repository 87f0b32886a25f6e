#pragma once

#include "mtc/rainbow/categorical.hpp"
#include "mtc/rainbow/network.hpp"
#include "mtc/rainbow/replay.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace mtc::rainbow {

/// Q(s, a) = sum_i z_i p_i(s, a) for every action of one batch column.
template <typename T>
std::vector<double> q_values(const typename DuelingNetwork<T>::Matrix& probs, Eigen::Index col, const Support& support) {
    const auto atoms = static_cast<Eigen::Index>(support.atoms);
    const Eigen::Index actions = probs.rows() / atoms;
    std::vector<double> q(static_cast<std::size_t>(actions), 0.0);
    for (Eigen::Index a = 0; a < actions; ++a) {
        double sum = 0.0;
        for (Eigen::Index i = 0; i < atoms; ++i) sum += support.atom(static_cast<std::size_t>(i)) * probs(a * atoms + i, col);
        q[static_cast<std::size_t>(a)] = sum;
    }
    return q;
}

/// Stacks observations into a (dim x n) matrix, one sample per column.
template <typename T>
typename DuelingNetwork<T>::Matrix stack_columns(const std::vector<const std::vector<float>*>& rows, std::size_t dim) {
    typename DuelingNetwork<T>::Matrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t c = 0; c < rows.size(); ++c) {
        if (rows[c]->size() != dim) throw ContractViolation("observation has wrong size");
        for (std::size_t r = 0; r < dim; ++r) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = (*rows[c])[r];
    }
    return m;
}

/// Projected double-Q target distribution for each sample: the online network
/// picks a* = argmax_a Q_online(s', a) (ties to Stop), the target network
/// supplies p(s', a*), projected through r + gamma * z.
template <typename T>
std::vector<std::vector<double>> double_dqn_targets(const DuelingNetwork<T>& online, const DuelingNetwork<T>& target,
                                                    const std::vector<const Transition*>& batch, double gamma,
                                                    const Support& support) {
    std::vector<const std::vector<float>*> next;
    for (const Transition* t : batch) next.push_back(&t->next_observation);
    const auto input = stack_columns<T>(next, online.shape().input_dim);
    const auto p_online = online.forward(input);
    const auto p_target = target.forward(input);
    const auto atoms = static_cast<Eigen::Index>(support.atoms);
    std::vector<std::vector<double>> out;
    out.reserve(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto col = static_cast<Eigen::Index>(b);
        const auto q = q_values<T>(p_online, col, support);
        const auto a_star = static_cast<Eigen::Index>(greedy_action(q));
        std::vector<double> next_probs(support.atoms);
        for (Eigen::Index i = 0; i < atoms; ++i) next_probs[static_cast<std::size_t>(i)] = p_target(a_star * atoms + i, col);
        out.push_back(categorical_projection(next_probs, batch[b]->reward, batch[b]->done, gamma, support));
    }
    return out;
}

template <typename T>
struct LossResult {
    double loss = 0.0;                // importance-weighted mean cross-entropy
    std::vector<double> priorities;   // per-sample cross-entropy + 1e-6
    ParamVector<T> grad;              // d(loss)/d(params) of the online network
};

/// Cross-entropy between projected targets and the online distribution of the
/// taken action, weighted by `is_weights` and averaged over the batch.
template <typename T>
LossResult<T> loss_and_gradient(const DuelingNetwork<T>& online, const DuelingNetwork<T>& target,
                                const std::vector<const Transition*>& batch, std::span<const double> is_weights,
                                double gamma, const Support& support) {
    if (batch.empty() || is_weights.size() != batch.size()) throw ContractViolation("loss: batch/weight mismatch");
    const auto targets = double_dqn_targets(online, target, batch, gamma, support);

    std::vector<const std::vector<float>*> obs;
    for (const Transition* t : batch) obs.push_back(&t->observation);
    typename DuelingNetwork<T>::Cache cache;
    const auto probs = online.forward(stack_columns<T>(obs, online.shape().input_dim), &cache);

    const auto atoms = static_cast<Eigen::Index>(support.atoms);
    const auto n = static_cast<double>(batch.size());
    typename DuelingNetwork<T>::Matrix grad_logits =
        DuelingNetwork<T>::Matrix::Zero(probs.rows(), static_cast<Eigen::Index>(batch.size()));
    LossResult<T> result;
    result.priorities.reserve(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto col = static_cast<Eigen::Index>(b);
        const auto a = static_cast<Eigen::Index>(batch[b]->action);
        double ce = 0.0;
        for (Eigen::Index i = 0; i < atoms; ++i) {
            const double m = targets[b][static_cast<std::size_t>(i)];
            const double p = probs(a * atoms + i, col);
            if (m > 0.0) ce -= m * std::log(std::max(p, 1e-12));
            grad_logits(a * atoms + i, col) = static_cast<T>(is_weights[b] / n * (p - m));
        }
        result.loss += is_weights[b] * ce / n;
        result.priorities.push_back(ce + 1e-6);
    }
    if (!std::isfinite(result.loss)) throw NumericalError("non-finite loss");
    result.grad.assign(online.parameter_count(), T(0));
    online.backward(cache, grad_logits, result.grad);
    return result;
}

}  // namespace mtc::rainbow
