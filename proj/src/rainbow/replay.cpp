#include "mtc/rainbow/replay.hpp"

#include "mtc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mtc::rainbow {

namespace {

std::size_t leaf_base(std::size_t capacity) {
    std::size_t base = 1;
    while (base < capacity) base <<= 1;
    return base;
}

}  // namespace

SumTree::SumTree(std::size_t capacity) : capacity_(capacity), base_(leaf_base(capacity)), nodes_(2 * base_, 0.0) {
    if (capacity == 0) throw ConfigError("replay capacity must be > 0");
}

void SumTree::set(std::size_t leaf, double value) {
    if (leaf >= capacity_) throw ContractViolation("sum tree leaf out of range");
    std::size_t i = base_ + leaf;
    nodes_[i] = value;
    for (i >>= 1; i >= 1; i >>= 1) nodes_[i] = nodes_[2 * i] + nodes_[2 * i + 1];
}

std::size_t SumTree::find(double prefix) const {
    std::size_t i = 1;
    while (i < base_) {
        const double left = nodes_[2 * i];
        if (prefix < left || nodes_[2 * i + 1] <= 0.0) {
            i = 2 * i;
        } else {
            prefix -= left;
            i = 2 * i + 1;
        }
    }
    return std::min(i - base_, capacity_ - 1);
}

PrioritizedReplay::PrioritizedReplay(std::size_t capacity, double alpha)
    : capacity_(capacity), alpha_(alpha), tree_(capacity), max_base_(leaf_base(capacity)) {
    if (!(alpha >= 0.0)) throw ConfigError("replay alpha must be >= 0");
    max_nodes_.assign(2 * max_base_, 0.0);
    storage_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

double PrioritizedReplay::max_priority() const {
    return storage_.empty() ? 1.0 : max_nodes_[1];
}

void PrioritizedReplay::push(Transition t) {
    const double p = max_priority();
    const std::size_t slot = next_;
    if (storage_.size() < capacity_) {
        storage_.push_back(std::move(t));
        priorities_.push_back(p);
    } else {
        storage_[slot] = std::move(t);
        priorities_[slot] = p;
    }
    next_ = (next_ + 1) % capacity_;
    const std::size_t idx[] = {slot};
    const double pr[] = {p};
    update(idx, pr);
}

void PrioritizedReplay::update(std::span<const std::size_t> indices, std::span<const double> priorities) {
    if (indices.size() != priorities.size()) throw ContractViolation("replay update: size mismatch");
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t i = indices[k];
        const double p = priorities[k];
        if (i >= storage_.size()) throw ContractViolation("replay update: index " + std::to_string(i) + " out of range");
        if (!std::isfinite(p) || p <= 0.0) throw NumericalError("replay update: invalid priority");
        priorities_[i] = p;
        tree_.set(i, std::pow(p, alpha_));
        std::size_t n = max_base_ + i;
        max_nodes_[n] = p;
        for (n >>= 1; n >= 1; n >>= 1) max_nodes_[n] = std::max(max_nodes_[2 * n], max_nodes_[2 * n + 1]);
    }
}

double PrioritizedReplay::probability(std::size_t index) const {
    return tree_.get(index) / tree_.total();
}

PrioritizedReplay::Sample PrioritizedReplay::sample(std::size_t batch, double eta, std::mt19937_64& rng) const {
    if (storage_.size() < batch || batch == 0) {
        throw NotReadyError("replay holds " + std::to_string(storage_.size()) + " transitions, batch needs " +
                            std::to_string(batch));
    }
    Sample s;
    s.indices.reserve(batch);
    s.is_weights.reserve(batch);
    const double total = tree_.total();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double n = static_cast<double>(storage_.size());
    double max_w = 0.0;
    for (std::size_t k = 0; k < batch; ++k) {
        const std::size_t i = std::min(tree_.find(unit(rng) * total), storage_.size() - 1);
        const double w = std::pow(n * tree_.get(i) / total, -eta);
        s.indices.push_back(i);
        s.is_weights.push_back(w);
        max_w = std::max(max_w, w);
    }
    for (double& w : s.is_weights) w /= max_w;
    return s;
}

}  // namespace mtc::rainbow
