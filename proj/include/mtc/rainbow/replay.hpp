#pragma once

#include "mtc/sim.hpp"

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace mtc::rainbow {

struct Transition {
    std::vector<float> observation;
    Action action = Action::Stop;
    double reward = 0.0;
    std::vector<float> next_observation;
    bool done = false;
};

/// Binary tree over `capacity` leaves where each parent holds the sum of its children.
class SumTree {
public:
    explicit SumTree(std::size_t capacity);

    void set(std::size_t leaf, double value);
    double get(std::size_t leaf) const { return nodes_[base_ + leaf]; }
    double total() const { return nodes_[1]; }
    /// Leaf whose cumulative range contains `prefix` in [0, total()).
    std::size_t find(double prefix) const;
    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    std::size_t base_;
    std::vector<double> nodes_;
};

/// Proportional prioritized replay. Sampling probability is p_i^alpha / sum_k p_k^alpha;
/// importance weights are (N * P(i))^-eta normalised by the batch maximum.
class PrioritizedReplay {
public:
    PrioritizedReplay(std::size_t capacity, double alpha);

    /// Stores with the highest priority currently held (1 when empty),
    /// overwriting the oldest entry once full.
    void push(Transition t);

    struct Sample {
        std::vector<std::size_t> indices;
        std::vector<double> is_weights;
    };

    /// `batch` independent draws (with replacement). Throws NotReadyError while size() < batch.
    Sample sample(std::size_t batch, double eta, std::mt19937_64& rng) const;

    /// Priorities must be finite and > 0.
    void update(std::span<const std::size_t> indices, std::span<const double> priorities);

    const Transition& at(std::size_t index) const { return storage_.at(index); }
    double priority(std::size_t index) const { return priorities_.at(index); }
    double probability(std::size_t index) const;
    double max_priority() const;
    std::size_t size() const { return storage_.size(); }
    std::size_t capacity() const { return capacity_; }
    double alpha() const { return alpha_; }

private:
    std::size_t capacity_;
    double alpha_;
    std::size_t next_ = 0;
    std::vector<Transition> storage_;
    std::vector<double> priorities_;
    SumTree tree_;
    std::vector<double> max_nodes_;  // max-tree over raw priorities, same layout as the sum tree
    std::size_t max_base_;
};

}  // namespace mtc::rainbow
