#pragma once

#include "mtc/sim.hpp"

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace mtc::rainbow {

/// Evenly spaced return atoms z_0..z_{n-1} on [v_min, v_max].
struct Support {
    double v_min = -20.0;
    double v_max = 20.0;
    std::size_t atoms = 51;

    double delta() const { return (v_max - v_min) / static_cast<double>(atoms - 1); }
    double atom(std::size_t i) const { return v_min + static_cast<double>(i) * delta(); }
    void validate() const;
};

/// Expected value of a categorical distribution over the support.
double expected_value(std::span<const double> probs, const Support& support);

/// Projects the distribution of r + (1 - done) * gamma * Z back onto the
/// support: each shifted atom is clamped to [v_min, v_max] and its mass is
/// split linearly between the two neighbouring atoms.
std::vector<double> categorical_projection(std::span<const double> next_probs, double reward, bool done,
                                           double gamma, const Support& support);

/// Greedy choice over per-action values (index 0 = Go, 1 = Stop). Ties go to Stop.
Action greedy_action(std::span<const double> q);

/// With probability epsilon a uniform action, else greedy_action(q).
Action epsilon_greedy(std::span<const double> q, double epsilon, std::mt19937_64& rng);

}  // namespace mtc::rainbow
