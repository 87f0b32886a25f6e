#include "mtc/rainbow/categorical.hpp"

#include "mtc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mtc::rainbow {

void Support::validate() const {
    if (!(v_min < v_max)) throw ConfigError("train: v_min must be < v_max");
    if (atoms < 2) throw ConfigError("train: need at least 2 atoms");
}

double expected_value(std::span<const double> probs, const Support& support) {
    double q = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) q += support.atom(i) * probs[i];
    return q;
}

std::vector<double> categorical_projection(std::span<const double> next_probs, double reward, bool done,
                                           double gamma, const Support& support) {
    const std::size_t n = support.atoms;
    std::vector<double> out(n, 0.0);
    const double dz = support.delta();
    const double discount = done ? 0.0 : gamma;
    for (std::size_t j = 0; j < n; ++j) {
        const double tz = std::clamp(reward + discount * support.atom(j), support.v_min, support.v_max);
        const double b = std::clamp((tz - support.v_min) / dz, 0.0, static_cast<double>(n - 1));
        const auto lower = static_cast<std::size_t>(std::floor(b));
        const auto upper = std::min(lower + 1, n - 1);
        const double frac = b - static_cast<double>(lower);
        if (upper == lower || frac == 0.0) {
            out[lower] += next_probs[j];
        } else {
            out[lower] += next_probs[j] * (1.0 - frac);
            out[upper] += next_probs[j] * frac;
        }
    }
    return out;
}

Action greedy_action(std::span<const double> q) {
    return q[0] > q[1] ? Action::Go : Action::Stop;
}

Action epsilon_greedy(std::span<const double> q, double epsilon, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (unit(rng) < epsilon) return unit(rng) < 0.5 ? Action::Go : Action::Stop;
    return greedy_action(q);
}

}  // namespace mtc::rainbow
