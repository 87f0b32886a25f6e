#pragma once

#include "mtc/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace mtc::rainbow {

/// Flat parameter or gradient storage. Aligned to Eigen's packet size so that
/// vectorized kernels take the same code path on every run.
template <typename T>
using ParamVector = std::vector<T, Eigen::aligned_allocator<T>>;

struct LayerShape {
    std::string name;
    std::size_t rows = 0;  // output features
    std::size_t cols = 0;  // input features; 1 for a bias
};

struct NetShape {
    std::size_t input_dim = 12;
    std::vector<std::size_t> hidden{512, 512, 512};
    std::size_t num_actions = 2;
    std::size_t num_atoms = 51;

    /// Parameter blocks in storage order: trunk{i}.weight, trunk{i}.bias, ...,
    /// value.weight, value.bias, advantage.weight, advantage.bias.
    std::vector<LayerShape> layers() const {
        std::vector<LayerShape> out;
        std::size_t in = input_dim;
        for (std::size_t i = 0; i < hidden.size(); ++i) {
            out.push_back({"trunk" + std::to_string(i) + ".weight", hidden[i], in});
            out.push_back({"trunk" + std::to_string(i) + ".bias", hidden[i], 1});
            in = hidden[i];
        }
        out.push_back({"value.weight", num_atoms, in});
        out.push_back({"value.bias", num_atoms, 1});
        out.push_back({"advantage.weight", num_actions * num_atoms, in});
        out.push_back({"advantage.bias", num_actions * num_atoms, 1});
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const LayerShape& l : layers()) n += l.rows * l.cols;
        return n;
    }

    bool operator==(const NetShape&) const = default;
};

/// Dueling categorical Q-network. A ReLU trunk feeds a value stream V(s, z)
/// and an advantage stream A(s, a, z); logits are V + A - mean_a A per atom,
/// followed by a softmax over atoms for each action. Parameters live in one
/// flat vector so optimizers and checkpoints can treat them uniformly.
///
/// Batches are column-major: one sample per column. The output has
/// num_actions * num_atoms rows, action a occupying rows [a*atoms, (a+1)*atoms).
template <typename T>
class DuelingNetwork {
public:
    using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

    struct Cache {
        std::vector<Matrix> activations;  // input, then each trunk output
        Matrix probs;
    };

    explicit DuelingNetwork(NetShape shape) : shape_(std::move(shape)) {
        if (shape_.input_dim == 0 || shape_.num_actions < 2 || shape_.num_atoms < 2) {
            throw ConfigError("network: invalid shape");
        }
        for (std::size_t h : shape_.hidden) {
            if (h == 0) throw ConfigError("network: hidden layer of width 0");
        }
        layers_ = shape_.layers();
        std::size_t offset = 0;
        for (const LayerShape& l : layers_) {
            offsets_.push_back(offset);
            offset += l.rows * l.cols;
        }
        params_.assign(offset, T(0));
    }

    /// Trunk weights uniform in +-1/sqrt(fan_in), biases zero, both heads zero.
    /// Zero heads make every initial distribution uniform, so initial Q-values tie.
    void initialize(std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::fill(params_.begin(), params_.end(), T(0));
        for (std::size_t i = 0; i < shape_.hidden.size(); ++i) {
            const LayerShape& w = layers_[2 * i];
            const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols));
            std::uniform_real_distribution<double> dist(-bound, bound);
            T* p = params_.data() + offsets_[2 * i];
            for (std::size_t k = 0; k < w.rows * w.cols; ++k) p[k] = static_cast<T>(dist(rng));
        }
    }

    const NetShape& shape() const { return shape_; }
    ParamVector<T>& parameters() { return params_; }
    const ParamVector<T>& parameters() const { return params_; }
    std::size_t parameter_count() const { return params_.size(); }

    Matrix forward(const Matrix& input, Cache* cache = nullptr) const {
        if (static_cast<std::size_t>(input.rows()) != shape_.input_dim) {
            throw ContractViolation("network: input has " + std::to_string(input.rows()) + " rows, expected " +
                                    std::to_string(shape_.input_dim));
        }
        if (cache) {
            cache->activations.clear();
            cache->activations.push_back(input);
        }
        Matrix h = input;
        for (std::size_t i = 0; i < shape_.hidden.size(); ++i) {
            Matrix z = weight(2 * i) * h;
            z.colwise() += bias(2 * i + 1);
            check_finite(z, i);
            h = z.cwiseMax(T(0));
            if (cache) cache->activations.push_back(h);
        }
        const std::size_t value_layer = 2 * shape_.hidden.size();
        Matrix value = weight(value_layer) * h;
        value.colwise() += bias(value_layer + 1);
        Matrix adv = weight(value_layer + 2) * h;
        adv.colwise() += bias(value_layer + 3);

        const auto atoms = static_cast<Eigen::Index>(shape_.num_atoms);
        const auto actions = static_cast<Eigen::Index>(shape_.num_actions);
        Matrix mean = Matrix::Zero(atoms, h.cols());
        for (Eigen::Index a = 0; a < actions; ++a) mean += adv.middleRows(a * atoms, atoms);
        mean /= static_cast<T>(actions);

        Matrix probs(actions * atoms, h.cols());
        for (Eigen::Index a = 0; a < actions; ++a) {
            Matrix logits = value + adv.middleRows(a * atoms, atoms) - mean;
            check_finite(logits, shape_.hidden.size());
            const auto max = logits.colwise().maxCoeff();
            for (Eigen::Index c = 0; c < logits.cols(); ++c) {
                logits.col(c) = (logits.col(c).array() - max(c)).exp().matrix();
                logits.col(c) /= logits.col(c).sum();
            }
            probs.middleRows(a * atoms, atoms) = logits;
        }
        if (cache) cache->probs = probs;
        return probs;
    }

    /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logits).
    void backward(const Cache& cache, const Matrix& grad_logits, ParamVector<T>& grad) const {
        if (grad.size() != params_.size()) grad.assign(params_.size(), T(0));
        const auto atoms = static_cast<Eigen::Index>(shape_.num_atoms);
        const auto actions = static_cast<Eigen::Index>(shape_.num_actions);
        const Eigen::Index batch = grad_logits.cols();

        Matrix d_value = Matrix::Zero(atoms, batch);
        for (Eigen::Index a = 0; a < actions; ++a) d_value += grad_logits.middleRows(a * atoms, atoms);
        Matrix d_adv(actions * atoms, batch);
        for (Eigen::Index a = 0; a < actions; ++a) {
            d_adv.middleRows(a * atoms, atoms) =
                grad_logits.middleRows(a * atoms, atoms) - d_value / static_cast<T>(actions);
        }

        const std::size_t value_layer = 2 * shape_.hidden.size();
        const Matrix& h = cache.activations.back();
        grad_weight(grad, value_layer) += d_value * h.transpose();
        grad_bias(grad, value_layer + 1) += d_value.rowwise().sum();
        grad_weight(grad, value_layer + 2) += d_adv * h.transpose();
        grad_bias(grad, value_layer + 3) += d_adv.rowwise().sum();

        Matrix dh = weight(value_layer).transpose() * d_value + weight(value_layer + 2).transpose() * d_adv;
        for (std::size_t i = shape_.hidden.size(); i-- > 0;) {
            const Matrix& out = cache.activations[i + 1];
            const Matrix& in = cache.activations[i];
            Matrix dz = dh.cwiseProduct((out.array() > T(0)).template cast<T>().matrix());
            grad_weight(grad, 2 * i) += dz * in.transpose();
            grad_bias(grad, 2 * i + 1) += dz.rowwise().sum();
            if (i > 0) dh = weight(2 * i).transpose() * dz;
        }
    }

    /// Row-major (action, atom) probabilities of one column as doubles.
    std::vector<double> column_probs(const Matrix& probs, Eigen::Index col) const {
        std::vector<double> out(static_cast<std::size_t>(probs.rows()));
        for (Eigen::Index r = 0; r < probs.rows(); ++r) out[static_cast<std::size_t>(r)] = probs(r, col);
        return out;
    }

private:
    using ConstMap = Eigen::Map<const Matrix>;
    using MutMap = Eigen::Map<Matrix>;
    using ConstVecMap = Eigen::Map<const Vector>;
    using MutVecMap = Eigen::Map<Vector>;

    ConstMap weight(std::size_t layer) const {
        const auto [rows, cols] = dims(layer);
        return ConstMap(params_.data() + offsets_[layer], rows, cols);
    }
    ConstVecMap bias(std::size_t layer) const {
        return ConstVecMap(params_.data() + offsets_[layer], dims(layer).first);
    }
    MutMap grad_weight(ParamVector<T>& grad, std::size_t layer) const {
        const auto [rows, cols] = dims(layer);
        return MutMap(grad.data() + offsets_[layer], rows, cols);
    }
    MutVecMap grad_bias(ParamVector<T>& grad, std::size_t layer) const {
        return MutVecMap(grad.data() + offsets_[layer], dims(layer).first);
    }
    std::pair<Eigen::Index, Eigen::Index> dims(std::size_t layer) const {
        return {static_cast<Eigen::Index>(layers_[layer].rows), static_cast<Eigen::Index>(layers_[layer].cols)};
    }
    static void check_finite(const Matrix& m, std::size_t layer) {
        if (!m.allFinite()) throw NumericalError("non-finite activation in layer " + std::to_string(layer));
    }

    NetShape shape_;
    std::vector<LayerShape> layers_;
    std::vector<std::size_t> offsets_;
    ParamVector<T> params_;
};

}  // namespace mtc::rainbow
