// Copyright 2026 The nfield Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Fully connected regressor producing one log-depth per superpixel. The
// activation layout follows the fc head of the depth network: ReLU layers,
// one logistic layer, then a linear output unit. Parameters are shared by
// every superpixel, so inputs are processed as columns of one matrix.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "nfield/error.hpp"

namespace nfield {

enum class Activation { relu, logistic, linear };

inline std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::logistic: return "logistic";
        case Activation::linear: return "linear";
    }
    return "?";
}

inline Activation parse_activation(std::string_view s) {
    if (s == "relu") return Activation::relu;
    if (s == "logistic") return Activation::logistic;
    if (s == "linear") return Activation::linear;
    throw ConfigError("unknown activation '" + std::string(s) + "'");
}

struct DenseLayer {
    Eigen::MatrixXd weight;  ///< out x in
    Eigen::VectorXd bias;
    Activation activation = Activation::linear;
    bool dropout = false;
};

/// Per-layer gradients with the same shapes as the model parameters.
struct UnaryGradient {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;

    UnaryGradient& operator+=(const UnaryGradient& o) {
        detail::require_dims(o.weight.size() == weight.size(), "gradient layer count mismatch");
        for (std::size_t l = 0; l < weight.size(); ++l) {
            weight[l] += o.weight[l];
            bias[l] += o.bias[l];
        }
        return *this;
    }

    [[nodiscard]] Eigen::VectorXd flatten() const {
        Eigen::Index total = 0;
        for (std::size_t l = 0; l < weight.size(); ++l) total += weight[l].size() + bias[l].size();
        Eigen::VectorXd out(total);
        Eigen::Index at = 0;
        for (std::size_t l = 0; l < weight.size(); ++l) {
            for (Eigen::Index r = 0; r < weight[l].rows(); ++r)
                for (Eigen::Index c = 0; c < weight[l].cols(); ++c) out[at++] = weight[l](r, c);
            for (Eigen::Index r = 0; r < bias[l].size(); ++r) out[at++] = bias[l][r];
        }
        return out;
    }
};

class UnaryModel {
public:
    UnaryModel() = default;

    /// Takes explicit layers. The last layer must be a single linear unit;
    /// with two or more layers, exactly one logistic layer sits directly
    /// before it. Dropout may only be flagged on the first two layers.
    explicit UnaryModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { check(); }

    /// Widths are {input, hidden..., 1}. Hidden layers are ReLU except the
    /// last hidden one, which is logistic. Weights ~ U(-1/sqrt(fan_in), +1/sqrt(fan_in)),
    /// biases zero. Dropout is flagged on ReLU layers among the first two.
    static UnaryModel init(const std::vector<int>& widths, std::uint64_t seed) {
        if (widths.size() < 2) throw ConfigError("unary widths need at least input and output");
        for (int w : widths)
            if (w <= 0) throw ConfigError("unary layer widths must be positive");
        if (widths.back() != 1) throw ConfigError("unary output width must be 1");
        std::mt19937_64 rng(seed);
        const std::size_t count = widths.size() - 1;
        std::vector<DenseLayer> layers(count);
        for (std::size_t l = 0; l < count; ++l) {
            const int fan_in = widths[l];
            const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
            std::uniform_real_distribution<double> dist(-bound, bound);
            DenseLayer& layer = layers[l];
            layer.weight.resize(widths[l + 1], fan_in);
            for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
                for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = dist(rng);
            layer.bias = Eigen::VectorXd::Zero(widths[l + 1]);
            if (l + 1 == count)
                layer.activation = Activation::linear;
            else if (l + 2 == count)
                layer.activation = Activation::logistic;
            else
                layer.activation = Activation::relu;
            layer.dropout = l < 2 && layer.activation == Activation::relu;
        }
        return UnaryModel(std::move(layers));
    }

    [[nodiscard]] const std::vector<DenseLayer>& layers() const { return layers_; }
    [[nodiscard]] std::size_t layer_count() const { return layers_.size(); }
    [[nodiscard]] Eigen::Index input_width() const { return layers_.empty() ? 0 : layers_.front().weight.cols(); }
    [[nodiscard]] std::vector<int> widths() const {
        std::vector<int> w;
        if (layers_.empty()) return w;
        w.push_back(static_cast<int>(input_width()));
        for (const auto& l : layers_) w.push_back(static_cast<int>(l.weight.rows()));
        return w;
    }
    [[nodiscard]] Eigen::Index parameter_count() const {
        Eigen::Index n = 0;
        for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
        return n;
    }
    /// Bumped on every parameter change; tapes remember it to detect staleness.
    [[nodiscard]] std::uint64_t revision() const { return revision_; }

    /// Row-major weights then bias, layer by layer.
    [[nodiscard]] Eigen::VectorXd flatten() const {
        Eigen::VectorXd out(parameter_count());
        Eigen::Index at = 0;
        for (const auto& l : layers_) {
            for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
                for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out[at++] = l.weight(r, c);
            for (Eigen::Index r = 0; r < l.bias.size(); ++r) out[at++] = l.bias[r];
        }
        return out;
    }

    void assign(const Eigen::VectorXd& flat) {
        detail::require_dims(flat.size() == parameter_count(), "parameter vector has wrong length");
        Eigen::Index at = 0;
        for (auto& l : layers_) {
            for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
                for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[at++];
            for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = flat[at++];
        }
        ++revision_;
    }

    /// this += step, layer by layer; layers below first_trainable are left alone.
    void add(const UnaryGradient& step, std::size_t first_trainable = 0) {
        detail::require_dims(step.weight.size() == layers_.size(), "update layer count mismatch");
        for (std::size_t l = first_trainable; l < layers_.size(); ++l) {
            layers_[l].weight += step.weight[l];
            layers_[l].bias += step.bias[l];
        }
        ++revision_;
    }

    [[nodiscard]] UnaryGradient zero_gradient() const {
        UnaryGradient g;
        for (const auto& l : layers_) {
            g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
            g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
        }
        return g;
    }

    /// Same shapes as the parameters, holding the parameter values.
    [[nodiscard]] UnaryGradient as_gradient() const {
        UnaryGradient g;
        for (const auto& l : layers_) {
            g.weight.push_back(l.weight);
            g.bias.push_back(l.bias);
        }
        return g;
    }

private:
    void check() const {
        if (layers_.empty()) throw ConfigError("unary model needs at least one layer");
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const auto& layer = layers_[l];
            if (layer.weight.rows() == 0 || layer.weight.cols() == 0)
                throw ConfigError("unary layer " + std::to_string(l) + " has zero width");
            if (layer.bias.size() != layer.weight.rows())
                throw DimensionError("unary layer " + std::to_string(l) + " bias length != output width");
            if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows())
                throw DimensionError("unary layer " + std::to_string(l) + " input width mismatch");
            if (layer.dropout && l >= 2) throw ConfigError("dropout is only allowed on the first two layers");
        }
        const auto& last = layers_.back();
        if (last.weight.rows() != 1) throw ConfigError("unary output width must be 1");
        if (last.activation != Activation::linear) throw ConfigError("final unary layer must be linear");
        int logistic = 0;
        for (const auto& layer : layers_) logistic += layer.activation == Activation::logistic;
        if (layers_.size() >= 2 &&
            (logistic != 1 || layers_[layers_.size() - 2].activation != Activation::logistic))
            throw ConfigError("exactly one logistic layer must directly precede the linear output");
        if (layers_.size() == 1 && logistic != 0) throw ConfigError("single-layer model must be linear");
    }

    std::vector<DenseLayer> layers_;
    std::uint64_t revision_ = 0;
};

/// Inverted dropout: kept units are divided by the keep probability during
/// training, so evaluation uses the weights unchanged.
struct DropoutStream {
    double keep = 0.5;
    std::mt19937_64 rng;
};

/// Intermediate values of one forward pass over a batch of columns.
struct ForwardTape {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> pre;
    std::vector<Eigen::MatrixXd> post;
    std::vector<Eigen::MatrixXd> masks;  ///< empty matrix when no dropout on that layer
    std::uint64_t revision = 0;
    std::size_t layer_count() const { return pre.size(); }
};

struct ForwardResult {
    Eigen::VectorXd z;
    ForwardTape tape;
};

namespace detail {
inline Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& pre) {
    switch (a) {
        case Activation::relu: return pre.cwiseMax(0.0);
        case Activation::logistic: return pre.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        case Activation::linear: return pre;
    }
    return pre;
}

inline Eigen::MatrixXd activation_slope(Activation a, const Eigen::MatrixXd& pre, const Eigen::MatrixXd& out) {
    switch (a) {
        case Activation::relu: return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
        case Activation::logistic: return out.array() * (1.0 - out.array());
        case Activation::linear: return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
    }
    return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
}

inline ForwardResult run_forward(const UnaryModel& model, const Eigen::MatrixXd& inputs,
                                 DropoutStream* dropout, const std::vector<Eigen::MatrixXd>* fixed_masks) {
    detail::require_dims(inputs.rows() == model.input_width(),
                         "feature length " + std::to_string(inputs.rows()) + " != unary input width " +
                             std::to_string(model.input_width()));
    ForwardResult res;
    ForwardTape& tape = res.tape;
    tape.input = inputs;
    tape.revision = model.revision();
    const Eigen::MatrixXd* current = &tape.input;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        const DenseLayer& layer = model.layers()[l];
        Eigen::MatrixXd pre = layer.weight * *current;
        pre.colwise() += layer.bias;
        Eigen::MatrixXd post = activate(layer.activation, pre);
        Eigen::MatrixXd mask;
        if (fixed_masks != nullptr) {
            mask = (*fixed_masks)[l];
        } else if (dropout != nullptr && layer.dropout) {
            std::bernoulli_distribution keep(dropout->keep);
            mask.resize(post.rows(), post.cols());
            for (Eigen::Index c = 0; c < mask.cols(); ++c)
                for (Eigen::Index r = 0; r < mask.rows(); ++r)
                    mask(r, c) = keep(dropout->rng) ? 1.0 / dropout->keep : 0.0;
        }
        if (mask.size() > 0) post = post.cwiseProduct(mask);
        tape.pre.push_back(std::move(pre));
        tape.post.push_back(std::move(post));
        tape.masks.push_back(std::move(mask));
        current = &tape.post.back();
    }
    res.z = tape.post.back().row(0).transpose();
    return res;
}
}  // namespace detail

/// Evaluation-mode forward pass; columns of `inputs` are superpixels.
inline ForwardResult forward(const UnaryModel& model, const Eigen::MatrixXd& inputs) {
    return detail::run_forward(model, inputs, nullptr, nullptr);
}

/// Training-mode forward pass drawing fresh dropout masks from `dropout`.
inline ForwardResult forward(const UnaryModel& model, const Eigen::MatrixXd& inputs, DropoutStream& dropout) {
    return detail::run_forward(model, inputs, &dropout, nullptr);
}

/// Recomputes the outputs from the tape's inputs and masks.
inline Eigen::VectorXd replay(const UnaryModel& model, const ForwardTape& tape) {
    if (tape.revision != model.revision() || tape.layer_count() != model.layer_count())
        throw DimensionError("forward tape does not belong to this model state");
    return detail::run_forward(model, tape.input, nullptr, &tape.masks).z;
}

/// Accumulates sum_p residual_p * dz_p/dtheta into `grad`.
inline void backward(const UnaryModel& model, const ForwardTape& tape, const Eigen::VectorXd& residual,
                     UnaryGradient& grad) {
    if (tape.revision != model.revision() || tape.layer_count() != model.layer_count())
        throw DimensionError("stale or mismatched forward tape");
    detail::require_dims(residual.size() == tape.input.cols(), "residual count != number of tape columns");
    detail::require_dims(grad.weight.size() == model.layer_count(), "gradient record has wrong layer count");
    Eigen::MatrixXd upstream = residual.transpose();  // 1 x m
    for (std::size_t i = model.layer_count(); i-- > 0;) {
        const DenseLayer& layer = model.layers()[i];
        Eigen::MatrixXd local = upstream;
        if (tape.masks[i].size() > 0) local = local.cwiseProduct(tape.masks[i]);
        // tape.post holds the masked output; the activation slope needs the unmasked one.
        const Eigen::MatrixXd unmasked = detail::activate(layer.activation, tape.pre[i]);
        local = local.cwiseProduct(detail::activation_slope(layer.activation, tape.pre[i], unmasked));
        const Eigen::MatrixXd& below = i == 0 ? tape.input : tape.post[i - 1];
        grad.weight[i].noalias() += local * below.transpose();
        grad.bias[i] += local.rowwise().sum();
        if (i > 0) upstream = layer.weight.transpose() * local;
    }
}

inline UnaryGradient backward(const UnaryModel& model, const ForwardTape& tape, const Eigen::VectorXd& residual) {
    UnaryGradient g = model.zero_gradient();
    backward(model, tape, residual, g);
    return g;
}

}  // namespace nfield
