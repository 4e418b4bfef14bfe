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

// SGD with momentum on the regularised negative log-likelihood
//   sum_i NLL_i(theta, beta) + lambda1/2 |theta|^2 + lambda2/2 |beta|^2,
// with beta projected back onto beta >= 0 after every update.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "nfield/crf.hpp"
#include "nfield/features.hpp"
#include "nfield/pipeline.hpp"
#include "nfield/seed.hpp"
#include "nfield/unary.hpp"

namespace nfield {

struct TrainConfig {
    double momentum = 0.9;
    double lambda1 = 0.0005;
    double lambda2 = 0.0005;
    double lr0 = 0.0001;
    double lr_decay = 0.6;
    int lr_decay_every = 20;
    int epochs = 60;
    double dropout_keep = 0.5;
    std::uint64_t seed = 0;
    Vector beta_init = Vector::Constant(kNumKernels, 0.5);
    /// Epochs at the start during which the first unary layer is frozen.
    int pretrain_epochs = 0;
    /// Keep beta at zero: plain least-squares regression on z.
    bool unary_only = false;
};

inline void validate(const TrainConfig& c) {
    if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(c.lr0 > 0.0)) throw ConfigError("initial learning rate must be > 0");
    if (!(c.lambda1 >= 0.0) || !(c.lambda2 >= 0.0)) throw ConfigError("weight decay must be >= 0");
    if (!(c.lr_decay > 0.0 && c.lr_decay <= 1.0)) throw ConfigError("lr decay factor must lie in (0, 1]");
    if (c.lr_decay_every < 1) throw ConfigError("lr decay interval must be >= 1 epoch");
    if (c.epochs < 0) throw ConfigError("epoch count must be >= 0");
    if (!(c.dropout_keep > 0.0 && c.dropout_keep <= 1.0)) throw ConfigError("dropout keep must lie in (0, 1]");
    if (c.pretrain_epochs < 0) throw ConfigError("pretrain epochs must be >= 0");
    for (Eigen::Index k = 0; k < c.beta_init.size(); ++k)
        if (!(c.beta_init[k] >= 0.0)) throw ConfigError("beta_init entries must be >= 0");
}

/// lr0 * decay^floor(epoch / every).
inline double learning_rate(const TrainConfig& c, int epoch) {
    return c.lr0 * std::pow(c.lr_decay, epoch / c.lr_decay_every);
}

/// One training image: normalised unary inputs plus the CRF graph and targets.
struct TrainingExample {
    Eigen::MatrixXd inputs;
    CrfInstance crf;  ///< z is overwritten on every evaluation
};

inline TrainingExample make_example(const ImageGraph& g, const FeatureNormalizer& norm) {
    if (!g.y) throw DimensionError("training image has no ground-truth depths");
    return TrainingExample{norm.apply(g.patches), g.instance(Vector::Zero(g.size()))};
}

struct EpochRecord {
    int epoch = 0;
    double lr = 0;
    double mean_nll = 0;
};

struct TrainState {
    UnaryModel model;
    PairwiseWeights beta;
    UnaryGradient velocity_theta;
    Vector velocity_beta;
    int epoch = 0;      ///< completed epochs
    std::int64_t step = 0;
    std::vector<EpochRecord> history;

    static TrainState initial(UnaryModel model, const TrainConfig& cfg) {
        TrainState s;
        s.velocity_theta = model.zero_gradient();
        s.model = std::move(model);
        s.beta = cfg.unary_only ? PairwiseWeights::zeros(cfg.beta_init.size()) : PairwiseWeights(cfg.beta_init);
        s.velocity_beta = Vector::Zero(cfg.beta_init.size());
        return s;
    }
};

struct StepResult {
    double nll = 0;        ///< sum of per-image NLL before the update
    double objective = 0;  ///< nll plus the weight-decay terms
};

inline double squared_norm(const UnaryModel& m) { return m.flatten().squaredNorm(); }

struct StepOptions {
    double lr = 0;
    bool dropout = true;
    std::size_t first_trainable_layer = 0;
};

/// One update over `batch`. Gradients are accumulated in batch order.
inline StepResult step(TrainState& state, std::vector<TrainingExample>& batch, const TrainConfig& cfg,
                       const StepOptions& opt) {
    UnaryGradient g_theta = state.model.zero_gradient();
    Vector g_beta = Vector::Zero(state.beta.size());
    StepResult res;
    DropoutStream dropout{cfg.dropout_keep, std::mt19937_64(mix_seed(cfg.seed ^ 0xD50F00Dull,
                                                                        static_cast<std::uint64_t>(state.step)))};
    const bool use_dropout = opt.dropout && cfg.dropout_keep < 1.0;
    for (TrainingExample& ex : batch) {
        ForwardResult fwd = use_dropout ? forward(state.model, ex.inputs, dropout) : forward(state.model, ex.inputs);
        ex.crf.z = fwd.z;
        const CrfEvaluation ev = evaluate(ex.crf, state.beta, !cfg.unary_only);
        backward(state.model, fwd.tape, ev.grad_z, g_theta);
        if (!cfg.unary_only) g_beta += ev.grad_beta;
        res.nll += ev.nll;
    }
    const double theta_sq = squared_norm(state.model);
    res.objective = res.nll + 0.5 * cfg.lambda1 * theta_sq + 0.5 * cfg.lambda2 * state.beta.beta().squaredNorm();

    // Weight decay, then v <- mu v - lr g and param <- param + v.
    UnaryGradient params = state.model.as_gradient();
    for (std::size_t l = 0; l < g_theta.weight.size(); ++l) {
        auto& vw = state.velocity_theta.weight[l];
        auto& vb = state.velocity_theta.bias[l];
        if (l < opt.first_trainable_layer) {
            vw.setZero();
            vb.setZero();
            continue;
        }
        vw = cfg.momentum * vw - opt.lr * (g_theta.weight[l] + cfg.lambda1 * params.weight[l]);
        vb = cfg.momentum * vb - opt.lr * (g_theta.bias[l] + cfg.lambda1 * params.bias[l]);
    }
    state.model.add(state.velocity_theta, opt.first_trainable_layer);
    if (!cfg.unary_only) {
        g_beta += cfg.lambda2 * state.beta.beta();
        state.velocity_beta = cfg.momentum * state.velocity_beta - opt.lr * g_beta;
        state.beta = PairwiseWeights((state.beta.beta() + state.velocity_beta).cwiseMax(0.0));
    }
    ++state.step;
    return res;
}

inline StepResult step(TrainState& state, std::vector<TrainingExample>& batch, const TrainConfig& cfg) {
    return step(state, batch, cfg, StepOptions{learning_rate(cfg, state.epoch), true, 0});
}

/// Called after every completed epoch.
using EpochCallback = std::function<void(const TrainState&)>;

/// Continues `state` up to cfg.epochs, one image per step, shuffling the
/// image order every epoch from (seed, epoch).
inline void train(TrainState& state, std::vector<TrainingExample>& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {}) {
    validate(cfg);
    if (data.empty()) throw ConfigError("training set is empty");
    if (cfg.unary_only && state.beta.beta().cwiseAbs().maxCoeff() != 0.0)
        throw ConfigError("unary-only training requires beta = 0");
    std::vector<std::size_t> order(data.size());
    while (state.epoch < cfg.epochs) {
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(state.epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const StepOptions opt{learning_rate(cfg, state.epoch), true,
                              state.epoch < cfg.pretrain_epochs ? std::size_t{1} : std::size_t{0}};
        double total = 0;
        for (std::size_t idx : order) {
            std::vector<TrainingExample> batch{std::move(data[idx])};
            const StepResult r = step(state, batch, cfg, opt);
            data[idx] = std::move(batch.front());
            total += r.nll;
        }
        state.history.push_back({state.epoch, opt.lr, total / static_cast<double>(data.size())});
        ++state.epoch;
        if (on_epoch) on_epoch(state);
    }
}

inline TrainState train(UnaryModel model, std::vector<TrainingExample>& data, const TrainConfig& cfg,
                        const EpochCallback& on_epoch = {}) {
    TrainState state = TrainState::initial(std::move(model), cfg);
    train(state, data, cfg, on_epoch);
    return state;
}

/// The same loop with beta frozen at zero.
inline TrainState train_unary_only(UnaryModel model, std::vector<TrainingExample>& data, TrainConfig cfg,
                                   const EpochCallback& on_epoch = {}) {
    cfg.unary_only = true;
    return train(std::move(model), data, cfg, on_epoch);
}

}  // namespace nfield
