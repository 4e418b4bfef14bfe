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

// End-to-end runs over dataset samples: graph construction, normaliser
// fitting, training and pooled evaluation on held-out images.

#include <chrono>
#include <optional>
#include <vector>

#include "nfield/config.hpp"
#include "nfield/dataset.hpp"
#include "nfield/evaluator.hpp"
#include "nfield/pipeline.hpp"
#include "nfield/seed.hpp"
#include "nfield/trainer.hpp"

namespace nfield {

inline std::vector<ImageGraph> build_graphs(const std::vector<DepthSample>& samples, const PipelineConfig& cfg) {
    std::vector<ImageGraph> graphs;
    graphs.reserve(samples.size());
    for (const auto& s : samples) graphs.push_back(build_graph(s.image, &s.depth, cfg));
    return graphs;
}

inline FeatureNormalizer fit_normalizer(const std::vector<ImageGraph>& graphs) {
    std::vector<Eigen::MatrixXd> raw;
    raw.reserve(graphs.size());
    for (const auto& g : graphs) raw.push_back(g.patches);
    return FeatureNormalizer::fit(raw);
}

inline std::vector<TrainingExample> make_examples(const std::vector<ImageGraph>& graphs, const FeatureNormalizer& norm) {
    std::vector<TrainingExample> out;
    out.reserve(graphs.size());
    for (const auto& g : graphs) out.push_back(make_example(g, norm));
    return out;
}

/// Trainer settings for a run config; the run seed drives shuffling and dropout.
inline TrainConfig train_config(const RunConfig& cfg, bool unary_only) {
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    tc.unary_only = tc.unary_only || unary_only;
    return tc;
}

/// Unary network initialised from the run seed.
inline UnaryModel initial_unary(const RunConfig& cfg) {
    return UnaryModel::init(cfg.unary_widths(), mix_seed(cfg.seed, 0x0E1Full));
}

struct TrainingRun {
    TrainState state;
    FeatureNormalizer normalizer;
    double seconds = 0;  ///< graph construction plus optimisation
};

/// Fresh training run on `samples`.
inline TrainingRun train_on(const RunConfig& cfg, const std::vector<DepthSample>& samples, bool unary_only,
                            const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (samples.empty()) throw ConfigError("training set is empty");
    const auto start = std::chrono::steady_clock::now();
    const auto graphs = build_graphs(samples, cfg.pipeline);
    TrainingRun run;
    run.normalizer = fit_normalizer(graphs);
    auto data = make_examples(graphs, run.normalizer);
    const TrainConfig tc = train_config(cfg, unary_only);
    run.state = TrainState::initial(initial_unary(cfg), tc);
    train(run.state, data, tc, on_epoch);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
}

inline DepthModel depth_model(const RunConfig& cfg, const TrainState& state, const FeatureNormalizer& norm) {
    return DepthModel{state.model, norm, state.beta, cfg.pipeline};
}

/// Predicted/ground-truth pairs for every sample, optionally capped.
inline std::vector<DepthPair> prediction_pairs(const DepthModel& model, const std::vector<DepthSample>& samples,
                                               std::optional<double> cap = std::nullopt) {
    std::vector<DepthPair> pairs;
    pairs.reserve(samples.size());
    for (const auto& s : samples) {
        DepthPair p{predict_image(s.image, model).depth, s.depth, {}};
        if (cap) p.mask = make3d_masks(s.depth, *cap).first;
        pairs.push_back(std::move(p));
    }
    return pairs;
}

inline MetricsReport evaluate_on(const DepthModel& model, const std::vector<DepthSample>& samples,
                                 std::optional<double> cap = std::nullopt) {
    return metrics(prediction_pairs(model, samples, cap));
}

}  // namespace nfield
