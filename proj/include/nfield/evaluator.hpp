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

// Pixel-level depth error metrics pooled over every evaluated image, the
// depth-capped evaluation masks, and end-to-end prediction for one image.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nfield/crf.hpp"
#include "nfield/features.hpp"
#include "nfield/pipeline.hpp"
#include "nfield/raster.hpp"
#include "nfield/unary.hpp"

namespace nfield {

/// Predicted and ground-truth depths in metres; an empty mask means all pixels.
struct DepthPair {
    DepthMap predicted;
    DepthMap ground_truth;
    Mask mask;
};

struct MetricsReport {
    double rel = 0;
    double rms = 0;
    double log10 = 0;
    double delta1 = 0;  ///< percent of pixels with max ratio < 1.25
    double delta2 = 0;  ///< < 1.25^2
    double delta3 = 0;  ///< < 1.25^3
    std::size_t pixel_count = 0;
};

/// Metrics with T pooled over all masked-in pixels of all pairs.
inline MetricsReport metrics(const std::vector<DepthPair>& pairs) {
    double rel = 0, sq = 0, lg = 0;
    std::size_t hits[3] = {0, 0, 0}, total = 0;
    const double thresholds[3] = {1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25};
    for (const DepthPair& pair : pairs) {
        detail::require_dims(pair.predicted.same_shape(pair.ground_truth.rows, pair.ground_truth.cols),
                             "predicted and ground-truth depth maps differ in shape");
        const bool masked = !pair.mask.empty();
        if (masked)
            detail::require_dims(pair.mask.same_shape(pair.ground_truth.rows, pair.ground_truth.cols),
                                 "mask shape differs from the depth maps");
        for (std::size_t i = 0; i < pair.ground_truth.size(); ++i) {
            if (masked && pair.mask.data[i] == 0) continue;
            const double gt = pair.ground_truth.data[i], d = pair.predicted.data[i];
            if (!(gt > 0.0) || !(d > 0.0) || !std::isfinite(gt) || !std::isfinite(d))
                throw NumericalError("depths inside the evaluation mask must be finite and positive");
            rel += std::abs(gt - d) / gt;
            sq += (gt - d) * (gt - d);
            lg += std::abs(std::log10(gt) - std::log10(d));
            const double ratio = std::max(gt / d, d / gt);
            for (int k = 0; k < 3; ++k) hits[k] += ratio < thresholds[k];
            ++total;
        }
    }
    if (total == 0) throw ConfigError("evaluation mask is empty: no pixels to score");
    const auto t = static_cast<double>(total);
    MetricsReport r;
    r.rel = rel / t;
    r.rms = std::sqrt(sq / t);
    r.log10 = lg / t;
    r.delta1 = 100.0 * static_cast<double>(hits[0]) / t;
    r.delta2 = 100.0 * static_cast<double>(hits[1]) / t;
    r.delta3 = 100.0 * static_cast<double>(hits[2]) / t;
    r.pixel_count = total;
    return r;
}

/// C1 keeps pixels with ground truth below the cap; C2 keeps everything.
inline std::pair<Mask, Mask> make3d_masks(const DepthMap& ground_truth, double cap_c1) {
    if (!(cap_c1 > 0.0)) throw ConfigError("C1 depth cap must be positive");
    Mask c1(ground_truth.rows, ground_truth.cols, 0), c2(ground_truth.rows, ground_truth.cols, 1);
    for (std::size_t i = 0; i < ground_truth.size(); ++i) c1.data[i] = ground_truth.data[i] < cap_c1;
    return {std::move(c1), std::move(c2)};
}

/// Learned parameters plus everything needed to rebuild the graph of a new image.
struct DepthModel {
    UnaryModel unary;
    FeatureNormalizer normalizer;
    PairwiseWeights beta;
    PipelineConfig pipeline;
};

struct Prediction {
    DepthMap depth;     ///< metres, painted per superpixel
    Vector unary;       ///< z
    Vector log_depth;   ///< A^-1 z
    Segmentation segmentation;
};

/// Segment, extract features, regress z, solve y* = A^-1 z, exponentiate and paint.
inline Prediction predict_image(const RgbImage& image, const DepthModel& model) {
    ImageGraph g = build_graph(image, nullptr, model.pipeline);
    Prediction out;
    out.unary = forward(model.unary, model.normalizer.apply(g.patches)).z;
    out.log_depth = map_infer(g.instance(out.unary), model.beta);
    out.depth = paint(g.segmentation.labels, out.log_depth.array().exp().matrix());
    out.segmentation = std::move(g.segmentation);
    return out;
}

}  // namespace nfield
