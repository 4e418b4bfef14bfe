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

// Image -> CRF graph: segmentation, adjacency, features and similarities.

#include <optional>
#include <vector>

#include "nfield/crf.hpp"
#include "nfield/features.hpp"
#include "nfield/raster.hpp"
#include "nfield/segment.hpp"

namespace nfield {

struct PipelineConfig {
    SegmentationConfig segmentation;
    PatchConfig patch;
    Gammas gammas{2.0, 2.0, 2.0};
    DepthTarget depth_target = DepthTarget::superpixel_mean;
};

/// Everything about one image that does not depend on the learned parameters.
struct ImageGraph {
    Segmentation segmentation;
    std::vector<Edge> edges;
    std::vector<Matrix> similarities;
    Eigen::MatrixXd patches;  ///< raw patch features, one column per superpixel
    std::optional<Vector> y;  ///< ground-truth log-depths when a depth map was given

    [[nodiscard]] int size() const { return segmentation.count(); }

    /// CRF instance with the supplied unary outputs.
    [[nodiscard]] CrfInstance instance(Vector z) const {
        detail::require_dims(z.size() == size(), "unary output count != superpixel count");
        return CrfInstance{std::move(z), y, similarities, edges};
    }
};

inline ImageGraph build_graph(const RgbImage& image, const DepthMap* depth, const PipelineConfig& cfg) {
    ImageGraph g;
    g.segmentation = segment(image, cfg.segmentation);
    g.edges = adjacency(g.segmentation.labels);
    const auto feats = extract_features(image, depth, g.segmentation, cfg.patch, cfg.depth_target);
    g.similarities = similarities(feats, g.edges, cfg.gammas);
    g.patches = patch_matrix(feats);
    if (depth != nullptr) {
        Vector y(static_cast<Eigen::Index>(feats.size()));
        for (std::size_t i = 0; i < feats.size(); ++i) y[static_cast<Eigen::Index>(i)] = feats[i].gt_logdepth;
        g.y = std::move(y);
    }
    return g;
}

/// Fills every superpixel's pixels with its value.
inline DepthMap paint(const LabelMap& labels, const Vector& per_superpixel) {
    DepthMap out(labels.rows, labels.cols);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int id = labels.data[i];
        detail::require_dims(id >= 0 && id < per_superpixel.size(), "label outside the value vector");
        out.data[i] = per_superpixel[id];
    }
    return out;
}

}  // namespace nfield
