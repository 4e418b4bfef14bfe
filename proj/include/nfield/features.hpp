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

// Per-superpixel observations: appearance statistics used by the pairwise
// similarity kernels and a downsampled centred patch fed to the unary model.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nfield/crf.hpp"
#include "nfield/raster.hpp"
#include "nfield/segment.hpp"

namespace nfield {

inline constexpr int kColorBins = 10;
inline constexpr int kLbpBins = 256;
inline constexpr int kNumKernels = 3;

enum class DepthTarget { superpixel_mean, centroid_pixel };

inline std::string_view to_string(DepthTarget t) { return t == DepthTarget::superpixel_mean ? "mean" : "centroid"; }

inline DepthTarget parse_depth_target(std::string_view s) {
    if (s == "mean") return DepthTarget::superpixel_mean;
    if (s == "centroid") return DepthTarget::centroid_pixel;
    throw ConfigError("unknown depth target '" + std::string(s) + "' (expected mean|centroid)");
}

struct PatchConfig {
    int box_size = 24;
    int patch_dim = 6;
};

struct SuperpixelFeatures {
    Eigen::Vector3d mean_color = Eigen::Vector3d::Zero();
    Eigen::VectorXd color_hist;  ///< 3 x kColorBins, sums to 1
    Eigen::VectorXd lbp_hist;    ///< kLbpBins, sums to 1
    Eigen::VectorXd patch;       ///< patch_dim^2 x 3, (row, col, channel) order
    double gt_logdepth = 0.0;    ///< NaN when no depth map was supplied
};

/// 8-neighbour radius-1 LBP code on luminance with edge replication. Bit k is
/// set when neighbour k is strictly brighter than the centre; neighbours run
/// clockwise from the top-left.
inline Grid<std::uint8_t> lbp_codes(const RgbImage& image) {
    Grid<double> lum(image.rows, image.cols);
    for (std::size_t i = 0; i < image.size(); ++i) lum.data[i] = luminance(image.data[i]);
    static constexpr int dr[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
    static constexpr int dc[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
    Grid<std::uint8_t> codes(image.rows, image.cols);
    for (int r = 0; r < image.rows; ++r) {
        for (int c = 0; c < image.cols; ++c) {
            const double centre = lum(r, c);
            unsigned code = 0;
            for (int k = 0; k < 8; ++k)
                if (lum.clamped(r + dr[k], c + dc[k]) > centre) code |= 1u << k;
            codes(r, c) = static_cast<std::uint8_t>(code);
        }
    }
    return codes;
}

inline int color_bin(double v) { return std::clamp(static_cast<int>(v * kColorBins), 0, kColorBins - 1); }

/// box_size x box_size crop centred on (row, col), edge-replicated, area-averaged to patch_dim x patch_dim.
inline Eigen::VectorXd extract_patch(const RgbImage& image, const Centroid& centre, const PatchConfig& cfg) {
    const int box = cfg.box_size, d = cfg.patch_dim;
    const int top = static_cast<int>(std::lround(centre.row)) - box / 2;
    const int left = static_cast<int>(std::lround(centre.col)) - box / 2;
    Eigen::VectorXd patch = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d) * d * 3);
    for (int a = 0; a < d; ++a) {
        const int r0 = a * box / d, r1 = (a + 1) * box / d;
        for (int b = 0; b < d; ++b) {
            const int c0 = b * box / d, c1 = (b + 1) * box / d;
            double sr = 0, sg = 0, sb = 0;
            for (int r = r0; r < r1; ++r) {
                for (int c = c0; c < c1; ++c) {
                    const Rgb& px = image.clamped(top + r, left + c);
                    sr += px.r;
                    sg += px.g;
                    sb += px.b;
                }
            }
            const double inv = 1.0 / ((r1 - r0) * (c1 - c0));
            const Eigen::Index at = (static_cast<Eigen::Index>(a) * d + b) * 3;
            patch[at] = sr * inv;
            patch[at + 1] = sg * inv;
            patch[at + 2] = sb * inv;
        }
    }
    return patch;
}

/// Features for every superpixel of `seg`. `depth` may be null at prediction time.
inline std::vector<SuperpixelFeatures> extract_features(const RgbImage& image, const DepthMap* depth,
                                                        const Segmentation& seg, const PatchConfig& cfg,
                                                        DepthTarget target = DepthTarget::superpixel_mean) {
    if (cfg.box_size < 1 || cfg.patch_dim < 1 || cfg.patch_dim > cfg.box_size)
        throw ConfigError("patch needs 1 <= patch_dim <= box_size");
    detail::require_dims(seg.labels.same_shape(image.rows, image.cols), "label map and image differ in shape");
    if (depth != nullptr)
        detail::require_dims(depth->same_shape(image.rows, image.cols), "depth map and image differ in shape");
    const auto n = static_cast<std::size_t>(seg.count());
    std::vector<SuperpixelFeatures> feats(n);
    std::vector<double> depth_sum(n, 0.0);
    for (auto& f : feats) {
        f.color_hist = Eigen::VectorXd::Zero(3 * kColorBins);
        f.lbp_hist = Eigen::VectorXd::Zero(kLbpBins);
    }
    const Grid<std::uint8_t> codes = lbp_codes(image);
    for (int r = 0; r < image.rows; ++r) {
        for (int c = 0; c < image.cols; ++c) {
            const auto id = static_cast<std::size_t>(seg.labels(r, c));
            SuperpixelFeatures& f = feats[id];
            const Rgb& px = image(r, c);
            f.mean_color += Eigen::Vector3d(px.r, px.g, px.b);
            f.color_hist[color_bin(px.r)] += 1;
            f.color_hist[kColorBins + color_bin(px.g)] += 1;
            f.color_hist[2 * kColorBins + color_bin(px.b)] += 1;
            f.lbp_hist[codes(r, c)] += 1;
            if (depth != nullptr) depth_sum[id] += (*depth)(r, c);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        SuperpixelFeatures& f = feats[i];
        const double count = seg.pixel_counts[i];
        f.mean_color /= count;
        f.color_hist /= 3.0 * count;
        f.lbp_hist /= count;
        f.patch = extract_patch(image, seg.centroids[i], cfg);
        if (depth == nullptr) {
            f.gt_logdepth = std::numeric_limits<double>::quiet_NaN();
        } else if (target == DepthTarget::superpixel_mean) {
            f.gt_logdepth = std::log(depth_sum[i] / count);
        } else {
            const int r = static_cast<int>(std::lround(seg.centroids[i].row));
            const int c = static_cast<int>(std::lround(seg.centroids[i].col));
            f.gt_logdepth = std::log(depth->clamped(r, c));
        }
    }
    return feats;
}

using Gammas = std::array<double, kNumKernels>;

/// S^(k)_pq = exp(-gamma_k ||s_p^(k) - s_q^(k)||_2) on edges, zero elsewhere.
/// Kernels: mean colour, colour histogram, LBP histogram.
inline std::vector<Matrix> similarities(const std::vector<SuperpixelFeatures>& feats, const std::vector<Edge>& edges,
                                        const Gammas& gammas) {
    for (double g : gammas)
        if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("similarity gamma must be positive and finite");
    const auto n = static_cast<Eigen::Index>(feats.size());
    std::vector<Matrix> s(kNumKernels, Matrix::Zero(n, n));
    for (const Edge& e : edges) {
        detail::require_dims(e.p >= 0 && e.q >= 0 && e.p < n && e.q < n, "edge refers to missing superpixel");
        const auto& a = feats[static_cast<std::size_t>(e.p)];
        const auto& b = feats[static_cast<std::size_t>(e.q)];
        const std::array<double, kNumKernels> dist = {(a.mean_color - b.mean_color).norm(),
                                                      (a.color_hist - b.color_hist).norm(),
                                                      (a.lbp_hist - b.lbp_hist).norm()};
        for (int k = 0; k < kNumKernels; ++k) {
            const double v = std::exp(-gammas[static_cast<std::size_t>(k)] * dist[static_cast<std::size_t>(k)]);
            s[static_cast<std::size_t>(k)](e.p, e.q) = v;
            s[static_cast<std::size_t>(k)](e.q, e.p) = v;
        }
    }
    return s;
}

/// Per-dimension standardisation fitted on training patches.
struct FeatureNormalizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;  ///< divide by this; 1 where the training stddev vanished

    /// Columns of each matrix are samples.
    static FeatureNormalizer fit(const std::vector<Eigen::MatrixXd>& batches) {
        detail::require_dims(!batches.empty(), "cannot fit a normalizer without data");
        const Eigen::Index d = batches.front().rows();
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(d), sq = Eigen::VectorXd::Zero(d);
        double count = 0;
        for (const auto& m : batches) {
            detail::require_dims(m.rows() == d, "feature batches disagree in dimension");
            sum += m.rowwise().sum();
            sq += m.array().square().matrix().rowwise().sum();
            count += static_cast<double>(m.cols());
        }
        detail::require_dims(count > 0, "cannot fit a normalizer without samples");
        FeatureNormalizer out;
        out.mean = sum / count;
        const Eigen::VectorXd var = (sq / count - out.mean.cwiseProduct(out.mean)).cwiseMax(0.0);
        out.scale = var.cwiseSqrt().unaryExpr([](double s) { return s > 1e-8 ? s : 1.0; });
        return out;
    }

    static FeatureNormalizer identity(Eigen::Index d) {
        return {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
    }

    [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        detail::require_dims(x.rows() == mean.size(), "feature dimension does not match normalizer");
        return (x.colwise() - mean).array().colwise() / scale.array();
    }
};

/// Stacks patches as columns.
inline Eigen::MatrixXd patch_matrix(const std::vector<SuperpixelFeatures>& feats) {
    detail::require_dims(!feats.empty(), "no superpixel features");
    Eigen::MatrixXd m(feats.front().patch.size(), static_cast<Eigen::Index>(feats.size()));
    for (std::size_t i = 0; i < feats.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = feats[i].patch;
    return m;
}

}  // namespace nfield
