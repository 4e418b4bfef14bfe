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

// Superpixel segmentation (simplified SLIC or a regular grid) and the
// 4-connected adjacency graph over the resulting labels.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "nfield/crf.hpp"
#include "nfield/raster.hpp"

namespace nfield {

enum class SegmentationMode { slic, grid };

inline std::string_view to_string(SegmentationMode m) { return m == SegmentationMode::slic ? "slic" : "grid"; }

inline SegmentationMode parse_segmentation_mode(std::string_view s) {
    if (s == "slic") return SegmentationMode::slic;
    if (s == "grid") return SegmentationMode::grid;
    throw ConfigError("unknown segmentation mode '" + std::string(s) + "'");
}

struct SegmentationConfig {
    int target_n = 150;
    double compactness = 10.0;
    SegmentationMode mode = SegmentationMode::slic;
    int iterations = 10;
};

struct Centroid {
    double row = 0;
    double col = 0;
};

struct Segmentation {
    LabelMap labels;
    std::vector<Centroid> centroids;
    std::vector<int> pixel_counts;
    [[nodiscard]] int count() const { return static_cast<int>(centroids.size()); }
};

namespace detail {

/// Grid shape whose cell count approximates target and respects the aspect ratio.
inline std::pair<int, int> grid_shape(int rows, int cols, int target) {
    int gr = static_cast<int>(std::lround(std::sqrt(static_cast<double>(target) * rows / cols)));
    gr = std::clamp(gr, 1, rows);
    int gc = static_cast<int>(std::lround(static_cast<double>(target) / gr));
    gc = std::clamp(gc, 1, cols);
    return {gr, gc};
}

/// Relabels to 0..n-1 in raster order of first appearance and fills centroids.
inline Segmentation finalize(LabelMap labels) {
    std::vector<int> remap;
    int next = 0;
    for (int& v : labels.data) {
        if (v >= static_cast<int>(remap.size())) remap.resize(static_cast<std::size_t>(v) + 1, -1);
        if (remap[static_cast<std::size_t>(v)] < 0) remap[static_cast<std::size_t>(v)] = next++;
        v = remap[static_cast<std::size_t>(v)];
    }
    Segmentation seg;
    seg.centroids.assign(static_cast<std::size_t>(next), {});
    seg.pixel_counts.assign(static_cast<std::size_t>(next), 0);
    for (int r = 0; r < labels.rows; ++r) {
        for (int c = 0; c < labels.cols; ++c) {
            const auto id = static_cast<std::size_t>(labels(r, c));
            seg.centroids[id].row += r;
            seg.centroids[id].col += c;
            ++seg.pixel_counts[id];
        }
    }
    for (std::size_t i = 0; i < seg.centroids.size(); ++i) {
        seg.centroids[i].row /= seg.pixel_counts[i];
        seg.centroids[i].col /= seg.pixel_counts[i];
    }
    seg.labels = std::move(labels);
    return seg;
}

/// Keeps the largest 4-connected component of every label and merges the
/// remaining fragments into an adjacent label.
inline void enforce_connectivity(LabelMap& labels) {
    const int rows = labels.rows, cols = labels.cols;
    const std::size_t total = labels.size();
    std::vector<int> component(total, -1);
    std::vector<int> comp_label, comp_size;
    const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < total; ++start) {
        if (component[start] >= 0) continue;
        const int id = static_cast<int>(comp_label.size());
        const int lab = labels.data[start];
        comp_label.push_back(lab);
        comp_size.push_back(0);
        stack.assign(1, start);
        component[start] = id;
        while (!stack.empty()) {
            const std::size_t at = stack.back();
            stack.pop_back();
            ++comp_size.back();
            const int r = static_cast<int>(at / cols), c = static_cast<int>(at % cols);
            for (int k = 0; k < 4; ++k) {
                const int nr = r + dr[k], nc = c + dc[k];
                if (nr < 0 || nc < 0 || nr >= rows || nc >= cols) continue;
                const std::size_t nb = labels.index(nr, nc);
                if (component[nb] < 0 && labels.data[nb] == lab) {
                    component[nb] = id;
                    stack.push_back(nb);
                }
            }
        }
    }
    // Largest component per label (ties: earliest).
    std::vector<int> best;
    for (std::size_t id = 0; id < comp_label.size(); ++id) {
        const auto lab = static_cast<std::size_t>(comp_label[id]);
        if (lab >= best.size()) best.resize(lab + 1, -1);
        if (best[lab] < 0 || comp_size[id] > comp_size[static_cast<std::size_t>(best[lab])])
            best[lab] = static_cast<int>(id);
    }
    std::vector<char> resolved(comp_label.size(), 0);
    for (int id : best)
        if (id >= 0) resolved[static_cast<std::size_t>(id)] = 1;

    // Merge orphans that touch a resolved component; repeat until none remain.
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<int> target(comp_label.size(), -1);
        for (std::size_t at = 0; at < total; ++at) {
            const auto id = static_cast<std::size_t>(component[at]);
            if (resolved[id] || target[id] >= 0) continue;
            const int r = static_cast<int>(at / cols), c = static_cast<int>(at % cols);
            for (int k = 0; k < 4; ++k) {
                const int nr = r + dr[k], nc = c + dc[k];
                if (nr < 0 || nc < 0 || nr >= rows || nc >= cols) continue;
                const auto nb_comp = static_cast<std::size_t>(component[labels.index(nr, nc)]);
                if (resolved[nb_comp]) {
                    target[id] = static_cast<int>(nb_comp);
                    break;
                }
            }
        }
        for (std::size_t id = 0; id < comp_label.size(); ++id) {
            if (target[id] < 0) continue;
            comp_label[id] = comp_label[static_cast<std::size_t>(target[id])];
            resolved[id] = 1;
            changed = true;
        }
    }
    for (std::size_t at = 0; at < total; ++at) labels.data[at] = comp_label[static_cast<std::size_t>(component[at])];
}

inline LabelMap grid_labels(int rows, int cols, int gr, int gc) {
    LabelMap labels(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const int band_r = static_cast<int>(static_cast<long long>(r) * gr / rows);
        for (int c = 0; c < cols; ++c) {
            const int band_c = static_cast<int>(static_cast<long long>(c) * gc / cols);
            labels(r, c) = band_r * gc + band_c;
        }
    }
    return labels;
}

inline LabelMap slic_labels(const RgbImage& image, int gr, int gc, double compactness, int iterations) {
    const int rows = image.rows, cols = image.cols;
    const double step = std::sqrt(static_cast<double>(rows) * cols / (static_cast<double>(gr) * gc));
    struct Center {
        double r, c, red, green, blue;
    };
    std::vector<Center> centers;
    for (int i = 0; i < gr; ++i) {
        for (int j = 0; j < gc; ++j) {
            const double r = (i + 0.5) * rows / gr - 0.5;
            const double c = (j + 0.5) * cols / gc - 0.5;
            const Rgb& px = image(static_cast<int>(std::lround(r)), static_cast<int>(std::lround(c)));
            centers.push_back({r, c, px.r, px.g, px.b});
        }
    }
    // Colour distances are measured on channels scaled to [0,100].
    constexpr double color_scale = 100.0;
    const double spatial_weight = compactness / step;
    LabelMap labels = grid_labels(rows, cols, gr, gc);
    std::vector<double> best(labels.size());
    const int window = static_cast<int>(std::ceil(step));
    for (int iter = 0; iter < iterations; ++iter) {
        std::fill(best.begin(), best.end(), std::numeric_limits<double>::infinity());
        for (std::size_t k = 0; k < centers.size(); ++k) {
            const Center& ctr = centers[k];
            const int r0 = std::max(0, static_cast<int>(std::floor(ctr.r)) - window);
            const int r1 = std::min(rows - 1, static_cast<int>(std::ceil(ctr.r)) + window);
            const int c0 = std::max(0, static_cast<int>(std::floor(ctr.c)) - window);
            const int c1 = std::min(cols - 1, static_cast<int>(std::ceil(ctr.c)) + window);
            for (int r = r0; r <= r1; ++r) {
                for (int c = c0; c <= c1; ++c) {
                    const Rgb& px = image(r, c);
                    const double dred = (px.r - ctr.red) * color_scale;
                    const double dgreen = (px.g - ctr.green) * color_scale;
                    const double dblue = (px.b - ctr.blue) * color_scale;
                    const double dy = (r - ctr.r) * spatial_weight, dx = (c - ctr.c) * spatial_weight;
                    const double d = dred * dred + dgreen * dgreen + dblue * dblue + dy * dy + dx * dx;
                    const std::size_t at = labels.index(r, c);
                    if (d < best[at]) {
                        best[at] = d;
                        labels.data[at] = static_cast<int>(k);
                    }
                }
            }
        }
        std::vector<Center> sums(centers.size(), Center{0, 0, 0, 0, 0});
        std::vector<int> counts(centers.size(), 0);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                const auto k = static_cast<std::size_t>(labels(r, c));
                const Rgb& px = image(r, c);
                sums[k].r += r;
                sums[k].c += c;
                sums[k].red += px.r;
                sums[k].green += px.g;
                sums[k].blue += px.b;
                ++counts[k];
            }
        }
        for (std::size_t k = 0; k < centers.size(); ++k) {
            if (counts[k] == 0) continue;
            const double inv = 1.0 / counts[k];
            centers[k] = {sums[k].r * inv, sums[k].c * inv, sums[k].red * inv, sums[k].green * inv,
                          sums[k].blue * inv};
        }
    }
    return labels;
}

}  // namespace detail

/// Over-segments the image into connected, non-overlapping superpixels.
/// Grid mode produces exactly gr x gc rectangular cells; SLIC mode seeds
/// the same grid and refines it by k-means in colour + position.
inline Segmentation segment(const RgbImage& image, const SegmentationConfig& cfg) {
    if (image.empty()) throw DimensionError("cannot segment an empty image");
    if (cfg.target_n < 1) throw ConfigError("target superpixel count must be >= 1");
    if (static_cast<std::size_t>(cfg.target_n) > image.size())
        throw ConfigError("target superpixel count " + std::to_string(cfg.target_n) + " exceeds pixel count " +
                          std::to_string(image.size()));
    if (cfg.compactness <= 0.0) throw ConfigError("SLIC compactness must be positive");
    if (cfg.iterations < 0) throw ConfigError("SLIC iterations must be nonnegative");
    const auto [gr, gc] = detail::grid_shape(image.rows, image.cols, cfg.target_n);
    if (cfg.mode == SegmentationMode::grid) return detail::finalize(detail::grid_labels(image.rows, image.cols, gr, gc));
    LabelMap labels = detail::slic_labels(image, gr, gc, cfg.compactness, cfg.iterations);
    detail::enforce_connectivity(labels);
    return detail::finalize(std::move(labels));
}

/// Undirected 4-connected adjacency between distinct labels, sorted.
inline std::vector<Edge> adjacency(const LabelMap& labels) {
    std::set<Edge> edges;
    auto link = [&](int a, int b) {
        if (a != b) edges.insert(Edge{std::min(a, b), std::max(a, b)});
    };
    for (int r = 0; r < labels.rows; ++r) {
        for (int c = 0; c < labels.cols; ++c) {
            if (c + 1 < labels.cols) link(labels(r, c), labels(r, c + 1));
            if (r + 1 < labels.rows) link(labels(r, c), labels(r + 1, c));
        }
    }
    return {edges.begin(), edges.end()};
}

}  // namespace nfield
