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

// Synthetic piecewise-planar scenes. The raster is cut into convex regions
// by random straight splits; every region carries a planar depth field and
// an appearance keyed to its depth, so neighbouring superpixels that look
// alike also tend to lie at similar depths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "nfield/raster.hpp"
#include "nfield/seed.hpp"

namespace nfield {

/// Lattice spacing (pixels) and amplitude of the colour blotches of the noise texture.
inline constexpr int kBlotchCell = 8;
inline constexpr double kBlotchSigma = 0.05;

enum class Texture { flat, gradient, noise };

inline std::string_view to_string(Texture t) {
    switch (t) {
        case Texture::flat: return "flat";
        case Texture::gradient: return "gradient";
        case Texture::noise: return "noise";
    }
    return "?";
}

inline Texture parse_texture(std::string_view s) {
    if (s == "flat") return Texture::flat;
    if (s == "gradient") return Texture::gradient;
    if (s == "noise") return Texture::noise;
    throw ConfigError("unknown texture '" + std::string(s) + "' (expected flat|gradient|noise)");
}

struct SceneSpec {
    int height = 128;
    int width = 128;
    int num_planes = 4;
    double depth_min = 2.0;
    double depth_max = 20.0;
    Texture texture = Texture::noise;
    std::uint64_t seed = 0;
    double noise_sigma = 0.02;
};

inline void validate(const SceneSpec& s) {
    if (s.height < 16 || s.width < 16) throw ConfigError("scene dimensions must be at least 16");
    if (s.num_planes < 1) throw ConfigError("scene needs at least one plane");
    if (s.num_planes > s.height * s.width / 16) throw ConfigError("too many planes for the raster size");
    if (!(s.depth_min > 0.0) || !(s.depth_max >= s.depth_min) || !std::isfinite(s.depth_max))
        throw ConfigError("depth range must satisfy 0 < min <= max");
    if (!(s.noise_sigma >= 0.0) || !std::isfinite(s.noise_sigma))
        throw ConfigError("noise sigma must be finite and >= 0");
}

/// d(r, c) = offset + row_slope * (r - centre_row) + col_slope * (c - centre_col).
struct DepthPlane {
    double offset = 0;
    double row_slope = 0;
    double col_slope = 0;
    double centre_row = 0;
    double centre_col = 0;

    [[nodiscard]] double at(int r, int c) const {
        return offset + row_slope * (r - centre_row) + col_slope * (c - centre_col);
    }
    /// Largest depth change between 4-connected pixels inside the region.
    [[nodiscard]] double step_bound() const { return std::max(std::abs(row_slope), std::abs(col_slope)); }
};

struct SyntheticScene {
    RgbImage image;
    DepthMap depth;
    LabelMap regions;
    std::vector<DepthPlane> planes;
};

namespace detail {

inline LabelMap split_regions(int rows, int cols, int planes, std::mt19937_64& rng) {
    LabelMap regions(rows, cols, 0);
    std::vector<int> area{rows * cols};
    std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
    for (int next = 1; next < planes; ++next) {
        const int target = static_cast<int>(std::max_element(area.begin(), area.end()) - area.begin());
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < regions.size(); ++i)
            if (regions.data[i] == target) members.push_back(i);
        std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
        std::vector<char> side(members.size());
        int moved = 0;
        for (int attempt = 0; attempt < 64; ++attempt) {
            const std::size_t pivot = members[pick(rng)];
            const double pr = static_cast<double>(pivot / cols) + 0.5, pc = static_cast<double>(pivot % cols) + 0.5;
            const double theta = angle(rng);
            const double nr = std::cos(theta), nc = std::sin(theta);
            moved = 0;
            for (std::size_t m = 0; m < members.size(); ++m) {
                const double r = static_cast<double>(members[m] / cols), c = static_cast<double>(members[m] % cols);
                side[m] = (r - pr) * nr + (c - pc) * nc > 0.0;
                moved += side[m];
            }
            const int keep = static_cast<int>(members.size()) - moved;
            const int minimum = std::max(1, static_cast<int>(members.size()) / 5);
            if (moved >= minimum && keep >= minimum) break;
            if (attempt == 63 && (moved == 0 || keep == 0)) moved = 0;
        }
        if (moved == 0) break;
        for (std::size_t m = 0; m < members.size(); ++m)
            if (side[m]) regions.data[members[m]] = next;
        area[static_cast<std::size_t>(target)] -= moved;
        area.push_back(moved);
    }
    return regions;
}

}  // namespace detail

/// Deterministic in spec.seed.
inline SyntheticScene generate(const SceneSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);
    SyntheticScene scene;
    scene.regions = detail::split_regions(spec.height, spec.width, spec.num_planes, rng);
    const int count = *std::max_element(scene.regions.data.begin(), scene.regions.data.end()) + 1;

    // Region statistics for the plane anchors and extents.
    std::vector<double> sum_r(static_cast<std::size_t>(count), 0.0), sum_c(sum_r), npx(sum_r);
    for (int r = 0; r < spec.height; ++r) {
        for (int c = 0; c < spec.width; ++c) {
            const auto id = static_cast<std::size_t>(scene.regions(r, c));
            sum_r[id] += r;
            sum_c[id] += c;
            npx[id] += 1;
        }
    }

    const double log_lo = std::log(spec.depth_min), log_hi = std::log(spec.depth_max);
    const double span = spec.depth_max - spec.depth_min;
    std::uniform_real_distribution<double> unit(0.0, 1.0), signed_unit(-1.0, 1.0);
    std::normal_distribution<double> jitter(0.0, 0.01);
    struct Look {
        Rgb base;
        double stripe_angle, stripe_phase;
    };
    std::vector<Look> looks;
    for (int id = 0; id < count; ++id) {
        const auto i = static_cast<std::size_t>(id);
        DepthPlane plane;
        plane.centre_row = sum_r[i] / npx[i];
        plane.centre_col = sum_c[i] / npx[i];
        plane.offset = std::exp(log_lo + (log_hi - log_lo) * unit(rng));
        const double slope_scale = 0.25 * span / (spec.height + spec.width);
        plane.row_slope = slope_scale * signed_unit(rng);
        plane.col_slope = slope_scale * signed_unit(rng);
        scene.planes.push_back(plane);

        const double t = log_hi > log_lo ? (std::log(plane.offset) - log_lo) / (log_hi - log_lo) : 0.5;
        auto channel = [&](double v) { return std::clamp(v + jitter(rng), 0.05, 0.95); };
        Look look;
        look.base = {channel(0.85 - 0.6 * t), channel(0.3 + 0.4 * std::sin(std::numbers::pi * t)),
                     channel(0.2 + 0.6 * t)};
        look.stripe_angle = std::numbers::pi * unit(rng);
        look.stripe_phase = 2.0 * std::numbers::pi * unit(rng);
        looks.push_back(look);
    }

    // Shrink each plane's slopes until it stays inside the depth range.
    for (int id = 0; id < count; ++id) {
        DepthPlane& plane = scene.planes[static_cast<std::size_t>(id)];
        double lo = plane.offset, hi = plane.offset;
        for (int r = 0; r < spec.height; ++r)
            for (int c = 0; c < spec.width; ++c)
                if (scene.regions(r, c) == id) {
                    const double d = plane.at(r, c);
                    lo = std::min(lo, d);
                    hi = std::max(hi, d);
                }
        double factor = 1.0;
        if (hi > spec.depth_max) factor = std::min(factor, (spec.depth_max - plane.offset) / (hi - plane.offset));
        if (lo < spec.depth_min) factor = std::min(factor, (plane.offset - spec.depth_min) / (plane.offset - lo));
        plane.row_slope *= factor;
        plane.col_slope *= factor;
    }

    scene.depth = DepthMap(spec.height, spec.width);
    scene.image = RgbImage(spec.height, spec.width);
    std::normal_distribution<double> pixel_noise(0.0, 1.0);
    // Colour blotches: a coarse random lattice, bilinearly interpolated.
    const int lattice_rows = spec.height / kBlotchCell + 2, lattice_cols = spec.width / kBlotchCell + 2;
    std::vector<double> lattice;
    if (spec.texture == Texture::noise) {
        lattice.resize(static_cast<std::size_t>(lattice_rows * lattice_cols * 3));
        for (double& v : lattice) v = kBlotchSigma * pixel_noise(rng);
    }
    auto blotch = [&](int r, int c, int ch) {
        if (lattice.empty()) return 0.0;
        const double fr = static_cast<double>(r) / kBlotchCell, fc = static_cast<double>(c) / kBlotchCell;
        const int r0 = static_cast<int>(fr), c0 = static_cast<int>(fc);
        const double a = fr - r0, b = fc - c0;
        auto at = [&](int i, int j) { return lattice[static_cast<std::size_t>((i * lattice_cols + j) * 3 + ch)]; };
        return (1 - a) * ((1 - b) * at(r0, c0) + b * at(r0, c0 + 1)) + a * ((1 - b) * at(r0 + 1, c0) + b * at(r0 + 1, c0 + 1));
    };
    for (int r = 0; r < spec.height; ++r) {
        for (int c = 0; c < spec.width; ++c) {
            const auto id = static_cast<std::size_t>(scene.regions(r, c));
            const double d = std::clamp(scene.planes[id].at(r, c), spec.depth_min, spec.depth_max);
            scene.depth(r, c) = d;
            const Look& look = looks[id];
            double gain = 1.0;
            if (spec.texture != Texture::flat) {
                const double far = span > 0 ? (d - spec.depth_min) / span : 0.0;
                gain = 1.0 - 0.35 * far;
                if (spec.texture == Texture::noise) {
                    // Stripes get finer with distance.
                    const double freq = 0.05 + 0.25 * far;
                    const double u = r * std::cos(look.stripe_angle) + c * std::sin(look.stripe_angle);
                    gain *= 1.0 + 0.15 * std::sin(2.0 * std::numbers::pi * freq * u + look.stripe_phase);
                }
            }
            Rgb px{look.base.r * gain + blotch(r, c, 0), look.base.g * gain + blotch(r, c, 1),
                   look.base.b * gain + blotch(r, c, 2)};
            if (spec.noise_sigma > 0.0) {
                px.r += spec.noise_sigma * pixel_noise(rng);
                px.g += spec.noise_sigma * pixel_noise(rng);
                px.b += spec.noise_sigma * pixel_noise(rng);
            }
            px.r = std::clamp(px.r, 0.0, 1.0);
            px.g = std::clamp(px.g, 0.0, 1.0);
            px.b = std::clamp(px.b, 0.0, 1.0);
            scene.image(r, c) = px;
        }
    }
    return scene;
}

}  // namespace nfield
