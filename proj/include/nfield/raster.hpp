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

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "nfield/error.hpp"

namespace nfield {

/// Dense row-major 2-D grid.
template <class T>
struct Grid {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(int r, int c, T fill = T{}) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {
        if (r < 0 || c < 0) throw DimensionError("grid dimensions must be nonnegative");
    }

    [[nodiscard]] std::size_t size() const { return data.size(); }
    [[nodiscard]] bool empty() const { return data.empty(); }
    [[nodiscard]] std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * cols + c; }
    T& operator()(int r, int c) { return data[index(r, c)]; }
    const T& operator()(int r, int c) const { return data[index(r, c)]; }

    /// Edge-replicated access.
    const T& clamped(int r, int c) const {
        return (*this)(std::clamp(r, 0, rows - 1), std::clamp(c, 0, cols - 1));
    }
    [[nodiscard]] bool same_shape(int r, int c) const { return rows == r && cols == c; }

    bool operator==(const Grid&) const = default;
};

using DepthMap = Grid<double>;
using LabelMap = Grid<int>;
using Mask = Grid<unsigned char>;

struct Rgb {
    double r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

/// Color raster with channel values in [0,1].
using RgbImage = Grid<Rgb>;

inline double luminance(const Rgb& p) { return 0.299 * p.r + 0.587 * p.g + 0.114 * p.b; }

}  // namespace nfield
