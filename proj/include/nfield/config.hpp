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

// Flat key/value run configuration. Text form is one "key = value" per line,
// '#' starts a comment. Every key is known and validated up front.

#include <charconv>
#include <cstdint>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nfield/io.hpp"
#include "nfield/pipeline.hpp"
#include "nfield/synth.hpp"
#include "nfield/trainer.hpp"

namespace nfield {

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(std::string_view key, std::string_view text) {
    T value{};
    const auto t = trim(text);
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
        throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(text) + "'");
    return value;
}

template <class T>
std::vector<T> parse_list(std::string_view key, std::string_view text) {
    std::vector<T> out;
    std::string item;
    std::istringstream in{std::string(text)};
    while (std::getline(in, item, ',')) out.push_back(parse_number<T>(key, item));
    if (out.empty()) throw ConfigError("config key '" + std::string(key) + "': empty list");
    return out;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
    const auto t = trim(text);
    if (t == "true" || t == "1") return true;
    if (t == "false" || t == "0") return false;
    throw ConfigError("config key '" + std::string(key) + "': expected true|false, got '" + t + "'");
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        if constexpr (std::is_floating_point_v<T>)
            out += io::format_real(v[i]);
        else
            out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace detail

struct RunConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    SceneSpec scene;
    int dataset_count = 30;
    PipelineConfig pipeline;
    std::vector<int> unary_hidden{64, 32, 16};
    TrainConfig train;
    double c1_cap = 70.0;

    /// Input width is the flattened patch; output is one unit.
    [[nodiscard]] std::vector<int> unary_widths() const {
        std::vector<int> w{pipeline.patch.patch_dim * pipeline.patch.patch_dim * 3};
        w.insert(w.end(), unary_hidden.begin(), unary_hidden.end());
        w.push_back(1);
        return w;
    }

    /// Ordered key list; echo() and set() agree on it.
    static const std::vector<std::string>& keys() {
        static const std::vector<std::string> k = {
            "seed", "output_dir",
            "scene.height", "scene.width", "scene.num_planes", "scene.depth_min", "scene.depth_max",
            "scene.texture", "scene.noise_sigma", "scene.count",
            "seg.target_n", "seg.compactness", "seg.mode", "seg.iterations",
            "patch.box_size", "patch.dim", "gamma", "depth.target",
            "unary.hidden",
            "train.momentum", "train.lambda1", "train.lambda2", "train.lr0", "train.lr_decay",
            "train.lr_decay_every", "train.epochs", "train.dropout_keep", "train.beta_init",
            "train.pretrain_epochs", "train.unary_only",
            "eval.c1_cap"};
        return k;
    }

    void set(std::string_view key, std::string_view value) {
        using namespace detail;
        const std::string v = trim(value);
        if (key == "seed") seed = parse_number<std::uint64_t>(key, v);
        else if (key == "output_dir") {
            if (v.empty()) throw ConfigError("config key 'output_dir' must not be empty");
            output_dir = v;
        }
        else if (key == "scene.height") scene.height = parse_number<int>(key, v);
        else if (key == "scene.width") scene.width = parse_number<int>(key, v);
        else if (key == "scene.num_planes") scene.num_planes = parse_number<int>(key, v);
        else if (key == "scene.depth_min") scene.depth_min = parse_number<double>(key, v);
        else if (key == "scene.depth_max") scene.depth_max = parse_number<double>(key, v);
        else if (key == "scene.texture") scene.texture = parse_texture(v);
        else if (key == "scene.noise_sigma") scene.noise_sigma = parse_number<double>(key, v);
        else if (key == "scene.count") dataset_count = parse_number<int>(key, v);
        else if (key == "seg.target_n") pipeline.segmentation.target_n = parse_number<int>(key, v);
        else if (key == "seg.compactness") pipeline.segmentation.compactness = parse_number<double>(key, v);
        else if (key == "seg.mode") pipeline.segmentation.mode = parse_segmentation_mode(v);
        else if (key == "seg.iterations") pipeline.segmentation.iterations = parse_number<int>(key, v);
        else if (key == "patch.box_size") pipeline.patch.box_size = parse_number<int>(key, v);
        else if (key == "patch.dim") pipeline.patch.patch_dim = parse_number<int>(key, v);
        else if (key == "gamma") {
            const auto g = parse_list<double>(key, v);
            if (g.size() != kNumKernels) throw ConfigError("config key 'gamma' needs exactly 3 values");
            std::copy(g.begin(), g.end(), pipeline.gammas.begin());
        }
        else if (key == "depth.target") pipeline.depth_target = parse_depth_target(v);
        else if (key == "unary.hidden") unary_hidden = parse_list<int>(key, v);
        else if (key == "train.momentum") train.momentum = parse_number<double>(key, v);
        else if (key == "train.lambda1") train.lambda1 = parse_number<double>(key, v);
        else if (key == "train.lambda2") train.lambda2 = parse_number<double>(key, v);
        else if (key == "train.lr0") train.lr0 = parse_number<double>(key, v);
        else if (key == "train.lr_decay") train.lr_decay = parse_number<double>(key, v);
        else if (key == "train.lr_decay_every") train.lr_decay_every = parse_number<int>(key, v);
        else if (key == "train.epochs") train.epochs = parse_number<int>(key, v);
        else if (key == "train.dropout_keep") train.dropout_keep = parse_number<double>(key, v);
        else if (key == "train.beta_init") {
            const auto b = parse_list<double>(key, v);
            if (b.size() != kNumKernels) throw ConfigError("config key 'train.beta_init' needs exactly 3 values");
            train.beta_init = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
        }
        else if (key == "train.pretrain_epochs") train.pretrain_epochs = parse_number<int>(key, v);
        else if (key == "train.unary_only") train.unary_only = parse_bool(key, v);
        else if (key == "eval.c1_cap") c1_cap = parse_number<double>(key, v);
        else throw ConfigError("unknown config key '" + std::string(key) + "'");
    }

    [[nodiscard]] std::string get(std::string_view key) const {
        using detail::join;
        using io::format_real;
        if (key == "seed") return std::to_string(seed);
        if (key == "output_dir") return output_dir;
        if (key == "scene.height") return std::to_string(scene.height);
        if (key == "scene.width") return std::to_string(scene.width);
        if (key == "scene.num_planes") return std::to_string(scene.num_planes);
        if (key == "scene.depth_min") return format_real(scene.depth_min);
        if (key == "scene.depth_max") return format_real(scene.depth_max);
        if (key == "scene.texture") return std::string(to_string(scene.texture));
        if (key == "scene.noise_sigma") return format_real(scene.noise_sigma);
        if (key == "scene.count") return std::to_string(dataset_count);
        if (key == "seg.target_n") return std::to_string(pipeline.segmentation.target_n);
        if (key == "seg.compactness") return format_real(pipeline.segmentation.compactness);
        if (key == "seg.mode") return std::string(to_string(pipeline.segmentation.mode));
        if (key == "seg.iterations") return std::to_string(pipeline.segmentation.iterations);
        if (key == "patch.box_size") return std::to_string(pipeline.patch.box_size);
        if (key == "patch.dim") return std::to_string(pipeline.patch.patch_dim);
        if (key == "gamma") return join(std::vector<double>(pipeline.gammas.begin(), pipeline.gammas.end()));
        if (key == "depth.target") return std::string(to_string(pipeline.depth_target));
        if (key == "unary.hidden") return join(unary_hidden);
        if (key == "train.momentum") return format_real(train.momentum);
        if (key == "train.lambda1") return format_real(train.lambda1);
        if (key == "train.lambda2") return format_real(train.lambda2);
        if (key == "train.lr0") return format_real(train.lr0);
        if (key == "train.lr_decay") return format_real(train.lr_decay);
        if (key == "train.lr_decay_every") return std::to_string(train.lr_decay_every);
        if (key == "train.epochs") return std::to_string(train.epochs);
        if (key == "train.dropout_keep") return format_real(train.dropout_keep);
        if (key == "train.beta_init")
            return join(std::vector<double>(train.beta_init.data(), train.beta_init.data() + train.beta_init.size()));
        if (key == "train.pretrain_epochs") return std::to_string(train.pretrain_epochs);
        if (key == "train.unary_only") return train.unary_only ? "true" : "false";
        if (key == "eval.c1_cap") return format_real(c1_cap);
        throw ConfigError("unknown config key '" + std::string(key) + "'");
    }

    /// (key, value) pairs in key order.
    [[nodiscard]] std::vector<std::pair<std::string, std::string>> echo() const {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& k : keys()) out.emplace_back(k, get(k));
        return out;
    }

    /// Checks every field; throws ConfigError on the first violation.
    void validate() const {
        nfield::validate(scene);
        if (dataset_count < 1) throw ConfigError("scene.count must be >= 1");
        const auto& seg = pipeline.segmentation;
        if (seg.target_n < 1) throw ConfigError("seg.target_n must be >= 1");
        if (static_cast<long long>(seg.target_n) > static_cast<long long>(scene.height) * scene.width)
            throw ConfigError("seg.target_n exceeds the pixel count");
        if (!(seg.compactness > 0.0)) throw ConfigError("seg.compactness must be > 0");
        if (seg.iterations < 0) throw ConfigError("seg.iterations must be >= 0");
        if (pipeline.patch.box_size < 1) throw ConfigError("patch.box_size must be >= 1");
        if (pipeline.patch.patch_dim < 1 || pipeline.patch.patch_dim > pipeline.patch.box_size)
            throw ConfigError("patch.dim must lie in [1, patch.box_size]");
        for (double g : pipeline.gammas)
            if (!(g > 0.0) || !std::isfinite(g)) throw ConfigError("gamma values must be positive");
        for (int h : unary_hidden)
            if (h < 1) throw ConfigError("unary.hidden widths must be >= 1");
        nfield::validate(train);
        if (train.beta_init.size() != kNumKernels) throw ConfigError("train.beta_init needs 3 values");
        if (!(c1_cap > 0.0)) throw ConfigError("eval.c1_cap must be > 0");
    }
};

/// Applies "key = value" lines to `cfg`.
inline void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& name = "<config>") {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(name + ":" + std::to_string(lineno) + ": expected 'key = value'");
        cfg.set(detail::trim(t.substr(0, eq)), t.substr(eq + 1));
    }
}

/// Applies a single "key=value" override.
inline void apply_override(RunConfig& cfg, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
    cfg.set(detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

inline std::string config_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& [k, v] : cfg.echo()) out += k + " = " + v + "\n";
    return out;
}

}  // namespace nfield
