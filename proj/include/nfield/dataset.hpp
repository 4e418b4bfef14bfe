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

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "nfield/io.hpp"
#include "nfield/synth.hpp"

namespace nfield {

/// An image with its ground-truth depth, as stored in a dataset directory.
struct DepthSample {
    RgbImage image;
    DepthMap depth;
    std::uint64_t seed = 0;
};

/// Per-sample seeds derive from (seed, index). When `dir` is non-empty the
/// samples and manifest are written there; images are stored 8-bit, so the
/// returned samples carry the quantised pixels that a reader would see.
inline std::vector<DepthSample> generate_dataset(const SceneSpec& spec_template, int count, std::uint64_t seed,
                                                 const std::filesystem::path& dir = {}) {
    if (count < 1) throw ConfigError("dataset count must be >= 1");
    validate(spec_template);
    std::vector<DepthSample> samples;
    std::vector<io::ManifestEntry> manifest;
    std::vector<std::pair<std::string, std::string>> files;
    for (int i = 0; i < count; ++i) {
        SceneSpec spec = spec_template;
        spec.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
        SyntheticScene scene = generate(spec);
        DepthSample s{io::decode_ppm(io::encode_ppm(scene.image)), std::move(scene.depth), spec.seed};
        std::ostringstream stem;
        stem << "sample_" << std::setw(4) << std::setfill('0') << i;
        manifest.push_back({stem.str() + ".ppm", stem.str() + ".depth", spec.seed});
        if (!dir.empty()) {
            files.emplace_back(stem.str() + ".ppm", io::encode_ppm(s.image));
            files.emplace_back(stem.str() + ".depth", io::encode_depth(s.depth));
        }
        samples.push_back(std::move(s));
    }
    if (!dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw IoError("cannot create dataset directory '" + dir.string() + "': " + ec.message());
        for (const auto& [name, bytes] : files) io::write_file(dir / name, bytes);
        io::write_file(dir / io::kManifestName, io::encode_manifest(manifest));
    }
    return samples;
}

inline std::vector<DepthSample> load_dataset(const std::filesystem::path& dir) {
    const auto manifest_path = dir / io::kManifestName;
    if (!std::filesystem::exists(manifest_path)) throw IoError("no manifest at '" + manifest_path.string() + "'");
    const auto entries = io::decode_manifest(io::read_file(manifest_path), manifest_path.string());
    if (entries.empty()) throw IoError("dataset '" + dir.string() + "' is empty");
    std::vector<DepthSample> out;
    for (const auto& e : entries) {
        DepthSample s{io::read_ppm(dir / e.image), io::read_depth(dir / e.depth), e.seed};
        if (!s.depth.same_shape(s.image.rows, s.image.cols))
            throw IoError("image and depth differ in shape for '" + e.image + "'");
        out.push_back(std::move(s));
    }
    return out;
}

/// Content hash of one sample (image and depth bytes).
inline std::uint64_t sample_hash(const DepthSample& s) {
    return io::fnv1a(io::encode_depth(s.depth), io::fnv1a(io::encode_ppm(s.image)));
}

}  // namespace nfield
