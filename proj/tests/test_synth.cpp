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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "nfield/dataset.hpp"
#include "nfield/pipeline.hpp"
#include "nfield/synth.hpp"

using namespace nfield;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("nfield_test_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
        i = j + 1;
    }
    return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n, mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST(Synth, SinglePlaneFlatTexture) {
    SceneSpec spec;
    spec.num_planes = 1;
    spec.texture = Texture::flat;
    spec.noise_sigma = 0.0;
    spec.seed = 5;
    const auto scene = generate(spec);
    for (const Rgb& px : scene.image.data) EXPECT_EQ(px, scene.image.data.front());
    // Constant gradient: second differences vanish.
    for (int r = 1; r + 1 < spec.height; ++r)
        for (int c = 1; c + 1 < spec.width; ++c) {
            EXPECT_NEAR(scene.depth(r + 1, c) - 2 * scene.depth(r, c) + scene.depth(r - 1, c), 0.0, 1e-12);
            EXPECT_NEAR(scene.depth(r, c + 1) - 2 * scene.depth(r, c) + scene.depth(r, c - 1), 0.0, 1e-12);
        }
    PipelineConfig cfg;
    cfg.segmentation.target_n = 40;
    const auto g = build_graph(scene.image, &scene.depth, cfg);
    for (Eigen::Index i = 0; i < g.y->size(); ++i) {
        EXPECT_GE((*g.y)[i], std::log(spec.depth_min) - 1e-12);
        EXPECT_LE((*g.y)[i], std::log(spec.depth_max) + 1e-12);
    }
}

TEST(Synth, DeterministicInSeed) {
    SceneSpec spec;
    spec.seed = 77;
    const auto a = generate(spec), b = generate(spec);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.depth, b.depth);
    spec.seed = 78;
    EXPECT_NE(generate(spec).depth, a.depth);
}

TEST(Synth, DiscontinuitiesOnlyOnRegionBoundaries) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SceneSpec spec;
        spec.num_planes = 4;
        spec.seed = seed;
        const auto scene = generate(spec);
        EXPECT_EQ(scene.planes.size(), 4u);
        std::set<int> ids(scene.regions.data.begin(), scene.regions.data.end());
        EXPECT_EQ(ids.size(), 4u);
        double slope_bound = 0;
        for (const auto& p : scene.planes) slope_bound = std::max(slope_bound, p.step_bound());
        for (int r = 0; r < spec.height; ++r) {
            for (int c = 0; c < spec.width; ++c) {
                const int here = scene.regions(r, c);
                const int nbr[2][2] = {{r + 1, c}, {r, c + 1}};
                for (const auto& n : nbr) {
                    if (n[0] >= spec.height || n[1] >= spec.width) continue;
                    const double jump = std::abs(scene.depth(n[0], n[1]) - scene.depth(r, c));
                    if (scene.regions(n[0], n[1]) == here) {
                        EXPECT_LE(jump, scene.planes[static_cast<std::size_t>(here)].step_bound() + 1e-12);
                    } else if (jump > slope_bound + 1e-12) {
                        SUCCEED();  // a real discontinuity, on a boundary
                    }
                }
            }
        }
    }
}

TEST(Synth, DepthStaysInRange) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SceneSpec spec;
        spec.seed = seed;
        spec.num_planes = 6;
        const auto scene = generate(spec);
        for (double d : scene.depth.data) {
            EXPECT_GE(d, spec.depth_min);
            EXPECT_LE(d, spec.depth_max);
        }
    }
}

TEST(Synth, RejectsInvalidSpec) {
    SceneSpec spec;
    spec.height = 8;
    EXPECT_THROW(generate(spec), ConfigError);
    spec = {};
    spec.depth_min = 0;
    EXPECT_THROW(generate(spec), ConfigError);
}

TEST(Synth, AppearanceDistancePredictsDepthDifference) {
    std::vector<double> colour_distance, depth_difference;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        SceneSpec spec;
        spec.seed = seed;
        const auto scene = generate(spec);
        PipelineConfig cfg;
        const auto seg = segment(scene.image, cfg.segmentation);
        const auto feats = extract_features(scene.image, &scene.depth, seg, cfg.patch);
        for (const Edge& e : adjacency(seg.labels)) {
            const auto& a = feats[static_cast<std::size_t>(e.p)];
            const auto& b = feats[static_cast<std::size_t>(e.q)];
            colour_distance.push_back((a.mean_color - b.mean_color).norm());
            depth_difference.push_back(std::abs(a.gt_logdepth - b.gt_logdepth));
        }
    }
    EXPECT_GT(spearman(colour_distance, depth_difference), 0.0);
}

TEST(Dataset, SingleSampleManifest) {
    const auto dir = scratch_dir("single");
    SceneSpec spec;
    spec.height = spec.width = 32;
    const auto samples = generate_dataset(spec, 1, 3, dir);
    EXPECT_EQ(samples.size(), 1u);
    const auto manifest = io::decode_manifest(io::read_file(dir / io::kManifestName));
    ASSERT_EQ(manifest.size(), 1u);
    EXPECT_EQ(manifest[0].image, "sample_0000.ppm");
    const auto loaded = load_dataset(dir);
    EXPECT_EQ(loaded[0].image, samples[0].image);
    EXPECT_EQ(loaded[0].depth, samples[0].depth);
    fs::remove_all(dir);
}

TEST(Dataset, RerunIsByteIdentical) {
    const auto a = scratch_dir("rerun_a"), b = scratch_dir("rerun_b");
    SceneSpec spec;
    spec.height = spec.width = 32;
    generate_dataset(spec, 10, 99, a);
    generate_dataset(spec, 10, 99, b);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        const auto name = entry.path().filename();
        EXPECT_EQ(io::read_file(a / name), io::read_file(b / name)) << name;
        ++files;
    }
    EXPECT_EQ(files, 21u);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Dataset, DisjointSeedsGiveDistinctSamples) {
    SceneSpec spec;
    spec.height = spec.width = 32;
    std::set<std::uint64_t> hashes;
    for (const auto& s : generate_dataset(spec, 20, 1)) hashes.insert(sample_hash(s));
    for (const auto& s : generate_dataset(spec, 10, 2)) EXPECT_EQ(hashes.count(sample_hash(s)), 0u);
    EXPECT_EQ(hashes.size(), 20u);
}
