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

// On-disk formats: binary PPM (P6) images, plain-text depth grids and the
// dataset manifest. All writers go through a temporary file and rename so a
// failed write never leaves a truncated file behind.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "nfield/error.hpp"
#include "nfield/raster.hpp"

namespace nfield::io {

namespace fs = std::filesystem;

/// Writes `contents` to `path` atomically.
inline void write_file(const fs::path& path, const std::string& contents) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw IoError("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline std::string encode_ppm(const RgbImage& img) {
    std::string out = "P6\n" + std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n255\n";
    out.reserve(out.size() + img.size() * 3);
    for (const Rgb& px : img.data) {
        out.push_back(static_cast<char>(quantize(px.r)));
        out.push_back(static_cast<char>(quantize(px.g)));
        out.push_back(static_cast<char>(quantize(px.b)));
    }
    return out;
}

/// 8-bit P6 only; samples map linearly to [0,1].
inline RgbImage decode_ppm(const std::string& bytes, const std::string& name = "<memory>") {
    std::size_t at = 0;
    auto skip_space = [&] {
        while (at < bytes.size()) {
            if (bytes[at] == '#') {
                while (at < bytes.size() && bytes[at] != '\n') ++at;
            } else if (std::isspace(static_cast<unsigned char>(bytes[at]))) {
                ++at;
            } else {
                break;
            }
        }
    };
    auto token = [&]() {
        skip_space();
        const std::size_t start = at;
        while (at < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[at]))) ++at;
        return bytes.substr(start, at - start);
    };
    if (token() != "P6") throw IoError(name + ": not a binary PPM (P6)");
    int cols = 0, rows = 0, maxval = 0;
    try {
        cols = std::stoi(token());
        rows = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw IoError(name + ": malformed PPM header");
    }
    if (cols <= 0 || rows <= 0 || maxval != 255) throw IoError(name + ": unsupported PPM geometry or depth");
    ++at;  // single whitespace byte before the raster
    const std::size_t need = static_cast<std::size_t>(rows) * cols * 3;
    if (bytes.size() < at + need) throw IoError(name + ": truncated PPM raster");
    RgbImage img(rows, cols);
    for (std::size_t i = 0; i < img.size(); ++i) {
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + at + 3 * i);
        img.data[i] = {p[0] / 255.0, p[1] / 255.0, p[2] / 255.0};
    }
    return img;
}

inline void write_ppm(const fs::path& path, const RgbImage& img) { write_file(path, encode_ppm(img)); }
inline RgbImage read_ppm(const fs::path& path) { return decode_ppm(read_file(path), path.string()); }

/// Shortest decimal form that reads back to the same double.
inline std::string format_real(double v) {
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    std::string exact = ss.str();
    for (int digits = 6; digits < 17; ++digits) {
        std::ostringstream trial;
        trial << std::setprecision(digits) << v;
        if (std::stod(trial.str()) == v) return trial.str();
    }
    return exact;
}

inline std::string encode_depth(const DepthMap& depth) {
    std::string out = "DEPTH " + std::to_string(depth.rows) + " " + std::to_string(depth.cols) + "\n";
    for (int r = 0; r < depth.rows; ++r) {
        for (int c = 0; c < depth.cols; ++c) {
            if (c > 0) out.push_back(' ');
            out += format_real(depth(r, c));
        }
        out.push_back('\n');
    }
    return out;
}

inline DepthMap decode_depth(const std::string& text, const std::string& name = "<memory>") {
    std::istringstream in(text);
    std::string tag;
    int rows = 0, cols = 0;
    if (!(in >> tag >> rows >> cols) || tag != "DEPTH" || rows <= 0 || cols <= 0)
        throw IoError(name + ": expected header 'DEPTH rows cols'");
    DepthMap depth(rows, cols);
    for (double& v : depth.data) {
        if (!(in >> v)) throw IoError(name + ": truncated depth grid");
        if (!std::isfinite(v) || v <= 0.0) throw IoError(name + ": depth values must be finite and positive");
    }
    std::string extra;
    if (in >> extra) throw IoError(name + ": trailing data after depth grid");
    return depth;
}

inline void write_depth(const fs::path& path, const DepthMap& d) { write_file(path, encode_depth(d)); }
inline DepthMap read_depth(const fs::path& path) { return decode_depth(read_file(path), path.string()); }

struct ManifestEntry {
    std::string image;  ///< relative to the manifest directory
    std::string depth;
    std::uint64_t seed = 0;
};

inline constexpr const char* kManifestName = "manifest.txt";

inline std::string encode_manifest(const std::vector<ManifestEntry>& entries) {
    std::string out = "MANIFEST v1\n";
    for (const auto& e : entries) out += e.image + " " + e.depth + " " + std::to_string(e.seed) + "\n";
    return out;
}

inline std::vector<ManifestEntry> decode_manifest(const std::string& text, const std::string& name = "<memory>") {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "MANIFEST v1") throw IoError(name + ": missing 'MANIFEST v1' header");
    std::vector<ManifestEntry> entries;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ManifestEntry e;
        if (!(ls >> e.image >> e.depth >> e.seed)) throw IoError(name + ": malformed manifest line '" + line + "'");
        entries.push_back(std::move(e));
    }
    return entries;
}

/// FNV-1a 64-bit.
inline std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace nfield::io
