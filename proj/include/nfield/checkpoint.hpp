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

// Text checkpoint:
//
//   NFCKPT v1
//   CONFIG <key> <value>          one per RunConfig key
//   ACTIVATIONS <tag>...          one per unary layer
//   DROPOUT <0|1>...
//   STATE epoch <n>
//   STATE step <n>
//   TENSOR <name> <dims...>       followed by row-major values, one row per line
//   END
//
// Values use the shortest decimal form that reads back bit-exactly.

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nfield/config.hpp"
#include "nfield/evaluator.hpp"
#include "nfield/io.hpp"
#include "nfield/trainer.hpp"

namespace nfield {

struct Checkpoint {
    RunConfig config;
    DepthModel model;
    UnaryGradient velocity_theta;
    Vector velocity_beta;
    int epoch = 0;
    std::int64_t step = 0;

    /// Training state that resumes exactly where this checkpoint stopped.
    [[nodiscard]] TrainState train_state() const {
        TrainState s;
        s.model = model.unary;
        s.beta = model.beta;
        s.velocity_theta = velocity_theta;
        s.velocity_beta = velocity_beta;
        s.epoch = epoch;
        s.step = step;
        return s;
    }

    static Checkpoint from(const RunConfig& cfg, const TrainState& state, const FeatureNormalizer& norm) {
        Checkpoint c;
        c.config = cfg;
        c.model = DepthModel{state.model, norm, state.beta, cfg.pipeline};
        c.velocity_theta = state.velocity_theta;
        c.velocity_beta = state.velocity_beta;
        c.epoch = state.epoch;
        c.step = state.step;
        return c;
    }
};

namespace detail {

inline void put_tensor(std::string& out, const std::string& name, const Eigen::MatrixXd& m) {
    out += "TENSOR " + name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out += ' ';
            out += io::format_real(m(r, c));
        }
        out += '\n';
    }
}

inline void put_tensor(std::string& out, const std::string& name, const Eigen::VectorXd& v) {
    out += "TENSOR " + name + " " + std::to_string(v.size()) + "\n";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        out += io::format_real(v[i]);
    }
    out += '\n';
}

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
    std::string out = "NFCKPT v1\n";
    for (const auto& [k, v] : ck.config.echo()) out += "CONFIG " + k + " " + v + "\n";
    out += "ACTIVATIONS";
    for (const auto& l : ck.model.unary.layers()) out += " " + std::string(to_string(l.activation));
    out += "\nDROPOUT";
    for (const auto& l : ck.model.unary.layers()) out += l.dropout ? " 1" : " 0";
    out += "\nSTATE epoch " + std::to_string(ck.epoch) + "\n";
    out += "STATE step " + std::to_string(ck.step) + "\n";
    const auto& layers = ck.model.unary.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        detail::put_tensor(out, "unary." + std::to_string(l) + ".weight", layers[l].weight);
        detail::put_tensor(out, "unary." + std::to_string(l) + ".bias", layers[l].bias);
    }
    detail::put_tensor(out, "beta", ck.model.beta.beta());
    const auto& g = ck.model.pipeline.gammas;
    detail::put_tensor(out, "gamma", Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(g.data(), kNumKernels)));
    detail::put_tensor(out, "norm.mean", ck.model.normalizer.mean);
    detail::put_tensor(out, "norm.scale", ck.model.normalizer.scale);
    for (std::size_t l = 0; l < ck.velocity_theta.weight.size(); ++l) {
        detail::put_tensor(out, "velocity.unary." + std::to_string(l) + ".weight", ck.velocity_theta.weight[l]);
        detail::put_tensor(out, "velocity.unary." + std::to_string(l) + ".bias", ck.velocity_theta.bias[l]);
    }
    detail::put_tensor(out, "velocity.beta", ck.velocity_beta);
    out += "END\n";
    return out;
}

inline Checkpoint decode_checkpoint(const std::string& text, const std::string& name = "<checkpoint>") {
    std::istringstream in(text);
    std::string line;
    auto fail = [&](const std::string& why) -> IoError { return IoError(name + ": " + why); };
    if (!std::getline(in, line) || line != "NFCKPT v1") throw fail("missing 'NFCKPT v1' header");
    Checkpoint ck;
    std::vector<Activation> acts;
    std::vector<bool> drops;
    std::map<std::string, Eigen::MatrixXd> tensors;
    bool ended = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "END") {
            ended = true;
            break;
        }
        if (tag == "CONFIG") {
            std::string key, value;
            ls >> key;
            std::getline(ls, value);
            try {
                ck.config.set(key, value);
            } catch (const ConfigError& e) {
                throw fail(e.what());
            }
        } else if (tag == "ACTIVATIONS") {
            for (std::string a; ls >> a;) acts.push_back(parse_activation(a));
        } else if (tag == "DROPOUT") {
            for (int d; ls >> d;) drops.push_back(d != 0);
        } else if (tag == "STATE") {
            std::string key;
            long long v = 0;
            if (!(ls >> key >> v)) throw fail("malformed STATE line");
            if (key == "epoch") ck.epoch = static_cast<int>(v);
            else if (key == "step") ck.step = v;
            else throw fail("unknown STATE key '" + key + "'");
        } else if (tag == "TENSOR") {
            std::string tname;
            std::vector<Eigen::Index> dims;
            ls >> tname;
            for (Eigen::Index d; ls >> d;) dims.push_back(d);
            if (dims.empty() || dims.size() > 2) throw fail("tensor '" + tname + "' must be 1-D or 2-D");
            const Eigen::Index rows = dims[0], cols = dims.size() == 2 ? dims[1] : 1;
            Eigen::MatrixXd m(rows, cols);
            // 1-D tensors are written as a single row.
            for (Eigen::Index r = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c)
                    if (!(in >> m(r, c))) throw fail("truncated tensor '" + tname + "'");
            tensors[tname] = std::move(m);
        } else {
            throw fail("unexpected line '" + line + "'");
        }
    }
    if (!ended) throw fail("missing END marker");
    auto take = [&](const std::string& t) -> Eigen::MatrixXd {
        const auto it = tensors.find(t);
        if (it == tensors.end()) throw fail("missing tensor '" + t + "'");
        return it->second;
    };
    if (acts.empty() || drops.size() != acts.size()) throw fail("activation/dropout tags missing or inconsistent");
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l < acts.size(); ++l) {
        DenseLayer layer;
        layer.weight = take("unary." + std::to_string(l) + ".weight");
        layer.bias = take("unary." + std::to_string(l) + ".bias");
        layer.activation = acts[l];
        layer.dropout = drops[l];
        layers.push_back(std::move(layer));
    }
    try {
        ck.model.unary = UnaryModel(std::move(layers));
        ck.model.beta = PairwiseWeights(take("beta"));
    } catch (const std::invalid_argument& e) {
        throw fail(e.what());
    }
    const Eigen::VectorXd gamma = take("gamma");
    if (gamma.size() != kNumKernels) throw fail("gamma must have 3 entries");
    ck.config.pipeline.gammas = {gamma[0], gamma[1], gamma[2]};
    ck.model.pipeline = ck.config.pipeline;
    ck.model.normalizer.mean = take("norm.mean");
    ck.model.normalizer.scale = take("norm.scale");
    if (ck.model.normalizer.mean.size() != ck.model.unary.input_width() ||
        ck.model.normalizer.scale.size() != ck.model.unary.input_width())
        throw fail("normalizer size does not match the unary input width");
    ck.velocity_theta = ck.model.unary.zero_gradient();
    for (std::size_t l = 0; l < acts.size(); ++l) {
        ck.velocity_theta.weight[l] = take("velocity.unary." + std::to_string(l) + ".weight");
        ck.velocity_theta.bias[l] = take("velocity.unary." + std::to_string(l) + ".bias");
    }
    ck.velocity_beta = take("velocity.beta");
    return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    io::write_file(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(io::read_file(path), path.string());
}

}  // namespace nfield
