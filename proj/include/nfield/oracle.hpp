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

// Brute-force checks for the closed-form CRF results: trapezoid quadrature
// of the partition function, central finite differences, grid-search MAP
// and Monte Carlo moments. Apart from evaluating the energy, nothing here
// goes through the Cholesky-based routines being checked: the precision
// matrix is assembled entry by entry and inverted with a pivoted LU.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "nfield/crf.hpp"
#include "nfield/seed.hpp"
#include "nfield/unary.hpp"

namespace nfield::oracle {

/// Precision matrix assembled by explicit loops over the similarity stack.
inline Matrix assemble_precision(const CrfInstance& inst, const PairwiseWeights& w) {
    const Eigen::Index n = inst.size();
    detail::require_dims(static_cast<std::size_t>(w.size()) == inst.num_kernels(), "beta length mismatch");
    Matrix a = Matrix::Identity(n, n);
    for (Eigen::Index p = 0; p < n; ++p) {
        for (Eigen::Index q = 0; q < n; ++q) {
            if (p == q) continue;
            double r = 0;
            for (std::size_t k = 0; k < inst.num_kernels(); ++k)
                r += w[static_cast<Eigen::Index>(k)] * inst.similarities[k](p, q);
            a(p, q) -= r;
            a(p, p) += r;
        }
    }
    return a;
}

/// Mean A^-1 z and covariance 1/2 A^-1 of the CRF density, via LU.
struct GaussianForm {
    Vector mean;
    Matrix covariance;
};

inline GaussianForm gaussian_form(const CrfInstance& inst, const PairwiseWeights& w) {
    const Matrix a = assemble_precision(inst, w);
    const Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible()) throw NumericalError("oracle: precision matrix is singular");
    const Matrix inv = lu.inverse();
    return {inv * inst.z, 0.5 * inv};
}

struct QuadratureSpec {
    double half_width = 10.0;  ///< per dimension, in posterior marginal standard deviations
    int points = 201;          ///< trapezoid nodes per dimension
};

inline constexpr int kMaxQuadratureDims = 3;

/// log of the trapezoid-rule integral of exp(-E) over a box centred on the mean.
inline double quad_log_partition(const CrfInstance& inst, const PairwiseWeights& w, const QuadratureSpec& spec = {}) {
    const Eigen::Index n = inst.size();
    if (n > kMaxQuadratureDims) throw ConfigError("quadrature oracle supports n <= 3");
    if (!(spec.half_width > 0.0) || spec.points < 3) throw ConfigError("quadrature needs half_width > 0, points >= 3");
    const GaussianForm g = gaussian_form(inst, w);
    Vector lo(n), step(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double hw = spec.half_width * std::sqrt(g.covariance(i, i));
        lo[i] = g.mean[i] - hw;
        step[i] = 2.0 * hw / (spec.points - 1);
    }
    const double e_ref = energy(inst, w, g.mean);
    std::vector<int> idx(static_cast<std::size_t>(n), 0);
    double sum = 0;
    Vector y(n);
    while (true) {
        double weight = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int k = idx[static_cast<std::size_t>(i)];
            y[i] = lo[i] + k * step[i];
            if (k == 0 || k == spec.points - 1) weight *= 0.5;
        }
        sum += weight * std::exp(-(energy(inst, w, y) - e_ref));
        Eigen::Index d = 0;
        while (d < n && ++idx[static_cast<std::size_t>(d)] == spec.points) idx[static_cast<std::size_t>(d++)] = 0;
        if (d == n) break;
    }
    double log_cell = 0;
    for (Eigen::Index i = 0; i < n; ++i) log_cell += std::log(step[i]);
    return -e_ref + std::log(sum) + log_cell;
}

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-5) {
    if (!(h > 0.0)) throw ConfigError("finite-difference step must be > 0");
    Vector g(x.size());
    Vector probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = f(probe);
        probe[i] = x[i] - h;
        const double down = f(probe);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

struct GridSpec {
    Vector centre;
    double half_width = 2.0;
    int points = 400;

    [[nodiscard]] double cell() const { return 2.0 * half_width / (points - 1); }
};

/// Grid point of lowest energy (highest density); n <= 2.
inline Vector grid_map(const CrfInstance& inst, const PairwiseWeights& w, const GridSpec& spec) {
    const Eigen::Index n = inst.size();
    if (n > 2) throw ConfigError("grid MAP oracle supports n <= 2");
    if (spec.points < 2 || !(spec.half_width > 0.0)) throw ConfigError("grid needs >= 2 points and half_width > 0");
    const Vector centre = spec.centre.size() == n ? spec.centre : Vector::Zero(n);
    const double cell = spec.cell();
    Vector best(n), y(n);
    double best_e = std::numeric_limits<double>::infinity();
    const int outer = n == 2 ? spec.points : 1;
    for (int i = 0; i < spec.points; ++i) {
        for (int j = 0; j < outer; ++j) {
            y[0] = centre[0] - spec.half_width + i * cell;
            if (n == 2) y[1] = centre[1] - spec.half_width + j * cell;
            const double e = energy(inst, w, y);
            if (e < best_e) {
                best_e = e;
                best = y;
            }
        }
    }
    return best;
}

struct MomentEstimate {
    Vector mean;
    Matrix covariance;
    Vector mean_standard_error;  ///< sqrt(sample variance / draws)
    Matrix covariance_standard_error;
    int draws = 0;
};

/// Samples y ~ N(A^-1 z, 1/2 A^-1) and returns sample moments.
inline MomentEstimate mc_moments(const CrfInstance& inst, const PairwiseWeights& w, int draws, std::uint64_t seed) {
    if (draws < 10000) throw ConfigError("Monte Carlo moments need at least 1e4 draws");
    const GaussianForm g = gaussian_form(inst, w);
    const Eigen::Index n = inst.size();
    const Eigen::LLT<Matrix> llt(g.covariance);
    if (llt.info() != Eigen::Success) throw NumericalError("oracle: covariance is not positive definite");
    const Matrix l = llt.matrixL();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix samples(n, draws);
    Vector e(n);
    for (int s = 0; s < draws; ++s) {
        for (Eigen::Index i = 0; i < n; ++i) e[i] = normal(rng);
        samples.col(s) = g.mean + l * e;
    }
    MomentEstimate out;
    out.draws = draws;
    out.mean = samples.rowwise().mean();
    const Matrix centred = samples.colwise() - out.mean;
    out.covariance = centred * centred.transpose() / (draws - 1);
    out.mean_standard_error = (out.covariance.diagonal() / draws).cwiseSqrt();
    // Var of a product-moment estimate: E[(x_i x_j - s_ij)^2] / draws.
    out.covariance_standard_error.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::ArrayXd prod = centred.row(i).array() * centred.row(j).array();
            const double var = (prod - out.covariance(i, j)).square().sum() / (draws - 1);
            out.covariance_standard_error(i, j) = std::sqrt(var / draws);
        }
    }
    return out;
}

/// Random valid instance: a spanning chain plus extra edges with the given
/// probability, similarities uniform in (0, 1] on edges, y = z + N(0, 1).
inline CrfInstance random_instance(std::mt19937_64& rng, int n, int k, double edge_probability = 0.5) {
    if (n < 1 || k < 1) throw ConfigError("random instance needs n >= 1 and K >= 1");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    CrfInstance inst;
    inst.z.resize(n);
    for (int i = 0; i < n; ++i) inst.z[i] = normal(rng);
    Vector y(n);
    for (int i = 0; i < n; ++i) y[i] = inst.z[i] + normal(rng);
    inst.y = y;
    for (int p = 0; p < n; ++p)
        for (int q = p + 1; q < n; ++q)
            if (q == p + 1 || unit(rng) < edge_probability) inst.edges.push_back({p, q});
    for (int c = 0; c < k; ++c) {
        Matrix s = Matrix::Zero(n, n);
        for (const Edge& e : inst.edges) s(e.p, e.q) = s(e.q, e.p) = 1.0 - unit(rng);
        inst.similarities.push_back(s);
    }
    return inst;
}

/// Weights uniform in [lo, hi).
inline PairwiseWeights random_weights(std::mt19937_64& rng, int k, double lo = 0.1, double hi = 2.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Vector b(k);
    for (int i = 0; i < k; ++i) b[i] = dist(rng);
    return PairwiseWeights(b);
}

/// max |a - b| / max(|a|_inf, |b|_inf).
inline double max_relative_error(const Vector& a, const Vector& b) {
    const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), 1e-300});
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

struct GradientGroup {
    std::string name;
    double max_relative_error = 0;
    bool pass = false;
};

/// Analytic gradients of the image NLL against central differences for a
/// random instance of size n with K kernels and a small random unary network
/// (dropout off). One entry per parameter group: z, beta and every layer's
/// weight and bias.
inline std::vector<GradientGroup> check_gradients(std::uint64_t seed, int n, int k, double tol = 1e-4,
                                                  const std::vector<int>& hidden = {6, 4}, double h = 1e-5) {
    std::mt19937_64 rng(seed);
    CrfInstance inst = random_instance(rng, n, k);
    const PairwiseWeights w = random_weights(rng, k);
    constexpr int input_width = 5;
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd x(input_width, n);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    std::vector<int> widths{input_width};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(1);
    const UnaryModel model = UnaryModel::init(widths, mix_seed(seed, 1));

    const ForwardResult fwd = forward(model, x);
    inst.z = fwd.z;
    const Vector gz = grad_z(inst, w);
    const Vector gb = grad_beta(inst, w);
    const UnaryGradient gtheta = backward(model, fwd.tape, gz);

    std::vector<GradientGroup> out;
    auto record = [&](std::string name, const Vector& analytic, const Vector& numeric) {
        const double err = max_relative_error(analytic, numeric);
        out.push_back({std::move(name), err, err <= tol});
    };
    record("grad_z", gz, fd_gradient(
                             [&](const Vector& z) {
                                 CrfInstance c = inst;
                                 c.z = z;
                                 return nll(c, w);
                             },
                             inst.z, h));
    record("grad_beta", gb, fd_gradient([&](const Vector& b) { return nll(inst, PairwiseWeights(b)); }, w.beta(), h));

    const Vector theta = model.flatten();
    const Vector fd_theta = fd_gradient(
        [&](const Vector& t) {
            UnaryModel m = model;
            m.assign(t);
            CrfInstance c = inst;
            c.z = forward(m, x).z;
            return nll(c, w);
        },
        theta, h);
    const Vector analytic = gtheta.flatten();
    Eigen::Index at = 0;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        const Eigen::Index nw = gtheta.weight[l].size(), nb = gtheta.bias[l].size();
        record("unary.layer" + std::to_string(l) + ".weight", analytic.segment(at, nw), fd_theta.segment(at, nw));
        at += nw;
        record("unary.layer" + std::to_string(l) + ".bias", analytic.segment(at, nb), fd_theta.segment(at, nb));
        at += nb;
    }
    return out;
}

}  // namespace nfield::oracle
