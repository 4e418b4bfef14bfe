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

// Continuous CRF over a superpixel graph with quadratic unary and pairwise
// potentials. The density is Gaussian in the depth vector, so the partition
// function, likelihood, gradients and MAP estimate all have closed forms in
// terms of the precision matrix A = I + D - R.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <compare>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "nfield/error.hpp"

namespace nfield {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Undirected superpixel adjacency, stored with p < q.
struct Edge {
    int p = 0;
    int q = 0;
    auto operator<=>(const Edge&) const = default;
};

/// One image's graph: unary outputs z, optional ground truth y, and the K
/// similarity matrices restricted to the edge set.
struct CrfInstance {
    Vector z;
    std::optional<Vector> y;
    std::vector<Matrix> similarities;
    std::vector<Edge> edges;

    [[nodiscard]] Eigen::Index size() const { return z.size(); }
    [[nodiscard]] std::size_t num_kernels() const { return similarities.size(); }
};

/// Nonnegative pairwise coefficients. Construction rejects negative or
/// non-finite entries.
class PairwiseWeights {
public:
    PairwiseWeights() = default;
    explicit PairwiseWeights(Vector beta) : beta_(std::move(beta)) {
        for (Eigen::Index k = 0; k < beta_.size(); ++k) {
            if (!std::isfinite(beta_[k]) || beta_[k] < 0.0)
                throw ConfigError("pairwise weight beta[" + std::to_string(k) +
                                  "] must be finite and >= 0");
        }
    }
    static PairwiseWeights zeros(Eigen::Index k) { return PairwiseWeights(Vector::Zero(k)); }

    [[nodiscard]] const Vector& beta() const { return beta_; }
    [[nodiscard]] Eigen::Index size() const { return beta_.size(); }
    double operator[](Eigen::Index k) const { return beta_[k]; }

private:
    Vector beta_;
};

/// Checks the structural invariants of an instance: square symmetric
/// similarities with zero diagonal, entries in [0,1], zero off the edge set.
inline void validate(const CrfInstance& inst, double tol = 1e-12) {
    const Eigen::Index n = inst.size();
    if (n < 1) throw DimensionError("CRF instance needs at least one superpixel");
    if (inst.y && inst.y->size() != n)
        throw DimensionError("ground truth length " + std::to_string(inst.y->size()) +
                             " != n = " + std::to_string(n));
    Eigen::MatrixXi on_edge = Eigen::MatrixXi::Zero(n, n);
    for (const Edge& e : inst.edges) {
        if (e.p < 0 || e.q < 0 || e.p >= n || e.q >= n || e.p == e.q)
            throw DimensionError("edge (" + std::to_string(e.p) + "," + std::to_string(e.q) +
                                 ") out of range or self-loop");
        on_edge(e.p, e.q) = on_edge(e.q, e.p) = 1;
    }
    for (std::size_t k = 0; k < inst.similarities.size(); ++k) {
        const Matrix& s = inst.similarities[k];
        if (s.rows() != n || s.cols() != n)
            throw DimensionError("similarity matrix " + std::to_string(k) + " is not n x n");
        for (Eigen::Index p = 0; p < n; ++p) {
            for (Eigen::Index q = 0; q < n; ++q) {
                const double v = s(p, q);
                const bool ok = std::isfinite(v) && v >= -tol && v <= 1.0 + tol &&
                                std::abs(v - s(q, p)) <= tol &&
                                (on_edge(p, q) != 0 || std::abs(v) <= tol);
                if (!ok)
                    throw DimensionError("similarity matrix " + std::to_string(k) +
                                         " violates symmetry/range/edge support at (" +
                                         std::to_string(p) + "," + std::to_string(q) + ")");
            }
        }
    }
}

/// R = sum_k beta_k S^(k).
inline Matrix build_R(const CrfInstance& inst, const PairwiseWeights& w) {
    if (static_cast<std::size_t>(w.size()) != inst.num_kernels())
        throw DimensionError("beta has " + std::to_string(w.size()) + " components but instance has " +
                             std::to_string(inst.num_kernels()) + " similarity matrices");
    const Eigen::Index n = inst.size();
    Matrix r = Matrix::Zero(n, n);
    for (std::size_t k = 0; k < inst.num_kernels(); ++k)
        r.noalias() += w[static_cast<Eigen::Index>(k)] * inst.similarities[k];
    return r;
}

/// A = I + D - R together with its Cholesky factor.
class PrecisionStructure {
public:
    /// Builds A from a symmetric pairwise matrix and factorizes it. No jitter
    /// is added; a failed factorization raises NumericalError.
    static PrecisionStructure from_pairwise(const Matrix& r) {
        detail::require_dims(r.rows() == r.cols(), "pairwise matrix must be square");
        const Eigen::Index n = r.rows();
        PrecisionStructure out;
        out.a_ = -r;
        out.a_.diagonal() = Vector::Ones(n) + r.rowwise().sum() - r.diagonal();
        out.chol_.compute(out.a_);
        if (out.chol_.info() != Eigen::Success)
            throw NumericalError("Cholesky factorization of the precision matrix failed "
                                 "(matrix is not positive definite)");
        const auto diag = out.chol_.matrixLLT().diagonal();
        double logdet = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!(diag[i] > 0.0) || !std::isfinite(diag[i]))
                throw NumericalError("non-positive Cholesky pivot at row " + std::to_string(i));
            logdet += std::log(diag[i]);
        }
        out.logdet_ = 2.0 * logdet;
        return out;
    }

    [[nodiscard]] const Matrix& matrix() const { return a_; }
    [[nodiscard]] Matrix lower_factor() const { return chol_.matrixL(); }
    [[nodiscard]] double log_det() const { return logdet_; }
    [[nodiscard]] Eigen::Index size() const { return a_.rows(); }

    [[nodiscard]] Vector solve(const Vector& b) const {
        detail::require_dims(b.size() == a_.rows(), "solve: right-hand side has wrong length");
        return chol_.solve(b);
    }
    [[nodiscard]] Matrix inverse() const { return chol_.solve(Matrix::Identity(size(), size())); }

private:
    Matrix a_;
    Eigen::LLT<Matrix> chol_;
    double logdet_ = 0.0;
};

inline PrecisionStructure build_precision(const Matrix& r) { return PrecisionStructure::from_pairwise(r); }

inline PrecisionStructure build_precision(const CrfInstance& inst, const PairwiseWeights& w) {
    return build_precision(build_R(inst, w));
}

namespace detail {
inline const Vector& require_y(const CrfInstance& inst) {
    if (!inst.y) throw DimensionError("operation needs ground-truth depths but the instance has none");
    detail::require_dims(inst.y->size() == inst.size(), "ground truth length != n");
    return *inst.y;
}
inline double half_n_log_pi(Eigen::Index n) { return 0.5 * static_cast<double>(n) * std::log(std::numbers::pi); }
}  // namespace detail

/// Direct evaluation: sum_p (y_p - z_p)^2 + sum over ordered neighbour pairs
/// of 1/2 R_pq (y_p - y_q)^2, i.e. R_pq (y_p - y_q)^2 per undirected edge.
inline double energy(const CrfInstance& inst, const PairwiseWeights& w, const Vector& y) {
    detail::require_dims(y.size() == inst.size(), "energy: y length != n");
    detail::require_dims(static_cast<std::size_t>(w.size()) == inst.num_kernels(),
                         "energy: beta length != number of similarity matrices");
    double unary = 0.0;
    for (Eigen::Index p = 0; p < inst.size(); ++p) unary += (y[p] - inst.z[p]) * (y[p] - inst.z[p]);
    double pairwise = 0.0;
    for (const Edge& e : inst.edges) {
        double r = 0.0;
        for (std::size_t k = 0; k < inst.num_kernels(); ++k)
            r += w[static_cast<Eigen::Index>(k)] * inst.similarities[k](e.p, e.q);
        const double d = y[e.p] - y[e.q];
        pairwise += r * d * d;
    }
    return unary + pairwise;
}

/// y^T A y - 2 z^T y + z^T z.
inline double energy_quadratic(const Vector& z, const PrecisionStructure& prec, const Vector& y) {
    detail::require_dims(y.size() == prec.size() && z.size() == prec.size(), "energy: length mismatch");
    return y.dot(prec.matrix() * y) - 2.0 * z.dot(y) + z.squaredNorm();
}

/// log Z = (n/2) log pi - 1/2 log|A| + z^T A^-1 z - z^T z.
inline double log_partition(const Vector& z, const PrecisionStructure& prec) {
    detail::require_dims(z.size() == prec.size(), "log_partition: z length != n");
    return detail::half_n_log_pi(z.size()) - 0.5 * prec.log_det() + z.dot(prec.solve(z)) - z.squaredNorm();
}

inline double log_partition(const CrfInstance& inst, const PairwiseWeights& w) {
    return log_partition(inst.z, build_precision(inst, w));
}

inline double nll(const Vector& z, const Vector& y, const PrecisionStructure& prec) {
    detail::require_dims(z.size() == prec.size() && y.size() == prec.size(), "nll: length mismatch");
    return y.dot(prec.matrix() * y) - 2.0 * z.dot(y) + z.dot(prec.solve(z)) - 0.5 * prec.log_det() +
           detail::half_n_log_pi(z.size());
}

/// Negative log-likelihood of the instance's ground truth.
inline double nll(const CrfInstance& inst, const PairwiseWeights& w) {
    const Vector& y = detail::require_y(inst);
    return nll(inst.z, y, build_precision(inst, w));
}

/// MAP depths y* = A^-1 z.
inline Vector map_infer(const CrfInstance& inst, const PairwiseWeights& w) {
    return build_precision(inst, w).solve(inst.z);
}

/// d NLL / d z = 2 (A^-1 z - y); the unary model chains this through dz/dtheta.
inline Vector grad_z(const CrfInstance& inst, const PairwiseWeights& w) {
    const Vector& y = detail::require_y(inst);
    return 2.0 * (build_precision(inst, w).solve(inst.z) - y);
}

namespace detail {
/// Component k of d NLL / d beta given A^-1 z and A^-1. J^(k) = diag(S^(k) 1) - S^(k).
inline Vector grad_beta_from(const CrfInstance& inst, const Vector& y, const Vector& mean, const Matrix& a_inv) {
    Vector g(static_cast<Eigen::Index>(inst.num_kernels()));
    for (std::size_t k = 0; k < inst.num_kernels(); ++k) {
        const Matrix& s = inst.similarities[k];
        const Vector deg = s.rowwise().sum();
        const double y_j_y = y.dot(deg.cwiseProduct(y)) - y.dot(s * y);
        const double m_j_m = mean.dot(deg.cwiseProduct(mean)) - mean.dot(s * mean);
        const double trace = a_inv.diagonal().dot(deg) - a_inv.cwiseProduct(s).sum();
        g[static_cast<Eigen::Index>(k)] = y_j_y - m_j_m - 0.5 * trace;
    }
    return g;
}
}  // namespace detail

/// d NLL / d beta_k = y^T J y - z^T A^-1 J A^-1 z - 1/2 Tr(A^-1 J).
inline Vector grad_beta(const CrfInstance& inst, const PairwiseWeights& w) {
    const Vector& y = detail::require_y(inst);
    const PrecisionStructure prec = build_precision(inst, w);
    return detail::grad_beta_from(inst, y, prec.solve(inst.z), prec.inverse());
}

/// Everything the trainer needs from one factorization.
struct CrfEvaluation {
    double nll = 0.0;
    Vector map;        ///< A^-1 z
    Vector grad_z;     ///< 2 (A^-1 z - y)
    Vector grad_beta;  ///< empty unless requested
};

inline CrfEvaluation evaluate(const CrfInstance& inst, const PairwiseWeights& w, bool with_beta_gradient = true) {
    const Vector& y = detail::require_y(inst);
    const PrecisionStructure prec = build_precision(inst, w);
    CrfEvaluation out;
    out.map = prec.solve(inst.z);
    out.nll = y.dot(prec.matrix() * y) - 2.0 * inst.z.dot(y) + inst.z.dot(out.map) - 0.5 * prec.log_det() +
              detail::half_n_log_pi(inst.size());
    if (!std::isfinite(out.nll)) throw NumericalError("non-finite negative log-likelihood");
    out.grad_z = 2.0 * (out.map - y);
    if (with_beta_gradient) out.grad_beta = detail::grad_beta_from(inst, y, out.map, prec.inverse());
    return out;
}

}  // namespace nfield
