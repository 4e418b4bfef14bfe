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

// Acceptance run: closed-form checks against brute-force oracles, then the
// desk-scale synthetic experiments. One PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nfield/nfield.hpp"

using namespace nfield;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    failures += !pass;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[1];
}

void partition_function() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    double worst = 0;
    for (int t = 0; t < 50; ++t) {
        const auto inst = oracle::random_instance(rng, 1 + t % 2, 3);
        const auto w = oracle::random_weights(rng, 3);
        const double analytic = log_partition(inst, w);
        worst = std::max(worst, std::abs(analytic - oracle::quad_log_partition(inst, w)) / std::abs(analytic));
    }
    const double secs = seconds_since(t0);
    report(1, worst <= 1e-6 && secs < 10,
           fmt("log Z vs quadrature, 50 instances: worst rel err %.2e (tol 1e-6), %.2f s (limit 10 s)", worst, secs));
}

void gradients() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> size(1, 20);
    double worst = 0;
    bool pass = true;
    for (int t = 0; t < 50; ++t) {
        for (const auto& g : oracle::check_gradients(mix_seed(202, t), size(rng), 3, 1e-4)) {
            worst = std::max(worst, g.max_relative_error);
            pass = pass && g.pass;
        }
    }
    const double secs = seconds_since(t0);
    report(2, pass && secs < 60,
           fmt("grad_z/theta and grad_beta vs central differences, 50 instances: worst rel err %.2e (tol 1e-4), "
               "%.2f s (limit 60 s)",
               worst, secs));
}

void map_inference() {
    std::mt19937_64 rng(303);
    double worst_cells = 0;
    for (int t = 0; t < 50; ++t) {
        const auto inst = oracle::random_instance(rng, 2, 3);
        const auto w = oracle::random_weights(rng, 3);
        const Vector centre = Vector::Constant(2, inst.z.mean());
        const oracle::GridSpec grid{centre, (inst.z.array() - inst.z.mean()).abs().maxCoeff() + 1.0, 400};
        const Vector gm = oracle::grid_map(inst, w, grid);
        worst_cells = std::max(worst_cells, (gm - map_infer(inst, w)).cwiseAbs().maxCoeff() / grid.cell());
    }
    std::uniform_int_distribution<int> size(1, 50);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> log_scale(-4.0, 1.0);
    int beaten = 0;
    for (int t = 0; t < 50; ++t) {
        const auto inst = oracle::random_instance(rng, size(rng), 3);
        const auto w = oracle::random_weights(rng, 3);
        const Vector y = map_infer(inst, w);
        const double e_star = energy(inst, w, y);
        for (int k = 0; k < 1000; ++k) {
            const double scale = std::pow(10.0, log_scale(rng));
            Vector d(y.size());
            for (auto& v : d) v = scale * normal(rng);
            beaten += !(energy(inst, w, y + d) > e_star);
        }
    }
    report(3, worst_cells <= 1.0 && beaten == 0,
           fmt("n=2 grid argmax within %.3f cells (tol 1); %d of 50000 perturbations reach density >= y*", worst_cells,
               beaten));
}

void degenerate_regression() {
    std::mt19937_64 rng(404);
    double worst = 0;
    for (int t = 0; t < 50; ++t) {
        const auto inst = oracle::random_instance(rng, 1 + t, 3);
        worst = std::max(worst, (map_infer(inst, PairwiseWeights::zeros(3)) - inst.z).cwiseAbs().maxCoeff());
    }
    report(4, worst <= 1e-12, fmt("beta = 0 gives y* = z: worst |y* - z| = %.1e (tol 1e-12)", worst));
}

void gaussian_form() {
    std::mt19937_64 rng(505);
    std::uniform_int_distribution<int> size(1, 5);
    double worst_mean = 0, worst_cov = 0;
    for (int t = 0; t < 10; ++t) {
        const auto inst = oracle::random_instance(rng, size(rng), 3);
        const auto w = oracle::random_weights(rng, 3);
        const auto mc = oracle::mc_moments(inst, w, 100000, mix_seed(505, t));
        const Matrix a = oracle::assemble_precision(inst, w);
        const Matrix a_inv = a.inverse();
        const Vector mean = a_inv * inst.z;
        worst_mean = std::max(worst_mean, ((mc.mean - mean).cwiseAbs().array() / mc.mean_standard_error.array()).maxCoeff());
        worst_cov = std::max(
            worst_cov, ((mc.covariance - 0.5 * a_inv).cwiseAbs().array() / mc.covariance_standard_error.array()).maxCoeff());
    }
    report(5, worst_mean <= 4 && worst_cov <= 4,
           fmt("10^5 draws on 10 instances: mean within %.2f SE, covariance within %.2f SE (tol 4)", worst_mean,
               worst_cov));
}

void positive_definiteness() {
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<int> size(2, 40);
    int factored = 0;
    for (int t = 0; t < 100; ++t) {
        const auto inst = oracle::random_instance(rng, size(rng), 3);
        const auto w = oracle::random_weights(rng, 3, 0.0, 5.0);
        try {
            const auto prec = build_precision(inst, w);
            factored += std::isfinite(prec.log_det());
        } catch (const NumericalError&) {
        }
    }
    const auto inst = oracle::random_instance(rng, 6, 3);
    Matrix r = build_R(inst, oracle::random_weights(rng, 3));
    r(0, 1) = r(1, 0) = -10.0;
    bool raised = false;
    try {
        build_precision(r);
    } catch (const NumericalError&) {
        raised = true;
    }
    report(6, factored == 100 && raised,
           fmt("Cholesky succeeded on %d/100 valid instances; negative coupling %s the numerical-failure error", factored,
               raised ? "raised" : "did not raise"));
}

struct SeedRun {
    double full_rms = 0;
    double unary_rms = 0;
    double first_nll = 0;
    double last_nll = 0;
};

RunConfig acceptance_config(std::uint64_t seed) {
    RunConfig cfg;
    apply_config_text(cfg, io::read_file(NFIELD_ACCEPTANCE_CONFIG), NFIELD_ACCEPTANCE_CONFIG);
    cfg.seed = seed;
    cfg.validate();
    return cfg;
}

std::vector<DepthSample> scenes(const RunConfig& cfg, std::uint64_t stream, int count) {
    return generate_dataset(cfg.scene, count, mix_seed(cfg.seed, stream));
}

SeedRun experiment(std::uint64_t seed) {
    const RunConfig cfg = acceptance_config(seed);
    const auto train_set = scenes(cfg, 1, 30);
    const auto test_set = scenes(cfg, 2, 10);
    SeedRun out;
    const TrainingRun full = train_on(cfg, train_set, false);
    out.full_rms = evaluate_on(depth_model(cfg, full.state, full.normalizer), test_set).rms;
    out.first_nll = full.state.history.front().mean_nll;
    out.last_nll = full.state.history.back().mean_nll;
    const TrainingRun unary = train_on(cfg, train_set, true);
    out.unary_rms = evaluate_on(depth_model(cfg, unary.state, unary.normalizer), test_set).rms;
    std::printf("  seed %llu: full rms %.4f, unary-only rms %.4f, training NLL %.2f -> %.2f (%.0f s + %.0f s)\n",
                static_cast<unsigned long long>(seed), out.full_rms, out.unary_rms, out.first_nll, out.last_nll,
                full.seconds, unary.seconds);
    std::fflush(stdout);
    return out;
}

void ordering_and_progress() {
    const auto t0 = Clock::now();
    std::vector<SeedRun> runs;
    for (std::uint64_t seed : {0, 1, 2}) runs.push_back(experiment(seed));
    std::vector<double> full, unary;
    bool decreasing = true;
    for (const auto& r : runs) {
        full.push_back(r.full_rms);
        unary.push_back(r.unary_rms);
        decreasing = decreasing && r.last_nll < r.first_nll;
    }
    const double secs = seconds_since(t0);
    const double mf = median3(full), mu = median3(unary);
    report(7, mf < mu && secs < 900,
           fmt("median test rms over 3 seeds: full %.4f vs unary-only %.4f, %.0f s (limit 900 s)", mf, mu, secs));
    report(8, decreasing,
           fmt("final-epoch mean training NLL below first epoch on all 3 full runs: %.2f->%.2f, %.2f->%.2f, "
               "%.2f->%.2f",
               runs[0].first_nll, runs[0].last_nll, runs[1].first_nll, runs[1].last_nll, runs[2].first_nll,
               runs[2].last_nll));
}

void superpixel_sweep() {
    const RunConfig base = acceptance_config(0);
    const auto train_set = scenes(base, 1, 30);
    const auto test_set = scenes(base, 2, 10);
    std::vector<double> rms, secs;
    for (int count : {50, 200, 700}) {
        RunConfig cfg = base;
        cfg.pipeline.segmentation.target_n = count;
        const TrainingRun run = train_on(cfg, train_set, false);
        rms.push_back(evaluate_on(depth_model(cfg, run.state, run.normalizer), test_set).rms);
        secs.push_back(run.seconds);
        std::printf("  %d superpixels: test rms %.4f, training %.1f s\n", count, rms.back(), secs.back());
        std::fflush(stdout);
    }
    report(9, rms[2] <= rms[0] && secs[0] <= secs[1] && secs[1] <= secs[2],
           fmt("rms %.4f/%.4f/%.4f and training time %.1f/%.1f/%.1f s at 50/200/700 superpixels", rms[0], rms[1],
               rms[2], secs[0], secs[1], secs[2]));
}

DepthMap row(std::vector<double> v) {
    DepthMap m(1, static_cast<int>(v.size()));
    m.data = std::move(v);
    return m;
}

void metric_examples() {
    bool ok = true;
    const DepthMap same = row({1.5, 7.0, 42.0});
    const auto id = metrics({{same, same, {}}});
    ok = ok && id.rel == 0 && id.rms == 0 && id.log10 == 0 && id.delta1 == 100 && id.delta2 == 100 &&
         id.delta3 == 100;
    const auto two = metrics({{row({2.2, 3.6}), row({2.0, 4.0}), {}}});
    ok = ok && std::abs(two.rel - 0.1) <= 1e-15 && std::abs(two.rms - std::sqrt(0.1)) <= 1e-15 && two.delta1 == 100;
    const auto ten = metrics({{row({10.0}), row({1.0}), {}}});
    ok = ok && std::abs(ten.log10 - 1.0) <= 1e-15 && ten.delta3 == 0;

    std::mt19937_64 rng(1010);
    std::uniform_real_distribution<double> depth(0.5, 30.0);
    DepthMap p(8, 8), g(8, 8);
    for (double& v : p.data) v = depth(rng);
    for (double& v : g.data) v = depth(rng);
    const auto base = metrics({{p, g, {}}});
    double worst = 0;
    bool deltas = true;
    for (double c : {0.01, 0.5, 3.0, 1000.0}) {
        DepthMap ps = p, gs = g;
        for (double& v : ps.data) v *= c;
        for (double& v : gs.data) v *= c;
        const auto r = metrics({{ps, gs, {}}});
        worst = std::max({worst, std::abs(r.rel - base.rel) / base.rel, std::abs(r.log10 - base.log10) / base.log10,
                          std::abs(r.rms - c * base.rms) / (c * base.rms)});
        deltas = deltas && r.delta1 == base.delta1 && r.delta2 == base.delta2 && r.delta3 == base.delta3;
    }
    report(10, ok && deltas && worst <= 1e-12,
           fmt("hand examples %s; scaling by c: deltas %s, worst rel drift in rel/log10/rms/c %.1e", ok ? "match" : "differ",
               deltas ? "unchanged" : "changed", worst));
}

}  // namespace

int main() {
    try {
        partition_function();
        gradients();
        map_inference();
        degenerate_regression();
        gaussian_form();
        positive_definiteness();
        ordering_and_progress();
        superpixel_sweep();
        metric_examples();
    } catch (const std::exception& e) {
        std::printf("FAIL aborted: %s\n", e.what());
        return 1;
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
