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

// nfield command-line front end: synthetic data, training, prediction,
// evaluation and the brute-force verification commands.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nfield/nfield.hpp"

namespace fs = std::filesystem;
using namespace nfield;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

constexpr const char* kCheckpointName = "checkpoint.nfck";
constexpr const char* kHistoryName = "history.csv";

struct ConfigArgs {
    std::string file;
    std::vector<std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.file, "Config file of 'key = value' lines ('#' starts a comment)");
    cmd->add_option("--set", args.overrides, "Override one config key, as key=value (repeatable)");
}

void apply(RunConfig& cfg, const ConfigArgs& args) {
    if (!args.file.empty()) apply_config_text(cfg, io::read_file(args.file), args.file);
    for (const auto& o : args.overrides) apply_override(cfg, o);
}

RunConfig load_config(const ConfigArgs& args) {
    RunConfig cfg;
    apply(cfg, args);
    return cfg;
}

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::string history_csv(const std::vector<EpochRecord>& rows) {
    std::string out = "epoch,lr,mean_nll\n";
    for (const auto& r : rows)
        out += std::to_string(r.epoch) + "," + io::format_real(r.lr) + "," + io::format_real(r.mean_nll) + "\n";
    return out;
}

/// Rows of an existing history file that precede `before_epoch`.
std::vector<EpochRecord> previous_history(const fs::path& path, int before_epoch) {
    std::vector<EpochRecord> rows;
    if (!fs::exists(path)) return rows;
    std::istringstream in(io::read_file(path));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        EpochRecord r;
        char c1 = 0, c2 = 0;
        std::istringstream ls(line);
        if (!(ls >> r.epoch >> c1 >> r.lr >> c2 >> r.mean_nll) || c1 != ',' || c2 != ',')
            throw IoError(path.string() + ": malformed history row '" + line + "'");
        if (r.epoch < before_epoch) rows.push_back(r);
    }
    return rows;
}

std::string metrics_row(const std::string& label, const MetricsReport& m) {
    return label + "," + io::format_real(m.rel) + "," + io::format_real(m.rms) + "," + io::format_real(m.log10) + "," +
           io::format_real(m.delta1) + "," + io::format_real(m.delta2) + "," + io::format_real(m.delta3) + "," +
           std::to_string(m.pixel_count) + "\n";
}

void print_table(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
    std::printf("%-6s %9s %9s %9s %8s %8s %8s %10s\n", "subset", "rel", "rms", "log10", "d<1.25", "d<1.25^2",
                "d<1.25^3", "pixels");
    for (const auto& [label, m] : rows)
        std::printf("%-6s %9.4f %9.4f %9.4f %7.2f%% %7.2f%% %7.2f%% %10zu\n", label.c_str(), m.rel, m.rms, m.log10,
                    m.delta1, m.delta2, m.delta3, m.pixel_count);
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    ConfigArgs config;
    int count = 0;
    std::string out;
};

int cmd_synth(const SynthArgs& a) {
    RunConfig cfg = load_config(a.config);
    if (a.count != 0) cfg.dataset_count = a.count;
    if (!a.out.empty()) cfg.output_dir = a.out;
    cfg.validate();
    const auto samples = generate_dataset(cfg.scene, cfg.dataset_count, cfg.seed, cfg.output_dir);
    std::printf("wrote %zu samples (%dx%d) to %s\n", samples.size(), cfg.scene.width, cfg.scene.height,
                cfg.output_dir.c_str());
    return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    ConfigArgs config;
    std::string data;
    std::string out;
    std::string resume;
    bool unary_only = false;
    int checkpoint_every = 10;
};

int cmd_train(const TrainArgs& a) {
    if (a.checkpoint_every < 1) throw ConfigError("--checkpoint-every must be >= 1");
    std::optional<Checkpoint> resume;
    RunConfig cfg;
    if (!a.resume.empty()) {
        resume = load_checkpoint(a.resume);
        cfg = resume->config;
    }
    apply(cfg, a.config);
    if (a.unary_only) cfg.train.unary_only = true;
    if (!a.out.empty()) cfg.output_dir = a.out;
    cfg.validate();
    if (resume) {
        if (cfg.unary_widths() != resume->model.unary.widths())
            throw ConfigError("unary network shape in the config does not match the checkpoint");
        if (cfg.train.unary_only && resume->model.beta.beta().cwiseAbs().maxCoeff() != 0.0)
            throw ConfigError("cannot resume a checkpoint with beta != 0 as unary-only");
    }

    const auto samples = load_dataset(a.data);
    const fs::path out_dir = cfg.output_dir;
    ensure_directory(out_dir);

    const auto graphs = build_graphs(samples, cfg.pipeline);
    const FeatureNormalizer norm = resume ? resume->model.normalizer : fit_normalizer(graphs);
    auto data = make_examples(graphs, norm);
    const TrainConfig tc = train_config(cfg, false);
    TrainState state = resume ? resume->train_state() : TrainState::initial(initial_unary(cfg), tc);

    std::vector<EpochRecord> history = resume ? previous_history(out_dir / kHistoryName, state.epoch)
                                              : std::vector<EpochRecord>{};
    io::write_file(out_dir / kHistoryName, history_csv(history));
    const auto t0 = std::chrono::steady_clock::now();
    train(state, data, tc, [&](const TrainState& s) {
        history.push_back(s.history.back());
        io::write_file(out_dir / kHistoryName, history_csv(history));
        const auto& r = s.history.back();
        std::printf("epoch %3d  lr %.3g  mean_nll %.6g\n", r.epoch, r.lr, r.mean_nll);
        std::fflush(stdout);
        if (s.epoch % a.checkpoint_every == 0) save_checkpoint(out_dir / kCheckpointName, Checkpoint::from(cfg, s, norm));
    });
    save_checkpoint(out_dir / kCheckpointName, Checkpoint::from(cfg, state, norm));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("trained to epoch %d on %zu images in %.1f s; beta = [%s]\ncheckpoint: %s\n", state.epoch,
                samples.size(), secs, detail::join(std::vector<double>(state.beta.beta().data(),
                                                                      state.beta.beta().data() + state.beta.size()))
                                          .c_str(),
                (out_dir / kCheckpointName).string().c_str());
    return 0;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
    std::string checkpoint;
    std::string image;
    std::string out;
};

int cmd_predict(const PredictArgs& a) {
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    const RgbImage image = io::read_ppm(a.image);
    const Prediction p = predict_image(image, ck.model);
    io::write_depth(a.out, p.depth);
    const auto [lo, hi] = std::minmax_element(p.depth.data.begin(), p.depth.data.end());
    std::printf("predicted %dx%d depth over %d superpixels, range [%.4g, %.4g] m -> %s\n", p.depth.cols, p.depth.rows,
                p.segmentation.count(), *lo, *hi, a.out.c_str());
    return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string csv;
    double c1_cap = 0;
    bool ground_truth = false;
};

int cmd_eval(const EvalArgs& a) {
    if (a.checkpoint.empty() && !a.ground_truth)
        throw ConfigError("eval needs --checkpoint (or --ground-truth-as-prediction)");
    std::optional<Checkpoint> ck;
    if (!a.checkpoint.empty()) ck = load_checkpoint(a.checkpoint);
    const double cap = a.c1_cap > 0 ? a.c1_cap : (ck ? ck->config.c1_cap : RunConfig{}.c1_cap);
    if (!(cap > 0)) throw ConfigError("--c1-cap must be > 0");
    const auto samples = load_dataset(a.data);

    std::vector<DepthPair> c1, c2;
    for (const auto& s : samples) {
        DepthMap pred = a.ground_truth ? s.depth : predict_image(s.image, ck->model).depth;
        auto [m1, m2] = make3d_masks(s.depth, cap);
        c1.push_back({pred, s.depth, std::move(m1)});
        c2.push_back({std::move(pred), s.depth, std::move(m2)});
    }
    const MetricsReport r2 = metrics(c2);
    MetricsReport r1;
    try {
        r1 = metrics(c1);
    } catch (const ConfigError&) {
        throw ConfigError("C1 evaluation mask is empty: no ground-truth depth below the cap of " +
                          io::format_real(cap));
    }
    const std::string csv = "subset,rel,rms,log10,delta1,delta2,delta3,pixels\n" + metrics_row("C1", r1) +
                            metrics_row("C2", r2);
    if (!a.csv.empty()) io::write_file(a.csv, csv);
    std::fputs(csv.c_str(), stdout);
    std::printf("\n");
    print_table({{"C1", r1}, {"C2", r2}});
    return 0;
}

// ---------------------------------------------------------------- gradcheck / verify

struct GradcheckArgs {
    std::uint64_t seed = 0;
    int n = 8;
    int k = 3;
    double tol = 1e-4;
};

int cmd_gradcheck(const GradcheckArgs& a) {
    if (a.n < 1 || a.k < 1) throw ConfigError("--n and --K must be >= 1");
    if (!(a.tol > 0)) throw ConfigError("--tol must be > 0");
    bool ok = true;
    for (const auto& g : oracle::check_gradients(a.seed, a.n, a.k, a.tol)) {
        std::printf("%s %-22s max_rel_err=%.3e (tol %.1e)\n", g.pass ? "PASS" : "FAIL", g.name.c_str(),
                    g.max_relative_error, a.tol);
        ok = ok && g.pass;
    }
    return ok ? 0 : kExitNumerical;
}

struct VerifyArgs {
    std::uint64_t seed = 0;
    int trials = 10;
};

int cmd_verify(const VerifyArgs& a) {
    if (a.trials < 1) throw ConfigError("--trials must be >= 1");
    std::mt19937_64 rng(a.seed);
    std::uniform_int_distribution<int> small(1, 2), tiny(1, 5);
    double worst_quad = 0, worst_map = 0, worst_mean = 0, worst_cov = 0;
    for (int t = 0; t < a.trials; ++t) {
        auto inst = oracle::random_instance(rng, small(rng), 3);
        auto w = oracle::random_weights(rng, 3);
        const double analytic = log_partition(inst, w);
        const double quad = oracle::quad_log_partition(inst, w);
        worst_quad = std::max(worst_quad, std::abs(analytic - quad) / std::max(std::abs(analytic), 1e-300));

        inst = oracle::random_instance(rng, 2, 3);
        w = oracle::random_weights(rng, 3);
        const Vector centre = Vector::Constant(2, inst.z.mean());
        oracle::GridSpec grid{centre, (inst.z.array() - inst.z.mean()).abs().maxCoeff() + 1.0, 400};
        const Vector gm = oracle::grid_map(inst, w, grid);
        worst_map = std::max(worst_map, (gm - map_infer(inst, w)).cwiseAbs().maxCoeff() / grid.cell());

        inst = oracle::random_instance(rng, tiny(rng), 3);
        w = oracle::random_weights(rng, 3);
        const auto mc = oracle::mc_moments(inst, w, 100000, mix_seed(a.seed, static_cast<std::uint64_t>(t)));
        const PrecisionStructure prec = build_precision(inst, w);
        const Vector mean = prec.solve(inst.z);
        const Matrix cov = 0.5 * prec.inverse();
        worst_mean = std::max(worst_mean, ((mc.mean - mean).cwiseAbs().array() / mc.mean_standard_error.array()).maxCoeff());
        worst_cov = std::max(worst_cov,
                             ((mc.covariance - cov).cwiseAbs().array() / mc.covariance_standard_error.array()).maxCoeff());
    }
    const bool q = worst_quad <= 1e-6, m = worst_map <= 1.0, mm = worst_mean <= 4.0, mc = worst_cov <= 4.0;
    std::printf("%s log_partition vs quadrature      worst rel err %.3e (tol 1e-6)\n", q ? "PASS" : "FAIL", worst_quad);
    std::printf("%s map_infer vs grid search         worst offset %.3f cells (tol 1)\n", m ? "PASS" : "FAIL", worst_map);
    std::printf("%s Monte Carlo mean vs A^-1 z       worst %.2f SE (tol 4)\n", mm ? "PASS" : "FAIL", worst_mean);
    std::printf("%s Monte Carlo covariance vs A^-1/2 worst %.2f SE (tol 4)\n", mc ? "PASS" : "FAIL", worst_cov);
    return q && m && mm && mc ? 0 : kExitNumerical;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
    ConfigArgs config;
    std::string data;
    std::string test;
    std::string counts = "50,200,700";
    std::string out;
};

int cmd_sweep(const SweepArgs& a) {
    RunConfig cfg = load_config(a.config);
    cfg.validate();
    const auto counts = detail::parse_list<int>("--counts", a.counts);
    std::set<int> seen;
    for (int c : counts) {
        if (c < 1) throw ConfigError("superpixel counts must be >= 1");
        if (!seen.insert(c).second) throw ConfigError("duplicate superpixel count " + std::to_string(c));
        RunConfig probe = cfg;
        probe.pipeline.segmentation.target_n = c;
        probe.validate();
    }
    const auto train_set = load_dataset(a.data);
    const auto test_set = load_dataset(a.test);
    std::string csv = "count,rms,train_seconds\n";
    std::fputs(csv.c_str(), stdout);
    for (int c : counts) {
        RunConfig run_cfg = cfg;
        run_cfg.pipeline.segmentation.target_n = c;
        const TrainingRun run = train_on(run_cfg, train_set, false);
        const MetricsReport m = evaluate_on(depth_model(run_cfg, run.state, run.normalizer), test_set);
        const std::string row = std::to_string(c) + "," + io::format_real(m.rms) + "," + io::format_real(run.seconds) + "\n";
        csv += row;
        std::fputs(row.c_str(), stdout);
        std::fflush(stdout);
    }
    if (!a.out.empty()) io::write_file(a.out, csv);
    return 0;
}

template <class F>
int guarded(F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const DimensionError& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kExitConfig;
    } catch (const IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kExitIo;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"nfield: continuous CRF depth estimation from single images (superpixel graph + neural unary)"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic dataset directory (images, depths, manifest)");
    add_config_options(s, synth.config);
    s->add_option("--count", synth.count, "Number of scenes (overrides scene.count)");
    s->add_option("--out", synth.out, "Output directory (overrides output_dir)");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train on a dataset directory; writes checkpoint.nfck and history.csv");
    add_config_options(t, tr.config);
    t->add_option("--data", tr.data, "Training dataset directory")->required();
    t->add_option("--out", tr.out, "Output directory (overrides output_dir)");
    t->add_flag("--unary-only", tr.unary_only, "Freeze beta at 0: least-squares regression baseline");
    t->add_option("--resume", tr.resume, "Continue from a checkpoint; its config is the base for --config/--set");
    t->add_option("--checkpoint-every", tr.checkpoint_every, "Also write the checkpoint every N epochs")
        ->capture_default_str();

    PredictArgs pr;
    auto* p = app.add_subcommand("predict", "Predict a depth raster for one PPM image");
    p->add_option("--checkpoint", pr.checkpoint, "Checkpoint file")->required();
    p->add_option("--image", pr.image, "Input image (binary PPM)")->required();
    p->add_option("--out", pr.out, "Output depth file")->required();

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Score predictions on a dataset (C1 capped and C2 full-image metrics)");
    e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file");
    e->add_option("--data", ev.data, "Dataset directory")->required();
    e->add_option("--c1-cap", ev.c1_cap, "C1 depth cap in metres (default: eval.c1_cap of the checkpoint config)");
    e->add_option("--csv", ev.csv, "Also write the metrics CSV to this file");
    e->add_flag("--ground-truth-as-prediction", ev.ground_truth, "Score the ground truth against itself");

    GradcheckArgs gc;
    auto* g = app.add_subcommand("gradcheck", "Compare analytic gradients with central finite differences");
    g->add_option("--seed", gc.seed, "Random seed")->capture_default_str();
    g->add_option("--n", gc.n, "Number of superpixels")->capture_default_str();
    g->add_option("--K", gc.k, "Number of pairwise kernels")->capture_default_str();
    g->add_option("--tol", gc.tol, "Relative tolerance")->capture_default_str();

    VerifyArgs vf;
    auto* v = app.add_subcommand("verify", "Check closed forms against quadrature, grid search and Monte Carlo");
    v->add_option("--seed", vf.seed, "Random seed")->capture_default_str();
    v->add_option("--trials", vf.trials, "Random instances per check")->capture_default_str();

    SweepArgs sw;
    auto* w = app.add_subcommand("sweep", "Train and test at several superpixel counts; CSV count,rms,train_seconds");
    add_config_options(w, sw.config);
    w->add_option("--data", sw.data, "Training dataset directory")->required();
    w->add_option("--test", sw.test, "Test dataset directory")->required();
    w->add_option("--counts", sw.counts, "Comma-separated superpixel counts")->capture_default_str();
    w->add_option("--out", sw.out, "Also write the CSV to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return kExitConfig;
    }

    if (*s) return guarded([&] { return cmd_synth(synth); });
    if (*t) return guarded([&] { return cmd_train(tr); });
    if (*p) return guarded([&] { return cmd_predict(pr); });
    if (*e) return guarded([&] { return cmd_eval(ev); });
    if (*g) return guarded([&] { return cmd_gradcheck(gc); });
    if (*v) return guarded([&] { return cmd_verify(vf); });
    if (*w) return guarded([&] { return cmd_sweep(sw); });
    return kExitConfig;
}
