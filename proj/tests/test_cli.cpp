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

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "nfield/checkpoint.hpp"
#include "nfield/io.hpp"

using namespace nfield;
namespace fs = std::filesystem;

namespace {

const std::string kSmall =
    " --set scene.height=32 --set scene.width=32 --set seg.target_n=16 --set unary.hidden=8,4,4";

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("nfield_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run(const std::string& args, const fs::path& log = {}) {
    std::string cmd = std::string(NFIELD_CLI) + " " + args;
    cmd += log.empty() ? " > /dev/null 2>&1" : " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t line_count(const std::string& text) {
    std::istringstream in(text);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) n += !line.empty();
    return n;
}

/// Checkpoint text without its output_dir line.
std::string without_output_dir(const std::string& text) {
    std::istringstream in(text);
    std::string out;
    for (std::string line; std::getline(in, line);)
        if (line.rfind("CONFIG output_dir ", 0) != 0) out += line + "\n";
    return out;
}

/// Two tiny scenes under dir/data.
fs::path small_dataset(const fs::path& dir) {
    const fs::path data = dir / "data";
    EXPECT_EQ(run("synth --count 2 --out " + data.string() + kSmall), 0);
    return data;
}

}  // namespace

TEST(Cli, HelpDocumentsSubcommandFlags) {
    const fs::path dir = scratch("help");
    ASSERT_EQ(run("train --help", dir / "help.txt"), 0);
    const std::string help = io::read_file(dir / "help.txt");
    for (const char* flag : {"--data", "--out", "--unary-only", "--resume", "--checkpoint-every", "--config", "--set"})
        EXPECT_NE(help.find(flag), std::string::npos) << flag;
    EXPECT_EQ(run("no-such-command"), 2);
}

TEST(Cli, SynthWritesManifestAndIsReproducible) {
    const fs::path dir = scratch("synth");
    const fs::path a = small_dataset(dir);
    const fs::path b = dir / "again";
    ASSERT_EQ(run("synth --count 2 --out " + b.string() + kSmall), 0);
    const std::string manifest = io::read_file(a / io::kManifestName);
    EXPECT_EQ(line_count(manifest), 3u);
    EXPECT_EQ(manifest, io::read_file(b / io::kManifestName));
    for (const auto& e : io::decode_manifest(manifest)) {
        EXPECT_EQ(io::read_file(a / e.image), io::read_file(b / e.image));
        EXPECT_EQ(io::read_file(a / e.depth), io::read_file(b / e.depth));
    }
}

TEST(Cli, BadConfigKeyFailsWithoutWriting) {
    const fs::path dir = scratch("badkey");
    EXPECT_EQ(run("synth --count 2 --out " + (dir / "data").string() + " --set scene.bogus=1"), 2);
    EXPECT_FALSE(fs::exists(dir / "data"));
    EXPECT_EQ(run("synth --count 2 --out " + (dir / "data").string() + " --set seg.target_n=-4"), 2);
    EXPECT_FALSE(fs::exists(dir / "data"));
    EXPECT_EQ(run("synth --config " + (dir / "missing.conf").string()), 3);
}

TEST(Cli, TrainWritesHistoryAndResumesExactly) {
    const fs::path dir = scratch("train");
    const fs::path data = small_dataset(dir);
    const fs::path out = dir / "run";
    ASSERT_EQ(run("train --data " + data.string() + " --out " + out.string() + " --set train.epochs=1" + kSmall), 0);
    const std::string history = io::read_file(out / "history.csv");
    EXPECT_EQ(history.rfind("epoch,lr,mean_nll\n", 0), 0u);
    EXPECT_EQ(line_count(history), 2u);

    const std::string before = io::read_file(out / "checkpoint.nfck");
    ASSERT_EQ(run("train --data " + data.string() + " --out " + out.string() + " --resume " +
                  (out / "checkpoint.nfck").string()),
              0);
    EXPECT_EQ(io::read_file(out / "checkpoint.nfck"), before);
    EXPECT_EQ(io::read_file(out / "history.csv"), history);

    ASSERT_EQ(run("train --data " + data.string() + " --out " + out.string() + " --resume " +
                  (out / "checkpoint.nfck").string() + " --set train.epochs=2"),
              0);
    EXPECT_EQ(line_count(io::read_file(out / "history.csv")), 3u);
    EXPECT_EQ(load_checkpoint(out / "checkpoint.nfck").train_state().epoch, 2);
}

TEST(Cli, ResumedRunMatchesUninterruptedRun) {
    const fs::path dir = scratch("resume");
    const fs::path data = small_dataset(dir);
    const std::string base = " --data " + data.string() + kSmall;
    ASSERT_EQ(run("train --out " + (dir / "full").string() + " --set train.epochs=3" + base), 0);
    ASSERT_EQ(run("train --out " + (dir / "part").string() + " --set train.epochs=1" + base), 0);
    ASSERT_EQ(run("train --data " + data.string() + " --out " + (dir / "part").string() + " --set train.epochs=3" +
                  " --resume " + (dir / "part" / "checkpoint.nfck").string()),
              0);
    EXPECT_EQ(without_output_dir(io::read_file(dir / "full" / "checkpoint.nfck")),
              without_output_dir(io::read_file(dir / "part" / "checkpoint.nfck")));
    EXPECT_EQ(io::read_file(dir / "full" / "history.csv"), io::read_file(dir / "part" / "history.csv"));
}

TEST(Cli, UnaryOnlyKeepsBetaZero) {
    const fs::path dir = scratch("unary");
    const fs::path data = small_dataset(dir);
    ASSERT_EQ(run("train --unary-only --data " + data.string() + " --out " + (dir / "run").string() +
                  " --set train.epochs=2" + kSmall),
              0);
    const Checkpoint ck = load_checkpoint(dir / "run" / "checkpoint.nfck");
    EXPECT_EQ(ck.model.beta.beta().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Cli, PredictAndEval) {
    const fs::path dir = scratch("predict");
    const fs::path data = small_dataset(dir);
    const fs::path ck = dir / "run" / "checkpoint.nfck";
    ASSERT_EQ(run("train --data " + data.string() + " --out " + (dir / "run").string() + " --set train.epochs=1" +
                  kSmall),
              0);
    const auto entries = io::decode_manifest(io::read_file(data / io::kManifestName));
    const std::string image = (data / entries.front().image).string();
    ASSERT_EQ(run("predict --checkpoint " + ck.string() + " --image " + image + " --out " + (dir / "a.depth").string()),
              0);
    ASSERT_EQ(run("predict --checkpoint " + ck.string() + " --image " + image + " --out " + (dir / "b.depth").string()),
              0);
    const std::string a = io::read_file(dir / "a.depth");
    EXPECT_EQ(a, io::read_file(dir / "b.depth"));
    const DepthMap d = io::decode_depth(a);
    EXPECT_EQ(d.rows, 32);
    EXPECT_EQ(d.cols, 32);
    for (double v : d.data) EXPECT_TRUE(std::isfinite(v) && v > 0);

    ASSERT_EQ(run("eval --checkpoint " + ck.string() + " --data " + data.string() + " --csv " +
                  (dir / "m.csv").string()),
              0);
    const std::string csv = io::read_file(dir / "m.csv");
    EXPECT_EQ(csv.rfind("subset,rel,rms,log10,delta1,delta2,delta3,pixels\nC1,", 0), 0u);
    EXPECT_NE(csv.find("\nC2,"), std::string::npos);
}

TEST(Cli, EvalGroundTruthIsPerfectAndEmptyMaskFails) {
    const fs::path dir = scratch("eval");
    const fs::path data = small_dataset(dir);
    ASSERT_EQ(run("eval --ground-truth-as-prediction --data " + data.string() + " --csv " + (dir / "m.csv").string()),
              0);
    std::istringstream in(io::read_file(dir / "m.csv"));
    std::string line;
    std::getline(in, line);
    for (const char* subset : {"C1", "C2"}) {
        ASSERT_TRUE(std::getline(in, line));
        EXPECT_EQ(line.rfind(std::string(subset) + ",0,0,0,100,100,100,", 0), 0u) << line;
    }
    EXPECT_EQ(run("eval --ground-truth-as-prediction --c1-cap 0.5 --data " + data.string()), 2);
    EXPECT_EQ(run("eval --ground-truth-as-prediction --data " + (dir / "nowhere").string()), 3);
}

TEST(Cli, GradcheckAndVerifyPass) {
    const fs::path dir = scratch("gradcheck");
    ASSERT_EQ(run("gradcheck --seed 3 --n 10 --K 3", dir / "g.txt"), 0);
    const std::string out = io::read_file(dir / "g.txt");
    EXPECT_EQ(out.find("FAIL"), std::string::npos);
    EXPECT_NE(out.find("PASS grad_beta"), std::string::npos);
    EXPECT_EQ(run("gradcheck --tol 1e-300"), 4);
    EXPECT_EQ(run("verify --trials 3"), 0);
}

TEST(Cli, SweepSingleCountAndRejectsDuplicates) {
    const fs::path dir = scratch("sweep");
    const fs::path data = small_dataset(dir);
    const std::string base = "sweep --data " + data.string() + " --test " + data.string() +
                             " --set train.epochs=1" + kSmall;
    ASSERT_EQ(run(base + " --counts 12 --out " + (dir / "s.csv").string()), 0);
    const std::string csv = io::read_file(dir / "s.csv");
    EXPECT_EQ(csv.rfind("count,rms,train_seconds\n12,", 0), 0u);
    EXPECT_EQ(line_count(csv), 2u);
    EXPECT_EQ(run(base + " --counts 12,12"), 2);
    EXPECT_EQ(run(base + " --counts 0"), 2);
}
