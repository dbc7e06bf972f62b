/*
 * Copyright 2026 The maskfed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "helpers.hpp"

#include "maskfed/error.hpp"
#include "maskfed/experiments.hpp"
#include "maskfed/io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <map>
#include <sstream>
#include <sys/wait.h>

using namespace maskfed;
namespace fs = std::filesystem;

namespace {

const std::string kCli = MASKFED_CLI_PATH;
const fs::path kConfigs = MASKFED_CONFIG_DIR;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string &args, const fs::path &scratch) {
  const fs::path out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  const std::string cmd = kCli + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

// Relative path -> contents for every regular file under dir.
std::map<std::string, std::string> snapshot(const fs::path &dir) {
  std::map<std::string, std::string> files;
  for (const auto &e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return files;
}

std::size_t line_count(const std::string &s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

ExperimentConfig small_config(const fs::path &out) {
  return resolve_config({{"out", out.string()},
                         {"model.image_h", "8"},
                         {"model.image_w", "8"},
                         {"model.embed_dim", "8"},
                         {"model.mlp_hidden", "8"},
                         {"federation.clients", "3"},
                         {"federation.epochs", "2"},
                         {"federation.batch_size", "4"},
                         {"federation.learning_rate", "0.01"},
                         {"federation.zero_prob", "0.5"},
                         {"dataset.per_class", "3"},
                         {"dataset.test_per_class", "2"}});
}

} // namespace

TEST_CASE("zero epochs produce a header-only metrics file") {
  const fs::path dir = testutil::scratch_dir("exp_zero");
  ExperimentConfig cfg = small_config(dir);
  cfg.federation.epochs = 0;
  const auto runs = train_experiment(cfg);
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].spec.label == "none");
  CHECK(runs[1].spec.label == "per_epoch_R0.5");
  const std::string csv = read_file(dir / "train" / "metrics_none.csv");
  CHECK(line_count(csv) == 2);
  CHECK(csv.find("epoch,step,policy,R,mean_train_loss,test_accuracy\n") != std::string::npos);
  CHECK(csv.rfind("# config_hash=" + hex64(cfg.hash()), 0) == 0);
}

TEST_CASE("train runs expand random policies over every zero probability") {
  ExperimentConfig cfg = small_config("unused");
  cfg.policies = {"locked", "fixed_position"};
  cfg.zero_probs = {0.2, 0.8};
  std::vector<std::string> labels;
  for (const auto &r : train_runs(cfg)) labels.push_back(r.label);
  CHECK(labels == std::vector<std::string>{"none", "locked_R0.2", "locked_R0.8", "fixed_position"});
  cfg.policies = {"per_epoch"};
  cfg.zero_probs = {0.5};
  CHECK(train_runs(cfg).size() == 1);
}

TEST_CASE("experiment data splits are disjoint draws of the same classes") {
  const ExperimentConfig cfg = small_config("unused");
  const ExperimentData d = load_experiment_data(cfg);
  CHECK(d.train.size() == 12);
  CHECK(d.test.size() == 8);
  for (const auto &t : d.test)
    for (const auto &s : d.train) REQUIRE_FALSE(t.image == s.image);
}

TEST_CASE("gradcheck refuses oversized models") {
  ExperimentConfig cfg = small_config("unused");
  cfg.gradcheck.max_params = 10;
  try {
    gradcheck_experiment(cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(e.key() == "model");
  }
  cfg.gradcheck.max_params = 100000;
  cfg.gradcheck.fd_step = 1e-4;
  const GradcheckOutcome ok = gradcheck_experiment(cfg);
  CHECK(ok.passed);
  CHECK(ok.param_count == make_layout(cfg.federation.model)->scalar_count());
}

TEST_CASE("CLI train is byte-for-byte reproducible") {
  const fs::path dir = testutil::scratch_dir("cli_train");
  const std::string args = "train --config " + (kConfigs / "desk_train.conf").string() +
                           " --epochs 2 --set dataset.per_class=20";
  CHECK(run_cli(args + " --out " + (dir / "a").string(), dir).code == 0);
  CHECK(run_cli(args + " --out " + (dir / "b").string(), dir).code == 0);
  const auto a = snapshot(dir / "a"), b = snapshot(dir / "b");
  CHECK(a.size() == 12);
  CHECK(a == b);
  CHECK(a.count("train/update_histogram_fixed_position.csv") == 1);
  CHECK(a.count("train/params_per_epoch_R0.5.bin") == 1);
}

TEST_CASE("CLI attack writes one row per seed and policy, reproducibly") {
  const fs::path dir = testutil::scratch_dir("cli_attack");
  const std::string args = "attack --config " + (kConfigs / "attack.conf").string();
  const CliResult r = run_cli(args + " --out " + (dir / "a").string(), dir);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("fixed_position R=0: median psnr=") != std::string::npos);
  CHECK(run_cli(args + " --out " + (dir / "b").string(), dir).code == 0);
  const auto a = snapshot(dir / "a"), b = snapshot(dir / "b");
  CHECK(a == b);
  const std::string report = a.at("attack/report.csv");
  // 2 comment lines, a header and 10 seeds x 5 cases.
  CHECK(line_count(report) == 3 + 50);
  CHECK(a.count("attack/seed3_truth.ppm") == 1);
  CHECK(a.count("attack/seed9_per_epoch_R0.8.mfimg") == 1);
  const RawImage truth = decode_mfimg(a.at("attack/seed0_truth.mfimg"));
  CHECK(truth.channels == 3);
  CHECK(truth.image.rows() == 16);
}

TEST_CASE("CLI analyze writes every distribution, reproducibly") {
  const fs::path dir = testutil::scratch_dir("cli_analyze");
  const std::string args = "analyze --config " + (kConfigs / "analyze.conf").string() +
                           " --set analysis.trials=20000";
  CHECK(run_cli(args + " --out " + (dir / "a").string(), dir).code == 0);
  CHECK(run_cli(args + " --out " + (dir / "b").string(), dir).code == 0);
  const auto a = snapshot(dir / "a"), b = snapshot(dir / "b");
  CHECK(a == b);
  CHECK(a.size() == 7);
  const std::string pe = a.at("analysis/update_counts_per_epoch_R0.5.csv");
  CHECK(pe.find("f,analytic_p,empirical_p,policy,R,m,n\n") != std::string::npos);
  CHECK(line_count(a.at("analysis/summary.csv")) == 2 + 6);
}

TEST_CASE("CLI exit codes") {
  const fs::path dir = testutil::scratch_dir("cli_codes");
  const std::string out = " --out " + (dir / "o").string();
  CHECK(run_cli("", dir).code == 2);
  CHECK(run_cli("train --bogus" + out, dir).code == 2);
  const CliResult unknown = run_cli("train --set federation.nope=1" + out, dir);
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("federation.nope") != std::string::npos);
  CHECK(run_cli("analyze --set analysis.trials=0" + out, dir).code == 2);
  CHECK(run_cli("train --config " + (dir / "missing.conf").string() + out, dir).code == 3);

  const std::string gc = "gradcheck --config " + (kConfigs / "gradcheck.conf").string() + out;
  const CliResult good = run_cli(gc, dir);
  CHECK(good.code == 0);
  CHECK(good.out.find("gradcheck passed") != std::string::npos);
  const CliResult bad = run_cli(gc + " --set gradcheck.sabotage=block1.mlp_b2", dir);
  CHECK(bad.code == 1);
  CHECK(bad.err.find("block1.mlp_b2") != std::string::npos);
  CHECK(run_cli(gc + " --set gradcheck.max_params=5", dir).code == 2);
}
