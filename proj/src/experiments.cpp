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

#include "maskfed/experiments.hpp"

#include "maskfed/datasets.hpp"
#include "maskfed/error.hpp"
#include "maskfed/io.hpp"
#include "maskfed/random.hpp"

#include <algorithm>

namespace maskfed {

namespace {

std::string r_label(double r) { return "R" + format_double(r); }

void limit(Dataset &d, std::size_t n) {
  if (n != 0 && d.size() > n) d.resize(n);
}

void fit_to_model(Dataset &d, const ModelConfig &m, const char *split) {
  for (auto &s : d) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= m.classes) {
      throw ConfigError(std::string(split) + " label " + std::to_string(s.label) +
                            " exceeds the model's class count",
                        "model.classes");
    }
    if (s.image.rows() != m.image_h || s.image.cols() != m.image_w * m.channels) {
      s.image = resize_bilinear(s.image, m.channels, m.image_h, m.image_w);
    }
  }
}

CsvWriter csv_for(const ExperimentConfig &cfg) { return CsvWriter(cfg.hash(), cfg.seed); }

// Analytic PMF matching a policy's per-epoch update behavior.
UpdateCountPmf analytic_for(const MaskPolicy &p, std::size_t m, std::size_t n) {
  switch (p.kind) {
  case PolicyKind::PerEpochRandom: return update_count_pmf(m, n, p.zero_prob);
  case PolicyKind::LockedRandom: return locked_update_count_pmf(m, n, p.zero_prob);
  default: return update_count_pmf(m, n, 0.0);
  }
}

void write_pmf_csv(const ExperimentConfig &cfg, const std::filesystem::path &path,
                   const std::string &policy, double r, const UpdateCountPmf &analytic,
                   const std::vector<double> &empirical, double tv, const std::string &note) {
  CsvWriter w = csv_for(cfg);
  w.comment("P(f) = C(m,f) (1-R^n)^f (R^n)^(m-f); exponent n*(m-f) (printed n*(1-f) is a typo)");
  if (!note.empty()) w.comment(note);
  w.comment("tv_distance=" + format_double(tv));
  w.header({"f", "analytic_p", "empirical_p", "policy", "R", "m", "n"});
  for (std::size_t f = 0; f < analytic.p.size(); ++f) {
    w.cell(std::uint64_t{f}).cell(analytic.p[f]).cell(empirical[f]).cell(policy).cell(r);
    w.cell(std::uint64_t{analytic.epochs}).cell(std::uint64_t{analytic.clients});
    w.end_row();
  }
  w.save(path);
}

void write_telemetry(const ExperimentConfig &cfg, const TrainRun &run) {
  const UpdateHistogram h = empirical_update_counts_from_run(run.result);
  const auto dir = cfg.out / "train";
  const UpdateCountPmf analytic =
      analytic_for(run.spec.policy, cfg.federation.epochs, cfg.federation.num_clients);
  const auto empirical = h.epoch_pmf();
  write_pmf_csv(cfg, dir / ("update_counts_" + run.spec.label + ".csv"), run.spec.policy.name(),
                run.spec.policy.zero_prob, analytic, empirical,
                total_variation(analytic.p, empirical),
                "empirical_p: fraction of scalar parameters updated in f epochs of this run");

  CsvWriter w = csv_for(cfg);
  w.comment("update counts per round; positional = E_pos entries per epoch");
  w.header({"granularity", "f", "count"});
  for (std::size_t f = 0; f < h.by_step.size(); ++f)
    w.cell("step").cell(std::uint64_t{f}).cell(std::uint64_t{h.by_step[f]}).end_row();
  for (std::size_t f = 0; f < h.by_epoch.size(); ++f)
    w.cell("epoch").cell(std::uint64_t{f}).cell(std::uint64_t{h.by_epoch[f]}).end_row();
  for (std::size_t f = 0; f < h.positional_by_epoch.size(); ++f)
    w.cell("positional").cell(std::uint64_t{f}).cell(std::uint64_t{h.positional_by_epoch[f]}).end_row();
  w.save(dir / ("update_histogram_" + run.spec.label + ".csv"));
}

} // namespace

ExperimentData load_experiment_data(const ExperimentConfig &cfg) {
  const ModelConfig &m = cfg.federation.model;
  const DatasetConfig &d = cfg.dataset;
  ExperimentData out;
  if (d.kind == DatasetKind::Synth) {
    SynthSpec spec = d.synth;
    spec.height = m.image_h;
    spec.width = m.image_w;
    spec.channels = m.channels;
    out.train = synth_dataset(spec);
    spec.first_index = spec.per_class;
    spec.per_class = d.test_per_class;
    out.test = synth_dataset(spec);
    return out;
  }
  if (!d.train_file.empty()) {
    out.train = read_cifar10_file(d.train_file);
    out.test = read_cifar10_file(d.test_file);
  } else {
    out.train = load_cifar10_binary(d.path, Split::Train);
    out.test = load_cifar10_binary(d.path, Split::Test);
  }
  limit(out.train, d.train_limit);
  limit(out.test, d.test_limit);
  if (out.train.size() < cfg.federation.num_clients) {
    throw ConfigError("fewer training records than clients", "dataset.train_limit");
  }
  fit_to_model(out.train, m, "training");
  fit_to_model(out.test, m, "test");
  return out;
}

std::vector<RunSpec> train_runs(const ExperimentConfig &cfg) {
  std::vector<RunSpec> runs;
  bool has_none = false;
  for (const auto &name : cfg.policies) {
    MaskPolicy p = MaskPolicy::parse(name, 0.0);
    if (!p.is_random()) {
      has_none |= p.kind == PolicyKind::NoMask;
      runs.push_back({p.name(), p});
      continue;
    }
    for (double r : cfg.zero_probs) {
      MaskPolicy q = MaskPolicy::parse(name, r);
      q.overrides = cfg.zero_prob_overrides;
      runs.push_back({q.name() + "_" + r_label(r), q});
    }
  }
  if (runs.size() > 1 && !has_none) runs.insert(runs.begin(), {"none", MaskPolicy::none()});
  return runs;
}

std::vector<TrainRun> train_experiment(const ExperimentConfig &cfg) {
  cfg.validate();
  const auto runs = train_runs(cfg);
  const ExperimentData data = load_experiment_data(cfg);
  const auto dir = cfg.out / "train";
  std::vector<TrainRun> out;
  for (const auto &spec : runs) {
    FederationConfig fc = cfg.federation;
    fc.policy = spec.policy;
    fc.root_seed = cfg.seed;
    TrainRun run{spec, run_federation(fc, data.train, data.test)};

    CsvWriter w = csv_for(cfg);
    w.header({"epoch", "step", "policy", "R", "mean_train_loss", "test_accuracy"});
    for (const auto &row : run.result.state.history) {
      w.cell(std::uint64_t{row.epoch}).cell(std::uint64_t{row.step}).cell(spec.policy.name());
      w.cell(spec.policy.zero_prob).cell(row.mean_train_loss).cell(row.test_accuracy);
      w.end_row();
    }
    w.save(dir / ("metrics_" + spec.label + ".csv"));
    write_file_atomic(dir / ("params_" + spec.label + ".bin"),
                      encode_params(run.result.state.params));
    if (cfg.federation.telemetry) write_telemetry(cfg, run);
    out.push_back(std::move(run));
  }
  return out;
}

std::vector<AttackCase> attack_experiment(const ExperimentConfig &cfg) {
  cfg.validate();
  const ModelConfig model =
      cfg.attack.exact ? cfg.federation.model.attack_exact() : cfg.federation.model;
  const ExperimentData data = load_experiment_data(cfg);
  const auto dir = cfg.out / "attack";

  std::vector<std::pair<std::string, MaskPolicy>> cases = {
      {"none", MaskPolicy::none()}, {"fixed_position", MaskPolicy::fixed_position()}};
  for (double r : cfg.zero_probs)
    cases.emplace_back("per_epoch_" + r_label(r), MaskPolicy::per_epoch(r, cfg.zero_prob_overrides));

  CsvWriter w = csv_for(cfg);
  w.comment(std::string("mode=") +
            (cfg.attack.mode == ReconstructionMode::PseudoInverse ? "pseudo_inverse"
                                                                  : "transpose") +
            " batch_size=1 client=0 epoch=0");
  w.header({"seed", "policy", "R", "residual", "mse", "psnr", "degenerate"});
  std::vector<AttackCase> out;
  for (std::uint64_t seed : cfg.attack.seeds) {
    const ParamSet params = init_params(model, seed);
    RandomStream pick = RandomStream(seed).derive("attack");
    const LabeledImage &sample = data.train[pick.below(data.train.size())];
    const std::span<const LabeledImage> batch(&sample, 1);
    const std::string stem = "seed" + std::to_string(seed) + "_";
    write_file_atomic(dir / (stem + "truth.ppm"), encode_ppm(sample.image, model.channels));
    write_file_atomic(dir / (stem + "truth.mfimg"), encode_mfimg(sample.image, model.channels));

    for (const auto &[label, policy] : cases) {
      const ClientUpdate update = client_train_step(params, batch, policy, 0, 0, seed, model);
      AttackCase c{seed, policy.name(), policy.zero_prob,
                   run_attack(update, params, model, sample.image, cfg.attack.mode)};
      w.cell(std::uint64_t{seed}).cell(c.policy).cell(c.zero_prob).cell(c.result.residual_norm);
      w.cell(c.result.mse).cell(c.result.psnr).cell(std::uint64_t{c.result.degenerate ? 1u : 0u});
      w.end_row();
      write_file_atomic(dir / (stem + label + ".ppm"), encode_ppm(c.result.image_hat, model.channels));
      write_file_atomic(dir / (stem + label + ".mfimg"),
                        encode_mfimg(c.result.image_hat, model.channels));
      out.push_back(std::move(c));
    }
  }
  w.save(dir / "report.csv");
  return out;
}

std::vector<AnalysisCase> analyze_experiment(const ExperimentConfig &cfg) {
  cfg.validate();
  const std::size_t m = cfg.federation.epochs, n = cfg.federation.num_clients;
  const auto dir = cfg.out / "analysis";
  std::vector<AnalysisCase> out;
  for (double r : cfg.zero_probs) {
    for (PolicyKind kind : {PolicyKind::PerEpochRandom, PolicyKind::LockedRandom}) {
      const MaskPolicy p = kind == PolicyKind::PerEpochRandom ? MaskPolicy::per_epoch(r)
                                                              : MaskPolicy::locked(r);
      AnalysisCase c{p.name(), r, analytic_for(p, m, n), {}, 0.0};
      c.empirical = simulate_update_counts(kind, m, n, r, cfg.analysis_trials, cfg.seed).pmf;
      c.tv_distance = total_variation(c.analytic.p, c.empirical);
      write_pmf_csv(cfg, dir / ("update_counts_" + c.policy + "_" + r_label(r) + ".csv"),
                    c.policy, r, c.analytic, c.empirical, c.tv_distance,
                    "trials=" + std::to_string(cfg.analysis_trials));
      out.push_back(std::move(c));
    }
  }
  CsvWriter w = csv_for(cfg);
  w.header({"policy", "R", "m", "n", "trials", "tv_distance", "analytic_mean", "analytic_var"});
  for (const auto &c : out) {
    w.cell(c.policy).cell(c.zero_prob).cell(std::uint64_t{m}).cell(std::uint64_t{n});
    w.cell(std::uint64_t{cfg.analysis_trials}).cell(c.tv_distance);
    w.cell(c.analytic.mean()).cell(c.analytic.variance()).end_row();
  }
  w.save(dir / "summary.csv");
  return out;
}

GradcheckOutcome gradcheck_experiment(const ExperimentConfig &cfg) {
  cfg.validate();
  const ModelConfig &model = cfg.federation.model;
  GradcheckOutcome out;
  out.param_count = make_layout(model)->scalar_count();
  if (out.param_count > cfg.gradcheck.max_params) {
    throw ConfigError("model has " + std::to_string(out.param_count) +
                          " parameters, above gradcheck.max_params = " +
                          std::to_string(cfg.gradcheck.max_params),
                      "model");
  }
  const ParamSet params = init_params(model, cfg.seed);
  RandomStream rng = RandomStream(cfg.seed).derive("gradcheck");
  Dataset batch;
  for (std::size_t i = 0; i < cfg.gradcheck.batch; ++i) {
    Matrix img(model.image_h, model.image_w * model.channels);
    for (double &v : img.data()) v = rng.uniform();
    batch.push_back({std::move(img), static_cast<int>(rng.below(model.classes))});
  }
  out.report = grad_check(params, batch, model,
                          GradCheckOptions{cfg.gradcheck.fd_step, cfg.gradcheck.sabotage});
  out.passed = out.report.max_rel_error < cfg.gradcheck.tolerance;
  return out;
}

} // namespace maskfed
