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

#include "maskfed/config.hpp"

#include "maskfed/error.hpp"
#include "maskfed/io.hpp"
#include "maskfed/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>

namespace maskfed {

namespace {

constexpr std::string_view kOverridePrefix = "federation.zero_prob_overrides.";

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = s.find(',', start);
    out.push_back(trim(s.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::uint64_t to_u64(std::string_view v, const std::string &key) {
  v = trim(v);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(v) + "'", key);
  }
  return out;
}

double to_double(std::string_view v, const std::string &key) {
  v = trim(v);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError("expected a finite number, got '" + std::string(v) + "'", key);
  }
  return out;
}

bool to_bool(std::string_view v, const std::string &key) {
  v = trim(v);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("expected true or false, got '" + std::string(v) + "'", key);
}

template <class T, class F> std::string join(const std::vector<T> &xs, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += fmt(xs[i]);
  }
  return out;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

struct Field {
  std::string key;
  std::function<void(ExperimentConfig &, std::string_view, const std::string &)> set;
  std::function<std::string(const ExperimentConfig &)> get;
};

template <class M> Field size_field(std::string key, M member) {
  return {std::move(key),
          [member](ExperimentConfig &c, std::string_view v, const std::string &k) {
            std::invoke(member, c) = static_cast<std::size_t>(to_u64(v, k));
          },
          [member](const ExperimentConfig &c) {
            return std::to_string(std::invoke(member, c));
          }};
}

template <class M> Field double_field(std::string key, M member) {
  return {std::move(key),
          [member](ExperimentConfig &c, std::string_view v, const std::string &k) {
            std::invoke(member, c) = to_double(v, k);
          },
          [member](const ExperimentConfig &c) {
            return format_double(std::invoke(member, c));
          }};
}

template <class M> Field bool_field(std::string key, M member) {
  return {std::move(key),
          [member](ExperimentConfig &c, std::string_view v, const std::string &k) {
            std::invoke(member, c) = to_bool(v, k);
          },
          [member](const ExperimentConfig &c) {
            return bool_str(std::invoke(member, c));
          }};
}

template <class M> Field path_field(std::string key, M member) {
  return {std::move(key),
          [member](ExperimentConfig &c, std::string_view v, const std::string &) {
            std::invoke(member, c) = std::filesystem::path(std::string(trim(v)));
          },
          [member](const ExperimentConfig &c) {
            return std::invoke(member, c).generic_string();
          }};
}

// Generic accessor usable on both const and mutable configs.
#define MF_REF(expr) [](auto &c) -> auto & { return expr; }

const std::vector<Field> &fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> t;
    t.push_back({"seed",
                 [](ExperimentConfig &c, std::string_view v, const std::string &k) {
                   c.seed = to_u64(v, k);
                 },
                 [](const ExperimentConfig &c) { return std::to_string(c.seed); }});
    t.push_back(path_field("out", MF_REF(c.out)));

    t.push_back(size_field("model.image_h", MF_REF(c.federation.model.image_h)));
    t.push_back(size_field("model.image_w", MF_REF(c.federation.model.image_w)));
    t.push_back(size_field("model.channels", MF_REF(c.federation.model.channels)));
    t.push_back(size_field("model.patch", MF_REF(c.federation.model.patch)));
    t.push_back(size_field("model.embed_dim", MF_REF(c.federation.model.embed_dim)));
    t.push_back(size_field("model.heads", MF_REF(c.federation.model.heads)));
    t.push_back(size_field("model.blocks", MF_REF(c.federation.model.blocks)));
    t.push_back(size_field("model.mlp_hidden", MF_REF(c.federation.model.mlp_hidden)));
    t.push_back(size_field("model.classes", MF_REF(c.federation.model.classes)));
    t.push_back(double_field("model.eps", MF_REF(c.federation.model.eps)));
    t.push_back(bool_field("model.first_block_pre_ln_identity",
                           MF_REF(c.federation.model.first_block_pre_ln_identity)));
    t.push_back(bool_field("model.first_block_attention_residual",
                           MF_REF(c.federation.model.first_block_attention_residual)));

    t.push_back(size_field("federation.clients", MF_REF(c.federation.num_clients)));
    t.push_back(size_field("federation.epochs", MF_REF(c.federation.epochs)));
    t.push_back(size_field("federation.batch_size", MF_REF(c.federation.batch_size)));
    t.push_back(double_field("federation.learning_rate", MF_REF(c.federation.learning_rate)));
    t.push_back(bool_field("federation.telemetry", MF_REF(c.federation.telemetry)));
    t.push_back({"federation.policy",
                 [](ExperimentConfig &c, std::string_view v, const std::string &) {
                   c.policies.clear();
                   for (auto s : split_list(v)) c.policies.emplace_back(s);
                 },
                 [](const ExperimentConfig &c) {
                   return join(c.policies, [](const std::string &s) { return s; });
                 }});
    t.push_back({"federation.zero_prob",
                 [](ExperimentConfig &c, std::string_view v, const std::string &k) {
                   c.zero_probs.clear();
                   for (auto s : split_list(v)) c.zero_probs.push_back(to_double(s, k));
                 },
                 [](const ExperimentConfig &c) { return join(c.zero_probs, format_double); }});

    t.push_back({"dataset.kind",
                 [](ExperimentConfig &c, std::string_view v, const std::string &k) {
                   v = trim(v);
                   if (v == "synth") c.dataset.kind = DatasetKind::Synth;
                   else if (v == "cifar10") c.dataset.kind = DatasetKind::Cifar10;
                   else throw ConfigError("expected synth or cifar10, got '" + std::string(v) + "'", k);
                 },
                 [](const ExperimentConfig &c) {
                   return std::string(c.dataset.kind == DatasetKind::Synth ? "synth" : "cifar10");
                 }});
    t.push_back(size_field("dataset.classes", MF_REF(c.dataset.synth.classes)));
    t.push_back(size_field("dataset.per_class", MF_REF(c.dataset.synth.per_class)));
    t.push_back(size_field("dataset.test_per_class", MF_REF(c.dataset.test_per_class)));
    t.push_back(double_field("dataset.noise", MF_REF(c.dataset.synth.noise)));
    t.push_back({"dataset.seed",
                 [](ExperimentConfig &c, std::string_view v, const std::string &k) {
                   c.dataset.synth.seed = to_u64(v, k);
                 },
                 [](const ExperimentConfig &c) { return std::to_string(c.dataset.synth.seed); }});
    t.push_back(path_field("dataset.path", MF_REF(c.dataset.path)));
    t.push_back(path_field("dataset.train_file", MF_REF(c.dataset.train_file)));
    t.push_back(path_field("dataset.test_file", MF_REF(c.dataset.test_file)));
    t.push_back(size_field("dataset.train_limit", MF_REF(c.dataset.train_limit)));
    t.push_back(size_field("dataset.test_limit", MF_REF(c.dataset.test_limit)));

    t.push_back({"attack.mode",
                 [](ExperimentConfig &c, std::string_view v, const std::string &k) {
                   v = trim(v);
                   if (v == "pseudo_inverse") c.attack.mode = ReconstructionMode::PseudoInverse;
                   else if (v == "transpose") c.attack.mode = ReconstructionMode::Transpose;
                   else
                     throw ConfigError(
                         "expected pseudo_inverse or transpose, got '" + std::string(v) + "'", k);
                 },
                 [](const ExperimentConfig &c) {
                   return std::string(c.attack.mode == ReconstructionMode::PseudoInverse
                                          ? "pseudo_inverse"
                                          : "transpose");
                 }});
    t.push_back({"attack.seeds",
                 [](ExperimentConfig &c, std::string_view v, const std::string &k) {
                   c.attack.seeds.clear();
                   for (auto s : split_list(v)) c.attack.seeds.push_back(to_u64(s, k));
                 },
                 [](const ExperimentConfig &c) {
                   return join(c.attack.seeds, [](std::uint64_t s) { return std::to_string(s); });
                 }});
    t.push_back(bool_field("attack.exact", MF_REF(c.attack.exact)));

    t.push_back(size_field("analysis.trials", MF_REF(c.analysis_trials)));

    t.push_back(double_field("gradcheck.fd_step", MF_REF(c.gradcheck.fd_step)));
    t.push_back(double_field("gradcheck.tolerance", MF_REF(c.gradcheck.tolerance)));
    t.push_back(size_field("gradcheck.batch", MF_REF(c.gradcheck.batch)));
    t.push_back(size_field("gradcheck.max_params", MF_REF(c.gradcheck.max_params)));
    t.push_back({"gradcheck.sabotage",
                 [](ExperimentConfig &c, std::string_view v, const std::string &) {
                   c.gradcheck.sabotage = std::string(trim(v));
                 },
                 [](const ExperimentConfig &c) { return c.gradcheck.sabotage; }});
    return t;
  }();
  return table;
}

#undef MF_REF

void apply(ExperimentConfig &cfg, const ConfigEntries &entries) {
  for (const auto &[key, value] : entries) {
    if (key.starts_with(kOverridePrefix)) {
      const std::string entry = key.substr(kOverridePrefix.size());
      if (entry.empty()) throw ConfigError("missing parameter entry name", key);
      cfg.zero_prob_overrides[entry] = to_double(value, key);
      continue;
    }
    const auto &t = fields();
    auto it = std::find_if(t.begin(), t.end(), [&](const Field &f) { return f.key == key; });
    if (it == t.end()) throw ConfigError("unknown configuration key", key);
    it->set(cfg, value, key);
  }
}

} // namespace

std::string ExperimentConfig::canonical() const {
  std::string out;
  for (const auto &f : fields()) out += f.key + "=" + f.get(*this) + "\n";
  for (const auto &[entry, r] : zero_prob_overrides)
    out += std::string(kOverridePrefix) + entry + "=" + format_double(r) + "\n";
  return out;
}

std::uint64_t ExperimentConfig::hash() const {
  ExperimentConfig c = *this;
  c.out.clear();
  return fnv1a64(c.canonical());
}

void ExperimentConfig::validate() const {
  FederationConfig fed = federation;
  fed.policy = MaskPolicy::none();
  fed.validate();
  const auto layout = make_layout(federation.model);

  if (policies.empty()) throw ConfigError("policy list is empty", "federation.policy");
  bool any_random = false;
  for (const auto &name : policies) {
    const MaskPolicy p = MaskPolicy::parse(name, 0.0);
    any_random |= p.is_random();
    p.validate(layout.get());
  }
  if (any_random && zero_probs.empty()) {
    throw ConfigError("a random policy needs at least one zero probability",
                      "federation.zero_prob");
  }
  for (double r : zero_probs) MaskPolicy::per_epoch(r, zero_prob_overrides).validate(layout.get());

  const auto &d = dataset;
  if (d.kind == DatasetKind::Synth) {
    if (d.synth.classes < 2) throw ConfigError("need at least two classes", "dataset.classes");
    if (d.synth.classes > federation.model.classes) {
      throw ConfigError("more classes than the model has outputs (" +
                            std::to_string(federation.model.classes) + ")",
                        "dataset.classes");
    }
    if (d.synth.classes * d.synth.per_class < federation.num_clients) {
      throw ConfigError("fewer training samples than clients", "dataset.per_class");
    }
    if (d.test_per_class < 1) throw ConfigError("must be at least 1", "dataset.test_per_class");
    if (!(d.synth.noise >= 0.0 && d.synth.noise <= 1.0)) {
      throw ConfigError("must lie in [0, 1]", "dataset.noise");
    }
  } else {
    const bool files = !d.train_file.empty() || !d.test_file.empty();
    if (files && (d.train_file.empty() || d.test_file.empty())) {
      throw ConfigError("train_file and test_file must be given together",
                        d.train_file.empty() ? "dataset.train_file" : "dataset.test_file");
    }
    if (!files && d.path.empty()) {
      throw ConfigError("cifar10 needs dataset.path or dataset.train_file/test_file",
                        "dataset.path");
    }
    if (federation.model.classes < 10) {
      throw ConfigError("cifar10 has 10 classes", "model.classes");
    }
    if (federation.model.channels != 3) throw ConfigError("cifar10 images have 3 channels", "model.channels");
    if (d.train_limit != 0 && d.train_limit < federation.num_clients) {
      throw ConfigError("fewer training samples than clients", "dataset.train_limit");
    }
  }

  if (attack.seeds.empty()) throw ConfigError("need at least one seed", "attack.seeds");
  if (analysis_trials < 1) throw ConfigError("must be at least 1", "analysis.trials");
  if (!(gradcheck.fd_step > 0.0)) throw ConfigError("must be positive", "gradcheck.fd_step");
  if (!(gradcheck.tolerance > 0.0)) throw ConfigError("must be positive", "gradcheck.tolerance");
  if (gradcheck.batch < 1) throw ConfigError("must be at least 1", "gradcheck.batch");
  if (!gradcheck.sabotage.empty() && !layout->contains(gradcheck.sabotage)) {
    throw ConfigError("no parameter entry named '" + gradcheck.sabotage + "'",
                      "gradcheck.sabotage");
  }
}

ConfigEntries parse_config_text(std::string_view text, std::string_view source) {
  ConfigEntries out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key = value", where);
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("empty key", where);
    if (!out.emplace(key, std::string(trim(line.substr(eq + 1)))).second) {
      throw ConfigError("key repeated at " + where, key);
    }
  }
  return out;
}

ConfigEntries read_config_file(const std::filesystem::path &path) {
  return parse_config_text(read_file(path), path.string());
}

ExperimentConfig resolve_config(const ConfigEntries &file, const ConfigEntries &flags) {
  ExperimentConfig cfg;
  apply(cfg, file);
  apply(cfg, flags);
  cfg.validate();
  return cfg;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto &f : fields()) keys.push_back(f.key);
  std::sort(keys.begin(), keys.end());
  return keys;
}

} // namespace maskfed
