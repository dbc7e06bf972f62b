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

#include "maskfed/analysis.hpp"
#include "maskfed/april.hpp"
#include "maskfed/config.hpp"
#include "maskfed/datasets.hpp"
#include "maskfed/error.hpp"
#include "maskfed/experiments.hpp"
#include "maskfed/federation.hpp"
#include "maskfed/masking.hpp"
#include "maskfed/vit.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

namespace py = pybind11;
using namespace maskfed;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Matrix &m) {
  Array out({m.rows(), m.cols()});
  std::memcpy(out.mutable_data(), m.data().data(), m.size() * sizeof(double));
  return out;
}

Matrix from_numpy(const Array &a, const char *what) {
  if (a.ndim() != 2) {
    throw ContractError(std::string(what) + ": expected a 2-D array, got " +
                        std::to_string(a.ndim()) + "-D");
  }
  const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
  return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

py::dict to_dict(const NamedMatrices &t) {
  py::dict d;
  for (std::size_t i = 0; i < t.count(); ++i) d[py::str(t.name(i))] = to_numpy(t[i]);
  return d;
}

ParamSet params_from_dict(const py::dict &d, const ModelConfig &cfg) {
  ParamSet p(make_layout(cfg));
  if (d.size() != p.count()) {
    throw ContractError("params: expected " + std::to_string(p.count()) + " entries, got " +
                        std::to_string(d.size()));
  }
  for (std::size_t i = 0; i < p.count(); ++i) {
    const std::string &name = p.name(i);
    if (!d.contains(name)) throw ContractError("params: missing entry " + name);
    Matrix m = from_numpy(d[py::str(name)].cast<Array>(), name.c_str());
    if (!m.same_shape(p[i])) {
      throw ContractError("params: " + name + " is " + m.shape_str() + ", expected " +
                          p[i].shape_str());
    }
    p[i] = std::move(m);
  }
  return p;
}

// images: N x H x (W*C); labels: N integers.
Dataset dataset_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast> &images,
                           const std::vector<int> &labels) {
  if (images.ndim() != 3) throw ContractError("images: expected a 3-D array");
  const auto n = static_cast<std::size_t>(images.shape(0));
  if (labels.size() != n) throw ContractError("labels: length differs from image count");
  const auto h = static_cast<std::size_t>(images.shape(1)),
             w = static_cast<std::size_t>(images.shape(2));
  Dataset out;
  for (std::size_t i = 0; i < n; ++i) {
    const double *p = images.data() + i * h * w;
    out.push_back({Matrix(h, w, std::vector<double>(p, p + h * w)), labels[i]});
  }
  return out;
}

py::tuple dataset_to_numpy(const Dataset &data) {
  const std::size_t n = data.size();
  const std::size_t h = n ? data[0].image.rows() : 0, w = n ? data[0].image.cols() : 0;
  py::array_t<double> images({n, h, w});
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(images.mutable_data() + i * h * w, data[i].image.data().data(),
                h * w * sizeof(double));
    labels.push_back(data[i].label);
  }
  return py::make_tuple(images, labels);
}

// Python values become config strings; sequences are comma-joined.
ConfigEntries entries_from_dict(const py::dict &d) {
  ConfigEntries out;
  for (const auto &[k, v] : d) {
    std::string value;
    if (py::isinstance<py::bool_>(v)) {
      value = v.cast<bool>() ? "true" : "false";
    } else if (py::isinstance<py::list>(v) || py::isinstance<py::tuple>(v)) {
      for (const auto &item : v) {
        if (!value.empty()) value += ",";
        value += py::str(item).cast<std::string>();
      }
    } else {
      value = py::str(v).cast<std::string>();
    }
    out[py::str(k).cast<std::string>()] = value;
  }
  return out;
}

ExperimentConfig config_from(const py::dict &d) { return resolve_config(entries_from_dict(d)); }

py::list history_to_list(const std::vector<EpochMetrics> &h) {
  py::list out;
  for (const auto &e : h) {
    py::dict row;
    row["epoch"] = e.epoch;
    row["step"] = e.step;
    row["mean_train_loss"] = e.mean_train_loss;
    row["test_accuracy"] = e.test_accuracy;
    out.append(row);
  }
  return out;
}

ReconstructionMode parse_mode(const std::string &s) {
  if (s == "pseudo_inverse") return ReconstructionMode::PseudoInverse;
  if (s == "transpose") return ReconstructionMode::Transpose;
  throw ConfigError("expected pseudo_inverse or transpose, got '" + s + "'", "attack.mode");
}

PolicyKind parse_kind(const std::string &s) { return MaskPolicy::parse(s, 0.0).kind; }

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Federated ViT training with random gradient masks";

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("image_h", &ModelConfig::image_h)
      .def_readwrite("image_w", &ModelConfig::image_w)
      .def_readwrite("channels", &ModelConfig::channels)
      .def_readwrite("patch", &ModelConfig::patch)
      .def_readwrite("embed_dim", &ModelConfig::embed_dim)
      .def_readwrite("heads", &ModelConfig::heads)
      .def_readwrite("blocks", &ModelConfig::blocks)
      .def_readwrite("mlp_hidden", &ModelConfig::mlp_hidden)
      .def_readwrite("classes", &ModelConfig::classes)
      .def_readwrite("eps", &ModelConfig::eps)
      .def_readwrite("first_block_pre_ln_identity", &ModelConfig::first_block_pre_ln_identity)
      .def_readwrite("first_block_attention_residual",
                     &ModelConfig::first_block_attention_residual)
      .def_property_readonly("num_patches", &ModelConfig::num_patches)
      .def_property_readonly("tokens", &ModelConfig::tokens)
      .def_property_readonly("patch_dim", &ModelConfig::patch_dim)
      .def("attack_exact", &ModelConfig::attack_exact)
      .def("validate", &ModelConfig::validate)
      .def("__repr__", [](const ModelConfig &c) {
        return "ModelConfig(" + std::to_string(c.image_h) + "x" + std::to_string(c.image_w) +
               "x" + std::to_string(c.channels) + ", patch=" + std::to_string(c.patch) +
               ", embed_dim=" + std::to_string(c.embed_dim) + ")";
      });

  m.def("init_params", [](const ModelConfig &cfg, std::uint64_t seed) {
    return to_dict(init_params(cfg, seed));
  }, py::arg("cfg"), py::arg("seed"));

  m.def("patchify", [](const Array &image, const ModelConfig &cfg) {
    return to_numpy(patchify(from_numpy(image, "image"), cfg));
  }, py::arg("image"), py::arg("cfg"));
  m.def("unpatchify", [](const Array &patches, const ModelConfig &cfg) {
    return to_numpy(unpatchify(from_numpy(patches, "patches"), cfg));
  }, py::arg("patches"), py::arg("cfg"));

  m.def("forward", [](const Array &image, const py::dict &params, const ModelConfig &cfg) {
    return to_numpy(forward(from_numpy(image, "image"), params_from_dict(params, cfg), cfg).logits);
  }, py::arg("image"), py::arg("params"), py::arg("cfg"), "Logits (1 x classes) for one image.");

  m.def("loss_and_grad",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast> &images,
           const std::vector<int> &labels, const py::dict &params, const ModelConfig &cfg) {
          const LossGrad lg =
              loss_and_grad(dataset_from_numpy(images, labels), params_from_dict(params, cfg), cfg);
          return py::make_tuple(lg.loss, to_dict(lg.grads), to_numpy(lg.z0_grad));
        },
        py::arg("images"), py::arg("labels"), py::arg("params"), py::arg("cfg"),
        "Returns (loss, grads, z0_grad).");

  m.def("grad_check",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast> &images,
           const std::vector<int> &labels, const py::dict &params, const ModelConfig &cfg,
           double fd_step) {
          const GradCheckReport r = grad_check(params_from_dict(params, cfg),
                                               dataset_from_numpy(images, labels), cfg,
                                               GradCheckOptions{fd_step, {}});
          py::dict per_entry;
          for (const auto &e : r.entries) per_entry[py::str(e.name)] = e.rel_error;
          return py::make_tuple(r.max_rel_error, r.worst_param, per_entry);
        },
        py::arg("images"), py::arg("labels"), py::arg("params"), py::arg("cfg"),
        py::arg("fd_step") = 1e-5, "Returns (max_rel_error, worst_param, per_entry).");

  m.def("synth_dataset",
        [](std::size_t classes, std::size_t per_class, std::size_t height, std::size_t width,
           std::size_t channels, double noise, std::uint64_t seed, std::size_t first_index) {
          SynthSpec s;
          s.classes = classes;
          s.per_class = per_class;
          s.height = height;
          s.width = width;
          s.channels = channels;
          s.noise = noise;
          s.seed = seed;
          s.first_index = first_index;
          return dataset_to_numpy(synth_dataset(s));
        },
        py::arg("classes") = 4, py::arg("per_class") = 50, py::arg("height") = 16,
        py::arg("width") = 16, py::arg("channels") = 3, py::arg("noise") = 0.1,
        py::arg("seed") = 0, py::arg("first_index") = 0, "Returns (images, labels).");

  m.def("generate_mask",
        [](const std::string &policy, double zero_prob, const ModelConfig &cfg, std::size_t client,
           std::size_t epoch, std::uint64_t seed) {
          return to_dict(
              generate_mask(MaskPolicy::parse(policy, zero_prob), make_layout(cfg), client, epoch,
                            seed)
                  .bits);
        },
        py::arg("policy"), py::arg("zero_prob"), py::arg("cfg"), py::arg("client") = 0,
        py::arg("epoch") = 0, py::arg("seed") = 0);

  m.def("update_count_pmf", [](std::size_t m_, std::size_t n, double r) {
    return update_count_pmf(m_, n, r).p;
  }, py::arg("epochs"), py::arg("clients"), py::arg("zero_prob"));
  m.def("locked_update_count_pmf", [](std::size_t m_, std::size_t n, double r) {
    return locked_update_count_pmf(m_, n, r).p;
  }, py::arg("epochs"), py::arg("clients"), py::arg("zero_prob"));
  m.def("simulate_update_counts",
        [](const std::string &policy, std::size_t m_, std::size_t n, double r, std::size_t trials,
           std::uint64_t seed) {
          const auto e = simulate_update_counts(parse_kind(policy), m_, n, r, trials, seed);
          py::dict d;
          d["pmf"] = e.pmf;
          d["positional_pmf"] = e.positional_pmf;
          d["trials"] = e.trials;
          return d;
        },
        py::arg("policy"), py::arg("epochs"), py::arg("clients"), py::arg("zero_prob"),
        py::arg("trials"), py::arg("seed") = 0);
  m.def("total_variation", [](const std::vector<double> &a, const std::vector<double> &b) {
    return total_variation(a, b);
  });

  m.def("attack_once",
        [](const ModelConfig &cfg, const py::dict &params, const Array &image, int label,
           const std::string &policy, double zero_prob, std::uint64_t seed,
           const std::string &mode) {
          const ParamSet p = params_from_dict(params, cfg);
          const Dataset batch{{from_numpy(image, "image"), label}};
          const ClientUpdate u =
              client_train_step(p, batch, MaskPolicy::parse(policy, zero_prob), 0, 0, seed, cfg);
          const AttackResult r = run_attack(u, p, cfg, batch[0].image, parse_mode(mode));
          py::dict d;
          d["psnr"] = r.psnr;
          d["mse"] = r.mse;
          d["degenerate"] = r.degenerate;
          d["residual_norm"] = r.residual_norm;
          d["rhs_norm"] = r.rhs_norm;
          d["image_hat"] = to_numpy(r.image_hat);
          return d;
        },
        py::arg("cfg"), py::arg("params"), py::arg("image"), py::arg("label"),
        py::arg("policy") = "none", py::arg("zero_prob") = 0.0, py::arg("seed") = 0,
        py::arg("mode") = "pseudo_inverse",
        "One client step on a single image, then the attack on its update.");

  m.def("train", [](const py::dict &config) {
    py::list out;
    for (const auto &run : train_experiment(config_from(config))) {
      py::dict d;
      d["label"] = run.spec.label;
      d["history"] = history_to_list(run.result.state.history);
      d["params"] = to_dict(run.result.state.params);
      out.append(d);
    }
    return out;
  }, py::arg("config"), "Runs the train experiment; config maps keys to values.");

  m.def("attack", [](const py::dict &config) {
    py::list out;
    for (const auto &c : attack_experiment(config_from(config))) {
      py::dict d;
      d["seed"] = c.seed;
      d["policy"] = c.policy;
      d["zero_prob"] = c.zero_prob;
      d["psnr"] = c.result.psnr;
      d["mse"] = c.result.mse;
      d["degenerate"] = c.result.degenerate;
      out.append(d);
    }
    return out;
  }, py::arg("config"));

  m.def("analyze", [](const py::dict &config) {
    py::list out;
    for (const auto &c : analyze_experiment(config_from(config))) {
      py::dict d;
      d["policy"] = c.policy;
      d["zero_prob"] = c.zero_prob;
      d["analytic"] = c.analytic.p;
      d["empirical"] = c.empirical;
      d["tv_distance"] = c.tv_distance;
      out.append(d);
    }
    return out;
  }, py::arg("config"));

  m.def("gradcheck", [](const py::dict &config) {
    const GradcheckOutcome g = gradcheck_experiment(config_from(config));
    py::dict d;
    d["passed"] = g.passed;
    d["param_count"] = g.param_count;
    d["max_rel_error"] = g.report.max_rel_error;
    d["worst_param"] = g.report.worst_param;
    return d;
  }, py::arg("config"));
}
