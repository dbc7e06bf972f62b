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

#include "maskfed/vit.hpp"

#include "maskfed/error.hpp"
#include "maskfed/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace maskfed {

namespace pn = param_names;

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char *key) {
    if (v == 0) throw ConfigError("must be positive", std::string("model.") + key);
  };
  positive(image_h, "image_h");
  positive(image_w, "image_w");
  positive(channels, "channels");
  positive(patch, "patch");
  positive(embed_dim, "embed_dim");
  positive(heads, "heads");
  positive(mlp_hidden, "mlp_hidden");
  if (image_h % patch != 0 || image_w % patch != 0) {
    throw ConfigError("image dimensions must be multiples of the patch size", "model.patch");
  }
  if (embed_dim % heads != 0) {
    throw ConfigError("embed_dim must be divisible by heads", "model.heads");
  }
  if (classes < 2) throw ConfigError("need at least two classes", "model.classes");
  if (!(eps > 0.0)) throw ConfigError("must be positive", "model.eps");
}

std::string param_names::block(std::size_t l, const char *field) {
  return "block" + std::to_string(l) + "." + field;
}

std::string param_names::head(std::size_t l, const char *field, std::size_t t) {
  return block(l, field) + "." + std::to_string(t);
}

std::shared_ptr<const ParamLayout> make_layout(const ModelConfig &cfg) {
  cfg.validate();
  const std::size_t d = cfg.embed_dim;
  const std::size_t dh = cfg.head_dim();
  auto layout = std::make_shared<ParamLayout>();
  layout->add(pn::kPatchEmbed, {cfg.patch_dim(), d});
  layout->add(pn::kClassToken, {1, d});
  layout->add(pn::kPosEmbed, {cfg.tokens(), d});
  for (std::size_t l = 1; l <= cfg.blocks; ++l) {
    layout->add(pn::block(l, "ln1_gamma"), {1, d});
    layout->add(pn::block(l, "ln1_beta"), {1, d});
    for (std::size_t t = 0; t < cfg.heads; ++t) layout->add(pn::head(l, "U_q", t), {d, dh});
    for (std::size_t t = 0; t < cfg.heads; ++t) layout->add(pn::head(l, "U_k", t), {d, dh});
    for (std::size_t t = 0; t < cfg.heads; ++t) layout->add(pn::head(l, "U_v", t), {d, dh});
    layout->add(pn::block(l, "U_msa"), {cfg.heads * dh, d});
    layout->add(pn::block(l, "ln2_gamma"), {1, d});
    layout->add(pn::block(l, "ln2_beta"), {1, d});
    layout->add(pn::block(l, "mlp_w1"), {d, cfg.mlp_hidden});
    layout->add(pn::block(l, "mlp_b1"), {1, cfg.mlp_hidden});
    layout->add(pn::block(l, "mlp_w2"), {cfg.mlp_hidden, d});
    layout->add(pn::block(l, "mlp_b2"), {1, d});
  }
  layout->add(pn::kHeadGamma, {1, d});
  layout->add(pn::kHeadBeta, {1, d});
  layout->add(pn::kClassifierW, {d, cfg.classes});
  layout->add(pn::kClassifierB, {1, cfg.classes});
  return layout;
}

ParamSet init_params(const ModelConfig &cfg, std::uint64_t seed) {
  ParamSet params(make_layout(cfg));
  const RandomStream root = RandomStream(seed).derive("init");
  for (std::size_t i = 0; i < params.count(); ++i) {
    const std::string &name = params.name(i);
    Matrix &m = params[i];
    auto ends_with = [&](std::string_view suffix) {
      return name.size() >= suffix.size() &&
             name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    double scale = 0.0;
    if (name.find("gamma") != std::string::npos) {
      for (double &v : m.data()) v = 1.0;
      continue;
    }
    if (name == pn::kPosEmbed) {
      scale = 0.02;
    } else if (name == pn::kPatchEmbed || name.find(".U_") != std::string::npos ||
               ends_with("mlp_w1") || ends_with("mlp_w2") || name == pn::kClassifierW) {
      scale = 1.0 / std::sqrt(static_cast<double>(m.rows()));
    }
    if (scale == 0.0) continue;
    RandomStream stream = root.derive(name);
    for (double &v : m.data()) v = stream.uniform(-scale, scale);
  }
  return params;
}

Matrix patchify(const Matrix &image, const ModelConfig &cfg) {
  if (image.rows() != cfg.image_h || image.cols() != cfg.image_w * cfg.channels) {
    throw ContractError("patchify: image is " + image.shape_str() + ", expected " +
                        std::to_string(cfg.image_h) + "x" +
                        std::to_string(cfg.image_w * cfg.channels));
  }
  const std::size_t p = cfg.patch, c = cfg.channels;
  const std::size_t per_row = cfg.image_w / p;
  Matrix out(cfg.num_patches(), cfg.patch_dim());
  for (std::size_t s = 0; s < out.rows(); ++s) {
    const std::size_t r0 = (s / per_row) * p;
    const std::size_t c0 = (s % per_row) * p;
    std::size_t k = 0;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j)
        for (std::size_t ch = 0; ch < c; ++ch) out(s, k++) = image(r0 + i, (c0 + j) * c + ch);
  }
  return out;
}

Matrix unpatchify(const Matrix &patches, const ModelConfig &cfg) {
  if (patches.rows() != cfg.num_patches() || patches.cols() != cfg.patch_dim()) {
    throw ContractError("unpatchify: patches are " + patches.shape_str() + ", expected " +
                        std::to_string(cfg.num_patches()) + "x" +
                        std::to_string(cfg.patch_dim()));
  }
  const std::size_t p = cfg.patch, c = cfg.channels;
  const std::size_t per_row = cfg.image_w / p;
  Matrix image(cfg.image_h, cfg.image_w * c);
  for (std::size_t s = 0; s < patches.rows(); ++s) {
    const std::size_t r0 = (s / per_row) * p;
    const std::size_t c0 = (s % per_row) * p;
    std::size_t k = 0;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j)
        for (std::size_t ch = 0; ch < c; ++ch) image(r0 + i, (c0 + j) * c + ch) = patches(s, k++);
  }
  return image;
}

Matrix embed(const Matrix &patches, const ParamSet &params) {
  const Matrix &pos = params.at(pn::kPosEmbed);
  const Matrix &cls = params.at(pn::kClassToken);
  if (patches.rows() + 1 != pos.rows()) {
    throw ContractError("embed: " + std::to_string(patches.rows()) +
                        " patches do not match E_pos " + pos.shape_str());
  }
  const Matrix tokens = matmul(patches, params.at(pn::kPatchEmbed));
  Matrix z0 = pos;
  for (std::size_t j = 0; j < z0.cols(); ++j) z0(0, j) += cls(0, j);
  for (std::size_t s = 0; s < tokens.rows(); ++s)
    for (std::size_t j = 0; j < z0.cols(); ++j) z0(s + 1, j) += tokens(s, j);
  return z0;
}

namespace {

void require_row_param(const Matrix &p, std::size_t cols, const char *what) {
  if (p.rows() != 1 || p.cols() != cols) {
    throw ContractError(std::string(what) + ": expected 1x" + std::to_string(cols) + ", got " +
                        p.shape_str());
  }
}

Matrix ln_forward(const Matrix &x, const Matrix &gamma, const Matrix &beta, double eps,
                  LnCache *cache) {
  require_row_param(gamma, x.cols(), "layer_norm gamma");
  require_row_param(beta, x.cols(), "layer_norm beta");
  const double n = static_cast<double>(x.cols());
  Matrix xhat(x.rows(), x.cols());
  Matrix out(x.rows(), x.cols());
  std::vector<double> rstd(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= n;
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < x.cols(); ++j) {
      xhat(i, j) = (r[j] - mean) * rstd[i];
      out(i, j) = gamma(0, j) * xhat(i, j) + beta(0, j);
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return out;
}

// Returns dx; accumulates dgamma and dbeta.
Matrix ln_backward(const LnCache &cache, const Matrix &dy, const Matrix &gamma, Matrix &dgamma,
                   Matrix &dbeta) {
  const std::size_t rows = dy.rows(), cols = dy.cols();
  const double n = static_cast<double>(cols);
  Matrix dx(rows, cols);
  std::vector<double> dxhat(cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      dgamma(0, j) += dy(i, j) * cache.xhat(i, j);
      dbeta(0, j) += dy(i, j);
      dxhat[j] = dy(i, j) * gamma(0, j);
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * cache.xhat(i, j);
    }
    mean_dxhat /= n;
    mean_dxhat_xhat /= n;
    for (std::size_t j = 0; j < cols; ++j) {
      dx(i, j) = cache.rstd[i] * (dxhat[j] - mean_dxhat - cache.xhat(i, j) * mean_dxhat_xhat);
    }
  }
  return dx;
}

HeadCache attention_head(const Matrix &a, const Matrix &u_q, const Matrix &u_k,
                         const Matrix &u_v) {
  HeadCache h;
  h.q = matmul(a, u_q);
  h.k = matmul(a, u_k);
  h.v = matmul(a, u_v);
  Matrix scores = matmul_nt(h.q, h.k);
  scores *= 1.0 / std::sqrt(static_cast<double>(u_q.cols()));
  h.attn = softmax_rows(scores);
  return h;
}

void add_row_bias(Matrix &x, const Matrix &bias) {
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) += bias(0, j);
}

void add_into(Matrix &dst, const Matrix &src) { dst += src; }

BlockCache block_forward(const Matrix &z_prev, const ParamSet &params, std::size_t l,
                         const ModelConfig &cfg) {
  BlockCache bc;
  bc.z_in = z_prev;
  bc.ln1_identity = (l == 1 && cfg.first_block_pre_ln_identity);
  bc.residual = !(l == 1 && !cfg.first_block_attention_residual);
  if (bc.ln1_identity) {
    bc.a = z_prev;
  } else {
    bc.a = ln_forward(z_prev, params.at(pn::block(l, "ln1_gamma")),
                      params.at(pn::block(l, "ln1_beta")), cfg.eps, &bc.ln1);
  }
  const std::size_t dh = cfg.head_dim();
  bc.concat = Matrix(z_prev.rows(), cfg.heads * dh);
  for (std::size_t t = 0; t < cfg.heads; ++t) {
    HeadCache h = attention_head(bc.a, params.at(pn::head(l, "U_q", t)),
                                 params.at(pn::head(l, "U_k", t)),
                                 params.at(pn::head(l, "U_v", t)));
    set_cols(bc.concat, t * dh, matmul(h.attn, h.v));
    bc.heads.push_back(std::move(h));
  }
  bc.z_mid = matmul(bc.concat, params.at(pn::block(l, "U_msa")));
  if (bc.residual) bc.z_mid += z_prev;
  bc.b = ln_forward(bc.z_mid, params.at(pn::block(l, "ln2_gamma")),
                    params.at(pn::block(l, "ln2_beta")), cfg.eps, &bc.ln2);
  bc.pre_act = matmul(bc.b, params.at(pn::block(l, "mlp_w1")));
  add_row_bias(bc.pre_act, params.at(pn::block(l, "mlp_b1")));
  bc.act = bc.pre_act;
  for (double &v : bc.act.data()) v = gelu(v);
  return bc;
}

Matrix block_output(const BlockCache &bc, const ParamSet &params, std::size_t l) {
  Matrix out = matmul(bc.act, params.at(pn::block(l, "mlp_w2")));
  add_row_bias(out, params.at(pn::block(l, "mlp_b2")));
  out += bc.z_mid;
  return out;
}

// Returns d(loss)/d(z_in) given d(loss)/d(block output).
Matrix block_backward(const BlockCache &bc, const Matrix &dout, const ParamSet &params,
                      std::size_t l, const ModelConfig &cfg, GradSet &grads) {
  // MLP branch: out = gelu(b W1 + b1) W2 + b2 + z_mid
  add_into(grads.at(pn::block(l, "mlp_w2")), matmul_tn(bc.act, dout));
  add_into(grads.at(pn::block(l, "mlp_b2")), col_sum(dout));
  Matrix dpre = matmul_nt(dout, params.at(pn::block(l, "mlp_w2")));
  {
    auto d = dpre.data();
    auto u = bc.pre_act.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= gelu_derivative(u[i]);
  }
  add_into(grads.at(pn::block(l, "mlp_w1")), matmul_tn(bc.b, dpre));
  add_into(grads.at(pn::block(l, "mlp_b1")), col_sum(dpre));
  const Matrix db = matmul_nt(dpre, params.at(pn::block(l, "mlp_w1")));
  Matrix dz_mid = dout;
  dz_mid += ln_backward(bc.ln2, db, params.at(pn::block(l, "ln2_gamma")),
                        grads.at(pn::block(l, "ln2_gamma")), grads.at(pn::block(l, "ln2_beta")));

  // Attention branch: z_mid = concat(heads) U_msa + z_in
  add_into(grads.at(pn::block(l, "U_msa")), matmul_tn(bc.concat, dz_mid));
  const Matrix dconcat = matmul_nt(dz_mid, params.at(pn::block(l, "U_msa")));
  const std::size_t dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix da(bc.a.rows(), bc.a.cols());
  for (std::size_t t = 0; t < cfg.heads; ++t) {
    const HeadCache &h = bc.heads[t];
    const Matrix dh_out = slice_cols(dconcat, t * dh, (t + 1) * dh);
    const Matrix dattn = matmul_nt(dh_out, h.v);
    const Matrix dv = matmul_tn(h.attn, dh_out);
    Matrix dscores(h.attn.rows(), h.attn.cols());
    for (std::size_t i = 0; i < h.attn.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < h.attn.cols(); ++j) dot += dattn(i, j) * h.attn(i, j);
      for (std::size_t j = 0; j < h.attn.cols(); ++j)
        dscores(i, j) = h.attn(i, j) * (dattn(i, j) - dot) * scale;
    }
    const Matrix dq = matmul(dscores, h.k);
    const Matrix dk = matmul_tn(dscores, h.q);
    const Matrix &u_q = params.at(pn::head(l, "U_q", t));
    const Matrix &u_k = params.at(pn::head(l, "U_k", t));
    const Matrix &u_v = params.at(pn::head(l, "U_v", t));
    add_into(grads.at(pn::head(l, "U_q", t)), matmul_tn(bc.a, dq));
    add_into(grads.at(pn::head(l, "U_k", t)), matmul_tn(bc.a, dk));
    add_into(grads.at(pn::head(l, "U_v", t)), matmul_tn(bc.a, dv));
    da += matmul_nt(dq, u_q);
    da += matmul_nt(dk, u_k);
    da += matmul_nt(dv, u_v);
  }
  Matrix dz_in = bc.residual ? dz_mid : Matrix(dz_mid.rows(), dz_mid.cols());
  if (bc.ln1_identity) {
    dz_in += da;
  } else {
    dz_in += ln_backward(bc.ln1, da, params.at(pn::block(l, "ln1_gamma")),
                         grads.at(pn::block(l, "ln1_gamma")), grads.at(pn::block(l, "ln1_beta")));
  }
  return dz_in;
}

} // namespace

Matrix layer_norm(const Matrix &x, const Matrix &gamma, const Matrix &beta, double eps) {
  return ln_forward(x, gamma, beta, eps, nullptr);
}

Matrix softmax_rows(const Matrix &x) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      out(i, j) = std::exp(r[j] - mx);
      sum += out(i, j);
    }
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) /= sum;
  }
  return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Matrix self_attention(const Matrix &z_ln, const Matrix &u_q, const Matrix &u_k,
                      const Matrix &u_v) {
  if (u_q.cols() == 0) throw ContractError("self_attention: head dimension is zero");
  const HeadCache h = attention_head(z_ln, u_q, u_k, u_v);
  return matmul(h.attn, h.v);
}

Matrix msa(const Matrix &z_ln, const ParamSet &params, std::size_t l, const ModelConfig &cfg) {
  const std::size_t dh = cfg.head_dim();
  Matrix concat(z_ln.rows(), cfg.heads * dh);
  for (std::size_t t = 0; t < cfg.heads; ++t) {
    set_cols(concat, t * dh,
             self_attention(z_ln, params.at(pn::head(l, "U_q", t)),
                            params.at(pn::head(l, "U_k", t)), params.at(pn::head(l, "U_v", t))));
  }
  return matmul(concat, params.at(pn::block(l, "U_msa")));
}

Matrix encoder_block(const Matrix &z_prev, const ParamSet &params, std::size_t l,
                     const ModelConfig &cfg) {
  if (l < 1 || l > cfg.blocks) {
    throw ContractError("encoder_block: block index " + std::to_string(l) + " out of range");
  }
  return block_output(block_forward(z_prev, params, l, cfg), params, l);
}

ForwardResult forward(const Matrix &image, const ParamSet &params, const ModelConfig &cfg) {
  ForwardResult res;
  ForwardCache &c = res.cache;
  c.patches = patchify(image, cfg);
  c.z0 = embed(c.patches, params);
  Matrix z = c.z0;
  for (std::size_t l = 1; l <= cfg.blocks; ++l) {
    c.blocks.push_back(block_forward(z, params, l, cfg));
    z = block_output(c.blocks.back(), params, l);
  }
  c.y = ln_forward(slice_rows(z, 0, 1), params.at(pn::kHeadGamma), params.at(pn::kHeadBeta),
                   cfg.eps, &c.head_ln);
  c.logits = matmul(c.y, params.at(pn::kClassifierW));
  add_row_bias(c.logits, params.at(pn::kClassifierB));
  res.logits = c.logits;
  return res;
}

Matrix backward(const ForwardCache &cache, const Matrix &dlogits, const ParamSet &params,
                const ModelConfig &cfg, GradSet &grads) {
  if (cache.blocks.size() != cfg.blocks || !dlogits.same_shape(cache.logits)) {
    throw ContractError("backward: cache does not match this model configuration");
  }
  require_congruent(params, grads, "backward");
  add_into(grads.at(pn::kClassifierW), matmul_tn(cache.y, dlogits));
  add_into(grads.at(pn::kClassifierB), dlogits);
  const Matrix dy = matmul_nt(dlogits, params.at(pn::kClassifierW));
  const Matrix dcls = ln_backward(cache.head_ln, dy, params.at(pn::kHeadGamma),
                                  grads.at(pn::kHeadGamma), grads.at(pn::kHeadBeta));
  Matrix dz(cache.z0.rows(), cache.z0.cols());
  for (std::size_t j = 0; j < dz.cols(); ++j) dz(0, j) = dcls(0, j);
  for (std::size_t l = cfg.blocks; l >= 1; --l) {
    dz = block_backward(cache.blocks[l - 1], dz, params, l, cfg, grads);
  }
  // z0 = [x_class; patches E] + E_pos
  add_into(grads.at(pn::kPosEmbed), dz);
  Matrix &dcls_tok = grads.at(pn::kClassToken);
  for (std::size_t j = 0; j < dz.cols(); ++j) dcls_tok(0, j) += dz(0, j);
  add_into(grads.at(pn::kPatchEmbed), matmul_tn(cache.patches, slice_rows(dz, 1, dz.rows())));
  return dz;
}

namespace {

double cross_entropy(const Matrix &logits, int label, Matrix *dlogits, double weight) {
  const std::size_t k = logits.cols();
  auto r = logits.row(0);
  const double mx = *std::max_element(r.begin(), r.end());
  double sum = 0.0;
  for (double v : r) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  if (dlogits) {
    *dlogits = Matrix(1, k);
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(r[j] - lse);
      (*dlogits)(0, j) = weight * (p - (static_cast<int>(j) == label ? 1.0 : 0.0));
    }
  }
  return lse - r[static_cast<std::size_t>(label)];
}

void check_batch(std::span<const LabeledImage> batch, const ModelConfig &cfg) {
  if (batch.empty()) throw ContractError("loss_and_grad: empty batch");
  for (const auto &s : batch) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= cfg.classes) {
      throw ContractError("loss_and_grad: label " + std::to_string(s.label) + " outside [0, " +
                          std::to_string(cfg.classes) + ")");
    }
  }
}

} // namespace

LossGrad loss_and_grad(std::span<const LabeledImage> batch, const ParamSet &params,
                       const ModelConfig &cfg) {
  check_batch(batch, cfg);
  LossGrad out;
  out.grads = GradSet(params.layout_ptr());
  out.z0_grad = Matrix(cfg.tokens(), cfg.embed_dim);
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (const auto &sample : batch) {
    ForwardResult fr = forward(sample.image, params, cfg);
    Matrix dlogits;
    out.loss += cross_entropy(fr.logits, sample.label, &dlogits, weight);
    out.z0_grad += backward(fr.cache, dlogits, params, cfg, out.grads);
  }
  out.loss *= weight;
  return out;
}

double loss_only(std::span<const LabeledImage> batch, const ParamSet &params,
                 const ModelConfig &cfg) {
  check_batch(batch, cfg);
  double loss = 0.0;
  for (const auto &sample : batch) {
    loss += cross_entropy(forward(sample.image, params, cfg).logits, sample.label, nullptr, 1.0);
  }
  return loss / static_cast<double>(batch.size());
}

int predict(const Matrix &image, const ParamSet &params, const ModelConfig &cfg) {
  const Matrix logits = forward(image, params, cfg).logits;
  auto r = logits.row(0);
  // max_element returns the first maximum, so ties go to the lowest index.
  return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
}

double accuracy(std::span<const LabeledImage> data, const ParamSet &params,
                const ModelConfig &cfg) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto &s : data) hits += predict(s.image, params, cfg) == s.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

GradCheckReport grad_check(const ParamSet &params, std::span<const LabeledImage> batch,
                           const ModelConfig &cfg, const GradCheckOptions &opts) {
  if (!(opts.fd_step > 0.0)) throw ContractError("grad_check: fd_step must be positive");
  LossGrad analytic = loss_and_grad(batch, params, cfg);
  if (!opts.sabotage.empty()) {
    Matrix &g = analytic.grads.at(opts.sabotage);
    for (double &v : g.data()) v = v * 1.5 + 1e-3;
  }
  GradCheckReport report;
  ParamSet probe = params;
  for (std::size_t i = 0; i < probe.count(); ++i) {
    Matrix &p = probe[i];
    const Matrix &a = analytic.grads[i];
    double diff = 0.0, scale = 1e-8;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double orig = p.data()[k];
      p.data()[k] = orig + opts.fd_step;
      const double up = loss_only(batch, probe, cfg);
      p.data()[k] = orig - opts.fd_step;
      const double down = loss_only(batch, probe, cfg);
      p.data()[k] = orig;
      const double numeric = (up - down) / (2.0 * opts.fd_step);
      diff = std::max(diff, std::abs(numeric - a.data()[k]));
      scale = std::max({scale, std::abs(numeric), std::abs(a.data()[k])});
    }
    const double rel = diff / scale;
    report.entries.push_back({probe.name(i), rel});
    if (report.worst_param.empty() || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = probe.name(i);
    }
  }
  return report;
}

} // namespace maskfed
