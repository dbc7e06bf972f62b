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

#pragma once

#include "maskfed/matrix.hpp"
#include "maskfed/param_tree.hpp"
#include "maskfed/sample.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace maskfed {

struct ModelConfig {
  std::size_t image_h = 16;
  std::size_t image_w = 16;
  std::size_t channels = 3;
  std::size_t patch = 4;
  std::size_t embed_dim = 16;
  std::size_t heads = 2;
  std::size_t blocks = 2;
  std::size_t mlp_hidden = 32;
  std::size_t classes = 4;
  double eps = 1e-6;
  // Block 1 feeds z0 straight into attention (no pre-attention LN), so the
  // first-block q/k/v weight gradients are exact products with z0.
  bool first_block_pre_ln_identity = false;
  // When false, block 1 computes z' = MSA(.) without adding z0 back, so z0
  // reaches the loss only through the q/k/v maps.
  bool first_block_attention_residual = true;

  // Copy with both first-block switches set so that the positional
  // embedding gradient is exactly the gradient entering q/k/v.
  ModelConfig attack_exact() const {
    ModelConfig c = *this;
    c.first_block_pre_ln_identity = true;
    c.first_block_attention_residual = false;
    return c;
  }

  std::size_t num_patches() const { return (image_h / patch) * (image_w / patch); }
  std::size_t tokens() const { return num_patches() + 1; }
  std::size_t patch_dim() const { return patch * patch * channels; }
  std::size_t head_dim() const { return embed_dim / heads; }

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Parameter entry names. Blocks are numbered from 1.
namespace param_names {
inline constexpr const char *kPatchEmbed = "E";
inline constexpr const char *kClassToken = "x_class";
inline constexpr const char *kPosEmbed = "E_pos";
inline constexpr const char *kHeadGamma = "head_gamma";
inline constexpr const char *kHeadBeta = "head_beta";
inline constexpr const char *kClassifierW = "classifier_w";
inline constexpr const char *kClassifierB = "classifier_b";
std::string block(std::size_t l, const char *field);
std::string head(std::size_t l, const char *field, std::size_t t);
} // namespace param_names

std::shared_ptr<const ParamLayout> make_layout(const ModelConfig &cfg);

// Seeded initialization: E, U_*, MLP and classifier weights uniform in
// +-1/sqrt(fan_in); E_pos uniform in +-0.02; x_class and biases zero; LN
// gamma one, beta zero. Each entry draws from its own name-keyed stream.
ParamSet init_params(const ModelConfig &cfg, std::uint64_t seed);

// S x P^2C. Patches in raster order; within a patch (row, col, channel).
Matrix patchify(const Matrix &image, const ModelConfig &cfg);
// Inverse of patchify.
Matrix unpatchify(const Matrix &patches, const ModelConfig &cfg);

// z0 = [x_class; patches * E] + E_pos
Matrix embed(const Matrix &patches, const ParamSet &params);

// Row-wise normalization with population variance.
Matrix layer_norm(const Matrix &x, const Matrix &gamma, const Matrix &beta, double eps);
Matrix softmax_rows(const Matrix &x);
double gelu(double x);
double gelu_derivative(double x);

// softmax(q k^T / sqrt(D_h)) v with D_h = u_q.cols().
Matrix self_attention(const Matrix &z_ln, const Matrix &u_q, const Matrix &u_k,
                      const Matrix &u_v);
// Heads of block l concatenated column-wise, times U_msa.
Matrix msa(const Matrix &z_ln, const ParamSet &params, std::size_t l, const ModelConfig &cfg);
Matrix encoder_block(const Matrix &z_prev, const ParamSet &params, std::size_t l,
                     const ModelConfig &cfg);

struct LnCache {
  Matrix xhat;
  std::vector<double> rstd;
};

struct HeadCache {
  Matrix q, k, v, attn;
};

struct BlockCache {
  Matrix z_in;
  bool ln1_identity = false;
  bool residual = true;
  LnCache ln1;
  Matrix a; // attention input
  std::vector<HeadCache> heads;
  Matrix concat;
  Matrix z_mid;
  LnCache ln2;
  Matrix b; // MLP input
  Matrix pre_act;
  Matrix act;
};

struct ForwardCache {
  Matrix patches;
  Matrix z0;
  std::vector<BlockCache> blocks;
  LnCache head_ln; // row 0 of z_L only
  Matrix y;
  Matrix logits;
};

struct ForwardResult {
  Matrix logits; // 1 x classes
  ForwardCache cache;
};

ForwardResult forward(const Matrix &image, const ParamSet &params, const ModelConfig &cfg);

// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits), and
// returns d(loss)/d(z0).
Matrix backward(const ForwardCache &cache, const Matrix &dlogits, const ParamSet &params,
                const ModelConfig &cfg, GradSet &grads);

struct LossGrad {
  double loss = 0.0;
  GradSet grads;
  // Sum over the batch of d(loss)/d(z0); equals grads[E_pos].
  Matrix z0_grad;
};

// Mean softmax cross-entropy over the batch and its exact gradient.
LossGrad loss_and_grad(std::span<const LabeledImage> batch, const ParamSet &params,
                       const ModelConfig &cfg);
double loss_only(std::span<const LabeledImage> batch, const ParamSet &params,
                 const ModelConfig &cfg);

// argmax of logits, ties to the lowest class index.
int predict(const Matrix &image, const ParamSet &params, const ModelConfig &cfg);
double accuracy(std::span<const LabeledImage> data, const ParamSet &params,
                const ModelConfig &cfg);

struct GradCheckEntry {
  std::string name;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::vector<GradCheckEntry> entries;
};

struct GradCheckOptions {
  double fd_step = 1e-5;
  // Test hook: perturb the analytic gradient of this entry before comparing.
  std::string sabotage;
};

/// Compares the analytic gradient against central differences, entry by
/// entry. The error of one entry is max|a - b| / max(max|a|, max|b|, 1e-8)
/// taken over that tensor; the report's maximum is over all tensors.
GradCheckReport grad_check(const ParamSet &params, std::span<const LabeledImage> batch,
                           const ModelConfig &cfg, const GradCheckOptions &opts = {});

} // namespace maskfed
