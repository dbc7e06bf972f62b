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

#include "maskfed/april.hpp"

#include "maskfed/error.hpp"
#include "maskfed/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace maskfed {

namespace pn = param_names;

void CapturedUpdate::validate() const {
  const std::size_t heads = uq.size();
  if (heads == 0 || uk.size() != heads || uv.size() != heads || grad_uq.size() != heads ||
      grad_uk.size() != heads || grad_uv.size() != heads) {
    throw ContractError("CapturedUpdate: inconsistent head counts");
  }
  const std::size_t d = pos_embed.cols();
  if (!grad_pos.same_shape(pos_embed) || patch_embed.cols() != d) {
    throw ContractError("CapturedUpdate: E " + patch_embed.shape_str() + ", E_pos " +
                        pos_embed.shape_str() + ", dE_pos " + grad_pos.shape_str() +
                        " are inconsistent");
  }
  for (std::size_t t = 0; t < heads; ++t) {
    for (const Matrix *m : {&uq[t], &uk[t], &uv[t]}) {
      if (m->rows() != d || !m->same_shape(uq[t])) {
        throw ContractError("CapturedUpdate: head weight " + m->shape_str() +
                            " does not match embedding width " + std::to_string(d));
      }
    }
    if (!grad_uq[t].same_shape(uq[t]) || !grad_uk[t].same_shape(uk[t]) ||
        !grad_uv[t].same_shape(uv[t])) {
      throw ContractError("CapturedUpdate: head gradient shapes differ from weights");
    }
  }
}

CapturedUpdate capture_update(const GradSet &transmitted, const ParamSet &global,
                              const ModelConfig &cfg) {
  require_congruent(transmitted, global, "capture_update");
  if (cfg.blocks < 1) throw ContractError("capture_update: model has no encoder block");
  CapturedUpdate cap;
  for (std::size_t t = 0; t < cfg.heads; ++t) {
    cap.grad_uq.push_back(transmitted.at(pn::head(1, "U_q", t)));
    cap.grad_uk.push_back(transmitted.at(pn::head(1, "U_k", t)));
    cap.grad_uv.push_back(transmitted.at(pn::head(1, "U_v", t)));
    cap.uq.push_back(global.at(pn::head(1, "U_q", t)));
    cap.uk.push_back(global.at(pn::head(1, "U_k", t)));
    cap.uv.push_back(global.at(pn::head(1, "U_v", t)));
  }
  cap.grad_pos = transmitted.at(pn::kPosEmbed);
  cap.patch_embed = global.at(pn::kPatchEmbed);
  cap.pos_embed = global.at(pn::kPosEmbed);
  return cap;
}

Z0Recovery recover_z0(const CapturedUpdate &cap) {
  cap.validate();
  const std::size_t d = cap.pos_embed.cols();
  // q = Z0 U_q gives dU_q = Z0^T dq, so sum dU U^T = Z0^T (sum dq U^T) and the
  // bracket is the gradient reaching Z0 through attention.
  Matrix rhs(d, d);
  for (std::size_t t = 0; t < cap.uq.size(); ++t) {
    rhs += matmul_nt(cap.grad_uq[t], cap.uq[t]);
    rhs += matmul_nt(cap.grad_uk[t], cap.uk[t]);
    rhs += matmul_nt(cap.grad_uv[t], cap.uv[t]);
  }
  Z0Recovery out;
  out.rhs_norm = frobenius_norm(rhs);
  if (max_abs(cap.grad_pos) == 0.0) {
    out.degenerate = true;
    out.z0_hat = Matrix(cap.pos_embed.rows(), d);
    out.residual_norm = out.rhs_norm;
    return out;
  }
  const Matrix g_t = transpose(cap.grad_pos);
  const Matrix rhs_t = transpose(rhs);
  out.z0_hat = least_squares(g_t, rhs_t);
  out.residual_norm = frobenius_norm(matmul(g_t, out.z0_hat) - rhs_t);
  return out;
}

Reconstruction reconstruct_image(const Matrix &z0_hat, const CapturedUpdate &cap,
                                 ReconstructionMode mode, const ModelConfig &cfg) {
  if (!z0_hat.same_shape(cap.pos_embed)) {
    throw ContractError("reconstruct_image: z0_hat is " + z0_hat.shape_str() + ", expected " +
                        cap.pos_embed.shape_str());
  }
  const Matrix diff = z0_hat - cap.pos_embed;
  const Matrix tokens = slice_rows(diff, 1, diff.rows());
  Reconstruction out;
  if (mode == ReconstructionMode::Transpose) {
    out.patches_hat = transpose(matmul_nt(cap.patch_embed, tokens));
  } else {
    out.patches_hat = transpose(least_squares(transpose(cap.patch_embed), transpose(tokens)));
  }
  out.image_hat = unpatchify(out.patches_hat, cfg);
  return out;
}

ImageMetrics attack_metrics(const Matrix &image_hat, const Matrix &original) {
  if (!image_hat.same_shape(original)) {
    throw ContractError("attack_metrics: shapes differ, " + image_hat.shape_str() + " vs " +
                        original.shape_str());
  }
  ImageMetrics m;
  if (original.empty()) return m;
  double acc = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const double e = image_hat.data()[i] - original.data()[i];
    acc += e * e;
  }
  m.mse = acc / static_cast<double>(original.size());
  const auto [lo, hi] = std::minmax_element(original.data().begin(), original.data().end());
  const double peak = *hi > *lo ? *hi - *lo : 1.0;
  m.psnr = m.mse == 0.0 ? std::numeric_limits<double>::infinity()
                        : 10.0 * std::log10(peak * peak / m.mse);
  return m;
}

AttackResult run_attack(const ClientUpdate &update, const ParamSet &global,
                        const ModelConfig &cfg, const Matrix &ground_truth,
                        ReconstructionMode mode) {
  const CapturedUpdate cap = capture_update(update.masked_grads, global, cfg);
  Z0Recovery z0 = recover_z0(cap);
  Reconstruction rec = reconstruct_image(z0.z0_hat, cap, mode, cfg);
  const ImageMetrics metrics = attack_metrics(rec.image_hat, ground_truth);
  AttackResult r;
  r.z0_hat = std::move(z0.z0_hat);
  r.patches_hat = std::move(rec.patches_hat);
  r.image_hat = std::move(rec.image_hat);
  r.residual_norm = z0.residual_norm;
  r.rhs_norm = z0.rhs_norm;
  r.degenerate = z0.degenerate;
  r.mse = metrics.mse;
  r.psnr = metrics.psnr;
  return r;
}

} // namespace maskfed
