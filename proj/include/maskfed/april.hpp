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

#include "maskfed/federation.hpp"
#include "maskfed/matrix.hpp"
#include "maskfed/vit.hpp"

#include <vector>

namespace maskfed {

/// What an eavesdropper on one client update sees: the transmitted
/// first-block attention and positional-embedding gradients, plus the
/// global parameters the client started from.
struct CapturedUpdate {
  std::vector<Matrix> grad_uq, grad_uk, grad_uv; // one per head
  Matrix grad_pos;                               // (S+1) x D
  Matrix patch_embed;                            // E, P^2C x D
  Matrix pos_embed;                              // E_pos, (S+1) x D
  std::vector<Matrix> uq, uk, uv;

  void validate() const;
};

CapturedUpdate capture_update(const GradSet &transmitted, const ParamSet &global,
                              const ModelConfig &cfg);

struct Z0Recovery {
  Matrix z0_hat;
  double residual_norm = 0.0;
  // || sum dU U^T ||_F, the scale residual_norm should be compared with.
  double rhs_norm = 0.0;
  // The positional gradient was identically zero; nothing to solve.
  bool degenerate = false;
};

/// Solves Z0^T G = sum over q/k/v and heads of dU U^T for Z0 in the least
/// squares sense, where G is the positional-embedding gradient.
Z0Recovery recover_z0(const CapturedUpdate &cap);

enum class ReconstructionMode {
  // patches = (E (z0 - E_pos)^T)^T; exact only when E has orthonormal rows.
  Transpose,
  // patches solve patches * E = (z0 - E_pos) in the least squares sense.
  PseudoInverse,
};

struct Reconstruction {
  Matrix patches_hat; // S x P^2C
  Matrix image_hat;   // H x (W*C)
};

Reconstruction reconstruct_image(const Matrix &z0_hat, const CapturedUpdate &cap,
                                 ReconstructionMode mode, const ModelConfig &cfg);

struct ImageMetrics {
  double mse = 0.0;
  // +inf when mse == 0. Peak is max - min of the original (1 if flat).
  double psnr = 0.0;
};

ImageMetrics attack_metrics(const Matrix &image_hat, const Matrix &original);

struct AttackResult {
  Matrix z0_hat;
  Matrix patches_hat;
  Matrix image_hat;
  double residual_norm = 0.0;
  double rhs_norm = 0.0;
  bool degenerate = false;
  double mse = 0.0;
  double psnr = 0.0;
};

/// Full attack on one client's transmitted update (masked or not; the
/// attacker ignores the mask). The ground truth is used only for metrics.
AttackResult run_attack(const ClientUpdate &update, const ParamSet &global,
                        const ModelConfig &cfg, const Matrix &ground_truth,
                        ReconstructionMode mode = ReconstructionMode::PseudoInverse);

} // namespace maskfed
