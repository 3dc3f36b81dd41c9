// Copyright 2026 The progseq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "progseq/ops.hpp"

namespace progseq {

/// Mixture of M isotropic Gaussians over a D-dimensional frame.
struct MixtureParams {
  RowVector weights;  // alpha, 1 x M, on the simplex
  Matrix means;       // M x D
  RowVector scales;   // sigma, 1 x M, positive

  int components() const { return static_cast<int>(weights.cols()); }
  Index dim() const { return means.cols(); }
  void validate() const;
};

/// Per-frame mixture parameters for a whole sequence, still on the tape.
struct MixtureTensors {
  Tensor log_weights;  // U x M (log-softmax of the weight logits)
  Tensor means;        // U x (M*D), component-major
  Tensor log_scales;   // U x M
  int components = 0;
  Index dim = 0;

  Index frames() const { return log_weights.rows(); }
  MixtureParams frame(Index u) const;
};

struct MdnHeadWeights {
  Tensor weight_logits, bias_logits;  // d x M, 1 x M
  Tensor weight_means, bias_means;    // d x M*D, 1 x M*D
  Tensor weight_scales, bias_scales;  // d x M, 1 x M
};

struct MdnHeadOptions {
  int components = 4;
  Index dim = 0;
  /// Lower bound on sigma while training.
  Scalar sigma_floor = 1e-4;
  /// Pins sigma to 1 and cuts it from the tape.
  bool fixed_unit_sigma = false;
};

/// Linear projections of decoder features to mixture logits (softmax -> alpha),
/// means, and log-scales (exp -> sigma).
MixtureTensors mdn_head(const Tensor& features, const MdnHeadWeights& w, const MdnHeadOptions& options);

/// (2 pi sigma^2)^(-D/2) exp(-|y - mu|^2 / (2 sigma^2)). ConfigError if sigma <= 0.
Scalar component_density(const RowVector& y, const RowVector& mu, Scalar sigma);
Scalar mixture_probability(const RowVector& y, const MixtureParams& params);

/// -sum_u log sum_i alpha_i phi_i(y_u), evaluated in log space. `targets`
/// is U x D. Frames with `frame_valid[u] == false` are skipped when a mask
/// is given.
Tensor mdn_nll(const Tensor& targets, const MixtureTensors& mixture, const std::vector<bool>* frame_valid = nullptr);

/// Index of the largest weight; ties go to the lowest index.
int argmax_component(const RowVector& weights);
/// Mean of the argmax-weight component (sigma treated as zero).
RowVector sample(const MixtureParams& params);
/// Per-frame argmax-component means as a U x D tensor; differentiable with
/// respect to the means.
Tensor sample_means(const MixtureTensors& mixture);

Tensor mdn_adversarial_loss(const Tensor& mdn_loss, const Tensor& generator_adv_loss, Scalar lambda_mdn,
                            Scalar lambda_gan);

}  // namespace progseq
