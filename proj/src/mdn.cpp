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

#include "progseq/mdn.hpp"

#include "progseq/error.hpp"

#include <cmath>
#include <numbers>

namespace progseq {

namespace {

const Scalar kLog2Pi = std::log(2.0 * std::numbers::pi);

// (M*D) x M: column i sums the D channels of component i.
Tensor group_sum_matrix(int components, Index dim) {
  Matrix g = Matrix::Zero(components * dim, components);
  for (int i = 0; i < components; ++i) g.block(i * dim, i, dim, 1).setOnes();
  return Tensor(std::move(g));
}

// (M*D) x D: stacked identities, folds component blocks onto one frame.
Tensor stacked_identity(int components, Index dim) {
  Matrix s = Matrix::Zero(components * dim, dim);
  for (int i = 0; i < components; ++i) s.block(i * dim, 0, dim, dim).setIdentity();
  return Tensor(std::move(s));
}

}  // namespace

void MixtureParams::validate() const {
  if (weights.cols() < 1) throw ConfigError("mixture: need at least one component");
  if (means.rows() != weights.cols() || scales.cols() != weights.cols()) throw ShapeError("mixture: component count mismatch");
  if (std::abs(weights.sum() - 1.0) > 1e-6 || weights.minCoeff() < 0.0) throw ConfigError("mixture: weights not on the simplex");
  if (scales.minCoeff() <= 0.0) throw ConfigError("mixture: non-positive scale");
}

MixtureParams MixtureTensors::frame(Index u) const {
  MixtureParams p;
  p.weights = log_weights.value().row(u).array().exp().matrix();
  p.means.resize(components, dim);
  for (int i = 0; i < components; ++i) p.means.row(i) = means.value().block(u, i * dim, 1, dim);
  p.scales = log_scales.value().row(u).array().exp().matrix();
  return p;
}

MixtureTensors mdn_head(const Tensor& features, const MdnHeadWeights& w, const MdnHeadOptions& options) {
  if (options.components < 1) throw ConfigError("mdn_head: component count must be >= 1");
  if (options.dim < 1) throw ConfigError("mdn_head: output dim must be >= 1");
  MixtureTensors out;
  out.components = options.components;
  out.dim = options.dim;
  out.log_weights = log_softmax_rows(linear(features, w.weight_logits, w.bias_logits));
  out.means = linear(features, w.weight_means, w.bias_means);
  if (out.means.cols() != options.components * options.dim) {
    throw ShapeError("mdn_head: mean projection width " + std::to_string(out.means.cols()) + " != M*D");
  }
  if (options.fixed_unit_sigma) {
    out.log_scales = Tensor::zeros(features.rows(), options.components);
  } else {
    out.log_scales = clamp_min(linear(features, w.weight_scales, w.bias_scales), std::log(options.sigma_floor));
  }
  return out;
}

Scalar component_density(const RowVector& y, const RowVector& mu, Scalar sigma) {
  if (!(sigma > 0)) throw ConfigError("component_density: sigma must be positive");
  if (y.cols() != mu.cols()) throw ShapeError("component_density: dim mismatch");
  const Scalar d = static_cast<Scalar>(y.cols());
  const Scalar sq = (y - mu).squaredNorm();
  return std::exp(-0.5 * d * kLog2Pi - d * std::log(sigma) - sq / (2.0 * sigma * sigma));
}

Scalar mixture_probability(const RowVector& y, const MixtureParams& params) {
  Scalar p = 0;
  for (int i = 0; i < params.components(); ++i) {
    p += params.weights(i) * component_density(y, params.means.row(i), params.scales(i));
  }
  return p;
}

Tensor mdn_nll(const Tensor& targets, const MixtureTensors& mixture, const std::vector<bool>* frame_valid) {
  const int m = mixture.components;
  const Index d = mixture.dim;
  if (targets.cols() != d || targets.rows() != mixture.frames()) {
    throw ShapeError("mdn_nll: targets " + targets.shape_string() + " vs mixture of " +
                     std::to_string(mixture.frames()) + " frames x " + std::to_string(d));
  }
  std::vector<Tensor> copies(static_cast<size_t>(m), targets);
  Tensor diff = sub(mixture.means, concat(copies, 1));
  Tensor sq = matmul(square(diff), group_sum_matrix(m, d));                       // U x M
  Tensor inv_var = exp(scale(mixture.log_scales, -2.0));                         // 1/sigma^2
  Tensor log_phi = sub(scale(mixture.log_scales, -static_cast<Scalar>(d)), scale(mul(sq, inv_var), 0.5));
  log_phi = add_scalar(log_phi, -0.5 * static_cast<Scalar>(d) * kLog2Pi);
  Tensor log_p = logsumexp_rows(add(mixture.log_weights, log_phi));             // U x 1
  if (frame_valid != nullptr) {
    if (static_cast<Index>(frame_valid->size()) != log_p.rows()) throw ShapeError("mdn_nll: mask length mismatch");
    Matrix w(log_p.rows(), 1);
    for (Index u = 0; u < w.rows(); ++u) w(u, 0) = (*frame_valid)[static_cast<size_t>(u)] ? 1.0 : 0.0;
    log_p = mul(log_p, Tensor(std::move(w)));
  }
  return scale(sum(log_p), -1.0);
}

int argmax_component(const RowVector& weights) {
  int best = 0;
  for (int i = 1; i < weights.cols(); ++i) {
    if (weights(i) > weights(best)) best = i;
  }
  return best;
}

RowVector sample(const MixtureParams& params) { return params.means.row(argmax_component(params.weights)); }

Tensor sample_means(const MixtureTensors& mixture) {
  const int m = mixture.components;
  const Index d = mixture.dim;
  Matrix select = Matrix::Zero(mixture.frames(), m * d);
  for (Index u = 0; u < mixture.frames(); ++u) {
    const int best = argmax_component(mixture.log_weights.value().row(u));
    select.block(u, best * d, 1, d).setOnes();
  }
  return matmul(mul(mixture.means, Tensor(std::move(select))), stacked_identity(m, d));
}

Tensor mdn_adversarial_loss(const Tensor& mdn_loss, const Tensor& generator_adv_loss, Scalar lambda_mdn,
                            Scalar lambda_gan) {
  if (lambda_mdn < 0 || lambda_gan < 0) throw ConfigError("mdn_adversarial_loss: weights must be >= 0");
  return add(scale(mdn_loss, lambda_mdn), scale(generator_adv_loss, lambda_gan));
}

}  // namespace progseq
