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

#include "progseq/adversarial.hpp"
#include "progseq/gradcheck.hpp"
#include "progseq/mdn.hpp"
#include "progseq/model.hpp"
#include "progseq/ops.hpp"

#include <algorithm>
#include <random>

namespace progseq {

namespace {

struct Case {
  std::string name;
  int seeds;
  // Builds inputs and the loss closure for one seed.
  std::function<std::pair<std::vector<Tensor>, std::function<Tensor()>>(std::mt19937_64&)> build;
};

Matrix uniform(Index r, Index c, std::mt19937_64& rng, Scalar lo = -1, Scalar hi = 1) {
  std::uniform_real_distribution<Scalar> dist(lo, hi);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

// Keeps samples at least `gap` away from a non-differentiable point.
Matrix away_from(Matrix m, Scalar kink, Scalar gap) {
  for (Index i = 0; i < m.size(); ++i) {
    Scalar& v = m.data()[i];
    if (std::abs(v - kink) < gap) v = kink + (v < kink ? -gap : gap);
  }
  return m;
}

Tensor leaf(Matrix m) { return Tensor(std::move(m), true); }

// Op outputs are reduced against fixed random weights so every output entry
// reaches the scalar loss with its own coefficient.
using Unary = std::function<Tensor(const Tensor&)>;

Case unary(const std::string& name, Index r, Index c, Unary f, Scalar lo = -1, Scalar hi = 1, Scalar kink = 0,
           Scalar gap = 0) {
  return {name, 20, [=](std::mt19937_64& rng) {
            Matrix v = uniform(r, c, rng, lo, hi);
            if (gap > 0) v = away_from(v, kink, gap);
            Tensor a = leaf(v);
            const Tensor shape = f(Tensor(v));
            Tensor proj_w(uniform(shape.rows(), shape.cols(), rng));
            return std::make_pair(std::vector<Tensor>{a},
                                  std::function<Tensor()>([=] { return sum(mul(f(a), proj_w)); }));
          }};
}

Case binary(const std::string& name, Index ar, Index ac, Index br, Index bc,
            std::function<Tensor(const Tensor&, const Tensor&)> f) {
  return {name, 20, [=](std::mt19937_64& rng) {
            Tensor a = leaf(uniform(ar, ac, rng));
            Tensor b = leaf(uniform(br, bc, rng));
            Tensor out = f(a, b);
            Tensor proj_w(uniform(out.rows(), out.cols(), rng));
            return std::make_pair(std::vector<Tensor>{a, b},
                                  std::function<Tensor()>([=] { return sum(mul(f(a, b), proj_w)); }));
          }};
}

std::vector<Case> cases() {
  std::vector<Case> out;
  out.push_back(binary("matmul", 3, 4, 4, 2, [](const Tensor& a, const Tensor& b) { return matmul(a, b); }));
  out.push_back(unary("transpose", 3, 4, [](const Tensor& a) { return transpose(a); }));
  out.push_back(binary("add", 3, 4, 3, 4, [](const Tensor& a, const Tensor& b) { return add(a, b); }));
  out.push_back(binary("sub", 3, 4, 3, 4, [](const Tensor& a, const Tensor& b) { return sub(a, b); }));
  out.push_back(binary("mul", 3, 4, 3, 4, [](const Tensor& a, const Tensor& b) { return mul(a, b); }));
  out.push_back(unary("scale", 3, 4, [](const Tensor& a) { return scale(a, -1.7); }));
  out.push_back(unary("add_scalar", 3, 4, [](const Tensor& a) { return add_scalar(a, 0.3); }));
  out.push_back(binary("add_row", 3, 4, 1, 4, [](const Tensor& a, const Tensor& b) { return add_row(a, b); }));
  out.push_back({"linear", 20, [](std::mt19937_64& rng) {
                   Tensor x = leaf(uniform(3, 4, rng));
                   Tensor w = leaf(uniform(4, 5, rng));
                   Tensor b = leaf(uniform(1, 5, rng));
                   Tensor p(uniform(3, 5, rng));
                   return std::make_pair(std::vector<Tensor>{x, w, b},
                                         std::function<Tensor()>([=] { return sum(mul(linear(x, w, b), p)); }));
                 }});
  out.push_back(binary("concat_rows", 2, 3, 4, 3, [](const Tensor& a, const Tensor& b) { return concat({a, b}, 0); }));
  out.push_back(binary("concat_cols", 3, 2, 3, 4, [](const Tensor& a, const Tensor& b) { return concat({a, b}, 1); }));
  out.push_back(unary("slice_rows", 5, 3, [](const Tensor& a) { return slice_rows(a, 1, 3); }));
  out.push_back(unary("slice_cols", 3, 5, [](const Tensor& a) { return slice_cols(a, 2, 2); }));
  out.push_back(unary("pad_rows", 3, 4, [](const Tensor& a) { return pad_rows(a, 6); }));
  out.push_back(unary("gather_rows", 5, 3, [](const Tensor& a) {
    static const std::vector<int> ids = {3, 0, 3, 4};
    return gather_rows(a, ids);
  }));
  out.push_back(unary("softmax_rows", 3, 5, [](const Tensor& a) { return softmax_rows(a); }, -2, 2));
  out.push_back(unary("softmax_rows_masked", 4, 4, [](const Tensor& a) {
    const Mask m = causal_mask(4);
    return softmax_rows(a, &m);
  }, -2, 2));
  out.push_back(unary("log_softmax_rows", 3, 5, [](const Tensor& a) { return log_softmax_rows(a); }, -2, 2));
  out.push_back(unary("logsumexp_rows", 3, 5, [](const Tensor& a) { return logsumexp_rows(a); }, -2, 2));
  out.push_back({"layer_norm", 20, [](std::mt19937_64& rng) {
                   Tensor x = leaf(uniform(3, 6, rng, -2, 2));
                   Tensor g = leaf(uniform(1, 6, rng, 0.5, 1.5));
                   Tensor b = leaf(uniform(1, 6, rng));
                   Tensor p(uniform(3, 6, rng));
                   return std::make_pair(std::vector<Tensor>{x, g, b},
                                         std::function<Tensor()>([=] { return sum(mul(layer_norm(x, g, b), p)); }));
                 }});
  out.push_back(unary("relu", 3, 4, [](const Tensor& a) { return relu(a); }, -1, 1, 0, 1e-3));
  out.push_back(unary("leaky_relu", 3, 4, [](const Tensor& a) { return leaky_relu(a, 0.2); }, -1, 1, 0, 1e-3));
  out.push_back(unary("sigmoid", 3, 4, [](const Tensor& a) { return sigmoid(a); }, -3, 3));
  out.push_back(unary("exp", 3, 4, [](const Tensor& a) { return exp(a); }));
  out.push_back(unary("log", 3, 4, [](const Tensor& a) { return log(a); }, 0.2, 2));
  out.push_back(unary("square", 3, 4, [](const Tensor& a) { return square(a); }));
  out.push_back(unary("clamp_min", 3, 4, [](const Tensor& a) { return clamp_min(a, 0.1); }, -1, 1, 0.1, 1e-3));
  out.push_back({"clamp", 20, [](std::mt19937_64& rng) {
                   Matrix v = away_from(away_from(uniform(3, 4, rng), -0.5, 1e-3), 0.5, 1e-3);
                   Tensor a = leaf(v);
                   Tensor p(uniform(3, 4, rng));
                   return std::make_pair(std::vector<Tensor>{a},
                                         std::function<Tensor()>([=] { return sum(mul(clamp(a, -0.5, 0.5), p)); }));
                 }});
  out.push_back(unary("sum", 3, 4, [](const Tensor& a) { return sum(a); }));
  out.push_back(unary("mean", 3, 4, [](const Tensor& a) { return mean(a); }));
  out.push_back(unary("sum_rows", 3, 4, [](const Tensor& a) { return sum_rows(a); }));
  out.push_back(unary("mean_rows", 3, 4, [](const Tensor& a) { return mean_rows(a); }));
  out.push_back(unary("sum_cols", 3, 4, [](const Tensor& a) { return sum_cols(a); }));
  out.push_back(unary("unfold_time", 5, 3, [](const Tensor& a) { return unfold_time(a, 3); }));
  out.push_back({"multi_head_attention", 20, [](std::mt19937_64& rng) {
                   Tensor x = leaf(uniform(4, 6, rng));
                   Tensor mem = leaf(uniform(3, 6, rng));
                   AttentionWeights w{leaf(uniform(6, 6, rng)), leaf(uniform(6, 6, rng)), leaf(uniform(6, 6, rng)),
                                      leaf(uniform(6, 6, rng))};
                   Tensor p(uniform(4, 6, rng));
                   return std::make_pair(std::vector<Tensor>{x, mem, w.query, w.key, w.value, w.output},
                                         std::function<Tensor()>([=] {
                                           const Mask m = causal_mask(4);
                                           Tensor self = multi_head_attention(x, x, w, 2, &m);
                                           return sum(mul(add(self, multi_head_attention(x, mem, w, 3)), p));
                                         }));
                 }});

  out.push_back({"loss.mse", 20, [](std::mt19937_64& rng) {
                   Tensor pred = leaf(uniform(5, 4, rng));
                   Tensor target(uniform(5, 4, rng));
                   Matrix mask = Matrix::Ones(5, 4);
                   mask.row(4).setZero();
                   return std::make_pair(std::vector<Tensor>{pred},
                                         std::function<Tensor()>([=] { return mse_loss(pred, target, mask); }));
                 }});
  out.push_back({"loss.gan_discriminator", 20, [](std::mt19937_64& rng) {
                   Tensor a = leaf(uniform(1, 1, rng, -3, 3));
                   Tensor b = leaf(uniform(1, 1, rng, -3, 3));
                   return std::make_pair(std::vector<Tensor>{a, b}, std::function<Tensor()>([=] {
                                           return discriminator_loss(sigmoid(a), sigmoid(b));
                                         }));
                 }});
  out.push_back({"loss.gan_generator", 20, [](std::mt19937_64& rng) {
                   Tensor b = leaf(uniform(1, 1, rng, -3, 3));
                   return std::make_pair(std::vector<Tensor>{b},
                                         std::function<Tensor()>([=] { return generator_adversarial_loss(sigmoid(b)); }));
                 }});
  out.push_back({"loss.mdn_nll", 20, [](std::mt19937_64& rng) {
                   const int m = 3;
                   const Index d = 4;
                   Tensor features = leaf(uniform(5, 6, rng));
                   MdnHeadWeights w{leaf(uniform(6, m, rng)),     leaf(uniform(1, m, rng)),
                                    leaf(uniform(6, m * d, rng)), leaf(uniform(1, m * d, rng)),
                                    leaf(uniform(6, m, rng, -0.3, 0.3)), leaf(uniform(1, m, rng, -0.3, 0.3))};
                   Tensor targets(uniform(5, d, rng));
                   MdnHeadOptions opts;
                   opts.components = m;
                   opts.dim = d;
                   return std::make_pair(
                       std::vector<Tensor>{features, w.weight_logits, w.bias_logits, w.weight_means, w.bias_means,
                                           w.weight_scales, w.bias_scales},
                       std::function<Tensor()>([=] { return mdn_nll(targets, mdn_head(features, w, opts)); }));
                 }});
  out.push_back({"loss.critic_network", 3, [](std::mt19937_64& rng) {
                   DiscriminatorConfig dc;
                   dc.layers = 2;
                   dc.channels = 4;
                   dc.max_frames = 6;
                   dc.max_tokens = 3;
                   dc.source_dim = 3;
                   dc.joints = 1;
                   dc.vocab_size = 5;
                   dc.seed = rng();
                   auto disc = std::make_shared<Discriminator>(dc);
                   Tensor real(uniform(5, 3, rng));
                   Tensor fake = leaf(uniform(4, 3, rng));
                   std::vector<Tensor> inputs{fake};
                   for (auto& p : disc->parameters().items()) inputs.push_back(p.tensor);
                   const std::vector<int> src = {2, 4};
                   return std::make_pair(inputs, std::function<Tensor()>([=] {
                                           Tensor dl = discriminator_loss(disc->score(real, src), disc->score(fake, src));
                                           return add(dl, generator_adversarial_loss(disc->score(fake, src)));
                                         }));
                 }});
  out.push_back({"loss.transformer_mse", 3, [](std::mt19937_64& rng) {
                   ModelConfig mc;
                   mc.layers = 1;
                   mc.heads = 2;
                   mc.embed_dim = 4;
                   mc.ff_dim = 6;
                   mc.joints = 1;
                   mc.vocab_size = 5;
                   mc.future_to = 2;
                   mc.seed = rng();
                   auto model = std::make_shared<ProgressiveTransformer>(mc);
                   Tensor inputs(uniform(4, 4, rng));
                   Tensor targets(uniform(4, 8, rng));
                   std::vector<Tensor> params;
                   for (auto& p : model->parameters().items()) params.push_back(p.tensor);
                   const std::vector<int> src = {2, 3, 4};
                   return std::make_pair(params, std::function<Tensor()>([=] {
                                           return mse_loss(model->decode(inputs, model->encode(src)), targets);
                                         }));
                 }});
  out.push_back({"loss.transformer_mdn", 3, [](std::mt19937_64& rng) {
                   ModelConfig mc;
                   mc.layers = 1;
                   mc.heads = 2;
                   mc.embed_dim = 4;
                   mc.ff_dim = 6;
                   mc.joints = 1;
                   mc.vocab_size = 5;
                   mc.head = OutputHead::mdn;
                   mc.mixtures = 2;
                   mc.seed = rng();
                   auto model = std::make_shared<ProgressiveTransformer>(mc);
                   Tensor inputs(uniform(4, 4, rng));
                   Tensor targets(uniform(4, 4, rng));
                   std::vector<Tensor> params;
                   for (auto& p : model->parameters().items()) params.push_back(p.tensor);
                   const std::vector<int> src = {2, 3};
                   return std::make_pair(params, std::function<Tensor()>([=] {
                                           return mdn_nll(targets, model->decode_mixture(inputs, model->encode(src)));
                                         }));
                 }});
  return out;
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(int seeds) {
  std::vector<GradCheckResult> rows;
  std::uint64_t case_index = 0;
  for (const Case& c : cases()) {
    GradCheckResult worst;
    worst.name = c.name;
    const int n = std::min(seeds, c.seeds);
    for (int s = 0; s < n; ++s) {
      std::mt19937_64 rng(1000 * case_index + static_cast<std::uint64_t>(s) + 1);
      auto [inputs, loss] = c.build(rng);
      const GradCheckResult r = check_gradients(c.name, loss, inputs);
      worst.max_rel_error = std::max(worst.max_rel_error, r.max_rel_error);
      worst.tolerance = r.tolerance;
      worst.seconds += r.seconds;
    }
    rows.push_back(worst);
    ++case_index;
  }
  return rows;
}

}  // namespace progseq
