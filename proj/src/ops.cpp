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

#include "progseq/ops.hpp"

#include "progseq/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace progseq {

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_mismatch(op, a, b);
}

template <typename Expr>
void accumulate(Node& n, const Expr& g) {
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Tensor make_result(Matrix value, const char* op, std::vector<Tensor> inputs, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  if (grad_enabled()) {
    bool any = false;
    for (const auto& t : inputs) any = any || t.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (auto& t : inputs) node->inputs.push_back(t.node());
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

Node& in(Node& n, size_t i) { return *n.inputs[i]; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  Matrix out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  return make_result(std::move(out), "matmul", {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) {
      Matrix g(x.value.rows(), x.value.cols());
      g.noalias() = n.grad * y.value.transpose();
      accumulate(x, g);
    }
    if (y.requires_grad) {
      Matrix g(y.value.rows(), y.value.cols());
      g.noalias() = x.value.transpose() * n.grad;
      accumulate(y, g);
    }
  });
}

Tensor transpose(const Tensor& a) {
  return make_result(a.value().transpose(), "transpose", {a},
                     [](Node& n) { accumulate(in(n, 0), n.grad.transpose()); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  return make_result(a.value() + b.value(), "add", {a, b}, [](Node& n) {
    accumulate(in(n, 0), n.grad);
    accumulate(in(n, 1), n.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  return make_result(a.value() - b.value(), "sub", {a, b}, [](Node& n) {
    accumulate(in(n, 0), n.grad);
    accumulate(in(n, 1), -n.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  return make_result(a.value().cwiseProduct(b.value()), "mul", {a, b}, [](Node& n) {
    Node& x = in(n, 0);
    Node& y = in(n, 1);
    if (x.requires_grad) accumulate(x, n.grad.cwiseProduct(y.value));
    if (y.requires_grad) accumulate(y, n.grad.cwiseProduct(x.value));
  });
}

Tensor scale(const Tensor& a, Scalar s) {
  return make_result(a.value() * s, "scale", {a}, [s](Node& n) { accumulate(in(n, 0), n.grad * s); });
}

Tensor add_scalar(const Tensor& a, Scalar s) {
  return make_result(a.value().array() + s, "add_scalar", {a}, [](Node& n) { accumulate(in(n, 0), n.grad); });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) shape_mismatch("add_row", a, row);
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return make_result(std::move(out), "add_row", {a, row}, [](Node& n) {
    accumulate(in(n, 0), n.grad);
    if (in(n, 1).requires_grad) accumulate(in(n, 1), n.grad.colwise().sum());
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) { return add_row(matmul(x, weight), bias); }

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  Index rows = 0;
  Index cols = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      if (p.cols() != parts[0].cols()) shape_mismatch("concat", parts[0], p);
      rows += p.rows();
      cols = p.cols();
    } else {
      if (p.rows() != parts[0].rows()) shape_mismatch("concat", parts[0], p);
      cols += p.cols();
      rows = p.rows();
    }
  }
  Matrix out(rows, cols);
  Index offset = 0;
  std::vector<Index> offsets;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    if (axis == 0) {
      out.middleRows(offset, p.rows()) = p.value();
      offset += p.rows();
    } else {
      out.middleCols(offset, p.cols()) = p.value();
      offset += p.cols();
    }
  }
  return make_result(std::move(out), "concat", parts, [axis, offsets](Node& n) {
    for (size_t i = 0; i < n.inputs.size(); ++i) {
      Node& x = in(n, i);
      if (!x.requires_grad) continue;
      if (axis == 0) {
        accumulate(x, n.grad.middleRows(offsets[i], x.value.rows()));
      } else {
        accumulate(x, n.grad.middleCols(offsets[i], x.value.cols()));
      }
    }
  });
}

Tensor slice_rows(const Tensor& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw ShapeError("slice_rows: rows [" + std::to_string(start) + "," + std::to_string(start + count) +
                     ") out of range for " + a.shape_string());
  }
  return make_result(a.value().middleRows(start, count), "slice_rows", {a}, [start](Node& n) {
    Node& x = in(n, 0);
    if (x.grad.size() == 0) x.grad = Matrix::Zero(x.value.rows(), x.value.cols());
    x.grad.middleRows(start, n.grad.rows()) += n.grad;
  });
}

Tensor slice_cols(const Tensor& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeError("slice_cols: cols [" + std::to_string(start) + "," + std::to_string(start + count) +
                     ") out of range for " + a.shape_string());
  }
  return make_result(a.value().middleCols(start, count), "slice_cols", {a}, [start](Node& n) {
    Node& x = in(n, 0);
    if (x.grad.size() == 0) x.grad = Matrix::Zero(x.value.rows(), x.value.cols());
    x.grad.middleCols(start, n.grad.cols()) += n.grad;
  });
}

Tensor pad_rows(const Tensor& a, Index total_rows) {
  if (total_rows < a.rows()) {
    throw ShapeError("pad_rows: " + a.shape_string() + " already exceeds " + std::to_string(total_rows) + " rows");
  }
  Matrix out = Matrix::Zero(total_rows, a.cols());
  out.topRows(a.rows()) = a.value();
  return make_result(std::move(out), "pad_rows", {a},
                     [](Node& n) { accumulate(in(n, 0), n.grad.topRows(in(n, 0).value.rows())); });
}

Tensor gather_rows(const Tensor& table, std::span<const int> ids) {
  Matrix out(static_cast<Index>(ids.size()), table.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw ShapeError("gather_rows: id " + std::to_string(ids[i]) + " out of range for table " +
                       table.shape_string());
    }
    out.row(static_cast<Index>(i)) = table.value().row(ids[i]);
  }
  std::vector<int> index(ids.begin(), ids.end());
  return make_result(std::move(out), "gather_rows", {table}, [index = std::move(index)](Node& n) {
    Node& t = in(n, 0);
    if (t.grad.size() == 0) t.grad = Matrix::Zero(t.value.rows(), t.value.cols());
    for (size_t i = 0; i < index.size(); ++i) t.grad.row(index[i]) += n.grad.row(static_cast<Index>(i));
  });
}

Tensor softmax_rows(const Tensor& a, const Mask* mask) {
  const Matrix& x = a.value();
  if (mask != nullptr && (mask->rows() != x.rows() || mask->cols() != x.cols())) {
    throw ShapeError("softmax_rows: mask [" + std::to_string(mask->rows()) + "x" + std::to_string(mask->cols()) +
                     "] vs " + a.shape_string());
  }
  Matrix out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    Scalar hi = -std::numeric_limits<Scalar>::infinity();
    for (Index c = 0; c < x.cols(); ++c) {
      if (mask == nullptr || !(*mask)(r, c)) hi = std::max(hi, x(r, c));
    }
    if (hi == -std::numeric_limits<Scalar>::infinity()) {
      throw ShapeError("softmax_rows: row " + std::to_string(r) + " has every position masked");
    }
    Scalar total = 0;
    for (Index c = 0; c < x.cols(); ++c) {
      Scalar e = (mask != nullptr && (*mask)(r, c)) ? 0.0 : std::exp(x(r, c) - hi);
      out(r, c) = e;
      total += e;
    }
    out.row(r) /= total;
  }
  return make_result(std::move(out), "softmax_rows", {a}, [](Node& n) {
    const Matrix& y = n.value;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = (n.grad.cwiseProduct(y)).rowwise().sum();
    Matrix g = y.cwiseProduct(n.grad.colwise() - dot);
    accumulate(in(n, 0), g);
  });
}

Tensor log_softmax_rows(const Tensor& a) {
  const Matrix& x = a.value();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> hi = x.rowwise().maxCoeff();
  Matrix shifted = x.colwise() - hi;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lse = shifted.array().exp().rowwise().sum().log().matrix();
  Matrix out = shifted.colwise() - lse;
  return make_result(std::move(out), "log_softmax_rows", {a}, [](Node& n) {
    Matrix p = n.value.array().exp().matrix();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> total = n.grad.rowwise().sum();
    Matrix g = n.grad - (p.array().colwise() * total.array()).matrix();
    accumulate(in(n, 0), g);
  });
}

Tensor logsumexp_rows(const Tensor& a) {
  const Matrix& x = a.value();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> hi = x.rowwise().maxCoeff();
  Matrix out = ((x.colwise() - hi).array().exp().rowwise().sum().log().matrix() + hi);
  return make_result(std::move(out), "logsumexp_rows", {a}, [](Node& n) {
    const Matrix& x = in(n, 0).value;
    Matrix p = (x.colwise() - n.value.col(0)).array().exp().matrix();
    Matrix g = p.array().colwise() * n.grad.col(0).array();
    accumulate(in(n, 0), g);
  });
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, Scalar eps) {
  if (gain.rows() != 1 || gain.cols() != a.cols()) shape_mismatch("layer_norm", a, gain);
  if (bias.rows() != 1 || bias.cols() != a.cols()) shape_mismatch("layer_norm", a, bias);
  const Matrix& x = a.value();
  const Index m = x.cols();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> mu = x.rowwise().mean();
  Matrix centered = x.colwise() - mu;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<Scalar>(m)) + eps).rsqrt().matrix();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  Matrix out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return make_result(std::move(out), "layer_norm", {a, gain, bias},
                     [xhat = std::move(xhat), inv_std = std::move(inv_std), m](Node& n) {
                       Node& xn = in(n, 0);
                       Node& gn = in(n, 1);
                       Node& bn = in(n, 2);
                       if (gn.requires_grad) accumulate(gn, n.grad.cwiseProduct(xhat).colwise().sum());
                       if (bn.requires_grad) accumulate(bn, n.grad.colwise().sum());
                       if (xn.requires_grad) {
                         Matrix dxhat = n.grad.array().rowwise() * gn.value.row(0).array();
                         Eigen::Matrix<Scalar, Eigen::Dynamic, 1> s1 = dxhat.rowwise().sum();
                         Eigen::Matrix<Scalar, Eigen::Dynamic, 1> s2 = dxhat.cwiseProduct(xhat).rowwise().sum();
                         const Scalar inv_m = 1.0 / static_cast<Scalar>(m);
                         Matrix g = (dxhat.array() - (s1.array() * inv_m).replicate(1, m) -
                                     xhat.array() * (s2.array() * inv_m).replicate(1, m))
                                        .colwise() *
                                    inv_std.array();
                         accumulate(xn, g);
                       }
                     });
}

Tensor relu(const Tensor& a) {
  return make_result(a.value().cwiseMax(0.0), "relu", {a}, [](Node& n) {
    Matrix g = (in(n, 0).value.array() > 0.0).select(n.grad, 0.0);
    accumulate(in(n, 0), g);
  });
}

Tensor leaky_relu(const Tensor& a, Scalar negative_slope) {
  Matrix out = (a.value().array() > 0.0).select(a.value(), a.value() * negative_slope);
  return make_result(std::move(out), "leaky_relu", {a}, [negative_slope](Node& n) {
    Matrix g = (in(n, 0).value.array() > 0.0).select(n.grad, n.grad * negative_slope);
    accumulate(in(n, 0), g);
  });
}

Tensor sigmoid(const Tensor& a) {
  Matrix out = a.value().unaryExpr([](Scalar v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const Scalar e = std::exp(v);
    return e / (1.0 + e);
  });
  return make_result(std::move(out), "sigmoid", {a}, [](Node& n) {
    const Matrix& y = n.value;
#ifdef PROGSEQ_INJECT_GRAD_BUG
    // Deliberately wrong derivative for the forced-bug gradcheck build.
    Matrix g = n.grad.cwiseProduct(y);
#else
    Matrix g = n.grad.array() * y.array() * (1.0 - y.array());
#endif
    accumulate(in(n, 0), g);
  });
}

Tensor exp(const Tensor& a) {
  return make_result(a.value().array().exp().matrix(), "exp", {a},
                     [](Node& n) { accumulate(in(n, 0), n.grad.cwiseProduct(n.value)); });
}

Tensor log(const Tensor& a) {
  return make_result(a.value().array().log().matrix(), "log", {a},
                     [](Node& n) { accumulate(in(n, 0), n.grad.cwiseQuotient(in(n, 0).value)); });
}

Tensor square(const Tensor& a) {
  return make_result(a.value().array().square().matrix(), "square", {a},
                     [](Node& n) { accumulate(in(n, 0), 2.0 * n.grad.cwiseProduct(in(n, 0).value)); });
}

Tensor clamp_min(const Tensor& a, Scalar lo) {
  return make_result(a.value().cwiseMax(lo), "clamp_min", {a}, [lo](Node& n) {
    Matrix g = (in(n, 0).value.array() > lo).select(n.grad, 0.0);
    accumulate(in(n, 0), g);
  });
}

Tensor clamp(const Tensor& a, Scalar lo, Scalar hi) {
  return make_result(a.value().cwiseMax(lo).cwiseMin(hi), "clamp", {a}, [lo, hi](Node& n) {
    const auto& x = in(n, 0).value.array();
    Matrix g = ((x > lo) && (x < hi)).select(n.grad, 0.0);
    accumulate(in(n, 0), g);
  });
}

Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), "sum", {a}, [](Node& n) {
    const Node& x = in(n, 0);
    accumulate(in(n, 0), Matrix::Constant(x.value.rows(), x.value.cols(), n.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  Matrix out(1, 1);
  out(0, 0) = a.value().mean();
  const Scalar inv = 1.0 / static_cast<Scalar>(a.size());
  return make_result(std::move(out), "mean", {a}, [inv](Node& n) {
    const Node& x = in(n, 0);
    accumulate(in(n, 0), Matrix::Constant(x.value.rows(), x.value.cols(), n.grad(0, 0) * inv));
  });
}

Tensor sum_rows(const Tensor& a) {
  return make_result(a.value().colwise().sum(), "sum_rows", {a}, [](Node& n) {
    accumulate(in(n, 0), n.grad.replicate(in(n, 0).value.rows(), 1));
  });
}

Tensor mean_rows(const Tensor& a) {
  if (a.rows() == 0) throw ShapeError("mean_rows: no rows");
  const Scalar inv = 1.0 / static_cast<Scalar>(a.rows());
  return make_result(a.value().colwise().mean(), "mean_rows", {a}, [inv](Node& n) {
    accumulate(in(n, 0), (n.grad * inv).replicate(in(n, 0).value.rows(), 1));
  });
}

Tensor sum_cols(const Tensor& a) {
  return make_result(a.value().rowwise().sum(), "sum_cols", {a}, [](Node& n) {
    accumulate(in(n, 0), n.grad.replicate(1, in(n, 0).value.cols()));
  });
}

Tensor unfold_time(const Tensor& a, Index kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw ShapeError("unfold_time: kernel must be odd, got " + std::to_string(kernel));
  const Matrix& x = a.value();
  const Index rows = x.rows();
  const Index ch = x.cols();
  const Index half = kernel / 2;
  Matrix out = Matrix::Zero(rows, kernel * ch);
  for (Index u = 0; u < rows; ++u) {
    for (Index k = 0; k < kernel; ++k) {
      const Index src = u + k - half;
      if (src >= 0 && src < rows) out.block(u, k * ch, 1, ch) = x.row(src);
    }
  }
  return make_result(std::move(out), "unfold_time", {a}, [kernel, half, ch](Node& n) {
    Node& x = in(n, 0);
    const Index rows = x.value.rows();
    Matrix g = Matrix::Zero(rows, ch);
    for (Index u = 0; u < rows; ++u) {
      for (Index k = 0; k < kernel; ++k) {
        const Index src = u + k - half;
        if (src >= 0 && src < rows) g.row(src) += n.grad.block(u, k * ch, 1, ch);
      }
    }
    accumulate(x, g);
  });
}

}  // namespace progseq
