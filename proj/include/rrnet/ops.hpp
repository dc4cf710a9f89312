#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "rrnet/tensor.hpp"

namespace rrnet {

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
  }
}

inline void check_index(Index idx, Index bound, const char* op) {
  if (idx < 0 || idx >= bound) {
    throw BoundsError(std::string(op) + ": index " + std::to_string(idx) + " out of range [0, " +
                      std::to_string(bound) + ")");
  }
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree " + a.shape() + " x " + b.shape());
  }
  Matrix out = a.value() * b.value();
  auto an = a.shared(), bn = b.shared();
  auto ga = detail::sink(a), gb = detail::sink(b);
  return detail::make_result(std::move(out), {&a, &b}, "matmul", [an, bn, ga, gb](const Matrix& g) {
    if (ga) detail::grad_buffer(*ga).noalias() += g * bn->value.transpose();
    if (gb) detail::grad_buffer(*gb).noalias() += an->value.transpose() * g;
  });
}

inline Tensor transpose(const Tensor& a) {
  Matrix out = a.value().transpose();
  auto ga = detail::sink(a);
  return detail::make_result(std::move(out), {&a}, "transpose", [ga](const Matrix& g) {
    if (ga) detail::grad_buffer(*ga) += g.transpose();
  });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  Matrix out = a.value() + b.value();
  auto ga = detail::sink(a), gb = detail::sink(b);
  return detail::make_result(std::move(out), {&a, &b}, "add", [ga, gb](const Matrix& g) {
    if (ga) detail::grad_buffer(*ga) += g;
    if (gb) detail::grad_buffer(*gb) += g;
  });
}

/// Adds a 1 x c row vector to every row of `a`.
inline Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: expected 1x" + std::to_string(a.cols()) + " row, got " + row.shape());
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  auto ga = detail::sink(a), gr = detail::sink(row);
  return detail::make_result(std::move(out), {&a, &row}, "add_row", [ga, gr](const Matrix& g) {
    if (ga) detail::grad_buffer(*ga) += g;
    if (gr) detail::grad_buffer(*gr) += g.colwise().sum();
  });
}

inline Tensor scale(const Tensor& a, double s) {
  Matrix out = a.value() * s;
  auto ga = detail::sink(a);
  return detail::make_result(std::move(out), {&a}, "scale", [ga, s](const Matrix& g) {
    if (ga) detail::grad_buffer(*ga) += g * s;
  });
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row counts differ " + a.shape() + " vs " + b.shape());
  }
  const Index p = a.cols();
  const Index q = b.cols();
  Matrix out(a.rows(), p + q);
  out.leftCols(p) = a.value();
  out.rightCols(q) = b.value();
  auto ga = detail::sink(a), gb = detail::sink(b);
  return detail::make_result(std::move(out), {&a, &b}, "concat_cols",
                             [ga, gb, p, q](const Matrix& g) {
                               if (ga) detail::grad_buffer(*ga) += g.leftCols(p);
                               if (gb) detail::grad_buffer(*gb) += g.rightCols(q);
                             });
}

inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("concat_rows: column counts differ " + a.shape() + " vs " + b.shape());
  }
  const Index p = a.rows();
  const Index q = b.rows();
  Matrix out(p + q, a.cols());
  out.topRows(p) = a.value();
  out.bottomRows(q) = b.value();
  auto ga = detail::sink(a), gb = detail::sink(b);
  return detail::make_result(std::move(out), {&a, &b}, "concat_rows",
                             [ga, gb, p, q](const Matrix& g) {
                               if (ga) detail::grad_buffer(*ga) += g.topRows(p);
                               if (gb) detail::grad_buffer(*gb) += g.bottomRows(q);
                             });
}

inline Tensor slice_cols(const Tensor& a, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") outside " + a.shape());
  }
  Matrix out = a.value().middleCols(begin, count);
  auto ga = detail::sink(a);
  return detail::make_result(std::move(out), {&a}, "slice_cols", [ga, begin, count](const Matrix& g) {
    if (ga) detail::grad_buffer(*ga).middleCols(begin, count) += g;
  });
}

inline Tensor slice_rows(const Tensor& a, Index begin, Index count) {
  if (begin < 0 || count < 0 || begin + count > a.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") outside " + a.shape());
  }
  Matrix out = a.value().middleRows(begin, count);
  auto ga = detail::sink(a);
  return detail::make_result(std::move(out), {&a}, "slice_rows", [ga, begin, count](const Matrix& g) {
    if (ga) detail::grad_buffer(*ga).middleRows(begin, count) += g;
  });
}

inline Tensor relu(const Tensor& x) {
  Matrix out = x.value().cwiseMax(0.0);
  auto gx = detail::sink(x);
  auto xn = x.shared();
  return detail::make_result(std::move(out), {&x}, "relu", [gx, xn](const Matrix& g) {
    if (gx) {
      detail::grad_buffer(*gx).array() += (xn->value.array() > 0.0).select(g.array(), 0.0);
    }
  });
}

namespace detail {

inline double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace detail

inline Tensor sigmoid(const Tensor& x) {
  Matrix out = x.value().unaryExpr(&detail::stable_sigmoid);
  auto gx = detail::sink(x);
  auto xn = x.shared();
  return detail::make_result(std::move(out), {&x}, "sigmoid", [gx, xn](const Matrix& g) {
    if (!gx) return;
    Matrix s = xn->value.unaryExpr(&detail::stable_sigmoid);
    detail::grad_buffer(*gx).array() += g.array() * s.array() * (1.0 - s.array());
  });
}

/// Row j of the result is row idx[j] of `t`; the backward pass scatter-adds.
inline Tensor gather_rows(const Tensor& t, const IndexList& idx) {
  for (Index i : idx) detail::check_index(i, t.rows(), "gather_rows");
  Matrix out(static_cast<Index>(idx.size()), t.cols());
  for (std::size_t j = 0; j < idx.size(); ++j) out.row(static_cast<Index>(j)) = t.value().row(idx[j]);
  auto gt = detail::sink(t);
  auto indices = std::make_shared<const IndexList>(idx);
  return detail::make_result(std::move(out), {&t}, "gather_rows", [gt, indices](const Matrix& g) {
    if (!gt) return;
    Matrix& dst = detail::grad_buffer(*gt);
    for (std::size_t j = 0; j < indices->size(); ++j) dst.row((*indices)[j]) += g.row(static_cast<Index>(j));
  });
}

/// Row t of the result is the mean of all rows of `values` whose target is t;
/// rows nobody targets are zero.
inline Tensor scatter_mean(const Tensor& values, const IndexList& targets, Index n) {
  if (static_cast<Index>(targets.size()) != values.rows()) {
    throw ShapeError("scatter_mean: " + std::to_string(targets.size()) + " targets for " +
                     values.shape() + " values");
  }
  for (Index t : targets) detail::check_index(t, n, "scatter_mean");
  std::vector<double> count(static_cast<std::size_t>(n), 0.0);
  for (Index t : targets) count[static_cast<std::size_t>(t)] += 1.0;
  Matrix out = Matrix::Zero(n, values.cols());
  for (std::size_t k = 0; k < targets.size(); ++k) out.row(targets[k]) += values.value().row(static_cast<Index>(k));
  for (Index t = 0; t < n; ++t) {
    if (count[static_cast<std::size_t>(t)] > 0.0) out.row(t) /= count[static_cast<std::size_t>(t)];
  }
  auto gv = detail::sink(values);
  auto tg = std::make_shared<const IndexList>(targets);
  auto cnt = std::make_shared<const std::vector<double>>(std::move(count));
  return detail::make_result(std::move(out), {&values}, "scatter_mean", [gv, tg, cnt](const Matrix& g) {
    if (!gv) return;
    Matrix& dst = detail::grad_buffer(*gv);
    for (std::size_t k = 0; k < tg->size(); ++k) {
      const Index t = (*tg)[k];
      dst.row(static_cast<Index>(k)) += g.row(t) / (*cnt)[static_cast<std::size_t>(t)];
    }
  });
}

/// Mean of the attributes of every edge incident to each node, whether the
/// node is the sender or the receiver. Nodes without incident edges get zero.
inline Tensor incident_mean(const Tensor& edge_attrs, std::shared_ptr<const IndexList> senders,
                            std::shared_ptr<const IndexList> receivers, Index n) {
  const std::size_t m = senders->size();
  if (receivers->size() != m || static_cast<Index>(m) != edge_attrs.rows()) {
    throw ShapeError("incident_mean: " + std::to_string(senders->size()) + " senders, " +
                     std::to_string(receivers->size()) + " receivers for " + edge_attrs.shape() +
                     " edge attributes");
  }
  auto count = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n), 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    detail::check_index((*senders)[k], n, "incident_mean");
    detail::check_index((*receivers)[k], n, "incident_mean");
    (*count)[static_cast<std::size_t>((*senders)[k])] += 1.0;
    (*count)[static_cast<std::size_t>((*receivers)[k])] += 1.0;
  }
  Matrix out = Matrix::Zero(n, edge_attrs.cols());
  const Matrix& e = edge_attrs.value();
  for (std::size_t k = 0; k < m; ++k) {
    out.row((*senders)[k]) += e.row(static_cast<Index>(k));
    out.row((*receivers)[k]) += e.row(static_cast<Index>(k));
  }
  for (Index t = 0; t < n; ++t) {
    const double c = (*count)[static_cast<std::size_t>(t)];
    if (c > 0.0) out.row(t) /= c;
  }
  auto ge = detail::sink(edge_attrs);
  return detail::make_result(
      std::move(out), {&edge_attrs}, "incident_mean", [ge, senders, receivers, count](const Matrix& g) {
        if (!ge) return;
        Matrix& dst = detail::grad_buffer(*ge);
        for (std::size_t k = 0; k < senders->size(); ++k) {
          const Index s = (*senders)[k];
          const Index r = (*receivers)[k];
          dst.row(static_cast<Index>(k)) +=
              g.row(s) / (*count)[static_cast<std::size_t>(s)] + g.row(r) / (*count)[static_cast<std::size_t>(r)];
        }
      });
}

inline Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  auto ga = detail::sink(a);
  return detail::make_result(std::move(out), {&a}, "sum", [ga](const Matrix& g) {
    if (ga) detail::grad_buffer(*ga).array() += g(0, 0);
  });
}

enum class Reduction { Sum, Mean };

inline constexpr double kProbabilityClamp = 1e-7;

/// Binary cross-entropy -sum(y log p + (1-y) log(1-p)) with p clamped to
/// [1e-7, 1-1e-7]. Soft labels in [0,1] are accepted.
inline Tensor bce_loss(const Tensor& p, const Tensor& y, Reduction reduction = Reduction::Sum) {
  if (p.cols() != 1 || y.cols() != 1 || p.rows() != y.rows()) {
    throw ShapeError("bce_loss: expected matching kx1 tensors, got " + p.shape() + " and " + y.shape());
  }
  const Index k = p.rows();
  const double norm = (reduction == Reduction::Mean && k > 0) ? 1.0 / static_cast<double>(k) : 1.0;
  double total = 0.0;
  for (Index i = 0; i < k; ++i) {
    const double pi = std::clamp(p(i, 0), kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double yi = y(i, 0);
    total -= yi * std::log(pi) + (1.0 - yi) * std::log(1.0 - pi);
  }
  Matrix out(1, 1);
  out(0, 0) = total * norm;
  auto gp = detail::sink(p);
  auto gy = detail::sink(y);
  auto pn = p.shared(), yn = y.shared();
  return detail::make_result(std::move(out), {&p, &y}, "bce_loss", [gp, gy, pn, yn, norm](const Matrix& g) {
    const Index rows = pn->value.rows();
    const double scale_factor = g(0, 0) * norm;
    for (Index i = 0; i < rows; ++i) {
      const double raw = pn->value(i, 0);
      const double pi = std::clamp(raw, kProbabilityClamp, 1.0 - kProbabilityClamp);
      const double yi = yn->value(i, 0);
      if (gp && raw == pi) {
        // Outside the clamp window the loss is flat in p.
        detail::grad_buffer(*gp)(i, 0) += scale_factor * (-(yi / pi) + (1.0 - yi) / (1.0 - pi));
      }
      if (gy) detail::grad_buffer(*gy)(i, 0) += scale_factor * (std::log(1.0 - pi) - std::log(pi));
    }
  });
}

enum class Activation { None, Relu };

/// Dense term x * w of a fused affine map.
struct DenseTerm {
  Tensor x;
  Tensor w;
};

/// Gathered term table[rows[j]] of a fused affine map.
struct GatherTerm {
  Tensor table;
  std::shared_ptr<const IndexList> rows;
};

/// act( sum_i x_i * w_i + sum_j table_j[rows_j] + bias ).
///
/// Equivalent to applying one linear layer to the column-concatenation of
/// the inputs, without materializing the concatenation. Gathered terms let
/// per-edge layers project node tables once and index the projections.
inline Tensor affine(const std::vector<DenseTerm>& dense, const std::vector<GatherTerm>& gathered,
                     const Tensor& bias, Activation act = Activation::None) {
  Index rows = -1;
  Index cols = -1;
  auto expect = [&](Index r, Index c, const std::string& what) {
    if (rows < 0) rows = r;
    if (cols < 0) cols = c;
    if (r != rows || c != cols) {
      throw ShapeError("affine: " + what + " yields " + shape_str(r, c) + ", expected " + shape_str(rows, cols));
    }
  };
  for (const auto& t : dense) {
    if (t.x.cols() != t.w.rows()) {
      throw ShapeError("affine: inner dimensions disagree " + t.x.shape() + " x " + t.w.shape());
    }
    expect(t.x.rows(), t.w.cols(), "dense term");
  }
  for (const auto& t : gathered) {
    for (Index i : *t.rows) detail::check_index(i, t.table.rows(), "affine");
    expect(static_cast<Index>(t.rows->size()), t.table.cols(), "gathered term");
  }
  if (rows < 0) throw ShapeError("affine: no terms");
  if (bias.defined() && (bias.rows() != 1 || bias.cols() != cols)) {
    throw ShapeError("affine: bias " + bias.shape() + " does not match width " + std::to_string(cols));
  }

  Matrix out = Matrix::Zero(rows, cols);
  for (const auto& t : dense) out.noalias() += t.x.value() * t.w.value();
  for (const auto& t : gathered) {
    const Matrix& table = t.table.value();
    for (Index j = 0; j < rows; ++j) out.row(j) += table.row((*t.rows)[static_cast<std::size_t>(j)]);
  }
  if (bias.defined()) out.rowwise() += bias.value().row(0);
  if (act == Activation::Relu) out = out.cwiseMax(0.0);

  std::vector<const Tensor*> inputs;
  struct DenseRef {
    std::shared_ptr<detail::Node> x, w, gx, gw;
  };
  struct GatherRef {
    std::shared_ptr<detail::Node> gtable;
    std::shared_ptr<const IndexList> rows;
  };
  std::vector<DenseRef> dense_refs;
  std::vector<GatherRef> gather_refs;
  for (const auto& t : dense) {
    inputs.push_back(&t.x);
    inputs.push_back(&t.w);
    dense_refs.push_back({t.x.shared(), t.w.shared(), detail::sink(t.x), detail::sink(t.w)});
  }
  for (const auto& t : gathered) {
    inputs.push_back(&t.table);
    gather_refs.push_back({detail::sink(t.table), t.rows});
  }
  inputs.push_back(&bias);
  auto gb = bias.defined() ? detail::sink(bias) : nullptr;

  Tensor result = detail::make_result(std::move(out), inputs, "affine", nullptr);
  if (!result.requires_grad()) return result;

  // The ReLU mask comes from the stored output, so the rule holds a weak
  // reference to it to avoid a cycle through the tape record.
  std::weak_ptr<detail::Node> self = result.shared();
  auto rule = [dense_refs = std::move(dense_refs), gather_refs = std::move(gather_refs), gb, act,
               self](const Matrix& g) {
    Matrix masked;
    const Matrix* gpre = &g;
    if (act == Activation::Relu) {
      auto out_node = self.lock();
      masked = (out_node->value.array() > 0.0).select(g.array(), 0.0).matrix();
      gpre = &masked;
    }
    for (const auto& d : dense_refs) {
      if (d.gx) detail::grad_buffer(*d.gx).noalias() += *gpre * d.w->value.transpose();
      if (d.gw) detail::grad_buffer(*d.gw).noalias() += d.x->value.transpose() * *gpre;
    }
    for (const auto& t : gather_refs) {
      if (!t.gtable) continue;
      Matrix& dst = detail::grad_buffer(*t.gtable);
      for (std::size_t j = 0; j < t.rows->size(); ++j) dst.row((*t.rows)[j]) += gpre->row(static_cast<Index>(j));
    }
    if (gb) detail::grad_buffer(*gb) += gpre->colwise().sum();
  };
  GradientTape::current()->set_last_rule(std::move(rule));
  return result;
}

}  // namespace rrnet
