#pragma once

// Reverse-mode differentiation over dense matrices.
//
// A Tape records every operation as a node holding its inputs, a cached
// output value and the forward/backward rules. Nodes are appended in
// evaluation order, so the tape is already topologically sorted and
// backward() is a single reverse sweep.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kamg/errors.hpp"
#include "kamg/numerics/matrix.hpp"
#include "kamg/numerics/parameters.hpp"

namespace kamg {

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
};

using ParamVars = std::unordered_map<std::string, Var>;

class Tape {
 public:
  using Inputs = std::span<const Matrix* const>;
  using GradInputs = std::span<Matrix* const>;
  using ForwardFn = std::function<Matrix(Inputs)>;
  // (inputs, output value, output gradient, input gradient slots; null when not needed)
  using BackwardFn = std::function<void(Inputs, const Matrix&, const Matrix&, GradInputs)>;

  struct Node {
    std::string_view op;
    std::vector<std::size_t> inputs;
    Matrix value;
    ForwardFn forward;
    BackwardFn backward;
    bool requires_grad = false;
    std::size_t param = ParameterSet::npos;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) {
    Node n;
    n.op = "const";
    n.value = std::move(value);
    return push(std::move(n));
  }

  Var parameter(const std::string& name, const Matrix& value) {
    for (const auto& pn : param_names_)
      if (pn == name) throw InputError("parameter registered twice on tape: " + name);
    Node n;
    n.op = "param";
    n.value = value;
    n.requires_grad = true;
    n.param = param_names_.size();
    param_names_.push_back(name);
    param_nodes_.push_back(nodes_.size());
    return push(std::move(n));
  }

  /// Registers every entry of `params` and returns handles keyed by name.
  ParamVars parameters(const ParameterSet& params) {
    ParamVars vars;
    for (std::size_t i = 0; i < params.size(); ++i) vars.emplace(params.name(i), parameter(params.name(i), params.value(i)));
    return vars;
  }

  Var apply(std::string_view op, std::vector<Var> inputs, ForwardFn forward, BackwardFn backward) {
    Node n;
    n.op = op;
    n.inputs.reserve(inputs.size());
    for (const Var& v : inputs) {
      if (v.tape != this) throw ContractError(std::string(op) + ": operand from a different tape");
      n.inputs.push_back(v.id);
      n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
    }
    n.value = forward(input_values(n));
    n.forward = std::move(forward);
    n.backward = std::move(backward);
    return push(std::move(n));
  }

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Recomputes every non-leaf node from its inputs; returns true when all
  /// recomputed values equal the cached ones bit-for-bit.
  bool replay_matches() const {
    for (const auto& n : nodes_) {
      if (!n.forward) continue;
      if (!(n.forward(input_values(n)) == n.value)) return false;
    }
    return true;
  }

  /// Gradient of a scalar node with respect to every registered parameter.
  /// Parameters the loss does not depend on receive zero gradients.
  ParameterSet backward(Var loss) const {
    const Node& out = nodes_.at(loss.id);
    if (out.value.rows() != 1 || out.value.cols() != 1) {
      throw ContractError("backward: loss node is " + out.value.shape_str() + ", expected scalar");
    }
    std::vector<Matrix> grads(loss.id + 1);
    grads[loss.id] = Matrix(1, 1, 1.0);
    for (std::size_t k = loss.id + 1; k-- > 0;) {
      const Node& n = nodes_[k];
      if (!n.requires_grad || !n.backward || grads[k].empty()) continue;
      std::vector<Matrix*> slots(n.inputs.size(), nullptr);
      for (std::size_t j = 0; j < n.inputs.size(); ++j) {
        const Node& in = nodes_[n.inputs[j]];
        if (!in.requires_grad) continue;
        Matrix& g = grads[n.inputs[j]];
        if (g.empty()) g = Matrix(in.value.rows(), in.value.cols());
        slots[j] = &g;
      }
      n.backward(input_values(n), n.value, grads[k], slots);
    }
    ParameterSet result;
    for (std::size_t p = 0; p < param_names_.size(); ++p) {
      const std::size_t id = param_nodes_[p];
      const Matrix& v = nodes_[id].value;
      if (id <= loss.id && !grads[id].empty()) {
        result.add(param_names_[p], std::move(grads[id]));
      } else {
        result.add(param_names_[p], Matrix(v.rows(), v.cols()));
      }
    }
    return result;
  }

 private:
  Var push(Node n) {
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
  }

  std::vector<const Matrix*> input_values(const Node& n) const {
    std::vector<const Matrix*> vals;
    vals.reserve(n.inputs.size());
    for (std::size_t id : n.inputs) vals.push_back(&nodes_[id].value);
    return vals;
  }

  std::vector<Node> nodes_;
  std::vector<std::string> param_names_;
  std::vector<std::size_t> param_nodes_;
};

inline const Matrix& value(Var v) { return v.tape->value(v); }

inline ParameterSet backward(Tape& tape, Var loss) { return tape.backward(loss); }

// ---------------------------------------------------------------------------
// Differentiable primitives
// ---------------------------------------------------------------------------

namespace ad {

namespace detail {
inline void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}
}  // namespace detail

inline Var add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  return a.tape->apply(
      "add", {a, b},
      [](Tape::Inputs in) {
        Matrix out = *in[0];
        detail::add_into(out, *in[1]);
        return out;
      },
      [](Tape::Inputs, const Matrix&, const Matrix& g, Tape::GradInputs gin) {
        if (gin[0]) detail::add_into(*gin[0], g);
        if (gin[1]) detail::add_into(*gin[1], g);
      });
}

/// Adds a 1 x c row to every row of an r x c matrix.
inline Var add_row(Var a, Var row) {
  const Matrix& av = value(a);
  const Matrix& rv = value(row);
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw DimensionError("add_row: " + av.shape_str() + " + " + rv.shape_str());
  }
  return a.tape->apply(
      "add_row", {a, row},
      [](Tape::Inputs in) {
        Matrix out = *in[0];
        const Matrix& r = *in[1];
        for (std::size_t i = 0; i < out.rows(); ++i)
          for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += r[j];
        return out;
      },
      [](Tape::Inputs, const Matrix&, const Matrix& g, Tape::GradInputs gin) {
        if (gin[0]) detail::add_into(*gin[0], g);
        if (gin[1]) {
          Matrix& gr = *gin[1];
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) gr[j] += g(i, j);
        }
      });
}

inline Var hadamard(Var a, Var b) {
  require_same_shape(value(a), value(b), "hadamard");
  return a.tape->apply(
      "hadamard", {a, b},
      [](Tape::Inputs in) {
        Matrix out = *in[0];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= (*in[1])[i];
        return out;
      },
      [](Tape::Inputs in, const Matrix&, const Matrix& g, Tape::GradInputs gin) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (gin[0]) (*gin[0])[i] += g[i] * (*in[1])[i];
          if (gin[1]) (*gin[1])[i] += g[i] * (*in[0])[i];
        }
      });
}

inline Var scale(Var a, double s) {
  return a.tape->apply(
      "scale", {a},
      [s](Tape::Inputs in) {
        Matrix out = *in[0];
        for (double& v : out.data()) v *= s;
        return out;
      },
      [s](Tape::Inputs, const Matrix&, const Matrix& g, Tape::GradInputs gin) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += s * g[i];
      });
}

/// op(A) * op(B) where op transposes when requested.
inline Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false) {
  return a.tape->apply(
      "matmul", {a, b},
      [trans_a, trans_b](Tape::Inputs in) { return kamg::matmul(*in[0], *in[1], trans_a, trans_b); },
      [trans_a, trans_b](Tape::Inputs in, const Matrix&, const Matrix& g, Tape::GradInputs gin) {
        // C = op(A) op(B); dop(A) = G op(B)^T, dop(B) = op(A)^T G
        if (gin[0]) {
          Matrix d = trans_a ? kamg::matmul(*in[1], g, trans_b, true)
                             : kamg::matmul(g, *in[1], false, !trans_b);
          detail::add_into(*gin[0], d);
        }
        if (gin[1]) {
          Matrix d = trans_b ? kamg::matmul(g, *in[0], true, trans_a)
                             : kamg::matmul(*in[0], g, !trans_a, false);
          detail::add_into(*gin[1], d);
        }
      });
}

inline Var transpose(Var a) {
  return a.tape->apply(
      "transpose", {a}, [](Tape::Inputs in) { return kamg::transpose(*in[0]); },
      [](Tape::Inputs, const Matrix&, const Matrix& g, Tape::GradInputs gin) {
        detail::add_into(*gin[0], kamg::transpose(g));
      });
}

inline Var tanh(Var a) {
  return a.tape->apply(
      "tanh", {a},
      [](Tape::Inputs in) {
        Matrix out = *in[0];
        for (double& v : out.data()) v = std::tanh(v);
        return out;
      },
      [](Tape::Inputs, const Matrix& y, const Matrix& g, Tape::GradInputs gin) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * (1.0 - y[i] * y[i]);
      });
}

inline Var relu(Var a) {
  return a.tape->apply(
      "relu", {a},
      [](Tape::Inputs in) {
        Matrix out = *in[0];
        for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
        return out;
      },
      [](Tape::Inputs in, const Matrix&, const Matrix& g, Tape::GradInputs gin) {
        for (std::size_t i = 0; i < g.size(); ++i)
          if ((*in[0])[i] > 0.0) (*gin[0])[i] += g[i];
      });
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Var sigmoid(Var a) {
  return a.tape->apply(
      "sigmoid", {a},
      [](Tape::Inputs in) {
        Matrix out = *in[0];
        for (double& v : out.data()) v = sigmoid(v);
        return out;
      },
      [](Tape::Inputs, const Matrix& y, const Matrix& g, Tape::GradInputs gin) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * y[i] * (1.0 - y[i]);
      });
}

/// Softmax down each column (every column sums to one).
inline Var softmax_cols(Var a) {
  if (value(a).rows() == 0) throw DimensionError("softmax_cols: empty column");
  return a.tape->apply(
      "softmax_cols", {a},
      [](Tape::Inputs in) {
        const Matrix& x = *in[0];
        Matrix out(x.rows(), x.cols());
        std::vector<double> col(x.rows());
        for (std::size_t j = 0; j < x.cols(); ++j) {
          for (std::size_t i = 0; i < x.rows(); ++i) col[i] = x(i, j);
          const Vector s = kamg::softmax(col);
          for (std::size_t i = 0; i < x.rows(); ++i) out(i, j) = s[i];
        }
        return out;
      },
      [](Tape::Inputs, const Matrix& y, const Matrix& g, Tape::GradInputs gin) {
        Matrix& gx = *gin[0];
        for (std::size_t j = 0; j < y.cols(); ++j) {
          double inner = 0.0;
          for (std::size_t i = 0; i < y.rows(); ++i) inner += g(i, j) * y(i, j);
          for (std::size_t i = 0; i < y.rows(); ++i) gx(i, j) += y(i, j) * (g(i, j) - inner);
        }
      });
}

/// Horizontal concatenation [A_1, A_2, ...] of matrices with equal row counts.
inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no operands");
  const std::size_t rows = value(parts[0]).rows();
  for (const Var& p : parts) {
    if (value(p).rows() != rows) throw DimensionError("concat_cols: row count mismatch");
  }
  return parts[0].tape->apply(
      "concat_cols", parts,
      [](Tape::Inputs in) {
        std::size_t cols = 0;
        for (const Matrix* m : in) cols += m->cols();
        Matrix out(in[0]->rows(), cols);
        std::size_t off = 0;
        for (const Matrix* m : in) {
          for (std::size_t i = 0; i < m->rows(); ++i)
            for (std::size_t j = 0; j < m->cols(); ++j) out(i, off + j) = (*m)(i, j);
          off += m->cols();
        }
        return out;
      },
      [](Tape::Inputs in, const Matrix&, const Matrix& g, Tape::GradInputs gin) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < in.size(); ++k) {
          const std::size_t c = in[k]->cols();
          if (gin[k]) {
            for (std::size_t i = 0; i < g.rows(); ++i)
              for (std::size_t j = 0; j < c; ++j) (*gin[k])(i, j) += g(i, off + j);
          }
          off += c;
        }
      });
}

/// Gathers rows by index (indices may repeat).
inline Var select_rows(Var a, std::vector<std::size_t> rows) {
  for (std::size_t r : rows) {
    if (r >= value(a).rows()) throw DimensionError("select_rows: index out of range");
  }
  return a.tape->apply(
      "select_rows", {a},
      [rows](Tape::Inputs in) {
        const Matrix& x = *in[0];
        Matrix out(rows.size(), x.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
          for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(rows[i], j);
        return out;
      },
      [rows](Tape::Inputs, const Matrix&, const Matrix& g, Tape::GradInputs gin) {
        for (std::size_t i = 0; i < rows.size(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) (*gin[0])(rows[i], j) += g(i, j);
      });
}

inline Var sum(Var a) {
  return a.tape->apply(
      "sum", {a},
      [](Tape::Inputs in) {
        double s = 0.0;
        for (double v : in[0]->data()) s += v;
        return Matrix(1, 1, s);
      },
      [](Tape::Inputs, const Matrix&, const Matrix& g, Tape::GradInputs gin) {
        for (double& v : gin[0]->data()) v += g[0];
      });
}

inline Var mean(Var a) {
  if (value(a).empty()) throw DimensionError("mean: empty matrix");
  return a.tape->apply(
      "mean", {a},
      [](Tape::Inputs in) {
        double s = 0.0;
        for (double v : in[0]->data()) s += v;
        return Matrix(1, 1, s / static_cast<double>(in[0]->size()));
      },
      [](Tape::Inputs in, const Matrix&, const Matrix& g, Tape::GradInputs gin) {
        const double d = g[0] / static_cast<double>(in[0]->size());
        for (double& v : gin[0]->data()) v += d;
      });
}

/// Per-row inner products of two equally shaped matrices; result is r x 1.
inline Var rowwise_dot(Var a, Var b) {
  require_same_shape(value(a), value(b), "rowwise_dot");
  return a.tape->apply(
      "rowwise_dot", {a, b},
      [](Tape::Inputs in) {
        Matrix out(in[0]->rows(), 1);
        for (std::size_t i = 0; i < in[0]->rows(); ++i) out[i] = dot(in[0]->row_span(i), in[1]->row_span(i));
        return out;
      },
      [](Tape::Inputs in, const Matrix&, const Matrix& g, Tape::GradInputs gin) {
        for (std::size_t i = 0; i < in[0]->rows(); ++i)
          for (std::size_t j = 0; j < in[0]->cols(); ++j) {
            if (gin[0]) (*gin[0])(i, j) += g[i] * (*in[1])(i, j);
            if (gin[1]) (*gin[1])(i, j) += g[i] * (*in[0])(i, j);
          }
      });
}

/// Sliding windows of `width` consecutive rows with zero "same" padding:
/// row t of the n x (width*c) result is [x_{t-left}, ..., x_{t-left+width-1}]
/// with left = (width-1)/2. A 1-D convolution is unfold followed by matmul.
inline Var unfold_same(Var a, std::size_t width) {
  if (width == 0) throw DimensionError("unfold_same: zero width");
  const std::size_t left = (width - 1) / 2;
  auto src_row = [left](std::size_t t, std::size_t k, std::size_t n) -> std::ptrdiff_t {
    const auto r = static_cast<std::ptrdiff_t>(t + k) - static_cast<std::ptrdiff_t>(left);
    return (r < 0 || r >= static_cast<std::ptrdiff_t>(n)) ? -1 : r;
  };
  return a.tape->apply(
      "unfold_same", {a},
      [width, src_row](Tape::Inputs in) {
        const Matrix& x = *in[0];
        const std::size_t n = x.rows(), c = x.cols();
        Matrix out(n, width * c);
        for (std::size_t t = 0; t < n; ++t)
          for (std::size_t k = 0; k < width; ++k) {
            const auto r = src_row(t, k, n);
            if (r < 0) continue;
            for (std::size_t j = 0; j < c; ++j) out(t, k * c + j) = x(static_cast<std::size_t>(r), j);
          }
        return out;
      },
      [width, src_row](Tape::Inputs in, const Matrix&, const Matrix& g, Tape::GradInputs gin) {
        const std::size_t n = in[0]->rows(), c = in[0]->cols();
        for (std::size_t t = 0; t < n; ++t)
          for (std::size_t k = 0; k < width; ++k) {
            const auto r = src_row(t, k, n);
            if (r < 0) continue;
            for (std::size_t j = 0; j < c; ++j) (*gin[0])(static_cast<std::size_t>(r), j) += g(t, k * c + j);
          }
      });
}

inline constexpr double kLogClamp = 1e-12;

/// Mean binary cross-entropy between probabilities and 0/1 targets of the
/// same shape. Probabilities are clamped to [eps, 1-eps] inside the logs.
inline Var bce_mean(Var probs, const Matrix& targets) {
  require_same_shape(value(probs), targets, "bce_mean");
  if (targets.empty()) throw DimensionError("bce_mean: empty input");
  return probs.tape->apply(
      "bce_mean", {probs},
      [targets](Tape::Inputs in) {
        const Matrix& p = *in[0];
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double q = std::clamp(p[i], kLogClamp, 1.0 - kLogClamp);
          s -= targets[i] * std::log(q) + (1.0 - targets[i]) * std::log(1.0 - q);
        }
        return Matrix(1, 1, s / static_cast<double>(p.size()));
      },
      [targets](Tape::Inputs in, const Matrix&, const Matrix& g, Tape::GradInputs gin) {
        const Matrix& p = *in[0];
        const double inv_n = 1.0 / static_cast<double>(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (p[i] < kLogClamp || p[i] > 1.0 - kLogClamp) continue;  // clamped region is flat
          const double d = -targets[i] / p[i] + (1.0 - targets[i]) / (1.0 - p[i]);
          (*gin[0])[i] += g[0] * d * inv_n;
        }
      });
}

}  // namespace ad
}  // namespace kamg
