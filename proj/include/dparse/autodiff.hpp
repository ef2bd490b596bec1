// Copyright 2026 The dparse Authors.
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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dparse/errors.hpp"
#include "dparse/rng.hpp"

// Reverse-mode automatic differentiation over dense column-major-free
// (row-major) real arrays. A Tape records every forward op; backward walks
// the records in reverse creation order.
namespace dparse::ad {

// Trainable array with Adam state. Embedding tables set `sparse_rows`, in
// which case only rows that received gradient are updated by adam_step.
template <class Real>
struct Parameter {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::vector<Real> value;
  std::vector<Real> grad;
  std::vector<Real> m;
  std::vector<Real> v;
  bool sparse_rows = false;
  std::vector<char> touched_rows;
  bool touched = false;

  std::size_t size() const { return value.size(); }
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <class Real>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter<Real>& add(const std::string& name, int rows, int cols, bool sparse_rows = false) {
    if (index_.count(name)) throw ContractError("duplicate parameter '" + name + "'");
    Parameter<Real>& p = params_.emplace_back();
    p.name = name;
    p.rows = rows;
    p.cols = cols;
    const auto n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    p.value.assign(n, Real(0));
    p.grad.assign(n, Real(0));
    p.m.assign(n, Real(0));
    p.v.assign(n, Real(0));
    p.sparse_rows = sparse_rows;
    if (sparse_rows) p.touched_rows.assign(static_cast<std::size_t>(rows), 0);
    index_.emplace(name, params_.size() - 1);
    return p;
  }

  // Entries uniform in [-bound, bound].
  Parameter<Real>& add_uniform(const std::string& name, int rows, int cols, double bound, Rng& rng,
                               bool sparse_rows = false) {
    Parameter<Real>& p = add(name, rows, cols, sparse_rows);
    for (Real& x : p.value) x = static_cast<Real>(rng.uniform(-bound, bound));
    return p;
  }

  // Glorot/Xavier uniform: +-sqrt(6 / (fan_in + fan_out)).
  Parameter<Real>& add_glorot(const std::string& name, int rows, int cols, Rng& rng) {
    return add_uniform(name, rows, cols, std::sqrt(6.0 / static_cast<double>(rows + cols)), rng);
  }

  Parameter<Real>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  Parameter<Real>& get(const std::string& name) {
    if (auto* p = find(name)) return *p;
    throw ContractError("unknown parameter '" + name + "'");
  }

  std::deque<Parameter<Real>>& params() { return params_; }
  const std::deque<Parameter<Real>>& params() const { return params_; }

  long step() const { return step_; }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) {
      if (!p.touched) continue;
      std::fill(p.grad.begin(), p.grad.end(), Real(0));
      if (p.sparse_rows) std::fill(p.touched_rows.begin(), p.touched_rows.end(), 0);
      p.touched = false;
    }
  }

  // One bias-corrected Adam update over all parameters, then clears the
  // gradients. Sparse tables update only their touched rows.
  void adam_step(const AdamConfig& cfg) {
    ++step_;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    auto update = [&](Parameter<Real>& p, std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const double g = p.grad[i];
        const double m = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
        const double v = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
        p.m[i] = static_cast<Real>(m);
        p.v[i] = static_cast<Real>(v);
        const double mhat = m / c1;
        const double vhat = v / c2;
        p.value[i] = static_cast<Real>(p.value[i] - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon));
      }
    };
    for (auto& p : params_) {
      if (p.sparse_rows) {
        if (!p.touched) continue;
        const auto cols = static_cast<std::size_t>(p.cols);
        for (std::size_t r = 0; r < p.touched_rows.size(); ++r) {
          if (p.touched_rows[r]) update(p, r * cols, (r + 1) * cols);
        }
      } else {
        update(p, 0, p.size());
      }
    }
    zero_grad();
  }

  // Copies of every parameter value, in registration order.
  std::vector<std::vector<Real>> snapshot() const {
    std::vector<std::vector<Real>> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p.value);
    return out;
  }

  void restore(const std::vector<std::vector<Real>>& values) {
    if (values.size() != params_.size()) throw ContractError("snapshot does not match parameter store");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i].size() != params_[i].size()) throw ContractError("snapshot does not match parameter store");
      params_[i].value = values[i];
    }
  }

 private:
  std::deque<Parameter<Real>> params_;
  std::map<std::string, std::size_t> index_;
  long step_ = 0;
};

enum class Op : std::uint8_t {
  kConstant,
  kParameter,
  kLookup,
  kMatmul,
  kAffine,
  kAdd,
  kSub,
  kScale,
  kShift,
  kTanh,
  kLogistic,
  kProduct,
  kMax,
  kConcat,
  kSlice,
  kSum,
  kPick,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParameter: return "parameter";
    case Op::kLookup: return "lookup";
    case Op::kMatmul: return "matmul";
    case Op::kAffine: return "affine";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kScale: return "scale";
    case Op::kShift: return "shift";
    case Op::kTanh: return "tanh";
    case Op::kLogistic: return "logistic";
    case Op::kProduct: return "product";
    case Op::kMax: return "max";
    case Op::kConcat: return "concat";
    case Op::kSlice: return "slice";
    case Op::kSum: return "sum";
    case Op::kPick: return "pick";
  }
  return "?";
}

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}
  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]; }

  double frobenius() const {
    double s = 0.0;
    for (double x : data) s += x * x;
    return std::sqrt(s);
  }
};

template <class Real>
class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
template <class Real>
struct Value {
  Tape<Real>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  int rows() const { return tape->node(id).rows; }
  int cols() const { return tape->node(id).cols; }
  int size() const { return rows() * cols(); }
  std::span<const Real> value() const { return tape->value(id); }
  Real operator[](int i) const { return tape->value(id)[static_cast<std::size_t>(i)]; }
  Real scalar() const { return tape->value(id)[0]; }
};

template <class Real>
class Tape {
 public:
  struct Node {
    Op op = Op::kConstant;
    int rows = 0;
    int cols = 0;
    int a = -1;
    int b = -1;
    int c = -1;
    int aux = 0;
    int aux2 = 0;
    double scalar = 0.0;
    std::size_t offset = 0;
    Parameter<Real>* param = nullptr;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }
  int size() const { return static_cast<int>(nodes_.size()); }

  std::span<const Real> value(int id) const {
    const Node& n = node(id);
    const auto len = static_cast<std::size_t>(n.rows) * static_cast<std::size_t>(n.cols);
    if (n.op == Op::kParameter) return {n.param->value.data(), len};
    return {values_.data() + n.offset, len};
  }

  // Gradient of the last backward root with respect to a non-parameter node.
  std::span<const Real> gradient(Value<Real> x) const {
    const Node& n = node(x.id);
    if (n.op == Op::kParameter) throw ContractError("parameter gradients live in the parameter store");
    const auto len = static_cast<std::size_t>(n.rows) * static_cast<std::size_t>(n.cols);
    if (n.offset + len > grads_.size()) return {zeros(len), len};
    return {grads_.data() + n.offset, len};
  }

  Value<Real> constant(int rows, int cols, std::span<const Real> data) {
    if (data.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
      throw DimensionError("constant: data length does not match shape");
    }
    const int id = push(Op::kConstant, rows, cols);
    std::copy(data.begin(), data.end(), out(id));
    check_finite(id);
    return {this, id};
  }

  Value<Real> constant(std::span<const Real> column) { return constant(static_cast<int>(column.size()), 1, column); }

  Value<Real> scalar(double x) {
    const Real v = static_cast<Real>(x);
    return constant(1, 1, std::span<const Real>(&v, 1));
  }

  // Leaf bound to a parameter; repeated calls reuse the same node.
  Value<Real> parameter(Parameter<Real>& p) {
    auto it = bound_.find(&p);
    if (it != bound_.end()) return {this, it->second};
    Node n;
    n.op = Op::kParameter;
    n.rows = p.rows;
    n.cols = p.cols;
    n.param = &p;
    nodes_.push_back(n);
    const int id = size() - 1;
    bound_.emplace(&p, id);
    return {this, id};
  }

  // Row `row` of an embedding table as a column vector.
  Value<Real> lookup(Parameter<Real>& table, int row) {
    if (row < 0 || row >= table.rows) throw DimensionError("lookup: row " + std::to_string(row) + " out of range");
    const int id = push(Op::kLookup, table.cols, 1);
    Node& n = nodes_.back();
    n.param = &table;
    n.aux = row;
    const Real* src = table.value.data() + static_cast<std::size_t>(row) * static_cast<std::size_t>(table.cols);
    std::copy(src, src + table.cols, out(id));
    check_finite(id);
    return {this, id};
  }

  Value<Real> matmul(Value<Real> a, Value<Real> b) {
    same_tape(a, b);
    const Node& na = node(a.id);
    const Node& nb = node(b.id);
    if (na.cols != nb.rows) throw DimensionError(shape_msg("matmul", na, nb));
    const int m = na.rows, k = na.cols, p = nb.cols;
    const int id = push(Op::kMatmul, m, p);
    set_inputs(id, a.id, b.id);
    const Real* A = ptr(a.id);
    const Real* B = ptr(b.id);
    Real* C = out(id);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < p; ++j) {
        double acc = 0.0;
        for (int q = 0; q < k; ++q) acc += static_cast<double>(A[i * k + q]) * B[q * p + j];
        C[i * p + j] = static_cast<Real>(acc);
      }
    }
    check_finite(id);
    return {this, id};
  }

  // W x + b for a column vector x.
  Value<Real> affine(Value<Real> w, Value<Real> x, Value<Real> b) {
    same_tape(w, x);
    same_tape(w, b);
    const Node& nw = node(w.id);
    const Node& nx = node(x.id);
    const Node& nb = node(b.id);
    if (nx.cols != 1 || nw.cols != nx.rows || nb.rows != nw.rows || nb.cols != 1) {
      throw DimensionError(shape_msg("affine", nw, nx));
    }
    const int m = nw.rows, k = nw.cols;
    const int id = push(Op::kAffine, m, 1);
    set_inputs(id, w.id, x.id, b.id);
    const Real* W = ptr(w.id);
    const Real* X = ptr(x.id);
    const Real* B = ptr(b.id);
    Real* Y = out(id);
    for (int i = 0; i < m; ++i) {
      const Real* row = W + static_cast<std::size_t>(i) * static_cast<std::size_t>(k);
      double acc = B[i];
      for (int q = 0; q < k; ++q) acc += static_cast<double>(row[q]) * X[q];
      Y[i] = static_cast<Real>(acc);
    }
    check_finite(id);
    return {this, id};
  }

  Value<Real> add(Value<Real> a, Value<Real> b) { return binary(Op::kAdd, a, b); }
  Value<Real> sub(Value<Real> a, Value<Real> b) { return binary(Op::kSub, a, b); }
  Value<Real> product(Value<Real> a, Value<Real> b) { return binary(Op::kProduct, a, b); }
  Value<Real> max(Value<Real> a, Value<Real> b) { return binary(Op::kMax, a, b); }

  Value<Real> scale(Value<Real> a, double factor) {
    const int id = unary(Op::kScale, a);
    nodes_.back().scalar = factor;
    const Real* x = ptr(a.id);
    Real* y = out(id);
    for (int i = 0, n = numel(id); i < n; ++i) y[i] = static_cast<Real>(factor * x[i]);
    check_finite(id);
    return {this, id};
  }

  Value<Real> shift(Value<Real> a, double offset) {
    const int id = unary(Op::kShift, a);
    nodes_.back().scalar = offset;
    const Real* x = ptr(a.id);
    Real* y = out(id);
    for (int i = 0, n = numel(id); i < n; ++i) y[i] = static_cast<Real>(x[i] + offset);
    check_finite(id);
    return {this, id};
  }

  Value<Real> tanh(Value<Real> a) {
    const int id = unary(Op::kTanh, a);
    const Real* x = ptr(a.id);
    Real* y = out(id);
    for (int i = 0, n = numel(id); i < n; ++i) y[i] = std::tanh(x[i]);
    check_finite(id);
    return {this, id};
  }

  Value<Real> logistic(Value<Real> a) {
    const int id = unary(Op::kLogistic, a);
    const Real* x = ptr(a.id);
    Real* y = out(id);
    for (int i = 0, n = numel(id); i < n; ++i) y[i] = Real(1) / (Real(1) + std::exp(-x[i]));
    check_finite(id);
    return {this, id};
  }

  // Column vectors stacked top to bottom.
  Value<Real> concat(std::span<const Value<Real>> parts) {
    if (parts.empty()) throw DimensionError("concat: no inputs");
    int rows = 0;
    for (const auto& p : parts) {
      if (p.tape != this) throw ContractError("concat: value from another tape");
      if (node(p.id).cols != 1) throw DimensionError("concat: inputs must be column vectors");
      rows += node(p.id).rows;
    }
    const int id = push(Op::kConcat, rows, 1);
    Node& n = nodes_.back();
    n.aux = static_cast<int>(args_.size());
    n.aux2 = static_cast<int>(parts.size());
    for (const auto& p : parts) args_.push_back(p.id);
    Real* y = out(id);
    for (const auto& p : parts) {
      auto v = value(p.id);
      y = std::copy(v.begin(), v.end(), y);
    }
    return {this, id};
  }

  Value<Real> concat(std::initializer_list<Value<Real>> parts) {
    return concat(std::span<const Value<Real>>(parts.begin(), parts.size()));
  }

  // Rows [start, start + len) of a column vector.
  Value<Real> slice(Value<Real> a, int start, int len) {
    const Node& na = node(a.id);
    if (na.cols != 1 || start < 0 || len < 0 || start + len > na.rows) {
      throw DimensionError("slice: range out of bounds");
    }
    const int id = push(Op::kSlice, len, 1);
    set_inputs(id, a.id);
    nodes_.back().aux = start;
    const Real* x = ptr(a.id) + start;
    std::copy(x, x + len, out(id));
    return {this, id};
  }

  Value<Real> sum(Value<Real> a) {
    const int id = push(Op::kSum, 1, 1);
    set_inputs(id, a.id);
    double acc = 0.0;
    for (Real x : value(a.id)) acc += x;
    out(id)[0] = static_cast<Real>(acc);
    check_finite(id);
    return {this, id};
  }

  Value<Real> pick(Value<Real> a, int index) {
    if (index < 0 || index >= numel(a.id)) throw DimensionError("pick: index out of range");
    const int id = push(Op::kPick, 1, 1);
    set_inputs(id, a.id);
    nodes_.back().aux = index;
    out(id)[0] = value(a.id)[static_cast<std::size_t>(index)];
    return {this, id};
  }

  // Sum of scalar values (a chain of adds).
  Value<Real> sum_all(std::span<const Value<Real>> terms) {
    if (terms.empty()) return scalar(0.0);
    Value<Real> acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return acc;
  }

  // Reverse pass from a scalar root. Parameter gradients accumulate into
  // the store unless `accumulate_parameters` is false (frozen analysis).
  void backward(Value<Real> root, bool accumulate_parameters = true) {
    if (node(root.id).rows != 1 || node(root.id).cols != 1) {
      throw ContractError("backward: root must be a scalar");
    }
    const Real one(1);
    backward_from(root, std::span<const Real>(&one, 1), accumulate_parameters);
  }

  // Reverse pass seeded with an arbitrary output gradient.
  void backward_from(Value<Real> root, std::span<const Real> seed, bool accumulate_parameters) {
    if (root.tape != this) throw ContractError("backward: value from another tape");
    if (seed.size() != static_cast<std::size_t>(numel(root.id))) {
      throw DimensionError("backward: seed does not match root shape");
    }
    accumulate_ = accumulate_parameters;
    grads_.assign(values_.size(), Real(0));
    reached_.assign(nodes_.size(), 0);
    {
      const Node& r = node(root.id);
      if (r.op == Op::kParameter) return;
      std::copy(seed.begin(), seed.end(), grads_.begin() + static_cast<std::ptrdiff_t>(r.offset));
      reached_[static_cast<std::size_t>(root.id)] = 1;
    }
    for (int id = root.id; id >= 0; --id) {
      if (!reached_[static_cast<std::size_t>(id)]) continue;
      propagate(id);
    }
  }

  // Jacobian of `out` with respect to `wrt` (k x dim(wrt)), one backward
  // pass per output entry.
  Matrix jacobian(Value<Real> out_value, Value<Real> wrt) {
    if (wrt.id > out_value.id) throw ContractError("jacobian: output precedes input on the tape");
    const int k = out_value.size();
    const int m = wrt.size();
    Matrix J(k, m);
    std::vector<Real> seed(static_cast<std::size_t>(k), Real(0));
    for (int j = 0; j < k; ++j) {
      seed[static_cast<std::size_t>(j)] = Real(1);
      backward_from(out_value, seed, false);
      seed[static_cast<std::size_t>(j)] = Real(0);
      auto g = gradient(wrt);
      for (int i = 0; i < m; ++i) J(j, i) = g[static_cast<std::size_t>(i)];
    }
    return J;
  }

 private:
  int push(Op op, int rows, int cols) {
    Node n;
    n.op = op;
    n.rows = rows;
    n.cols = cols;
    n.offset = values_.size();
    values_.resize(values_.size() + static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    nodes_.push_back(n);
    return size() - 1;
  }

  void set_inputs(int id, int a, int b = -1, int c = -1) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    n.a = a;
    n.b = b;
    n.c = c;
  }

  int numel(int id) const { return node(id).rows * node(id).cols; }
  const Real* ptr(int id) const { return value(id).data(); }
  Real* out(int id) { return values_.data() + node(id).offset; }

  const Real* zeros(std::size_t len) const {
    if (zero_buf_.size() < len) zero_buf_.assign(len, Real(0));
    return zero_buf_.data();
  }

  void same_tape(Value<Real> a, Value<Real> b) const {
    if (a.tape != this || b.tape != this) throw ContractError("values from different tapes");
  }

  static std::string shape_msg(const char* op, const Node& a, const Node& b) {
    return std::string(op) + ": incompatible shapes " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
           " and " + std::to_string(b.rows) + "x" + std::to_string(b.cols);
  }

  int unary(Op op, Value<Real> a) {
    if (a.tape != this) throw ContractError(std::string(op_name(op)) + ": value from another tape");
    const Node na = node(a.id);
    const int id = push(op, na.rows, na.cols);
    set_inputs(id, a.id);
    return id;
  }

  Value<Real> binary(Op op, Value<Real> a, Value<Real> b) {
    same_tape(a, b);
    const Node& na = node(a.id);
    const Node& nb = node(b.id);
    if (na.rows != nb.rows || na.cols != nb.cols) throw DimensionError(shape_msg(op_name(op), na, nb));
    const int id = push(op, na.rows, na.cols);
    set_inputs(id, a.id, b.id);
    const Real* x = ptr(a.id);
    const Real* y = ptr(b.id);
    Real* z = out(id);
    const int n = numel(id);
    switch (op) {
      case Op::kAdd: for (int i = 0; i < n; ++i) z[i] = x[i] + y[i]; break;
      case Op::kSub: for (int i = 0; i < n; ++i) z[i] = x[i] - y[i]; break;
      case Op::kProduct: for (int i = 0; i < n; ++i) z[i] = x[i] * y[i]; break;
      case Op::kMax: for (int i = 0; i < n; ++i) z[i] = x[i] >= y[i] ? x[i] : y[i]; break;
      default: throw ContractError("binary: unsupported op");
    }
    check_finite(id);
    return {this, id};
  }

  void check_finite(int id) const {
    for (Real x : value(id)) {
      if (!std::isfinite(x)) {
        throw NumericError(std::string("non-finite value produced by ") + op_name(node(id).op));
      }
    }
  }

  // Gradient buffer for an input node, or nullptr for frozen parameters.
  Real* grad_target(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.op == Op::kParameter) {
      if (!accumulate_) return nullptr;
      n.param->touched = true;
      return n.param->grad.data();
    }
    reached_[static_cast<std::size_t>(id)] = 1;
    return grads_.data() + n.offset;
  }

  void propagate(int id) {
    const Node n = node(id);
    const Real* g = grads_.data() + n.offset;
    const int len = n.rows * n.cols;
    switch (n.op) {
      case Op::kConstant:
      case Op::kParameter:
        return;
      case Op::kLookup: {
        if (!accumulate_) return;
        Parameter<Real>& t = *n.param;
        t.touched = true;
        if (t.sparse_rows) t.touched_rows[static_cast<std::size_t>(n.aux)] = 1;
        Real* dst = t.grad.data() + static_cast<std::size_t>(n.aux) * static_cast<std::size_t>(t.cols);
        for (int i = 0; i < len; ++i) dst[i] += g[i];
        return;
      }
      case Op::kMatmul: {
        const Node& na = node(n.a);
        const int m = na.rows, k = na.cols, p = n.cols;
        const Real* A = ptr(n.a);
        const Real* B = ptr(n.b);
        if (Real* dA = grad_target(n.a)) {
          for (int i = 0; i < m; ++i)
            for (int q = 0; q < k; ++q) {
              double acc = 0.0;
              for (int j = 0; j < p; ++j) acc += static_cast<double>(g[i * p + j]) * B[q * p + j];
              dA[i * k + q] += static_cast<Real>(acc);
            }
        }
        if (Real* dB = grad_target(n.b)) {
          for (int q = 0; q < k; ++q)
            for (int j = 0; j < p; ++j) {
              double acc = 0.0;
              for (int i = 0; i < m; ++i) acc += static_cast<double>(A[i * k + q]) * g[i * p + j];
              dB[q * p + j] += static_cast<Real>(acc);
            }
        }
        return;
      }
      case Op::kAffine: {
        const Node& nw = node(n.a);
        const int m = nw.rows, k = nw.cols;
        const Real* W = ptr(n.a);
        const Real* X = ptr(n.b);
        if (Real* dW = grad_target(n.a)) {
          for (int i = 0; i < m; ++i) {
            const Real gi = g[i];
            if (gi == Real(0)) continue;
            Real* row = dW + static_cast<std::size_t>(i) * static_cast<std::size_t>(k);
            for (int q = 0; q < k; ++q) row[q] += gi * X[q];
          }
        }
        if (Real* dX = grad_target(n.b)) {
          acc_.assign(static_cast<std::size_t>(k), 0.0);
          double* acc = acc_.data();
          for (int i = 0; i < m; ++i) {
            const double gi = g[i];
            if (gi == 0.0) continue;
            const Real* row = W + static_cast<std::size_t>(i) * static_cast<std::size_t>(k);
            for (int q = 0; q < k; ++q) acc[q] += gi * row[q];
          }
          for (int q = 0; q < k; ++q) dX[q] += static_cast<Real>(acc[q]);
        }
        if (Real* dB = grad_target(n.c)) {
          for (int i = 0; i < m; ++i) dB[i] += g[i];
        }
        return;
      }
      case Op::kAdd:
        if (Real* da = grad_target(n.a)) for (int i = 0; i < len; ++i) da[i] += g[i];
        if (Real* db = grad_target(n.b)) for (int i = 0; i < len; ++i) db[i] += g[i];
        return;
      case Op::kSub:
        if (Real* da = grad_target(n.a)) for (int i = 0; i < len; ++i) da[i] += g[i];
        if (Real* db = grad_target(n.b)) for (int i = 0; i < len; ++i) db[i] -= g[i];
        return;
      case Op::kScale:
        if (Real* da = grad_target(n.a)) for (int i = 0; i < len; ++i) da[i] += static_cast<Real>(n.scalar * g[i]);
        return;
      case Op::kShift:
        if (Real* da = grad_target(n.a)) for (int i = 0; i < len; ++i) da[i] += g[i];
        return;
      case Op::kTanh: {
        const Real* y = ptr(id);
        if (Real* da = grad_target(n.a)) for (int i = 0; i < len; ++i) da[i] += g[i] * (Real(1) - y[i] * y[i]);
        return;
      }
      case Op::kLogistic: {
        const Real* y = ptr(id);
        if (Real* da = grad_target(n.a)) for (int i = 0; i < len; ++i) da[i] += g[i] * y[i] * (Real(1) - y[i]);
        return;
      }
      case Op::kProduct: {
        const Real* x = ptr(n.a);
        const Real* y = ptr(n.b);
        if (Real* da = grad_target(n.a)) for (int i = 0; i < len; ++i) da[i] += g[i] * y[i];
        if (Real* db = grad_target(n.b)) for (int i = 0; i < len; ++i) db[i] += g[i] * x[i];
        return;
      }
      case Op::kMax: {
        const Real* x = ptr(n.a);
        const Real* y = ptr(n.b);
        Real* da = grad_target(n.a);
        Real* db = grad_target(n.b);
        for (int i = 0; i < len; ++i) {
          if (x[i] >= y[i]) {
            if (da) da[i] += g[i];
          } else if (db) {
            db[i] += g[i];
          }
        }
        return;
      }
      case Op::kConcat: {
        int row = 0;
        for (int p = 0; p < n.aux2; ++p) {
          const int part = args_[static_cast<std::size_t>(n.aux + p)];
          const int r = node(part).rows;
          if (Real* dp = grad_target(part)) for (int i = 0; i < r; ++i) dp[i] += g[row + i];
          row += r;
        }
        return;
      }
      case Op::kSlice:
        if (Real* da = grad_target(n.a)) for (int i = 0; i < len; ++i) da[n.aux + i] += g[i];
        return;
      case Op::kSum:
        if (Real* da = grad_target(n.a)) {
          const int m = numel(n.a);
          for (int i = 0; i < m; ++i) da[i] += g[0];
        }
        return;
      case Op::kPick:
        if (Real* da = grad_target(n.a)) da[n.aux] += g[0];
        return;
    }
  }

  std::vector<Node> nodes_;
  std::vector<Real> values_;
  std::vector<Real> grads_;
  std::vector<char> reached_;
  std::vector<int> args_;
  std::vector<double> acc_;
  mutable std::vector<Real> zero_buf_;
  std::map<const Parameter<Real>*, int> bound_;
  bool accumulate_ = true;
};

}  // namespace dparse::ad
