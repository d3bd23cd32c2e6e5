#pragma once

#include <span>
#include <string>
#include <vector>

#include "scbf/interval.hpp"

namespace scbf {

enum class NodeKind {
  kConstant,
  kState,     // input x[index]
  kControl,   // input u[index]
  kAdd,
  kSub,
  kMul,
  kAffine,    // value + sum_k weights[k] * children[k]
  kSin,
  kCos,
};

struct ExprNode {
  NodeKind kind = NodeKind::kConstant;
  double value = 0.0;  // constant value, or affine offset
  int index = -1;      // input index for kState / kControl
  std::vector<int> children;
  std::vector<double> weights;  // kAffine only
};

/// Vector field f(x, u) as a DAG of continuous primitives. Nodes are stored
/// in topological order: every child index is smaller than its parent's.
class ExprGraph {
 public:
  ExprGraph() = default;
  ExprGraph(int state_dim, int control_dim);

  int state_dim() const { return state_dim_; }
  int control_dim() const { return control_dim_; }
  const std::vector<ExprNode>& nodes() const { return nodes_; }
  const std::vector<int>& outputs() const { return outputs_; }

  // Raw constructors. Each returns the new node id.
  int constant(double v);
  int state(int i);
  int control(int i);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int affine(std::vector<int> children, std::vector<double> weights, double offset);
  int sin(int a);
  int cos(int a);

  void set_outputs(std::vector<int> outputs);

  /// Checks index ranges, topological order, and that every node feeds an
  /// output. Throws Error(kInvalidInput) on failure.
  void validate() const;

  std::vector<double> evaluate(std::span<const double> x, std::span<const double> u) const;

  /// Natural interval extension; encloses f over the joint box x_box x u_box.
  std::vector<Interval> interval_eval(std::span<const Interval> x,
                                      std::span<const Interval> u) const;

  bool is_constant(int id) const { return nodes_[id].kind == NodeKind::kConstant; }

 private:
  int push(ExprNode node);

  int state_dim_ = 0;
  int control_dim_ = 0;
  std::vector<ExprNode> nodes_;
  std::vector<int> outputs_;
};

/// Parses one expression per state dimension. Grammar:
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := '-' unary | '+' unary | atom
///   atom   := number | x<k> | u<k> | sin(expr) | cos(expr) | '(' expr ')'
/// Variables are 1-based (x1..xn, u1..um). Division is allowed only by an
/// expression that folds to a nonzero constant. Constant subtrees are folded
/// and linear combinations are collected into affine nodes.
ExprGraph parse_dynamics(std::span<const std::string> expressions, int state_dim,
                         int control_dim);

}  // namespace scbf
