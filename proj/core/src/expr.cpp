#include "scbf/expr.hpp"

#include <cctype>
#include <cmath>
#include <map>
#include <string_view>

#include "scbf/error.hpp"

namespace scbf {

ExprGraph::ExprGraph(int state_dim, int control_dim)
    : state_dim_(state_dim), control_dim_(control_dim) {
  if (state_dim <= 0 || control_dim < 0) throw_invalid("expression graph: bad dimensions");
}

int ExprGraph::push(ExprNode node) {
  for (int c : node.children) {
    if (c < 0 || c >= static_cast<int>(nodes_.size())) {
      throw_invalid("expression graph: child index out of range");
    }
  }
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

int ExprGraph::constant(double v) {
  ExprNode n;
  n.kind = NodeKind::kConstant;
  n.value = v;
  return push(std::move(n));
}

int ExprGraph::state(int i) {
  if (i < 0 || i >= state_dim_) throw_invalid("expression graph: state index out of range");
  ExprNode n;
  n.kind = NodeKind::kState;
  n.index = i;
  return push(std::move(n));
}

int ExprGraph::control(int i) {
  if (i < 0 || i >= control_dim_) throw_invalid("expression graph: control index out of range");
  ExprNode n;
  n.kind = NodeKind::kControl;
  n.index = i;
  return push(std::move(n));
}

int ExprGraph::add(int a, int b) { return push({NodeKind::kAdd, 0.0, -1, {a, b}, {}}); }
int ExprGraph::sub(int a, int b) { return push({NodeKind::kSub, 0.0, -1, {a, b}, {}}); }
int ExprGraph::mul(int a, int b) { return push({NodeKind::kMul, 0.0, -1, {a, b}, {}}); }
int ExprGraph::sin(int a) { return push({NodeKind::kSin, 0.0, -1, {a}, {}}); }
int ExprGraph::cos(int a) { return push({NodeKind::kCos, 0.0, -1, {a}, {}}); }

int ExprGraph::affine(std::vector<int> children, std::vector<double> weights, double offset) {
  if (children.size() != weights.size()) throw_invalid("expression graph: affine arity mismatch");
  return push({NodeKind::kAffine, offset, -1, std::move(children), std::move(weights)});
}

void ExprGraph::set_outputs(std::vector<int> outputs) {
  if (static_cast<int>(outputs.size()) != state_dim_) {
    throw_invalid("expression graph: need one output per state dimension");
  }
  outputs_ = std::move(outputs);
}

void ExprGraph::validate() const {
  if (static_cast<int>(outputs_.size()) != state_dim_) {
    throw_invalid("expression graph: outputs not set");
  }
  std::vector<bool> reachable(nodes_.size(), false);
  for (int o : outputs_) {
    if (o < 0 || o >= static_cast<int>(nodes_.size())) {
      throw_invalid("expression graph: output index out of range");
    }
    reachable[o] = true;
  }
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    const auto& n = nodes_[id];
    for (int c : n.children) {
      if (c >= id) throw_invalid("expression graph: not in topological order");
      if (reachable[id]) reachable[c] = true;
    }
    if (n.kind == NodeKind::kState && (n.index < 0 || n.index >= state_dim_)) {
      throw_invalid("expression graph: state index out of range");
    }
    if (n.kind == NodeKind::kControl && (n.index < 0 || n.index >= control_dim_)) {
      throw_invalid("expression graph: control index out of range");
    }
    if (!std::isfinite(n.value)) throw_invalid("expression graph: non-finite constant");
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (!reachable[id]) throw_invalid("expression graph: node unreachable from outputs");
  }
}

std::vector<double> ExprGraph::evaluate(std::span<const double> x,
                                        std::span<const double> u) const {
  if (static_cast<int>(x.size()) != state_dim_ || static_cast<int>(u.size()) != control_dim_) {
    throw_invalid("evaluate: dimension mismatch");
  }
  std::vector<double> v(nodes_.size());
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const auto& n = nodes_[id];
    switch (n.kind) {
      case NodeKind::kConstant: v[id] = n.value; break;
      case NodeKind::kState: v[id] = x[n.index]; break;
      case NodeKind::kControl: v[id] = u[n.index]; break;
      case NodeKind::kAdd: v[id] = v[n.children[0]] + v[n.children[1]]; break;
      case NodeKind::kSub: v[id] = v[n.children[0]] - v[n.children[1]]; break;
      case NodeKind::kMul: v[id] = v[n.children[0]] * v[n.children[1]]; break;
      case NodeKind::kAffine: {
        double s = n.value;
        for (std::size_t k = 0; k < n.children.size(); ++k) s += n.weights[k] * v[n.children[k]];
        v[id] = s;
        break;
      }
      case NodeKind::kSin: v[id] = std::sin(v[n.children[0]]); break;
      case NodeKind::kCos: v[id] = std::cos(v[n.children[0]]); break;
    }
  }
  std::vector<double> out(outputs_.size());
  for (std::size_t k = 0; k < outputs_.size(); ++k) out[k] = v[outputs_[k]];
  return out;
}

std::vector<Interval> ExprGraph::interval_eval(std::span<const Interval> x,
                                               std::span<const Interval> u) const {
  if (static_cast<int>(x.size()) != state_dim_ || static_cast<int>(u.size()) != control_dim_) {
    throw_invalid("interval_eval: dimension mismatch");
  }
  std::vector<Interval> v(nodes_.size());
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const auto& n = nodes_[id];
    switch (n.kind) {
      case NodeKind::kConstant: v[id] = Interval(n.value); break;
      case NodeKind::kState: v[id] = x[n.index]; break;
      case NodeKind::kControl: v[id] = u[n.index]; break;
      case NodeKind::kAdd: v[id] = v[n.children[0]] + v[n.children[1]]; break;
      case NodeKind::kSub: v[id] = v[n.children[0]] - v[n.children[1]]; break;
      case NodeKind::kMul: v[id] = v[n.children[0]] * v[n.children[1]]; break;
      case NodeKind::kAffine: {
        Interval s(n.value);
        for (std::size_t k = 0; k < n.children.size(); ++k) {
          s = s + n.weights[k] * v[n.children[k]];
        }
        v[id] = s;
        break;
      }
      case NodeKind::kSin: v[id] = scbf::sin(v[n.children[0]]); break;
      case NodeKind::kCos: v[id] = scbf::cos(v[n.children[0]]); break;
    }
  }
  std::vector<Interval> out(outputs_.size());
  for (std::size_t k = 0; k < outputs_.size(); ++k) out[k] = v[outputs_[k]];
  return out;
}

namespace {

// Builds a graph while folding constants and merging linear combinations.
class Builder {
 public:
  explicit Builder(ExprGraph& g) : g_(g) {}

  int constant(double v) { return g_.constant(v); }

  int state(int i) { return input(0, i); }
  int control(int i) { return input(1, i); }

  int linear(int a, double wa, int b, double wb) {
    const auto& na = g_.nodes()[a];
    const auto& nb = g_.nodes()[b];
    if (na.kind == NodeKind::kConstant && nb.kind == NodeKind::kConstant) {
      return g_.constant(wa * na.value + wb * nb.value);
    }
    std::map<int, double> terms;
    double offset = 0.0;
    collect(a, wa, terms, offset);
    collect(b, wb, terms, offset);
    return emit(terms, offset);
  }

  int scale(int a, double s) {
    const auto& na = g_.nodes()[a];
    if (na.kind == NodeKind::kConstant) return g_.constant(s * na.value);
    std::map<int, double> terms;
    double offset = 0.0;
    collect(a, s, terms, offset);
    return emit(terms, offset);
  }

  int mul(int a, int b) {
    if (g_.is_constant(a)) return scale(b, g_.nodes()[a].value);
    if (g_.is_constant(b)) return scale(a, g_.nodes()[b].value);
    return g_.mul(a, b);
  }

  int div(int a, int b) {
    if (!g_.is_constant(b)) throw_invalid("dynamics: division only by constants is supported");
    const double d = g_.nodes()[b].value;
    if (d == 0.0) throw_invalid("dynamics: division by zero");
    return scale(a, 1.0 / d);
  }

  int sin(int a) {
    if (g_.is_constant(a)) return g_.constant(std::sin(g_.nodes()[a].value));
    return g_.sin(a);
  }

  int cos(int a) {
    if (g_.is_constant(a)) return g_.constant(std::cos(g_.nodes()[a].value));
    return g_.cos(a);
  }

 private:
  void collect(int id, double w, std::map<int, double>& terms, double& offset) {
    const auto& n = g_.nodes()[id];
    if (n.kind == NodeKind::kConstant) {
      offset += w * n.value;
    } else if (n.kind == NodeKind::kAffine) {
      offset += w * n.value;
      for (std::size_t k = 0; k < n.children.size(); ++k) terms[n.children[k]] += w * n.weights[k];
    } else {
      terms[id] += w;
    }
  }

  int emit(const std::map<int, double>& terms, double offset) {
    std::vector<int> ch;
    std::vector<double> wt;
    for (const auto& [id, w] : terms) {
      if (w == 0.0) continue;
      ch.push_back(id);
      wt.push_back(w);
    }
    if (ch.empty()) return g_.constant(offset);
    if (ch.size() == 1 && wt[0] == 1.0 && offset == 0.0) return ch[0];
    return g_.affine(std::move(ch), std::move(wt), offset);
  }

  int input(int kind, int i) {
    auto it = inputs_.find({kind, i});
    if (it != inputs_.end()) return it->second;
    const int id = kind == 0 ? g_.state(i) : g_.control(i);
    inputs_.emplace(std::make_pair(kind, i), id);
    return id;
  }

  ExprGraph& g_;
  std::map<std::pair<int, int>, int> inputs_;
};

class Parser {
 public:
  Parser(std::string_view text, Builder& b, int n, int m, int output)
      : s_(text), b_(b), n_(n), m_(m), output_(output) {}

  int parse() {
    const int id = expr();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing input");
    return id;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw_invalid("dynamics[" + std::to_string(output_) + "]: " + msg + " at offset " +
                  std::to_string(pos_) + " in '" + std::string(s_) + "'");
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  int expr() {
    int lhs = term();
    while (true) {
      if (accept('+')) lhs = b_.linear(lhs, 1.0, term(), 1.0);
      else if (accept('-')) lhs = b_.linear(lhs, 1.0, term(), -1.0);
      else return lhs;
    }
  }

  int term() {
    int lhs = unary();
    while (true) {
      if (accept('*')) lhs = b_.mul(lhs, unary());
      else if (accept('/')) lhs = b_.div(lhs, unary());
      else return lhs;
    }
  }

  int unary() {
    if (accept('-')) return b_.scale(unary(), -1.0);
    if (accept('+')) return unary();
    return atom();
  }

  int atom() {
    skip_ws();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    const char c = s_[pos_];
    if (accept('(')) {
      const int id = expr();
      if (!accept(')')) fail("expected ')'");
      return id;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      const std::string_view word = s_.substr(start, pos_ - start);
      if (word == "sin" || word == "cos") {
        if (!accept('(')) fail("expected '(' after " + std::string(word));
        const int arg = expr();
        if (!accept(')')) fail("expected ')'");
        return word == "sin" ? b_.sin(arg) : b_.cos(arg);
      }
      if ((word[0] == 'x' || word[0] == 'u') && word.size() > 1) {
        int k = 0;
        for (std::size_t i = 1; i < word.size(); ++i) {
          if (!std::isdigit(static_cast<unsigned char>(word[i]))) fail("bad variable name");
          k = 10 * k + (word[i] - '0');
        }
        if (word[0] == 'x') {
          if (k < 1 || k > n_) fail("state index out of range: " + std::string(word));
          return b_.state(k - 1);
        }
        if (k < 1 || k > m_) fail("control index out of range: " + std::string(word));
        return b_.control(k - 1);
      }
      fail("unknown identifier '" + std::string(word) + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  int number() {
    const char* begin = s_.data() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("bad number");
    pos_ += static_cast<std::size_t>(end - begin);
    return b_.constant(v);
  }

  std::string_view s_;
  Builder& b_;
  int n_, m_, output_;
  std::size_t pos_ = 0;
};

// Copies the nodes reachable from the outputs into a fresh graph, merging
// duplicate input nodes.
ExprGraph compact(const ExprGraph& g) {
  const auto& nodes = g.nodes();
  std::vector<bool> keep(nodes.size(), false);
  for (int o : g.outputs()) keep[o] = true;
  for (int id = static_cast<int>(nodes.size()) - 1; id >= 0; --id) {
    if (!keep[id]) continue;
    for (int c : nodes[id].children) keep[c] = true;
  }
  ExprGraph out(g.state_dim(), g.control_dim());
  std::vector<int> remap(nodes.size(), -1);
  std::map<std::pair<int, int>, int> inputs;
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    if (!keep[id]) continue;
    const auto& n = nodes[id];
    std::vector<int> ch;
    for (int c : n.children) ch.push_back(remap[c]);
    int nid = -1;
    switch (n.kind) {
      case NodeKind::kConstant: nid = out.constant(n.value); break;
      case NodeKind::kState:
      case NodeKind::kControl: {
        const auto key = std::make_pair(n.kind == NodeKind::kState ? 0 : 1, n.index);
        auto it = inputs.find(key);
        if (it != inputs.end()) {
          nid = it->second;
        } else {
          nid = n.kind == NodeKind::kState ? out.state(n.index) : out.control(n.index);
          inputs.emplace(key, nid);
        }
        break;
      }
      case NodeKind::kAdd: nid = out.add(ch[0], ch[1]); break;
      case NodeKind::kSub: nid = out.sub(ch[0], ch[1]); break;
      case NodeKind::kMul: nid = out.mul(ch[0], ch[1]); break;
      case NodeKind::kAffine: nid = out.affine(ch, n.weights, n.value); break;
      case NodeKind::kSin: nid = out.sin(ch[0]); break;
      case NodeKind::kCos: nid = out.cos(ch[0]); break;
    }
    remap[id] = nid;
  }
  std::vector<int> outs;
  for (int o : g.outputs()) outs.push_back(remap[o]);
  out.set_outputs(std::move(outs));
  return out;
}

}  // namespace

ExprGraph parse_dynamics(std::span<const std::string> expressions, int state_dim,
                         int control_dim) {
  if (static_cast<int>(expressions.size()) != state_dim) {
    throw_invalid("dynamics: expected " + std::to_string(state_dim) + " expressions, got " +
                  std::to_string(expressions.size()));
  }
  ExprGraph g(state_dim, control_dim);
  Builder builder(g);
  std::vector<int> outs;
  for (int k = 0; k < state_dim; ++k) {
    Parser p(expressions[k], builder, state_dim, control_dim, k);
    outs.push_back(p.parse());
  }
  g.set_outputs(std::move(outs));
  ExprGraph out = compact(g);
  out.validate();
  return out;
}

}  // namespace scbf
