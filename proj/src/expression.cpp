#include "conelab/expression.hpp"

#include <cmath>
#include <cstring>

namespace conelab {

namespace {

enum class Op { Num, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Log };

}  // namespace

struct Expression::Node {
  Op op;
  double value = 0.0;  // Num
  int var = -1;        // Var
  std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make_node(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr make_num(double value) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::Num;
  n->value = value;
  return n;
}

NodePtr make_var(int index) {
  auto n = std::make_shared<Expression::Node>();
  n->op = Op::Var;
  n->var = index;
  return n;
}

class Parser {
 public:
  Parser(const std::string& src, const std::vector<std::string>& vars) : src_(src), vars_(vars) {}

  NodePtr run() {
    NodePtr e = expr();
    skip_space();
    if (pos_ != src_.size()) throw ParseError("unexpected trailing input", pos_);
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_space();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  NodePtr expr() {
    NodePtr lhs = term();
    while (true) {
      if (eat('+')) {
        lhs = make_node(Op::Add, lhs, term());
      } else if (eat('-')) {
        lhs = make_node(Op::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = factor();
    while (true) {
      if (eat('*')) {
        lhs = make_node(Op::Mul, lhs, factor());
      } else if (eat('/')) {
        lhs = make_node(Op::Div, lhs, factor());
      } else {
        return lhs;
      }
    }
  }

  NodePtr factor() {
    if (eat('-')) return make_node(Op::Neg, factor());
    if (eat('+')) return factor();
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (eat('^')) return make_node(Op::Pow, base, factor());
    return base;
  }

  NodePtr atom() {
    skip_space();
    if (pos_ >= src_.size()) throw ParseError("unexpected end of expression", pos_);
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
    if (c == '(') {
      ++pos_;
      NodePtr e = expr();
      if (!eat(')')) throw ParseError("expected ')'", pos_);
      return e;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  NodePtr number() {
    size_t start = pos_;
    const char* begin = src_.c_str() + pos_;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) throw ParseError("malformed number", start);
    pos_ += static_cast<size_t>(end - begin);
    return make_num(v);
  }

  NodePtr name() {
    size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    std::string id = src_.substr(start, pos_ - start);
    if (peek() == '(') {
      ++pos_;  // consume '('
      std::vector<NodePtr> args;
      args.push_back(expr());
      while (eat(',')) args.push_back(expr());
      if (!eat(')')) throw ParseError("expected ')'", pos_);
      if (id == "pow") {
        if (args.size() != 2) throw ParseError("pow expects 2 arguments", start);
        return make_node(Op::Pow, args[0], args[1]);
      }
      if (args.size() != 1) throw ParseError(id + " expects 1 argument", start);
      if (id == "sin") return make_node(Op::Sin, args[0]);
      if (id == "cos") return make_node(Op::Cos, args[0]);
      if (id == "exp") return make_node(Op::Exp, args[0]);
      if (id == "log") return make_node(Op::Log, args[0]);
      throw ParseError("unknown function '" + id + "'", start);
    }
    if (id == "pi") return make_num(M_PI);
    for (size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == id) return make_var(static_cast<int>(i));
    }
    throw ParseError("unknown identifier '" + id + "'", start);
  }

  const std::string& src_;
  const std::vector<std::string>& vars_;
  size_t pos_ = 0;
};

double eval_node(const Expression::Node* n, const std::vector<double>& v) {
  switch (n->op) {
    case Op::Num: return n->value;
    case Op::Var: return v[static_cast<size_t>(n->var)];
    case Op::Add: return eval_node(n->a.get(), v) + eval_node(n->b.get(), v);
    case Op::Sub: return eval_node(n->a.get(), v) - eval_node(n->b.get(), v);
    case Op::Mul: return eval_node(n->a.get(), v) * eval_node(n->b.get(), v);
    case Op::Div: return eval_node(n->a.get(), v) / eval_node(n->b.get(), v);
    case Op::Pow: return std::pow(eval_node(n->a.get(), v), eval_node(n->b.get(), v));
    case Op::Neg: return -eval_node(n->a.get(), v);
    case Op::Sin: return std::sin(eval_node(n->a.get(), v));
    case Op::Cos: return std::cos(eval_node(n->a.get(), v));
    case Op::Exp: return std::exp(eval_node(n->a.get(), v));
    case Op::Log: return std::log(eval_node(n->a.get(), v));
  }
  return 0.0;
}

}  // namespace

Expression Expression::parse(const std::string& source, const std::vector<std::string>& variables) {
  Parser p(source, variables);
  Expression e;
  e.root_ = p.run();
  e.source_ = source;
  e.variables_ = variables;
  return e;
}

double Expression::eval(const std::vector<double>& values) const {
  if (!root_) fail(ErrorKind::InvalidArgument, "empty expression");
  if (values.size() != variables_.size()) {
    fail(ErrorKind::InvalidArgument, "wrong number of variable values");
  }
  return eval_node(root_.get(), values);
}

}  // namespace conelab
