#include "membrane/cli/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <vector>

namespace membrane::cli {

struct Expression::Node {
  enum class Kind { Number, X, Y, Neg, Add, Sub, Mul, Div, Pow, Call } kind;
  double value{0};
  std::string name;
  std::vector<std::shared_ptr<const Node>> args;

  double eval(double x, double y) const {
    switch (kind) {
      case Kind::Number: return value;
      case Kind::X: return x;
      case Kind::Y: return y;
      case Kind::Neg: return -args[0]->eval(x, y);
      case Kind::Add: return args[0]->eval(x, y) + args[1]->eval(x, y);
      case Kind::Sub: return args[0]->eval(x, y) - args[1]->eval(x, y);
      case Kind::Mul: return args[0]->eval(x, y) * args[1]->eval(x, y);
      case Kind::Div: return args[0]->eval(x, y) / args[1]->eval(x, y);
      case Kind::Pow: return std::pow(args[0]->eval(x, y), args[1]->eval(x, y));
      case Kind::Call: break;
    }
    const double a = args[0]->eval(x, y);
    if (name == "sin") return std::sin(a);
    if (name == "cos") return std::cos(a);
    if (name == "tan") return std::tan(a);
    if (name == "exp") return std::exp(a);
    if (name == "log") return std::log(a);
    if (name == "sqrt") return std::sqrt(a);
    if (name == "abs") return std::abs(a);
    const double b = args[1]->eval(x, y);
    if (name == "min") return std::min(a, b);
    return std::max(a, b);
  }
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

int arity(const std::string& name) {
  for (const char* f : {"sin", "cos", "tan", "exp", "log", "sqrt", "abs"})
    if (name == f) return 1;
  if (name == "min" || name == "max") return 2;
  return -1;
}

NodePtr make(Node::Kind kind, std::vector<NodePtr> args = {}, double value = 0,
             std::string name = {}) {
  auto n = std::make_shared<Node>();
  n->kind = kind;
  n->args = std::move(args);
  n->value = value;
  n->name = std::move(name);
  return n;
}

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  NodePtr parse() {
    NodePtr e = expr();
    skip();
    if (pos_ != s_.size()) throw ExpressionError("unexpected '" + std::string(1, s_[pos_]) + "'", pos_);
    return e;
  }

 private:
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) throw ExpressionError(std::string("expected '") + c + "'", pos_);
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) lhs = make(Node::Kind::Add, {lhs, term()});
      else if (accept('-')) lhs = make(Node::Kind::Sub, {lhs, term()});
      else return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) lhs = make(Node::Kind::Mul, {lhs, unary()});
      else if (accept('/')) lhs = make(Node::Kind::Div, {lhs, unary()});
      else return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) return make(Node::Kind::Neg, {unary()});
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = atom();
    if (accept('^')) return make(Node::Kind::Pow, {base, unary()});
    return base;
  }

  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) throw ExpressionError("unexpected end of expression", pos_);
    const char c = s_[pos_];
    if (accept('(')) {
      NodePtr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
        ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      if (name == "x") return make(Node::Kind::X);
      if (name == "y") return make(Node::Kind::Y);
      if (name == "pi") return make(Node::Kind::Number, {}, std::numbers::pi);
      const int n = arity(name);
      if (n < 0) throw ExpressionError("unknown identifier '" + name + "'", start);
      expect('(');
      std::vector<NodePtr> args{expr()};
      while (accept(',')) args.push_back(expr());
      expect(')');
      if (int(args.size()) != n)
        throw ExpressionError(name + " takes " + std::to_string(n) + " argument(s)", start);
      return make(Node::Kind::Call, std::move(args), 0, name);
    }
    throw ExpressionError("unexpected '" + std::string(1, c) + "'", pos_);
  }

  NodePtr number() {
    const char* first = s_.data() + pos_;
    const char* last = s_.data() + s_.size();
    double v = 0;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc()) throw ExpressionError("malformed number", pos_);
    pos_ += std::size_t(ptr - first);
    return make(Node::Kind::Number, {}, v);
  }

  const std::string& s_;
  std::size_t pos_{0};
};

}  // namespace

Expression Expression::parse(const std::string& text) {
  Expression e;
  e.text_ = text;
  e.root_ = Parser(text).parse();
  return e;
}

double Expression::operator()(double x, double y) const { return root_->eval(x, y); }

}  // namespace membrane::cli
