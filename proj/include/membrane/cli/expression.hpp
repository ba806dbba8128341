#ifndef MEMBRANE_CLI_EXPRESSION_HPP
#define MEMBRANE_CLI_EXPRESSION_HPP

#include <memory>
#include <stdexcept>
#include <string>

namespace membrane::cli {

class ExpressionError : public std::runtime_error {
 public:
  ExpressionError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " at column " + std::to_string(position + 1)),
        position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Arithmetic over x and y:
///   expr   := term (('+' | '-') term)*
///   term   := unary (('*' | '/') unary)*
///   unary  := ('+' | '-') unary | power
///   power  := atom ('^' unary)?          (right associative)
///   atom   := number | x | y | pi | name '(' expr (',' expr)* ')' | '(' expr ')'
/// Functions: sin cos tan exp log sqrt abs (one argument), min max (two).
class Expression {
 public:
  struct Node;

  static Expression parse(const std::string& text);

  double operator()(double x, double y) const;
  const std::string& text() const { return text_; }

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

}  // namespace membrane::cli

#endif  // MEMBRANE_CLI_EXPRESSION_HPP
