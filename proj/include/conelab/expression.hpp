#pragma once

#include "conelab/types.hpp"

#include <memory>
#include <string>
#include <vector>

namespace conelab {

// Parse error carrying the character offset into the source string.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, size_t offset)
      : Error(ErrorKind::ParseError, message + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  size_t offset() const { return offset_; }

 private:
  size_t offset_;
};

// Scalar expression in named variables.
//
// Grammar (see README for the user-facing description):
//   expr    := term (('+'|'-') term)*
//   term    := factor (('*'|'/') factor)*
//   factor  := ('+'|'-') factor | power
//   power   := atom ('^' factor)?          (right associative)
//   atom    := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
// Functions: sin, cos, exp, log, pow. Constant: pi.
class Expression {
 public:
  Expression() = default;
  static Expression parse(const std::string& source, const std::vector<std::string>& variables);

  double eval(const std::vector<double>& values) const;
  const std::string& source() const { return source_; }
  bool empty() const { return !root_; }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string source_;
  std::vector<std::string> variables_;
};

}  // namespace conelab
