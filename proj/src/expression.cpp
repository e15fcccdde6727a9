#include "gmix/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <utility>

#include "gmix/errors.hpp"

namespace gmix {

namespace {

using Fn = std::function<double(double)>;

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  Fn parse() {
    Fn fn = expression();
    skipSpace();
    if (pos_ != text_.size()) {
      fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    }
    return fn;
  }

 private:
  // expression := term (('+' | '-') term)*
  Fn expression() {
    Fn lhs = term();
    while (true) {
      skipSpace();
      if (consume('+')) {
        Fn rhs = term();
        lhs = [lhs, rhs](double x) { return lhs(x) + rhs(x); };
      } else if (consume('-')) {
        Fn rhs = term();
        lhs = [lhs, rhs](double x) { return lhs(x) - rhs(x); };
      } else {
        return lhs;
      }
    }
  }

  // term := factor (('*' | '/') factor)*
  Fn term() {
    Fn lhs = factor();
    while (true) {
      skipSpace();
      if (consume('*')) {
        Fn rhs = factor();
        lhs = [lhs, rhs](double x) { return lhs(x) * rhs(x); };
      } else if (consume('/')) {
        Fn rhs = factor();
        lhs = [lhs, rhs](double x) { return lhs(x) / rhs(x); };
      } else {
        return lhs;
      }
    }
  }

  // factor := ('+' | '-') factor | power
  Fn factor() {
    skipSpace();
    if (consume('+')) {
      return factor();
    }
    if (consume('-')) {
      Fn inner = factor();
      return [inner](double x) { return -inner(x); };
    }
    return power();
  }

  // power := atom ('^' factor)?   (right-associative, binds above unary sign)
  Fn power() {
    Fn base = atom();
    skipSpace();
    if (consume('^')) {
      Fn exponent = factor();
      return [base, exponent](double x) {
        return std::pow(base(x), exponent(x));
      };
    }
    return base;
  }

  Fn atom() {
    skipSpace();
    if (pos_ >= text_.size()) {
      fail("unexpected end of expression");
    }
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Fn inner = expression();
      skipSpace();
      if (!consume(')')) {
        fail("missing closing parenthesis");
      }
      return inner;
    }
    if (c == 'x') {
      ++pos_;
      return [](double x) { return x; };
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = text_.c_str() + pos_;
      char* end = nullptr;
      const double value = std::strtod(begin, &end);
      if (end == begin) {
        fail("invalid number");
      }
      pos_ += static_cast<std::size_t>(end - begin);
      return [value](double) { return value; };
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  void skipSpace() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  bool consume(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& message) {
    throw ParseError("curve expression at position " + std::to_string(pos_) +
                     ": " + message);
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::function<double(double)> parseCurveExpression(const std::string& text) {
  return Parser(text).parse();
}

}  // namespace gmix
