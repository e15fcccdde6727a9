#pragma once

#include <functional>
#include <string>

namespace gmix {

/// Compiles a scalar curve expression over the variable x.
///
/// Grammar: + - * / ^ (right-associative power), unary sign, parentheses,
/// decimal literals and the variable x. Throws ParseError on malformed
/// input.
std::function<double(double)> parseCurveExpression(const std::string& text);

}  // namespace gmix
