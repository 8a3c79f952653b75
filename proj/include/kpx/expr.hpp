#pragma once

#include <memory>
#include <string>
#include <vector>

namespace kpx {

// Arithmetic expressions over named variables:
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := ('-' | '+') unary | power
//   power  := atom ('^' unary)?
//   atom   := number | name | name '(' expr ')' | '(' expr ')'
// Functions: sin cos tan exp log sqrt abs sgn tanh. Constant: pi.
class Expr {
public:
    Expr() = default;
    // throws ConfigError with the offending position on syntax errors or unknown names
    Expr(const std::string& text, const std::vector<std::string>& variables);

    double eval(const std::vector<double>& values) const;
    const std::string& text() const { return text_; }
    bool empty() const { return !root_; }
    bool depends_on(int variable) const;

    struct Node;

private:
    std::string text_;
    std::shared_ptr<const Node> root_;
};

}  // namespace kpx
