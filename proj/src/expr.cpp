#include "kpx/expr.hpp"

#include "kpx/common.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace kpx {

struct Expr::Node {
    enum Kind { num, var, neg, add, sub, mul, div, pow, call } kind = num;
    double value = 0.0;
    int index = 0;
    double (*fn)(double) = nullptr;
    std::shared_ptr<const Node> a, b;

    double eval(const std::vector<double>& v) const {
        switch (kind) {
            case num: return value;
            case var: return v[static_cast<size_t>(index)];
            case neg: return -a->eval(v);
            case add: return a->eval(v) + b->eval(v);
            case sub: return a->eval(v) - b->eval(v);
            case mul: return a->eval(v) * b->eval(v);
            case div: return a->eval(v) / b->eval(v);
            case pow: return std::pow(a->eval(v), b->eval(v));
            case call: return fn(a->eval(v));
        }
        return NAN;
    }
    bool uses(int v) const {
        if (kind == var) return index == v;
        return (a && a->uses(v)) || (b && b->uses(v));
    }
};

namespace {

using NodeP = std::shared_ptr<const Expr::Node>;

double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }
double fsin(double x) { return std::sin(x); }
double fcos(double x) { return std::cos(x); }
double ftan(double x) { return std::tan(x); }
double fexp(double x) { return std::exp(x); }
double flog(double x) { return std::log(x); }
double fsqrt(double x) { return std::sqrt(x); }
double fabs_(double x) { return std::abs(x); }
double ftanh(double x) { return std::tanh(x); }

class Parser {
public:
    Parser(const std::string& s, const std::vector<std::string>& vars) : s_(s), vars_(vars) {}

    NodeP parse() {
        NodeP e = expr();
        skip();
        if (i_ != s_.size()) fail("unexpected '" + std::string(1, s_[i_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("expression \"" + s_ + "\" at position " + std::to_string(i_) + ": " + what);
    }
    void skip() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }
    bool eat(char c) {
        skip();
        if (i_ < s_.size() && s_[i_] == c) {
            ++i_;
            return true;
        }
        return false;
    }
    static NodeP make(Expr::Node::Kind k, NodeP a = nullptr, NodeP b = nullptr) {
        auto n = std::make_shared<Expr::Node>();
        n->kind = k;
        n->a = std::move(a);
        n->b = std::move(b);
        return n;
    }

    NodeP expr() {
        NodeP l = term();
        for (;;) {
            if (eat('+')) l = make(Expr::Node::add, l, term());
            else if (eat('-')) l = make(Expr::Node::sub, l, term());
            else return l;
        }
    }
    NodeP term() {
        NodeP l = unary();
        for (;;) {
            if (eat('*')) l = make(Expr::Node::mul, l, unary());
            else if (eat('/')) l = make(Expr::Node::div, l, unary());
            else return l;
        }
    }
    NodeP unary() {
        if (eat('-')) return make(Expr::Node::neg, unary());
        if (eat('+')) return unary();
        return power();
    }
    NodeP power() {
        NodeP base = atom();
        if (eat('^')) return make(Expr::Node::pow, base, unary());
        return base;
    }
    NodeP atom() {
        skip();
        if (i_ >= s_.size()) fail("unexpected end");
        const char c = s_[i_];
        if (c == '(') {
            ++i_;
            NodeP e = expr();
            if (!eat(')')) fail("missing ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s_.c_str() + i_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) fail("bad number");
            i_ += static_cast<size_t>(end - begin);
            auto n = std::make_shared<Expr::Node>();
            n->value = v;
            return n;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            const size_t start = i_;
            while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) ++i_;
            const std::string name = s_.substr(start, i_ - start);
            if (eat('(')) {
                static const std::pair<const char*, double (*)(double)> fns[] = {
                    {"sin", fsin}, {"cos", fcos}, {"tan", ftan}, {"exp", fexp}, {"log", flog},
                    {"sqrt", fsqrt}, {"abs", fabs_}, {"sgn", sgn}, {"tanh", ftanh}};
                double (*fn)(double) = nullptr;
                for (const auto& [k, f] : fns)
                    if (name == k) fn = f;
                if (!fn) fail("unknown function '" + name + "'");
                NodeP arg = expr();
                if (!eat(')')) fail("missing ')'");
                auto n = std::make_shared<Expr::Node>();
                n->kind = Expr::Node::call;
                n->fn = fn;
                n->a = arg;
                return n;
            }
            if (name == "pi") {
                auto n = std::make_shared<Expr::Node>();
                n->value = kPi;
                return n;
            }
            for (size_t k = 0; k < vars_.size(); ++k)
                if (vars_[k] == name) {
                    auto n = std::make_shared<Expr::Node>();
                    n->kind = Expr::Node::var;
                    n->index = static_cast<int>(k);
                    return n;
                }
            fail("unknown variable '" + name + "'");
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    const std::string& s_;
    const std::vector<std::string>& vars_;
    size_t i_ = 0;
};

}  // namespace

Expr::Expr(const std::string& text, const std::vector<std::string>& variables) : text_(text) {
    root_ = Parser(text_, variables).parse();
}

bool Expr::depends_on(int variable) const { return root_ && root_->uses(variable); }

double Expr::eval(const std::vector<double>& values) const {
    if (!root_) throw ConfigError("evaluating an empty expression");
    return root_->eval(values);
}

}  // namespace kpx
