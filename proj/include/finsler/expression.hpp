#pragma once

#include <cctype>
#include <cmath>
#include <string>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"

namespace finsler {

/// A parsed scalar expression over named variables.
///
/// Grammar: reals, variables, + - * / ^, sin cos exp sqrt, parentheses,
/// unary minus.  '^' binds tightest and is right-associative.  The source
/// compiles once into a postfix program evaluated by a small stack machine,
/// generic over the scalar type so the same expression feeds plain doubles
/// and jets.
class Expr {
public:
  Expr() = default;

  static Expr parse(const std::string& src, const std::vector<std::string>& variables) {
    Parser p{src, variables};
    Expr e;
    e.vars_ = variables;
    e.src_ = src;
    p.parse_into(e.prog_);
    return e;
  }

  template <class S>
  S eval(const std::vector<S>& values) const {
    using std::cos;
    using std::exp;
    using std::pow;
    using std::sin;
    using std::sqrt;
    if (values.size() != vars_.size())
      throw PreconditionError("expression: expected " + std::to_string(vars_.size()) +
                              " variable values, got " + std::to_string(values.size()));
    std::vector<S> stack;
    stack.reserve(8);
    for (const Op& op : prog_) {
      switch (op.kind) {
        case OpKind::Const:
          stack.push_back(S(op.number));
          break;
        case OpKind::Var:
          stack.push_back(values[static_cast<std::size_t>(op.index)]);
          break;
        case OpKind::Neg:
          stack.back() = -stack.back();
          break;
        case OpKind::Sin:
          stack.back() = sin(stack.back());
          break;
        case OpKind::Cos:
          stack.back() = cos(stack.back());
          break;
        case OpKind::Exp:
          stack.back() = exp(stack.back());
          break;
        case OpKind::Sqrt:
          stack.back() = sqrt(stack.back());
          break;
        default: {
          S b = stack.back();
          stack.pop_back();
          S& a = stack.back();
          switch (op.kind) {
            case OpKind::Add: a = a + b; break;
            case OpKind::Sub: a = a - b; break;
            case OpKind::Mul: a = a * b; break;
            case OpKind::Div: a = a / b; break;
            case OpKind::Pow: a = pow(a, b); break;
            default: throw Error("expression: corrupt program");
          }
          break;
        }
      }
    }
    return stack.back();
  }

  const std::string& source() const { return src_; }
  bool empty() const { return prog_.empty(); }

private:
  enum class OpKind { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Sqrt };
  struct Op {
    OpKind kind;
    double number = 0.0;
    int index = 0;
  };

  struct Parser {
    const std::string& src;
    const std::vector<std::string>& vars;
    std::size_t pos = 0;

    void parse_into(std::vector<Op>& out) {
      expr(out);
      skip_ws();
      if (pos != src.size()) fail("unexpected trailing input");
    }

    void expr(std::vector<Op>& out) {  // additive level
      term(out);
      for (;;) {
        skip_ws();
        if (peek() == '+') {
          ++pos;
          term(out);
          out.push_back({OpKind::Add});
        } else if (peek() == '-') {
          ++pos;
          term(out);
          out.push_back({OpKind::Sub});
        } else {
          return;
        }
      }
    }

    void term(std::vector<Op>& out) {  // multiplicative level
      unary(out);
      for (;;) {
        skip_ws();
        if (peek() == '*') {
          ++pos;
          unary(out);
          out.push_back({OpKind::Mul});
        } else if (peek() == '/') {
          ++pos;
          unary(out);
          out.push_back({OpKind::Div});
        } else {
          return;
        }
      }
    }

    void unary(std::vector<Op>& out) {
      skip_ws();
      if (peek() == '-') {
        ++pos;
        unary(out);
        out.push_back({OpKind::Neg});
      } else if (peek() == '+') {
        ++pos;
        unary(out);
      } else {
        power(out);
      }
    }

    void power(std::vector<Op>& out) {  // right associative, binds above unary minus
      atom(out);
      skip_ws();
      if (peek() == '^') {
        ++pos;
        unary(out);  // allow e.g. x^-2
        out.push_back({OpKind::Pow});
      }
    }

    void atom(std::vector<Op>& out) {
      skip_ws();
      const char c = peek();
      if (c == '(') {
        ++pos;
        expr(out);
        skip_ws();
        if (peek() != ')') fail("expected ')'");
        ++pos;
        return;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(src.substr(pos), &used);
        } catch (const std::exception&) {
          fail("malformed number");
        }
        pos += used;
        out.push_back({OpKind::Const, v});
        return;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const std::size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
          ++pos;
        const std::string name = src.substr(start, pos - start);
        skip_ws();
        if (peek() == '(') {
          OpKind fn;
          if (name == "sin") fn = OpKind::Sin;
          else if (name == "cos") fn = OpKind::Cos;
          else if (name == "exp") fn = OpKind::Exp;
          else if (name == "sqrt") fn = OpKind::Sqrt;
          else { pos = start; fail("unknown function '" + name + "'"); }
          ++pos;
          expr(out);
          skip_ws();
          if (peek() != ')') fail("expected ')'");
          ++pos;
          out.push_back({fn});
          return;
        }
        for (std::size_t i = 0; i < vars.size(); ++i) {
          if (vars[i] == name) {
            out.push_back({OpKind::Var, 0.0, static_cast<int>(i)});
            return;
          }
        }
        pos = start;
        fail("unknown identifier '" + name + "'");
      }
      fail(pos >= src.size() ? "unexpected end of input" : std::string("unexpected character '") + c + "'");
    }

    char peek() const { return pos < src.size() ? src[pos] : '\0'; }
    void skip_ws() {
      while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    }
    [[noreturn]] void fail(const std::string& msg) {
      throw ParseError("expression parse error at position " + std::to_string(pos) + ": " + msg,
                       pos);
    }
  };

  std::vector<Op> prog_;
  std::vector<std::string> vars_;
  std::string src_;
};

}  // namespace finsler
