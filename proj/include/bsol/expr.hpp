#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bsol/errors.hpp"

namespace bsol {

// Small closed-form expression language over one variable `x`:
//   literals, x, + - * /, a^b or pow(a,b), sqrt, sin, exp, log, floor,
//   min, max, parentheses.  Parsed once into a postfix program and then
//   evaluated with a tiny stack machine.
class Expr {
public:
    Expr() = default;

    static Expr parse(std::string_view text, int line = 1, int col = 1) {
        Parser p(text, line, col);
        Expr e;
        e.text_ = std::string(text);
        p.parse_into(e.code_);
        return e;
    }

    double operator()(double x) const { return eval(x); }

    double eval(double x) const {
        double stack[64];
        int top = -1;
        for (const Op& op : code_) {
            switch (op.kind) {
                case OpKind::Push: stack[++top] = op.value; break;
                case OpKind::Var: stack[++top] = x; break;
                case OpKind::Add: --top; stack[top] += stack[top + 1]; break;
                case OpKind::Sub: --top; stack[top] -= stack[top + 1]; break;
                case OpKind::Mul: --top; stack[top] *= stack[top + 1]; break;
                case OpKind::Div: --top; stack[top] /= stack[top + 1]; break;
                case OpKind::Pow: --top; stack[top] = std::pow(stack[top], stack[top + 1]); break;
                case OpKind::Neg: stack[top] = -stack[top]; break;
                case OpKind::Sqrt: stack[top] = std::sqrt(stack[top]); break;
                case OpKind::Sin: stack[top] = std::sin(stack[top]); break;
                case OpKind::Exp: stack[top] = std::exp(stack[top]); break;
                case OpKind::Log: stack[top] = std::log(stack[top]); break;
                case OpKind::Floor: stack[top] = std::floor(stack[top]); break;
                case OpKind::Min: --top; stack[top] = std::min(stack[top], stack[top + 1]); break;
                case OpKind::Max: --top; stack[top] = std::max(stack[top], stack[top + 1]); break;
            }
        }
        return stack[0];
    }

    const std::string& text() const { return text_; }
    bool empty() const { return code_.empty(); }

private:
    enum class OpKind : std::uint8_t {
        Push, Var, Add, Sub, Mul, Div, Pow, Neg,
        Sqrt, Sin, Exp, Log, Floor, Min, Max
    };
    struct Op {
        OpKind kind;
        double value = 0.0;
    };

    // Recursive-descent parser.
    //   expr   := term (('+'|'-') term)*
    //   term   := unary (('*'|'/') unary)*
    //   unary  := ('-'|'+')* power
    //   power  := atom ('^' unary)?          (right associative)
    //   atom   := number | 'x' | name '(' expr (',' expr)? ')' | '(' expr ')'
    class Parser {
    public:
        Parser(std::string_view s, int line, int col)
            : s_(s), line_(line), col0_(col) {}

        void parse_into(std::vector<Op>& out) {
            out_ = &out;
            skip_ws();
            if (eof()) fail("empty expression");
            parse_expr();
            skip_ws();
            if (!eof()) fail("unexpected trailing input");
        }

    private:
        std::string_view s_;
        std::size_t i_ = 0;
        int line_;
        int col0_;
        std::vector<Op>* out_ = nullptr;

        [[noreturn]] void fail(const std::string& msg) {
            throw ParseError(line_, col0_ + int(i_), msg);
        }
        bool eof() const { return i_ >= s_.size(); }
        char peek() const { return eof() ? '\0' : s_[i_]; }
        void skip_ws() {
            while (!eof() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_;
        }
        bool consume(char c) {
            skip_ws();
            if (peek() == c) { ++i_; return true; }
            return false;
        }
        void emit(OpKind k, double v = 0.0) { out_->push_back({k, v}); }

        void parse_expr() {
            parse_term();
            for (;;) {
                skip_ws();
                if (consume('+')) { parse_term(); emit(OpKind::Add); }
                else if (consume('-')) { parse_term(); emit(OpKind::Sub); }
                else break;
            }
        }
        void parse_term() {
            parse_unary();
            for (;;) {
                skip_ws();
                if (consume('*')) { parse_unary(); emit(OpKind::Mul); }
                else if (consume('/')) { parse_unary(); emit(OpKind::Div); }
                else break;
            }
        }
        void parse_unary() {
            skip_ws();
            int negs = 0;
            while (peek() == '-' || peek() == '+') {
                if (peek() == '-') ++negs;
                ++i_;
                skip_ws();
            }
            parse_power();
            if (negs % 2) emit(OpKind::Neg);
        }
        void parse_power() {
            parse_atom();
            skip_ws();
            if (consume('^')) {
                parse_unary();  // right associative, allows x^-2
                emit(OpKind::Pow);
            }
        }
        void parse_atom() {
            skip_ws();
            if (eof()) fail("unexpected end of expression");
            const char c = peek();
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                parse_number();
                return;
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                parse_name();
                return;
            }
            if (consume('(')) {
                parse_expr();
                if (!consume(')')) fail("expected ')'");
                return;
            }
            fail(std::string("unexpected character '") + c + "'");
        }
        void parse_number() {
            const char* begin = s_.data() + i_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) fail("malformed number");
            i_ += std::size_t(end - begin);
            emit(OpKind::Push, v);
        }
        void parse_name() {
            std::size_t start = i_;
            while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_'))
                ++i_;
            const std::string_view name = s_.substr(start, i_ - start);
            if (name == "x") { emit(OpKind::Var); return; }
            if (name == "pi") { emit(OpKind::Push, 3.14159265358979323846); return; }

            OpKind k;
            int arity = 1;
            if (name == "sqrt") k = OpKind::Sqrt;
            else if (name == "sin") k = OpKind::Sin;
            else if (name == "exp") k = OpKind::Exp;
            else if (name == "log") k = OpKind::Log;
            else if (name == "floor") k = OpKind::Floor;
            else if (name == "min") { k = OpKind::Min; arity = 2; }
            else if (name == "max") { k = OpKind::Max; arity = 2; }
            else if (name == "pow") { k = OpKind::Pow; arity = 2; }
            else fail("unknown name '" + std::string(name) + "'");

            if (!consume('(')) fail("expected '(' after '" + std::string(name) + "'");
            parse_expr();
            if (arity == 2) {
                if (!consume(',')) fail("expected ',' in 2-argument call");
                parse_expr();
            }
            if (!consume(')')) fail("expected ')'");
            emit(k);
        }
    };

    std::vector<Op> code_;
    std::string text_;
};

}  // namespace bsol
