#include "tmm/payoff.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "tmm/error.hpp"

namespace tmm {

namespace {

constexpr double kTimeTol = 1e-12;

class Parser {
public:
    Parser(const std::string& text, int dim, const std::vector<std::string>& names)
        : s_(text), dim_(dim), names_(names) {}

    std::vector<PayoffExpression::Term> parse() {
        std::vector<PayoffExpression::Term> terms;
        expression(terms);
        skip();
        if (pos_ != s_.size()) fail("trailing input");
        return terms;
    }

private:
    using Term = PayoffExpression::Term;

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("payoff '" + s_ + "': " + what + " at position " + std::to_string(pos_));
    }

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
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    std::string word() {
        skip();
        const std::size_t b = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        if (b == pos_) fail("expected a name");
        return s_.substr(b, pos_ - b);
    }

    double number() {
        skip();
        const char* begin = s_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin || !std::isfinite(v)) fail("expected a number");
        pos_ += static_cast<std::size_t>(end - begin);
        return v;
    }

    // `name=` prefix of a keyword argument, or empty for a positional one.
    std::string keyword() {
        skip();
        const std::size_t save = pos_;
        if (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) {
            const std::string w = word();
            if (accept('=')) return w;
        }
        pos_ = save;
        return "";
    }

    int coordinate() {
        const std::string w = word();
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == w) return static_cast<int>(i);
        if (w.size() > 1 && w[0] == 'x' && std::all_of(w.begin() + 1, w.end(), ::isdigit)) {
            const int i = std::stoi(w.substr(1));
            if (i >= 1 && i <= dim_) return i - 1;
        }
        fail("unknown coordinate '" + w + "'");
    }

    void expression(std::vector<Term>& out) {
        const std::string head = word();
        expect('(');
        if (head == "sum") {
            do {
                expression(out);
            } while (accept(','));
            expect(')');
            return;
        }
        Term t;
        if (head == "call" || head == "put") {
            t.kind = head == "call" ? Term::Kind::call : Term::Kind::put;
            t.coord = coordinate();
            bool have_strike = false;
            while (accept(',')) {
                const std::string key = keyword();
                if (key == "strike" || (key.empty() && !have_strike)) {
                    t.strike = number();
                    have_strike = true;
                } else if (key == "T") {
                    t.pay_time = number();
                } else {
                    fail("unexpected argument");
                }
            }
            if (!have_strike) fail("missing strike");
        } else if (head == "linear" || head == "const") {
            t.kind = head == "linear" ? Term::Kind::linear : Term::Kind::constant;
            do {
                const std::string key = keyword();
                if (key == "T")
                    t.pay_time = number();
                else if (key.empty())
                    t.coeffs.push_back(number());
                else
                    fail("unexpected argument '" + key + "'");
            } while (accept(','));
            if (t.kind == Term::Kind::linear && static_cast<int>(t.coeffs.size()) != dim_)
                fail("linear needs " + std::to_string(dim_) + " coefficients");
            if (t.kind == Term::Kind::constant) {
                if (t.coeffs.size() != 1) fail("const needs one value");
                t.value = t.coeffs[0];
                t.coeffs.clear();
            }
        } else {
            fail("unknown payoff '" + head + "'");
        }
        expect(')');
        out.push_back(std::move(t));
    }

    const std::string& s_;
    int dim_;
    const std::vector<std::string>& names_;
    std::size_t pos_ = 0;
};

double evaluate(const PayoffExpression::Term& t, Point x) {
    using Kind = PayoffExpression::Term::Kind;
    switch (t.kind) {
        case Kind::call:
            return std::max(x[static_cast<std::size_t>(t.coord)] - t.strike, 0.0);
        case Kind::put:
            return std::max(t.strike - x[static_cast<std::size_t>(t.coord)], 0.0);
        case Kind::linear: {
            double s = 0.0;
            for (std::size_t d = 0; d < t.coeffs.size(); ++d) s += t.coeffs[d] * x[d];
            return s;
        }
        case Kind::constant:
            return t.value;
    }
    return 0.0;
}

}  // namespace

PayoffExpression PayoffExpression::parse(const std::string& text, int dim, const std::vector<std::string>& names) {
    if (dim < 1) throw InvalidArgument("payoff: dim must be positive");
    PayoffExpression e;
    e.text_ = text;
    e.dim_ = dim;
    e.terms_ = Parser(text, dim, names).parse();
    return e;
}

double PayoffExpression::operator()(Point x) const {
    if (static_cast<int>(x.size()) != dim_) throw InvalidArgument("payoff: point has the wrong dimension");
    double s = 0.0;
    for (const auto& t : terms_) s += evaluate(t, x);
    return s;
}

double PayoffExpression::cashflow(double t, Point x, double horizon) const {
    if (static_cast<int>(x.size()) != dim_) throw InvalidArgument("payoff: point has the wrong dimension");
    double s = 0.0;
    for (const auto& term : terms_)
        if (std::abs(term.pay_time.value_or(horizon) - t) <= kTimeTol) s += evaluate(term, x);
    return s;
}

std::vector<double> PayoffExpression::pay_times(double horizon) const {
    std::vector<double> out;
    for (const auto& t : terms_) out.push_back(t.pay_time.value_or(horizon));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(), [](double a, double b) { return std::abs(a - b) <= kTimeTol; }),
              out.end());
    return out;
}

PayoffBook make_payoff(const std::vector<std::string>& expressions, int dim, double horizon,
                       const std::vector<std::string>& names) {
    if (expressions.empty()) throw ConfigError("payoff: no instruments");
    std::vector<PayoffExpression> parsed;
    PayoffBook book;
    for (const auto& text : expressions) {
        parsed.push_back(PayoffExpression::parse(text, dim, names));
        book.payoff.ids.push_back(text);
        for (double t : parsed.back().pay_times(horizon)) book.pay_times.push_back(t);
    }
    std::sort(book.pay_times.begin(), book.pay_times.end());
    book.pay_times.erase(std::unique(book.pay_times.begin(), book.pay_times.end(),
                                     [](double a, double b) { return std::abs(a - b) <= kTimeTol; }),
                         book.pay_times.end());
    book.payoff.cashflow = [parsed = std::move(parsed), horizon](double t, Point x) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(parsed.size()));
        for (std::size_t m = 0; m < parsed.size(); ++m) v[static_cast<Eigen::Index>(m)] = parsed[m].cashflow(t, x, horizon);
        return v;
    };
    return book;
}

}  // namespace tmm
