#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tmm/backward.hpp"

namespace tmm {

// Payoff expressions, one instrument each:
//   call(c, strike=K[, T=t])      max(x_c - K, 0)
//   put(c, strike=K[, T=t])       max(K - x_c, 0)
//   linear(a1, ..., aD[, T=t])    a . x
//   const(v[, T=t])
//   sum(e1, e2, ...)
// c is a coordinate name (F, alpha for SABR) or x1..xD. Terms without T pay
// at the horizon. Syntax errors throw ConfigError.
class PayoffExpression {
public:
    static PayoffExpression parse(const std::string& text, int dim, const std::vector<std::string>& names = {});

    const std::string& text() const { return text_; }
    // Every term, ignoring pay times.
    double operator()(Point x) const;
    // Terms paying at t (within 1e-12), with untimed terms paying at horizon.
    double cashflow(double t, Point x, double horizon) const;
    std::vector<double> pay_times(double horizon) const;

    struct Term {
        enum class Kind { call, put, linear, constant } kind = Kind::constant;
        int coord = 0;
        double strike = 0.0;
        std::vector<double> coeffs;
        double value = 0.0;
        std::optional<double> pay_time;
    };

private:
    std::string text_;
    int dim_ = 0;
    std::vector<Term> terms_;
};

struct PayoffBook {
    Payoff payoff;
    // Sorted union of the pay times of all instruments.
    std::vector<double> pay_times;
};

PayoffBook make_payoff(const std::vector<std::string>& expressions, int dim, double horizon,
                       const std::vector<std::string>& names = {});

}  // namespace tmm
