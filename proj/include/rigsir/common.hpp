#pragma once

/*
 * Shared basics: the time/weight scalar conventions, error types, compensated
 * summation and a small least-squares helper used by the growth estimators.
 *
 * Convention used throughout: an infinite value (infectious period, blocked
 * transmission, never-infected time) is represented by the IEEE infinity
 * sentinel, never by a large finite float.  Arithmetic rules that matter:
 * t + inf = inf, exp(-lambda*inf) is taken to be 0 for all lambda >= 0
 * (callers short-circuit the lambda = 0 case instead of evaluating 0*inf).
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace rigsir {

inline constexpr double inf = std::numeric_limits<double>::infinity();

inline bool is_finite(double x) { return std::isfinite(x); }

/* Configuration / input validation failure (CLI maps this to exit code 2). */
struct config_error : std::runtime_error {
    explicit config_error(const std::string& field, const std::string& what)
        : std::runtime_error("config error: " + field + ": " + what), field(field) {}
    std::string field;
};

/* Model admissibility failure (CLI maps this to exit code 3): the weight or
 * transmission laws violate the standing moment/atom conditions. */
struct assumption_error : std::runtime_error {
    explicit assumption_error(const std::string& what) : std::runtime_error(what) {}
};

/* Kahan–Neumaier compensated accumulator.  Parallel reductions sum per-chunk
 * partials in a fixed chunk order through one of these, which keeps results
 * independent of the worker count. */
class kahan_sum_t {
  public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct ols_fit_t {
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    double slope_stderr = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_points = 0;
};

/* Ordinary least squares y = a + b x with the usual slope standard error. */
inline ols_fit_t ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("ols_fit: size mismatch");
    ols_fit_t f;
    f.n_points = x.size();
    if (f.n_points < 2)
        return f;
    kahan_sum_t sx, sy;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx.add(x[i]);
        sy.add(y[i]);
    }
    const double mx = sx.value() / double(x.size());
    const double my = sy.value() / double(x.size());
    kahan_sum_t sxx, sxy;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx.add((x[i] - mx) * (x[i] - mx));
        sxy.add((x[i] - mx) * (y[i] - my));
    }
    if (sxx.value() <= 0.0)
        throw std::invalid_argument("ols_fit: degenerate abscissae");
    f.slope = sxy.value() / sxx.value();
    f.intercept = my - f.slope * mx;
    if (f.n_points > 2) {
        kahan_sum_t ss;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - (f.intercept + f.slope * x[i]);
            ss.add(r * r);
        }
        f.slope_stderr = std::sqrt(ss.value() / (double(f.n_points - 2) * sxx.value()));
    }
    return f;
}

/* Shortest-faithful decimal formatting for reproducible text artifacts. */
inline std::string fmt_double(double x) {
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    if (std::isnan(x))
        return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    /* Use the shortest representation that round-trips. */
    for (int prec = 1; prec < 17; ++prec) {
        char cand[40];
        std::snprintf(cand, sizeof cand, "%.*g", prec, x);
        if (std::strtod(cand, nullptr) == x)
            return cand;
    }
    return buf;
}

inline double median_of(std::vector<double> v) {
    if (v.empty())
        throw std::invalid_argument("median_of: empty");
    std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double hi = v[mid];
    if (v.size() % 2 == 1)
        return hi;
    std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
    return 0.5 * (v[mid - 1] + hi);
}

}  // namespace rigsir
