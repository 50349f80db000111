#pragma once
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "errors.hpp"
#include "model.hpp"

namespace operon {

using ScalarHistory = std::function<double(double)>;

struct ThresholdSpec {
    double a = 1;
    std::function<double(double)> v;
    double v_min = 1, v_max = 1;

    double tau_min() const { return a / v_max; }
    double tau_max() const { return a / v_min; }
    bool constant() const { return v_min == v_max; }
};

inline void validate(const ThresholdSpec& s) {
    if (!(s.a > 0)) throw ValidationError("threshold length must be > 0");
    if (!(s.v_min > 0 && s.v_min <= s.v_max))
        throw ValidationError("threshold velocity bounds need 0 < v_min <= v_max");
}

inline ThresholdSpec threshold_M(const OperonParameters& p) {
    return {p.aM, [p](double E) { return velocity_vM(p, std::max(E, 0.0)); }, p.vM_min, p.vM_max};
}

inline ThresholdSpec threshold_I(const OperonParameters& p) {
    return {p.aI, [p](double M) { return velocity_vI(p, std::max(M, 0.0)); }, p.vI_min, p.vI_max};
}

struct DiscretizationGrid {
    int N = 48;
    std::vector<double> nodes;
};

inline DiscretizationGrid make_grid(const ThresholdSpec& s, int N = 48) {
    validate(s);
    if (N < 1) throw ValidationError("grid needs N >= 1");
    DiscretizationGrid g{N, std::vector<double>(2 * N + 1)};
    double t1 = s.tau_min(), t2 = s.tau_max();
    for (int j = 0; j <= N; ++j) g.nodes[j] = t1 * j / N;
    for (int j = 1; j <= N; ++j) g.nodes[N + j] = t1 + (t2 - t1) * j / N;
    g.nodes[N] = t1;
    g.nodes[2 * N] = t2;
    return g;
}

// breaks: sorted times where the history is only piecewise smooth
inline double threshold_integral(const ThresholdSpec& s, const ScalarHistory& h, double lo, double hi,
                                 const std::vector<double>& breaks = {}, double tol = 1e-13) {
    if (hi <= lo) return 0.0;
    auto integrand = [&](double x) { return s.v(h(x)); };
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    if (breaks.empty()) return GK::integrate(integrand, lo, hi, 20, tol);
    using GL = boost::math::quadrature::gauss<double, 10>;
    auto it = std::upper_bound(breaks.begin(), breaks.end(), lo);
    double total = 0, a = lo;
    for (; it != breaks.end() && *it < hi; ++it) {
        total += GL::integrate(integrand, a, *it);
        a = *it;
    }
    return total + GL::integrate(integrand, a, hi);
}

// solves int_{t-tau}^{t} v(h(s)) ds = a for tau, history known on [t-r, t]
inline double delay_exact(const ThresholdSpec& s, const ScalarHistory& h, double t, double r,
                          const std::vector<double>& breaks = {}) {
    validate(s);
    if (s.constant()) return s.a / s.v_min;
    double lo = s.tau_min(), hi = std::min(s.tau_max(), r);
    if (r < lo) throw HorizonError("history horizon shorter than a/v_max");
    double F_lo = threshold_integral(s, h, t - lo, t, breaks);
    if (F_lo >= s.a) return lo;
    double F_hi = F_lo + threshold_integral(s, h, t - hi, t - lo, breaks);
    if (F_hi < s.a) {
        if (hi < s.tau_max()) throw HorizonError("threshold integral over the full history window is below a");
        return hi;
    }
    double tau = lo, F = F_lo;
    const double ftol = 1e-12 * s.a;
    for (int it = 0; it < 200; ++it) {
        if (std::abs(F - s.a) <= ftol) return tau;
        double slope = s.v(h(t - tau));
        double next = tau - (F - s.a) / slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        double Fn = next > tau ? F + threshold_integral(s, h, t - next, t - tau, breaks)
                               : F - threshold_integral(s, h, t - tau, t - next, breaks);
        tau = next;
        F = Fn;
        if (F < s.a) lo = tau;
        else hi = tau;
        if (hi - lo <= 1e-15 * hi) return tau;
    }
    throw NumericalError("delay_exact did not converge");
}

// trapezoid sums over the dummy-delay grid, then the quadratic on the located subinterval
inline double delay_discretized(const ThresholdSpec& s, const DiscretizationGrid& g, const ScalarHistory& h,
                                double t) {
    validate(s);
    if (s.constant()) return s.a / s.v_min;
    const auto& x = g.nodes;
    std::size_t last = x.size() - 1;
    double J = 0, y0 = s.v(h(t - x[0]));
    for (std::size_t j = 0; j < last; ++j) {
        double w = x[j + 1] - x[j];
        double y1 = s.v(h(t - x[j + 1]));
        double Jn = J + 0.5 * w * (y0 + y1);
        if (w > 0 && J <= s.a && s.a < Jn) {
            double R = s.a - J;
            double slope = (y1 - y0) / w;
            double disc = std::max(y0 * y0 + 2 * R * slope, 0.0);
            double step = 2 * R / (y0 + std::sqrt(disc));
            return x[j] + std::clamp(step, 0.0, w);
        }
        J = Jn;
        y0 = y1;
    }
    if (J >= s.a * (1 - 1e-12)) return x[last];
    throw HorizonError("discretized threshold sum over the full grid is below a");
}

inline double delay_rate(double v_now, double v_delayed) {
    if (!(v_delayed > 0)) throw EvaluationError("delayed velocity must be > 0");
    return 1.0 - v_now / v_delayed;
}

}  // namespace operon
