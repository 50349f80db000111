#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <future>
#include <numbers>
#include <optional>
#include <vector>

#include "equilibria.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "threshold_delay.hpp"

namespace operon {

using cplx = std::complex<double>;

// Exact: threshold integrals treated exactly.  Discretized: the state-dependent
// delays are linearized through the dummy-delay trapezoid rule with N per regime.
struct SpectrumMode {
    enum Kind { Exact, Discretized } kind = Exact;
    int N = 32;

    static SpectrumMode exact() { return {Exact, 32}; }
    static SpectrumMode discretized(int N = 32) { return {Discretized, N}; }
};

struct CharacteristicContext {
    OperonParameters params;
    SteadyState steady;
    SpectrumMode mode;
    double f = 0, fp = 0, vM = 0, vMp = 0, vI = 0, vIp = 0;
    double A1 = 0, A2 = 0;
    double gainM = 0, gainI = 0;
    std::vector<double> gridM, gridI;  // empty: exact lag integral
};

struct CharacteristicRoot {
    cplx lambda;
    double residual = 0;
    int multiplicity_hint = 1;
};

struct SearchRegion {
    double re_lo = -5, re_hi = 3, im_hi = 60;
    int n_re = 40, n_im = 80;
};

struct LeadingOrderReport {
    std::optional<cplx> lambda_real_leading;
    std::optional<cplx> lambda_complex_leading;
    bool three_dl_flag = false;
    bool insufficient_region = false;
};

namespace detail {

inline cplx expm1(cplx z) {
    double a = z.real(), b = z.imag();
    double s = std::sin(0.5 * b);
    return {std::expm1(a) * std::cos(b) - 2 * s * s, std::exp(a) * std::sin(b)};
}

// (1 - e^{-lambda tau}) / lambda
inline cplx lag_integral(cplx lambda, double tau) {
    cplx x = lambda * tau;
    if (std::abs(x) < 1e-4) return tau * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0 + x * x * x * x / 120.0);
    return -detail::expm1(-x) / lambda;
}

inline cplx lag_integral_direct(cplx lambda, double tau) { return -detail::expm1(-lambda * tau) / lambda; }

// integral over [0, tau] of the piecewise-linear interpolant of e^{-lambda s} on the grid
inline cplx lag_integral_grid(cplx lambda, double tau, const std::vector<double>& x) {
    cplx sum = 0;
    cplx y0 = 1.0;
    for (std::size_t j = 0; j + 1 < x.size(); ++j) {
        double w = x[j + 1] - x[j];
        if (w <= 0) continue;
        cplx y1 = std::exp(-lambda * x[j + 1]);
        if (tau <= x[j + 1]) {
            double c = tau - x[j];
            cplx yt = y0 + (y1 - y0) * (c / w);
            return sum + 0.5 * c * (y0 + yt);
        }
        sum += 0.5 * w * (y0 + y1);
        y0 = y1;
    }
    return sum;
}

inline bool grid_usable(double vmin, double vmax) { return vmin > 0 && vmin < vmax; }

}  // namespace detail

inline cplx phi_factor(cplx lambda, double tau, double mu) {
    return detail::lag_integral(lambda, tau) * (lambda + mu);
}

inline CharacteristicContext make_context(const OperonParameters& p, const SteadyState& s,
                                          SpectrumMode mode = SpectrumMode::exact()) {
    CharacteristicContext c;
    c.params = p;
    c.steady = s;
    c.mode = mode;
    double E = s.E_star, M = s.M_star;
    c.f = fraction_f(p, E);
    c.fp = fraction_f_prime(p, E);
    c.vM = velocity_vM(p, E);
    if (!(c.vM > 0)) throw EvaluationError("v_M(E*) <= 0");
    c.vMp = velocity_vM_prime(p, E);
    c.vI = velocity_vI(p, M);
    c.vIp = velocity_vI_prime(p, M);
    c.gainM = p.beta_M * std::exp(-p.mu * s.tauM_star);
    c.gainI = p.beta_I * std::exp(-p.mu * s.tauI_star);
    c.A1 = c.gainM * (c.vMp / c.vM) * c.f;
    c.A2 = c.gainI * (c.vIp / c.vI) * M;
    if (mode.kind == SpectrumMode::Discretized) {
        if (detail::grid_usable(p.vM_min, p.vM_max)) c.gridM = make_grid(threshold_M(p), mode.N).nodes;
        if (detail::grid_usable(p.vI_min, p.vI_max)) c.gridI = make_grid(threshold_I(p), mode.N).nodes;
    }
    return c;
}

namespace detail {

inline cplx lag_M(const CharacteristicContext& c, cplx lambda) {
    double tau = c.steady.tauM_star;
    return c.gridM.empty() ? lag_integral(lambda, tau) : lag_integral_grid(lambda, tau, c.gridM);
}

inline cplx lag_I(const CharacteristicContext& c, cplx lambda) {
    double tau = c.steady.tauI_star;
    return c.gridI.empty() ? lag_integral(lambda, tau) : lag_integral_grid(lambda, tau, c.gridI);
}

inline cplx cubic(const CharacteristicContext& c, cplx lambda) {
    const auto& p = c.params;
    return (p.gbar_M + lambda) * (p.gbar_I + lambda) * (p.gbar_E + lambda);
}

// the two bracketed factors of the characteristic function (without beta e^{-mu tau})
inline std::array<cplx, 2> loop_factors(const CharacteristicContext& c, cplx lambda) {
    const auto& p = c.params;
    double tM = c.steady.tauM_star, tI = c.steady.tauI_star;
    cplx eM = std::exp(-lambda * tM), eI = std::exp(-lambda * tI);
    cplx phiM = -detail::expm1(-lambda * tM) + p.mu * lag_M(c, lambda);
    cplx phiI = -detail::expm1(-lambda * tI) + p.mu * lag_I(c, lambda);
    cplx k1 = (c.vMp / c.vM) * c.f * phiM + c.fp * eM;
    cplx k2 = (c.vIp / c.vI) * c.steady.M_star * phiI + eI;
    return {k1, k2};
}

inline double delta_scale(const CharacteristicContext& c, cplx lambda) {
    auto k = loop_factors(c, lambda);
    const auto& p = c.params;
    return std::abs(cubic(c, lambda)) + std::abs(p.beta_E * c.gainM * c.gainI * k[0] * k[1]);
}

}  // namespace detail

inline cplx delta(const CharacteristicContext& c, cplx lambda) {
    auto k = detail::loop_factors(c, lambda);
    const auto& p = c.params;
    double loop = p.beta_M * p.beta_I * p.beta_E * std::exp(-p.mu * (c.steady.tauM_star + c.steady.tauI_star));
    return detail::cubic(c, lambda) - loop * k[0] * k[1];
}

// factorized form built from A1, A2
inline cplx delta_factorized(const CharacteristicContext& c, cplx lambda) {
    const auto& p = c.params;
    double tM = c.steady.tauM_star, tI = c.steady.tauI_star;
    cplx eM = std::exp(-lambda * tM), eI = std::exp(-lambda * tI);
    cplx k1 = c.A1 + (c.gainM * c.fp - c.A1) * eM + p.mu * c.A1 * detail::lag_M(c, lambda);
    cplx k2 = c.A2 + (c.gainI - c.A2) * eI + p.mu * c.A2 * detail::lag_I(c, lambda);
    return detail::cubic(c, lambda) - p.beta_E * k1 * k2;
}

inline cplx delta_derivative(const CharacteristicContext& c, cplx lambda) {
    double h = 1e-7 * (1 + std::abs(lambda));
    return (delta(c, lambda + h) - delta(c, lambda - h)) / (2 * h);
}

namespace detail {

inline std::optional<CharacteristicRoot> newton_root(const CharacteristicContext& c, cplx z, bool real_only,
                                                     const SearchRegion& r, double max_step) {
    cplx D = delta(c, z);
    for (int it = 0; it < 80; ++it) {
        cplx dD = delta_derivative(c, z);
        if (dD == cplx(0)) return std::nullopt;
        cplx step = D / dD;
        if (real_only) step = step.real();
        if (std::abs(step) > max_step) step *= max_step / std::abs(step);
        cplx zn = z - step;
        cplx Dn = delta(c, zn);
        for (int back = 0; back < 12 && std::abs(Dn) > std::abs(D); ++back) {
            step *= 0.5;
            zn = z - step;
            Dn = delta(c, zn);
        }
        z = zn;
        D = Dn;
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return std::nullopt;
        if (z.real() < r.re_lo - 1 || z.real() > r.re_hi + 1 || std::abs(z.imag()) > r.im_hi + 1) return std::nullopt;
        if (std::abs(step) < 1e-13 * (1 + std::abs(z))) break;
    }
    double scale = delta_scale(c, z);
    if (!(std::abs(D) <= 1e-9 * scale)) return std::nullopt;
    if (z.imag() < 0) z = std::conj(z);
    if (std::abs(z.imag()) < 1e-10 * (1 + std::abs(z))) z = z.real();
    CharacteristicRoot root{z, std::abs(delta(c, z)), 1};
    if (std::abs(delta_derivative(c, z)) * (1 + std::abs(z)) < 1e-6 * scale) root.multiplicity_hint = 2;
    return root;
}

inline std::vector<CharacteristicRoot> dedup_roots(std::vector<CharacteristicRoot> roots) {
    std::sort(roots.begin(), roots.end(), [](auto& a, auto& b) {
        if (a.lambda.real() != b.lambda.real()) return a.lambda.real() > b.lambda.real();
        return a.lambda.imag() < b.lambda.imag();
    });
    std::vector<CharacteristicRoot> out;
    for (auto& r : roots) {
        bool dup = false;
        for (auto& q : out)
            if (std::abs(q.lambda - r.lambda) < 1e-7) {
                dup = true;
                break;
            }
        if (!dup) out.push_back(r);
    }
    return out;
}

}  // namespace detail

inline std::vector<CharacteristicRoot> find_roots(const CharacteristicContext& c, const SearchRegion& r = {},
                                                  int jobs = 1) {
    if (!(r.re_lo < r.re_hi) || !(r.im_hi > 0) || r.n_re < 1 || r.n_im < 1)
        throw ValidationError("degenerate root search region");
    double dre = (r.re_hi - r.re_lo) / r.n_re, dim = r.im_hi / r.n_im;
    double max_step = 4 * std::max(dre, dim);
    std::vector<std::pair<cplx, bool>> seeds;
    for (int i = 0; i <= 4 * r.n_re; ++i) seeds.push_back({r.re_lo + (r.re_hi - r.re_lo) * i / (4 * r.n_re), true});
    for (int i = 0; i < r.n_re; ++i)
        for (int j = 0; j < r.n_im; ++j)
            seeds.push_back({cplx(r.re_lo + (i + 0.5) * dre, (j + 0.5) * dim), false});
    auto run = [&](std::size_t lo, std::size_t hi) {
        std::vector<CharacteristicRoot> found;
        for (std::size_t s = lo; s < hi; ++s)
            if (auto root = detail::newton_root(c, seeds[s].first, seeds[s].second, r, max_step)) found.push_back(*root);
        return found;
    };
    std::vector<CharacteristicRoot> all;
    jobs = std::max(1, jobs);
    if (jobs == 1) {
        all = run(0, seeds.size());
    } else {
        std::vector<std::future<std::vector<CharacteristicRoot>>> parts;
        std::size_t chunk = (seeds.size() + jobs - 1) / jobs;
        for (std::size_t lo = 0; lo < seeds.size(); lo += chunk)
            parts.push_back(std::async(std::launch::async, run, lo, std::min(seeds.size(), lo + chunk)));
        for (auto& part : parts)
            for (auto& root : part.get()) all.push_back(root);
    }
    std::vector<CharacteristicRoot> inside;
    for (auto& root : all)
        if (root.lambda.real() >= r.re_lo && root.lambda.real() <= r.re_hi && root.lambda.imag() <= r.im_hi)
            inside.push_back(root);
    return detail::dedup_roots(std::move(inside));
}

// radius beyond which no root with Re >= 0 can exist
inline double unstable_radius(const CharacteristicContext& c) {
    const auto& p = c.params;
    double tM = c.steady.tauM_star, tI = c.steady.tauI_star;
    double B1 = std::abs(c.vMp / c.vM) * c.f * (2 + p.mu * tM) + std::abs(c.fp);
    double B2 = std::abs(c.vIp / c.vI) * c.steady.M_star * (2 + p.mu * tI) + 1;
    double bound = p.beta_M * p.beta_I * p.beta_E * std::exp(-p.mu * (tM + tI)) * B1 * B2;
    return std::max(1.0, std::cbrt(bound)) * 1.05 + 0.1;
}

namespace detail {

inline double arg_change(const CharacteristicContext& c, cplx z0, cplx D0, cplx z1, cplx D1, int depth) {
    double d = std::arg(D1 / D0);
    if (std::abs(d) < 0.3 || depth > 40) return d;
    cplx zm = 0.5 * (z0 + z1);
    cplx Dm = delta(c, zm);
    if (Dm == cplx(0)) throw NumericalError("characteristic root on the counting contour");
    return arg_change(c, z0, D0, zm, Dm, depth + 1) + arg_change(c, zm, Dm, z1, D1, depth + 1);
}

}  // namespace detail

// argument principle on [eps, R] x [-R, R]
inline int count_unstable(const CharacteristicContext& c, double eps = 1e-9) {
    double R = unstable_radius(c);
    double tsum = c.steady.tauM_star + c.steady.tauI_star;
    double ds = std::min(R / 64, 0.2 / std::max(tsum, 1e-12));
    std::array<cplx, 5> corner = {cplx(eps, -R), cplx(R, -R), cplx(R, R), cplx(eps, R), cplx(eps, -R)};
    double total = 0;
    for (int e = 0; e < 4; ++e) {
        cplx a = corner[e], b = corner[e + 1];
        int n = std::max(8, static_cast<int>(std::ceil(std::abs(b - a) / ds)));
        cplx z0 = a, D0 = delta(c, a);
        for (int k = 1; k <= n; ++k) {
            cplx z1 = a + (b - a) * (double(k) / n);
            cplx D1 = delta(c, z1);
            if (D0 == cplx(0) || D1 == cplx(0)) throw NumericalError("characteristic root on the counting contour");
            total += detail::arg_change(c, z0, D0, z1, D1, 0);
            z0 = z1;
            D0 = D1;
        }
    }
    double w = total / (2 * std::numbers::pi);
    int count = static_cast<int>(std::lround(w));
    if (std::abs(w - count) > 0.05 || count < 0) throw NumericalError("winding number not resolved");
    return count;
}

inline std::array<cplx, 3> eigenvector(const CharacteristicContext& c, cplx lambda) {
    const auto& p = c.params;
    cplx pI = p.gbar_I + lambda, pE = p.gbar_E + lambda;
    if (std::abs(pI) < 1e-12 || std::abs(pE) < 1e-12) throw NumericalError("eigenvector pivot vanishes");
    auto k = detail::loop_factors(c, lambda);
    cplx A21 = c.gainI * k[1];
    cplx eI = A21 / pI;
    return {cplx(1), eI, p.beta_E * eI / pE};
}

// ||A(lambda) v|| / ||A(lambda)|| for the linearized system
inline double eigenvector_residual(const CharacteristicContext& c, cplx lambda, const std::array<cplx, 3>& v) {
    const auto& p = c.params;
    auto k = detail::loop_factors(c, lambda);
    cplx A13 = c.gainM * k[0], A21 = c.gainI * k[1];
    cplx r0 = -(p.gbar_M + lambda) * v[0] + A13 * v[2];
    cplx r1 = A21 * v[0] - (p.gbar_I + lambda) * v[1];
    cplx r2 = p.beta_E * v[1] - (p.gbar_E + lambda) * v[2];
    double res = std::sqrt(std::norm(r0) + std::norm(r1) + std::norm(r2));
    double nA = std::sqrt(std::norm(p.gbar_M + lambda) + std::norm(A13) + std::norm(A21) + std::norm(p.gbar_I + lambda) +
                          p.beta_E * p.beta_E + std::norm(p.gbar_E + lambda));
    double nv = std::sqrt(std::norm(v[0]) + std::norm(v[1]) + std::norm(v[2]));
    return res / (nA * nv);
}

inline LeadingOrderReport leading_order_report(const std::vector<CharacteristicRoot>& roots) {
    LeadingOrderReport rep;
    for (auto& r : roots) {
        if (!(r.lambda.real() < -1e-9)) continue;
        if (r.lambda.imag() == 0) {
            if (!rep.lambda_real_leading || r.lambda.real() > rep.lambda_real_leading->real()) rep.lambda_real_leading = r.lambda;
        } else if (!rep.lambda_complex_leading || r.lambda.real() > rep.lambda_complex_leading->real()) {
            rep.lambda_complex_leading = r.lambda;
        }
    }
    rep.insufficient_region = !rep.lambda_real_leading || !rep.lambda_complex_leading;
    if (!rep.insufficient_region) rep.three_dl_flag = rep.lambda_complex_leading->real() > rep.lambda_real_leading->real();
    return rep;
}

inline LeadingOrderReport leading_order_report(const CharacteristicContext& c, const SearchRegion& r = {}) {
    return leading_order_report(find_roots(c, r));
}

}  // namespace operon
