#pragma once
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "model.hpp"

namespace operon {

struct SteadyState {
    double M_star = 0, I_star = 0, E_star = 0;
    double tauM_star = 0, tauI_star = 0;
    double gE_slope = 0;
    std::optional<int> unstable_count;
    bool tangency = false;
};

struct DissipativityBounds {
    double d_lo[3] = {0, 0, 0};
    double d_hi[3] = {0, 0, 0};
    double box_lo[3] = {0, 0, 0};
    double box_hi[3] = {0, 0, 0};

    bool contains(const StateVector& x, double inflate = 0) const {
        for (int k = 0; k < 3; ++k)
            if (x[k] < box_lo[k] - inflate || x[k] > box_hi[k] + inflate) return false;
        return true;
    }
    double diameter() const {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += (box_hi[k] - box_lo[k]) * (box_hi[k] - box_lo[k]);
        return std::sqrt(s);
    }
};

struct Census {
    int count = 0;
    int chi_I = 0;
    int n_tau = 0;
    int bound = 1;
};

inline double loop_gain(const OperonParameters& p) {
    return p.beta_M * p.beta_I * p.beta_E / (p.gbar_M * p.gbar_I * p.gbar_E);
}

// everything on the scalar reduction at one value of E
struct ReductionTerms {
    double E = 0, f = 0, fp = 0;
    double vM = 0, vMp = 0, tauM = 0, M = 0;
    double vI = 0, vIp = 0, tauI = 0, I = 0;
    double g = 0, slope = 0;
};

inline ReductionTerms reduction_terms(const OperonParameters& p, double E) {
    ReductionTerms r;
    r.E = E;
    r.f = fraction_f(p, E);
    r.fp = fraction_f_prime(p, E);
    r.vM = velocity_vM(p, E);
    if (!(r.vM > 0)) throw EvaluationError("v_M(E) <= 0 at E = " + std::to_string(E));
    r.vMp = velocity_vM_prime(p, E);
    r.tauM = p.aM / r.vM;
    r.M = p.beta_M / p.gbar_M * std::exp(-p.mu * r.tauM) * r.f;
    r.vI = velocity_vI(p, r.M);
    r.vIp = velocity_vI_prime(p, r.M);
    r.tauI = p.aI / r.vI;
    r.I = p.beta_I / p.gbar_I * std::exp(-p.mu * r.tauI) * r.M;
    double C = loop_gain(p);
    double e = std::exp(-p.mu * (r.tauI + r.tauM));
    r.g = C * e * r.f - E;
    double inner = r.fp + r.f * p.mu * r.tauM * r.vMp / r.vM;
    double outer = 1.0 + p.mu * r.tauI * (r.vIp / r.vI) * r.M;
    r.slope = C * e * inner * outer - 1.0;
    return r;
}

inline double m_star_of_E(const OperonParameters& p, double E) { return reduction_terms(p, E).M; }
inline double g_E(const OperonParameters& p, double E) { return reduction_terms(p, E).g; }
inline double g_E_slope(const OperonParameters& p, double E) { return reduction_terms(p, E).slope; }

inline SteadyState make_steady_state(const OperonParameters& p, double E) {
    auto r = reduction_terms(p, E);
    SteadyState s;
    s.E_star = E;
    s.M_star = r.M;
    s.I_star = r.I;
    s.tauM_star = r.tauM;
    s.tauI_star = r.tauI;
    s.gE_slope = r.slope;
    return s;
}

namespace detail {

inline double polish_root(const OperonParameters& p, double a, double b, double ga) {
    for (int it = 0; it < 200 && b - a > 1e-12 * (1 + a); ++it) {
        double c = 0.5 * (a + b);
        double gc = g_E(p, c);
        if (gc == 0) return c;
        if ((gc > 0) == (ga > 0)) {
            a = c;
            ga = gc;
        } else {
            b = c;
        }
    }
    double E = 0.5 * (a + b);
    for (int it = 0; it < 3; ++it) {
        auto r = reduction_terms(p, E);
        if (r.slope == 0) break;
        double En = E - r.g / r.slope;
        if (!(En >= a && En <= b) || std::abs(g_E(p, En)) > std::abs(r.g)) break;
        E = En;
    }
    return E;
}

// golden-section minimum of |g| on [a, b]
inline double tangency_point(const OperonParameters& p, double a, double b) {
    const double r = 0.5 * (std::sqrt(5.0) - 1);
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = std::abs(g_E(p, c)), fd = std::abs(g_E(p, d));
    for (int it = 0; it < 200 && b - a > 1e-14 * (1 + b); ++it) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - r * (b - a); fc = std::abs(g_E(p, c));
        } else {
            a = c; c = d; fc = fd;
            d = a + r * (b - a); fd = std::abs(g_E(p, d));
        }
    }
    return 0.5 * (a + b);
}

inline std::vector<SteadyState> scan_steady_states(const OperonParameters& p, double E_max, int resolution) {
    std::vector<double> Es(resolution + 1), gs(resolution + 1);
    for (int i = 0; i <= resolution; ++i) {
        Es[i] = E_max * i / resolution;
        try {
            gs[i] = g_E(p, Es[i]);
        } catch (const EvaluationError&) {
            gs[i] = NAN;
        }
    }
    std::vector<SteadyState> out;
    for (int i = 0; i < resolution; ++i) {
        double ga = gs[i], gb = gs[i + 1];
        if (std::isnan(ga) || std::isnan(gb)) continue;
        if (ga == 0) {
            out.push_back(make_steady_state(p, Es[i]));
            continue;
        }
        if ((ga > 0) != (gb > 0) && gb != 0) out.push_back(make_steady_state(p, polish_root(p, Es[i], Es[i + 1], ga)));
    }
    for (int i = 1; i < resolution; ++i) {
        double a = std::abs(gs[i - 1]), c = std::abs(gs[i]), b = std::abs(gs[i + 1]);
        if (std::isnan(a + b + c)) continue;
        bool same = (gs[i - 1] > 0) == (gs[i] > 0) && (gs[i] > 0) == (gs[i + 1] > 0);
        if (!same || !(c <= a && c <= b)) continue;
        double E = tangency_point(p, Es[i - 1], Es[i + 1]);
        if (std::abs(g_E(p, E)) < 1e-9) {
            auto s = make_steady_state(p, E);
            s.tangency = true;
            out.push_back(s);
        }
    }
    std::sort(out.begin(), out.end(), [](auto& x, auto& y) { return x.E_star < y.E_star; });
    std::vector<SteadyState> merged;
    for (auto& s : out) {
        if (!merged.empty() && std::abs(s.E_star - merged.back().E_star) < 1e-9) {
            merged.back().tangency = merged.back().tangency || s.tangency;
            continue;
        }
        merged.push_back(s);
    }
    return merged;
}

}  // namespace detail

inline std::vector<SteadyState> find_steady_states(const OperonParameters& p, double E_max = 0,
                                                   int resolution = 4096) {
    validate(p, Validation::Relaxed);
    double C = loop_gain(p);
    if (E_max <= 0) E_max = 1.5 * C;
    if (E_max < C) throw ValidationError("E_max must be >= beta_M beta_I beta_E / (gbar_M gbar_I gbar_E)");
    if (resolution < 1000) throw ValidationError("resolution must be >= 1000");
    for (;;) {
        auto roots = detail::scan_steady_states(p, E_max, resolution);
        double cell = E_max / resolution;
        bool crowded = false;
        for (std::size_t i = 1; i < roots.size(); ++i)
            if (roots[i].E_star - roots[i - 1].E_star < 10 * cell) crowded = true;
        if (!crowded || resolution >= (1 << 20)) {
            if (roots.empty()) throw NumericalError("no steady state found");
            return roots;
        }
        resolution *= 2;
    }
}

inline Census steady_state_census(const OperonParameters& p) {
    Census c;
    c.chi_I = p.kind == OperonKind::Inducible ? 1 : 0;
    c.n_tau = (state_dependent_M(p) ? 1 : 0) + (state_dependent_I(p) ? 1 : 0);
    c.bound = 1 + 2 * c.chi_I + 2 * c.n_tau;
    c.count = static_cast<int>(find_steady_states(p).size());
    return c;
}

inline DissipativityBounds dissipativity_bounds(const OperonParameters& p) {
    try {
        validate(p, Validation::Strict);
    } catch (const ValidationError& e) {
        throw ValidationError(std::string("dissipativity bounds need strict parameters: ") + e.what());
    }
    double gmin = p.kind == OperonKind::Repressible ? p.K1 / p.K : 1.0 / p.K;
    DissipativityBounds d;
    d.d_hi[0] = p.beta_M * p.vM_max / p.vM_min;
    d.d_lo[0] = p.beta_M * (p.vM_min / p.vM_max) * std::exp(-p.mu * p.aM / p.vM_min) * gmin;
    d.d_lo[1] = p.beta_I * (p.vI_min / p.vI_max) * std::exp(-p.mu * p.aI / p.vI_min) * d.d_lo[0] / p.gbar_M;
    d.d_hi[1] = p.beta_I * (p.vI_max / p.vI_min) * std::exp(-p.mu * p.aI / p.vI_max) * d.d_hi[0] / p.gbar_M;
    d.d_lo[2] = p.beta_E * d.d_lo[1] / p.gbar_I;
    d.d_hi[2] = p.beta_E * d.d_hi[1] / p.gbar_I;
    double b[3] = {p.gbar_M, p.gbar_I, p.gbar_E};
    for (int k = 0; k < 3; ++k) {
        d.box_lo[k] = d.d_lo[k] / b[k];
        d.box_hi[k] = d.d_hi[k] / b[k];
    }
    return d;
}

}  // namespace operon
