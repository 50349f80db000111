#pragma once
#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace operon {

enum class OperonKind { Repressible, Inducible };

enum class Validation { Strict, Relaxed };

struct OperonParameters {
    OperonKind kind = OperonKind::Repressible;
    double mu = 0.05;
    double beta_M = 1.4, beta_I = 1.0, beta_E = 1.0;
    double gbar_M = 1.0, gbar_I = 1.0, gbar_E = 1.0;
    double K = 2.0, K1 = 1.0, n = 5.0;
    double m = 3.0, E50 = 1.0;
    double vM_min = 0.01, vM_max = 2.0;
    double mI = 20.0, M50 = 1.0;
    double vI_min = 1.0, vI_max = 1.0;
    double aM = 1.0, aI = 1.0;
};

struct StateVector {
    double M = 0, I = 0, E = 0;

    StateVector& operator+=(const StateVector& o) { M += o.M; I += o.I; E += o.E; return *this; }
    friend StateVector operator+(StateVector a, const StateVector& b) { return a += b; }
    friend StateVector operator-(const StateVector& a, const StateVector& b) { return {a.M - b.M, a.I - b.I, a.E - b.E}; }
    friend StateVector operator*(double s, const StateVector& a) { return {s * a.M, s * a.I, s * a.E}; }
    double operator[](int k) const { return k == 0 ? M : (k == 1 ? I : E); }
    double& operator[](int k) { return k == 0 ? M : (k == 1 ? I : E); }
};

struct DelayedArguments {
    double tauM = 0, tauI = 0;
    double E_delayed = 0, M_delayed = 0;
};

inline constexpr std::array<std::string_view, 20> numeric_parameter_names = {
    "mu", "beta_M", "beta_I", "beta_E", "gbar_M", "gbar_I", "gbar_E", "K", "K1", "n",
    "m", "E50", "vM_min", "vM_max", "mI", "M50", "vI_min", "vI_max", "aM", "aI"};

inline double& parameter(OperonParameters& p, std::string_view name) {
    if (name == "mu") return p.mu;
    if (name == "beta_M") return p.beta_M;
    if (name == "beta_I") return p.beta_I;
    if (name == "beta_E") return p.beta_E;
    if (name == "gbar_M") return p.gbar_M;
    if (name == "gbar_I") return p.gbar_I;
    if (name == "gbar_E") return p.gbar_E;
    if (name == "K") return p.K;
    if (name == "K1") return p.K1;
    if (name == "n") return p.n;
    if (name == "m") return p.m;
    if (name == "E50") return p.E50;
    if (name == "vM_min") return p.vM_min;
    if (name == "vM_max") return p.vM_max;
    if (name == "mI") return p.mI;
    if (name == "M50") return p.M50;
    if (name == "vI_min") return p.vI_min;
    if (name == "vI_max") return p.vI_max;
    if (name == "aM") return p.aM;
    if (name == "aI") return p.aI;
    throw ValidationError("unknown parameter '" + std::string(name) + "'");
}

inline double parameter(const OperonParameters& p, std::string_view name) {
    return parameter(const_cast<OperonParameters&>(p), name);
}

inline OperonParameters with_parameter(OperonParameters p, std::string_view name, double value) {
    parameter(p, name) = value;
    return p;
}

inline bool state_dependent_M(const OperonParameters& p) { return p.vM_min != p.vM_max; }
inline bool state_dependent_I(const OperonParameters& p) { return p.vI_min != p.vI_max; }

namespace detail {

inline void require(bool ok, const char* field, const char* what) {
    if (!ok) throw ValidationError(std::string(field) + ": " + what);
}

}  // namespace detail

inline void validate(const OperonParameters& p, Validation mode = Validation::Strict) {
    using detail::require;
    for (auto name : numeric_parameter_names) {
        double v = parameter(p, name);
        require(std::isfinite(v), std::string(name).c_str(), "must be finite");
    }
    require(p.mu >= 0, "mu", "must be >= 0");
    require(p.beta_M > 0, "beta_M", "must be > 0");
    require(p.beta_I > 0, "beta_I", "must be > 0");
    require(p.beta_E > 0, "beta_E", "must be > 0");
    require(p.gbar_M > 0, "gbar_M", "must be > 0");
    require(p.gbar_I > 0, "gbar_I", "must be > 0");
    require(p.gbar_E > 0, "gbar_E", "must be > 0");
    require(p.K1 >= 0, "K1", "must be >= 0");
    require(p.n > 1, "n", "must be > 1");
    require(p.m > 0, "m", "must be > 0");
    require(p.E50 > 0, "E50", "must be > 0");
    require(p.mI > 0, "mI", "must be > 0");
    require(p.M50 > 0, "M50", "must be > 0");
    require(p.aM > 0, "aM", "must be > 0");
    require(p.aI > 0, "aI", "must be > 0");
    if (p.kind == OperonKind::Repressible)
        require(p.K > p.K1, "K", "repressible operon needs K > K1");
    else
        require(p.K > 1, "K", "inducible operon needs K > 1");
    require(p.vI_min > 0, "vI_min", "must be > 0");
    require(p.vI_min <= p.vI_max, "vI_max", "must be >= vI_min");
    require(p.vM_max > 0, "vM_max", "must be > 0");
    if (mode == Validation::Strict) {
        require(p.vM_min > 0, "vM_min", "must be > 0 (strict mode)");
        require(p.vM_min <= p.vM_max, "vM_max", "must be >= vM_min (strict mode)");
    }
}

namespace detail {

// x^m / (x50^m + x^m) evaluated in log space
inline double hill(double x, double x50, double m) {
    if (x <= 0) return 0.0;
    double z = m * (std::log(x) - std::log(x50));
    if (z > 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

inline double hill_prime(double x, double x50, double m) {
    if (x <= 0) {
        if (m == 1) return 1.0 / x50;
        return m < 1 ? INFINITY : 0.0;
    }
    double s = hill(x, x50, m);
    return m * s * (1.0 - s) / x;
}

inline void check_argument(double x, const char* what) {
    if (!std::isfinite(x)) throw DomainError(std::string(what) + " must be finite");
    if (x < 0) throw DomainError(std::string(what) + " must be >= 0");
}

// f = (1 + K1 u) / (A + B u), u = E^n
inline void fraction_coefficients(const OperonParameters& p, double& A, double& B) {
    if (p.kind == OperonKind::Repressible) {
        A = 1.0;
        B = p.K;
    } else {
        A = p.K;
        B = p.K1;
    }
}

}  // namespace detail

inline double fraction_f(const OperonParameters& p, double E) {
    detail::check_argument(E, "E");
    double A, B;
    detail::fraction_coefficients(p, A, B);
    if (E == 0) return 1.0 / A;
    double lu = p.n * std::log(E);
    if (lu > 0) {
        double w = std::exp(-lu);
        return (w + p.K1) / (A * w + B);
    }
    double u = std::exp(lu);
    return (1.0 + p.K1 * u) / (A + B * u);
}

inline double fraction_f_prime(const OperonParameters& p, double E) {
    detail::check_argument(E, "E");
    if (E == 0) return 0.0;
    double A, B;
    detail::fraction_coefficients(p, A, B);
    double lu = p.n * std::log(E);
    double r = std::exp(-0.5 * lu), q = std::exp(0.5 * lu);
    double d = A * r + B * q;
    return (p.K1 * A - B) * p.n / (E * d * d);
}

inline double velocity_vM(const OperonParameters& p, double E) {
    detail::check_argument(E, "E");
    double s = detail::hill(E, p.E50, p.m);
    if (p.kind == OperonKind::Repressible) return p.vM_min + (p.vM_max - p.vM_min) * s;
    return p.vM_max + (p.vM_min - p.vM_max) * s;
}

inline double velocity_vM_prime(const OperonParameters& p, double E) {
    detail::check_argument(E, "E");
    if (p.vM_min == p.vM_max) return 0.0;
    double ds = detail::hill_prime(E, p.E50, p.m);
    if (p.kind == OperonKind::Repressible) return (p.vM_max - p.vM_min) * ds;
    return (p.vM_min - p.vM_max) * ds;
}

inline double velocity_vI(const OperonParameters& p, double M) {
    detail::check_argument(M, "M");
    return p.vI_max + (p.vI_min - p.vI_max) * detail::hill(M, p.M50, p.mI);
}

inline double velocity_vI_prime(const OperonParameters& p, double M) {
    detail::check_argument(M, "M");
    if (p.vI_min == p.vI_max) return 0.0;
    return (p.vI_min - p.vI_max) * detail::hill_prime(M, p.M50, p.mI);
}

inline StateVector rhs(const OperonParameters& p, const StateVector& now, const DelayedArguments& d) {
    double vm_now = velocity_vM(p, now.E), vm_del = velocity_vM(p, d.E_delayed);
    double vi_now = velocity_vI(p, now.M), vi_del = velocity_vI(p, d.M_delayed);
    if (vm_now <= 0 || vm_del <= 0 || vi_now <= 0 || vi_del <= 0)
        throw EvaluationError("velocity evaluated <= 0 in rhs");
    double ratio_M = state_dependent_M(p) ? vm_now / vm_del : 1.0;
    double ratio_I = state_dependent_I(p) ? vi_now / vi_del : 1.0;
    StateVector dx;
    dx.M = p.beta_M * std::exp(-p.mu * d.tauM) * ratio_M * fraction_f(p, d.E_delayed) - p.gbar_M * now.M;
    dx.I = p.beta_I * std::exp(-p.mu * d.tauI) * ratio_I * d.M_delayed - p.gbar_I * now.I;
    dx.E = p.beta_E * now.I - p.gbar_E * now.E;
    return dx;
}

}  // namespace operon
