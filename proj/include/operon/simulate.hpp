#pragma once
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "errors.hpp"
#include "model.hpp"
#include "threshold_delay.hpp"

namespace operon {

struct History {
    std::function<StateVector(double)> f;
    double t0 = 0;
    std::optional<StateVector> constant;
    std::vector<double> breakpoints;
};

inline History constant_history(const StateVector& x, double t0 = 0) {
    return {[x](double) { return x; }, t0, x, {}};
}

inline History function_history(std::function<StateVector(double)> f, double t0 = 0) { return {std::move(f), t0, {}, {}}; }

// (M, I, E, tauM, tauI)
using Aug = std::array<double, 5>;

struct AugmentedState {
    StateVector x;
    double tauM = 0, tauI = 0;

    Aug pack() const { return {x.M, x.I, x.E, tauM, tauI}; }
    static AugmentedState unpack(const Aug& a) { return {{a[0], a[1], a[2]}, a[3], a[4]}; }
};

struct MeshRecord {
    double t = 0;
    Aug y{};
    Aug dy{};
};

// dense solution: initial function for t <= t0, cubic Hermite on the mesh afterwards
class HistorySegment {
public:
    explicit HistorySegment(History h) : initial_(std::move(h)) {}

    const History& initial() const { return initial_; }
    const std::vector<MeshRecord>& records() const { return records_; }
    void append(const MeshRecord& r) {
        if (!records_.empty() && !(r.t > records_.back().t)) throw NumericalError("mesh must be strictly increasing");
        records_.push_back(r);
    }
    double t0() const { return initial_.t0; }
    double t_end() const { return records_.empty() ? initial_.t0 : records_.back().t; }

    double component(double t, int k) const {
        if (t <= initial_.t0 || records_.size() < 2) {
            if (k < 3 && t <= initial_.t0 + 1e-13 * (1 + std::abs(t))) return initial_.f(std::min(t, initial_.t0))[k];
            if (records_.empty()) throw HorizonError("no solution recorded yet");
            if (t <= records_.front().t) return records_.front().y[k];
        }
        if (t > records_.back().t) {
            if (t > records_.back().t + 1e-12 * (1 + std::abs(t))) throw HorizonError("lookup beyond the computed solution");
            return records_.back().y[k];
        }
        auto it = std::upper_bound(records_.begin(), records_.end(), t, [](double v, const MeshRecord& r) { return v < r.t; });
        if (it == records_.begin()) return records_.front().y[k];
        if (it == records_.end()) return records_.back().y[k];
        return hermite(*(it - 1), *it, t, k);
    }

    StateVector state(double t) const { return {component(t, 0), component(t, 1), component(t, 2)}; }
    Aug augmented(double t) const {
        Aug a;
        for (int k = 0; k < 5; ++k) a[k] = component(t, k);
        return a;
    }

    static double hermite(const MeshRecord& a, const MeshRecord& b, double t, int k) {
        double h = b.t - a.t, s = (t - a.t) / h;
        double s1 = s - 1;
        double h00 = (1 + 2 * s) * s1 * s1, h10 = s * s1 * s1, h01 = s * s * (3 - 2 * s), h11 = s * s * s1;
        return h00 * a.y[k] + h10 * h * a.dy[k] + h01 * b.y[k] + h11 * h * b.dy[k];
    }

private:
    History initial_;
    std::vector<MeshRecord> records_;
};

struct SimOptions {
    double atol = 1e-9, rtol = 1e-7;
    double delay_rtol = 1e-9;  // on the tau components, which carry the threshold defect
    double h_max = 0;  // 0: cap_fraction of the smallest admissible delay
    double cap_fraction = 1.0 / 16;
    int checkpoints = 100;
    double defect_tol = 1e-5;
    long max_steps = 50'000'000;
};

struct DefectReport {
    double max_M = 0, max_I = 0;
    int checkpoints = 0;
    double max() const { return std::max(max_M, max_I); }
};

struct SimulationResult {
    HistorySegment trajectory;
    DefectReport defect;
    long steps = 0, rejected = 0;
    bool defect_ok() const { return defect.max() <= tolerance; }
    double tolerance = 1e-5;
};

inline std::pair<double, double> initial_delay(const OperonParameters& p, const History& h) {
    StateVector x0 = h.f(h.t0);
    double tauM, tauI;
    if (!state_dependent_M(p)) tauM = p.aM / p.vM_min;
    else if (h.constant) tauM = p.aM / velocity_vM(p, h.constant->E);
    else tauM = delay_exact(threshold_M(p), [&](double t) { return h.f(t).E; }, h.t0, std::numeric_limits<double>::infinity(), h.breakpoints);
    if (!state_dependent_I(p)) tauI = p.aI / p.vI_min;
    else if (h.constant) tauI = p.aI / velocity_vI(p, h.constant->M);
    else tauI = delay_exact(threshold_I(p), [&](double t) { return h.f(t).M; }, h.t0, std::numeric_limits<double>::infinity(), h.breakpoints);
    (void)x0;
    return {tauM, tauI};
}

namespace detail {

inline Aug augmented_rhs(const OperonParameters& p, const HistorySegment& traj, double t, const Aug& y) {
    StateVector now{y[0], y[1], y[2]};
    if (!(now.M >= 0 && now.I >= 0 && now.E >= 0)) throw EvaluationError("negative concentration");
    double Ed = traj.component(t - y[3], 2);
    double Md = traj.component(t - y[4], 0);
    if (!(Ed >= 0)) Ed = 0;
    if (!(Md >= 0)) Md = 0;
    auto dx = rhs(p, now, {y[3], y[4], Ed, Md});
    double rM = state_dependent_M(p) ? delay_rate(velocity_vM(p, now.E), velocity_vM(p, Ed)) : 0.0;
    double rI = state_dependent_I(p) ? delay_rate(velocity_vI(p, now.M), velocity_vI(p, Md)) : 0.0;
    return {dx.M, dx.I, dx.E, rM, rI};
}

struct DP5 {
    static constexpr double c2 = 1. / 5, c3 = 3. / 10, c4 = 4. / 5, c5 = 8. / 9;
    static constexpr double a21 = 1. / 5;
    static constexpr double a31 = 3. / 40, a32 = 9. / 40;
    static constexpr double a41 = 44. / 45, a42 = -56. / 15, a43 = 32. / 9;
    static constexpr double a51 = 19372. / 6561, a52 = -25360. / 2187, a53 = 64448. / 6561, a54 = -212. / 729;
    static constexpr double a61 = 9017. / 3168, a62 = -355. / 33, a63 = 46732. / 5247, a64 = 49. / 176,
                            a65 = -5103. / 18656;
    static constexpr double b1 = 35. / 384, b3 = 500. / 1113, b4 = 125. / 192, b5 = -2187. / 6784, b6 = 11. / 84;
    static constexpr double e1 = 71. / 57600, e3 = -71. / 16695, e4 = 71. / 1920, e5 = -17253. / 339200,
                            e6 = 22. / 525, e7 = -1. / 40;
};

struct StepAttempt {
    Aug y{}, err{}, k7{};
};

inline Aug axpy(const Aug& y, double h, std::initializer_list<std::pair<double, const Aug*>> terms) {
    Aug out = y;
    for (int i = 0; i < 5; ++i) {
        double s = 0;
        for (auto& [c, k] : terms) s += c * (*k)[i];
        out[i] += h * s;
    }
    return out;
}

inline StepAttempt dp5_step(const OperonParameters& p, const HistorySegment& traj, double t, const Aug& y,
                            const Aug& k1, double h) {
    using D = DP5;
    Aug k2 = augmented_rhs(p, traj, t + D::c2 * h, axpy(y, h, {{D::a21, &k1}}));
    Aug k3 = augmented_rhs(p, traj, t + D::c3 * h, axpy(y, h, {{D::a31, &k1}, {D::a32, &k2}}));
    Aug k4 = augmented_rhs(p, traj, t + D::c4 * h, axpy(y, h, {{D::a41, &k1}, {D::a42, &k2}, {D::a43, &k3}}));
    Aug k5 = augmented_rhs(p, traj, t + D::c5 * h,
                           axpy(y, h, {{D::a51, &k1}, {D::a52, &k2}, {D::a53, &k3}, {D::a54, &k4}}));
    Aug k6 = augmented_rhs(p, traj, t + h,
                           axpy(y, h, {{D::a61, &k1}, {D::a62, &k2}, {D::a63, &k3}, {D::a64, &k4}, {D::a65, &k5}}));
    StepAttempt out;
    out.y = axpy(y, h, {{D::b1, &k1}, {D::b3, &k3}, {D::b4, &k4}, {D::b5, &k5}, {D::b6, &k6}});
    for (double v : out.y)
        if (!std::isfinite(v)) throw BlowUpError("non-finite state");
    out.k7 = augmented_rhs(p, traj, t + h, out.y);
    for (int i = 0; i < 5; ++i)
        out.err[i] = h * (D::e1 * k1[i] + D::e3 * k3[i] + D::e4 * k4[i] + D::e5 * k5[i] + D::e6 * k6[i] + D::e7 * out.k7[i]);
    return out;
}

inline double min_delay(const OperonParameters& p) { return std::min(p.aM / p.vM_max, p.aI / p.vI_max); }

inline void start_trajectory(const OperonParameters& p, HistorySegment& traj) {
    const auto& h = traj.initial();
    auto [tauM, tauI] = initial_delay(p, h);
    StateVector x0 = h.f(h.t0);
    if (!(x0.M > 0 && x0.I > 0 && x0.E > 0)) throw ValidationError("initial state must be strictly positive");
    Aug y{x0.M, x0.I, x0.E, tauM, tauI};
    traj.append({h.t0, y, augmented_rhs(p, traj, h.t0, y)});
}

}  // namespace detail

// one explicit fifth-order step of size dt appended to the trajectory
inline AugmentedState step(const OperonParameters& p, HistorySegment& traj, const AugmentedState& a, double dt) {
    if (!(dt > 0)) throw ValidationError("dt must be > 0");
    if (traj.records().empty()) detail::start_trajectory(p, traj);
    const auto& last = traj.records().back();
    Aug y = a.pack();
    Aug k1 = detail::augmented_rhs(p, traj, last.t, y);
    if (dt > 0.25 * std::min(y[3], y[4]) + 1e-15) throw HorizonError("dt exceeds a quarter of the current delay");
    auto r = detail::dp5_step(p, traj, last.t, y, k1, dt);
    traj.append({last.t + dt, r.y, r.k7});
    return AugmentedState::unpack(r.y);
}

namespace detail {

inline double window_integral(const HistorySegment& traj, const std::function<double(double)>& v, int k, double lo,
                              double hi) {
    double total = 0;
    double t0 = traj.t0();
    if (lo < t0) {
        double top = std::min(hi, t0);
        auto f = [&](double s) { return v(std::max(traj.initial().f(s)[k], 0.0)); };
        using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
        const auto& br = traj.initial().breakpoints;
        double a = lo;
        for (auto it = std::upper_bound(br.begin(), br.end(), lo); it != br.end() && *it < top; ++it) {
            total += boost::math::quadrature::gauss<double, 10>::integrate(f, a, *it);
            a = *it;
        }
        total += br.empty() ? GK::integrate(f, a, top, 15, 1e-12)
                            : boost::math::quadrature::gauss<double, 10>::integrate(f, a, top);
        lo = top;
    }
    if (hi <= lo) return total;
    const auto& rec = traj.records();
    auto it = std::upper_bound(rec.begin(), rec.end(), lo, [](double x, const MeshRecord& r) { return x < r.t; });
    std::size_t i = it == rec.begin() ? 0 : std::size_t(it - rec.begin() - 1);
    for (; i + 1 < rec.size() && rec[i].t < hi; ++i) {
        double a = std::max(lo, rec[i].t), b = std::min(hi, rec[i + 1].t);
        if (b <= a) continue;
        auto f = [&](double s) { return v(std::max(HistorySegment::hermite(rec[i], rec[i + 1], s, k), 0.0)); };
        total += boost::math::quadrature::gauss<double, 7>::integrate(f, a, b);
    }
    return total;
}

}  // namespace detail

// |int_{t - tau(t)}^{t} v ds - a| at evenly spaced checkpoints
inline DefectReport threshold_defect(const OperonParameters& p, const HistorySegment& traj, int checkpoints = 100) {
    DefectReport rep;
    rep.checkpoints = std::max(checkpoints, 1);
    double t0 = traj.t0(), t1 = traj.t_end();
    if (!(t1 > t0)) return rep;
    auto vM = [&](double E) { return velocity_vM(p, E); };
    auto vI = [&](double M) { return velocity_vI(p, M); };
    for (int c = 1; c <= rep.checkpoints; ++c) {
        double t = t0 + (t1 - t0) * c / rep.checkpoints;
        if (state_dependent_M(p)) {
            double tau = traj.component(t, 3);
            rep.max_M = std::max(rep.max_M, std::abs(detail::window_integral(traj, vM, 2, t - tau, t) - p.aM));
        }
        if (state_dependent_I(p)) {
            double tau = traj.component(t, 4);
            rep.max_I = std::max(rep.max_I, std::abs(detail::window_integral(traj, vI, 0, t - tau, t) - p.aI));
        }
    }
    return rep;
}

inline SimulationResult simulate(const OperonParameters& p, const History& history, double t_end,
                                 const SimOptions& opt = {}) {
    validate(p, Validation::Strict);
    if (!(t_end > history.t0)) throw ValidationError("t_end must exceed the history end time");
    if (!(opt.atol > 0 && opt.rtol > 0 && opt.delay_rtol > 0 && opt.defect_tol > 0)) throw ValidationError("tolerances must be positive");
    SimulationResult res{HistorySegment(history), {}, 0, 0};
    res.tolerance = opt.defect_tol;
    auto& traj = res.trajectory;
    detail::start_trajectory(p, traj);
    if (!(opt.cap_fraction > 0 && opt.cap_fraction <= 0.25)) throw ValidationError("cap_fraction must lie in (0, 1/4]");
    double cap = opt.cap_fraction * detail::min_delay(p);
    if (opt.h_max > 0) cap = std::min(opt.h_max, 0.25 * detail::min_delay(p));
    double t = history.t0;
    Aug y = traj.records().back().y, k1 = traj.records().back().dy;
    double h = 1e-3 * cap;
    long accepted = 0;
    while (t < t_end) {
        if (res.steps + res.rejected > opt.max_steps) throw NumericalError("step budget exhausted");
        double hcap = accepted < 10 ? 1e-3 * cap : cap;
        h = std::min({h, hcap, t_end - t});
        bool last = t + h >= t_end;
        if (h < 1e-14 * (1 + std::abs(t))) throw NumericalError("step size underflow at t = " + std::to_string(t));
        detail::StepAttempt r;
        bool ok = true;
        try {
            r = detail::dp5_step(p, traj, t, y, k1, h);
        } catch (const EvaluationError&) {
            ok = false;
        }
        double err = 0;
        if (ok) {
            for (int i = 0; i < 5; ++i) {
                double sc = opt.atol + (i < 3 ? opt.rtol : opt.delay_rtol) * std::max(std::abs(y[i]), std::abs(r.y[i]));
                err = std::max(err, std::abs(r.err[i]) / sc);
            }
            ok = err <= 1 && r.y[0] > 0 && r.y[1] > 0 && r.y[2] > 0;
        }
        if (!ok) {
            ++res.rejected;
            h *= err > 1 ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.25;
            continue;
        }
        t = last ? t_end : t + h;
        y = r.y;
        k1 = r.k7;
        traj.append({t, y, k1});
        ++res.steps;
        ++accepted;
        h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-10), -0.2)));
    }
    res.defect = threshold_defect(p, traj, std::max(100, opt.checkpoints));
    return res;
}

// the last `horizon` time units of a trajectory, re-based so that its end is t = 0
inline History tail_history(const HistorySegment& traj, double horizon) {
    const auto& rec = traj.records();
    if (rec.size() < 2) throw ValidationError("trajectory too short to serve as history");
    double te = traj.t_end();
    auto it = std::upper_bound(rec.begin(), rec.end(), te - horizon, [](double x, const MeshRecord& r) { return x < r.t; });
    if (it != rec.begin()) --it;
    auto window = std::make_shared<std::vector<MeshRecord>>(it, rec.end());
    for (auto& r : *window) r.t -= te;
    History h = function_history(
        [window](double s) {
            const auto& w = *window;
            if (s <= w.front().t) return StateVector{w.front().y[0], w.front().y[1], w.front().y[2]};
            if (s >= w.back().t) return StateVector{w.back().y[0], w.back().y[1], w.back().y[2]};
            auto j = std::upper_bound(w.begin(), w.end(), s, [](double x, const MeshRecord& r) { return x < r.t; });
            const auto& a = *(j - 1);
            const auto& b = *j;
            return StateVector{HistorySegment::hermite(a, b, s, 0), HistorySegment::hermite(a, b, s, 1),
                               HistorySegment::hermite(a, b, s, 2)};
        },
        0.0);
    for (auto& r : *window) h.breakpoints.push_back(r.t);
    return h;
}

inline double max_delay(const OperonParameters& p) { return std::max(p.aM / p.vM_min, p.aI / p.vI_min); }

// ---------------------------------------------------------------- orbits

struct Section {
    int component = 2;
    double level = std::numeric_limits<double>::quiet_NaN();  // NaN: time average after the transient
    int direction = +1;
};

struct OrbitDescriptor {
    double period = 0;
    std::array<double, 3> amp_max{}, amp_min{};
    double one_norm = 0;
    std::string stability = "stable-observed";
    double return_error = 0;
    int crossings = 0;
};

enum class OrbitStatus { Periodic, NotPeriodic, NotConverged };

struct OrbitResult {
    OrbitStatus status = OrbitStatus::NotPeriodic;
    OrbitDescriptor orbit;
    std::vector<double> crossing_times;
};

struct OrbitOptions {
    double tol = 1e-6;
    int returns = 3;
    double min_amplitude = 1e-6;
    double amplitude_drift = 1e-3;  // relative change of the section range between the last two periods
};

namespace detail {

inline double segment_integral(const HistorySegment& traj, int k, double a, double b) {
    return window_integral(traj, [](double x) { return x; }, k, a, b);
}

// per-component (min, max) of the dense solution on [a, b]
inline std::pair<std::array<double, 3>, std::array<double, 3>> range_over(const HistorySegment& traj, double a,
                                                                          double b) {
    std::array<double, 3> lo, hi;
    lo.fill(INFINITY);
    hi.fill(-INFINITY);
    const auto& rec = traj.records();
    auto it = std::upper_bound(rec.begin(), rec.end(), a, [](double x, const MeshRecord& r) { return x < r.t; });
    std::size_t i0 = it == rec.begin() ? 0 : std::size_t(it - rec.begin() - 1);
    for (std::size_t i = i0; i + 1 < rec.size() && rec[i].t < b; ++i)
        for (int s = 0; s <= 8; ++s) {
            double t = std::clamp(rec[i].t + (rec[i + 1].t - rec[i].t) * s / 8, a, b);
            for (int q = 0; q < 3; ++q) {
                double v = HistorySegment::hermite(rec[i], rec[i + 1], t, q);
                hi[q] = std::max(hi[q], v);
                lo[q] = std::min(lo[q], v);
            }
        }
    return {lo, hi};
}

inline double crossing_time(const MeshRecord& a, const MeshRecord& b, int k, double level) {
    double lo = a.t, hi = b.t;
    double flo = a.y[k] - level;
    for (int it = 0; it < 100 && hi - lo > 1e-15 * (1 + std::abs(hi)); ++it) {
        double m = 0.5 * (lo + hi);
        double fm = HistorySegment::hermite(a, b, m, k) - level;
        if ((fm > 0) == (flo > 0)) {
            lo = m;
            flo = fm;
        } else {
            hi = m;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

inline OrbitResult extract_orbit(const HistorySegment& traj, const Section& sec, double transient,
                                 const OrbitOptions& opt = {}) {
    OrbitResult out;
    if (sec.component < 0 || sec.component > 2 || (sec.direction != 1 && sec.direction != -1))
        throw ValidationError("section needs component in {0,1,2} and direction +-1");
    double t_start = traj.t0() + transient, t_end = traj.t_end();
    if (!(t_end > t_start)) throw ValidationError("transient exceeds the trajectory length");
    const auto& rec = traj.records();
    int k = sec.component;
    double level = sec.level;
    if (std::isnan(level)) level = detail::segment_integral(traj, k, t_start, t_end) / (t_end - t_start);
    for (std::size_t i = 0; i + 1 < rec.size(); ++i) {
        if (rec[i].t < t_start) continue;
        double fa = (rec[i].y[k] - level) * sec.direction, fb = (rec[i + 1].y[k] - level) * sec.direction;
        if (fa < 0 && fb >= 0) out.crossing_times.push_back(detail::crossing_time(rec[i], rec[i + 1], k, level));
    }
    auto& c = out.crossing_times;
    out.orbit.crossings = static_cast<int>(c.size());
    if (c.size() < 2) return out;
    double a = c[c.size() - 2], b = c.back();
    auto& o = out.orbit;
    o.period = b - a;
    std::tie(o.amp_min, o.amp_max) = detail::range_over(traj, a, b);
    o.one_norm = detail::segment_integral(traj, 2, a, b) / (b - a);
    if (o.amp_max[k] - o.amp_min[k] < opt.min_amplitude) return out;
    if (static_cast<int>(c.size()) < std::max(opt.returns + 1, 3)) {
        out.status = OrbitStatus::NotConverged;
        return out;
    }
    auto [lo_prev, hi_prev] = detail::range_over(traj, c[c.size() - 3], a);
    double drift = std::abs((hi_prev[k] - lo_prev[k]) - (o.amp_max[k] - o.amp_min[k]));
    if (drift > opt.amplitude_drift * (o.amp_max[k] - o.amp_min[k])) {
        out.status = OrbitStatus::NotConverged;
        return out;
    }
    double worst = 0, period_sum = 0;
    for (std::size_t j = c.size() - opt.returns; j < c.size(); ++j) {
        Aug x0 = traj.augmented(c[j - 1]), x1 = traj.augmented(c[j]);
        for (int q = 0; q < 5; ++q) worst = std::max(worst, std::abs(x1[q] - x0[q]) / (1 + std::abs(x0[q])));
        period_sum += c[j] - c[j - 1];
    }
    o.return_error = worst;
    o.period = period_sum / opt.returns;
    out.status = worst <= opt.tol ? OrbitStatus::Periodic : OrbitStatus::NotConverged;
    return out;
}

struct SweepOptions {
    Section section;
    OrbitOptions orbit;
    SimOptions sim;
    double periods_per_chunk = 40;
    int max_chunks = 6;
    double min_chunk = 200;
};

struct SweepPoint {
    double value = 0;
    OrbitDescriptor orbit;
};

struct OrbitSweep {
    std::vector<SweepPoint> points;
    bool lost = false;
    double lost_lo = 0, lost_hi = 0;  // last success, first failure
    double max_defect = 0;             // over every chunk simulated
};

namespace detail {

// simulate in chunks from a history until the orbit converges
inline std::optional<std::pair<OrbitDescriptor, HistorySegment>> settle_orbit(const OperonParameters& p,
                                                                             History h, double period_guess,
                                                                             const SweepOptions& opt,
                                                                             double* max_defect = nullptr) {
    for (int chunk = 0; chunk < opt.max_chunks; ++chunk) {
        double len = std::max(opt.min_chunk, opt.periods_per_chunk * period_guess);
        auto res = simulate(p, h, h.t0 + len, opt.sim);
        if (max_defect) *max_defect = std::max(*max_defect, res.defect.max());
        auto r = extract_orbit(res.trajectory, opt.section, 0.5 * len, opt.orbit);
        if (r.status == OrbitStatus::NotPeriodic && chunk > 0) return std::nullopt;
        if (r.status == OrbitStatus::Periodic) return std::pair{r.orbit, std::move(res.trajectory)};
        if (r.orbit.period > 0) period_guess = r.orbit.period;
        h = tail_history(res.trajectory, 1.5 * max_delay(p));
    }
    return std::nullopt;
}

}  // namespace detail

inline OrbitSweep continue_orbit(const OperonParameters& params, const HistorySegment& seed, double seed_period,
                                 const std::string& param_name, const std::vector<double>& values,
                                 const SweepOptions& opt = {}) {
    OrbitSweep sweep;
    HistorySegment current = seed;
    double period = seed_period;
    double last_ok = parameter(params, param_name);
    auto attempt = [&](double v) {
        auto p = with_parameter(params, param_name, v);
        try {
            return detail::settle_orbit(p, tail_history(current, 1.5 * max_delay(p)), period, opt, &sweep.max_defect);
        } catch (const Error&) {
            return std::optional<std::pair<OrbitDescriptor, HistorySegment>>{};
        }
    };
    for (double v : values) {
        auto r = attempt(v);
        if (!r) {
            double half = 0.5 * (last_ok + v);
            auto r2 = attempt(half);
            if (!r2) {
                sweep.lost = true;
                sweep.lost_lo = last_ok;
                sweep.lost_hi = half;
                return sweep;
            }
            sweep.points.push_back({half, r2->first});
            period = r2->first.period;
            current = std::move(r2->second);
            last_ok = half;
            r = attempt(v);
            if (!r) {
                sweep.lost = true;
                sweep.lost_lo = last_ok;
                sweep.lost_hi = v;
                return sweep;
            }
        }
        sweep.points.push_back({v, r->first});
        period = r->first.period;
        current = std::move(r->second);
        last_ok = v;
    }
    return sweep;
}

}  // namespace operon
