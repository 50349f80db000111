#pragma once
#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "equilibria.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "spectrum.hpp"

namespace operon {

struct BranchPoint {
    double param = 0;
    SteadyState state;
    int unstable_count = -1;
    double tangent_p = 0, tangent_E = 0;
};

enum class EventType { Fold, Hopf };

struct BifurcationEvent {
    EventType type = EventType::Fold;
    double param = 0;
    double E_star = 0;
    double period = 0;  // Hopf only
    int count_before = 0, count_after = 0;
    double position = 0;  // fractional branch index, for ordering
};

struct StepControls {
    double initial = 1e-3, min = 1e-4, max = 5e-2;
    int max_points = 4000;
};

struct ParamRange {
    double lo = 0, hi = 1;
    bool contains(double p) const { return p >= lo && p <= hi; }
};

enum class BranchStatus { RangeBoundary, MaxPoints, Terminated };

struct Branch {
    std::vector<BranchPoint> points;
    BranchStatus status = BranchStatus::RangeBoundary;
};

// one-parameter family g_E(p, E)
class Reduction {
public:
    Reduction(OperonParameters base, std::string name, SpectrumMode mode = SpectrumMode::exact())
        : base_(std::move(base)), name_(std::move(name)), mode_(mode) {
        parameter(base_, name_);
    }

    OperonParameters at(double p) const { return with_parameter(base_, name_, p); }
    const std::string& name() const { return name_; }
    SpectrumMode mode() const { return mode_; }

    double g(double p, double E) const { return operon::g_E(at(p), E); }
    double g_E(double p, double E) const { return operon::g_E_slope(at(p), E); }
    double g_p(double p, double E) const {
        double h = 1e-7 * (1 + std::abs(p));
        return (g(p + h, E) - g(p - h, E)) / (2 * h);
    }

    int count(double p, double E) const { return count_unstable(make_context(at(p), make_steady_state(at(p), E), mode_)); }

    BranchPoint point(double p, double E, double tp = 0, double tE = 0, bool with_count = true) const {
        BranchPoint b;
        b.param = p;
        b.state = make_steady_state(at(p), E);
        b.tangent_p = tp;
        b.tangent_E = tE;
        if (with_count) {
            b.unstable_count = count(p, E);
            b.state.unstable_count = b.unstable_count;
        }
        return b;
    }

    // Newton on {g = 0, (x - x0).t = 0}
    std::optional<std::pair<double, double>> correct(double p, double E, double tp, double tE, int max_iter = 12) const {
        double p0 = p, E0 = E;
        try {
            for (int it = 0; it < max_iter; ++it) {
                double G = g(p, E);
                double c = (p - p0) * tp + (E - E0) * tE;
                double a = g_p(p, E), b = g_E(p, E);
                double det = a * tE - b * tp;
                if (det == 0 || !std::isfinite(det)) return std::nullopt;
                double dp = (G * tE - b * c) / det;
                double dE = (a * c - G * tp) / det;
                p -= dp;
                E -= dE;
                if (!(E > 0) || !std::isfinite(p)) return std::nullopt;
                if (std::abs(dp) + std::abs(dE) < 1e-13 * (1 + std::abs(p) + std::abs(E)) &&
                    std::abs(g(p, E)) < 1e-11 * (1 + loop_gain(at(p))))
                    return std::pair{p, E};
            }
            if (std::abs(g(p, E)) < 1e-10 * (1 + loop_gain(at(p)))) return std::pair{p, E};
        } catch (const Error&) {
        }
        return std::nullopt;
    }

    // E on the branch at fixed p, Newton from a guess
    std::optional<double> solve_E(double p, double E, int max_iter = 30) const {
        try {
            for (int it = 0; it < max_iter; ++it) {
                double G = g(p, E), s = g_E(p, E);
                if (s == 0) return std::nullopt;
                double dE = G / s;
                E -= dE;
                if (!(E > 0)) return std::nullopt;
                if (std::abs(dE) < 1e-14 * (1 + E)) return E;
            }
        } catch (const Error&) {
        }
        return std::nullopt;
    }

private:
    OperonParameters base_;
    std::string name_;
    SpectrumMode mode_;
};

inline Branch trace_branch(const Reduction& red, double p0, double E0, const ParamRange& range, int direction,
                           const StepControls& ctl = {}, bool with_counts = true) {
    Branch br;
    auto tangent = [&](double p, double E, double ref_p, double ref_E) {
        double a = red.g_p(p, E), b = red.g_E(p, E);
        double tp = b, tE = -a, n = std::hypot(tp, tE);
        tp /= n;
        tE /= n;
        if (tp * ref_p + tE * ref_E < 0) {
            tp = -tp;
            tE = -tE;
        }
        return std::pair{tp, tE};
    };
    auto [tp, tE] = tangent(p0, E0, double(direction), 0.0);
    br.points.push_back(red.point(p0, E0, tp, tE, with_counts));
    double ds = ctl.initial;
    int successes = 0;
    double p = p0, E = E0;
    while (static_cast<int>(br.points.size()) < ctl.max_points) {
        std::optional<std::pair<double, double>> next;
        double ntp = 0, ntE = 0;
        while (!next) {
            if (ds < ctl.min) {
                br.status = BranchStatus::Terminated;
                return br;
            }
            auto c = red.correct(p + ds * tp, E + ds * tE, tp, tE);
            if (c) {
                try {
                    std::tie(ntp, ntE) = tangent(c->first, c->second, tp, tE);
                    double chord = std::hypot(c->first - p, c->second - E);
                    if (ntp * tp + ntE * tE < 0.95 || chord > 2 * ds) c.reset();
                } catch (const Error&) {
                    c.reset();
                }
            }
            if (!c) {
                ds *= 0.5;
                successes = 0;
                continue;
            }
            next = c;
        }
        double np = next->first, nE = next->second;
        if (!range.contains(np)) {
            double edge = np > range.hi ? range.hi : range.lo;
            double w = (edge - p) / (np - p);
            if (auto Eb = red.solve_E(edge, E + w * (nE - E))) {
                auto [bp, bE] = tangent(edge, *Eb, tp, tE);
                br.points.push_back(red.point(edge, *Eb, bp, bE, with_counts));
            }
            br.status = BranchStatus::RangeBoundary;
            return br;
        }
        p = np;
        E = nE;
        tp = ntp;
        tE = ntE;
        br.points.push_back(red.point(p, E, tp, tE, with_counts));
        if (++successes >= 4) {
            ds = std::min(ds * 1.3, ctl.max);
            successes = 0;
        }
    }
    br.status = BranchStatus::MaxPoints;
    return br;
}

// both directions from a seed, joined into one ordered branch
inline Branch trace_full_branch(const Reduction& red, double p0, double E0, const ParamRange& range,
                                const StepControls& ctl = {}) {
    auto fwd = trace_branch(red, p0, E0, range, +1, ctl);
    auto bwd = trace_branch(red, p0, E0, range, -1, ctl);
    Branch out;
    for (auto it = bwd.points.rbegin(); it != bwd.points.rend(); ++it) {
        BranchPoint b = *it;
        b.tangent_p = -b.tangent_p;
        b.tangent_E = -b.tangent_E;
        out.points.push_back(b);
    }
    for (std::size_t i = 1; i < fwd.points.size(); ++i) out.points.push_back(fwd.points[i]);
    out.status = fwd.status == BranchStatus::RangeBoundary && bwd.status == BranchStatus::RangeBoundary
                     ? BranchStatus::RangeBoundary
                     : BranchStatus::Terminated;
    return out;
}

namespace detail {

// point on the branch near the chord between two branch points, s in [0, 1]
struct ChordWalker {
    const Reduction& red;
    double p0, E0, p1, E1;

    std::optional<std::pair<double, double>> at(double s) const {
        double dp = p1 - p0, dE = E1 - E0, n = std::hypot(dp, dE);
        return red.correct(p0 + s * dp, E0 + s * dE, dp / n, dE / n, 30);
    }
};

inline std::optional<int> count_at(const Reduction& red, const ChordWalker& w, double s) {
    auto q = w.at(s);
    if (!q) return std::nullopt;
    try {
        return red.count(q->first, q->second);
    } catch (const Error&) {
        return std::nullopt;
    }
}

inline void count_changes(const Reduction& red, const ChordWalker& w, double a, int ca, double b, int cb,
                          double tol, std::vector<std::array<double, 4>>& out, int depth = 0) {
    if (ca == cb) return;
    if (b - a < tol || depth > 60) {
        out.push_back({a, b, double(ca), double(cb)});
        return;
    }
    double m = 0.5 * (a + b);
    auto cm = count_at(red, w, m);
    if (!cm) {
        out.push_back({a, b, double(ca), double(cb)});
        return;
    }
    count_changes(red, w, a, ca, m, *cm, tol, out, depth + 1);
    count_changes(red, w, m, *cm, b, cb, tol, out, depth + 1);
}

inline double slope_at(const Reduction& red, const ChordWalker& w, double s) {
    auto q = w.at(s);
    if (!q) throw NumericalError("branch corrector failed during event refinement");
    return red.g_E(q->first, q->second);
}

// pair closest to the imaginary axis
inline std::optional<cplx> axis_pair(const CharacteristicContext& c) {
    double tsum = c.steady.tauM_star + c.steady.tauI_star;
    double R = unstable_radius(c);
    SearchRegion r;
    r.re_lo = -0.05;
    r.re_hi = 0.05;
    r.im_hi = R;
    r.n_re = 2;
    r.n_im = std::clamp(static_cast<int>(R * tsum / 0.5), 40, 4000);
    std::optional<cplx> best;
    for (auto& root : find_roots(c, r)) {
        if (root.lambda.imag() < 1e-6) continue;
        if (!best || std::abs(root.lambda.real()) < std::abs(best->real())) best = root.lambda;
    }
    return best;
}

// Newton on Delta(i omega) = 0 in (s, omega) along the chord
inline std::optional<std::array<double, 4>> refine_hopf(const Reduction& red, const ChordWalker& w, double s,
                                                        double omega) {
    auto F = [&](double ss, double om) -> std::optional<cplx> {
        auto q = w.at(ss);
        if (!q) return std::nullopt;
        auto p = red.at(q->first);
        return delta(make_context(p, make_steady_state(p, q->second), red.mode()), cplx(0, om));
    };
    for (int it = 0; it < 40; ++it) {
        auto f0 = F(s, omega);
        if (!f0) return std::nullopt;
        double hs = 1e-7, ho = 1e-7 * (1 + omega);
        auto fs1 = F(s + hs, omega), fs0 = F(s - hs, omega);
        auto fo1 = F(s, omega + ho), fo0 = F(s, omega - ho);
        if (!fs1 || !fs0 || !fo1 || !fo0) return std::nullopt;
        cplx ds = (*fs1 - *fs0) / (2 * hs), dom = (*fo1 - *fo0) / (2 * ho);
        double a = ds.real(), b = dom.real(), c = ds.imag(), d = dom.imag();
        double det = a * d - b * c;
        if (det == 0) return std::nullopt;
        double us = (d * f0->real() - b * f0->imag()) / det;
        double uo = (a * f0->imag() - c * f0->real()) / det;
        s -= us;
        omega -= uo;
        if (std::abs(us) < 1e-14 && std::abs(uo) < 1e-12 * (1 + omega)) break;
    }
    auto q = w.at(s);
    if (!q || omega <= 0) return std::nullopt;
    return std::array<double, 4>{s, q->first, q->second, omega};
}

}  // namespace detail

inline std::vector<BifurcationEvent> detect_events(const Reduction& red, const std::vector<BranchPoint>& branch) {
    std::vector<BifurcationEvent> events;
    for (std::size_t k = 0; k + 1 < branch.size(); ++k) {
        const auto& A = branch[k];
        const auto& B = branch[k + 1];
        detail::ChordWalker w{red, A.param, A.state.E_star, B.param, B.state.E_star};
        double chord = std::hypot(B.param - A.param, B.state.E_star - A.state.E_star);
        double tol = 1e-11 / std::max(chord, 1e-300);

        std::vector<double> folds;
        if ((A.state.gE_slope > 0) != (B.state.gE_slope > 0)) {
            double a = 0, b = 1, ga = A.state.gE_slope;
            while (b - a > tol) {
                double m = 0.5 * (a + b), gm = detail::slope_at(red, w, m);
                if ((gm > 0) == (ga > 0)) {
                    a = m;
                    ga = gm;
                } else {
                    b = m;
                }
            }
            folds.push_back(0.5 * (a + b));
        }

        std::vector<std::array<double, 4>> changes;
        detail::count_changes(red, w, 0, A.unstable_count, 1, B.unstable_count, tol, changes);
        const double near = 1e-4;
        for (double sf : folds) {
            bool matched = false;
            for (auto& ch : changes)
                matched = matched || ((int(ch[3] - ch[2]) % 2 != 0) && sf >= ch[0] - near && sf <= ch[1] + near);
            if (!matched) {
                auto before = detail::count_at(red, w, std::max(0.0, sf - near));
                auto after = detail::count_at(red, w, std::min(1.0, sf + near));
                if (before && after && *before != *after) changes.push_back({sf, sf, double(*before), double(*after)});
            }
        }
        for (auto& ch : changes) {
            double sm = 0.5 * (ch[0] + ch[1]);
            BifurcationEvent ev;
            ev.count_before = int(ch[2]);
            ev.count_after = int(ch[3]);
            if ((ev.count_after - ev.count_before) % 2 != 0) {
                std::optional<double> best;
                for (double f : folds)
                    if (std::abs(f - sm) < near && (!best || std::abs(f - sm) < std::abs(*best - sm))) best = f;
                double sf = best.value_or(sm);
                auto q = w.at(sf);
                if (!q) continue;
                ev.type = EventType::Fold;
                ev.param = q->first;
                ev.E_star = q->second;
                ev.position = k + sf;
            } else {
                auto q = w.at(sm);
                if (!q) continue;
                auto pp = red.at(q->first);
                auto pair = detail::axis_pair(make_context(pp, make_steady_state(pp, q->second), red.mode()));
                ev.type = EventType::Hopf;
                ev.param = q->first;
                ev.E_star = q->second;
                ev.position = k + sm;
                if (pair) {
                    ev.period = 2 * std::numbers::pi / pair->imag();
                    if (auto h = detail::refine_hopf(red, w, sm, pair->imag()); h && std::abs((*h)[0] - sm) < 0.5) {
                        ev.param = (*h)[1];
                        ev.E_star = (*h)[2];
                        ev.period = 2 * std::numbers::pi / (*h)[3];
                        ev.position = k + (*h)[0];
                    }
                }
            }
            events.push_back(ev);
        }
    }
    std::sort(events.begin(), events.end(), [](auto& a, auto& b) { return a.position < b.position; });
    return events;
}

// present events walking away from a stable end of the branch
inline std::vector<BifurcationEvent> orient_from_stable_end(const std::vector<BranchPoint>& branch,
                                                            std::vector<BifurcationEvent> events) {
    if (branch.empty()) return events;
    bool front_stable = branch.front().unstable_count == 0, back_stable = branch.back().unstable_count == 0;
    if (!front_stable && back_stable) {
        std::reverse(events.begin(), events.end());
        for (auto& e : events) std::swap(e.count_before, e.count_after);
    }
    return events;
}

inline const char* to_string(EventType t) { return t == EventType::Fold ? "Fold" : "Hopf"; }

inline std::string bifurcation_table(const std::vector<BifurcationEvent>& events) {
    std::ostringstream os;
    os.precision(8);
    os << "type,param,period,transition,E_star\n";
    for (auto& e : events) {
        os << to_string(e.type) << ',' << e.param << ',';
        if (e.type == EventType::Hopf) os << e.period;
        os << ',' << e.count_before << "->" << e.count_after << ',' << e.E_star << '\n';
    }
    return os.str();
}

struct DiagramOptions {
    StepControls steps;
    int seed_samples = 24;
};

struct DiagramBranch {
    Branch branch;
    std::vector<BifurcationEvent> events;
};

struct Diagram {
    std::string param_name;
    ParamRange range;
    std::vector<DiagramBranch> branches;
};

namespace detail {

inline double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    double dx = bx - ax, dy = by - ay, L = dx * dx + dy * dy;
    double t = L > 0 ? std::clamp(((px - ax) * dx + (py - ay) * dy) / L, 0.0, 1.0) : 0.0;
    return std::hypot(px - ax - t * dx, py - ay - t * dy);
}

inline bool on_branch(const Branch& b, double p, double E, double tol = 1e-3) {
    for (std::size_t i = 0; i + 1 < b.points.size(); ++i) {
        const auto& A = b.points[i];
        const auto& B = b.points[i + 1];
        if (segment_distance(p, E, A.param, A.state.E_star, B.param, B.state.E_star) < tol) return true;
    }
    return false;
}

}  // namespace detail

// every steady-state branch meeting the sampled parameter values, with events
inline Diagram diagram(const OperonParameters& params, const std::string& param_name, const ParamRange& range,
                       SpectrumMode mode = SpectrumMode::exact(), const DiagramOptions& opt = {}) {
    if (!(range.lo < range.hi)) throw ValidationError("parameter range must be non-degenerate");
    Reduction red(params, param_name, mode);
    Diagram d{param_name, range, {}};
    int n = std::max(2, opt.seed_samples);
    for (int i = 0; i < n; ++i) {
        double u = (i + 0.5) / n;
        double p = range.lo > 0 && range.hi > 4 * range.lo ? range.lo * std::pow(range.hi / range.lo, u)
                                                           : range.lo + (range.hi - range.lo) * u;
        std::vector<SteadyState> seeds;
        try {
            seeds = find_steady_states(red.at(p));
        } catch (const Error&) {
            continue;
        }
        for (auto& s : seeds) {
            bool known = false;
            for (auto& b : d.branches) known = known || detail::on_branch(b.branch, p, s.E_star);
            if (known) continue;
            DiagramBranch db;
            db.branch = trace_full_branch(red, p, s.E_star, range, opt.steps);
            db.events = orient_from_stable_end(db.branch.points, detect_events(red, db.branch.points));
            d.branches.push_back(std::move(db));
        }
    }
    return d;
}

}  // namespace operon
