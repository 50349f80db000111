// one PASS/FAIL line per acceptance criterion; detail lines are indented
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "draws.hpp"

#include <operon/continuation.hpp>
#include <operon/io.hpp>
#include <operon/simulate.hpp>

using namespace operon;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> lines;

    void note(const char* fmt, ...) __attribute__((format(printf, 2, 3))) {
        char buf[512];
        va_list ap;
        va_start(ap, fmt);
        std::vsnprintf(buf, sizeof buf, fmt, ap);
        va_end(ap);
        lines.emplace_back(buf);
    }
    void check(bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4))) {
        char buf[512];
        va_list ap;
        va_start(ap, fmt);
        std::vsnprintf(buf, sizeof buf, fmt, ap);
        va_end(ap);
        lines.push_back(std::string(ok ? "ok   " : "BAD  ") + buf);
        pass = pass && ok;
    }
};

const ParamRange kRange{0.005, 0.6};

std::vector<BifurcationEvent> events_of(const std::string& fixture, SpectrumMode mode) {
    auto d = diagram(load_fixture(fixture), "vM_min", kRange, mode);
    std::vector<BifurcationEvent> out;
    for (auto& b : d.branches) out.insert(out.end(), b.events.begin(), b.events.end());
    return out;
}

struct Expected {
    EventType type;
    double param;
    double period = 0;          // 0: not listed
    std::optional<double> E;    // gated when set
    double E_reported = 0;      // printed but not gated
    std::optional<std::pair<int, int>> transition;  // gated, ordered
};

const BifurcationEvent* nearest(const std::vector<BifurcationEvent>& events, EventType type, double param) {
    const BifurcationEvent* best = nullptr;
    for (auto& e : events)
        if (e.type == type && (!best || std::abs(e.param - param) < std::abs(best->param - param))) best = &e;
    return best;
}

const BifurcationEvent* match(Outcome& out, const std::vector<BifurcationEvent>& events, const Expected& x,
                              double param_tol) {
    const char* kind = to_string(x.type);
    auto e = nearest(events, x.type, x.param);
    if (!e) {
        out.check(false, "%s %.6g: no event of this type", kind, x.param);
        return nullptr;
    }
    double rel = std::abs(e->param - x.param) / x.param;
    out.check(rel <= param_tol, "%s %.6g: found %.8g (rel %.1e, tol %.0e)", kind, x.param, e->param, rel, param_tol);
    if (x.period > 0) {
        double pr = std::abs(e->period - x.period) / x.period;
        out.check(pr <= 5e-3, "  period %.6g: found %.8g (rel %.1e, tol 5e-3)", x.period, e->period, pr);
    }
    if (x.E) {
        double d = std::abs(e->E_star - *x.E);
        out.check(d <= 1e-3, "  E* %.5g: found %.6g (abs %.1e, tol 1e-3)", *x.E, e->E_star, d);
    } else if (x.E_reported > 0) {
        out.note("     E* printed %.5g, found %.6g (not gated)", x.E_reported, e->E_star);
    }
    if (x.transition) {
        bool ok = e->count_before == x.transition->first && e->count_after == x.transition->second;
        out.check(ok, "  transition %d->%d: found %d->%d", x.transition->first, x.transition->second, e->count_before,
                  e->count_after);
    } else {
        out.note("     transition found %d->%d", e->count_before, e->count_after);
    }
    return e;
}

bool digits(double x, double ref, int sig) {
    double unit = std::pow(10.0, std::floor(std::log10(std::abs(ref))) - sig + 1);
    return std::abs(x - ref) <= 0.5 * unit * (1 + 1e-9);
}

SteadyState nearest_state(const OperonParameters& p, double E) {
    auto states = find_steady_states(p);
    return *std::min_element(states.begin(), states.end(),
                             [E](auto& a, auto& b) { return std::abs(a.E_star - E) < std::abs(b.E_star - E); });
}

// defect and positivity bookkeeping shared by criteria 10 and 12
struct SimLedger {
    double max_defect = 0;
    bool positive = true;
    int runs = 0;

    void add(const SimulationResult& r) {
        ++runs;
        max_defect = std::max(max_defect, r.defect.max());
        for (auto& rec : r.trajectory.records())
            for (int k = 0; k < 5; ++k) positive = positive && rec.y[k] > 0;
    }
    void add(const OrbitSweep& s) {
        ++runs;
        max_defect = std::max(max_defect, s.max_defect);
    }
};

SimLedger sims;

std::vector<double> steps(double from, double to, double step) {
    std::vector<double> v;
    int n = static_cast<int>(std::lround((to - from) / step));
    for (int i = 1; i <= n; ++i) v.push_back(from + i * step);
    return v;
}

OrbitSweep sweep_from(const OperonParameters& p, const StateVector& x0, double to, double step, Outcome& out,
                      int max_chunks = 6) {
    auto seed = simulate(p, constant_history(x0), 4000);
    sims.add(seed);
    auto o = extract_orbit(seed.trajectory, Section{}, 2000);
    out.check(o.status == OrbitStatus::Periodic, "seed orbit at %.5g: %s, period %.6g", p.vM_min, to_string(o.status),
              o.orbit.period);
    SweepOptions so;
    so.max_chunks = max_chunks;
    auto sw = continue_orbit(p, seed.trajectory, o.orbit.period, "vM_min", steps(p.vM_min, to, step), so);
    sims.add(sw);
    return sw;
}

// ---------------------------------------------------------------- criteria

Outcome c1() {
    Outcome o;
    auto ev = events_of("repressible_table3", SpectrumMode::discretized(32));
    match(o, ev, {EventType::Fold, 0.017416, 0, 0.1109}, 1e-3);
    match(o, ev, {EventType::Hopf, 0.016193, 36.5348, 0.1505}, 1e-3);
    match(o, ev, {EventType::Hopf, 0.017234, 12.8954, 0.9090}, 1e-3);
    return o;
}

Outcome c2() {
    Outcome o;
    auto ev = events_of("repressible_n15", SpectrumMode::discretized(32));
    match(o, ev, {EventType::Fold, 0.019610, 0, 0.1546}, 1e-3);
    match(o, ev, {EventType::Hopf, 0.017963, 31.4290, 0.2116}, 1e-3);
    return o;
}

Outcome c3() {
    Outcome o;
    auto ev = events_of("repressible_m15n15", SpectrumMode::discretized(32));
    std::vector<Expected> want = {
        {EventType::Hopf, 0.072792, 0, std::nullopt, 0, std::pair{0, 2}},
        {EventType::Fold, 0.076976, 0, std::nullopt, 0, std::pair{2, 1}},
        {EventType::Hopf, 0.050745, 0, std::nullopt, 0, std::pair{1, 3}},
        {EventType::Fold, 0.047485, 0, std::nullopt, 0, std::pair{3, 4}},
        {EventType::Hopf, 0.067602, 0, std::nullopt, 0, std::pair{4, 2}},
    };
    // events are listed walking away from the stable end of each branch
    std::ptrdiff_t last = -1;
    bool ordered = true;
    for (auto& w : want) {
        auto e = match(o, ev, w, 1e-3);
        if (!e) continue;
        ordered = ordered && e - ev.data() > last;
        last = e - ev.data();
    }
    o.check(ordered, "events occur in the listed order along the branch");
    return o;
}

Outcome c4() {
    Outcome o;
    auto p = with_parameter(load_fixture("repressible_m15n15"), "vM_min", 0.071577);
    auto s = nearest_state(p, 0.81);
    o.check(digits(s.M_star, 0.8515, 4) && digits(s.I_star, 0.8100, 4) && digits(s.E_star, 0.8100, 4),
            "steady state (%.6f, %.6f, %.6f) vs (0.8515, 0.8100, 0.8100)", s.M_star, s.I_star, s.E_star);
    auto c = make_context(p, s, SpectrumMode::discretized(32));
    auto roots = find_roots(c);
    std::optional<cplx> l1, l2, l3;
    for (auto& r : roots) {
        auto z = r.lambda;
        if (z.imag() == 0) {
            if (z.real() > 0 && (!l1 || z.real() > l1->real())) l1 = z;
            if (z.real() < 0 && (!l2 || z.real() > l2->real())) l2 = z;
        } else if (!l3 || z.real() > l3->real()) {
            l3 = z;
        }
    }
    if (!l1 || !l2 || !l3) {
        o.check(false, "leading roots not found");
        return o;
    }
    o.check(digits(l1->real(), 0.49051, 3), "lambda1 %.6f vs 0.49051", l1->real());
    o.check(digits(l2->real(), -0.017729, 3), "lambda2 %.6f vs -0.017729", l2->real());
    o.check(digits(l3->real(), -0.018217, 3) && digits(std::abs(l3->imag()), 0.70175, 3),
            "lambda3,4 %.6f +- %.6fi vs -0.018217 +- 0.70175i", l3->real(), std::abs(l3->imag()));
    auto v1 = eigenvector(c, *l1), v2 = eigenvector(c, *l2);
    o.check(digits(v1[1].real(), 0.39077, 3) && digits(v1[2].real(), 0.26222, 3),
            "v1 (1, %.5f, %.5f) vs (1, 0.39077, 0.26222)", v1[1].real(), v1[2].real());
    o.check(digits(v2[1].real(), 0.98572, 3) && digits(v2[2].real(), 1.0035, 3),
            "v2 (1, %.5f, %.5f) vs (1, 0.98572, 1.0035)", v2[1].real(), v2[2].real());
    o.check(eigenvector_residual(c, *l1, v1) < 1e-8 && eigenvector_residual(c, *l2, v2) < 1e-8,
            "eigenvector residuals %.1e, %.1e", eigenvector_residual(c, *l1, v1), eigenvector_residual(c, *l2, v2));
    return o;
}

Outcome c5() {
    Outcome o;
    auto base = load_fixture("repressible_m15n15");
    for (auto [v, complex_leads] : {std::pair{0.07, false}, std::pair{0.07162, true}}) {
        auto p = with_parameter(base, "vM_min", v);
        auto s = nearest_state(p, 0.81);
        auto rep = leading_order_report(make_context(p, s, SpectrumMode::discretized(32)));
        if (rep.insufficient_region) {
            o.check(false, "v_M^min=%.5g: search region lacks a leading root", v);
            continue;
        }
        o.check(rep.three_dl_flag == complex_leads,
                "v_M^min=%.5g (E*=%.4f): real %.6f, complex %.6f%+.5fi, %s leads (expected %s)", v, s.E_star,
                rep.lambda_real_leading->real(), rep.lambda_complex_leading->real(),
                std::abs(rep.lambda_complex_leading->imag()), rep.three_dl_flag ? "complex" : "real",
                complex_leads ? "complex" : "real");
    }
    auto flag = [&](double v) {
        auto p = with_parameter(base, "vM_min", v);
        return leading_order_report(make_context(p, nearest_state(p, 0.81), SpectrumMode::discretized(32))).three_dl_flag;
    };
    double a = 0.07, b = 0.07162;
    if (flag(a) != flag(b)) {
        for (int it = 0; it < 12; ++it) {
            double m = 0.5 * (a + b);
            (flag(m) == flag(a) ? a : b) = m;
        }
        o.note("     ordering swaps at v_M^min=%.6f, %s leading below", 0.5 * (a + b), flag(0.07) ? "complex" : "real");
    }
    return o;
}

Outcome c6() {
    Outcome o;
    o.note("inducible_table6 uses v_M^max = 1");
    auto ev = events_of("inducible_table6", SpectrumMode::discretized(32));
    match(o, ev, {EventType::Hopf, 0.080031, 6.2271, std::nullopt, 1.8571}, 1e-3);
    match(o, ev, {EventType::Fold, 0.35409, 0, 0.9052}, 1e-3);
    auto m4 = events_of("inducible_m4", SpectrumMode::discretized(32));
    match(o, m4, {EventType::Hopf, 0.19603, 6.4488, 1.7609}, 1e-3);
    match(o, m4, {EventType::Fold, 0.063903, 0, 1.2317}, 1e-3);
    match(o, m4, {EventType::Hopf, 0.12279, 4.7796, 1.0759}, 1e-3);
    match(o, m4, {EventType::Fold, 0.28543, 0, 0.9249}, 1e-3);
    return o;
}

Outcome c7() {
    Outcome o;
    auto ev = events_of("inducible_table3", SpectrumMode::discretized(32));
    match(o, ev, {EventType::Hopf, 0.09624, 4.1286, 0.9270}, 2e-3);
    match(o, ev, {EventType::Fold, 0.055205, 0, 1.5229}, 2e-3);
    match(o, ev, {EventType::Hopf, 0.051247, 7.1786, 1.8245}, 2e-3);
    match(o, ev, {EventType::Hopf, 0.049356, 11.4903, 2.0162}, 2e-3);
    match(o, ev, {EventType::Hopf, 0.048868, 23.539, 2.1697}, 2e-3);
    match(o, ev, {EventType::Fold, 0.048865, 0, 2.1830}, 2e-3);
    return o;
}

Outcome c8() {
    Outcome o;
    auto rep = events_of("twodelay_rep", SpectrumMode::exact());
    match(o, rep, {EventType::Fold, 0.017832, 0, 0.1130}, 1e-3);
    match(o, rep, {EventType::Hopf, 0.014483, 34.8874, 0.1768}, 1e-3);
    auto ind = events_of("twodelay_ind", SpectrumMode::exact());
    match(o, ind, {EventType::Hopf, 0.096224, 4.1287, 0.9270}, 1e-3);
    match(o, ind, {EventType::Fold, 0.055205, 0, 1.5230}, 1e-3);
    match(o, ind, {EventType::Fold, 0.049743, 0, 1.9858}, 1e-3);
    match(o, ind, {EventType::Fold, 0.05006, 0, 2.0558}, 1e-3);
    return o;
}

Outcome c9() {
    Outcome o;
    struct Row {
        const char* fixture;
        int count;
    };
    for (auto r : {Row{"repressible_table3", 3}, Row{"inducible_table3", 5}, Row{"twodelay_rep", 5},
                   Row{"twodelay_ind", 7}}) {
        auto c = steady_state_census(load_fixture(r.fixture));
        o.check(c.count == r.count, "%s: %d steady states (expected %d, bound %d)", r.fixture, c.count, r.count, c.bound);
    }
    return o;
}

Outcome c10() {
    Outcome o;
    {
        auto p = with_parameter(load_fixture("repressible_table3"), "vM_min", 0.01);
        auto sw = sweep_from(p, {0.5, 0.5, 0.5}, 0.0156, 0.0005, o, 40);
        if (sw.points.empty()) {
            o.check(false, "(a) no orbit continued");
        } else {
            bool falling = true;
            for (std::size_t i = 1; i < sw.points.size(); ++i)
                falling = falling && sw.points[i].orbit.period < sw.points[i - 1].orbit.period;
            auto& last = sw.points.back();
            double rel = std::abs(last.orbit.period - 12.8954) / 12.8954;
            o.check(falling, "(a) period decreases toward the Hopf: %.5g at %.5g to %.5g at %.5g",
                    sw.points.front().orbit.period, sw.points.front().value, last.orbit.period, last.value);
            o.check(rel <= 0.02, "(a) last period %.6g vs Hopf period 12.8954 (rel %.2e, tol 2e-2)", last.orbit.period,
                    rel);
            if (sw.lost) o.note("     (a) orbit lost between %.5g and %.5g", sw.lost_lo, sw.lost_hi);
        }
    }
    {
        auto p = load_fixture("repressible_n15");
        auto sw = sweep_from(p, {0.5, 0.5, 0.5}, 0.019, -0.0005, o);
        bool rising = !sw.points.empty();
        for (std::size_t i = 1; i < sw.points.size(); ++i)
            rising = rising && sw.points[i].orbit.period > sw.points[i - 1].orbit.period;
        if (!sw.points.empty())
            o.check(rising, "(b) period increases monotonically: %.5g at %.5g to %.5g at %.5g",
                    sw.points.front().orbit.period, sw.points.front().value, sw.points.back().orbit.period,
                    sw.points.back().value);
        double lo = std::min(sw.lost_lo, sw.lost_hi), hi = std::max(sw.lost_lo, sw.lost_hi);
        o.check(sw.lost && lo >= 0.0195 - 1e-12 && hi <= 0.0205 + 1e-12, "(b) orbit lost in [%.5g, %.5g], within [0.0195, 0.0205]",
                lo, hi);
    }
    {
        auto p = with_parameter(load_fixture("inducible_m4"), "vM_min", 0.18);
        auto sw = sweep_from(p, {0.6315, 1.143, 1.7146}, 0.22, 0.002, o);
        double lo = std::min(sw.lost_lo, sw.lost_hi), hi = std::max(sw.lost_lo, sw.lost_hi);
        o.check(sw.lost && lo <= 0.20812 && hi >= 0.20812 && lo >= 0.20812 - 0.005 && hi <= 0.20812 + 0.005,
                "(c) orbit lost in [%.5g, %.5g], contains 0.20812 within 0.005", lo, hi);
    }
    {
        auto p = load_fixture("inducible_m4");
        auto states = find_steady_states(p);
        std::vector<StateVector> histories;
        for (auto& s : states)
            if (s.unstable_count.value_or(count_unstable(make_context(p, s))) == 0)
                histories.push_back(1.001 * StateVector{s.M_star, s.I_star, s.E_star});
        histories.push_back({0.45, 0.75, 1.1});
        std::set<std::string> attractors;
        for (auto& h : histories) {
            auto r = simulate(p, constant_history(h), 3000);
            sims.add(r);
            auto orb = extract_orbit(r.trajectory, Section{}, 1500);
            std::string label;
            if (orb.status == OrbitStatus::Periodic) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "orbit period %.4f", orb.orbit.period);
                label = buf;
            } else {
                auto x = r.trajectory.state(3000);
                for (auto& s : states)
                    if (std::abs(x.E - s.E_star) < 1e-4 && std::abs(x.M - s.M_star) < 1e-4) {
                        char buf[64];
                        std::snprintf(buf, sizeof buf, "steady state E*=%.4f", s.E_star);
                        label = buf;
                    }
                if (label.empty()) label = "unclassified";
            }
            o.note("     (d) history (%.4g, %.4g, %.4g) -> %s", h.M, h.I, h.E, label.c_str());
            if (label != "unclassified") attractors.insert(label);
        }
        o.check(histories.size() == 3 && attractors.size() == 3, "(d) %zu distinct attractors from %zu histories",
                attractors.size(), histories.size());
    }
    return o;
}

Outcome c11() {
    Outcome o;
    std::mt19937_64 rng(20240611);
    double worst0 = 0, worst_app = 0;
    int draws = 0, states = 0;
    for (; draws < 200; ++draws) {
        auto p = random_parameters(rng);
        for (auto& s : find_steady_states(p)) {
            ++states;
            auto c = make_context(p, s);
            double rhs = -p.gbar_M * p.gbar_I * p.gbar_E * s.gE_slope;
            double lhs = delta(c, 0.0).real();
            worst0 = std::max(worst0, std::abs(lhs - rhs) / std::abs(rhs));
            cplx z(-0.3 + 0.1 * (draws % 7), 0.5 * (draws % 13));
            worst_app = std::max(worst_app, std::abs(delta(c, z) - delta_factorized(c, z)) / detail::delta_scale(c, z));
        }
    }
    o.check(worst0 <= 1e-9, "Delta(0) identity over %d draws (%d steady states): max rel %.1e (tol 1e-9)", draws, states,
            worst0);
    o.check(worst_app <= 1e-12, "factorized vs direct Delta: max rel %.1e (tol 1e-12)", worst_app);
    double worst_phi = 0;
    for (double tau : {0.3, 1.0, 7.0})
        for (double arg = 0; arg < 6.3; arg += 0.35)
            for (double f : {0.99, 0.9999, 1.0001, 1.01}) {
                cplx z = std::polar(f * 1e-4 / tau, arg);
                cplx a = phi_factor(z, tau, 0.05), b = detail::lag_integral_direct(z, tau) * (z + 0.05);
                worst_phi = std::max(worst_phi, std::abs(a - b) / std::abs(b));
            }
    o.check(worst_phi <= 1e-14, "phi factor across the series switch: max rel %.1e (tol 1e-14)", worst_phi);
    return o;
}

Outcome c12() {
    Outcome o;
    // every simulation shipped in this suite, plus one per fixture
    for (const char* f : {"repressible_table3", "repressible_n15", "repressible_m15n15", "inducible_table6", "inducible_m4",
                          "inducible_table3", "twodelay_rep", "twodelay_ind"}) {
        auto p = load_fixture(f);
        sims.add(simulate(p, constant_history({0.5, 0.5, 0.5}), 20 * max_delay(p)));
    }
    o.check(sims.max_defect < 1e-5, "threshold defect over %d runs: max %.2e (tol 1e-5)", sims.runs, sims.max_defect);
    o.check(sims.positive, "positivity of M, I, E and both delays");

    auto p = load_fixture("inducible_m4");
    auto box = dissipativity_bounds(p);
    double eps = 1e-2 * box.diameter(), T = 50 * max_delay(p);
    StateVector x0{1.5 * box.box_hi[0], 1.5 * box.box_hi[1], 1.5 * box.box_hi[2]};
    auto r = simulate(p, constant_history(x0), 2 * T);
    double entry = -1;
    bool escaped = false;
    for (auto& rec : r.trajectory.records()) {
        bool in = box.contains({rec.y[0], rec.y[1], rec.y[2]}, eps);
        if (in && entry < 0) entry = rec.t;
        if (!in && entry >= 0) escaped = true;
    }
    o.check(!box.contains(x0, eps) && entry >= 0 && entry <= T && !escaped,
            "absorbing box entered at t=%.4g (bound %.4g) and never left", entry, T);

    auto q = load_fixture("repressible_n15");
    q.vM_min = q.vM_max;  // constant unit delays keep propagated kinks on the mesh
    double E0 = 0.8;
    StateVector y0{0.6, q.gbar_E * E0 / q.beta_E, E0};
    auto run = [&](int n) {
        double tauI = q.aI / q.vI_min;
        HistorySegment traj(constant_history(y0));
        AugmentedState a{y0, q.aM / velocity_vM(q, E0), tauI};
        for (int i = 0; i < 2 * n; ++i) a = step(q, traj, a, tauI / n);
        return a.x;
    };
    auto a = run(16), b = run(32), c = run(64);
    auto dist = [](const StateVector& u, const StateVector& v) {
        return std::max({std::abs(u.M - v.M), std::abs(u.I - v.I), std::abs(u.E - v.E)});
    };
    double order = std::log2(dist(a, b) / dist(b, c));
    o.check(order >= 3.7, "stepper self-convergence order %.2f (gate 3.7)", order);

    auto s = threshold_M(load_fixture("inducible_m4"));
    ScalarHistory wave = [](double t) { return 1.0 + 0.8 * std::sin(0.3 * t); };
    double exact = delay_exact(s, wave, 0, 1e9);
    std::vector<double> lx, ly;
    for (int N : {8, 16, 32, 64, 128}) {
        lx.push_back(std::log(N));
        ly.push_back(std::log(std::abs(delay_discretized(s, make_grid(s, N), wave, 0) - exact)));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i] / lx.size(), my += ly[i] / lx.size();
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) sxy += (lx[i] - mx) * (ly[i] - my), sxx += (lx[i] - mx) * (lx[i] - mx);
    double slope = sxy / sxx;
    o.check(slope >= -2.3 && slope <= -1.7, "discretized delay convergence slope %.3f in [-2.3, -1.7]", slope);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"fold and Hopf events, repressible one-delay set", c1},
        {"fold and Hopf events, repressible n=15", c2},
        {"five events and count transitions, repressible m=n=15", c3},
        {"eigenvalues, eigenvectors and steady state at v_M^min=0.071577", c4},
        {"leading-root ordering swap between 0.07 and 0.07162", c5},
        {"inducible events, base set and m=4", c6},
        {"inducible events, three-state set", c7},
        {"two state-dependent delays, exact characteristic function", c8},
        {"steady-state census 3, 5, 5, 7", c9},
        {"periodic orbit properties", c10},
        {"structural identities", c11},
        {"solver properties", c12},
    };
    // --known-failures=5,... : exit 0 when exactly these criteria fail
    std::set<int> only, known, failures;
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a.rfind("--known-failures=", 0) == 0) {
            for (auto& t : split(a.substr(17))) known.insert(std::stoi(t));
        } else {
            only.insert(std::stoi(a));
        }
    }
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out.check(false, "exception: %s", e.what());
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2d  %s  (%.1fs)\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first, secs);
        for (auto& l : out.lines) std::printf("        %s\n", l.c_str());
        std::fflush(stdout);
        failed += out.pass ? 0 : 1;
        if (!out.pass) failures.insert(id);
    }
    std::printf("%d of %zu criteria failed\n", failed, only.empty() ? criteria.size() : only.size());
    if (!known.empty()) {
        std::set<int> relevant;
        for (int id : known)
            if (only.empty() || only.count(id)) relevant.insert(id);
        for (int id : relevant)
            if (!failures.count(id)) std::printf("criterion %d was listed as a known failure but passed\n", id);
        return failures == relevant ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
