#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <operon/io.hpp>

using namespace operon;

namespace {

struct Common {
    std::string fixture, params_file, config_file, out;
    std::vector<std::string> sets;
    bool strict = false;
    std::string mode = "discretized";
    int N = 32;
    int jobs = 1;
};

struct Run {
    OperonParameters params;
    json config;  // effective configuration, hashed into every output header
    SpectrumMode mode;
};

const std::vector<std::string> config_keys = {"fixture", "params", "set", "strict", "mode", "N", "jobs", "out",
                                              "param", "range", "history", "t_end", "atol", "rtol", "delay_rtol", "defect_tol",
                                              "transient", "section", "sweep", "svg", "events", "state",
                                              "one_norm", "grids", "im_max"};

json load_config(const std::string& path) {
    auto j = parse_json(read_file(path), path);
    if (!j.is_object()) throw ValidationError(path + ": config must be a JSON object");
    for (auto& [key, value] : j.items())
        if (std::find(config_keys.begin(), config_keys.end(), key) == config_keys.end())
            throw ValidationError(path + ": unknown config key '" + key + "'");
    return j;
}

template <class T>
void fill(const json& cfg, const char* key, T& target, bool cli_given) {
    if (cli_given || !cfg.contains(key)) return;
    try {
        target = cfg.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("config key '") + key + "' has the wrong type");
    }
}

Run prepare(Common& c, CLI::App& sub, json& cfg) {
    if (!c.config_file.empty()) cfg = load_config(c.config_file);
    auto given = [&](const char* flag) { return sub.count(flag) > 0; };
    fill(cfg, "fixture", c.fixture, given("--fixture"));
    fill(cfg, "mode", c.mode, given("--mode"));
    fill(cfg, "N", c.N, given("--N"));
    fill(cfg, "jobs", c.jobs, given("--jobs"));
    fill(cfg, "strict", c.strict, given("--strict"));
    fill(cfg, "out", c.out, given("--out"));
    if (cfg.contains("set") && !given("--set")) fill(cfg, "set", c.sets, false);

    Run run;
    int sources = (!c.fixture.empty()) + (!c.params_file.empty()) + (cfg.contains("params") && c.params_file.empty());
    if (sources != 1) throw ValidationError("give exactly one of --fixture, --params or a config 'params' object");
    if (!c.fixture.empty()) run.params = load_fixture(c.fixture);
    else if (!c.params_file.empty()) run.params = load_parameters(c.params_file);
    else run.params = params_from_document(cfg.at("params"), c.config_file);
    for (auto& kv : c.sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
        parameter(run.params, kv.substr(0, eq)) = to_double(kv.substr(eq + 1));
    }
    validate(run.params, c.strict ? Validation::Strict : Validation::Relaxed);
    if (c.mode == "exact") run.mode = SpectrumMode::exact();
    else if (c.mode == "discretized") run.mode = SpectrumMode::discretized(c.N);
    else throw ValidationError("--mode must be 'exact' or 'discretized'");
    if (c.N < 1) throw ValidationError("--N must be >= 1");
    if (c.jobs < 1) throw ValidationError("--jobs must be >= 1");
    run.config = cfg;
    run.config["params"] = params_to_json(run.params);
    run.config["mode"] = c.mode;
    run.config["N"] = c.N;
    run.config.erase("fixture");
    run.config.erase("set");
    run.config.erase("out");
    return run;
}

void emit(const Common& c, const std::string& body, const std::string& path = {}) {
    const std::string& target = path.empty() ? c.out : path;
    if (target.empty() || target == "-") std::cout << body;
    else write_file(target, body);
}

std::string mode_text(const Run& r) {
    return r.mode.kind == SpectrumMode::Exact ? "mode=exact" : "mode=discretized N=" + std::to_string(r.mode.N);
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--fixture", c.fixture, "shipped parameter set by name");
    sub->add_option("--params", c.params_file, "parameter JSON file");
    sub->add_option("--config", c.config_file, "run configuration JSON");
    sub->add_option("--set", c.sets, "override a parameter, key=value");
    sub->add_flag("--strict", c.strict, "reject relaxed-mode parameters");
    sub->add_option("--mode", c.mode, "characteristic function: exact | discretized");
    sub->add_option("--N", c.N, "dummy delays per regime in discretized mode");
    sub->add_option("--jobs", c.jobs, "worker threads for root searches");
    sub->add_option("-o,--out", c.out, "output file (default stdout)");
}

std::vector<SteadyState> states_with_counts(const Run& r) {
    auto states = find_steady_states(r.params);
    for (auto& s : states) s.unstable_count = count_unstable(make_context(r.params, s, r.mode));
    return states;
}

std::vector<double> parse_sweep(const std::string& spec) {
    auto parts = split(spec, ':');
    if (parts.size() != 3) throw ValidationError("sweep expects from:to:step");
    double a = to_double(parts[0]), b = to_double(parts[1]), h = to_double(parts[2]);
    if (!(h != 0) || (b - a) / h < 0) throw ValidationError("sweep step must point from 'from' to 'to'");
    std::vector<double> v;
    int n = static_cast<int>(std::floor((b - a) / h + 1e-9));
    for (int i = 0; i <= n; ++i) v.push_back(a + i * h);
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delay models of operon dynamics: steady states, spectra, simulation and continuation"};
    app.set_version_flag("--version", tool_version);
    app.require_subcommand(1);

    Common c;
    json cfg = json::object();

    auto* ss = app.add_subcommand("steady-states", "steady states with unstable-root counts");
    add_common(ss, c);

    int state_index = -1;
    double im_hi = 60;
    auto* sp = app.add_subcommand("spectrum", "characteristic roots at each steady state");
    add_common(sp, c);
    sp->add_option("--state", state_index, "steady-state index (default: all)");
    sp->add_option("--im-max", im_hi, "upper imaginary bound of the root search");

    std::string history = "const:1,1,1";
    double t_end = 500, atol = 1e-9, rtol = 1e-7, delay_rtol = 1e-9, defect_tol = 1e-5;
    auto add_sim = [&](CLI::App* sub) {
        sub->add_option("--history", history, "const:M,I,E or a csv file with columns t,M,I,E");
        sub->add_option("--t-end", t_end, "final time");
        sub->add_option("--atol", atol, "absolute tolerance");
        sub->add_option("--rtol", rtol, "relative tolerance");
        sub->add_option("--delay-rtol", delay_rtol, "relative tolerance on the delay components");
        sub->add_option("--defect-tol", defect_tol, "threshold defect tolerance");
    };
    auto* sim = app.add_subcommand("simulate", "integrate from a history, trajectory csv");
    add_common(sim, c);
    add_sim(sim);

    double transient = -1;
    int section = 2;
    std::string sweep, param = "vM_min";
    auto* orb = app.add_subcommand("orbit", "simulate and extract a periodic orbit");
    add_common(orb, c);
    add_sim(orb);
    orb->add_option("--transient", transient, "time discarded before the section analysis (default t_end/2)");
    orb->add_option("--section", section, "section component 0=M 1=I 2=E");
    orb->add_option("--sweep", sweep, "continue the orbit over from:to:step of --param");
    orb->add_option("--param", param, "swept parameter");

    double lo = 0.005, hi = 0.6;
    std::string events_path, svg_path;
    auto* cont = app.add_subcommand("continue", "steady-state branches and bifurcation events");
    add_common(cont, c);
    cont->add_option("--param", param, "continuation parameter");
    cont->add_option("--from", lo, "range start");
    cont->add_option("--to", hi, "range end");
    cont->add_option("--events", events_path, "events csv path (default: appended to stdout)");

    bool one_norm = false;
    auto* dia = app.add_subcommand("diagram", "bifurcation diagram csv and svg");
    add_common(dia, c);
    add_sim(dia);
    dia->add_option("--param", param, "continuation parameter");
    dia->add_option("--from", lo, "range start");
    dia->add_option("--to", hi, "range end");
    dia->add_option("--svg", svg_path, "svg output path");
    dia->add_option("--events", events_path, "events csv path");
    dia->add_option("--sweep", sweep, "add a stable-orbit curve over from:to:step");
    dia->add_flag("--one-norm", one_norm, "draw orbits by their one-norm");

    std::vector<int> grids{8, 16, 32, 64, 128};
    auto* dc = app.add_subcommand("delay-check", "exact vs discretized delay for a history");
    add_common(dc, c);
    dc->add_option("--history", history, "const:M,I,E or a csv file");
    dc->add_option("--grids", grids, "dummy-delay counts N");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        Run r = prepare(c, *sub, cfg);
        auto given = [&](const char* flag) {
            auto* opt = sub->get_option_no_throw(flag);
            return opt != nullptr && opt->count() > 0;
        };
        fill(cfg, "history", history, given("--history"));
        fill(cfg, "t_end", t_end, given("--t-end"));
        fill(cfg, "atol", atol, given("--atol"));
        fill(cfg, "rtol", rtol, given("--rtol"));
        fill(cfg, "delay_rtol", delay_rtol, given("--delay-rtol"));
        fill(cfg, "defect_tol", defect_tol, given("--defect-tol"));
        fill(cfg, "transient", transient, given("--transient"));
        fill(cfg, "section", section, given("--section"));
        fill(cfg, "sweep", sweep, given("--sweep"));
        fill(cfg, "param", param, given("--param"));
        fill(cfg, "events", events_path, given("--events"));
        fill(cfg, "svg", svg_path, given("--svg"));
        fill(cfg, "state", state_index, given("--state"));
        fill(cfg, "im_max", im_hi, given("--im-max"));
        fill(cfg, "one_norm", one_norm, given("--one-norm"));
        fill(cfg, "grids", grids, given("--grids"));
        if (cfg.contains("range") && !given("--from") && !given("--to")) {
            std::vector<double> range;
            fill(cfg, "range", range, false);
            if (range.size() != 2) throw ValidationError("config 'range' needs two numbers");
            lo = range[0];
            hi = range[1];
        }
        if (!(atol > 0 && rtol > 0 && delay_rtol > 0 && defect_tol > 0)) throw ValidationError("tolerances must be positive");
        auto hash = [&](const json& extra) {
            json all = r.config;
            for (auto& [k, v] : extra.items()) all[k] = v;
            return config_hash(all);
        };

        if (sub == ss) {
            auto states = states_with_counts(r);
            emit(c, csv_header({"steady-states", hash({}), mode_text(r)}) + steady_states_csv(states));
            std::cerr << states.size() << " steady state(s)\n";
        } else if (sub == sp) {
            auto states = states_with_counts(r);
            if (state_index >= static_cast<int>(states.size())) throw ValidationError("--state out of range");
            SearchRegion region;
            region.im_hi = im_hi;
            std::ostringstream body;
            body << "state,E_star,re,im,residual,multiplicity_hint\n";
            for (std::size_t i = 0; i < states.size(); ++i) {
                if (state_index >= 0 && static_cast<int>(i) != state_index) continue;
                auto ctx = make_context(r.params, states[i], r.mode);
                auto roots = find_roots(ctx, region, c.jobs);
                std::sort(roots.begin(), roots.end(), [](auto& a, auto& b) { return a.lambda.real() > b.lambda.real(); });
                for (auto& root : roots)
                    body << i << ',' << fmt17(states[i].E_star) << ',' << fmt17(root.lambda.real()) << ','
                         << fmt17(root.lambda.imag()) << ',' << fmt17(root.residual) << ',' << root.multiplicity_hint << '\n';
                std::fprintf(stderr, "state %zu  E*=%.6g  unstable=%d", i, states[i].E_star, *states[i].unstable_count);
                for (std::size_t k = 0; k < std::min<std::size_t>(3, roots.size()); ++k)
                    std::fprintf(stderr, "  lambda%zu=%.6g%+.6gi", k + 1, roots[k].lambda.real(), roots[k].lambda.imag());
                std::fprintf(stderr, "\n");
            }
            emit(c, csv_header({"spectrum", hash({{"im_max", im_hi}, {"state", state_index}}), mode_text(r)}) + body.str());
        } else if (sub == sim || sub == orb) {
            validate(r.params, Validation::Strict);
            SimOptions opt;
            opt.atol = atol;
            opt.rtol = rtol;
            opt.delay_rtol = delay_rtol;
            opt.defect_tol = defect_tol;
            auto res = simulate(r.params, parse_history(history), t_end, opt);
            std::string tol = "atol=" + fmt17(atol) + " rtol=" + fmt17(rtol) + " delay_rtol=" + fmt17(delay_rtol) + " defect_tol=" + fmt17(defect_tol);
            json extra = {{"history", history}, {"t_end", t_end}, {"atol", atol}, {"rtol", rtol}, {"delay_rtol", delay_rtol}};
            std::fprintf(stderr, "steps %ld  rejected %ld  defect M %.3g  I %.3g  (%s)\n", res.steps, res.rejected,
                         res.defect.max_M, res.defect.max_I, res.defect_ok() ? "ok" : "above tolerance");
            if (sub == sim) {
                emit(c, csv_header({"simulate", hash(extra), tol}) +
                            trajectory_csv(res.trajectory, state_dependent_I(r.params)));
            } else {
                double tr = transient < 0 ? 0.5 * (t_end - res.trajectory.t0()) : transient;
                auto o = extract_orbit(res.trajectory, {section, NAN, +1}, tr);
                std::printf("status %s\n", to_string(o.status));
                if (o.status != OrbitStatus::NotPeriodic) {
                    std::printf("period %.10g\n", o.orbit.period);
                    const char* names[3] = {"M", "I", "E"};
                    for (int q = 0; q < 3; ++q)
                        std::printf("%s max %.10g min %.10g\n", names[q], o.orbit.amp_max[q], o.orbit.amp_min[q]);
                    std::printf("one_norm %.10g\nreturn_error %.3g\n", o.orbit.one_norm, o.orbit.return_error);
                }
                if (!sweep.empty()) {
                    if (o.status != OrbitStatus::Periodic) throw NumericalError("sweep needs a converged seed orbit");
                    SweepOptions so;
                    so.section.component = section;
                    so.sim = opt;
                    auto sw = continue_orbit(r.params, res.trajectory, o.orbit.period, param, parse_sweep(sweep), so);
                    extra["sweep"] = sweep;
                    extra["param"] = param;
                    emit(c, csv_header({"orbit", hash(extra), tol}) + orbit_sweep_csv(param, sw));
                }
                if (!res.defect_ok()) return 3;
            }
            if (!res.defect_ok()) return 3;
        } else if (sub == cont || sub == dia) {
            if (!(lo < hi)) throw ValidationError("--from must be < --to");
            auto d = diagram(r.params, param, {lo, hi}, r.mode);
            json extra = {{"param", param}, {"range", {lo, hi}}};
            std::string h = hash(extra);
            std::string ev = csv_header({sub == cont ? "continue" : "diagram", h, mode_text(r)}) + events_csv(d.branches);
            emit(c, csv_header({sub == cont ? "continue" : "diagram", h, mode_text(r)}) + branch_csv(d.branches));
            if (!events_path.empty()) write_file(events_path, ev);
            else if (sub == cont) std::cout << '\n' << ev;
            for (auto& b : d.branches) std::cerr << bifurcation_table(b.events);
            if (sub == dia) {
                if (svg_path.empty()) throw ValidationError("diagram needs --svg");
                std::vector<OrbitCurvePoint> curve;
                if (!sweep.empty()) {
                    auto values = parse_sweep(sweep);
                    auto seed_params = with_parameter(r.params, param, values.front());
                    validate(seed_params, Validation::Strict);
                    auto res = simulate(seed_params, parse_history(history), t_end);
                    auto o = extract_orbit(res.trajectory, {}, 0.5 * (t_end - res.trajectory.t0()));
                    if (o.status != OrbitStatus::Periodic) throw NumericalError("no converged orbit at the sweep start");
                    auto sw = continue_orbit(seed_params, res.trajectory, o.orbit.period, param, values);
                    for (auto& pt : sw.points)
                        curve.push_back({pt.value, pt.orbit.amp_max[2], pt.orbit.amp_min[2], pt.orbit.one_norm});
                }
                write_file(svg_path, diagram_svg(d, curve, one_norm));
            }
        } else if (sub == dc) {
            auto h = parse_history(history);
            std::ostringstream body;
            body << "delay,N,discretized,exact,abs_error\n";
            for (int which = 0; which < 2; ++which) {
                auto spec = which == 0 ? threshold_M(r.params) : threshold_I(r.params);
                if (spec.constant()) continue;
                int k = which == 0 ? 2 : 0;
                ScalarHistory s = [&](double t) { return h.f(t)[k]; };
                double exact = delay_exact(spec, s, h.t0, std::numeric_limits<double>::infinity(), h.breakpoints);
                for (int N : grids) {
                    double approx = delay_discretized(spec, make_grid(spec, N), s, h.t0);
                    body << (which == 0 ? "tauM" : "tauI") << ',' << N << ',' << fmt17(approx) << ',' << fmt17(exact)
                         << ',' << fmt17(std::abs(approx - exact)) << '\n';
                }
            }
            emit(c, csv_header({"delay-check", hash({{"history", history}}), "quadrature tol=1e-13"}) + body.str());
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
