#pragma once
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "continuation.hpp"
#include "equilibria.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "simulate.hpp"
#include "spectrum.hpp"

#ifndef OPERON_FIXTURE_DIR
#define OPERON_FIXTURE_DIR "fixtures"
#endif

namespace operon {

using json = nlohmann::json;

inline constexpr const char* tool_version = "operon 1.0.0";

// ---------------------------------------------------------------- parameters

inline OperonParameters params_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("parameter set must be a JSON object");
    OperonParameters p;
    for (auto& [key, value] : j.items()) {
        if (key == "kind") {
            if (!value.is_string()) throw ValidationError("kind: must be a string");
            auto k = value.get<std::string>();
            if (k == "repressible") p.kind = OperonKind::Repressible;
            else if (k == "inducible") p.kind = OperonKind::Inducible;
            else throw ValidationError("kind: expected 'repressible' or 'inducible', got '" + k + "'");
            continue;
        }
        bool known = false;
        for (auto name : numeric_parameter_names) known = known || key == name;
        if (!known) throw ValidationError("unknown parameter key '" + key + "'");
        if (!value.is_number()) throw ValidationError(key + ": must be a number");
        parameter(p, key) = value.get<double>();
    }
    if (!j.contains("kind")) throw ValidationError("missing parameter key 'kind'");
    for (auto name : numeric_parameter_names)
        if (!j.contains(std::string(name))) throw ValidationError("missing parameter key '" + std::string(name) + "'");
    return p;
}

inline json params_to_json(const OperonParameters& p) {
    json j;
    j["kind"] = p.kind == OperonKind::Repressible ? "repressible" : "inducible";
    for (auto name : numeric_parameter_names) j[std::string(name)] = parameter(p, name);
    return j;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// parse with a file:line:col anchored message
inline json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::string msg = e.what();
        auto pos = msg.find("]: ");
        throw ValidationError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                              (pos == std::string::npos ? msg : msg.substr(pos + 3)));
    }
}

inline std::filesystem::path fixture_dir() {
    if (const char* env = std::getenv("OPERON_FIXTURE_DIR")) return env;
    return OPERON_FIXTURE_DIR;
}

inline std::filesystem::path fixture_path(const std::string& name) {
    auto p = fixture_dir() / (name + ".json");
    if (!std::filesystem::exists(p)) throw ValidationError("unknown fixture '" + name + "' (looked in " + fixture_dir().string() + ")");
    return p;
}

// bare parameter object, or {"name", "description", "params"}
inline OperonParameters params_from_document(const json& j, const std::string& origin) {
    try {
        if (j.is_object() && j.contains("params")) {
            for (auto& [key, value] : j.items())
                if (key != "params" && key != "name" && key != "description")
                    throw ValidationError("unknown key '" + key + "'");
            return params_from_json(j.at("params"));
        }
        return params_from_json(j);
    } catch (const ValidationError& e) {
        throw ValidationError(origin + ": " + e.what());
    }
}

inline OperonParameters load_parameters(const std::filesystem::path& path) {
    return params_from_document(parse_json(read_file(path), path.string()), path.string());
}

inline OperonParameters load_fixture(const std::string& name) { return load_parameters(fixture_path(name)); }

// ---------------------------------------------------------------- csv

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string config_hash(const json& config) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(config.dump());
    return os.str();
}

struct Provenance {
    std::string command;
    std::string hash;
    std::string tolerances;
};

inline std::string csv_header(const Provenance& pv) {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    std::ostringstream os;
    os << "# tool: " << tool_version << '\n';
    os << "# command: " << pv.command << '\n';
    os << "# config_hash: " << pv.hash << '\n';
    os << "# tolerances: " << pv.tolerances << '\n';
    os << "# generated: " << stamp << '\n';
    return os.str();
}

inline std::vector<std::string> split(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

// rows of a csv body, comment lines and the column header skipped
inline std::vector<std::vector<std::string>> csv_rows(const std::string& text, std::vector<std::string>* columns = nullptr) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream is(text);
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            if (columns) *columns = split(line);
            header = false;
            continue;
        }
        rows.push_back(split(line));
    }
    return rows;
}

inline double to_double(const std::string& s) {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw ValidationError("bad number '" + s + "'");
    return v;
}

inline std::string steady_states_csv(const std::vector<SteadyState>& states) {
    std::ostringstream os;
    os << "E_star,M_star,I_star,tauM_star,tauI_star,gE_slope,unstable_count,tangency\n";
    for (auto& s : states) {
        os << fmt17(s.E_star) << ',' << fmt17(s.M_star) << ',' << fmt17(s.I_star) << ',' << fmt17(s.tauM_star) << ','
           << fmt17(s.tauI_star) << ',' << fmt17(s.gE_slope) << ',';
        if (s.unstable_count) os << *s.unstable_count;
        else os << "unknown";
        os << ',' << (s.tangency ? 1 : 0) << '\n';
    }
    return os.str();
}

inline std::vector<SteadyState> parse_steady_states_csv(const std::string& text) {
    std::vector<SteadyState> out;
    for (auto& r : csv_rows(text)) {
        if (r.size() != 8) throw ValidationError("steady-state row needs 8 columns");
        SteadyState s;
        s.E_star = to_double(r[0]);
        s.M_star = to_double(r[1]);
        s.I_star = to_double(r[2]);
        s.tauM_star = to_double(r[3]);
        s.tauI_star = to_double(r[4]);
        s.gE_slope = to_double(r[5]);
        if (r[6] != "unknown") s.unstable_count = std::stoi(r[6]);
        s.tangency = r[7] == "1";
        out.push_back(s);
    }
    return out;
}

inline std::string roots_csv(const std::vector<CharacteristicRoot>& roots) {
    std::ostringstream os;
    os << "re,im,residual,multiplicity_hint\n";
    for (auto& r : roots)
        os << fmt17(r.lambda.real()) << ',' << fmt17(r.lambda.imag()) << ',' << fmt17(r.residual) << ','
           << r.multiplicity_hint << '\n';
    return os.str();
}

inline std::vector<CharacteristicRoot> parse_roots_csv(const std::string& text) {
    std::vector<CharacteristicRoot> out;
    for (auto& r : csv_rows(text)) {
        if (r.size() != 4) throw ValidationError("root row needs 4 columns");
        out.push_back({cplx(to_double(r[0]), to_double(r[1])), to_double(r[2]), std::stoi(r[3])});
    }
    return out;
}

inline std::string branch_csv(const std::vector<DiagramBranch>& branches) {
    std::ostringstream os;
    os << "branch,param,E_star,M_star,I_star,tauM_star,tauI_star,gE_slope,unstable_count,tangent_p,tangent_E\n";
    for (std::size_t b = 0; b < branches.size(); ++b)
        for (auto& pt : branches[b].branch.points) {
            const auto& s = pt.state;
            os << b << ',' << fmt17(pt.param) << ',' << fmt17(s.E_star) << ',' << fmt17(s.M_star) << ','
               << fmt17(s.I_star) << ',' << fmt17(s.tauM_star) << ',' << fmt17(s.tauI_star) << ','
               << fmt17(s.gE_slope) << ',' << pt.unstable_count << ',' << fmt17(pt.tangent_p) << ','
               << fmt17(pt.tangent_E) << '\n';
        }
    return os.str();
}

inline std::vector<DiagramBranch> parse_branch_csv(const std::string& text) {
    std::vector<DiagramBranch> out;
    for (auto& r : csv_rows(text)) {
        if (r.size() != 11) throw ValidationError("branch row needs 11 columns");
        std::size_t b = std::stoul(r[0]);
        if (b >= out.size()) out.resize(b + 1);
        BranchPoint pt;
        pt.param = to_double(r[1]);
        pt.state.E_star = to_double(r[2]);
        pt.state.M_star = to_double(r[3]);
        pt.state.I_star = to_double(r[4]);
        pt.state.tauM_star = to_double(r[5]);
        pt.state.tauI_star = to_double(r[6]);
        pt.state.gE_slope = to_double(r[7]);
        pt.unstable_count = std::stoi(r[8]);
        pt.state.unstable_count = pt.unstable_count;
        pt.tangent_p = to_double(r[9]);
        pt.tangent_E = to_double(r[10]);
        out[b].branch.points.push_back(pt);
    }
    return out;
}

inline std::string events_csv(const std::vector<DiagramBranch>& branches) {
    std::ostringstream os;
    os << "branch,type,param,E_star,period,count_before,count_after,position\n";
    for (std::size_t b = 0; b < branches.size(); ++b)
        for (auto& e : branches[b].events)
            os << b << ',' << to_string(e.type) << ',' << fmt17(e.param) << ',' << fmt17(e.E_star) << ','
               << fmt17(e.period) << ',' << e.count_before << ',' << e.count_after << ',' << fmt17(e.position) << '\n';
    return os.str();
}

inline std::vector<std::pair<std::size_t, BifurcationEvent>> parse_events_csv(const std::string& text) {
    std::vector<std::pair<std::size_t, BifurcationEvent>> out;
    for (auto& r : csv_rows(text)) {
        if (r.size() != 8) throw ValidationError("event row needs 8 columns");
        BifurcationEvent e;
        if (r[1] == "Fold") e.type = EventType::Fold;
        else if (r[1] == "Hopf") e.type = EventType::Hopf;
        else throw ValidationError("unknown event type '" + r[1] + "'");
        e.param = to_double(r[2]);
        e.E_star = to_double(r[3]);
        e.period = to_double(r[4]);
        e.count_before = std::stoi(r[5]);
        e.count_after = std::stoi(r[6]);
        e.position = to_double(r[7]);
        out.push_back({std::stoul(r[0]), e});
    }
    return out;
}

// ---------------------------------------------------------------- trajectories

inline std::string trajectory_csv(const HistorySegment& traj, bool with_tauI) {
    std::ostringstream os;
    os << "t,M,I,E,tauM" << (with_tauI ? ",tauI" : "") << '\n';
    for (auto& r : traj.records()) {
        os << fmt17(r.t) << ',' << fmt17(r.y[0]) << ',' << fmt17(r.y[1]) << ',' << fmt17(r.y[2]) << ',' << fmt17(r.y[3]);
        if (with_tauI) os << ',' << fmt17(r.y[4]);
        os << '\n';
    }
    return os.str();
}

struct TrajectorySample {
    double t = 0;
    StateVector x;
    double tauM = 0, tauI = 0;
};

inline std::vector<TrajectorySample> parse_trajectory_csv(const std::string& text) {
    std::vector<std::string> cols;
    auto rows = csv_rows(text, &cols);
    if (cols.size() < 4 || cols[0] != "t" || cols[1] != "M" || cols[2] != "I" || cols[3] != "E")
        throw ValidationError("trajectory csv must start with columns t,M,I,E");
    std::vector<TrajectorySample> out;
    for (auto& r : rows) {
        if (r.size() != cols.size()) throw ValidationError("trajectory row has " + std::to_string(r.size()) + " columns, expected " + std::to_string(cols.size()));
        TrajectorySample s{to_double(r[0]), {to_double(r[1]), to_double(r[2]), to_double(r[3])}};
        if (cols.size() > 4) s.tauM = to_double(r[4]);
        if (cols.size() > 5) s.tauI = to_double(r[5]);
        if (!out.empty() && !(s.t > out.back().t)) throw ValidationError("trajectory times must increase");
        out.push_back(s);
    }
    if (out.empty()) throw ValidationError("trajectory csv has no rows");
    return out;
}

// "const:M,I,E" or a csv file (t,M,I,E...) read as a piecewise-linear history ending at its last time
inline History parse_history(const std::string& spec) {
    if (spec.rfind("const:", 0) == 0) {
        auto parts = split(spec.substr(6));
        if (parts.size() != 3) throw ValidationError("history 'const:' needs three values M,I,E");
        StateVector x{to_double(parts[0]), to_double(parts[1]), to_double(parts[2])};
        if (!(x.M > 0 && x.I > 0 && x.E > 0)) throw ValidationError("history values must be > 0");
        return constant_history(x);
    }
    auto samples = std::make_shared<std::vector<TrajectorySample>>(parse_trajectory_csv(read_file(spec)));
    for (auto& s : *samples)
        if (!(s.x.M > 0 && s.x.I > 0 && s.x.E > 0)) throw ValidationError(spec + ": history values must be > 0");
    if (samples->size() == 1) return constant_history(samples->front().x, samples->front().t);
    History h = function_history(
        [samples](double t) {
            const auto& v = *samples;
            if (t <= v.front().t) return v.front().x;
            if (t >= v.back().t) return v.back().x;
            auto j = std::upper_bound(v.begin(), v.end(), t, [](double x, const TrajectorySample& r) { return x < r.t; });
            const auto& a = *(j - 1);
            const auto& b = *j;
            double w = (t - a.t) / (b.t - a.t);
            return StateVector{a.x.M + w * (b.x.M - a.x.M), a.x.I + w * (b.x.I - a.x.I), a.x.E + w * (b.x.E - a.x.E)};
        },
        samples->back().t);
    for (auto& s : *samples) h.breakpoints.push_back(s.t);
    return h;
}

inline const char* to_string(OrbitStatus s) {
    switch (s) {
        case OrbitStatus::Periodic: return "periodic";
        case OrbitStatus::NotPeriodic: return "not-periodic";
        default: return "not-converged";
    }
}

inline std::string orbit_sweep_csv(const std::string& param_name, const OrbitSweep& sweep) {
    std::ostringstream os;
    os << param_name << ",period,M_max,M_min,I_max,I_min,E_max,E_min,one_norm,return_error\n";
    for (auto& pt : sweep.points) {
        const auto& o = pt.orbit;
        os << fmt17(pt.value) << ',' << fmt17(o.period);
        for (int q = 0; q < 3; ++q) os << ',' << fmt17(o.amp_max[q]) << ',' << fmt17(o.amp_min[q]);
        os << ',' << fmt17(o.one_norm) << ',' << fmt17(o.return_error) << '\n';
    }
    if (sweep.lost) os << "# orbit lost between " << fmt17(sweep.lost_lo) << " and " << fmt17(sweep.lost_hi) << '\n';
    return os.str();
}

// ---------------------------------------------------------------- svg

struct OrbitCurvePoint {
    double param = 0, E_max = 0, E_min = 0, one_norm = 0;
};

inline std::string diagram_svg(const Diagram& d, const std::vector<OrbitCurvePoint>& orbits = {},
                               bool one_norm = false) {
    const double W = 960, H = 640, L = 80, R = 30, T = 30, B = 70;
    double pmin = d.range.lo, pmax = d.range.hi, emin = 0, emax = 0;
    for (auto& b : d.branches)
        for (auto& pt : b.branch.points) emax = std::max(emax, pt.state.E_star);
    for (auto& o : orbits) emax = std::max(emax, one_norm ? o.one_norm : o.E_max);
    if (emax <= emin) emax = emin + 1;
    emax *= 1.05;
    auto X = [&](double p) { return L + (p - pmin) / (pmax - pmin) * (W - L - R); };
    auto Y = [&](double e) { return H - B - (e - emin) / (emax - emin) * (H - T - B); };
    auto color = [](int count) {
        if (count == 0) return "#1a9850";
        if (count == 1) return "#000000";
        return "#969696";
    };
    std::ostringstream os;
    os << std::setprecision(6);
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"960\" height=\"640\" viewBox=\"0 0 960 640\">\n";
    os << "<rect width=\"960\" height=\"640\" fill=\"white\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        double p = pmin + (pmax - pmin) * i / 5, e = emin + (emax - emin) * i / 5;
        os << "<text x=\"" << X(p) << "\" y=\"" << H - B + 20 << "\" font-size=\"12\" text-anchor=\"middle\">" << p << "</text>\n";
        os << "<text x=\"" << L - 8 << "\" y=\"" << Y(e) + 4 << "\" font-size=\"12\" text-anchor=\"end\">" << e << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 20 << "\" font-size=\"16\" text-anchor=\"middle\">"
       << d.param_name << "</text>\n";
    os << "<text x=\"20\" y=\"" << (T + H - B) / 2 << "\" font-size=\"16\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
       << (T + H - B) / 2 << ")\">" << (one_norm ? "E (1-norm)" : "E") << "</text>\n";
    for (auto& b : d.branches) {
        const auto& pts = b.branch.points;
        std::size_t i = 0;
        while (i + 1 < pts.size()) {
            int c = pts[i].unstable_count;
            std::size_t j = i;
            while (j + 1 < pts.size() && pts[j + 1].unstable_count == c) ++j;
            std::size_t end = std::min(j + 1, pts.size() - 1);
            os << "<polyline fill=\"none\" stroke=\"" << color(c) << "\" stroke-width=\"2\"";
            if (c != 0) os << " stroke-dasharray=\"6,4\"";
            os << " points=\"";
            for (std::size_t k = i; k <= end; ++k) os << X(pts[k].param) << ',' << Y(pts[k].state.E_star) << ' ';
            os << "\"/>\n";
            i = end;
        }
        for (auto& e : b.events) {
            if (e.type == EventType::Fold)
                os << "<rect x=\"" << X(e.param) - 4 << "\" y=\"" << Y(e.E_star) - 4
                   << "\" width=\"8\" height=\"8\" fill=\"#d73027\"/>\n";
            else
                os << "<circle cx=\"" << X(e.param) << "\" cy=\"" << Y(e.E_star) << "\" r=\"5\" fill=\"#4575b4\"/>\n";
        }
    }
    if (!orbits.empty()) {
        auto curve = [&](auto get) {
            os << "<polyline fill=\"none\" stroke=\"#1a9850\" stroke-width=\"2\" points=\"";
            for (auto& o : orbits) os << X(o.param) << ',' << Y(get(o)) << ' ';
            os << "\"/>\n";
        };
        if (one_norm) {
            curve([](const OrbitCurvePoint& o) { return o.one_norm; });
        } else {
            curve([](const OrbitCurvePoint& o) { return o.E_max; });
            curve([](const OrbitCurvePoint& o) { return o.E_min; });
        }
    }
    os << "</svg>\n";
    return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path.string() + "'");
    out << content;
}

}  // namespace operon
