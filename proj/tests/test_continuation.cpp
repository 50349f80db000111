#include "catch_amalgamated.hpp"

#include <operon/continuation.hpp>
#include <operon/io.hpp>

using namespace operon;
using Catch::Approx;

namespace {

std::vector<BifurcationEvent> all_events(const Diagram& d) {
    std::vector<BifurcationEvent> out;
    for (auto& b : d.branches) out.insert(out.end(), b.events.begin(), b.events.end());
    return out;
}

const Diagram& repressible_diagram() {
    static Diagram d = diagram(load_fixture("repressible_table3"), "vM_min", {0.005, 0.6}, SpectrumMode::discretized(32));
    return d;
}

}  // namespace

TEST_CASE("fold events sit on a tangency of the reduction") {
    Reduction red(load_fixture("repressible_table3"), "vM_min", SpectrumMode::discretized(32));
    int folds = 0;
    for (auto& e : all_events(repressible_diagram())) {
        if (e.type != EventType::Fold) continue;
        ++folds;
        auto p = red.at(e.param);
        double gbar = p.gbar_M * p.gbar_I * p.gbar_E;
        CHECK(std::abs(g_E_slope(p, e.E_star)) <= 1e-8);
        CHECK(std::abs(g_E(p, e.E_star)) <= 1e-10);
        auto c = make_context(p, make_steady_state(p, e.E_star), red.mode());
        CHECK(std::abs(delta(c, 0.0)) <= 1e-8 * gbar);
        CHECK(std::abs(e.count_after - e.count_before) == 1);
    }
    CHECK(folds >= 1);
}

TEST_CASE("Hopf events carry a root pair on the imaginary axis") {
    Reduction red(load_fixture("repressible_table3"), "vM_min", SpectrumMode::discretized(32));
    int hopfs = 0;
    for (auto& e : all_events(repressible_diagram())) {
        if (e.type != EventType::Hopf) continue;
        ++hopfs;
        auto p = red.at(e.param);
        auto c = make_context(p, make_steady_state(p, e.E_star), red.mode());
        double w = 2 * std::numbers::pi / e.period;
        CHECK(std::abs(delta(c, cplx(0, w))) <= 1e-8 * detail::delta_scale(c, cplx(0, w)));
        CHECK(std::abs(e.count_after - e.count_before) == 2);
    }
    CHECK(hopfs >= 2);
}

TEST_CASE("tracing the branch backwards finds the same events") {
    auto base = load_fixture("inducible_table6");
    Reduction red(base, "vM_min", SpectrumMode::discretized(32));
    ParamRange range{0.05, 0.5};
    auto lo = find_steady_states(red.at(0.05));
    REQUIRE(!lo.empty());
    auto fwd = trace_branch(red, 0.05, lo.back().E_star, range, +1);
    REQUIRE(fwd.status == BranchStatus::RangeBoundary);
    const auto& end = fwd.points.back();
    auto bwd = trace_branch(red, end.param, end.state.E_star, range, -1);
    auto ef = detect_events(red, fwd.points);
    auto eb = detect_events(red, bwd.points);
    REQUIRE(ef.size() == eb.size());
    REQUIRE(!ef.empty());
    for (std::size_t i = 0; i < ef.size(); ++i) {
        const auto& b = eb[eb.size() - 1 - i];
        CHECK(ef[i].type == b.type);
        CHECK(std::abs(ef[i].param - b.param) <= 1e-5);
        CHECK(std::abs(ef[i].E_star - b.E_star) <= 1e-5);
    }
}

TEST_CASE("branch points satisfy the reduction and the count is consistent") {
    const auto& d = repressible_diagram();
    REQUIRE(!d.branches.empty());
    Reduction red(load_fixture("repressible_table3"), "vM_min", SpectrumMode::discretized(32));
    for (auto& b : d.branches)
        for (std::size_t i = 0; i < b.branch.points.size(); i += 17) {
            const auto& q = b.branch.points[i];
            CHECK(std::abs(red.g(q.param, q.state.E_star)) <= 1e-10 * (1 + loop_gain(red.at(q.param))));
            CHECK(q.unstable_count >= 0);
        }
}

TEST_CASE("event table formatting") {
    CHECK(bifurcation_table({}) == "type,param,period,transition,E_star\n");
    BifurcationEvent f;
    f.param = 0.5;
    f.E_star = 1.25;
    f.count_before = 0;
    f.count_after = 1;
    CHECK(bifurcation_table({f}) == "type,param,period,transition,E_star\nFold,0.5,,0->1,1.25\n");
}

TEST_CASE("degenerate ranges and unknown parameters are rejected") {
    OperonParameters p;
    CHECK_THROWS_AS(diagram(p, "vM_min", {0.3, 0.3}), ValidationError);
    CHECK_THROWS_AS(Reduction(p, "nope"), ValidationError);
}
