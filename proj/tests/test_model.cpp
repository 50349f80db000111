#include "catch_amalgamated.hpp"

#include <operon/io.hpp>
#include <operon/model.hpp>

using namespace operon;
using Catch::Approx;

namespace {

double central(const std::function<double(double)>& f, double x, double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2 * h);
}

OperonParameters inducible() { return load_fixture("inducible_table3"); }

}  // namespace

TEST_CASE("fraction f endpoints") {
    OperonParameters rep;
    CHECK(fraction_f(rep, 0) == 1.0);
    CHECK(fraction_f(rep, 1e6) == Approx(rep.K1 / rep.K).epsilon(1e-12));
    auto ind = inducible();
    CHECK(fraction_f(ind, 0) == Approx(1 / ind.K));
    CHECK(fraction_f(ind, 1e6) == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fraction f derivative against central differences") {
    for (auto p : {OperonParameters{}, inducible(), load_fixture("repressible_n15")}) {
        for (double E : {0.05, 0.3, 0.9, 1.0, 1.3, 2.5}) {
            double fd = central([&](double x) { return fraction_f(p, x); }, E);
            CHECK(fraction_f_prime(p, E) == Approx(fd).epsilon(1e-6).margin(1e-9));
        }
    }
}

TEST_CASE("velocity derivatives against central differences") {
    OperonParameters p;
    p.vI_min = 0.5;
    p.vI_max = 2.0;
    for (double x : {0.2, 0.8, 1.0, 1.1, 3.0}) {
        CHECK(velocity_vM_prime(p, x) ==
              Approx(central([&](double y) { return velocity_vM(p, y); }, x)).epsilon(1e-6).margin(1e-9));
        CHECK(velocity_vI_prime(p, x) ==
              Approx(central([&](double y) { return velocity_vI(p, y); }, x)).epsilon(1e-6).margin(1e-9));
    }
}

TEST_CASE("velocities stay between their bounds") {
    OperonParameters p;
    auto q = inducible();
    for (double E = 0; E < 5; E += 0.01) {
        double v = velocity_vM(p, E), w = velocity_vM(q, E);
        CHECK(v >= p.vM_min);
        CHECK(v <= p.vM_max);
        CHECK(w >= q.vM_min);
        CHECK(w <= q.vM_max);
    }
    CHECK(velocity_vM(p, 0.5) < velocity_vM(p, 1.5));
    CHECK(velocity_vM(q, 0.5) > velocity_vM(q, 1.5));
}

TEST_CASE("hill function does not overflow at extreme arguments") {
    auto p = load_fixture("repressible_m15n15");
    CHECK(std::isfinite(fraction_f(p, 1e300)));
    CHECK(std::isfinite(fraction_f_prime(p, 1e-300)));
    CHECK(velocity_vM(p, 1e300) == Approx(p.vM_max));
}

TEST_CASE("negative or non-finite arguments are domain errors") {
    OperonParameters p;
    CHECK_THROWS_AS(fraction_f(p, -1), DomainError);
    CHECK_THROWS_AS(velocity_vM(p, NAN), DomainError);
    CHECK_THROWS_AS(velocity_vI(p, -0.1), DomainError);
}

TEST_CASE("strict and relaxed validation tiers") {
    OperonParameters p;
    CHECK_NOTHROW(validate(p));
    p.vM_min = -0.01;
    CHECK_THROWS_AS(validate(p, Validation::Strict), ValidationError);
    CHECK_NOTHROW(validate(p, Validation::Relaxed));
    p.vM_min = 3;
    CHECK_THROWS_AS(validate(p, Validation::Strict), ValidationError);
    CHECK_NOTHROW(validate(p, Validation::Relaxed));
    OperonParameters q;
    q.K = 0.5;
    CHECK_THROWS_AS(validate(q, Validation::Relaxed), ValidationError);
    q = {};
    q.n = 1;
    CHECK_THROWS_AS(validate(q, Validation::Relaxed), ValidationError);
}

TEST_CASE("parameter access by name") {
    OperonParameters p;
    CHECK(parameter(p, "vM_min") == 0.01);
    auto q = with_parameter(p, "n", 7);
    CHECK(q.n == 7);
    CHECK_THROWS_AS(parameter(p, "nope"), ValidationError);
}

TEST_CASE("rhs vanishes at a steady state") {
    auto p = load_fixture("repressible_table3");
    for (auto& s : find_steady_states(p)) {
        auto dx = rhs(p, {s.M_star, s.I_star, s.E_star}, {s.tauM_star, s.tauI_star, s.E_star, s.M_star});
        CHECK(std::abs(dx.M) < 1e-10);
        CHECK(std::abs(dx.I) < 1e-10);
        CHECK(std::abs(dx.E) < 1e-10);
    }
}

TEST_CASE("rhs rejects a non-positive velocity") {
    auto p = load_fixture("repressible_table3");
    p.vM_min = -0.5;
    CHECK_THROWS_AS(rhs(p, {1, 1, 0.01}, {1, 1, 0.01, 1}), EvaluationError);
}
