#pragma once
#include <random>

#include <operon/model.hpp>

// strict-mode parameter sets spread over the shipped fixtures' ranges
inline operon::OperonParameters random_parameters(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto in = [&](double a, double b) { return a + (b - a) * u(rng); };
    operon::OperonParameters p;
    p.kind = u(rng) < 0.5 ? operon::OperonKind::Repressible : operon::OperonKind::Inducible;
    p.mu = in(0, 0.1);
    p.beta_M = in(0.5, 2);
    p.beta_I = in(0.5, 2);
    p.beta_E = in(0.5, 2);
    p.gbar_M = in(0.5, 2);
    p.gbar_I = in(0.5, 2);
    p.gbar_E = in(0.5, 2);
    p.K = in(1.5, 10);
    p.K1 = p.kind == operon::OperonKind::Repressible ? in(0, p.K - 0.2) : in(0, 3);
    p.n = in(2, 15);
    p.m = in(1, 15);
    p.E50 = in(0.5, 2);
    p.vM_max = in(0.5, 2);
    p.vM_min = in(0.02, 1) * p.vM_max;
    p.mI = in(1, 20);
    p.M50 = in(0.5, 2);
    p.vI_min = in(0.5, 1.5);
    p.vI_max = u(rng) < 0.5 ? p.vI_min : p.vI_min * in(1.1, 3);
    p.aM = in(0.5, 2);
    p.aI = in(0.5, 2);
    return p;
}
