#include <doctest.h>

#include <cmath>

#include "relax/oscillator.hpp"

using namespace relax;

TEST_CASE("osc_step: zero coefficients and zero drive is the identity") {
    OscConfig cfg;
    cfg.gamma_p = 0.0;
    cfg.gamma_nl = 0.0;
    Rng rng(3);
    Vector h = draw_uniform(rng, -1, 1, 8);
    Vector drive(8, 0.0);
    Vector out = osc_step(h, drive, cfg);
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(out[i] == h[i]);
}

TEST_CASE("osc_step: hand-computed cubic damping") {
    OscConfig cfg;
    cfg.gamma_p = 0.0;
    cfg.gamma_nl = 1.0;
    cfg.dt = 0.1;
    Vector h(1, 1.0);
    Vector drive(1, 0.0);
    Vector out = osc_step(h, drive, cfg);
    CHECK(out[0] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("osc_activation: linear closed form when gamma_nl = 0") {
    OscConfig cfg;
    cfg.gamma_nl = 0.0;
    cfg.gamma_p = 0.7;
    cfg.dt = 0.05;
    cfg.eta = 4;
    Rng rng(17);
    Vector h0 = draw_uniform(rng, -1, 1, 6);
    Vector drive = draw_uniform(rng, -1, 1, 6);
    Vector got = osc_activation(h0, drive, cfg);

    // h_eta = (1 + dt*gp)^eta h_0 + dt*drive*sum_{k<eta} (1 + dt*gp)^k
    const double growth = 1.0 + cfg.dt * cfg.gamma_p;
    double geom = 0.0;
    for (int k = 0; k < cfg.eta; ++k) geom += std::pow(growth, k);
    const double pow_eta = std::pow(growth, cfg.eta);
    for (std::size_t i = 0; i < h0.size(); ++i) {
        const double want = pow_eta * h0[i] + cfg.dt * drive[i] * geom;
        CHECK(std::fabs(got[i] - want) <= 1e-12);
    }
}

TEST_CASE("osc_activation: eta = 0 returns the previous state") {
    OscConfig cfg;
    cfg.eta = 0;
    Vector h(std::vector<double>{0.2, -0.4});
    Vector drive(std::vector<double>{5.0, 5.0});
    Vector out = osc_activation(h, drive, cfg);
    CHECK(out[0] == h[0]);
    CHECK(out[1] == h[1]);
}

TEST_CASE("osc_activation: eta = 3 composes three manual steps") {
    OscConfig cfg; // defaults: eta 3
    Rng rng(29);
    Vector h = draw_uniform(rng, -1, 1, 5);
    Vector drive = draw_uniform(rng, -1, 1, 5);
    Vector manual = osc_step(osc_step(osc_step(h, drive, cfg), drive, cfg), drive, cfg);
    Vector composed = osc_activation(h, drive, cfg);
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(composed[i] == manual[i]);
}

TEST_CASE("osc_backward: matches finite differences of the inner chain") {
    OscConfig cfg;
    cfg.gamma_p = 0.8;
    cfg.gamma_nl = 0.4;
    Rng rng(31);
    Vector h0 = draw_uniform(rng, -1, 1, 4);
    Vector drive = draw_uniform(rng, -1, 1, 4);
    Vector w = draw_uniform(rng, -1, 1, 4); // fixed cotangent

    auto scalar_out = [&](const Vector& h, const Vector& d, const OscConfig& c) {
        Vector out = osc_activation(h, d, c);
        return dot(w, out);
    };

    std::vector<Vector> chain = osc_activation_traced(h0, drive, cfg);
    OscBackward bw = osc_backward(chain, w, cfg);

    const double eps = 1e-6;
    for (std::size_t i = 0; i < h0.size(); ++i) {
        Vector hp = h0, hm = h0;
        hp[i] += eps;
        hm[i] -= eps;
        const double num = (scalar_out(hp, drive, cfg) - scalar_out(hm, drive, cfg)) / (2 * eps);
        CHECK(std::fabs(bw.d_h_prev[i] - num) <= 1e-7);

        Vector dp = drive, dm = drive;
        dp[i] += eps;
        dm[i] -= eps;
        const double numd = (scalar_out(h0, dp, cfg) - scalar_out(h0, dm, cfg)) / (2 * eps);
        CHECK(std::fabs(bw.d_drive[i] - numd) <= 1e-7);
    }
    OscConfig cp = cfg, cm = cfg;
    cp.gamma_p += eps;
    cm.gamma_p -= eps;
    CHECK(std::fabs(bw.d_gamma_p -
                    (scalar_out(h0, drive, cp) - scalar_out(h0, drive, cm)) / (2 * eps)) <= 1e-7);
    cp = cfg;
    cm = cfg;
    cp.gamma_nl += eps;
    cm.gamma_nl -= eps;
    CHECK(std::fabs(bw.d_gamma_nl -
                    (scalar_out(h0, drive, cp) - scalar_out(h0, drive, cm)) / (2 * eps)) <= 1e-7);
}

TEST_CASE("osc_activation: bounded on the default grid") {
    OscConfig cfg; // gamma_p 1.0, gamma_nl 0.5, dt 0.1, eta 3
    Rng rng(41);
    for (int trial = 0; trial < 1000; ++trial) {
        Vector h = draw_uniform(rng, -1, 1, 8);
        Vector drive = draw_uniform(rng, -1, 1, 8);
        Vector out = osc_activation(h, drive, cfg);
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(std::isfinite(out[i]));
            CHECK(std::fabs(out[i]) <= 3.0);
        }
    }
}
