#include "relax/oscillator.hpp"

namespace relax {

Vector osc_step(const Vector& h_c, const Vector& drive, const OscConfig& cfg) {
    if (h_c.size() != drive.size()) {
        throw config_error("osc_step: state/drive length mismatch");
    }
    Vector out(h_c.size());
    for (std::size_t i = 0; i < h_c.size(); ++i) {
        const double u = h_c[i];
        out[i] = u + cfg.dt * ((cfg.gamma_p - cfg.gamma_nl * u * u) * u + drive[i]);
    }
    return out;
}

Vector osc_activation(const Vector& h_prev, const Vector& drive, const OscConfig& cfg) {
    Vector h = h_prev;
    for (int k = 0; k < cfg.eta; ++k) {
        h = osc_step(h, drive, cfg);
    }
    return h;
}

std::vector<Vector> osc_activation_traced(const Vector& h_prev, const Vector& drive,
                                          const OscConfig& cfg) {
    std::vector<Vector> chain;
    chain.reserve(static_cast<std::size_t>(cfg.eta) + 1);
    chain.push_back(h_prev);
    for (int k = 0; k < cfg.eta; ++k) {
        chain.push_back(osc_step(chain.back(), drive, cfg));
    }
    return chain;
}

OscBackward osc_backward(const std::vector<Vector>& chain, const Vector& d_out,
                         const OscConfig& cfg) {
    if (chain.size() != static_cast<std::size_t>(cfg.eta) + 1) {
        throw config_error("osc_backward: chain length does not match eta");
    }
    OscBackward bw;
    bw.d_drive = Vector(d_out.size());
    Vector g = d_out;
    for (int k = cfg.eta - 1; k >= 0; --k) {
        const Vector& u = chain[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double ui = u[i];
            const double gi = g[i];
            bw.d_drive[i] += cfg.dt * gi;
            bw.d_gamma_p += cfg.dt * gi * ui;
            bw.d_gamma_nl -= cfg.dt * gi * ui * ui * ui;
            // d h_c[k+1] / d h_c[k] = 1 + dt * (gamma_p - 3 gamma_nl u^2)
            g[i] = gi * (1.0 + cfg.dt * (cfg.gamma_p - 3.0 * cfg.gamma_nl * ui * ui));
        }
    }
    bw.d_h_prev = std::move(g);
    return bw;
}

} // namespace relax
