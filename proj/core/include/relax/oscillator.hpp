#pragma once

#include <vector>

#include "relax/linalg.hpp"

namespace relax {

/// Euler-integrated oscillator nonlinearity used in place of ReLU when a
/// network models oscillator-based hardware nodes. gamma_p and gamma_nl
/// are trainable; dt and eta are fixed integration settings.
struct OscConfig {
    double gamma_p = 1.0;
    double gamma_nl = 0.5;
    double dt = 0.1;
    int eta = 3;

    /// When false, the drive omits the recurrent W_hh term and consists of
    /// the input term and biases only.
    bool recurrent_drive = true;
};

/// One Euler step: h + dt * ((gamma_p - gamma_nl * h^2) * h + drive).
Vector osc_step(const Vector& h_c, const Vector& drive, const OscConfig& cfg);

/// eta Euler steps starting from h_prev with the drive held constant.
/// The caller composes the residual term on top of the result.
Vector osc_activation(const Vector& h_prev, const Vector& drive, const OscConfig& cfg);

/// Like osc_activation but records the whole inner chain h_c[0..eta]
/// (h_c[0] == h_prev) so the reverse pass can be run later.
std::vector<Vector> osc_activation_traced(const Vector& h_prev, const Vector& drive,
                                          const OscConfig& cfg);

/// Reverse-mode derivatives through the traced inner chain.
/// d_out is dL/d h_c[eta]. On return, d_h_prev is dL/d h_c[0], d_drive
/// accumulates dt-weighted sensitivities, and the scalar gradients are
/// summed over all inner steps.
struct OscBackward {
    Vector d_h_prev;
    Vector d_drive;
    double d_gamma_p = 0.0;
    double d_gamma_nl = 0.0;
};

OscBackward osc_backward(const std::vector<Vector>& chain, const Vector& d_out,
                         const OscConfig& cfg);

} // namespace relax
