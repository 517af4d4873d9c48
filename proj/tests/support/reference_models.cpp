#include "reference_models.hpp"

#include "relax/oscillator.hpp"

namespace relax::testing {

Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) {
                s += a(i, k) * b(k, j);
            }
            out(i, j) = s;
        }
    }
    return out;
}

namespace {

Vector plain_matvec(const Matrix& m, const Vector& v) {
    Vector out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < m.cols; ++k) {
            s += m(i, k) * v[k];
        }
        out[i] = s;
    }
    return out;
}

} // namespace

Vector reference_recurrence(const ModelParams& params, const LayerSchedule& sched,
                            const std::vector<Vector>& inputs, const DropoutMasks* masks,
                            const Vector* h0) {
    const std::size_t h_dim = params.hidden_dim();
    Vector h = h0 ? *h0 : Vector(h_dim);

    for (int t = 0; t < sched.l_t; ++t) {
        const int p = sched.slot(t);
        const Matrix& w_hh = params.slots[static_cast<std::size_t>(p)].w_hh;
        const Vector& b_h = params.slots[static_cast<std::size_t>(p)].b_h;

        Vector x = inputs[static_cast<std::size_t>(t)];
        if (masks) {
            for (std::size_t i = 0; i < x.size(); ++i) x[i] *= masks->x_mask[i];
        }

        Vector z = plain_matvec(params.w_xh, x);
        for (std::size_t i = 0; i < h_dim; ++i) z[i] += params.b_x[i];
        if (!params.osc || params.osc->recurrent_drive) {
            Vector r = plain_matvec(w_hh, h);
            for (std::size_t i = 0; i < h_dim; ++i) z[i] += r[i];
        }
        for (std::size_t i = 0; i < h_dim; ++i) z[i] += b_h[i];

        Vector act(h_dim);
        if (params.osc) {
            Vector hc = h;
            for (int k = 0; k < params.osc->eta; ++k) {
                Vector next(h_dim);
                for (std::size_t i = 0; i < h_dim; ++i) {
                    const double u = hc[i];
                    next[i] = u + params.osc->dt *
                                      ((params.osc->gamma_p - params.osc->gamma_nl * u * u) * u +
                                       z[i]);
                }
                hc = next;
            }
            act = hc;
        } else {
            for (std::size_t i = 0; i < h_dim; ++i) act[i] = z[i] > 0.0 ? z[i] : 0.0;
        }

        Vector h_next(h_dim);
        for (std::size_t i = 0; i < h_dim; ++i) {
            h_next[i] = params.alpha * h[i] + act[i];
        }
        if (masks) {
            for (std::size_t i = 0; i < h_dim; ++i) h_next[i] *= masks->h_mask[i];
        }
        h = h_next;
    }

    if (masks) {
        for (std::size_t i = 0; i < h_dim; ++i) h[i] *= masks->y_mask[i];
    }
    Vector logits = plain_matvec(params.w_hy, h);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += params.b_y[i];
    return logits;
}

Vector reference_stateless_rnn(const Matrix& w_xh, const Vector& b_x, const Matrix& w_hh,
                               const Vector& b_h, const Matrix& w_hy, const Vector& b_y,
                               double alpha, const std::vector<Vector>& inputs) {
    const std::size_t h_dim = w_xh.rows;
    Vector h(h_dim);
    for (const Vector& x : inputs) {
        Vector z = plain_matvec(w_xh, x);
        for (std::size_t i = 0; i < h_dim; ++i) z[i] += b_x[i];
        Vector r = plain_matvec(w_hh, h);
        for (std::size_t i = 0; i < h_dim; ++i) z[i] += r[i];
        for (std::size_t i = 0; i < h_dim; ++i) z[i] += b_h[i];
        Vector h_next(h_dim);
        for (std::size_t i = 0; i < h_dim; ++i) {
            h_next[i] = alpha * h[i] + (z[i] > 0.0 ? z[i] : 0.0);
        }
        h = h_next;
    }
    Vector logits = plain_matvec(w_hy, h);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += b_y[i];
    return logits;
}

Vector reference_feedforward_chain(const Matrix& w_xh, const Vector& b_x,
                                   const std::vector<Matrix>& w_layers,
                                   const std::vector<Vector>& b_layers, const Matrix& w_hy,
                                   const Vector& b_y, double alpha,
                                   const std::vector<Vector>& inputs) {
    const std::size_t h_dim = w_xh.rows;
    Vector h(h_dim);
    for (std::size_t l = 0; l < w_layers.size(); ++l) {
        Vector z = plain_matvec(w_xh, inputs[l]);
        for (std::size_t i = 0; i < h_dim; ++i) z[i] += b_x[i];
        Vector r = plain_matvec(w_layers[l], h);
        for (std::size_t i = 0; i < h_dim; ++i) z[i] += r[i];
        for (std::size_t i = 0; i < h_dim; ++i) z[i] += b_layers[l][i];
        Vector h_next(h_dim);
        for (std::size_t i = 0; i < h_dim; ++i) {
            h_next[i] = alpha * h[i] + (z[i] > 0.0 ? z[i] : 0.0);
        }
        h = h_next;
    }
    Vector logits = plain_matvec(w_hy, h);
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += b_y[i];
    return logits;
}

ModelParams expand_slots(const ModelParams& params, const LayerSchedule& sched) {
    ModelParams out = params;
    out.slots.clear();
    out.slots.reserve(static_cast<std::size_t>(sched.l_t));
    for (int t = 0; t < sched.l_t; ++t) {
        out.slots.push_back(params.slots[static_cast<std::size_t>(sched.slot(t))]);
    }
    return out;
}

} // namespace relax::testing
