#include "relax/bptt.hpp"

#include "relax/train.hpp"

namespace relax {

Gradients Gradients::zeros_like(const ModelParams& params) {
    Gradients g;
    g.w_xh = Matrix(params.w_xh.rows, params.w_xh.cols);
    g.b_x = Vector(params.b_x.size());
    g.slots.resize(params.slots.size());
    for (std::size_t p = 0; p < params.slots.size(); ++p) {
        g.slots[p].w_hh = Matrix(params.slots[p].w_hh.rows, params.slots[p].w_hh.cols);
        g.slots[p].b_h = Vector(params.slots[p].b_h.size());
    }
    g.w_hy = Matrix(params.w_hy.rows, params.w_hy.cols);
    g.b_y = Vector(params.b_y.size());
    if (params.embedding) {
        g.embedding = Matrix(params.embedding->rows, params.embedding->cols);
    }
    return g;
}

void Gradients::scale(double s) {
    alpha *= s;
    gamma_p *= s;
    gamma_nl *= s;
    for (double& d : w_xh.data) d *= s;
    for (double& d : b_x.data) d *= s;
    for (auto& slot : slots) {
        for (double& d : slot.w_hh.data) d *= s;
        for (double& d : slot.b_h.data) d *= s;
    }
    for (double& d : w_hy.data) d *= s;
    for (double& d : b_y.data) d *= s;
    if (embedding) {
        for (double& d : embedding->data) d *= s;
    }
}

void Gradients::clear() {
    alpha = 0.0;
    gamma_p = 0.0;
    gamma_nl = 0.0;
    w_xh.fill(0.0);
    b_x.fill(0.0);
    for (auto& slot : slots) {
        slot.w_hh.fill(0.0);
        slot.b_h.fill(0.0);
    }
    w_hy.fill(0.0);
    b_y.fill(0.0);
    if (embedding) embedding->fill(0.0);
}

void Gradients::add(const Gradients& other) {
    alpha += other.alpha;
    gamma_p += other.gamma_p;
    gamma_nl += other.gamma_nl;
    for (std::size_t i = 0; i < w_xh.size(); ++i) w_xh.data[i] += other.w_xh.data[i];
    for (std::size_t i = 0; i < b_x.size(); ++i) b_x[i] += other.b_x[i];
    for (std::size_t p = 0; p < slots.size(); ++p) {
        for (std::size_t i = 0; i < slots[p].w_hh.size(); ++i) {
            slots[p].w_hh.data[i] += other.slots[p].w_hh.data[i];
        }
        for (std::size_t i = 0; i < slots[p].b_h.size(); ++i) {
            slots[p].b_h[i] += other.slots[p].b_h[i];
        }
    }
    for (std::size_t i = 0; i < w_hy.size(); ++i) w_hy.data[i] += other.w_hy.data[i];
    for (std::size_t i = 0; i < b_y.size(); ++i) b_y[i] += other.b_y[i];
    if (embedding && other.embedding) {
        for (std::size_t i = 0; i < embedding->size(); ++i) {
            embedding->data[i] += other.embedding->data[i];
        }
    }
}

namespace {

template <typename ViewT, typename ParamsT>
std::vector<ViewT> param_views(ParamsT& p) {
    std::vector<ViewT> v;
    v.push_back({"alpha", &p.alpha, 1});
    v.push_back({"w_xh", p.w_xh.data.data(), p.w_xh.size()});
    v.push_back({"b_x", p.b_x.data.data(), p.b_x.size()});
    for (std::size_t i = 0; i < p.slots.size(); ++i) {
        auto& s = p.slots[i];
        v.push_back({"w_hh[" + std::to_string(i) + "]", s.w_hh.data.data(), s.w_hh.size()});
        v.push_back({"b_h[" + std::to_string(i) + "]", s.b_h.data.data(), s.b_h.size()});
    }
    v.push_back({"w_hy", p.w_hy.data.data(), p.w_hy.size()});
    v.push_back({"b_y", p.b_y.data.data(), p.b_y.size()});
    if (p.embedding) {
        v.push_back({"embedding", p.embedding->data.data(), p.embedding->size()});
    }
    return v;
}

} // namespace

std::vector<TensorView> tensor_views(ModelParams& params) {
    auto v = param_views<TensorView>(params);
    if (params.osc) {
        v.push_back({"gamma_p", &params.osc->gamma_p, 1});
        v.push_back({"gamma_nl", &params.osc->gamma_nl, 1});
    }
    return v;
}

std::vector<ConstTensorView> tensor_views(const ModelParams& params) {
    auto v = param_views<ConstTensorView>(params);
    if (params.osc) {
        v.push_back({"gamma_p", &params.osc->gamma_p, 1});
        v.push_back({"gamma_nl", &params.osc->gamma_nl, 1});
    }
    return v;
}

std::vector<TensorView> tensor_views(Gradients& grads, bool has_osc) {
    auto v = param_views<TensorView>(grads);
    if (has_osc) {
        v.push_back({"gamma_p", &grads.gamma_p, 1});
        v.push_back({"gamma_nl", &grads.gamma_nl, 1});
    }
    return v;
}

std::vector<ConstTensorView> tensor_views(const Gradients& grads, bool has_osc) {
    auto v = param_views<ConstTensorView>(grads);
    if (has_osc) {
        v.push_back({"gamma_p", &grads.gamma_p, 1});
        v.push_back({"gamma_nl", &grads.gamma_nl, 1});
    }
    return v;
}

void backward_into(const ForwardTrace& trace, const ModelParams& params,
                   const LayerSchedule& sched, const Vector& d_logits,
                   const DropoutMasks* masks, Gradients& acc) {
    const std::size_t h_dim = params.hidden_dim();
    if (trace.steps != sched.l_t || trace.h.size() != static_cast<std::size_t>(sched.l_t) + 1) {
        throw config_error("backward: trace does not match the schedule");
    }
    if (params.slots.size() != static_cast<std::size_t>(sched.l_w)) {
        throw config_error("backward: model does not match the schedule");
    }
    if (d_logits.size() != params.output_dim()) {
        throw config_error("backward: d_logits length mismatch");
    }
    if (!trace.tokens.empty() && !params.embedding) {
        throw config_error("backward: trace carries tokens but model has no embedding");
    }

    const bool osc = params.osc.has_value();
    const bool recurrent_term = !osc || params.osc->recurrent_drive;
    const bool want_dx = params.embedding && !trace.tokens.empty();

    // Readout: logits = W_hy (y_mask . h[L_T]) + b_y.
    const Vector& h_last = trace.h.back();
    Vector h_read = masks ? hadamard(h_last, masks->y_mask) : h_last;
    add_outer(acc.w_hy, d_logits, h_read);
    add_scaled(acc.b_y, d_logits);
    Vector d_h = matvec_transpose(params.w_hy, d_logits);
    if (masks) {
        for (std::size_t i = 0; i < h_dim; ++i) d_h[i] *= masks->y_mask[i];
    }

    // With a repeated input the per-step input-path contributions share one
    // x, so they are summed first and turned into a single outer product.
    Vector d_drive_sum;
    if (trace.repeated_input) d_drive_sum = Vector(h_dim);

    for (int t = sched.l_t - 1; t >= 0; --t) {
        const int p = sched.slot(t);
        const StepTrace& st = trace.step[static_cast<std::size_t>(t)];
        const Vector& h_t = trace.h[static_cast<std::size_t>(t)];
        const Vector& x_t = trace.x_used[trace.repeated_input ? 0 : static_cast<std::size_t>(t)];

        // d_h currently holds dL/dh[t+1]; the state mask applies first.
        Vector delta = d_h;
        if (masks) {
            for (std::size_t i = 0; i < h_dim; ++i) delta[i] *= masks->h_mask[i];
        }

        acc.alpha += dot(h_t, delta);

        Vector d_drive;
        Vector d_h_prev_chain; // oscillator path through h_c[0] = h[t]
        if (osc) {
            OscBackward ob = osc_backward(st.osc_chain, delta, *params.osc);
            d_drive = std::move(ob.d_drive);
            d_h_prev_chain = std::move(ob.d_h_prev);
            acc.gamma_p += ob.d_gamma_p;
            acc.gamma_nl += ob.d_gamma_nl;
        } else {
            d_drive = hadamard(delta, st.relu_gate);
        }

        add_scaled(acc.slots[static_cast<std::size_t>(p)].b_h, d_drive);
        if (recurrent_term) {
            add_outer(acc.slots[static_cast<std::size_t>(p)].w_hh, d_drive, h_t);
        }

        if (trace.repeated_input) {
            add_scaled(d_drive_sum, d_drive);
        } else {
            add_outer(acc.w_xh, d_drive, x_t);
            add_scaled(acc.b_x, d_drive);
            if (want_dx) {
                Vector d_x = matvec_transpose(params.w_xh, d_drive);
                if (masks) {
                    for (std::size_t i = 0; i < d_x.size(); ++i) d_x[i] *= masks->x_mask[i];
                }
                const int id = trace.tokens[static_cast<std::size_t>(t)];
                double* row = acc.embedding->row_ptr(static_cast<std::size_t>(id));
                for (std::size_t i = 0; i < d_x.size(); ++i) row[i] += d_x[i];
            }
        }

        // dL/dh[t] = alpha * delta (+ oscillator chain) (+ recurrent product).
        Vector d_h_next(h_dim);
        for (std::size_t i = 0; i < h_dim; ++i) {
            d_h_next[i] = params.alpha * delta[i];
        }
        if (osc) add_scaled(d_h_next, d_h_prev_chain);
        if (recurrent_term) {
            Vector through_w = matvec_transpose(params.slots[static_cast<std::size_t>(p)].w_hh,
                                                d_drive);
            add_scaled(d_h_next, through_w);
        }
        d_h = std::move(d_h_next);
    }

    if (trace.repeated_input) {
        add_outer(acc.w_xh, d_drive_sum, trace.x_used[0]);
        add_scaled(acc.b_x, d_drive_sum);
    }
}

Gradients backward(const ForwardTrace& trace, const ModelParams& params,
                   const LayerSchedule& sched, const Vector& d_logits,
                   const DropoutMasks* masks) {
    Gradients acc = Gradients::zeros_like(params);
    backward_into(trace, params, sched, d_logits, masks, acc);
    return acc;
}

LossAndGrad loss_and_grad(const ModelParams& params, const LayerSchedule& sched,
                          std::span<const TrainExample> batch, LossKind kind,
                          const DropoutRates& dropout, Rng* mask_rng) {
    if (batch.empty()) {
        throw config_error("loss_and_grad: empty batch");
    }
    (void)kind; // softmax cross-entropy is the only loss

    DropoutMasks masks;
    const bool use_masks = dropout.enabled();
    if (use_masks) {
        if (!mask_rng) {
            throw config_error("loss_and_grad: dropout enabled but no mask rng supplied");
        }
        masks = make_masks(*mask_rng, params.input_dim(), params.hidden_dim(), dropout);
    }

    // Each example's gradient lands in its own buffer before summation, so
    // the result is literally the mean of per-example gradients and a
    // duplicated example changes nothing.
    LossAndGrad out;
    out.grads = Gradients::zeros_like(params);
    Gradients per_example = Gradients::zeros_like(params);
    for (const TrainExample& ex : batch) {
        ForwardTrace trace = forward(params, sched, ex.input, use_masks ? &masks : nullptr);
        out.loss += cross_entropy(ex.target, softmax(trace.logits));
        Vector d_logits = softmax_xent_grad(trace.logits, ex.target);
        per_example.clear();
        backward_into(trace, params, sched, d_logits, use_masks ? &masks : nullptr, per_example);
        out.grads.add(per_example);
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    out.loss *= inv_n;
    out.grads.scale(inv_n);
    return out;
}

} // namespace relax
