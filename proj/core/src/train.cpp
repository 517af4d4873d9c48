#include "relax/train.hpp"

#include <cmath>
#include <numeric>

namespace relax {

double cross_entropy(int target, const Vector& probs, std::size_t* clamp_warnings) {
    if (target < 0 || static_cast<std::size_t>(target) >= probs.size()) {
        throw config_error("cross_entropy: target class " + std::to_string(target) +
                           " outside [0, " + std::to_string(probs.size()) + ")");
    }
    double p = probs[static_cast<std::size_t>(target)];
    if (p < 1e-12) {
        p = 1e-12;
        if (clamp_warnings) ++*clamp_warnings;
    }
    return -std::log(p);
}

Vector softmax_xent_grad(const Vector& logits, int target) {
    if (target < 0 || static_cast<std::size_t>(target) >= logits.size()) {
        throw config_error("softmax_xent_grad: target class out of range");
    }
    Vector g = softmax(logits);
    g[static_cast<std::size_t>(target)] -= 1.0;
    return g;
}

AdamState AdamState::init(const ModelParams& params, AdamHyper hyper) {
    AdamState s;
    s.m = Gradients::zeros_like(params);
    s.v = Gradients::zeros_like(params);
    s.t = 0;
    s.hyper = hyper;
    return s;
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state) {
    const bool has_osc = params.osc.has_value();
    auto p_views = tensor_views(params);
    auto g_views = tensor_views(grads, has_osc);
    auto m_views = tensor_views(state.m, has_osc);
    auto v_views = tensor_views(state.v, has_osc);
    if (p_views.size() != g_views.size()) {
        throw config_error("adam_step: gradient layout does not match the model");
    }

    state.t += 1;
    const AdamHyper& h = state.hyper;
    const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.t));

    for (std::size_t gi = 0; gi < p_views.size(); ++gi) {
        double* p = p_views[gi].data;
        const double* g = g_views[gi].data;
        double* m = m_views[gi].data;
        double* v = v_views[gi].data;
        const std::size_t n = p_views[gi].len;
        if (g_views[gi].len != n || m_views[gi].len != n || v_views[gi].len != n) {
            throw config_error("adam_step: tensor shape mismatch in " + p_views[gi].name);
        }
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
            v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
        }
    }
}

void clip_gradients(Gradients& grads, bool has_osc, double max_norm) {
    if (max_norm <= 0.0) return;
    auto views = tensor_views(grads, has_osc);
    double sq = 0.0;
    for (const auto& v : views) {
        for (std::size_t i = 0; i < v.len; ++i) sq += v.data[i] * v.data[i];
    }
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double s = max_norm / norm;
    for (auto& v : views) {
        for (std::size_t i = 0; i < v.len; ++i) v.data[i] *= s;
    }
}

Matrix kaiming_init(std::size_t rows, std::size_t cols, Rng& rng) {
    if (rows == 0 || cols == 0) {
        throw config_error("kaiming_init: empty matrix");
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(cols));
    Matrix m(rows, cols);
    Vector draws = draw_uniform(rng, -bound, bound, rows * cols);
    m.data = std::move(draws.data);
    return m;
}

void init_params(ModelParams& params, Rng& rng) {
    params.alpha = 1.0;
    params.w_xh = kaiming_init(params.w_xh.rows, params.w_xh.cols, rng);
    params.b_x.fill(0.0);
    for (auto& s : params.slots) {
        s.w_hh = kaiming_init(s.w_hh.rows, s.w_hh.cols, rng);
        s.b_h.fill(0.0);
    }
    params.w_hy = kaiming_init(params.w_hy.rows, params.w_hy.cols, rng);
    params.b_y.fill(0.0);
    if (params.embedding) {
        *params.embedding = kaiming_init(params.embedding->rows, params.embedding->cols, rng);
    }
}

DropoutMasks make_masks(Rng& rng, std::size_t x_dim, std::size_t h_dim,
                        const DropoutRates& rates) {
    auto one_mask = [&rng](std::size_t n, double keep) {
        if (keep <= 0.0 || keep > 1.0) {
            throw config_error("make_masks: keep probability must lie in (0, 1]");
        }
        Vector m = draw_bernoulli(rng, keep, n);
        const double s = 1.0 / keep;
        for (std::size_t i = 0; i < n; ++i) m[i] *= s;
        return m;
    };
    DropoutMasks masks;
    masks.x_mask = one_mask(x_dim, rates.keep_x);
    masks.h_mask = one_mask(h_dim, rates.keep_h);
    masks.y_mask = one_mask(h_dim, rates.keep_y);
    return masks;
}

EpochStats train_epoch(ModelParams& params, AdamState& state, const ExampleProvider& data,
                       const LayerSchedule& sched, const TrainConfig& cfg,
                       std::uint64_t epoch_seed) {
    const std::size_t n = data.size();
    if (n == 0) {
        throw config_error("train_epoch: empty dataset");
    }
    if (cfg.batch_size == 0) {
        throw config_error("train_epoch: batch size must be positive");
    }

    // Independent sub-streams: 0 shuffle, 1 dropout masks, 2 augmentation.
    Rng shuffle_rng(derive_seed(epoch_seed, 0));
    Rng mask_rng(derive_seed(epoch_seed, 1));
    const std::uint64_t aug_base = derive_seed(epoch_seed, 2);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = shuffle_rng.next_below(i);
        std::swap(order[i - 1], order[j]);
    }

    double loss_sum = 0.0;
    std::vector<TrainExample> batch;
    batch.reserve(cfg.batch_size);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
        const std::size_t end = std::min(n, start + cfg.batch_size);
        batch.clear();
        for (std::size_t k = start; k < end; ++k) {
            const std::size_t idx = order[k];
            batch.push_back(data.make(idx, derive_seed(aug_base, idx)));
        }
        LossAndGrad lg = loss_and_grad(params, sched, batch, LossKind::softmax_cross_entropy,
                                       cfg.dropout, &mask_rng);
        if (!std::isfinite(lg.loss)) {
            throw numeric_error("train_epoch: non-finite loss");
        }
        if (cfg.grad_clip > 0.0) {
            clip_gradients(lg.grads, params.osc.has_value(), cfg.grad_clip);
        }
        adam_step(params, lg.grads, state);
        loss_sum += lg.loss * static_cast<double>(end - start);
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(n);
    return stats;
}

EvalResult evaluate(const ModelParams& params, const ExampleProvider& data,
                    const LayerSchedule& sched) {
    const std::size_t n = data.size();
    if (n == 0) {
        throw config_error("evaluate: empty dataset");
    }
    EvalResult r;
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < n; ++i) {
        // Evaluation is augmentation-free; the stream argument is unused by
        // deterministic providers.
        TrainExample ex = data.make(i, 0);
        ForwardTrace trace = forward(params, sched, ex.input);
        r.loss += cross_entropy(ex.target, softmax(trace.logits), &r.clamp_warnings);
        std::size_t best = 0;
        for (std::size_t c = 1; c < trace.logits.size(); ++c) {
            if (trace.logits[c] > trace.logits[best]) best = c;
        }
        if (best != static_cast<std::size_t>(ex.target)) ++wrong;
    }
    r.loss /= static_cast<double>(n);
    r.error_rate = static_cast<double>(wrong) / static_cast<double>(n);
    return r;
}

} // namespace relax
