#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relax/model.hpp"

namespace relax {

/// Mirror of every trainable tensor in ModelParams. Slots that appear at
/// several time steps accumulate the contributions of all of them.
struct Gradients {
    double alpha = 0.0;
    Matrix w_xh;
    Vector b_x;
    std::vector<HiddenSlot> slots;
    Matrix w_hy;
    Vector b_y;
    std::optional<Matrix> embedding;
    double gamma_p = 0.0;
    double gamma_nl = 0.0;

    static Gradients zeros_like(const ModelParams& params);
    void scale(double s);
    void clear();
    void add(const Gradients& other);
};

/// Named flat view over a parameter or gradient tensor, in declaration
/// order. Parameter and gradient views of matching models zip together;
/// the Adam update and the finite-difference harness both rely on that.
struct TensorView {
    std::string name;
    double* data;
    std::size_t len;
};

struct ConstTensorView {
    std::string name;
    const double* data;
    std::size_t len;
};

std::vector<TensorView> tensor_views(ModelParams& params);
std::vector<ConstTensorView> tensor_views(const ModelParams& params);
std::vector<TensorView> tensor_views(Gradients& grads, bool has_osc);
std::vector<ConstTensorView> tensor_views(const Gradients& grads, bool has_osc);

/// Exact reverse-mode derivatives through a recorded forward pass.
/// d_logits is the gradient of the scalar loss at the readout. Masks must
/// be the ones used by the forward pass that produced the trace.
Gradients backward(const ForwardTrace& trace, const ModelParams& params,
                   const LayerSchedule& sched, const Vector& d_logits,
                   const DropoutMasks* masks = nullptr);

/// Accumulating form: adds this pass's derivatives into acc.
void backward_into(const ForwardTrace& trace, const ModelParams& params,
                   const LayerSchedule& sched, const Vector& d_logits,
                   const DropoutMasks* masks, Gradients& acc);

struct TrainExample {
    InputSequence input;
    int target = 0;
};

enum class LossKind { softmax_cross_entropy };

/// Per-mask-kind keep probabilities. All 1 means dropout is off and no
/// mask rng is consumed, so keep=1 runs are bit-identical to disabled.
struct DropoutRates {
    double keep_x = 1.0;
    double keep_h = 1.0;
    double keep_y = 1.0;

    bool enabled() const { return keep_x < 1.0 || keep_h < 1.0 || keep_y < 1.0; }
};

struct LossAndGrad {
    double loss = 0.0;
    Gradients grads;
};

/// Mean loss and mean gradients over a mini-batch. When dropout is
/// enabled, one mask set is drawn from mask_rng and shared by every
/// example and time step of the batch.
LossAndGrad loss_and_grad(const ModelParams& params, const LayerSchedule& sched,
                          std::span<const TrainExample> batch, LossKind kind,
                          const DropoutRates& dropout = {}, Rng* mask_rng = nullptr);

} // namespace relax
