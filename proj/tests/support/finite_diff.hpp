#pragma once

// Central finite-difference gradient checking against the analytic
// reverse pass, over every trainable tensor group of a model.

#include <string>
#include <vector>

#include "relax/bptt.hpp"
#include "relax/model.hpp"

namespace relax::testing {

struct FdOptions {
    double step = 1e-5;
    double rtol = 1e-5;
    double atol = 1e-8;
};

struct FdReport {
    bool ok = true;
    std::size_t checked = 0;
    double worst_rel = 0.0;
    std::string failure; // first failing entry, empty when ok
};

/// Mean cross-entropy of softmax(logits) over the batch, with the given
/// fixed masks. This is the scalar whose gradient the check verifies.
double fd_loss(const ModelParams& params, const LayerSchedule& sched,
               const std::vector<TrainExample>& batch, const DropoutMasks* masks);

/// Compares backward()'s batch-mean gradients against central differences
/// of fd_loss for every entry of every parameter group. An entry passes
/// when |a - n| <= atol or the relative error is within rtol.
FdReport fd_check(ModelParams params, const LayerSchedule& sched,
                  const std::vector<TrainExample>& batch, const DropoutMasks* masks = nullptr,
                  const FdOptions& opt = {});

/// Halves the readout weights until max |logit| over the batch drops below
/// the bound. Randomly drawn recurrences can blow the state up enough to
/// saturate the softmax, which flattens the loss and blinds the numeric
/// differences; this keeps the check's scalar well conditioned.
void damp_readout(ModelParams& params, const LayerSchedule& sched,
                  const std::vector<TrainExample>& batch, const DropoutMasks* masks = nullptr,
                  double logit_bound = 15.0);

/// Scales the recurrence (input and hidden weights, biases, alpha) down
/// until the largest hidden-state magnitude over the batch stays within
/// the bound. The oscillator's Euler integration turns stiff outside its
/// basin, where finite differences stop approximating the derivative.
void damp_recurrence(ModelParams& params, const LayerSchedule& sched,
                     const std::vector<TrainExample>& batch,
                     const DropoutMasks* masks = nullptr, double state_bound = 2.0);

} // namespace relax::testing
