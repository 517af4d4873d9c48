#pragma once

#include <cstdint>
#include <span>

#include "relax/bptt.hpp"
#include "relax/model.hpp"

namespace relax {

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// -log(probs[target]). probs must come from softmax. A zero probability
/// is clamped to 1e-12; if clamp_warnings is given it counts those events.
double cross_entropy(int target, const Vector& probs, std::size_t* clamp_warnings = nullptr);

/// Fused, numerically stable gradient of cross_entropy(softmax(logits)):
/// softmax(logits) minus the one-hot target. Entries always sum to 0.
Vector softmax_xent_grad(const Vector& logits, int target);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamHyper {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Gradients m;
    Gradients v;
    long long t = 0;
    AdamHyper hyper;

    static AdamState init(const ModelParams& params, AdamHyper hyper = {});
};

/// One optimizer step: moment updates, bias correction with the
/// incremented step counter, then theta -= lr * m_hat / (sqrt(v_hat) + eps)
/// for every trainable entry.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state);

/// Optional global max-norm clip; a no-op when the norm is within bound.
void clip_gradients(Gradients& grads, bool has_osc, double max_norm);

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// Uniform in +-sqrt(6 / fan_in) with fan_in = cols.
Matrix kaiming_init(std::size_t rows, std::size_t cols, Rng& rng);

/// Kaiming-initializes every weight matrix (embedding included, fan-in =
/// embedding width), zeroes all biases, and sets alpha to exactly 1.0.
/// Oscillator scalars keep their configured starting values.
void init_params(ModelParams& params, Rng& rng);

// ---------------------------------------------------------------------------
// Dropout masks
// ---------------------------------------------------------------------------

/// Draws the three variational masks in a fixed order (input, hidden,
/// readout). Kept entries carry the inverted-dropout scale 1/keep_prob.
DropoutMasks make_masks(Rng& rng, std::size_t x_dim, std::size_t h_dim,
                        const DropoutRates& rates);

// ---------------------------------------------------------------------------
// Epoch loop
// ---------------------------------------------------------------------------

/// Produces training examples on demand. make() must be a pure function of
/// (index, aug_seed) so epochs can be replayed; providers with random
/// transforms draw only from the given per-example stream.
class ExampleProvider {
public:
    virtual ~ExampleProvider() = default;
    virtual std::size_t size() const = 0;
    virtual TrainExample make(std::size_t index, std::uint64_t aug_seed) const = 0;
};

struct TrainConfig {
    std::size_t batch_size = 64;
    DropoutRates dropout;
    double grad_clip = 0.0; // 0 = off
};

struct EpochStats {
    double train_loss = 0.0; // mean over all examples of the epoch
};

/// One full pass: shuffle with the epoch stream, then one Adam step per
/// mini-batch (the trailing partial batch included). Sub-streams for
/// shuffling, masks, and augmentation are derived independently from
/// epoch_seed, so dropout with keep=1 is bit-identical to dropout off.
EpochStats train_epoch(ModelParams& params, AdamState& state, const ExampleProvider& data,
                       const LayerSchedule& sched, const TrainConfig& cfg,
                       std::uint64_t epoch_seed);

struct EvalResult {
    double loss = 0.0;
    double error_rate = 0.0;
    std::size_t clamp_warnings = 0;
};

/// Mean cross-entropy and argmax error rate, dropout disabled. Argmax
/// ties break to the lowest index.
EvalResult evaluate(const ModelParams& params, const ExampleProvider& data,
                    const LayerSchedule& sched);

} // namespace relax
