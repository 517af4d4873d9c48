#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relax/data.hpp"
#include "relax/model.hpp"
#include "relax/train.hpp"

namespace relax {

enum class Task { image, nlp };
enum class Activation { relu, oscillator };

/// Declarative experiment description. A sweep runs the cross product of
/// l_w_values x l_t_values x seeds; infeasible cells (l_w > l_t) are
/// recorded as skipped. With budget > 0 the hidden width of each cell is
/// derived from the budget instead of the `hidden` field.
struct ExperimentConfig {
    Task task = Task::image;
    std::string data_dir;

    std::vector<int> l_w_values{1};
    std::vector<int> l_t_values{12};
    int hidden = 64;
    long long budget = 0;
    int embed_dim = 36;

    int epochs = 1;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::size_t batch_size = 64;
    AdamHyper adam;
    DropoutRates dropout;
    double grad_clip = 0.0;
    Activation activation = Activation::relu;
    OscConfig osc;
    bool augment = false;

    /// Evaluate on the test set every k epochs (0 = final epoch only).
    /// Validation is evaluated every epoch.
    int eval_test_every = 1;

    std::size_t max_train = 0; // 0 = use everything
    std::size_t max_test = 0;

    /// Optional variant-character map file for corpus preprocessing;
    /// empty uses the built-in default table.
    std::string variant_map_path;

    std::string out_path;
    std::string checkpoint_path;
};

/// Named presets. "paper-svhn" and "paper-nlp" pin the published protocol
/// (H=64/128, L_T=12, 900/200 epochs); the desk presets are scaled-down
/// counterparts that finish in minutes.
void apply_preset(ExperimentConfig& cfg, const std::string& name);
std::vector<std::string> preset_names();

struct SweepCell {
    int l_w = 1;
    int l_t = 1;
    int hidden = 1;
};

struct EpochRow {
    int epoch = 0;          // 0 is the initialization-time evaluation
    double train_loss = 0;  // NaN on the epoch-0 row
    double val_loss = 0;    // NaN when not evaluated
    double val_error = 0;
    double test_loss = 0;
    double test_error = 0;
};

struct MetricsRecord {
    std::string status = "ok"; // "ok" | "infeasible" | "failed: ..."
    Task task = Task::image;
    Activation activation = Activation::relu;
    int l_w = 1;
    int l_t = 1;
    int hidden = 1;
    long long budget = 0;
    int epochs = 0;
    std::size_t batch = 0;
    double lr = 0;
    DropoutRates dropout;
    bool augment = false;
    double grad_clip = 0.0;
    std::uint64_t base_seed = 0;
    std::uint64_t cell_seed = 0;
    ParamCounts params;
    std::vector<EpochRow> rows;
    double wall_clock_sec = 0;

    double final_test_loss() const;
    double final_test_error() const;
};

struct SweepSummary {
    int l_w = 1;
    int l_t = 1;
    int hidden = 1;
    int seeds = 0;
    double test_loss_mean = 0;
    double test_loss_std = 0; // population standard deviation
    double test_error_mean = 0;
    double test_error_std = 0;
};

struct SweepResult {
    std::vector<MetricsRecord> records;
    std::vector<SweepSummary> summaries;
};

/// Pre-loaded task inputs shared read-only by every cell of a sweep.
struct TaskData {
    Task task = Task::image;
    ImageDataset train_images;
    ImageDataset test_images;
    Vocabulary vocab;
    std::vector<int> train_tokens;
    std::vector<int> test_tokens;
};

TaskData make_image_task(ImageDataset train, ImageDataset test);

/// Preprocesses the corpus, builds the vocabulary with the 0.01% rate
/// threshold, tokenizes, and splits the stream 90/10 contiguously.
TaskData make_nlp_task(const std::string& raw_corpus,
                       const VariantMap& variants = default_variant_map());

/// Resolves conventional file names inside cfg.data_dir:
///   image: train.rlxd + test.rlxd, else the MNIST-style IDX quadruple
///          (train-images-idx3-ubyte, train-labels-idx1-ubyte,
///           t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte)
///   nlp:   corpus.txt
TaskData load_task_data(const ExperimentConfig& cfg);

/// One full train/eval cycle for a cell, deterministic given the seed.
/// replicate is the index of the seed within the sweep's seed list; the
/// run's stream seed is derive_seed(seed, l_w, l_t, replicate).
MetricsRecord run_training(const ExperimentConfig& cfg, const TaskData& data,
                           const SweepCell& cell, std::uint64_t seed,
                           std::size_t replicate = 0);

/// Every cell x seed, plus per-cell mean/std aggregates over seeds. One
/// failing cell is recorded and does not abort the sweep.
SweepResult run_sweep(const ExperimentConfig& cfg, const TaskData& data);

/// Derives the cell widths a sweep will use (budget mode included).
std::vector<SweepCell> sweep_cells(const ExperimentConfig& cfg);

/// Autoregressive sampling. Each step feeds the last l_t tokens,
/// left-padded with the placeholder, through the model and samples from
/// softmax(logits / temperature); temperature 0 takes the argmax.
/// Returns exactly `length` generated characters.
std::string generate_text(const ModelParams& params, const LayerSchedule& sched,
                          const Vocabulary& vocab, std::string_view prompt, int length,
                          Rng& rng, double temperature = 1.0);

// ---------------------------------------------------------------------------
// Metrics persistence: one self-describing JSON record per line with a
// stable field order; see docs/formats.md.
// ---------------------------------------------------------------------------

struct MetricsFile {
    std::vector<MetricsRecord> records;
    std::vector<SweepSummary> summaries;
};

void emit_metrics(const MetricsFile& metrics, const std::string& path);
MetricsFile load_metrics(const std::string& path);

std::string task_name(Task t);
std::string activation_name(Activation a);

} // namespace relax
