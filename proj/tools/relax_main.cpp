// relax: train ReLaX-Net models, run sweeps, generate text, count
// parameters, and convert datasets into the native container.
//
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime
// numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relax/harness.hpp"

using namespace relax;

namespace {

struct CommonOpts {
    std::string task = "image";
    std::string data_dir;
    std::string preset;
    std::vector<int> l_w{1};
    std::vector<int> l_t{12};
    int hidden = 64;
    long long budget = 0;
    int epochs = -1;
    std::vector<std::uint64_t> seeds;
    std::size_t batch = 0;
    double lr = -1.0;
    std::string activation;
    double dropout = -1.0;
    double grad_clip = -1.0;
    int augment = -1;
    std::size_t max_train = 0;
    std::size_t max_test = 0;
    std::string variant_map;
    std::string out;
    std::string checkpoint;
};

void add_common_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--task", o.task, "Task kind: image | nlp");
    cmd->add_option("--data", o.data_dir, "Dataset directory")->required();
    cmd->add_option("--preset", o.preset,
                    "Start from a named preset (paper-svhn, paper-nlp, desk-image, desk-nlp)");
    cmd->add_option("--lw", o.l_w, "Distinct hidden parameter sets (list for sweeps)");
    cmd->add_option("--lt", o.l_t, "Time steps / layers (list for sweeps)");
    cmd->add_option("--hidden", o.hidden, "Hidden width H");
    cmd->add_option("--budget", o.budget,
                    "Hidden-parameter budget; derives H per l_w when positive");
    cmd->add_option("--epochs", o.epochs, "Training epochs");
    cmd->add_option("--seeds", o.seeds, "Seeds, one run per seed");
    cmd->add_option("--batch", o.batch, "Mini-batch size");
    cmd->add_option("--lr", o.lr, "Adam learning rate");
    cmd->add_option("--activation", o.activation, "relu | oscillator");
    cmd->add_option("--dropout", o.dropout,
                    "Variational dropout keep probability for all three masks");
    cmd->add_option("--clip", o.grad_clip, "Gradient max-norm (0 disables)");
    cmd->add_option("--augment", o.augment, "1 = train-time augmentation, 0 = off");
    cmd->add_option("--max-train", o.max_train, "Cap on training examples (0 = all)");
    cmd->add_option("--max-test", o.max_test, "Cap on test examples (0 = all)");
    cmd->add_option("--variant-map", o.variant_map,
                    "Variant-character map file (nlp tasks; default built-in)");
    cmd->add_option("--out", o.out, "Metrics output file (JSON lines)");
    cmd->add_option("--checkpoint", o.checkpoint, "Checkpoint path to write");
}

// Flags given on the command line override the preset; everything else
// keeps the preset's (or the struct's) defaults.
ExperimentConfig build_config(const CLI::App* cmd, const CommonOpts& o) {
    ExperimentConfig cfg;
    if (!o.preset.empty()) apply_preset(cfg, o.preset);
    const auto given = [cmd](const char* flag) { return cmd->count(flag) > 0; };

    if (given("--task") || o.preset.empty()) {
        if (o.task != "image" && o.task != "nlp") {
            throw config_error("unknown task: " + o.task);
        }
        cfg.task = o.task == "nlp" ? Task::nlp : Task::image;
    }
    cfg.data_dir = o.data_dir;
    if (given("--lw")) cfg.l_w_values = o.l_w;
    if (given("--lt")) cfg.l_t_values = o.l_t;
    if (given("--hidden")) cfg.hidden = o.hidden;
    if (given("--budget")) cfg.budget = o.budget;
    if (given("--epochs")) cfg.epochs = o.epochs;
    if (given("--seeds")) cfg.seeds = o.seeds;
    if (given("--batch")) cfg.batch_size = o.batch;
    if (given("--lr")) cfg.adam.lr = o.lr;
    if (given("--activation")) {
        if (o.activation != "relu" && o.activation != "oscillator") {
            throw config_error("unknown activation: " + o.activation);
        }
        cfg.activation = o.activation == "relu" ? Activation::relu : Activation::oscillator;
    }
    if (given("--dropout")) cfg.dropout = {o.dropout, o.dropout, o.dropout};
    if (given("--clip")) cfg.grad_clip = o.grad_clip;
    if (given("--augment")) cfg.augment = o.augment != 0;
    if (given("--max-train")) cfg.max_train = o.max_train;
    if (given("--max-test")) cfg.max_test = o.max_test;
    cfg.variant_map_path = o.variant_map;
    cfg.out_path = o.out;
    cfg.checkpoint_path = o.checkpoint;
    return cfg;
}

void print_summaries(const SweepResult& res) {
    for (const auto& s : res.summaries) {
        std::printf("l_w=%d l_t=%d H=%d seeds=%d test_loss=%.4f+-%.4f test_error=%.4f+-%.4f\n",
                    s.l_w, s.l_t, s.hidden, s.seeds, s.test_loss_mean, s.test_loss_std,
                    s.test_error_mean, s.test_error_std);
    }
    for (const auto& r : res.records) {
        if (r.status != "ok") {
            std::printf("l_w=%d l_t=%d seed=%llu: %s\n", r.l_w, r.l_t,
                        static_cast<unsigned long long>(r.base_seed), r.status.c_str());
        }
    }
}

int run_train_or_sweep(const CLI::App* cmd, const CommonOpts& opts, bool sweep) {
    ExperimentConfig cfg = build_config(cmd, opts);
    TaskData data = load_task_data(cfg);
    SweepResult res;
    if (sweep) {
        res = run_sweep(cfg, data);
    } else {
        if (cfg.l_w_values.size() != 1 || cfg.l_t_values.size() != 1) {
            throw config_error("train runs a single cell; use `sweep` for lists");
        }
        const SweepCell cell = sweep_cells(cfg)[0];
        std::uint64_t seed = cfg.seeds.empty() ? 1 : cfg.seeds[0];
        res.records.push_back(run_training(cfg, data, cell, seed, 0));
    }
    if (!cfg.out_path.empty()) {
        MetricsFile mf;
        mf.records = res.records;
        mf.summaries = res.summaries;
        emit_metrics(mf, cfg.out_path);
        std::printf("metrics written to %s\n", cfg.out_path.c_str());
    }
    if (sweep) {
        print_summaries(res);
    } else {
        const MetricsRecord& r = res.records[0];
        std::printf("status=%s\n", r.status.c_str());
        for (const auto& row : r.rows) {
            std::printf("epoch %3d  train %.4f  val %.4f/%.4f  test %.4f/%.4f\n", row.epoch,
                        row.train_loss, row.val_loss, row.val_error, row.test_loss,
                        row.test_error);
        }
        if (r.status != "ok") return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ReLaX-Net trainer and experiment runner"};
    app.require_subcommand(1);

    CommonOpts train_opts;
    CLI::App* train_cmd = app.add_subcommand("train", "Train one configuration");
    add_common_flags(train_cmd, train_opts);

    CommonOpts sweep_opts;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run a cell grid with aggregates");
    add_common_flags(sweep_cmd, sweep_opts);

    // generate
    std::string gen_checkpoint, gen_corpus, gen_prompt = "to be, or not to be,";
    int gen_length = 200;
    double gen_temperature = 1.0;
    std::uint64_t gen_seed = 1;
    std::string gen_variant_map;
    CLI::App* gen_cmd = app.add_subcommand("generate", "Sample text from an NLP checkpoint");
    gen_cmd->add_option("--checkpoint", gen_checkpoint, "Model checkpoint")->required();
    gen_cmd->add_option("--data", gen_corpus, "Corpus file or directory (rebuilds the vocabulary)")
        ->required();
    gen_cmd->add_option("--prompt", gen_prompt, "Prompt text");
    gen_cmd->add_option("--length", gen_length, "Characters to generate");
    gen_cmd->add_option("--temperature", gen_temperature, "Softmax temperature; 0 = argmax");
    gen_cmd->add_option("--seed", gen_seed, "Sampling seed");
    gen_cmd->add_option("--variant-map", gen_variant_map,
                        "Variant-character map file (default built-in)");

    // count-params
    int cp_hidden = 64, cp_lw = 1;
    long long cp_budget = 0;
    std::size_t cp_input = 3072, cp_output = 10, cp_vocab = 0, cp_embed = 36;
    bool cp_osc = false;
    CLI::App* cp_cmd = app.add_subcommand("count-params", "Trainable parameter breakdown");
    cp_cmd->add_option("--hidden", cp_hidden, "Hidden width H");
    cp_cmd->add_option("--lw", cp_lw, "Distinct hidden parameter sets");
    cp_cmd->add_option("--budget", cp_budget, "Derive H from a hidden-parameter budget");
    cp_cmd->add_option("--input-dim", cp_input, "Input dimension X");
    cp_cmd->add_option("--output-dim", cp_output, "Output dimension Y");
    cp_cmd->add_option("--vocab", cp_vocab, "Vocabulary size (adds an embedding table)");
    cp_cmd->add_option("--embed-dim", cp_embed, "Embedding width E");
    cp_cmd->add_flag("--oscillator", cp_osc, "Count the oscillator scalars");

    // convert
    std::string cv_images, cv_labels, cv_body, cv_out;
    int cv_height = 32, cv_width = 32, cv_channels = 3;
    CLI::App* cv_cmd = app.add_subcommand(
        "convert", "Convert IDX pairs or raw label+pixel dumps into the RLXD container");
    cv_cmd->add_option("--images", cv_images, "IDX image file");
    cv_cmd->add_option("--labels", cv_labels, "IDX label file");
    cv_cmd->add_option("--body", cv_body,
                       "Headerless dump: per example one label byte then H*W*C pixel bytes");
    cv_cmd->add_option("--height", cv_height, "Image height (with --body)");
    cv_cmd->add_option("--width", cv_width, "Image width (with --body)");
    cv_cmd->add_option("--channels", cv_channels, "Image channels (with --body)");
    cv_cmd->add_option("--out", cv_out, "Output RLXD file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            return run_train_or_sweep(train_cmd, train_opts, false);
        }
        if (sweep_cmd->parsed()) {
            return run_train_or_sweep(sweep_cmd, sweep_opts, true);
        }
        if (gen_cmd->parsed()) {
            Checkpoint ck = load_checkpoint(gen_checkpoint);
            std::filesystem::path corpus_path(gen_corpus);
            if (std::filesystem::is_directory(corpus_path)) {
                corpus_path /= "corpus.txt";
            }
            const std::string raw = read_text_file(corpus_path.string());
            const VariantMap vm = gen_variant_map.empty() ? default_variant_map()
                                                          : load_variant_map(gen_variant_map);
            const Vocabulary vocab = build_vocab(preprocess_text(raw, vm));
            Rng rng(gen_seed);
            const std::string text =
                generate_text(ck.params, ck.sched, vocab, preprocess_text(gen_prompt, vm),
                              gen_length, rng, gen_temperature);
            std::printf("%s\n", text.c_str());
            return 0;
        }
        if (cp_cmd->parsed()) {
            const int hidden = cp_budget > 0 ? width_for_budget(cp_budget, cp_lw) : cp_hidden;
            ModelParams p = make_model(cp_vocab > 0 ? cp_embed : cp_input,
                                       static_cast<std::size_t>(hidden), cp_output,
                                       static_cast<std::size_t>(cp_lw), cp_vocab,
                                       cp_vocab > 0 ? cp_embed : 0);
            if (cp_osc) p.osc = OscConfig{};
            const ParamCounts c = count_all_params(p);
            if (cp_budget > 0) {
                std::printf("budget %lld with l_w=%d -> H=%d\n", cp_budget, cp_lw, hidden);
            }
            std::printf("input  %lld\nhidden %lld\noutput %lld\nother  %lld\ntotal  %lld\n",
                        c.input, c.hidden, c.output, c.other, c.total());
            return 0;
        }
        if (cv_cmd->parsed()) {
            ImageDataset ds;
            if (!cv_images.empty() || !cv_labels.empty()) {
                if (cv_images.empty() || cv_labels.empty()) {
                    throw config_error("convert: --images and --labels go together");
                }
                ds = load_idx(cv_images, cv_labels);
            } else if (!cv_body.empty()) {
                // Validate the body length against the declared dimensions.
                const auto size = std::filesystem::file_size(cv_body);
                const std::size_t record =
                    1 + static_cast<std::size_t>(cv_height) * cv_width * cv_channels;
                if (size % record != 0) {
                    throw data_error("convert: body size " + std::to_string(size) +
                                     " is not a multiple of the record size " +
                                     std::to_string(record));
                }
                std::ifstream is(cv_body, std::ios::binary);
                if (!is) throw data_error("convert: cannot open " + cv_body);
                ds.height = cv_height;
                ds.width = cv_width;
                ds.channels = cv_channels;
                const std::size_t count = size / record;
                std::vector<unsigned char> buf(record);
                for (std::size_t i = 0; i < count; ++i) {
                    if (!is.read(reinterpret_cast<char*>(buf.data()),
                                 static_cast<std::streamsize>(record))) {
                        throw data_error("convert: truncated body file");
                    }
                    ImageExample ex;
                    ex.label = buf[0];
                    ex.image = Image(cv_height, cv_width, cv_channels);
                    for (std::size_t p = 0; p + 1 < record; ++p) {
                        ex.image.px[p] = static_cast<double>(buf[p + 1]) / 255.0;
                    }
                    ds.examples.push_back(std::move(ex));
                }
                int max_label = -1;
                for (const auto& ex : ds.examples) max_label = std::max(max_label, ex.label);
                ds.num_classes = max_label + 1;
            } else {
                throw config_error("convert: give either an IDX pair or --body");
            }
            save_raw(cv_out, ds);
            std::printf("wrote %zu examples (%dx%dx%d) to %s\n", ds.size(), ds.height, ds.width,
                        ds.channels, cv_out.c_str());
            return 0;
        }
    } catch (const config_error& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 1;
    } catch (const data_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
