#pragma once

#include <string>
#include <vector>

#include "elberto/checkpoint.hpp"
#include "elberto/objectives.hpp"

namespace elberto::train {

using model::EncoderConfig;

struct TrainConfig {
    int epochs = 10;
    int batch_size = 4;
    double learning_rate = 1e-3;
    double warmup_fraction = 0.10;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    objectives::LossWeights weights;
    taskgen::GenerationConfig gen;  // enabled tasks and their knobs
    uint64_t seed = 1;
    bool regenerate_ssl_each_epoch = true;
    double clip_norm = 1.0;  // global-norm clipping; <= 0 disables
    std::string resume_from;

    void validate() const;
};

// Linear ramp 0 -> lr over ceil(warmup_fraction * total_steps) steps, then
// linear decay lr -> 0 at total_steps. Continuous, maximal at the boundary.
double lr_at(long long step, long long total_steps, const TrainConfig& config);

template <typename T>
struct OptimizerState {
    long long step = 0;
    objectives::FullModel<T> m, v;

    static OptimizerState shaped(const EncoderConfig& config) {
        OptimizerState s;
        s.m = objectives::FullModel<T>::shaped(config);
        s.v = objectives::FullModel<T>::shaped(config);
        return s;
    }
};

// Global-norm clip (when clip_norm > 0) followed by one bias-corrected Adam
// step over every tensor. Returns the pre-clip gradient norm.
template <typename T>
double adam_step(objectives::FullModel<T>& model, objectives::FullModel<T>& grads,
                 OptimizerState<T>& opt, double lr, const TrainConfig& config);

// Per-epoch batch composition: a seeded shuffle of [0, n) cut into
// batch_size chunks (last chunk may be short).
std::vector<std::vector<int>> make_batches(int n_examples, int batch_size, uint64_t epoch_seed);

struct EpochSummary {
    int epoch = 0;
    double mean_total_loss = 0.0;
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    long long steps_done = 0;
};

template <typename T>
struct TrainOutcome {
    objectives::FullModel<T> model;
    std::vector<EpochSummary> epochs;
    std::vector<double> step_total_losses;
    long long total_steps = 0;
    int steps_per_epoch = 0;
};

// Joint optimization over QA + enabled SSL streams. When out_dir is non-empty
// writes train_log.jsonl (one LossReport per step plus epoch summaries) and a
// checkpoint per epoch under checkpoint_epoch_<e>/ plus final/. Fully
// deterministic given config.seed.
template <typename T>
TrainOutcome<T> train(const std::vector<corpus::QaExample>& train_set,
                      const std::vector<corpus::QaExample>& valid_set,
                      const corpus::Vocabulary& vocab, const taskgen::AntonymLexicon& lexicon,
                      const EncoderConfig& enc_config, const TrainConfig& config,
                      const std::string& out_dir);

// QA accuracy of a model over a dataset, eval mode.
template <typename T>
double qa_accuracy(const objectives::FullModel<T>& model, const corpus::Vocabulary& vocab,
                   const std::vector<corpus::QaExample>& dataset);

struct AblationSpec {
    std::string name;
    bool crl = false, jp = false, bsop = false, mem = false, mlm = false;
};

// The 11-row layout of the task-combination study: baseline, each single
// task, the listed combinations, all five.
std::vector<AblationSpec> table5_rows();

struct AblationRow {
    AblationSpec spec;
    double val_accuracy = 0.0;
    double train_accuracy = 0.0;
};

struct AblationReport {
    std::vector<AblationRow> rows;
    uint64_t seed = 0;

    std::string to_json() const;
    std::string to_text() const;  // aligned plain-text table
};

template <typename T>
AblationReport ablate(const std::vector<corpus::QaExample>& train_set,
                      const std::vector<corpus::QaExample>& valid_set,
                      const corpus::Vocabulary& vocab, const taskgen::AntonymLexicon& lexicon,
                      const EncoderConfig& enc_config, const TrainConfig& base_config,
                      const std::vector<AblationSpec>& subsets);

}  // namespace elberto::train
