#pragma once

#include "scmamba/batching.hpp"
#include "scmamba/datasets.hpp"
#include "scmamba/model.hpp"

#include <cmath>
#include <optional>

namespace scmamba {

enum class Metric { accuracy, roc_auc, mae };

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
    int max_epochs = 300;
    int patience = 50;
    int batch_size = 0;  // <= 0 means full batch
    unsigned seed = 0;
    int hops = 0;  // <= 0 means the model's block count
    int clique_ceiling = 25;
    std::optional<Task> task;              // default: the dataset's task
    std::optional<Metric> metric;          // default: accuracy / mae by task
    std::optional<bool> head_activation;   // default: on for classification
    ModelConfig model;                     // d_in / d_out filled from the dataset

    bool full_batch() const { return batch_size <= 0; }
};

void validate_config(const TrainConfig& cfg);

/// Flat key=value text; '#' starts a comment, unknown keys are rejected.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::string& path);

/// Deterministic 50/25/25 split (train takes the rounding remainder).
SplitMasks split_dataset(int n_nodes, unsigned seed);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
};

template <class T>
struct AdamState {
    std::vector<std::vector<T>> m, v;
    long step = 0;
};

/// Textbook Adam with bias correction; weight decay is folded into the
/// gradient (classic L2 form).
template <class T>
void adam_step(const std::vector<ParamView<T>>& params,
               const std::vector<ParamView<T>>& grads, AdamState<T>& state,
               const AdamConfig& cfg) {
    if (params.size() != grads.size()) {
        raise(ErrorKind::shape_mismatch, "adam_step: parameter/gradient tensor count mismatch");
    }
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t k = 0; k < params.size(); ++k) {
            state.m[k].assign(params[k].size, T(0));
            state.v[k].assign(params[k].size, T(0));
        }
    }
    ++state.step;
    const T bc1 = T(1) - static_cast<T>(std::pow(cfg.beta1, state.step));
    const T bc2 = T(1) - static_cast<T>(std::pow(cfg.beta2, state.step));
    const T b1 = static_cast<T>(cfg.beta1);
    const T b2 = static_cast<T>(cfg.beta2);
    const T lr = static_cast<T>(cfg.lr);
    const T eps = static_cast<T>(cfg.epsilon);
    const T wd = static_cast<T>(cfg.weight_decay);
    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].size != grads[k].size) {
            raise(ErrorKind::shape_mismatch, "adam_step: tensor size mismatch at " + params[k].name);
        }
        T* p = params[k].data;
        const T* g = grads[k].data;
        T* m = state.m[k].data();
        T* v = state.v[k].data();
        for (std::ptrdiff_t i = 0; i < params[k].size; ++i) {
            if (!std::isfinite(g[i])) {
                raise(ErrorKind::numeric,
                      "adam_step: non-finite gradient in " + params[k].name);
            }
            const T gi = g[i] + wd * p[i];
            m[i] = b1 * m[i] + (T(1) - b1) * gi;
            v[i] = b2 * v[i] + (T(1) - b2) * gi * gi;
            const T mhat = m[i] / bc1;
            const T vhat = v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Metrics

/// Fraction of rows whose argmax matches the label; ties resolve to the
/// lowest class index.
double accuracy(const MatD& logits, const std::vector<int>& labels,
                const std::vector<int>& rows);

/// Rank statistic over all positive/negative pairs, ties counted 0.5.
/// Throws when only one class is present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

double mean_absolute_error(const std::vector<double>& pred,
                           const std::vector<double>& target);

/// Metric dispatch over model outputs restricted to the given rows.
double evaluate_outputs(const MatD& outputs, const DatasetBundle& data, Metric metric,
                        const std::vector<int>& rows);

// ---------------------------------------------------------------------------
// Experiment driver

struct RunResult {
    unsigned seed = 0;
    int best_epoch = 0;
    double val_metric = 0;
    double test_metric = 0;
};

struct ExperimentReport {
    std::vector<RunResult> runs;
    double mean = 0;
    double stddev = 0;  // population standard deviation
};

struct TrainedRun {
    Model<float> best_model;
    RunResult result;
};

/// One training run: Adam with early stopping on the validation metric,
/// best-epoch parameters restored before the test evaluation.
TrainedRun train_single(const DatasetBundle& data, const TrainConfig& cfg, unsigned seed);

/// Trains n_seeds runs (seeds cfg.seed, cfg.seed+1, ...). When out_dir is
/// nonempty, writes results.tsv and one checkpoint per run there.
ExperimentReport run_experiment(const DatasetBundle& data, const TrainConfig& cfg,
                                int n_seeds, const std::string& out_dir = "");

void write_results_file(const std::string& path, const ExperimentReport& report);

}  // namespace scmamba
