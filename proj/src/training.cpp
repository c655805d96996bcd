#include "scmamba/training.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace scmamba {

void validate_config(const TrainConfig& cfg) {
    if (cfg.lr <= 0) raise(ErrorKind::config, "config: lr must be > 0");
    if (cfg.patience > cfg.max_epochs) {
        raise(ErrorKind::config, "config: patience must be <= max_epochs");
    }
    if (cfg.max_epochs < 1) raise(ErrorKind::config, "config: max_epochs must be >= 1");
    if (cfg.model.n_blocks < 1) raise(ErrorKind::config, "config: n_blocks must be >= 1");
    if (cfg.model.max_rank < 1) raise(ErrorKind::config, "config: max_rank must be >= 1");
    if (cfg.model.dropout < 0 || cfg.model.dropout >= 1) {
        raise(ErrorKind::config, "config: dropout must be in [0, 1)");
    }
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    raise(ErrorKind::config, "config: bad boolean for " + key + ": '" + v + "'");
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        raise(ErrorKind::config, "config: bad number for " + key + ": '" + v + "'");
    }
}

int parse_int_cfg(const std::string& v, const std::string& key) {
    const double x = parse_double(v, key);
    if (x != static_cast<long>(x)) {
        raise(ErrorKind::config, "config: expected integer for " + key);
    }
    return static_cast<int>(x);
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
    TrainConfig cfg;
    std::istringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            raise(ErrorKind::config, "config: malformed line " + std::to_string(line_no));
        }
        auto strip = [](std::string s) {
            const auto b2 = s.find_first_not_of(" \t");
            const auto e2 = s.find_last_not_of(" \t");
            return b2 == std::string::npos ? std::string() : s.substr(b2, e2 - b2 + 1);
        };
        const std::string key = strip(line.substr(0, eq));
        const std::string val = strip(line.substr(eq + 1));

        if (key == "lr") cfg.lr = parse_double(val, key);
        else if (key == "beta1") cfg.beta1 = parse_double(val, key);
        else if (key == "beta2") cfg.beta2 = parse_double(val, key);
        else if (key == "epsilon") cfg.epsilon = parse_double(val, key);
        else if (key == "weight_decay") cfg.weight_decay = parse_double(val, key);
        else if (key == "max_epochs") cfg.max_epochs = parse_int_cfg(val, key);
        else if (key == "patience") cfg.patience = parse_int_cfg(val, key);
        else if (key == "batch_size") cfg.batch_size = parse_int_cfg(val, key);
        else if (key == "full_batch") cfg.batch_size = parse_bool(val, key) ? 0 : cfg.batch_size;
        else if (key == "seed") cfg.seed = static_cast<unsigned>(parse_int_cfg(val, key));
        else if (key == "hops") cfg.hops = parse_int_cfg(val, key);
        else if (key == "clique_ceiling") cfg.clique_ceiling = parse_int_cfg(val, key);
        else if (key == "task") {
            if (val == "classification") cfg.task = Task::classification;
            else if (val == "regression") cfg.task = Task::regression;
            else raise(ErrorKind::config, "config: unknown task '" + val + "'");
        } else if (key == "metric") {
            if (val == "accuracy") cfg.metric = Metric::accuracy;
            else if (val == "roc_auc") cfg.metric = Metric::roc_auc;
            else if (val == "mae") cfg.metric = Metric::mae;
            else raise(ErrorKind::config, "config: unknown metric '" + val + "'");
        } else if (key == "d_h") cfg.model.d_h = parse_int_cfg(val, key);
        else if (key == "n_blocks") cfg.model.n_blocks = parse_int_cfg(val, key);
        else if (key == "state_size") cfg.model.state_size = parse_int_cfg(val, key);
        else if (key == "max_rank") cfg.model.max_rank = parse_int_cfg(val, key);
        else if (key == "dropout") cfg.model.dropout = parse_double(val, key);
        else if (key == "use_backward_scan") cfg.model.use_backward_scan = parse_bool(val, key);
        else if (key == "use_skip") cfg.model.use_skip = parse_bool(val, key);
        else if (key == "head_activation") cfg.head_activation = parse_bool(val, key);
        else if (key == "backbone") {
            if (val == "ssm") cfg.model.backbone = Backbone::ssm;
            else if (val == "gru") cfg.model.backbone = Backbone::gru;
            else raise(ErrorKind::config, "config: unknown backbone '" + val + "'");
        } else if (key == "aggregator") {
            if (val == "sum") cfg.model.aggregator = Aggregator::sum;
            else if (val == "mean") cfg.model.aggregator = Aggregator::mean;
            else if (val == "max") cfg.model.aggregator = Aggregator::max;
            else raise(ErrorKind::config, "config: unknown aggregator '" + val + "'");
        } else {
            raise(ErrorKind::config, "config: unknown key '" + key + "'");
        }
    }
    validate_config(cfg);
    return cfg;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) raise(ErrorKind::io, "cannot open config: " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_train_config(buf.str());
}

SplitMasks split_dataset(int n_nodes, unsigned seed) {
    if (n_nodes < 4) {
        raise(ErrorKind::invalid_argument,
              "split_dataset: need at least 4 nodes, got " + std::to_string(n_nodes));
    }
    std::vector<int> order(n_nodes);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const int n_val = n_nodes / 4;
    const int n_test = n_nodes / 4;
    SplitMasks masks;
    masks.train.assign(n_nodes, 0);
    masks.val.assign(n_nodes, 0);
    masks.test.assign(n_nodes, 0);
    int k = 0;
    for (int i = 0; i < n_val; ++i) masks.val[order[k++]] = 1;
    for (int i = 0; i < n_test; ++i) masks.test[order[k++]] = 1;
    while (k < n_nodes) masks.train[order[k++]] = 1;
    return masks;
}

// ---------------------------------------------------------------------------

double accuracy(const MatD& logits, const std::vector<int>& labels,
                const std::vector<int>& rows) {
    if (rows.empty()) raise(ErrorKind::invalid_argument, "accuracy: no rows");
    if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
        raise(ErrorKind::shape_mismatch, "accuracy: label count mismatch");
    }
    long hits = 0;
    for (int i : rows) {
        int arg = 0;
        for (int c = 1; c < logits.cols(); ++c) {
            if (logits(i, c) > logits(i, arg)) arg = c;  // ties keep the lowest index
        }
        if (arg == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(rows.size());
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        raise(ErrorKind::shape_mismatch, "roc_auc: input size mismatch");
    }
    long n_pos = 0, n_neg = 0;
    for (int y : labels) {
        if (y == 1) ++n_pos;
        else if (y == 0) ++n_neg;
        else raise(ErrorKind::invalid_argument, "roc_auc: labels must be binary");
    }
    if (n_pos == 0 || n_neg == 0) {
        raise(ErrorKind::invalid_argument, "roc_auc: undefined with a single class");
    }
    // average ranks with ties sharing the mean rank
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double pos_rank_sum = 0;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (labels[k] == 1) pos_rank_sum += rank[k];
    }
    return (pos_rank_sum - static_cast<double>(n_pos) * (n_pos + 1) / 2.0) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double mean_absolute_error(const std::vector<double>& pred,
                           const std::vector<double>& target) {
    if (pred.size() != target.size() || pred.empty()) {
        raise(ErrorKind::shape_mismatch, "mean_absolute_error: input size mismatch");
    }
    double s = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

double evaluate_outputs(const MatD& outputs, const DatasetBundle& data, Metric metric,
                        const std::vector<int>& rows) {
    switch (metric) {
        case Metric::accuracy:
            return accuracy(outputs, data.labels_class, rows);
        case Metric::roc_auc: {
            std::vector<double> scores;
            std::vector<int> labels;
            scores.reserve(rows.size());
            labels.reserve(rows.size());
            for (int i : rows) {
                if (outputs.cols() == 1) scores.push_back(outputs(i, 0));
                else if (outputs.cols() == 2) scores.push_back(outputs(i, 1) - outputs(i, 0));
                else raise(ErrorKind::invalid_argument, "roc_auc: needs 1 or 2 output columns");
                labels.push_back(data.labels_class[i]);
            }
            return roc_auc(scores, labels);
        }
        case Metric::mae: {
            std::vector<double> pred, target;
            pred.reserve(rows.size());
            target.reserve(rows.size());
            for (int i : rows) {
                pred.push_back(outputs(i, 0));
                target.push_back(data.labels_reg[i]);
            }
            return mean_absolute_error(pred, target);
        }
    }
    raise(ErrorKind::invalid_argument, "evaluate_outputs: unknown metric");
}

// ---------------------------------------------------------------------------

namespace {

bool metric_improved(Metric metric, double candidate, double best) {
    if (metric == Metric::mae) return candidate < best;
    return candidate > best;
}

double worst_value(Metric metric) {
    return metric == Metric::mae ? std::numeric_limits<double>::infinity()
                                 : -std::numeric_limits<double>::infinity();
}

struct ResolvedTask {
    Task task;
    Metric metric;
};

ResolvedTask resolve_task(const DatasetBundle& data, const TrainConfig& cfg) {
    const Task task = cfg.task.value_or(data.task);
    if (task != data.task) {
        raise(ErrorKind::config, "config: task does not match the dataset's task");
    }
    const Metric metric = cfg.metric.value_or(
        task == Task::classification ? Metric::accuracy : Metric::mae);
    if (task == Task::regression && metric != Metric::mae) {
        raise(ErrorKind::config, "config: regression supports only the mae metric");
    }
    return {task, metric};
}

std::vector<float> snapshot_params(Model<float>& m) {
    std::vector<float> flat;
    for (auto& v : collect_params(m)) flat.insert(flat.end(), v.data, v.data + v.size);
    return flat;
}

void restore_params(Model<float>& m, const std::vector<float>& flat) {
    std::size_t off = 0;
    for (auto& v : collect_params(m)) {
        std::copy(flat.begin() + off, flat.begin() + off + v.size, v.data);
        off += v.size;
    }
}

}  // namespace

TrainedRun train_single(const DatasetBundle& data, const TrainConfig& cfg_in, unsigned seed) {
    TrainConfig cfg = cfg_in;
    validate_config(cfg);
    const auto [task, metric] = resolve_task(data, cfg);

    ModelConfig mc = cfg.model;
    mc.d_in = data.graph.feature_dim();
    mc.d_out = task == Task::classification ? data.num_classes : 1;
    mc.head_activation = cfg.head_activation.value_or(task == Task::classification);

    CliqueLiftOptions lift_opts;
    lift_opts.clique_size_ceiling = cfg.clique_ceiling;
    SimplicialComplex X = clique_lift(data.graph, mc.max_rank, lift_opts);
    MatF H_in = data.graph.node_features.cast<float>();

    const SplitMasks masks =
        data.splits ? *data.splits : split_dataset(data.n_nodes(), seed);
    const std::vector<int> train_ids = masks.ids(masks.train);
    const std::vector<int> val_ids = masks.ids(masks.val);
    const std::vector<int> test_ids = masks.ids(masks.test);
    if (train_ids.empty() || val_ids.empty() || test_ids.empty()) {
        raise(ErrorKind::invalid_argument, "train_single: a split is empty");
    }

    Model<float> model = model_init<float>(mc, seed);
    Model<float> grads = grads_like(model);
    AdamState<float> adam;
    const AdamConfig adam_cfg{cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon, cfg.weight_decay};
    std::mt19937 rng(seed);

    const int hops = cfg.hops > 0 ? cfg.hops : mc.n_blocks;

    auto loss_step = [&](const SimplicialComplex& XX, const MatF& feats,
                         const std::vector<int>& rows, const std::vector<int>& cls,
                         const std::vector<double>& reg) {
        ForwardCache<float> cache;
        MatF out = model_forward(model, XX, feats, /*train=*/true, &rng, &cache);
        MatF d_out;
        if (task == Task::classification) {
            softmax_cross_entropy(out, cls, rows, &d_out);
        } else {
            mae_loss(out, reg, rows, &d_out);
        }
        zero_params(grads);
        model_backward(model, XX, feats, cache, d_out, grads);
        auto pv = collect_params(model);
        auto gv = collect_params(grads);
        adam_step(pv, gv, adam, adam_cfg);
    };

    auto eval_metric = [&](const std::vector<int>& rows) {
        MatF out = model_forward(model, X, H_in);
        return evaluate_outputs(out.cast<double>(), data, metric, rows);
    };

    double best_val = worst_value(metric);
    int best_epoch = 0;
    int since_best = 0;
    std::vector<float> best_params = snapshot_params(model);

    std::vector<int> order = train_ids;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        if (cfg.full_batch()) {
            loss_step(X, H_in, train_ids, data.labels_class, data.labels_reg);
        } else {
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t start = 0; start < order.size();
                 start += static_cast<std::size_t>(cfg.batch_size)) {
                const std::size_t stop =
                    std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
                std::vector<NodeId> seeds(order.begin() + start, order.begin() + stop);
                SubComplexBatch batch = sample_subcomplex(X, seeds, hops);
                const int n_local = static_cast<int>(batch.local_to_global.size());
                MatF feats(n_local, H_in.cols());
                std::vector<int> cls(n_local, 0);
                std::vector<double> reg(n_local, 0);
                for (int i = 0; i < n_local; ++i) {
                    const NodeId g = batch.local_to_global[i];
                    feats.row(i) = H_in.row(g);
                    if (task == Task::classification) cls[i] = data.labels_class[g];
                    else reg[i] = data.labels_reg[g];
                }
                std::vector<int> rows(batch.seed_local.begin(), batch.seed_local.end());
                loss_step(batch.sub, feats, rows, cls, reg);
            }
        }

        const double val = eval_metric(val_ids);
        if (metric_improved(metric, val, best_val)) {
            best_val = val;
            best_epoch = epoch;
            since_best = 0;
            best_params = snapshot_params(model);
        } else {
            ++since_best;
        }
        if (since_best >= cfg.patience) break;
    }

    restore_params(model, best_params);
    const double test = eval_metric(test_ids);

    TrainedRun run;
    run.best_model = std::move(model);
    run.result = {seed, best_epoch, best_val, test};
    return run;
}

ExperimentReport run_experiment(const DatasetBundle& data, const TrainConfig& cfg,
                                int n_seeds, const std::string& out_dir) {
    if (n_seeds < 1) raise(ErrorKind::invalid_argument, "run_experiment: n_seeds must be >= 1");
    namespace fs = std::filesystem;
    if (!out_dir.empty()) fs::create_directories(out_dir);

    ExperimentReport report;
    for (int k = 0; k < n_seeds; ++k) {
        const unsigned seed = cfg.seed + static_cast<unsigned>(k);
        TrainedRun run = train_single(data, cfg, seed);
        report.runs.push_back(run.result);
        if (!out_dir.empty()) {
            save_checkpoint(run.best_model,
                            (fs::path(out_dir) / ("run" + std::to_string(k) + ".ckpt")).string());
        }
    }
    double sum = 0;
    for (const auto& r : report.runs) sum += r.test_metric;
    report.mean = sum / static_cast<double>(report.runs.size());
    double sq = 0;
    for (const auto& r : report.runs) {
        sq += (r.test_metric - report.mean) * (r.test_metric - report.mean);
    }
    report.stddev = std::sqrt(sq / static_cast<double>(report.runs.size()));
    if (!out_dir.empty()) {
        write_results_file((fs::path(out_dir) / "results.tsv").string(), report);
    }
    return report;
}

void write_results_file(const std::string& path, const ExperimentReport& report) {
    std::ofstream os(path);
    if (!os) raise(ErrorKind::io, "cannot write results file: " + path);
    os.precision(6);
    os << "seed\tbest_epoch\tval_metric\ttest_metric\n";
    for (const auto& r : report.runs) {
        os << r.seed << "\t" << r.best_epoch << "\t" << std::fixed << r.val_metric << "\t"
           << r.test_metric << "\n";
    }
    os << "aggregate\tmean\t" << report.mean << "\tstd\t" << report.stddev << "\tn\t"
       << report.runs.size() << "\n";
}

}  // namespace scmamba
