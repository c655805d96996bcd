#include "scmamba/batching.hpp"
#include "scmamba/datasets.hpp"
#include "scmamba/training.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sys/resource.h>

using namespace scmamba;
namespace fs = std::filesystem;

namespace {

double peak_rss_mb() {
    rusage ru{};
    getrusage(RUSAGE_SELF, &ru);
    return static_cast<double>(ru.ru_maxrss) / 1024.0;  // ru_maxrss is KiB on Linux
}

void print_stats_row(const SimplicialComplex& X) {
    auto count = [&](int r) { return r <= X.max_rank() ? X.num_cells(r) : 0; };
    std::cout << "nodes\tedges\ttriangles\ttetrahedra\n"
              << count(0) << "\t" << count(1) << "\t" << count(2) << "\t" << count(3) << "\n";
}

int cmd_lift(const std::string& input, int max_rank, const std::string& output,
             int ceiling) {
    auto data = load_graph_dataset(input);
    CliqueLiftOptions opts;
    opts.clique_size_ceiling = ceiling;
    auto X = clique_lift(data.graph, max_rank, opts);
    fs::create_directories(output);

    for (int r = 0; r <= X.max_rank(); ++r) {
        std::ofstream os(fs::path(output) / ("cells_rank" + std::to_string(r) + ".txt"));
        for (const Cell& c : X.cells(r)) {
            for (std::size_t i = 0; i < c.size(); ++i) {
                if (i) os << " ";
                os << c[i];
            }
            os << "\n";
        }
    }
    for (int r = 1; r <= X.max_rank(); ++r) {
        auto B = boundary_matrix(X, r);
        std::ofstream os(fs::path(output) / ("boundary_" + std::to_string(r) + ".txt"));
        dump_sparse(os, r, B.mat);
    }
    {
        auto N = node_incidence(X);
        std::ofstream os(fs::path(output) / "node_incidence.txt");
        dump_sparse(os, 0, N.mat);  // spans every rank; rank field not meaningful
    }
    print_stats_row(X);
    return 0;
}

int cmd_stats(const std::string& dir, int max_rank, int ceiling) {
    auto data = load_graph_dataset(dir);
    CliqueLiftOptions opts;
    opts.clique_size_ceiling = ceiling;
    auto X = clique_lift(data.graph, max_rank, opts);
    print_stats_row(X);
    return 0;
}

int cmd_train(const std::string& dir, const std::string& config_path, int batch_size,
              bool full_batch, int seeds, const std::string& out) {
    auto data = load_graph_dataset(dir);
    TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_train_config(config_path);
    if (batch_size > 0) cfg.batch_size = batch_size;
    if (full_batch) cfg.batch_size = 0;
    auto report = run_experiment(data, cfg, seeds, out);
    for (const auto& r : report.runs) {
        std::cout << "run seed=" << r.seed << " best_epoch=" << r.best_epoch
                  << " val=" << r.val_metric << " test=" << r.test_metric << "\n";
    }
    std::cout << "test metric: " << report.mean << " +- " << report.stddev << " over "
              << report.runs.size() << " runs\n";
    if (!out.empty()) std::cout << "results written to " << out << "/results.tsv\n";
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& dir,
             const std::string& metric_name) {
    auto model = load_checkpoint(checkpoint);
    auto data = load_graph_dataset(dir);
    auto X = clique_lift(data.graph, model.cfg.max_rank);
    MatF H = data.graph.node_features.cast<float>();
    MatF out = model_forward(model, X, H);

    Metric metric = data.task == Task::classification ? Metric::accuracy : Metric::mae;
    if (metric_name == "accuracy") metric = Metric::accuracy;
    else if (metric_name == "roc_auc") metric = Metric::roc_auc;
    else if (metric_name == "mae") metric = Metric::mae;
    else if (!metric_name.empty()) raise(ErrorKind::config, "unknown metric " + metric_name);

    std::vector<int> rows(data.n_nodes());
    std::iota(rows.begin(), rows.end(), 0);
    const double value = evaluate_outputs(out.cast<double>(), data, metric, rows);
    const char* name = metric == Metric::accuracy ? "accuracy"
                       : metric == Metric::roc_auc ? "roc_auc"
                                                   : "mae";
    std::cout << name << " over all nodes: " << value << "\n";
    return 0;
}

int cmd_synth(const std::string& out, int nodes, int triangles, int noise_edges, int dim,
              unsigned seed) {
    auto data = generate_synthetic(nodes, triangles, noise_edges, dim, seed);
    write_graph_dataset(out, data);
    int pos = 0;
    for (int y : data.labels_class) pos += y;
    std::cout << "wrote " << out << ": " << nodes << " nodes, " << data.graph.edges.size()
              << " edges, " << pos << " positive labels\n";
    return 0;
}

// One epoch of minibatch training with a choice of sampler; returns seconds.
template <class Sampler>
double bench_epoch(Model<float>& model, Model<float>& grads, AdamState<float>& adam,
                   const AdamConfig& acfg, const SimplicialComplex& X, const MatF& H,
                   const DatasetBundle& data, const std::vector<int>& train_ids,
                   int batch_size, int hops, std::mt19937& rng, Sampler&& sampler) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<int> order = train_ids;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop =
            std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        std::vector<NodeId> seeds(order.begin() + start, order.begin() + stop);
        SubComplexBatch batch = sampler(X, seeds, hops);
        const int n_local = static_cast<int>(batch.local_to_global.size());
        MatF feats(n_local, H.cols());
        std::vector<int> cls(n_local, 0);
        for (int i = 0; i < n_local; ++i) {
            feats.row(i) = H.row(batch.local_to_global[i]);
            cls[i] = data.labels_class[batch.local_to_global[i]];
        }
        std::vector<int> rows(batch.seed_local.begin(), batch.seed_local.end());
        ForwardCache<float> cache;
        MatF out = model_forward(model, batch.sub, feats, true, &rng, &cache);
        MatF d_out;
        softmax_cross_entropy(out, cls, rows, &d_out);
        zero_params(grads);
        model_backward(model, batch.sub, feats, cache, d_out, grads);
        auto pv = collect_params(model);
        auto gv = collect_params(grads);
        adam_step(pv, gv, adam, acfg);
    }
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_bench(const std::string& dir, int batch_size, int epochs, int max_rank, int d_h,
              int blocks) {
    auto data = load_graph_dataset(dir);
    if (data.task != Task::classification) {
        std::cerr << "bench-batching currently benches classification datasets\n";
        return 1;
    }
    auto X = clique_lift(data.graph, max_rank);
    MatF H = data.graph.node_features.cast<float>();
    auto masks = split_dataset(data.n_nodes(), 0);
    auto train_ids = masks.ids(masks.train);

    ModelConfig mc;
    mc.d_in = data.graph.feature_dim();
    mc.d_h = d_h;
    mc.d_out = data.num_classes;
    mc.n_blocks = blocks;
    mc.max_rank = max_rank;
    mc.dropout = 0.25;
    AdamConfig acfg;

    std::cout << "method\tbatch_size\tpeak_rss_mb\tseconds_per_epoch\n";

    auto run_method = [&](const std::string& name, auto&& sampler) {
        auto model = model_init<float>(mc, 0);
        auto grads = grads_like(model);
        AdamState<float> adam;
        std::mt19937 rng(0);
        double total = 0;
        for (int e = 0; e < epochs; ++e) {
            total += bench_epoch(model, grads, adam, acfg, X, H, data, train_ids, batch_size,
                                 blocks, rng, sampler);
        }
        std::cout << name << "\t" << batch_size << "\t" << peak_rss_mb() << "\t"
                  << total / epochs << "\n";
    };

    // full batch baseline
    {
        auto model = model_init<float>(mc, 0);
        auto grads = grads_like(model);
        AdamState<float> adam;
        std::mt19937 rng(0);
        double total = 0;
        for (int e = 0; e < epochs; ++e) {
            const auto t0 = std::chrono::steady_clock::now();
            ForwardCache<float> cache;
            MatF out = model_forward(model, X, H, true, &rng, &cache);
            MatF d_out;
            softmax_cross_entropy(out, data.labels_class, train_ids, &d_out);
            zero_params(grads);
            model_backward(model, X, H, cache, d_out, grads);
            auto pv = collect_params(model);
            auto gv = collect_params(grads);
            adam_step(pv, gv, adam, acfg);
            total +=
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        std::cout << "full\t-\t" << peak_rss_mb() << "\t" << total / epochs << "\n";
    }
    run_method("node-incidence", [](const SimplicialComplex& XX,
                                    const std::vector<NodeId>& s,
                                    int h) { return sample_subcomplex(XX, s, h); });
    run_method("per-rank-prune", [](const SimplicialComplex& XX,
                                    const std::vector<NodeId>& s,
                                    int h) { return per_rank_prune(XX, s, h); });
    std::cout << "(numbers are machine-local; peak rss is a cumulative process-wide proxy)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sequence models over clique-lifted simplicial complexes"};
    app.require_subcommand(1);

    std::string input, output, data_dir, config_path, checkpoint, metric_name;
    int max_rank = 3, ceiling = 25, batch_size = 0, seeds = 1, epochs = 3;
    int nodes = 500, triangles = 60, noise_edges = 400, dim = 2, d_h = 64, blocks = 2;
    unsigned seed = 0;
    bool full_batch = false;

    auto* lift = app.add_subcommand("lift", "clique-lift a graph dataset and dump the result");
    lift->add_option("--input", input, "dataset directory")->required();
    lift->add_option("--max-rank", max_rank, "maximum cell rank");
    lift->add_option("--output", output, "output directory")->required();
    lift->add_option("--clique-ceiling", ceiling, "largest allowed clique");

    auto* stats = app.add_subcommand("stats", "print node/edge/triangle/tetrahedron counts");
    stats->add_option("--data", data_dir, "dataset directory")->required();
    stats->add_option("--max-rank", max_rank, "maximum cell rank");
    stats->add_option("--clique-ceiling", ceiling, "largest allowed clique");

    auto* train = app.add_subcommand("train", "train with early stopping over several seeds");
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--config", config_path, "key=value config file");
    auto* bs = train->add_option("--batch-size", batch_size, "minibatch size");
    train->add_flag("--full-batch", full_batch, "train on the whole complex")->excludes(bs);
    train->add_option("--seeds", seeds, "number of runs");
    train->add_option("--out", output, "output directory for results and checkpoints");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    eval->add_option("--data", data_dir, "dataset directory")->required();
    eval->add_option("--metric", metric_name, "accuracy | roc_auc | mae");

    auto* bench = app.add_subcommand("bench-batching", "compare batching strategies");
    bench->add_option("--data", data_dir, "dataset directory")->required();
    bench->add_option("--batch-size", batch_size, "minibatch size")->default_val(128);
    bench->add_option("--epochs", epochs, "epochs to average over");
    bench->add_option("--max-rank", max_rank, "maximum cell rank");
    bench->add_option("--d-h", d_h, "hidden width");
    bench->add_option("--blocks", blocks, "number of blocks");

    auto* synth = app.add_subcommand("synth", "generate a synthetic planted-triangle dataset");
    synth->add_option("--out", output, "output directory")->required();
    synth->add_option("--nodes", nodes, "node count");
    synth->add_option("--triangles", triangles, "planted triangles");
    synth->add_option("--noise-edges", noise_edges, "random extra edges");
    synth->add_option("--dim", dim, "feature dimension");
    synth->add_option("--seed", seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (lift->parsed()) return cmd_lift(input, max_rank, output, ceiling);
        if (stats->parsed()) return cmd_stats(data_dir, max_rank, ceiling);
        if (train->parsed()) {
            return cmd_train(data_dir, config_path, batch_size, full_batch, seeds, output);
        }
        if (eval->parsed()) return cmd_eval(checkpoint, data_dir, metric_name);
        if (bench->parsed()) {
            return cmd_bench(data_dir, batch_size, epochs, max_rank, d_h, blocks);
        }
        if (synth->parsed()) return cmd_synth(output, nodes, triangles, noise_edges, dim, seed);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
