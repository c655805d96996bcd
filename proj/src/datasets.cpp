#include "scmamba/datasets.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace scmamba {

namespace {

std::ifstream open_or_throw(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) raise(ErrorKind::io, "cannot open " + p.string());
    return is;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

long parse_int(const std::string& tok, const std::string& file, int line_no) {
    long v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size()) {
        raise(ErrorKind::format,
              file + ": malformed integer '" + tok + "' at line " + std::to_string(line_no));
    }
    return v;
}

double parse_real(const std::string& tok, const std::string& file, int line_no) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        raise(ErrorKind::format,
              file + ": malformed number '" + tok + "' at line " + std::to_string(line_no));
    }
}

}  // namespace

DatasetBundle load_graph_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    DatasetBundle data;

    // meta first: task and, for classification, the class count
    {
        auto is = open_or_throw(root / "meta");
        std::string line;
        int line_no = 0;
        bool have_task = false;
        while (std::getline(is, line)) {
            ++line_no;
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                raise(ErrorKind::format, "meta: malformed line " + std::to_string(line_no));
            }
            const std::string key = line.substr(0, eq);
            const std::string val = line.substr(eq + 1);
            if (key == "task") {
                if (val == "classification") data.task = Task::classification;
                else if (val == "regression") data.task = Task::regression;
                else raise(ErrorKind::format, "meta: unknown task '" + val + "'");
                have_task = true;
            } else if (key == "num_classes") {
                data.num_classes = static_cast<int>(parse_int(val, "meta", line_no));
            } else {
                raise(ErrorKind::format, "meta: unknown key '" + key + "'");
            }
        }
        if (!have_task) raise(ErrorKind::format, "meta: missing task");
        if (data.task == Task::classification && data.num_classes < 2) {
            raise(ErrorKind::format, "meta: classification requires num_classes >= 2");
        }
    }

    // features determine the node count
    {
        auto is = open_or_throw(root / "features.tsv");
        std::string line;
        int line_no = 0;
        std::vector<std::vector<double>> rows;
        while (std::getline(is, line)) {
            ++line_no;
            if (line.empty()) continue;
            auto toks = split_ws(line);
            std::vector<double> row;
            row.reserve(toks.size());
            for (const auto& t : toks) row.push_back(parse_real(t, "features.tsv", line_no));
            if (!rows.empty() && rows.front().size() != row.size()) {
                raise(ErrorKind::format,
                      "features.tsv: row width mismatch at line " + std::to_string(line_no));
            }
            rows.push_back(std::move(row));
        }
        if (rows.empty()) raise(ErrorKind::format, "features.tsv: no rows");
        data.graph.n_nodes = static_cast<int>(rows.size());
        data.graph.node_features.resize(rows.size(), rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = 0; j < rows[i].size(); ++j) {
                data.graph.node_features(i, j) = rows[i][j];
            }
        }
    }

    // edges
    {
        auto is = open_or_throw(root / "edges.tsv");
        std::string line;
        int line_no = 0;
        std::vector<std::pair<NodeId, NodeId>> edges;
        while (std::getline(is, line)) {
            ++line_no;
            if (line.empty()) continue;
            auto toks = split_ws(line);
            if (toks.size() != 2) {
                raise(ErrorKind::format,
                      "edges.tsv: expected two columns at line " + std::to_string(line_no));
            }
            const long u = parse_int(toks[0], "edges.tsv", line_no);
            const long v = parse_int(toks[1], "edges.tsv", line_no);
            if (u == v) {
                raise(ErrorKind::invalid_argument,
                      "edges.tsv: self-loop at line " + std::to_string(line_no));
            }
            if (u < 0 || v < 0 || u >= data.graph.n_nodes || v >= data.graph.n_nodes) {
                raise(ErrorKind::out_of_range,
                      "edges.tsv: node id out of range at line " + std::to_string(line_no));
            }
            edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
        }
        data.graph.edges = canonical_edges(data.graph.n_nodes, edges);
    }

    // labels
    {
        auto is = open_or_throw(root / "labels.tsv");
        std::string line;
        int line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            if (line.empty()) continue;
            auto toks = split_ws(line);
            if (toks.size() != 1) {
                raise(ErrorKind::format,
                      "labels.tsv: expected one value at line " + std::to_string(line_no));
            }
            if (data.task == Task::classification) {
                const long y = parse_int(toks[0], "labels.tsv", line_no);
                if (y < 0 || y >= data.num_classes) {
                    raise(ErrorKind::out_of_range,
                          "labels.tsv: label " + std::to_string(y) +
                              " out of range at line " + std::to_string(line_no));
                }
                data.labels_class.push_back(static_cast<int>(y));
            } else {
                data.labels_reg.push_back(parse_real(toks[0], "labels.tsv", line_no));
            }
        }
        const std::size_t count = data.task == Task::classification
                                      ? data.labels_class.size()
                                      : data.labels_reg.size();
        if (count != static_cast<std::size_t>(data.graph.n_nodes)) {
            raise(ErrorKind::shape_mismatch,
                  "labels.tsv has " + std::to_string(count) + " rows, features.tsv has " +
                      std::to_string(data.graph.n_nodes));
        }
    }
    return data;
}

void write_graph_dataset(const std::string& dir, const DatasetBundle& data) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    fs::create_directories(root);

    {
        std::ofstream os(root / "meta");
        os << "task=" << (data.task == Task::classification ? "classification" : "regression")
           << "\n";
        if (data.task == Task::classification) os << "num_classes=" << data.num_classes << "\n";
    }
    {
        std::ofstream os(root / "edges.tsv");
        for (auto [u, v] : data.graph.edges) os << u << "\t" << v << "\n";
    }
    {
        std::ofstream os(root / "features.tsv");
        os.precision(17);
        for (int i = 0; i < data.graph.n_nodes; ++i) {
            for (int j = 0; j < data.graph.feature_dim(); ++j) {
                if (j) os << "\t";
                os << data.graph.node_features(i, j);
            }
            os << "\n";
        }
    }
    {
        std::ofstream os(root / "labels.tsv");
        os.precision(17);
        for (int i = 0; i < data.graph.n_nodes; ++i) {
            if (data.task == Task::classification) os << data.labels_class[i] << "\n";
            else os << data.labels_reg[i] << "\n";
        }
    }
}

DatasetBundle generate_synthetic(int n_nodes, int n_planted_triangles, int noise_edges,
                                 int d_in, unsigned seed) {
    if (n_nodes < 3 || d_in < 1 || n_planted_triangles < 0 || noise_edges < 0) {
        raise(ErrorKind::invalid_argument, "generate_synthetic: bad parameters");
    }
    const long max_edges = static_cast<long>(n_nodes) * (n_nodes - 1) / 2;
    if (3L * n_planted_triangles + noise_edges > max_edges) {
        raise(ErrorKind::invalid_argument,
              "generate_synthetic: requested density cannot be planted in a simple graph");
    }
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> vd(0, n_nodes - 1);
    std::set<std::pair<NodeId, NodeId>> edges;
    auto add_edge = [&](NodeId u, NodeId v) {
        if (u > v) std::swap(u, v);
        edges.emplace(u, v);
    };

    for (int t = 0; t < n_planted_triangles; ++t) {
        NodeId a = vd(rng), b = vd(rng), c = vd(rng);
        int guard = 0;
        while (a == b || b == c || a == c) {
            b = vd(rng);
            c = vd(rng);
            if (++guard > 10000) {
                raise(ErrorKind::invalid_argument, "generate_synthetic: planting failed");
            }
        }
        add_edge(a, b);
        add_edge(b, c);
        add_edge(a, c);
    }
    long attempts = 0;
    const long max_attempts = 100L * (noise_edges + 1);
    for (int e = 0; e < noise_edges;) {
        if (++attempts > max_attempts) {
            raise(ErrorKind::invalid_argument,
                  "generate_synthetic: noise edge density infeasible");
        }
        NodeId u = vd(rng), v = vd(rng);
        if (u == v) continue;
        if (u > v) std::swap(u, v);
        if (edges.count({u, v})) continue;
        edges.insert({u, v});
        ++e;
    }

    DatasetBundle data;
    data.task = Task::classification;
    data.num_classes = 2;
    data.graph.n_nodes = n_nodes;
    data.graph.edges.assign(edges.begin(), edges.end());
    data.graph.node_features.resize(n_nodes, d_in);
    std::uniform_real_distribution<double> fd(-1.0, 1.0);
    for (int i = 0; i < n_nodes; ++i) {
        for (int j = 0; j < d_in; ++j) data.graph.node_features(i, j) = fd(rng);
    }

    // label = membership in any triangle of the lifted complex (noise edges
    // may close extra triangles; those count too)
    auto X = clique_lift(data.graph, 2);
    data.labels_class.assign(n_nodes, 0);
    for (const Cell& tri : X.cells(2)) {
        for (NodeId v : tri) data.labels_class[v] = 1;
    }
    return data;
}

}  // namespace scmamba
