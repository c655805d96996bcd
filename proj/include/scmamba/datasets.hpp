#pragma once

#include "scmamba/lifting.hpp"
#include "scmamba/model.hpp"

#include <optional>

namespace scmamba {

struct SplitMasks {
    std::vector<std::uint8_t> train, val, test;

    std::vector<int> ids(const std::vector<std::uint8_t>& mask) const {
        std::vector<int> out;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (mask[i]) out.push_back(static_cast<int>(i));
        }
        return out;
    }
};

/// A node-level task over a featured graph: per-node class index or real
/// target, plus optional predefined splits.
struct DatasetBundle {
    FeaturedGraph graph;
    Task task = Task::classification;
    int num_classes = 0;             // classification only
    std::vector<int> labels_class;   // classification
    std::vector<double> labels_reg;  // regression
    std::optional<SplitMasks> splits;

    int n_nodes() const { return graph.n_nodes; }
};

/// Load the four-file directory format: edges.tsv (two 0-based integer
/// columns, undirected), features.tsv (one row of reals per node),
/// labels.tsv (one value per node) and meta (task=..., num_classes=...).
/// Duplicate and reversed edges collapse; self-loops are rejected.
DatasetBundle load_graph_dataset(const std::string& dir);

/// Write a bundle in the same format (full float precision).
void write_graph_dataset(const std::string& dir, const DatasetBundle& data);

/// Random sparse graph with planted triangles and pure-noise node features.
/// A node's label is 1 exactly when it belongs to at least one triangle of
/// the clique-lifted complex, so labels are recoverable only through the
/// higher-order structure.
DatasetBundle generate_synthetic(int n_nodes, int n_planted_triangles, int noise_edges,
                                 int d_in, unsigned seed);

}  // namespace scmamba
