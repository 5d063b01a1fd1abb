#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <optional>
#include <vector>

namespace mlgc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

enum class Split { train, val, test };

/// Original multi-label graph: symmetric weighted adjacency, dense node
/// features, multi-hot labels and a train/val/test split per node.
struct LabeledGraph {
    SparseMatrix adjacency;    // n x n, symmetric, nonnegative, no stored zeros
    Matrix features;           // n x d
    Matrix labels;             // n x K, entries in {0,1}
    std::vector<Split> split;  // size n

    int n() const { return static_cast<int>(features.rows()); }
    int d() const { return static_cast<int>(features.cols()); }
    int k() const { return static_cast<int>(labels.cols()); }

    // Throws ValidationError on any broken invariant.
    void validate() const;
};

enum class StructureMode { learned, graphless };

/// Condensed graph. In graphless mode there is no adjacency and consumers
/// propagate with the identity operator.
struct SyntheticGraph {
    Matrix features;                   // n' x d
    Matrix labels;                     // n' x K, entries in {0,1}
    std::optional<Matrix> adjacency;   // n' x n', entries in [0,1], unit diagonal
    StructureMode structureMode = StructureMode::graphless;

    int nPrime() const { return static_cast<int>(features.rows()); }

    void validate() const;
};

struct SplitMask {
    Split role;
    std::vector<int> indices;  // sorted, unique
};

// The three split masks of a graph, in {train, val, test} order.
std::vector<SplitMask> split_masks(const LabeledGraph& graph);
std::vector<int> split_indices(const LabeledGraph& graph, Split role);

/// GCN propagation operator D^{-1/2} (A + I) D^{-1/2} with unit self-loops
/// injected before degree normalization.
SparseMatrix normalize_adjacency(const LabeledGraph& graph);
SparseMatrix normalize_adjacency(const SparseMatrix& adjacency);

/// Per-class positive fraction p_k = (1/n) sum_i Y_{i,k}.
Vector label_distribution(const Matrix& labels);

/// Index sets {i : Y_{i,k} = 1}; sets overlap in the multi-label setting
/// and may be empty.
std::vector<std::vector<int>> class_node_sets(const Matrix& labels);

/// Restriction of the graph to `indices` (rows, columns and split tags).
/// Indices must be unique and in range.
LabeledGraph induced_subgraph(const LabeledGraph& graph, const std::vector<int>& indices);

// Sub-block sp(idx, idx) of a square sparse matrix; idx unique, in range.
SparseMatrix sparse_submatrix(const SparseMatrix& sp, const std::vector<int>& idx);

}  // namespace mlgc
