#include "mlgc/graph.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "mlgc/errors.hpp"

namespace mlgc {

namespace {

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

}  // namespace

void LabeledGraph::validate() const {
    const int nn = n();
    if (nn <= 0) throw ValidationError("graph has no nodes");
    if (adjacency.rows() != nn || adjacency.cols() != nn)
        throw ValidationError("adjacency shape does not match node count");
    if (labels.rows() != nn) throw ValidationError("label row count does not match node count");
    if (static_cast<int>(split.size()) != nn)
        throw ValidationError("split size does not match node count");

    for (int j = 0; j < adjacency.outerSize(); ++j) {
        for (SparseMatrix::InnerIterator it(adjacency, j); it; ++it) {
            if (it.value() < 0.0) throw ValidationError("negative adjacency weight");
            if (it.value() == 0.0) throw ValidationError("explicit zero stored in adjacency");
            if (adjacency.coeff(it.col(), it.row()) != it.value())
                throw ValidationError("adjacency is not symmetric");
        }
    }

    bool any_positive_class = false;
    for (int c = 0; c < labels.cols(); ++c) {
        double count = 0.0;
        for (int i = 0; i < labels.rows(); ++i) {
            if (!is_binary(labels(i, c))) throw ValidationError("labels must be 0/1");
            count += labels(i, c);
        }
        if (count > 0.0) any_positive_class = true;
    }
    if (!any_positive_class) throw ValidationError("no class has a positive node");

    if (std::none_of(split.begin(), split.end(), [](Split s) { return s == Split::train; }))
        throw ValidationError("train split is empty");
}

void SyntheticGraph::validate() const {
    const int np = nPrime();
    if (np <= 0) throw ValidationError("synthetic graph has no nodes");
    if (labels.rows() != np) throw ValidationError("synthetic label row count mismatch");
    for (int i = 0; i < labels.rows(); ++i)
        for (int c = 0; c < labels.cols(); ++c)
            if (!is_binary(labels(i, c))) throw ValidationError("synthetic labels must be 0/1");

    if (structureMode == StructureMode::graphless) {
        if (adjacency.has_value())
            throw ValidationError("graphless synthetic graph carries an adjacency");
        return;
    }
    if (!adjacency.has_value())
        throw ValidationError("learned-structure synthetic graph is missing its adjacency");
    const Matrix& a = *adjacency;
    if (a.rows() != np || a.cols() != np) throw ValidationError("synthetic adjacency shape mismatch");
    for (int i = 0; i < np; ++i) {
        if (a(i, i) != 1.0) throw ValidationError("synthetic adjacency diagonal is not 1");
        for (int j = 0; j < np; ++j) {
            if (a(i, j) < 0.0 || a(i, j) > 1.0)
                throw ValidationError("synthetic adjacency entry outside [0,1]");
            if (a(i, j) != a(j, i)) throw ValidationError("synthetic adjacency is not symmetric");
        }
    }
}

std::vector<int> split_indices(const LabeledGraph& graph, Split role) {
    std::vector<int> out;
    for (int i = 0; i < graph.n(); ++i)
        if (graph.split[i] == role) out.push_back(i);
    return out;
}

std::vector<SplitMask> split_masks(const LabeledGraph& graph) {
    return {SplitMask{Split::train, split_indices(graph, Split::train)},
            SplitMask{Split::val, split_indices(graph, Split::val)},
            SplitMask{Split::test, split_indices(graph, Split::test)}};
}

SparseMatrix normalize_adjacency(const SparseMatrix& adjacency) {
    const int n = static_cast<int>(adjacency.rows());
    Vector degree = Vector::Ones(n);  // self-loop weight 1
    for (int j = 0; j < adjacency.outerSize(); ++j)
        for (SparseMatrix::InnerIterator it(adjacency, j); it; ++it)
            degree(it.row()) += it.value();

    Vector inv_sqrt = degree.array().rsqrt();

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(adjacency.nonZeros()) + static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) triplets.emplace_back(i, i, inv_sqrt(i) * inv_sqrt(i));
    for (int j = 0; j < adjacency.outerSize(); ++j)
        for (SparseMatrix::InnerIterator it(adjacency, j); it; ++it)
            triplets.emplace_back(it.row(), it.col(),
                                  inv_sqrt(it.row()) * it.value() * inv_sqrt(it.col()));

    SparseMatrix out(n, n);
    out.setFromTriplets(triplets.begin(), triplets.end());
    out.makeCompressed();
    return out;
}

SparseMatrix normalize_adjacency(const LabeledGraph& graph) {
    return normalize_adjacency(graph.adjacency);
}

Vector label_distribution(const Matrix& labels) {
    if (labels.rows() == 0) throw ValidationError("empty label matrix");
    return labels.colwise().mean();
}

std::vector<std::vector<int>> class_node_sets(const Matrix& labels) {
    std::vector<std::vector<int>> sets(static_cast<std::size_t>(labels.cols()));
    for (int c = 0; c < labels.cols(); ++c)
        for (int i = 0; i < labels.rows(); ++i)
            if (labels(i, c) == 1.0) sets[static_cast<std::size_t>(c)].push_back(i);
    return sets;
}

SparseMatrix sparse_submatrix(const SparseMatrix& sp, const std::vector<int>& idx) {
    const int n = static_cast<int>(sp.rows());
    std::unordered_map<int, int> position;
    position.reserve(idx.size());
    for (std::size_t p = 0; p < idx.size(); ++p) {
        int i = idx[p];
        if (i < 0 || i >= n) throw ValidationError("subgraph index out of range");
        if (!position.emplace(i, static_cast<int>(p)).second)
            throw ValidationError("duplicate subgraph index");
    }

    std::vector<Eigen::Triplet<double>> triplets;
    for (int j = 0; j < sp.outerSize(); ++j) {
        auto cj = position.find(j);
        if (cj == position.end()) continue;
        for (SparseMatrix::InnerIterator it(sp, j); it; ++it) {
            auto ri = position.find(static_cast<int>(it.row()));
            if (ri == position.end()) continue;
            triplets.emplace_back(ri->second, cj->second, it.value());
        }
    }
    SparseMatrix out(static_cast<int>(idx.size()), static_cast<int>(idx.size()));
    out.setFromTriplets(triplets.begin(), triplets.end());
    out.makeCompressed();
    return out;
}

LabeledGraph induced_subgraph(const LabeledGraph& graph, const std::vector<int>& indices) {
    LabeledGraph out;
    out.adjacency = sparse_submatrix(graph.adjacency, indices);

    const int m = static_cast<int>(indices.size());
    out.features.resize(m, graph.d());
    out.labels.resize(m, graph.k());
    out.split.resize(static_cast<std::size_t>(m));
    for (int p = 0; p < m; ++p) {
        out.features.row(p) = graph.features.row(indices[static_cast<std::size_t>(p)]);
        out.labels.row(p) = graph.labels.row(indices[static_cast<std::size_t>(p)]);
        out.split[static_cast<std::size_t>(p)] = graph.split[static_cast<std::size_t>(indices[static_cast<std::size_t>(p)])];
    }
    return out;
}

}  // namespace mlgc
