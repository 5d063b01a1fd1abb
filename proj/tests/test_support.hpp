#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "mlgc/graph.hpp"
#include "mlgc/rng.hpp"

namespace mlgc::testing {

inline Matrix random_matrix(int rows, int cols, std::mt19937_64& gen, double lo = -1.0,
                            double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = dist(gen);
    return m;
}

inline Matrix random_binary(int rows, int cols, std::mt19937_64& gen, double p = 0.5) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = dist(gen) < p ? 1.0 : 0.0;
    return m;
}

inline SparseMatrix random_symmetric_adjacency(int n, std::mt19937_64& gen, double p = 0.4) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (dist(gen) < p) {
                t.emplace_back(i, j, 1.0);
                t.emplace_back(j, i, 1.0);
            }
    SparseMatrix a(n, n);
    a.setFromTriplets(t.begin(), t.end());
    a.makeCompressed();
    return a;
}

inline LabeledGraph random_graph(int n, int d, int k, std::uint64_t seed, double edge_p = 0.4) {
    auto gen = rng::engine(seed);
    LabeledGraph g;
    g.adjacency = random_symmetric_adjacency(n, gen, edge_p);
    g.features = random_matrix(n, d, gen);
    g.labels = random_binary(n, k, gen);
    g.labels(0, 0) = 1.0;  // at least one positive class
    g.split.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        g.split[static_cast<std::size_t>(i)] =
            i % 3 == 0 ? Split::train : (i % 3 == 1 ? Split::val : Split::test);
    g.split[0] = Split::train;
    return g;
}

inline SparseMatrix edge_list_adjacency(int n, const std::vector<std::pair<int, int>>& edges,
                                        double weight = 1.0) {
    std::vector<Eigen::Triplet<double>> t;
    for (auto [i, j] : edges) {
        t.emplace_back(i, j, weight);
        t.emplace_back(j, i, weight);
    }
    SparseMatrix a(n, n);
    a.setFromTriplets(t.begin(), t.end());
    a.makeCompressed();
    return a;
}

inline double relative_error(const Matrix& a, const Matrix& b) {
    const double scale = std::max(a.norm(), b.norm());
    if (scale == 0.0) return (a - b).norm();
    return (a - b).norm() / scale;
}

}  // namespace mlgc::testing
