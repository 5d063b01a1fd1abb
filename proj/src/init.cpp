#include "mlgc/init.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mlgc/errors.hpp"
#include "mlgc/rng.hpp"

namespace mlgc {

namespace {

void check_nprime(const LabeledGraph& graph, int nPrime) {
    if (nPrime < 1 || nPrime > graph.n())
        throw ConfigError("synthetic node count must lie in [1, n]");
}

// Every synthetic row must carry at least one positive bit; selected rows
// from sparsely labeled datasets may be empty, in which case the globally
// most frequent class is forced on.
void force_nonempty_rows(Matrix& labels, const Vector& distribution) {
    int top = 0;
    distribution.maxCoeff(&top);
    for (Eigen::Index i = 0; i < labels.rows(); ++i)
        if (labels.row(i).sum() == 0.0) labels(i, top) = 1.0;
}

SyntheticGraph from_selection(const LabeledGraph& graph, const std::vector<int>& indices,
                              bool useSubgraphStructure) {
    SyntheticGraph out;
    const int m = static_cast<int>(indices.size());
    out.features.resize(m, graph.d());
    out.labels.resize(m, graph.k());
    for (int p = 0; p < m; ++p) {
        out.features.row(p) = graph.features.row(indices[static_cast<std::size_t>(p)]);
        out.labels.row(p) = graph.labels.row(indices[static_cast<std::size_t>(p)]);
    }
    force_nonempty_rows(out.labels, label_distribution(graph.labels));

    if (useSubgraphStructure) {
        Matrix adj = Matrix(sparse_submatrix(graph.adjacency, indices));
        adj = adj.cwiseMin(1.0);  // weighted graphs clamp into the soft-adjacency range
        adj.diagonal().setOnes();
        out.adjacency = std::move(adj);
        out.structureMode = StructureMode::learned;
    } else {
        out.structureMode = StructureMode::graphless;
    }
    return out;
}

}  // namespace

std::vector<int> herding_select(const Matrix& features, int count) {
    const int n = static_cast<int>(features.rows());
    Vector target = features.colwise().mean();

    std::vector<int> selected;
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    Vector running_sum = Vector::Zero(features.cols());

    for (int step = 0; step < count; ++step) {
        int best = -1;
        double best_dist = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
            if (used[static_cast<std::size_t>(i)]) continue;
            Vector mean = (running_sum + features.row(i).transpose()) / (step + 1.0);
            const double dist = (target - mean).norm();
            if (dist < best_dist) {
                best_dist = dist;
                best = i;
            }
        }
        selected.push_back(best);
        used[static_cast<std::size_t>(best)] = true;
        running_sum += features.row(best).transpose();
    }
    return selected;
}

KCenterResult kcenter_select(const Matrix& features, int count) {
    const int n = static_cast<int>(features.rows());
    Vector target = features.colwise().mean();

    int medoid = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double dist = (features.row(i).transpose() - target).norm();
        if (dist < best) {
            best = dist;
            medoid = i;
        }
    }

    KCenterResult result;
    result.centers.push_back(medoid);
    std::vector<bool> selected(static_cast<std::size_t>(n), false);
    selected[static_cast<std::size_t>(medoid)] = true;
    Vector nearest(n);
    for (int i = 0; i < n; ++i) nearest(i) = (features.row(i) - features.row(medoid)).norm();

    while (static_cast<int>(result.centers.size()) < count) {
        int farthest = -1;
        double far_dist = -1.0;
        for (int i = 0; i < n; ++i) {
            if (selected[static_cast<std::size_t>(i)]) continue;
            if (nearest(i) > far_dist) {
                far_dist = nearest(i);
                farthest = i;
            }
        }
        result.centers.push_back(farthest);
        selected[static_cast<std::size_t>(farthest)] = true;
        for (int i = 0; i < n; ++i)
            nearest(i) = std::min(nearest(i), (features.row(i) - features.row(farthest)).norm());
    }
    result.radius = nearest.maxCoeff();
    return result;
}

SyntheticGraph init_random(const LabeledGraph& graph, int nPrime, std::uint64_t seed,
                           bool useSubgraphStructure) {
    check_nprime(graph, nPrime);
    auto gen = rng::engine(rng::derive(seed, 0x72616e64ULL));  // "rand"

    // Partial Fisher-Yates: first nPrime entries are a uniform sample
    // of distinct indices.
    std::vector<int> pool(static_cast<std::size_t>(graph.n()));
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < nPrime; ++i) {
        std::uniform_int_distribution<int> pick(i, graph.n() - 1);
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(gen))]);
    }
    pool.resize(static_cast<std::size_t>(nPrime));
    return from_selection(graph, pool, useSubgraphStructure);
}

SyntheticGraph init_herding(const LabeledGraph& graph, int nPrime, bool useSubgraphStructure) {
    check_nprime(graph, nPrime);
    return from_selection(graph, herding_select(graph.features, nPrime), useSubgraphStructure);
}

SyntheticGraph init_kcenter(const LabeledGraph& graph, int nPrime, bool useSubgraphStructure) {
    check_nprime(graph, nPrime);
    return from_selection(graph, kcenter_select(graph.features, nPrime).centers,
                          useSubgraphStructure);
}

SyntheticGraph init_probability(const LabeledGraph& graph, int nPrime, std::uint64_t seed) {
    if (nPrime < 1) throw ConfigError("synthetic node count must be >= 1");
    Vector p = label_distribution(graph.labels);
    if (p.maxCoeff() <= 0.0) throw ConfigError("all class probabilities are zero");

    const int k = graph.k();
    int top_class = 0;
    p.maxCoeff(&top_class);

    auto gen = rng::engine(rng::derive(seed, 0x70726f62ULL));  // "prob"
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SyntheticGraph out;
    out.structureMode = StructureMode::graphless;
    out.labels = Matrix::Zero(nPrime, k);
    for (int j = 0; j < nPrime; ++j) {
        bool nonzero = false;
        for (int attempt = 0; attempt < 100 && !nonzero; ++attempt) {
            for (int c = 0; c < k; ++c)
                out.labels(j, c) = unit(gen) < p(c) ? 1.0 : 0.0;
            nonzero = out.labels.row(j).sum() > 0.0;
        }
        if (!nonzero) out.labels(j, top_class) = 1.0;
    }

    // Feature rows copied from the label-wise most similar original node.
    out.features.resize(nPrime, graph.d());
    for (int j = 0; j < nPrime; ++j) {
        const double syn_norm = out.labels.row(j).norm();
        int best = 0;
        double best_cos = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < graph.n(); ++i) {
            const double orig_norm = graph.labels.row(i).norm();
            double cos = 0.0;
            if (syn_norm > 0.0 && orig_norm > 0.0)
                cos = graph.labels.row(i).dot(out.labels.row(j)) / (syn_norm * orig_norm);
            if (cos > best_cos) {
                best_cos = cos;
                best = i;
            }
        }
        out.features.row(j) = graph.features.row(best);
    }
    return out;
}

SyntheticGraph initialize_synthetic(const LabeledGraph& graph, int nPrime,
                                    const InitStrategy& strategy) {
    switch (strategy.kind) {
        case InitKind::random:
            return init_random(graph, nPrime, strategy.seed, strategy.useSubgraphStructure);
        case InitKind::herding:
            return init_herding(graph, nPrime, strategy.useSubgraphStructure);
        case InitKind::kcenter:
            return init_kcenter(graph, nPrime, strategy.useSubgraphStructure);
        case InitKind::probability:
            return init_probability(graph, nPrime, strategy.seed);
    }
    throw ConfigError("unknown initialization strategy");
}

}  // namespace mlgc
