#pragma once

#include <cstdint>
#include <vector>

#include "mlgc/graph.hpp"

namespace mlgc {

enum class InitKind { random, herding, kcenter, probability };

struct InitStrategy {
    InitKind kind = InitKind::kcenter;
    bool useSubgraphStructure = true;  // subgraph vs nodes-only selection
    std::uint64_t seed = 0;
};

/// Greedy mean-matching selection: each step adds the candidate whose
/// inclusion brings the selected-set feature mean closest to the full mean.
/// Ties go to the lowest node index.
std::vector<int> herding_select(const Matrix& features, int count);

struct KCenterResult {
    std::vector<int> centers;
    double radius;  // max distance from any node to its nearest center
};

/// Farthest-first traversal started from the medoid (node nearest the
/// feature mean, lowest index on ties).
KCenterResult kcenter_select(const Matrix& features, int count);

SyntheticGraph init_random(const LabeledGraph& graph, int nPrime, std::uint64_t seed,
                           bool useSubgraphStructure);
SyntheticGraph init_herding(const LabeledGraph& graph, int nPrime, bool useSubgraphStructure);
SyntheticGraph init_kcenter(const LabeledGraph& graph, int nPrime, bool useSubgraphStructure);

/// Labels drawn per class from the original label distribution; features
/// copied from the original node whose label row is most cosine-similar.
/// Always graphless.
SyntheticGraph init_probability(const LabeledGraph& graph, int nPrime, std::uint64_t seed);

SyntheticGraph initialize_synthetic(const LabeledGraph& graph, int nPrime,
                                    const InitStrategy& strategy);

}  // namespace mlgc
