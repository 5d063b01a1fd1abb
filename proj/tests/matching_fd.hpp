#pragma once

// Rebuilds the gradient-matching objective from the public API so its
// gradient with respect to the synthetic features can be checked against
// finite differences, independently of the condensation driver internals.

#include <utility>
#include <vector>

#include "mlgc/condense.hpp"
#include "mlgc/graph.hpp"
#include "mlgc/losses.hpp"
#include "mlgc/models.hpp"
#include "mlgc/rng.hpp"
#include "mlgc/tape.hpp"
#include "test_support.hpp"

namespace mlgc::testing {

struct MatchingInstance {
    LabeledGraph graph;
    SparseMatrix ahat;
    GnnSpec spec;
    GnnParams theta;
    StructureGenerator gen;
    Matrix yprime;
    std::vector<std::vector<int>> synSets;
    LossSpec loss;
    std::vector<ClassBatch> batches;
    std::vector<std::vector<Matrix>> gradG;  // detached per-class original gradients
};

inline std::vector<Matrix> original_gradient(const MatchingInstance& inst,
                                             const ClassBatch& batch) {
    SparseMatrix sub = sparse_submatrix(inst.ahat, batch.nodes);
    Matrix xb(static_cast<Eigen::Index>(batch.nodes.size()), inst.graph.d());
    for (std::size_t p = 0; p < batch.nodes.size(); ++p)
        xb.row(static_cast<Eigen::Index>(p)) = inst.graph.features.row(batch.nodes[p]);
    Matrix yb(static_cast<Eigen::Index>(batch.anchors.size()), inst.graph.k());
    for (std::size_t p = 0; p < batch.anchors.size(); ++p)
        yb.row(static_cast<Eigen::Index>(p)) =
            inst.graph.labels.row(batch.nodes[static_cast<std::size_t>(batch.anchors[p])]);

    Tape tape;
    auto weights = lift_params(tape, inst.theta.weights, true);
    DiffTensor logits =
        gnn_forward(tape, inst.spec, weights,
                    Propagation::from_sparse(make_shared_sparse(std::move(sub))),
                    tape.constant(std::move(xb)));
    tape.backward(loss_node(tape, inst.loss, tape.gather_rows(logits, batch.anchors), yb));

    std::vector<Matrix> grads;
    for (DiffTensor w : weights) grads.push_back(w.grad());
    return grads;
}

inline MatchingInstance make_matching_instance(std::uint64_t seed, int nPrime = 4) {
    MatchingInstance inst;
    inst.graph = random_graph(5, 3, 2, rng::derive(seed, 0x1));
    // Every class needs at least one training anchor.
    inst.graph.split[0] = Split::train;
    inst.graph.split[3] = Split::train;
    inst.graph.labels(0, 0) = 1.0;
    inst.graph.labels(3, 1) = 1.0;

    inst.ahat = normalize_adjacency(inst.graph);
    inst.spec = GnnSpec{GnnArch::gcn2, 4, 2};
    inst.theta = GnnParams::init(inst.spec, inst.graph.d(), inst.graph.k(), rng::derive(seed, 0x2));
    inst.gen = StructureGenerator::init(inst.graph.d(), 4, rng::derive(seed, 0x3));
    inst.loss.kind = LossKind::bce;

    auto gen = rng::engine(rng::derive(seed, 0x4));
    inst.yprime = random_binary(nPrime, inst.graph.k(), gen);
    for (int j = 0; j < nPrime; ++j)
        if (inst.yprime.row(j).sum() == 0.0) inst.yprime(j, j % inst.graph.k()) = 1.0;
    inst.synSets = class_node_sets(inst.yprime);

    for (int c = 0; c < inst.graph.k(); ++c) {
        inst.batches.push_back(
            class_training_batch(inst.graph, c, 256, rng::derive(seed, 0x5, c)));
        inst.gradG.push_back(inst.batches.back().anchors.empty()
                                 ? std::vector<Matrix>{}
                                 : original_gradient(inst, inst.batches.back()));
    }
    return inst;
}

// Full matching objective over the learned-structure pipeline. Returns the
// feature leaf and the scalar loss node.
inline std::pair<DiffTensor, DiffTensor> build_matching_loss(Tape& tape,
                                                             const MatchingInstance& inst,
                                                             const Matrix& xprime,
                                                             bool x_requires_grad) {
    DiffTensor xp = tape.leaf(xprime, x_requires_grad);
    auto weights = lift_params(tape, inst.theta.weights, true);
    auto phi = lift_params(tape, inst.gen.params(), false);
    DiffTensor soft = infer_structure(tape, phi, xp);
    Propagation prop = Propagation::from_dense(synthetic_propagation(tape, soft));
    DiffTensor logits = gnn_forward(tape, inst.spec, weights, prop, xp);

    DiffTensor total = tape.scalar_constant(0.0);
    for (int c = 0; c < inst.graph.k(); ++c) {
        const auto& idx = inst.synSets[static_cast<std::size_t>(c)];
        if (idx.empty() || inst.batches[static_cast<std::size_t>(c)].anchors.empty()) continue;
        Matrix yc(static_cast<Eigen::Index>(idx.size()), inst.graph.k());
        for (std::size_t p = 0; p < idx.size(); ++p)
            yc.row(static_cast<Eigen::Index>(p)) = inst.yprime.row(idx[p]);
        DiffTensor class_loss =
            loss_node(tape, inst.loss, tape.gather_rows(logits, idx), yc);
        auto grad_s = tape.grad_nodes(class_loss, weights);
        total = tape.add(total, gradient_match_distance_node(
                                    tape, grad_s, inst.gradG[static_cast<std::size_t>(c)]));
    }
    return {xp, total};
}

inline double matching_loss_value(const MatchingInstance& inst, const Matrix& xprime) {
    Tape tape;
    return build_matching_loss(tape, inst, xprime, false).second.scalar();
}

inline Matrix matching_loss_gradient(const MatchingInstance& inst, const Matrix& xprime) {
    Tape tape;
    auto [xp, loss] = build_matching_loss(tape, inst, xprime, true);
    tape.backward(loss);
    return xp.grad();
}

}  // namespace mlgc::testing
