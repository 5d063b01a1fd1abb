#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mlgc/graph.hpp"
#include "mlgc/tape.hpp"

namespace mlgc {

enum class GnnArch { sgc, gcn2 };

struct GnnSpec {
    GnnArch arch = GnnArch::gcn2;
    int hidden = 16;  // gcn2 hidden width
    int hops = 2;     // sgc propagation depth
};

/// Surrogate model parameters. gcn2 holds {W1 (d x h), W2 (h x K)},
/// sgc holds a single W (d x K).
struct GnnParams {
    GnnSpec spec;
    std::vector<Matrix> weights;

    // Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
    static GnnParams init(const GnnSpec& spec, int d, int k, std::uint64_t seed);
};

/// Propagation operator fed to a GNN: identity (graphless), a fixed sparse
/// operator (original graph), or a dense differentiable operator (learned
/// synthetic structure).
struct Propagation {
    enum class Kind { identity, sparse, dense };
    Kind kind = Kind::identity;
    SharedSparse sparse;
    DiffTensor dense;

    static Propagation identity() { return Propagation{}; }
    static Propagation from_sparse(SharedSparse s) {
        Propagation p;
        p.kind = Kind::sparse;
        p.sparse = std::move(s);
        return p;
    }
    static Propagation from_dense(DiffTensor node) {
        Propagation p;
        p.kind = Kind::dense;
        p.dense = node;
        return p;
    }
};

std::vector<DiffTensor> lift_params(Tape& tape, const std::vector<Matrix>& params,
                                    bool requires_grad);

/// Logits of the surrogate model.
///   sgc:  P^hops X W
///   gcn2: P relu(P X W1) W2
DiffTensor gnn_forward(Tape& tape, const GnnSpec& spec, const std::vector<DiffTensor>& weights,
                       const Propagation& prop, DiffTensor features);

/// Numeric convenience wrapper around the tape forward.
Matrix gnn_forward_value(const GnnSpec& spec, const std::vector<Matrix>& weights,
                         const std::optional<SparseMatrix>& op, const Matrix& features);
Matrix gnn_forward_value_dense(const GnnSpec& spec, const std::vector<Matrix>& weights,
                               const Matrix& denseOp, const Matrix& features);

/// Pairwise feature MLP g_phi: score(i,j) = mlp([x_i | x_j]); the soft
/// adjacency is sigmoid((score(i,j) + score(j,i)) / 2), exactly symmetric.
struct StructureGenerator {
    Matrix w1;  // 2d x hidden
    Matrix b1;  // 1 x hidden
    Matrix w2;  // hidden x 1
    Matrix b2;  // 1 x 1
    double delta = 0.5;

    static StructureGenerator init(int d, int hidden, std::uint64_t seed, double delta = 0.5);
    std::vector<Matrix> params() const { return {w1, b1, w2, b2}; }
    void set_params(const std::vector<Matrix>& p);
};

DiffTensor infer_structure(Tape& tape, const std::vector<DiffTensor>& phi, DiffTensor xprime);
Matrix infer_structure_value(const StructureGenerator& gen, const Matrix& xprime);

/// Entries <= delta zeroed, diagonal forced to 1, symmetry preserved.
Matrix threshold_adjacency(const Matrix& soft, double delta);

/// Row-wise generative structure model over [Z | X' | Y'], used by the
/// structure-broadcasting method; output symmetrized and squashed like
/// infer_structure.
struct SgddGenerator {
    Matrix w1;  // (n' + d + k) x hidden
    Matrix b1;  // 1 x hidden
    Matrix w2;  // hidden x n'
    Matrix b2;  // 1 x n'

    static SgddGenerator init(int nPrime, int d, int k, int hidden, std::uint64_t seed);
    std::vector<Matrix> params() const { return {w1, b1, w2, b2}; }
    void set_params(const std::vector<Matrix>& p);
};

DiffTensor sgdd_generate(Tape& tape, const std::vector<DiffTensor>& phi, DiffTensor z,
                         DiffTensor xprime, DiffTensor yprime);
Matrix sgdd_generate_value(const SgddGenerator& gen, const Matrix& z, const Matrix& xprime,
                           const Matrix& yprime);

/// A with its diagonal replaced by 1 (constant-mask trick keeps this
/// differentiable in the off-diagonal entries).
DiffTensor unit_diagonal(Tape& tape, DiffTensor a);

/// Differentiable D^{-1/2} U D^{-1/2} over the unit-diagonal soft adjacency.
DiffTensor synthetic_propagation(Tape& tape, DiffTensor softAdjacency);

/// Numeric propagation operator for a fixed synthetic adjacency that already
/// carries a unit diagonal.
Matrix dense_propagation_value(const Matrix& adjacency);

}  // namespace mlgc
