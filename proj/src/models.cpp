#include "mlgc/models.hpp"

#include <cmath>

#include "mlgc/errors.hpp"
#include "mlgc/rng.hpp"

namespace mlgc {

namespace {

Matrix uniform_fan_in(int rows, int cols, int fan_in, std::mt19937_64& gen) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = dist(gen);
    return m;
}

void check_param_count(const std::vector<DiffTensor>& weights, std::size_t expected,
                       const char* what) {
    if (weights.size() != expected) throw ValidationError(std::string(what) + ": wrong parameter count");
}

}  // namespace

GnnParams GnnParams::init(const GnnSpec& spec, int d, int k, std::uint64_t seed) {
    auto gen = rng::engine(seed);
    GnnParams p;
    p.spec = spec;
    if (spec.arch == GnnArch::sgc) {
        p.weights.push_back(uniform_fan_in(d, k, d, gen));
    } else {
        p.weights.push_back(uniform_fan_in(d, spec.hidden, d, gen));
        p.weights.push_back(uniform_fan_in(spec.hidden, k, spec.hidden, gen));
    }
    return p;
}

std::vector<DiffTensor> lift_params(Tape& tape, const std::vector<Matrix>& params,
                                    bool requires_grad) {
    std::vector<DiffTensor> out;
    out.reserve(params.size());
    for (const Matrix& m : params) out.push_back(tape.leaf(m, requires_grad));
    return out;
}

namespace {

DiffTensor propagate(Tape& tape, const Propagation& prop, DiffTensor x) {
    switch (prop.kind) {
        case Propagation::Kind::identity:
            return x;
        case Propagation::Kind::sparse:
            return tape.spmm(prop.sparse, x);
        case Propagation::Kind::dense:
            return tape.matmul(prop.dense, x);
    }
    throw StateError("unreachable propagation kind");
}

}  // namespace

DiffTensor gnn_forward(Tape& tape, const GnnSpec& spec, const std::vector<DiffTensor>& weights,
                       const Propagation& prop, DiffTensor features) {
    if (spec.arch == GnnArch::sgc) {
        check_param_count(weights, 1, "sgc");
        DiffTensor h = features;
        for (int i = 0; i < spec.hops; ++i) h = propagate(tape, prop, h);
        return tape.matmul(h, weights[0]);
    }
    check_param_count(weights, 2, "gcn2");
    DiffTensor h = tape.relu(propagate(tape, prop, tape.matmul(features, weights[0])));
    return tape.matmul(propagate(tape, prop, h), weights[1]);
}

Matrix gnn_forward_value(const GnnSpec& spec, const std::vector<Matrix>& weights,
                         const std::optional<SparseMatrix>& op, const Matrix& features) {
    Tape tape;
    Propagation prop =
        op ? Propagation::from_sparse(make_shared_sparse(*op)) : Propagation::identity();
    return gnn_forward(tape, spec, lift_params(tape, weights, false), prop,
                       tape.constant(features))
        .value();
}

Matrix gnn_forward_value_dense(const GnnSpec& spec, const std::vector<Matrix>& weights,
                               const Matrix& denseOp, const Matrix& features) {
    Tape tape;
    Propagation prop = Propagation::from_dense(tape.constant(denseOp));
    return gnn_forward(tape, spec, lift_params(tape, weights, false), prop,
                       tape.constant(features))
        .value();
}

StructureGenerator StructureGenerator::init(int d, int hidden, std::uint64_t seed, double delta) {
    auto gen = rng::engine(seed);
    StructureGenerator g;
    g.delta = delta;
    g.w1 = uniform_fan_in(2 * d, hidden, 2 * d, gen);
    g.b1 = uniform_fan_in(1, hidden, 2 * d, gen);
    g.w2 = uniform_fan_in(hidden, 1, hidden, gen);
    g.b2 = uniform_fan_in(1, 1, hidden, gen);
    return g;
}

void StructureGenerator::set_params(const std::vector<Matrix>& p) {
    if (p.size() != 4) throw ValidationError("structure generator expects 4 parameter tensors");
    w1 = p[0];
    b1 = p[1];
    w2 = p[2];
    b2 = p[3];
}

namespace {

// Two-layer MLP with relu; phi = {w1, b1, w2, b2}.
DiffTensor mlp2(Tape& tape, const std::vector<DiffTensor>& phi, DiffTensor input) {
    check_param_count(phi, 4, "mlp");
    DiffTensor h = tape.relu(tape.add(tape.matmul(input, phi[0]), phi[1]));
    return tape.add(tape.matmul(h, phi[2]), phi[3]);
}

DiffTensor symmetrize_sigmoid(Tape& tape, DiffTensor scores) {
    DiffTensor sym = tape.affine(tape.add(scores, tape.transpose(scores)), 0.5, 0.0);
    return tape.sigmoid(sym);
}

DiffTensor concat_cols(Tape& tape, DiffTensor a, DiffTensor b) {
    return tape.transpose(tape.concat_rows(tape.transpose(a), tape.transpose(b)));
}

}  // namespace

DiffTensor infer_structure(Tape& tape, const std::vector<DiffTensor>& phi, DiffTensor xprime) {
    const int m = xprime.rows();
    DiffTensor pairs = tape.pairwise_concat(xprime);       // m^2 x 2d
    DiffTensor scores = mlp2(tape, phi, pairs);            // m^2 x 1
    DiffTensor grid = tape.reshape(scores, m, m);          // score(i,j)
    return symmetrize_sigmoid(tape, grid);
}

Matrix infer_structure_value(const StructureGenerator& gen, const Matrix& xprime) {
    Tape tape;
    return infer_structure(tape, lift_params(tape, gen.params(), false), tape.constant(xprime))
        .value();
}

Matrix threshold_adjacency(const Matrix& soft, double delta) {
    if (delta < 0.0 || delta >= 1.0) throw ConfigError("delta must lie in [0, 1)");
    if (soft.rows() != soft.cols()) throw ValidationError("threshold: matrix is not square");
    Matrix out = soft;
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j)
            if (out(i, j) <= delta) out(i, j) = 0.0;
    out.diagonal().setOnes();
    return out;
}

SgddGenerator SgddGenerator::init(int nPrime, int d, int k, int hidden, std::uint64_t seed) {
    auto gen = rng::engine(seed);
    SgddGenerator g;
    const int in = nPrime + d + k;
    g.w1 = uniform_fan_in(in, hidden, in, gen);
    g.b1 = uniform_fan_in(1, hidden, in, gen);
    g.w2 = uniform_fan_in(hidden, nPrime, hidden, gen);
    g.b2 = uniform_fan_in(1, nPrime, hidden, gen);
    return g;
}

void SgddGenerator::set_params(const std::vector<Matrix>& p) {
    if (p.size() != 4) throw ValidationError("sgdd generator expects 4 parameter tensors");
    w1 = p[0];
    b1 = p[1];
    w2 = p[2];
    b2 = p[3];
}

DiffTensor sgdd_generate(Tape& tape, const std::vector<DiffTensor>& phi, DiffTensor z,
                         DiffTensor xprime, DiffTensor yprime) {
    if (z.rows() != z.cols()) throw ValidationError("sgdd: coordinate matrix must be square");
    if (z.rows() != xprime.rows() || z.rows() != yprime.rows())
        throw ValidationError("sgdd: row counts of Z, X', Y' disagree");
    DiffTensor input = concat_cols(tape, concat_cols(tape, z, xprime), yprime);
    DiffTensor scores = mlp2(tape, phi, input);  // n' x n'
    if (scores.cols() != z.cols()) throw ValidationError("sgdd: generator output is not square");
    return symmetrize_sigmoid(tape, scores);
}

Matrix sgdd_generate_value(const SgddGenerator& gen, const Matrix& z, const Matrix& xprime,
                           const Matrix& yprime) {
    Tape tape;
    return sgdd_generate(tape, lift_params(tape, gen.params(), false), tape.constant(z),
                         tape.constant(xprime), tape.constant(yprime))
        .value();
}

DiffTensor unit_diagonal(Tape& tape, DiffTensor a) {
    const int m = a.rows();
    Matrix off = Matrix::Ones(m, m);
    off.diagonal().setZero();
    return tape.add(tape.mul(a, tape.constant(std::move(off))),
                    tape.constant(Matrix::Identity(m, m)));
}

DiffTensor synthetic_propagation(Tape& tape, DiffTensor softAdjacency) {
    DiffTensor u = unit_diagonal(tape, softAdjacency);
    const int m = u.rows();
    DiffTensor inv_sqrt_deg =
        tape.divide(tape.constant(Matrix::Ones(m, 1)), tape.sqrt(tape.row_sum(u)));
    DiffTensor scaling = tape.matmul(inv_sqrt_deg, tape.transpose(inv_sqrt_deg));
    return tape.mul(u, scaling);
}

Matrix dense_propagation_value(const Matrix& adjacency) {
    Vector deg = adjacency.rowwise().sum();
    if ((deg.array() <= 0.0).any())
        throw ValidationError("dense propagation requires positive degrees");
    Vector inv_sqrt = deg.array().rsqrt();
    return inv_sqrt.asDiagonal() * adjacency * inv_sqrt.asDiagonal();
}

}  // namespace mlgc
