#include "mlgc/tape.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "mlgc/errors.hpp"

namespace mlgc {

namespace {

struct LedAux {
    Matrix grad;  // d(distance)/dA, frozen at forward time
};

Matrix expand_to(const Matrix& b, Eigen::Index rows, Eigen::Index cols) {
    if (b.rows() == rows && b.cols() == cols) return b;
    if (b.rows() == 1 && b.cols() == cols) return b.replicate(rows, 1);
    if (b.rows() == 1 && b.cols() == 1) return Matrix::Constant(rows, cols, b(0, 0));
    throw ValidationError("operand not broadcastable to target shape");
}

bool broadcast_compatible(const Matrix& a, const Matrix& b) {
    return (b.rows() == a.rows() && b.cols() == a.cols()) ||
           (b.rows() == 1 && b.cols() == a.cols()) || (b.rows() == 1 && b.cols() == 1);
}

}  // namespace

struct Tape::Node {
    enum class Op {
        leaf,
        add,
        sub,
        mul,
        divide,
        affine,
        matmul,
        spmm,
        relu,
        sigmoid,
        exp,
        log,
        sqrt,
        softplus,
        clamp,
        sum,
        mean,
        row_sum,
        col_sum,
        broadcast_rows,
        broadcast_cols,
        fill_like,
        concat_rows,
        transpose,
        reshape,
        gather_rows,
        scatter_rows_add,
        pairwise_concat,
        pairwise_adjoint,
        led
    };

    Op op = Op::leaf;
    int a = -1;
    int b = -1;
    Matrix value;
    Matrix grad;
    bool has_grad = false;
    bool requires_grad = false;
    double k0 = 0.0;
    double k1 = 0.0;
    std::vector<int> idx;
    SharedSparse sp;
    std::shared_ptr<LedAux> led_aux;
};

Tape::Tape() = default;
Tape::~Tape() = default;

SharedSparse make_shared_sparse(SparseMatrix m) {
    m.makeCompressed();
    SparseMatrix mt = m.transpose();
    mt.makeCompressed();
    return SharedSparse{std::make_shared<const SparseMatrix>(std::move(m)),
                        std::make_shared<const SparseMatrix>(std::move(mt))};
}

int Tape::record(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check_same_tape(DiffTensor t) const {
    if (t.tape != this || t.id < 0 || t.id >= static_cast<int>(nodes_.size()))
        throw StateError("tensor does not belong to this tape");
}

std::size_t Tape::size() const { return nodes_.size(); }

void Tape::truncate(std::size_t mark) {
    if (mark > nodes_.size()) throw StateError("truncate beyond tape end");
    nodes_.resize(mark);
}

void Tape::clear() {
    nodes_.clear();
    last_backward_size_ = static_cast<std::size_t>(-1);
}

const Matrix& Tape::value_of(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }

const Matrix& Tape::grad_of(int id) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(id));
    if (!n.has_grad) throw StateError("gradient not populated; call backward first");
    return n.grad;
}

bool Tape::requires_grad_of(int id) const {
    return nodes_.at(static_cast<std::size_t>(id)).requires_grad;
}

DiffTensor Tape::leaf(Matrix value, bool requires_grad) {
    Node n;
    n.op = Node::Op::leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return wrap(record(std::move(n)));
}

DiffTensor Tape::scalar_constant(double v) { return constant(Matrix::Constant(1, 1, v)); }

DiffTensor Tape::add(DiffTensor a, DiffTensor b) {
    check_same_tape(a);
    check_same_tape(b);
    const Matrix& av = value_of(a.id);
    const Matrix& bv = value_of(b.id);
    if (!broadcast_compatible(av, bv)) throw ValidationError("add: shape mismatch");
    Node n;
    n.op = Node::Op::add;
    n.a = a.id;
    n.b = b.id;
    n.value = av + expand_to(bv, av.rows(), av.cols());
    n.requires_grad = a.requiresGrad() || b.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::sub(DiffTensor a, DiffTensor b) {
    check_same_tape(a);
    check_same_tape(b);
    const Matrix& av = value_of(a.id);
    const Matrix& bv = value_of(b.id);
    if (av.rows() != bv.rows() || av.cols() != bv.cols())
        throw ValidationError("sub: shape mismatch");
    Node n;
    n.op = Node::Op::sub;
    n.a = a.id;
    n.b = b.id;
    n.value = av - bv;
    n.requires_grad = a.requiresGrad() || b.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::mul(DiffTensor a, DiffTensor b) {
    check_same_tape(a);
    check_same_tape(b);
    const Matrix& av = value_of(a.id);
    const Matrix& bv = value_of(b.id);
    if (!broadcast_compatible(av, bv)) throw ValidationError("mul: shape mismatch");
    Node n;
    n.op = Node::Op::mul;
    n.a = a.id;
    n.b = b.id;
    n.value = av.cwiseProduct(expand_to(bv, av.rows(), av.cols()));
    n.requires_grad = a.requiresGrad() || b.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::divide(DiffTensor a, DiffTensor b) {
    check_same_tape(a);
    check_same_tape(b);
    const Matrix& av = value_of(a.id);
    const Matrix& bv = value_of(b.id);
    if (av.rows() != bv.rows() || av.cols() != bv.cols())
        throw ValidationError("divide: shape mismatch");
    if ((bv.array() == 0.0).any()) throw std::domain_error("divide: zero denominator");
    Node n;
    n.op = Node::Op::divide;
    n.a = a.id;
    n.b = b.id;
    n.value = av.cwiseQuotient(bv);
    n.requires_grad = a.requiresGrad() || b.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::affine(DiffTensor a, double scale, double shift) {
    check_same_tape(a);
    Node n;
    n.op = Node::Op::affine;
    n.a = a.id;
    n.k0 = scale;
    n.k1 = shift;
    n.value = (value_of(a.id).array() * scale + shift).matrix();
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::matmul(DiffTensor a, DiffTensor b) {
    check_same_tape(a);
    check_same_tape(b);
    const Matrix& av = value_of(a.id);
    const Matrix& bv = value_of(b.id);
    if (av.cols() != bv.rows()) throw ValidationError("matmul: inner dimensions differ");
    Node n;
    n.op = Node::Op::matmul;
    n.a = a.id;
    n.b = b.id;
    n.value = av * bv;
    n.requires_grad = a.requiresGrad() || b.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::spmm(const SharedSparse& s, DiffTensor b) {
    check_same_tape(b);
    if (!s.mat || !s.matT) throw ValidationError("spmm: empty sparse operand");
    const Matrix& bv = value_of(b.id);
    if (s.mat->cols() != bv.rows()) throw ValidationError("spmm: inner dimensions differ");
    Node n;
    n.op = Node::Op::spmm;
    n.a = b.id;
    n.sp = s;
    n.value = (*s.mat) * bv;
    n.requires_grad = b.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::relu(DiffTensor a) {
    check_same_tape(a);
    Node n;
    n.op = Node::Op::relu;
    n.a = a.id;
    n.value = value_of(a.id).cwiseMax(0.0);
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::sigmoid(DiffTensor a) {
    check_same_tape(a);
    Node n;
    n.op = Node::Op::sigmoid;
    n.a = a.id;
    // Stable in both tails.
    n.value = value_of(a.id).unaryExpr([](double z) {
        return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    });
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::exp(DiffTensor a) {
    check_same_tape(a);
    Node n;
    n.op = Node::Op::exp;
    n.a = a.id;
    n.value = value_of(a.id).array().exp().matrix();
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::log(DiffTensor a) {
    check_same_tape(a);
    if ((value_of(a.id).array() <= 0.0).any())
        throw std::domain_error("log: non-positive input");
    Node n;
    n.op = Node::Op::log;
    n.a = a.id;
    n.value = value_of(a.id).array().log().matrix();
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::sqrt(DiffTensor a) {
    check_same_tape(a);
    if ((value_of(a.id).array() < 0.0).any()) throw std::domain_error("sqrt: negative input");
    Node n;
    n.op = Node::Op::sqrt;
    n.a = a.id;
    n.value = value_of(a.id).array().sqrt().matrix();
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::softplus(DiffTensor a) {
    check_same_tape(a);
    Node n;
    n.op = Node::Op::softplus;
    n.a = a.id;
    n.value = value_of(a.id).unaryExpr(
        [](double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); });
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::clamp(DiffTensor a, double lo, double hi) {
    check_same_tape(a);
    if (!(lo < hi)) throw ValidationError("clamp: lo must be below hi");
    Node n;
    n.op = Node::Op::clamp;
    n.a = a.id;
    n.k0 = lo;
    n.k1 = hi;
    n.value = value_of(a.id).cwiseMax(lo).cwiseMin(hi);
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::sum(DiffTensor a) {
    check_same_tape(a);
    if (value_of(a.id).size() == 0) throw ValidationError("sum: empty tensor");
    Node n;
    n.op = Node::Op::sum;
    n.a = a.id;
    n.value = Matrix::Constant(1, 1, value_of(a.id).sum());
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::mean(DiffTensor a) {
    check_same_tape(a);
    if (value_of(a.id).size() == 0) throw ValidationError("mean: empty tensor");
    Node n;
    n.op = Node::Op::mean;
    n.a = a.id;
    n.value = Matrix::Constant(1, 1, value_of(a.id).mean());
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::row_sum(DiffTensor a) {
    check_same_tape(a);
    Node n;
    n.op = Node::Op::row_sum;
    n.a = a.id;
    n.value = value_of(a.id).rowwise().sum();
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::col_sum(DiffTensor a) {
    check_same_tape(a);
    Node n;
    n.op = Node::Op::col_sum;
    n.a = a.id;
    n.value = value_of(a.id).colwise().sum();
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::broadcast_rows(DiffTensor row, int n_rows) {
    check_same_tape(row);
    if (row.rows() != 1) throw ValidationError("broadcast_rows: input must be a row vector");
    Node n;
    n.op = Node::Op::broadcast_rows;
    n.a = row.id;
    n.value = value_of(row.id).replicate(n_rows, 1);
    n.requires_grad = row.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::broadcast_cols(DiffTensor col, int n_cols) {
    check_same_tape(col);
    if (col.cols() != 1) throw ValidationError("broadcast_cols: input must be a column vector");
    Node n;
    n.op = Node::Op::broadcast_cols;
    n.a = col.id;
    n.value = value_of(col.id).replicate(1, n_cols);
    n.requires_grad = col.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::fill_like(DiffTensor scalar, int rows, int cols) {
    check_same_tape(scalar);
    if (scalar.rows() != 1 || scalar.cols() != 1)
        throw ValidationError("fill_like: input must be 1x1");
    Node n;
    n.op = Node::Op::fill_like;
    n.a = scalar.id;
    n.value = Matrix::Constant(rows, cols, value_of(scalar.id)(0, 0));
    n.requires_grad = scalar.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::concat_rows(DiffTensor a, DiffTensor b) {
    check_same_tape(a);
    check_same_tape(b);
    const Matrix& av = value_of(a.id);
    const Matrix& bv = value_of(b.id);
    if (av.cols() != bv.cols()) throw ValidationError("concat_rows: column counts differ");
    Node n;
    n.op = Node::Op::concat_rows;
    n.a = a.id;
    n.b = b.id;
    n.value.resize(av.rows() + bv.rows(), av.cols());
    n.value << av, bv;
    n.requires_grad = a.requiresGrad() || b.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::transpose(DiffTensor a) {
    check_same_tape(a);
    Node n;
    n.op = Node::Op::transpose;
    n.a = a.id;
    n.value = value_of(a.id).transpose();
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::reshape(DiffTensor a, int rows, int cols) {
    check_same_tape(a);
    const Matrix& av = value_of(a.id);
    if (av.size() != static_cast<Eigen::Index>(rows) * cols)
        throw ValidationError("reshape: element count mismatch");
    Node n;
    n.op = Node::Op::reshape;
    n.a = a.id;
    // Row-major reinterpretation so row blocks stay contiguous.
    Matrix out(rows, cols);
    Eigen::Index pos = 0;
    for (Eigen::Index i = 0; i < av.rows(); ++i)
        for (Eigen::Index j = 0; j < av.cols(); ++j) {
            out(pos / cols, pos % cols) = av(i, j);
            ++pos;
        }
    n.value = std::move(out);
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::gather_rows(DiffTensor a, std::vector<int> idx) {
    check_same_tape(a);
    const Matrix& av = value_of(a.id);
    for (int i : idx)
        if (i < 0 || i >= av.rows()) throw ValidationError("gather_rows: index out of range");
    Node n;
    n.op = Node::Op::gather_rows;
    n.a = a.id;
    n.value.resize(static_cast<Eigen::Index>(idx.size()), av.cols());
    for (std::size_t p = 0; p < idx.size(); ++p)
        n.value.row(static_cast<Eigen::Index>(p)) = av.row(idx[p]);
    n.idx = std::move(idx);
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::scatter_rows_add(DiffTensor a, std::vector<int> idx, int out_rows) {
    check_same_tape(a);
    const Matrix& av = value_of(a.id);
    if (static_cast<Eigen::Index>(idx.size()) != av.rows())
        throw ValidationError("scatter_rows_add: index count differs from row count");
    for (int i : idx)
        if (i < 0 || i >= out_rows) throw ValidationError("scatter_rows_add: index out of range");
    Node n;
    n.op = Node::Op::scatter_rows_add;
    n.a = a.id;
    n.value = Matrix::Zero(out_rows, av.cols());
    for (std::size_t p = 0; p < idx.size(); ++p)
        n.value.row(idx[p]) += av.row(static_cast<Eigen::Index>(p));
    n.idx = std::move(idx);
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::pairwise_concat(DiffTensor a) {
    check_same_tape(a);
    const Matrix& av = value_of(a.id);
    const Eigen::Index m = av.rows(), d = av.cols();
    Node n;
    n.op = Node::Op::pairwise_concat;
    n.a = a.id;
    n.value.resize(m * m, 2 * d);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) {
            n.value.block(i * m + j, 0, 1, d) = av.row(i);
            n.value.block(i * m + j, d, 1, d) = av.row(j);
        }
    n.requires_grad = a.requiresGrad();
    return wrap(record(std::move(n)));
}

DiffTensor Tape::led_quantile_distance(DiffTensor adjacency, const Vector& ref_quantiles) {
    check_same_tape(adjacency);
    const Matrix a = value_of(adjacency.id);
    if (a.rows() != a.cols()) throw ValidationError("led: adjacency is not square");
    if (!a.isApprox(a.transpose(), 0.0)) throw ValidationError("led: adjacency is not symmetric");
    const int m = static_cast<int>(a.rows());
    const int grid = static_cast<int>(ref_quantiles.size());

    Eigen::SelfAdjointEigenSolver<Matrix> solver(normalized_laplacian(a));
    const Vector eig = solver.eigenvalues();
    const Matrix& vecs = solver.eigenvectors();

    Vector q(grid);
    std::vector<int> sel(static_cast<std::size_t>(grid));
    for (int g = 0; g < grid; ++g) {
        int k = std::min(m - 1, static_cast<int>((g + 0.5) / grid * m));
        sel[static_cast<std::size_t>(g)] = k;
        q(g) = eig(k);
    }
    const double dist = (q - ref_quantiles).squaredNorm() / grid;

    // First-order eigenvalue perturbation with frozen eigenvectors:
    // d lambda_k = v_k^T dL v_k, chained through L = I* - Dh A Dh.
    Vector w = Vector::Zero(m);
    for (int g = 0; g < grid; ++g)
        w(sel[static_cast<std::size_t>(g)]) += 2.0 / grid * (q(g) - ref_quantiles(g));
    Matrix s = vecs * w.asDiagonal() * vecs.transpose();

    Vector deg = a.rowwise().sum();
    Vector dinv_sqrt(m), dinv_3half(m);
    for (int i = 0; i < m; ++i) {
        dinv_sqrt(i) = deg(i) > 0.0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
        dinv_3half(i) = deg(i) > 0.0 ? 1.0 / (deg(i) * std::sqrt(deg(i))) : 0.0;
    }
    Matrix dhsdh = dinv_sqrt.asDiagonal() * s * dinv_sqrt.asDiagonal();
    Vector t = (a * (dinv_sqrt.asDiagonal() * s)).diagonal();

    auto aux = std::make_shared<LedAux>();
    aux->grad.resize(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            aux->grad(i, j) =
                -dhsdh(i, j) + 0.5 * dinv_3half(i) * t(i) + 0.5 * dinv_3half(j) * t(j);

    Node n;
    n.op = Node::Op::led;
    n.a = adjacency.id;
    n.value = Matrix::Constant(1, 1, dist);
    n.led_aux = std::move(aux);
    n.requires_grad = adjacency.requiresGrad();
    return wrap(record(std::move(n)));
}

int Tape::accumulate(int acc, int contrib) {
    if (acc < 0) return contrib;
    return add(wrap(acc), wrap(contrib)).id;
}

int Tape::vjp_reduce_like(int g, int target_rows, int target_cols) {
    const Matrix& gv = value_of(g);
    if (gv.rows() == target_rows && gv.cols() == target_cols) return g;
    if (target_rows == 1 && target_cols == 1) return sum(wrap(g)).id;
    if (target_rows == 1 && gv.cols() == target_cols) return col_sum(wrap(g)).id;
    throw ValidationError("cannot reduce gradient to operand shape");
}

std::vector<int> Tape::build_grad_graph(int loss_id) {
    const Matrix& lv = value_of(loss_id);
    if (lv.rows() != 1 || lv.cols() != 1) throw ValidationError("backward: loss must be scalar");

    const std::size_t n0 = nodes_.size();
    std::vector<int> gid(n0, -1);
    gid[static_cast<std::size_t>(loss_id)] = scalar_constant(1.0).id;

    for (int id = loss_id; id >= 0; --id) {
        const int g = gid[static_cast<std::size_t>(id)];
        if (g < 0 || !nodes_[static_cast<std::size_t>(id)].requires_grad) continue;

        // Snapshot: record() below may reallocate nodes_.
        const Node::Op op = nodes_[static_cast<std::size_t>(id)].op;
        const int in_a = nodes_[static_cast<std::size_t>(id)].a;
        const int in_b = nodes_[static_cast<std::size_t>(id)].b;
        const double k0 = nodes_[static_cast<std::size_t>(id)].k0;
        const double k1 = nodes_[static_cast<std::size_t>(id)].k1;
        const std::vector<int> idx = nodes_[static_cast<std::size_t>(id)].idx;
        const SharedSparse sp = nodes_[static_cast<std::size_t>(id)].sp;
        const std::shared_ptr<LedAux> led_aux = nodes_[static_cast<std::size_t>(id)].led_aux;

        const bool need_a = in_a >= 0 && nodes_[static_cast<std::size_t>(in_a)].requires_grad;
        const bool need_b = in_b >= 0 && nodes_[static_cast<std::size_t>(in_b)].requires_grad;
        auto& acc_a = gid[static_cast<std::size_t>(in_a >= 0 ? in_a : 0)];
        auto& acc_b = gid[static_cast<std::size_t>(in_b >= 0 ? in_b : 0)];

        const DiffTensor gt = wrap(g);
        const DiffTensor out = wrap(id);
        const DiffTensor ta = wrap(in_a);
        const DiffTensor tb = wrap(in_b);

        switch (op) {
            case Node::Op::leaf:
                break;
            case Node::Op::add: {
                if (need_a) acc_a = accumulate(acc_a, g);
                if (need_b) {
                    int r = vjp_reduce_like(g, static_cast<int>(value_of(in_b).rows()),
                                            static_cast<int>(value_of(in_b).cols()));
                    acc_b = accumulate(acc_b, r);
                }
                break;
            }
            case Node::Op::sub: {
                if (need_a) acc_a = accumulate(acc_a, g);
                if (need_b) acc_b = accumulate(acc_b, affine(gt, -1.0, 0.0).id);
                break;
            }
            case Node::Op::mul: {
                if (need_a) acc_a = accumulate(acc_a, mul(gt, tb).id);
                if (need_b) {
                    int full = mul(gt, ta).id;
                    int r = vjp_reduce_like(full, static_cast<int>(value_of(in_b).rows()),
                                            static_cast<int>(value_of(in_b).cols()));
                    acc_b = accumulate(acc_b, r);
                }
                break;
            }
            case Node::Op::divide: {
                if (need_a) acc_a = accumulate(acc_a, divide(gt, tb).id);
                if (need_b)
                    acc_b = accumulate(acc_b, affine(divide(mul(gt, out), tb), -1.0, 0.0).id);
                break;
            }
            case Node::Op::affine: {
                if (need_a) acc_a = accumulate(acc_a, affine(gt, k0, 0.0).id);
                break;
            }
            case Node::Op::matmul: {
                if (need_a) acc_a = accumulate(acc_a, matmul(gt, transpose(tb)).id);
                if (need_b) acc_b = accumulate(acc_b, matmul(transpose(ta), gt).id);
                break;
            }
            case Node::Op::spmm: {
                if (need_a) {
                    SharedSparse swapped{sp.matT, sp.mat};
                    acc_a = accumulate(acc_a, spmm(swapped, gt).id);
                }
                break;
            }
            case Node::Op::relu: {
                if (need_a) {
                    Matrix mask =
                        (value_of(in_a).array() > 0.0).cast<double>().matrix();
                    acc_a = accumulate(acc_a, mul(gt, constant(std::move(mask))).id);
                }
                break;
            }
            case Node::Op::sigmoid: {
                if (need_a)
                    acc_a = accumulate(acc_a, mul(gt, mul(out, affine(out, -1.0, 1.0))).id);
                break;
            }
            case Node::Op::exp: {
                if (need_a) acc_a = accumulate(acc_a, mul(gt, out).id);
                break;
            }
            case Node::Op::log: {
                if (need_a) acc_a = accumulate(acc_a, divide(gt, ta).id);
                break;
            }
            case Node::Op::sqrt: {
                if (need_a) acc_a = accumulate(acc_a, divide(affine(gt, 0.5, 0.0), out).id);
                break;
            }
            case Node::Op::softplus: {
                if (need_a) acc_a = accumulate(acc_a, mul(gt, sigmoid(ta)).id);
                break;
            }
            case Node::Op::clamp: {
                if (need_a) {
                    const Matrix& av = value_of(in_a);
                    Matrix mask = ((av.array() > k0) && (av.array() < k1)).cast<double>().matrix();
                    acc_a = accumulate(acc_a, mul(gt, constant(std::move(mask))).id);
                }
                break;
            }
            case Node::Op::sum: {
                if (need_a)
                    acc_a = accumulate(acc_a, fill_like(gt, static_cast<int>(value_of(in_a).rows()),
                                                        static_cast<int>(value_of(in_a).cols()))
                                                  .id);
                break;
            }
            case Node::Op::mean: {
                if (need_a) {
                    const auto r = value_of(in_a).rows();
                    const auto c = value_of(in_a).cols();
                    acc_a = accumulate(
                        acc_a,
                        affine(fill_like(gt, static_cast<int>(r), static_cast<int>(c)),
                               1.0 / static_cast<double>(r * c), 0.0)
                            .id);
                }
                break;
            }
            case Node::Op::row_sum: {
                if (need_a)
                    acc_a = accumulate(
                        acc_a, broadcast_cols(gt, static_cast<int>(value_of(in_a).cols())).id);
                break;
            }
            case Node::Op::col_sum: {
                if (need_a)
                    acc_a = accumulate(
                        acc_a, broadcast_rows(gt, static_cast<int>(value_of(in_a).rows())).id);
                break;
            }
            case Node::Op::broadcast_rows: {
                if (need_a) acc_a = accumulate(acc_a, col_sum(gt).id);
                break;
            }
            case Node::Op::broadcast_cols: {
                if (need_a) acc_a = accumulate(acc_a, row_sum(gt).id);
                break;
            }
            case Node::Op::fill_like: {
                if (need_a) acc_a = accumulate(acc_a, sum(gt).id);
                break;
            }
            case Node::Op::concat_rows: {
                const int ra = static_cast<int>(value_of(in_a).rows());
                const int rb = static_cast<int>(value_of(in_b).rows());
                if (need_a) {
                    std::vector<int> top(static_cast<std::size_t>(ra));
                    std::iota(top.begin(), top.end(), 0);
                    acc_a = accumulate(acc_a, gather_rows(gt, std::move(top)).id);
                }
                if (need_b) {
                    std::vector<int> bottom(static_cast<std::size_t>(rb));
                    std::iota(bottom.begin(), bottom.end(), ra);
                    acc_b = accumulate(acc_b, gather_rows(gt, std::move(bottom)).id);
                }
                break;
            }
            case Node::Op::transpose: {
                if (need_a) acc_a = accumulate(acc_a, transpose(gt).id);
                break;
            }
            case Node::Op::reshape: {
                if (need_a)
                    acc_a = accumulate(acc_a,
                                       reshape(gt, static_cast<int>(value_of(in_a).rows()),
                                               static_cast<int>(value_of(in_a).cols()))
                                           .id);
                break;
            }
            case Node::Op::gather_rows: {
                if (need_a)
                    acc_a = accumulate(acc_a, scatter_rows_add(gt, idx,
                                                               static_cast<int>(value_of(in_a).rows()))
                                                  .id);
                break;
            }
            case Node::Op::scatter_rows_add: {
                if (need_a) acc_a = accumulate(acc_a, gather_rows(gt, idx).id);
                break;
            }
            case Node::Op::pairwise_concat: {
                if (need_a) {
                    Node adj;
                    adj.op = Node::Op::pairwise_adjoint;
                    adj.a = g;
                    const Matrix& gv = value_of(g);
                    const Eigen::Index m = value_of(in_a).rows();
                    const Eigen::Index d = value_of(in_a).cols();
                    adj.value = Matrix::Zero(m, d);
                    for (Eigen::Index i = 0; i < m; ++i)
                        for (Eigen::Index j = 0; j < m; ++j) {
                            adj.value.row(i) += gv.block(i * m + j, 0, 1, d);
                            adj.value.row(j) += gv.block(i * m + j, d, 1, d);
                        }
                    adj.requires_grad = nodes_[static_cast<std::size_t>(g)].requires_grad;
                    acc_a = accumulate(acc_a, record(std::move(adj)));
                }
                break;
            }
            case Node::Op::pairwise_adjoint: {
                if (need_a) acc_a = accumulate(acc_a, pairwise_concat(gt).id);
                break;
            }
            case Node::Op::led: {
                if (need_a) {
                    const Matrix& gm = led_aux->grad;
                    int scaled = mul(fill_like(gt, static_cast<int>(gm.rows()),
                                               static_cast<int>(gm.cols())),
                                     constant(gm))
                                     .id;
                    acc_a = accumulate(acc_a, scaled);
                }
                break;
            }
        }
    }
    return gid;
}

void Tape::backward(DiffTensor loss) {
    check_same_tape(loss);
    if (nodes_.size() == last_backward_size_)
        throw StateError("backward called twice without new recording");

    const std::size_t mark = nodes_.size();
    std::vector<int> gid = build_grad_graph(loss.id);

    for (std::size_t id = 0; id < mark; ++id) {
        Node& n = nodes_[id];
        if (!n.requires_grad) continue;
        const int g = gid[id];
        n.grad = g >= 0 ? nodes_[static_cast<std::size_t>(g)].value
                        : Matrix::Zero(n.value.rows(), n.value.cols());
        n.has_grad = true;
    }
    truncate(mark);
    last_backward_size_ = nodes_.size();
}

std::vector<DiffTensor> Tape::grad_nodes(DiffTensor loss, const std::vector<DiffTensor>& wrts) {
    check_same_tape(loss);
    for (DiffTensor w : wrts) check_same_tape(w);

    std::vector<int> gid = build_grad_graph(loss.id);
    std::vector<DiffTensor> out;
    out.reserve(wrts.size());
    for (DiffTensor w : wrts) {
        const int g = gid[static_cast<std::size_t>(w.id)];
        if (g >= 0) {
            out.push_back(wrap(g));
        } else {
            out.push_back(constant(Matrix::Zero(w.value().rows(), w.value().cols())));
        }
    }
    return out;
}

Matrix finite_difference_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                                  double h) {
    if (h <= 0.0) throw ValidationError("finite differences require h > 0");
    Matrix grad(x.rows(), x.cols());
    Matrix probe = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double orig = probe(i, j);
            probe(i, j) = orig + h;
            const double up = f(probe);
            probe(i, j) = orig - h;
            const double down = f(probe);
            probe(i, j) = orig;
            grad(i, j) = (up - down) / (2.0 * h);
        }
    return grad;
}

Matrix normalized_laplacian(const Matrix& adjacency) {
    const int m = static_cast<int>(adjacency.rows());
    Vector deg = adjacency.rowwise().sum();
    Matrix lap = Matrix::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        if (deg(i) <= 0.0) continue;
        lap(i, i) = 1.0 - adjacency(i, i) / deg(i);
        for (int j = 0; j < m; ++j) {
            if (j == i || deg(j) <= 0.0 || adjacency(i, j) == 0.0) continue;
            lap(i, j) = -adjacency(i, j) / std::sqrt(deg(i) * deg(j));
        }
    }
    return lap;
}

Vector laplacian_spectrum(const Matrix& adjacency) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(normalized_laplacian(adjacency),
                                                 Eigen::EigenvaluesOnly);
    return solver.eigenvalues();
}

Vector laplacian_spectrum(const SparseMatrix& adjacency) {
    return laplacian_spectrum(Matrix(adjacency));
}

Vector spectrum_quantiles(const Vector& sorted_eigenvalues, int grid) {
    const int m = static_cast<int>(sorted_eigenvalues.size());
    if (m == 0) throw ValidationError("empty spectrum");
    Vector q(grid);
    for (int g = 0; g < grid; ++g)
        q(g) = sorted_eigenvalues(std::min(m - 1, static_cast<int>((g + 0.5) / grid * m)));
    return q;
}

}  // namespace mlgc
