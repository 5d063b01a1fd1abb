#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "mlgc/graph.hpp"

namespace mlgc {

class Tape;

/// Handle to a tensor recorded on a tape. Copying the handle never copies
/// the underlying storage.
struct DiffTensor {
    Tape* tape = nullptr;
    int id = -1;

    const Matrix& value() const;
    const Matrix& grad() const;
    bool requiresGrad() const;
    int rows() const;
    int cols() const;
    double scalar() const;  // value of a 1x1 tensor
};

/// Constant sparse operand (the fixed propagation operator of the original
/// graph). Both orientations are kept so backward can apply the transpose.
struct SharedSparse {
    std::shared_ptr<const SparseMatrix> mat;
    std::shared_ptr<const SparseMatrix> matT;
};

SharedSparse make_shared_sparse(SparseMatrix m);

/// Reverse-mode differentiation tape. Nodes evaluate eagerly and in a fixed
/// order, so identical recordings give bit-identical values and gradients.
/// Gradient construction itself emits tape nodes, which is what allows
/// differentiating through an inner gradient (grad_nodes + backward).
class Tape {
  public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    DiffTensor leaf(Matrix value, bool requires_grad);
    DiffTensor constant(Matrix value) { return leaf(std::move(value), false); }
    DiffTensor scalar_constant(double v);

    // b may have the same shape as a, be a 1 x cols row vector, or be 1x1.
    DiffTensor add(DiffTensor a, DiffTensor b);
    DiffTensor sub(DiffTensor a, DiffTensor b);
    DiffTensor mul(DiffTensor a, DiffTensor b);
    DiffTensor divide(DiffTensor a, DiffTensor b);  // same shape only
    DiffTensor affine(DiffTensor a, double scale, double shift);

    DiffTensor matmul(DiffTensor a, DiffTensor b);
    DiffTensor spmm(const SharedSparse& s, DiffTensor b);

    DiffTensor relu(DiffTensor a);
    DiffTensor sigmoid(DiffTensor a);
    DiffTensor exp(DiffTensor a);
    DiffTensor log(DiffTensor a);    // domain error on non-positive input
    DiffTensor sqrt(DiffTensor a);   // domain error on negative input
    DiffTensor softplus(DiffTensor a);
    DiffTensor clamp(DiffTensor a, double lo, double hi);

    DiffTensor sum(DiffTensor a);
    DiffTensor mean(DiffTensor a);
    DiffTensor row_sum(DiffTensor a);  // n x c -> n x 1
    DiffTensor col_sum(DiffTensor a);  // n x c -> 1 x c
    DiffTensor broadcast_rows(DiffTensor row, int n);  // 1 x c -> n x c
    DiffTensor broadcast_cols(DiffTensor col, int c);  // n x 1 -> n x c
    DiffTensor fill_like(DiffTensor scalar, int rows, int cols);

    DiffTensor concat_rows(DiffTensor a, DiffTensor b);
    DiffTensor transpose(DiffTensor a);
    DiffTensor reshape(DiffTensor a, int rows, int cols);
    DiffTensor gather_rows(DiffTensor a, std::vector<int> idx);
    DiffTensor scatter_rows_add(DiffTensor a, std::vector<int> idx, int out_rows);

    // n x d -> n^2 x 2d; row i*n+j holds [x_i | x_j]. Used to feed pairwise
    // feature MLPs.
    DiffTensor pairwise_concat(DiffTensor a);

    // Squared-quantile mismatch between the normalized-Laplacian spectrum of
    // a dense symmetric adjacency and a fixed reference quantile vector.
    DiffTensor led_quantile_distance(DiffTensor adjacency, const Vector& ref_quantiles);

    /// Numeric reverse pass: fills .grad on every requiresGrad tensor
    /// recorded so far, then discards the gradient subgraph. Calling it
    /// again without recording anything new is a state error.
    void backward(DiffTensor loss);

    /// Differentiable reverse pass: returns d(loss)/d(wrt) as tape nodes so
    /// the result can participate in further recording (and be backward-ed
    /// through). Unreachable wrts yield zero tensors.
    std::vector<DiffTensor> grad_nodes(DiffTensor loss, const std::vector<DiffTensor>& wrts);

    std::size_t size() const;
    void truncate(std::size_t mark);
    void clear();

    const Matrix& value_of(int id) const;
    const Matrix& grad_of(int id) const;
    bool requires_grad_of(int id) const;

  private:
    struct Node;
    std::vector<Node> nodes_;
    std::size_t last_backward_size_ = static_cast<std::size_t>(-1);

    int record(Node node);
    DiffTensor wrap(int id) { return DiffTensor{this, id}; }
    void check_same_tape(DiffTensor t) const;
    std::vector<int> build_grad_graph(int loss_id);
    int accumulate(int acc, int contrib);
    int vjp_reduce_like(int g, int target_rows, int target_cols);
};

/// Central-difference gradient of a scalar function, error O(h^2). Test
/// oracle: independent of the tape machinery it is used to check.
Matrix finite_difference_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                                  double h);

// ---- spectral helpers shared by the LED op and its oracle ----

inline constexpr int kLedQuantileGrid = 32;

/// Normalized Laplacian with the convention that an isolated node
/// contributes a zero row (eigenvalue 0), keeping spectra in [0, 2].
Matrix normalized_laplacian(const Matrix& adjacency);

/// Ascending eigenvalues of normalized_laplacian(adjacency).
Vector laplacian_spectrum(const Matrix& adjacency);
Vector laplacian_spectrum(const SparseMatrix& adjacency);

/// Empirical quantiles of a sorted spectrum at `grid` midpoint levels.
Vector spectrum_quantiles(const Vector& sorted_eigenvalues, int grid = kLedQuantileGrid);

inline const Matrix& DiffTensor::value() const { return tape->value_of(id); }
inline const Matrix& DiffTensor::grad() const { return tape->grad_of(id); }
inline bool DiffTensor::requiresGrad() const { return tape->requires_grad_of(id); }
inline int DiffTensor::rows() const { return static_cast<int>(value().rows()); }
inline int DiffTensor::cols() const { return static_cast<int>(value().cols()); }
inline double DiffTensor::scalar() const { return value()(0, 0); }

}  // namespace mlgc
