#pragma once

#include <optional>

#include "mlgc/graph.hpp"
#include "mlgc/tape.hpp"

namespace mlgc {

enum class LossKind { bce, softmargin, ce };

struct LossSpec {
    LossKind kind = LossKind::bce;
    std::optional<Vector> classWeights;  // omega, positive, one per class
    bool classwiseCoeff = false;         // enable alpha_c weighting of class batches
};

// Sigmoid probabilities are clamped into [kProbEps, 1 - kProbEps] before logs.
inline constexpr double kProbEps = 1e-12;

/// Mean over all n*K entries of -[w_k y log s + (1-y) log(1-s)], s = sigma(z).
DiffTensor bce_loss_node(Tape& tape, DiffTensor logits, const Matrix& labels,
                         const std::optional<Vector>& weights = std::nullopt);
double bce_loss(const Matrix& logits, const Matrix& labels,
                const std::optional<Vector>& weights = std::nullopt);

/// Mean over entries of log(1 + exp(-z * t)) with targets t = 2y - 1.
DiffTensor softmargin_loss_node(Tape& tape, DiffTensor logits, const Matrix& labels);
double softmargin_loss(const Matrix& logits, const Matrix& labels);

/// Mean of -log softmax at the true class; labels must be strictly one-hot.
DiffTensor cross_entropy_loss_node(Tape& tape, DiffTensor logits, const Matrix& onehot);
double cross_entropy_loss(const Matrix& logits, const Matrix& onehot);

/// Dispatch on spec.kind; applies spec.classWeights for bce.
DiffTensor loss_node(Tape& tape, const LossSpec& spec, DiffTensor logits, const Matrix& labels);

/// alpha_c = N_c / N_max over positive counts per class.
Vector classwise_coefficients(const Matrix& labels);

/// omega_k = #neg_k / max(#pos_k, 1), clamped to [0.1, 10].
Vector positive_class_weights(const Matrix& labels);

}  // namespace mlgc
