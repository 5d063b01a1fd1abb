#include "mlgc/losses.hpp"

#include <algorithm>
#include <cmath>

#include "mlgc/errors.hpp"

namespace mlgc {

namespace {

void check_binary(const Matrix& labels) {
    if (!((labels.array() == 0.0) || (labels.array() == 1.0)).all())
        throw ValidationError("labels must be 0/1");
}

void check_shapes(DiffTensor logits, const Matrix& labels) {
    if (logits.rows() != labels.rows() || logits.cols() != labels.cols())
        throw ValidationError("logit and label shapes differ");
}

}  // namespace

DiffTensor bce_loss_node(Tape& tape, DiffTensor logits, const Matrix& labels,
                         const std::optional<Vector>& weights) {
    check_binary(labels);
    check_shapes(logits, labels);
    if (weights) {
        if (weights->size() != labels.cols())
            throw ValidationError("class weight count differs from class count");
        if ((weights->array() <= 0.0).any()) throw ValidationError("class weights must be positive");
    }

    Matrix pos_weight = labels;  // w_k * y
    if (weights)
        for (Eigen::Index c = 0; c < labels.cols(); ++c) pos_weight.col(c) *= (*weights)(c);

    DiffTensor prob = tape.clamp(tape.sigmoid(logits), kProbEps, 1.0 - kProbEps);
    DiffTensor pos_term = tape.mul(tape.log(prob), tape.constant(std::move(pos_weight)));
    DiffTensor neg_term = tape.mul(tape.log(tape.affine(prob, -1.0, 1.0)),
                                   tape.constant((1.0 - labels.array()).matrix()));
    return tape.affine(tape.mean(tape.add(pos_term, neg_term)), -1.0, 0.0);
}

double bce_loss(const Matrix& logits, const Matrix& labels,
                const std::optional<Vector>& weights) {
    Tape tape;
    return bce_loss_node(tape, tape.constant(logits), labels, weights).scalar();
}

DiffTensor softmargin_loss_node(Tape& tape, DiffTensor logits, const Matrix& labels) {
    check_binary(labels);
    check_shapes(logits, labels);
    // Targets remapped to {-1, +1}; the op computes log(1 + exp(-z t)) stably.
    Matrix neg_target = (1.0 - 2.0 * labels.array()).matrix();
    return tape.mean(tape.softplus(tape.mul(logits, tape.constant(std::move(neg_target)))));
}

double softmargin_loss(const Matrix& logits, const Matrix& labels) {
    Tape tape;
    return softmargin_loss_node(tape, tape.constant(logits), labels).scalar();
}

DiffTensor cross_entropy_loss_node(Tape& tape, DiffTensor logits, const Matrix& onehot) {
    check_binary(onehot);
    check_shapes(logits, onehot);
    for (Eigen::Index i = 0; i < onehot.rows(); ++i)
        if (onehot.row(i).sum() != 1.0)
            throw ValidationError("cross entropy requires exactly one class per node");

    // Rows shifted by their max; the shift cancels identically in the
    // log-softmax, so freezing it keeps gradients exact.
    Matrix shift = logits.value().rowwise().maxCoeff();
    DiffTensor centered =
        tape.sub(logits, tape.broadcast_cols(tape.constant(std::move(shift)),
                                             static_cast<int>(onehot.cols())));
    DiffTensor log_norm = tape.log(tape.row_sum(tape.exp(centered)));
    DiffTensor picked = tape.row_sum(tape.mul(centered, tape.constant(onehot)));
    return tape.mean(tape.sub(log_norm, picked));
}

double cross_entropy_loss(const Matrix& logits, const Matrix& onehot) {
    Tape tape;
    return cross_entropy_loss_node(tape, tape.constant(logits), onehot).scalar();
}

DiffTensor loss_node(Tape& tape, const LossSpec& spec, DiffTensor logits, const Matrix& labels) {
    switch (spec.kind) {
        case LossKind::bce:
            return bce_loss_node(tape, logits, labels, spec.classWeights);
        case LossKind::softmargin:
            return softmargin_loss_node(tape, logits, labels);
        case LossKind::ce:
            return cross_entropy_loss_node(tape, logits, labels);
    }
    throw ConfigError("unknown loss kind");
}

Vector classwise_coefficients(const Matrix& labels) {
    check_binary(labels);
    Vector counts = labels.colwise().sum();
    const double max_count = counts.maxCoeff();
    if (max_count <= 0.0) throw ValidationError("all classes are empty");
    return counts / max_count;
}

Vector positive_class_weights(const Matrix& labels) {
    check_binary(labels);
    const double n = static_cast<double>(labels.rows());
    if (n == 0.0) throw ValidationError("empty label matrix");
    Vector out(labels.cols());
    for (Eigen::Index c = 0; c < labels.cols(); ++c) {
        const double pos = labels.col(c).sum();
        const double neg = n - pos;
        out(c) = std::clamp(neg / std::max(pos, 1.0), 0.1, 10.0);
    }
    return out;
}

}  // namespace mlgc
