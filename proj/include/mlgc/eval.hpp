#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mlgc/graph.hpp"
#include "mlgc/losses.hpp"
#include "mlgc/models.hpp"

namespace mlgc {

struct EvalModelSpec {
    GnnSpec gnn;
    int epochs = 200;
    double learningRate = 1e-2;
};

struct EvalReport {
    double f1Micro = 0.0;
    double f1Macro = 0.0;
    Vector perClassF1;
    std::string trainedOn;  // "synthetic" or "whole"
    std::vector<std::uint64_t> seedsUsed;
    Matrix labelCorrelationOriginal;   // P of the original labels
    Matrix labelCorrelationSynthetic;  // P of the synthetic labels
    Matrix labelLaplacianOriginal;     // L_o = D - P
    Matrix labelLaplacianSynthetic;
    Vector classDistOriginal;
    Vector classDistSynthetic;
};

/// Positive iff sigma(z) > 0.5 (z > 0); an all-negative row gets a single
/// forced positive at its argmax logit.
Matrix predict_labels(const Matrix& logits);

/// Globally pooled 2TP / (2TP + FP + FN). Both-all-zero inputs return 1
/// by convention (logged to stderr).
double f1_micro(const Matrix& pred, const Matrix& truth);

/// Unweighted mean of per-class F1; a class absent from both matrices
/// scores 1, a class with support or predictions but no true positives
/// scores by the harmonic-mean formula (0 when TP = 0).
double f1_macro(const Matrix& pred, const Matrix& truth);
Vector per_class_f1(const Matrix& pred, const Matrix& truth);

/// Conditional co-occurrence P(i,j) = M(i,j)/N_i (rows of empty classes are
/// zero) and the label Laplacian L_o = Diag(P) - P.
std::pair<Matrix, Matrix> label_correlation(const Matrix& labels);

std::pair<Vector, Vector> class_distribution_report(const LabeledGraph& original,
                                                    const SyntheticGraph& synthetic);

/// Train a fresh model per seed on the synthetic graph (or the original
/// train split when wholeBaseline), select by F1-micro on the original
/// validation split, report mean test metrics over seeds.
EvalReport train_eval_pipeline(const LabeledGraph& original, const SyntheticGraph& synthetic,
                               const EvalModelSpec& model, const LossSpec& loss,
                               const std::vector<std::uint64_t>& seeds,
                               bool wholeBaseline = false, int jobs = 1);

}  // namespace mlgc
