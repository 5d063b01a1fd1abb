#include "mlgc/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <optional>
#include <thread>

#include "mlgc/errors.hpp"

namespace mlgc {

Matrix predict_labels(const Matrix& logits) {
    if (!logits.allFinite()) throw ValidationError("non-finite logits");
    Matrix pred = (logits.array() > 0.0).cast<double>();
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        if (pred.row(i).sum() == 0.0) {
            Eigen::Index top = 0;
            logits.row(i).maxCoeff(&top);
            pred(i, top) = 1.0;
        }
    }
    return pred;
}

namespace {

void check_binary_pair(const Matrix& pred, const Matrix& truth) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw ValidationError("prediction and truth shapes differ");
    if (!((pred.array() == 0.0) || (pred.array() == 1.0)).all() ||
        !((truth.array() == 0.0) || (truth.array() == 1.0)).all())
        throw ValidationError("f1 inputs must be 0/1");
}

struct Counts {
    double tp = 0.0, fp = 0.0, fn = 0.0;
};

Counts class_counts(const Matrix& pred, const Matrix& truth, Eigen::Index c) {
    Counts k;
    for (Eigen::Index i = 0; i < pred.rows(); ++i) {
        const bool p = pred(i, c) == 1.0;
        const bool t = truth(i, c) == 1.0;
        if (p && t) k.tp += 1.0;
        else if (p) k.fp += 1.0;
        else if (t) k.fn += 1.0;
    }
    return k;
}

}  // namespace

namespace {

// Per-definition harmonic mean; precision/recall fall back to 0 on empty
// denominators so swapping pred and truth only swaps P and R.
double f1_from_counts(const Counts& k) {
    const double p = k.tp + k.fp == 0.0 ? 0.0 : k.tp / (k.tp + k.fp);
    const double r = k.tp + k.fn == 0.0 ? 0.0 : k.tp / (k.tp + k.fn);
    if (p + r == 0.0) return 0.0;
    return 2.0 * p * r / (p + r);
}

}  // namespace

double f1_micro(const Matrix& pred, const Matrix& truth) {
    check_binary_pair(pred, truth);
    Counts total;
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
        Counts k = class_counts(pred, truth, c);
        total.tp += k.tp;
        total.fp += k.fp;
        total.fn += k.fn;
    }
    if (total.tp + total.fp + total.fn == 0.0) {
        std::cerr << "f1_micro: no positives in either matrix, returning 1.0 by convention\n";
        return 1.0;
    }
    return f1_from_counts(total);
}

Vector per_class_f1(const Matrix& pred, const Matrix& truth) {
    check_binary_pair(pred, truth);
    Vector out(pred.cols());
    for (Eigen::Index c = 0; c < pred.cols(); ++c) {
        Counts k = class_counts(pred, truth, c);
        out(c) = k.tp + k.fp + k.fn == 0.0 ? 1.0 : f1_from_counts(k);
    }
    return out;
}

double f1_macro(const Matrix& pred, const Matrix& truth) {
    Vector per = per_class_f1(pred, truth);
    double sum = 0.0;  // sequential accumulation, matching the definition
    for (Eigen::Index c = 0; c < per.size(); ++c) sum += per(c);
    return sum / static_cast<double>(per.size());
}

std::pair<Matrix, Matrix> label_correlation(const Matrix& labels) {
    if (!((labels.array() == 0.0) || (labels.array() == 1.0)).all())
        throw ValidationError("labels must be 0/1");
    const Eigen::Index k = labels.cols();
    Matrix m = labels.transpose() * labels;  // co-occurrence counts, m(i,i) = N_i
    Matrix p = Matrix::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        if (m(i, i) > 0.0) p.row(i) = m.row(i) / m(i, i);
    }
    Matrix lo = Matrix(p.diagonal().asDiagonal()) - p;
    return {std::move(p), std::move(lo)};
}

std::pair<Vector, Vector> class_distribution_report(const LabeledGraph& original,
                                                    const SyntheticGraph& synthetic) {
    if (original.k() != synthetic.labels.cols())
        throw ValidationError("class counts differ between graphs");
    return {label_distribution(original.labels), label_distribution(synthetic.labels)};
}

namespace {

struct SeedResult {
    double micro = 0.0;
    double macro = 0.0;
    Vector perClass;
};

SeedResult run_single_seed(const LabeledGraph& original, const SyntheticGraph& synthetic,
                           const EvalModelSpec& model, const LossSpec& loss, std::uint64_t seed,
                           bool whole_baseline, const SparseMatrix& ahat_original) {
    const int d = original.d();
    const int k = original.k();

    GnnParams params = GnnParams::init(model.gnn, d, k, seed);

    // Training inputs.
    Matrix train_x;
    Matrix train_y;
    std::optional<Matrix> dense_prop;
    std::optional<SharedSparse> sparse_prop;
    std::vector<int> loss_rows;  // restrict loss to these logit rows when non-empty

    if (whole_baseline) {
        train_x = original.features;
        train_y = original.labels;
        sparse_prop = make_shared_sparse(ahat_original);
        loss_rows = split_indices(original, Split::train);
    } else {
        train_x = synthetic.features;
        train_y = synthetic.labels;
        if (synthetic.structureMode == StructureMode::learned)
            dense_prop = dense_propagation_value(*synthetic.adjacency);
    }

    const auto val_idx = split_indices(original, Split::val);
    const auto test_idx = split_indices(original, Split::test);

    auto original_predictions = [&](const std::vector<Matrix>& weights,
                                    const std::vector<int>& rows) {
        Matrix logits = gnn_forward_value(model.gnn, weights, ahat_original, original.features);
        Matrix sub(static_cast<Eigen::Index>(rows.size()), logits.cols());
        for (std::size_t p = 0; p < rows.size(); ++p)
            sub.row(static_cast<Eigen::Index>(p)) = logits.row(rows[p]);
        return predict_labels(sub);
    };
    auto truth_rows = [&](const std::vector<int>& rows) {
        Matrix sub(static_cast<Eigen::Index>(rows.size()), original.labels.cols());
        for (std::size_t p = 0; p < rows.size(); ++p)
            sub.row(static_cast<Eigen::Index>(p)) = original.labels.row(rows[p]);
        return sub;
    };

    std::vector<Matrix> best_weights = params.weights;
    double best_val = -1.0;

    Matrix loss_labels = train_y;
    if (!loss_rows.empty()) {
        loss_labels.resize(static_cast<Eigen::Index>(loss_rows.size()), train_y.cols());
        for (std::size_t p = 0; p < loss_rows.size(); ++p)
            loss_labels.row(static_cast<Eigen::Index>(p)) = train_y.row(loss_rows[p]);
    }

    for (int epoch = 0; epoch < model.epochs; ++epoch) {
        Tape tape;
        auto weights = lift_params(tape, params.weights, true);
        Propagation prop = Propagation::identity();
        if (sparse_prop) prop = Propagation::from_sparse(*sparse_prop);
        else if (dense_prop) prop = Propagation::from_dense(tape.constant(*dense_prop));
        DiffTensor logits = gnn_forward(tape, model.gnn, weights, prop, tape.constant(train_x));
        if (!loss_rows.empty()) logits = tape.gather_rows(logits, loss_rows);
        DiffTensor l = loss_node(tape, loss, logits, loss_labels);
        if (!std::isfinite(l.scalar()))
            throw DivergenceError("evaluation training diverged at epoch " +
                                  std::to_string(epoch));
        tape.backward(l);
        for (std::size_t i = 0; i < weights.size(); ++i)
            params.weights[i] -= model.learningRate * weights[i].grad();

        if (!val_idx.empty()) {
            const double val =
                f1_micro(original_predictions(params.weights, val_idx), truth_rows(val_idx));
            if (val > best_val) {
                best_val = val;
                best_weights = params.weights;
            }
        }
    }
    if (val_idx.empty()) best_weights = params.weights;

    SeedResult result;
    Matrix pred = original_predictions(best_weights, test_idx);
    Matrix truth = truth_rows(test_idx);
    result.micro = f1_micro(pred, truth);
    result.macro = f1_macro(pred, truth);
    result.perClass = per_class_f1(pred, truth);
    return result;
}

}  // namespace

EvalReport train_eval_pipeline(const LabeledGraph& original, const SyntheticGraph& synthetic,
                               const EvalModelSpec& model, const LossSpec& loss,
                               const std::vector<std::uint64_t>& seeds, bool wholeBaseline,
                               int jobs) {
    original.validate();
    if (!wholeBaseline) {
        synthetic.validate();
        if (synthetic.features.cols() != original.d() ||
            synthetic.labels.cols() != original.k())
            throw ValidationError("synthetic dimensions do not match the original graph");
    }
    if (seeds.empty()) throw ConfigError("at least one evaluation seed is required");
    if (split_indices(original, Split::test).empty())
        throw ValidationError("original graph has no test split");

    SparseMatrix ahat = normalize_adjacency(original);

    std::vector<SeedResult> results(seeds.size());
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(seeds.size())));
    if (workers == 1) {
        for (std::size_t s = 0; s < seeds.size(); ++s)
            results[s] = run_single_seed(original, synthetic, model, loss, seeds[s],
                                         wholeBaseline, ahat);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t s = next.fetch_add(1); s < seeds.size(); s = next.fetch_add(1))
                    results[s] = run_single_seed(original, synthetic, model, loss, seeds[s],
                                                 wholeBaseline, ahat);
            });
        for (auto& t : pool) t.join();
    }

    EvalReport report;
    report.trainedOn = wholeBaseline ? "whole" : "synthetic";
    report.seedsUsed = seeds;
    report.perClassF1 = Vector::Zero(original.k());
    for (const SeedResult& r : results) {  // deterministic fold in seed order
        report.f1Micro += r.micro;
        report.f1Macro += r.macro;
        report.perClassF1 += r.perClass;
    }
    const double count = static_cast<double>(results.size());
    report.f1Micro /= count;
    report.f1Macro /= count;
    report.perClassF1 /= count;

    auto [po, lo] = label_correlation(original.labels);
    report.labelCorrelationOriginal = std::move(po);
    report.labelLaplacianOriginal = std::move(lo);
    if (synthetic.labels.size() > 0) {
        auto [ps, ls] = label_correlation(synthetic.labels);
        report.labelCorrelationSynthetic = std::move(ps);
        report.labelLaplacianSynthetic = std::move(ls);
        report.classDistSynthetic = label_distribution(synthetic.labels);
    }
    report.classDistOriginal = label_distribution(original.labels);
    return report;
}

}  // namespace mlgc
