#include "mlgc/condense.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "mlgc/errors.hpp"
#include "mlgc/rng.hpp"

namespace mlgc {

namespace {

constexpr std::uint64_t kSaltInit = 0x696e6974ULL;
constexpr std::uint64_t kSaltPhi = 0x706869ULL;
constexpr std::uint64_t kSaltTheta = 0x7468657461ULL;
constexpr std::uint64_t kSaltBatch = 0x6261746368ULL;
constexpr std::uint64_t kSaltNoise = 0x7aULL;

Matrix gather_matrix_rows(const Matrix& m, const std::vector<int>& idx) {
    Matrix out(static_cast<Eigen::Index>(idx.size()), m.cols());
    for (std::size_t p = 0; p < idx.size(); ++p)
        out.row(static_cast<Eigen::Index>(p)) = m.row(idx[p]);
    return out;
}

// Diagonal replaced by 1, then D^{-1/2} U D^{-1/2} with the same
// multiplication order as the tape path.
Matrix synthetic_propagation_value(const Matrix& soft) {
    Matrix u = soft;
    u.diagonal().setOnes();
    Vector dinv = u.rowwise().sum().array().rsqrt();
    Matrix p(u.rows(), u.cols());
    for (Eigen::Index i = 0; i < u.rows(); ++i)
        for (Eigen::Index j = 0; j < u.cols(); ++j) p(i, j) = u(i, j) * (dinv(i) * dinv(j));
    return p;
}

std::vector<int> seeded_subsample(const std::vector<int>& pool, int count, std::uint64_t seed) {
    auto gen = rng::engine(seed);
    std::vector<int> work = pool;
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> pick(i, static_cast<int>(work.size()) - 1);
        std::swap(work[static_cast<std::size_t>(i)], work[static_cast<std::size_t>(pick(gen))]);
    }
    work.resize(static_cast<std::size_t>(count));
    return work;
}

}  // namespace

int CondenseConfig::nPrime(int n) const {
    return std::max(1, static_cast<int>(std::llround(cRate * n)));
}

void CondenseConfig::validate(int n) const {
    if (cRate <= 0.0 || cRate > 1.0) throw ConfigError("c-rate must lie in (0, 1]");
    if (nPrime(n) > n) throw ConfigError("c-rate yields more synthetic nodes than original");
    if (outerRestarts < 1) throw ConfigError("outer restarts must be >= 1");
    if (innerSteps < 1) throw ConfigError("inner steps must be >= 1");
    if (featureSteps < 1) throw ConfigError("feature steps must be >= 1");
    if (modelSteps < 1) throw ConfigError("model steps must be >= 1");
    if (structureSteps < 0) throw ConfigError("structure steps must be >= 0");
    if (structureSteps == 0 && structureMode == StructureMode::learned)
        throw ConfigError("structure steps may only be 0 in graphless mode");
    if (etaFeatures <= 0.0 || etaStructure <= 0.0 || etaModel <= 0.0)
        throw ConfigError("learning rates must be positive");
    if (sgddAlpha < 0.0 || sgddBeta < 0.0) throw ConfigError("alpha and beta must be >= 0");
    if (delta < 0.0 || delta >= 1.0) throw ConfigError("delta must lie in [0, 1)");
    if (batchCap < 1) throw ConfigError("batch cap must be >= 1");
}

double gradient_match_distance(const std::vector<Matrix>& gradS,
                               const std::vector<Matrix>& gradG) {
    if (gradS.size() != gradG.size())
        throw ValidationError("gradient lists have different lengths");
    double total = 0.0;
    for (std::size_t p = 0; p < gradS.size(); ++p) {
        const Matrix& s = gradS[p];
        const Matrix& g = gradG[p];
        if (s.rows() != g.rows() || s.cols() != g.cols())
            throw ValidationError("gradient shapes differ");
        double columns = 0.0;
        double fixed = 0.0;
        for (Eigen::Index c = 0; c < s.cols(); ++c) {
            const double ns = s.col(c).norm();
            const double ng = g.col(c).norm();
            if (ns == 0.0 && ng == 0.0) {
                columns += 0.0;
            } else if (ns == 0.0 || ng == 0.0) {
                fixed += 1.0;
            } else {
                columns += 1.0 - s.col(c).dot(g.col(c)) / (ns * ng);
            }
        }
        total += columns;
        total += fixed;
    }
    return total;
}

DiffTensor gradient_match_distance_node(Tape& tape, const std::vector<DiffTensor>& gradS,
                                        const std::vector<Matrix>& gradG) {
    if (gradS.size() != gradG.size())
        throw ValidationError("gradient lists have different lengths");
    DiffTensor total = tape.scalar_constant(0.0);
    for (std::size_t p = 0; p < gradS.size(); ++p) {
        DiffTensor s = gradS[p];
        const Matrix& g = gradG[p];
        if (s.rows() != g.rows() || s.cols() != g.cols())
            throw ValidationError("gradient shapes differ");
        if (!s.requiresGrad())
            throw StateError("detached inner gradient passed to matching distance");

        const Eigen::Index cols = g.cols();
        Matrix ng_row(1, cols), valid(1, cols), guard(1, cols);
        double fixed = 0.0;
        for (Eigen::Index c = 0; c < cols; ++c) {
            const double ns = s.value().col(c).norm();
            const double ng = g.col(c).norm();
            ng_row(0, c) = ng;
            const bool ok = ns != 0.0 && ng != 0.0;
            valid(0, c) = ok ? 1.0 : 0.0;
            guard(0, c) = ok ? 0.0 : 1.0;
            if (!ok && (ns != 0.0 || ng != 0.0)) fixed += 1.0;
        }

        DiffTensor dots = tape.col_sum(tape.mul(s, tape.constant(g)));
        // The guard keeps masked columns away from sqrt(0) and x/0 in the
        // backward pass; it adds exact zero on live columns.
        DiffTensor guard_row = tape.constant(std::move(guard));
        DiffTensor ns_row = tape.sqrt(tape.add(tape.col_sum(tape.mul(s, s)), guard_row));
        DiffTensor denom = tape.add(tape.mul(ns_row, tape.constant(ng_row)), guard_row);
        DiffTensor cosine = tape.divide(dots, denom);
        DiffTensor per_col = tape.mul(
            tape.sub(tape.constant(Matrix::Ones(1, cols)), cosine), tape.constant(std::move(valid)));
        total = tape.add(total, tape.sum(per_col));
        total = tape.add(total, tape.scalar_constant(fixed));
    }
    return total;
}

double gcdm_distance(const LabeledGraph& graph, const SyntheticGraph& synthetic,
                     const GnnParams& params) {
    if (synthetic.labels.cols() != graph.k())
        throw ValidationError("class counts differ between graphs");
    if (synthetic.features.cols() != graph.d())
        throw ValidationError("feature dimensions differ between graphs");

    const auto setsG = class_node_sets(graph.labels);
    const auto setsS = class_node_sets(synthetic.labels);

    double total_members = 0.0;
    for (const auto& s : setsS) total_members += static_cast<double>(s.size());
    if (total_members == 0.0)
        throw ValidationError("all classes are empty on the synthetic side");

    Matrix embG = gnn_forward_value(params.spec, params.weights, normalize_adjacency(graph),
                                    graph.features);
    Matrix embS;
    if (synthetic.adjacency) {
        embS = gnn_forward_value_dense(params.spec, params.weights,
                                       dense_propagation_value(*synthetic.adjacency),
                                       synthetic.features);
    } else {
        embS = gnn_forward_value(params.spec, params.weights, std::nullopt, synthetic.features);
    }

    double dist = 0.0;
    for (int c = 0; c < graph.k(); ++c) {
        const auto& vg = setsG[static_cast<std::size_t>(c)];
        const auto& vs = setsS[static_cast<std::size_t>(c)];
        if (vg.empty() || vs.empty()) continue;
        const double rc = static_cast<double>(vs.size()) / total_members;
        Matrix mg = gather_matrix_rows(embG, vg).colwise().mean();
        Matrix ms = gather_matrix_rows(embS, vs).colwise().mean();
        dist += rc * (mg - ms).squaredNorm();
    }
    return dist;
}

double led_distance(const Matrix& aOriginal, const Matrix& aSynthetic) {
    if (!aOriginal.isApprox(aOriginal.transpose(), 0.0) ||
        !aSynthetic.isApprox(aSynthetic.transpose(), 0.0))
        throw ValidationError("led distance requires symmetric adjacencies");
    if ((aOriginal.array() < 0.0).any() || (aSynthetic.array() < 0.0).any())
        throw ValidationError("led distance requires nonnegative adjacencies");
    Vector qa = spectrum_quantiles(laplacian_spectrum(aOriginal));
    Vector qb = spectrum_quantiles(laplacian_spectrum(aSynthetic));
    return (qa - qb).squaredNorm() / kLedQuantileGrid;
}

double led_distance(const SparseMatrix& aOriginal, const Matrix& aSynthetic) {
    return led_distance(Matrix(aOriginal), aSynthetic);
}

ClassBatch class_training_batch(const LabeledGraph& graph, int classId, int cap,
                                std::uint64_t seed) {
    if (classId < 0 || classId >= graph.k()) throw ValidationError("class id out of range");
    ClassBatch batch;

    std::vector<int> anchors;
    for (int i = 0; i < graph.n(); ++i)
        if (graph.split[static_cast<std::size_t>(i)] == Split::train &&
            graph.labels(i, classId) == 1.0)
            anchors.push_back(i);
    if (anchors.empty()) return batch;

    std::vector<int> chosen_anchors;
    std::vector<int> chosen_neighbors;
    if (static_cast<int>(anchors.size()) >= cap) {
        chosen_anchors = seeded_subsample(anchors, cap, rng::derive(seed, 1));
    } else {
        chosen_anchors = anchors;
        std::vector<bool> is_anchor(static_cast<std::size_t>(graph.n()), false);
        for (int a : anchors) is_anchor[static_cast<std::size_t>(a)] = true;

        std::vector<bool> seen(static_cast<std::size_t>(graph.n()), false);
        std::vector<int> neighbors;
        for (int a : anchors)
            for (SparseMatrix::InnerIterator it(graph.adjacency, a); it; ++it) {
                const int v = static_cast<int>(it.row());
                if (!is_anchor[static_cast<std::size_t>(v)] && !seen[static_cast<std::size_t>(v)]) {
                    seen[static_cast<std::size_t>(v)] = true;
                    neighbors.push_back(v);
                }
            }
        std::sort(neighbors.begin(), neighbors.end());
        const int room = cap - static_cast<int>(chosen_anchors.size());
        if (static_cast<int>(neighbors.size()) > room) {
            chosen_neighbors = seeded_subsample(neighbors, room, rng::derive(seed, 2));
        } else {
            chosen_neighbors = neighbors;
        }
    }

    batch.nodes = chosen_anchors;
    batch.nodes.insert(batch.nodes.end(), chosen_neighbors.begin(), chosen_neighbors.end());
    std::sort(batch.nodes.begin(), batch.nodes.end());

    std::vector<bool> keep(static_cast<std::size_t>(graph.n()), false);
    for (int a : chosen_anchors) keep[static_cast<std::size_t>(a)] = true;
    for (std::size_t p = 0; p < batch.nodes.size(); ++p)
        if (keep[static_cast<std::size_t>(batch.nodes[p])])
            batch.anchors.push_back(static_cast<int>(p));
    return batch;
}

namespace {

// Detached original-branch gradient of the class batch at the shared
// current model parameters.
std::vector<Matrix> original_branch_gradient(const LabeledGraph& graph, const SparseMatrix& ahat,
                                             const ClassBatch& batch, const GnnParams& theta,
                                             const LossSpec& loss) {
    SparseMatrix sub = sparse_submatrix(ahat, batch.nodes);
    Matrix xb = gather_matrix_rows(graph.features, batch.nodes);
    std::vector<int> anchor_ids;
    anchor_ids.reserve(batch.anchors.size());
    for (int p : batch.anchors) anchor_ids.push_back(batch.nodes[static_cast<std::size_t>(p)]);
    Matrix yb = gather_matrix_rows(graph.labels, anchor_ids);

    Tape tape;
    auto weights = lift_params(tape, theta.weights, true);
    DiffTensor logits = gnn_forward(tape, theta.spec, weights,
                                    Propagation::from_sparse(make_shared_sparse(std::move(sub))),
                                    tape.constant(std::move(xb)));
    DiffTensor anchor_logits = tape.gather_rows(logits, batch.anchors);
    tape.backward(loss_node(tape, loss, anchor_logits, yb));

    std::vector<Matrix> grads;
    grads.reserve(weights.size());
    for (DiffTensor w : weights) grads.push_back(w.grad());
    return grads;
}

// tau_theta plain gradient-descent steps of the surrogate on the full
// synthetic data, propagation frozen at its current value.
void advance_model(GnnParams& theta, const CondenseConfig& cfg, const Matrix& x, const Matrix& y,
                   const std::optional<Matrix>& dense_prop) {
    for (int s = 0; s < cfg.modelSteps; ++s) {
        Tape tape;
        auto weights = lift_params(tape, theta.weights, true);
        Propagation prop = dense_prop
                               ? Propagation::from_dense(tape.constant(*dense_prop))
                               : Propagation::identity();
        DiffTensor logits = gnn_forward(tape, cfg.model, weights, prop, tape.constant(x));
        tape.backward(loss_node(tape, cfg.loss, logits, y));
        for (std::size_t i = 0; i < weights.size(); ++i) {
            theta.weights[i] -= cfg.etaModel * weights[i].grad();
            if (!theta.weights[i].allFinite())
                throw DivergenceError("surrogate parameters diverged");
        }
    }
}

// alpha_c-weighted sum of per-class matching distances. Classes empty on
// either side are skipped and contribute zero.
DiffTensor matching_loss(Tape& tape, const LabeledGraph& graph, const SparseMatrix& ahat,
                         const CondenseConfig& cfg, const GnnParams& theta,
                         const std::vector<DiffTensor>& weight_nodes, DiffTensor synthetic_logits,
                         const Matrix& yprime, const std::vector<std::vector<int>>& syn_sets,
                         const Vector& alpha, std::uint64_t step_seed, Vector* per_class) {
    DiffTensor total = tape.scalar_constant(0.0);
    per_class->setZero(graph.k());
    for (int c = 0; c < graph.k(); ++c) {
        const auto& syn_idx = syn_sets[static_cast<std::size_t>(c)];
        if (syn_idx.empty()) continue;
        ClassBatch batch =
            class_training_batch(graph, c, cfg.batchCap, rng::derive(step_seed, kSaltBatch, c));
        if (batch.anchors.empty()) continue;

        std::vector<Matrix> grad_g =
            original_branch_gradient(graph, ahat, batch, theta, cfg.loss);

        DiffTensor class_logits = tape.gather_rows(synthetic_logits, syn_idx);
        DiffTensor class_loss =
            loss_node(tape, cfg.loss, class_logits, gather_matrix_rows(yprime, syn_idx));
        std::vector<DiffTensor> grad_s = tape.grad_nodes(class_loss, weight_nodes);

        DiffTensor dist = gradient_match_distance_node(tape, grad_s, grad_g);
        (*per_class)(c) = alpha(c) * dist.scalar();
        total = tape.add(total, tape.affine(dist, alpha(c), 0.0));
    }
    return total;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

InitStrategy seeded_init(const CondenseConfig& cfg) {
    InitStrategy strategy = cfg.init;
    strategy.seed = rng::derive(cfg.seed, kSaltInit, strategy.seed);
    return strategy;
}

bool is_feature_phase(const CondenseConfig& cfg, bool learned, int t) {
    if (!learned || cfg.structureSteps == 0) return true;
    return t % (cfg.featureSteps + cfg.structureSteps) < cfg.featureSteps;
}

}  // namespace

CondenseResult gcond_condense(const LabeledGraph& graph, const CondenseConfig& cfg) {
    graph.validate();
    cfg.validate(graph.n());

    const int n_prime = cfg.nPrime(graph.n());
    const bool learned = cfg.structureMode == StructureMode::learned;

    SyntheticGraph seeded = initialize_synthetic(graph, n_prime, seeded_init(cfg));
    Matrix x = seeded.features;
    const Matrix y = seeded.labels;

    StructureGenerator gen =
        StructureGenerator::init(graph.d(), cfg.model.hidden, rng::derive(cfg.seed, kSaltPhi),
                                 cfg.delta);

    SparseMatrix ahat = normalize_adjacency(graph);
    Matrix train_labels = gather_matrix_rows(graph.labels, split_indices(graph, Split::train));
    Vector alpha = cfg.loss.classwiseCoeff ? classwise_coefficients(train_labels)
                                           : Vector::Ones(graph.k());
    const auto syn_sets = class_node_sets(y);

    MatchTrace trace;
    int global_step = 0;
    for (int k = 0; k < cfg.outerRestarts; ++k) {
        GnnParams theta = GnnParams::init(cfg.model, graph.d(), graph.k(),
                                          rng::derive(cfg.seed, kSaltTheta, k));
        for (int t = 0; t < cfg.innerSteps; ++t) {
            const auto started = std::chrono::steady_clock::now();
            const bool feature_phase = is_feature_phase(cfg, learned, t);

            Tape tape;
            DiffTensor xp = tape.leaf(x, feature_phase);
            auto weight_nodes = lift_params(tape, theta.weights, true);
            std::vector<DiffTensor> phi_nodes;
            Propagation prop = Propagation::identity();
            if (learned) {
                phi_nodes = lift_params(tape, gen.params(), !feature_phase);
                DiffTensor soft = infer_structure(tape, phi_nodes, xp);
                prop = Propagation::from_dense(synthetic_propagation(tape, soft));
            }
            DiffTensor logits = gnn_forward(tape, cfg.model, weight_nodes, prop, xp);

            Vector per_class(graph.k());
            DiffTensor total =
                matching_loss(tape, graph, ahat, cfg, theta, weight_nodes, logits, y, syn_sets,
                              alpha, rng::derive(cfg.seed, kSaltBatch, k, t), &per_class);
            const double loss_value = total.scalar();
            if (!std::isfinite(loss_value))
                throw DivergenceError("matching loss diverged at restart " + std::to_string(k) +
                                      " step " + std::to_string(t));

            tape.backward(total);
            if (feature_phase) {
                x -= cfg.etaFeatures * xp.grad();
            } else {
                auto params = gen.params();
                for (std::size_t i = 0; i < params.size(); ++i)
                    params[i] -= cfg.etaStructure * phi_nodes[i].grad();
                gen.set_params(params);
            }

            std::optional<Matrix> dense_prop;
            if (learned)
                dense_prop = synthetic_propagation_value(infer_structure_value(gen, x));
            advance_model(theta, cfg, x, y, dense_prop);

            trace.entries.push_back(TraceEntry{global_step++, k, t,
                                               feature_phase ? "feature" : "structure", loss_value,
                                               per_class, elapsed_ms(started)});
        }
    }

    CondenseResult result;
    result.synthetic.features = std::move(x);
    result.synthetic.labels = y;
    if (learned) {
        result.synthetic.adjacency =
            threshold_adjacency(infer_structure_value(gen, result.synthetic.features), cfg.delta);
        result.synthetic.structureMode = StructureMode::learned;
    } else {
        result.synthetic.structureMode = StructureMode::graphless;
    }
    result.synthetic.validate();
    result.trace = std::move(trace);
    return result;
}

CondenseResult gcdm_condense(const LabeledGraph& graph, const CondenseConfig& cfg) {
    graph.validate();
    cfg.validate(graph.n());

    const int n_prime = cfg.nPrime(graph.n());
    const bool learned = cfg.structureMode == StructureMode::learned;

    SyntheticGraph seeded = initialize_synthetic(graph, n_prime, seeded_init(cfg));
    Matrix x = seeded.features;
    const Matrix y = seeded.labels;

    StructureGenerator gen =
        StructureGenerator::init(graph.d(), cfg.model.hidden, rng::derive(cfg.seed, kSaltPhi),
                                 cfg.delta);

    // Matching happens against the training distribution.
    LabeledGraph train_graph = induced_subgraph(graph, split_indices(graph, Split::train));
    SparseMatrix ahat_train = normalize_adjacency(train_graph);
    const auto train_sets = class_node_sets(train_graph.labels);
    const auto syn_sets = class_node_sets(y);

    double total_members = 0.0;
    for (const auto& s : syn_sets) total_members += static_cast<double>(s.size());
    if (total_members == 0.0)
        throw ValidationError("all classes are empty on the synthetic side");
    Vector rc(graph.k());
    for (int c = 0; c < graph.k(); ++c)
        rc(c) = static_cast<double>(syn_sets[static_cast<std::size_t>(c)].size()) / total_members;

    MatchTrace trace;
    int global_step = 0;
    for (int k = 0; k < cfg.outerRestarts; ++k) {
        GnnParams theta = GnnParams::init(cfg.model, graph.d(), graph.k(),
                                          rng::derive(cfg.seed, kSaltTheta, k));
        Matrix emb_g = gnn_forward_value(cfg.model, theta.weights, ahat_train,
                                         train_graph.features);
        std::vector<Matrix> mean_g(static_cast<std::size_t>(graph.k()));
        for (int c = 0; c < graph.k(); ++c) {
            const auto& vg = train_sets[static_cast<std::size_t>(c)];
            if (!vg.empty())
                mean_g[static_cast<std::size_t>(c)] = gather_matrix_rows(emb_g, vg).colwise().mean();
        }

        for (int t = 0; t < cfg.innerSteps; ++t) {
            const auto started = std::chrono::steady_clock::now();
            const bool feature_phase = is_feature_phase(cfg, learned, t);

            Tape tape;
            DiffTensor xp = tape.leaf(x, feature_phase);
            auto weight_nodes = lift_params(tape, theta.weights, false);
            std::vector<DiffTensor> phi_nodes;
            Propagation prop = Propagation::identity();
            if (learned) {
                phi_nodes = lift_params(tape, gen.params(), !feature_phase);
                DiffTensor soft = infer_structure(tape, phi_nodes, xp);
                prop = Propagation::from_dense(synthetic_propagation(tape, soft));
            }
            DiffTensor emb_s = gnn_forward(tape, cfg.model, weight_nodes, prop, xp);

            Vector per_class = Vector::Zero(graph.k());
            DiffTensor total = tape.scalar_constant(0.0);
            for (int c = 0; c < graph.k(); ++c) {
                const auto& vg = train_sets[static_cast<std::size_t>(c)];
                const auto& vs = syn_sets[static_cast<std::size_t>(c)];
                if (vg.empty() || vs.empty()) continue;
                DiffTensor rows = tape.gather_rows(emb_s, vs);
                DiffTensor mean_s =
                    tape.affine(tape.col_sum(rows), 1.0 / static_cast<double>(vs.size()), 0.0);
                DiffTensor diff =
                    tape.sub(mean_s, tape.constant(mean_g[static_cast<std::size_t>(c)]));
                DiffTensor sq = tape.sum(tape.mul(diff, diff));
                per_class(c) = rc(c) * sq.scalar();
                total = tape.add(total, tape.affine(sq, rc(c), 0.0));
            }
            const double loss_value = total.scalar();
            if (!std::isfinite(loss_value))
                throw DivergenceError("distribution distance diverged at restart " +
                                      std::to_string(k) + " step " + std::to_string(t));

            tape.backward(total);
            if (feature_phase) {
                x -= cfg.etaFeatures * xp.grad();
            } else {
                auto params = gen.params();
                for (std::size_t i = 0; i < params.size(); ++i)
                    params[i] -= cfg.etaStructure * phi_nodes[i].grad();
                gen.set_params(params);
            }

            trace.entries.push_back(TraceEntry{global_step++, k, t,
                                               feature_phase ? "feature" : "structure", loss_value,
                                               per_class, elapsed_ms(started)});
        }
    }

    CondenseResult result;
    result.synthetic.features = std::move(x);
    result.synthetic.labels = y;
    if (learned) {
        result.synthetic.adjacency =
            threshold_adjacency(infer_structure_value(gen, result.synthetic.features), cfg.delta);
        result.synthetic.structureMode = StructureMode::learned;
    } else {
        result.synthetic.structureMode = StructureMode::graphless;
    }
    result.synthetic.validate();
    result.trace = std::move(trace);
    return result;
}

CondenseResult sgdd_condense(const LabeledGraph& graph, const CondenseConfig& cfg) {
    graph.validate();
    cfg.validate(graph.n());
    if (graph.n() > cfg.eigSolveCeiling)
        throw ScaleError("dense spectrum solve not supported at this scale (n = " +
                         std::to_string(graph.n()) + ", ceiling " +
                         std::to_string(cfg.eigSolveCeiling) + ")");

    const int n_prime = cfg.nPrime(graph.n());
    const bool learned = cfg.structureMode == StructureMode::learned;

    SyntheticGraph seeded = initialize_synthetic(graph, n_prime, seeded_init(cfg));
    Matrix x = seeded.features;
    const Matrix y = seeded.labels;

    SgddGenerator gen = SgddGenerator::init(n_prime, graph.d(), graph.k(), cfg.model.hidden,
                                            rng::derive(cfg.seed, kSaltPhi));

    // Coordinates drawn once per run and frozen.
    Matrix z(n_prime, n_prime);
    {
        auto engine = rng::engine(rng::derive(cfg.seed, kSaltNoise));
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int i = 0; i < n_prime; ++i)
            for (int j = 0; j < n_prime; ++j) z(i, j) = normal(engine);
    }

    const Vector ref_quantiles =
        spectrum_quantiles(laplacian_spectrum(graph.adjacency));

    SparseMatrix ahat = normalize_adjacency(graph);
    Matrix train_labels = gather_matrix_rows(graph.labels, split_indices(graph, Split::train));
    Vector alpha = cfg.loss.classwiseCoeff ? classwise_coefficients(train_labels)
                                           : Vector::Ones(graph.k());
    const auto syn_sets = class_node_sets(y);

    MatchTrace trace;
    int global_step = 0;
    for (int k = 0; k < cfg.outerRestarts; ++k) {
        GnnParams theta = GnnParams::init(cfg.model, graph.d(), graph.k(),
                                          rng::derive(cfg.seed, kSaltTheta, k));
        for (int t = 0; t < cfg.innerSteps; ++t) {
            const auto started = std::chrono::steady_clock::now();
            const bool feature_phase = is_feature_phase(cfg, learned, t);

            Tape tape;
            Vector per_class = Vector::Zero(graph.k());
            double loss_value = 0.0;
            if (feature_phase) {
                DiffTensor xp = tape.leaf(x, true);
                auto weight_nodes = lift_params(tape, theta.weights, true);
                Propagation prop = Propagation::identity();
                if (learned) {
                    auto phi_nodes = lift_params(tape, gen.params(), false);
                    DiffTensor soft = sgdd_generate(tape, phi_nodes, tape.constant(z), xp,
                                                    tape.constant(y));
                    prop = Propagation::from_dense(synthetic_propagation(tape, soft));
                }
                DiffTensor logits = gnn_forward(tape, cfg.model, weight_nodes, prop, xp);
                DiffTensor total =
                    matching_loss(tape, graph, ahat, cfg, theta, weight_nodes, logits, y, syn_sets,
                                  alpha, rng::derive(cfg.seed, kSaltBatch, k, t), &per_class);
                loss_value = total.scalar();
                if (!std::isfinite(loss_value))
                    throw DivergenceError("matching loss diverged at restart " +
                                          std::to_string(k) + " step " + std::to_string(t));
                tape.backward(total);
                x -= cfg.etaFeatures * xp.grad();
            } else {
                auto phi_nodes = lift_params(tape, gen.params(), true);
                DiffTensor soft = sgdd_generate(tape, phi_nodes, tape.constant(z),
                                                tape.constant(x), tape.constant(y));
                DiffTensor adj = unit_diagonal(tape, soft);
                DiffTensor total = tape.scalar_constant(0.0);
                if (cfg.sgddAlpha > 0.0)
                    total = tape.add(total, tape.affine(tape.led_quantile_distance(
                                                            adj, ref_quantiles),
                                                        cfg.sgddAlpha, 0.0));
                if (cfg.sgddBeta > 0.0)
                    total = tape.add(
                        total, tape.affine(tape.sqrt(tape.sum(tape.mul(adj, adj))),
                                           cfg.sgddBeta, 0.0));
                loss_value = total.scalar();
                if (!std::isfinite(loss_value))
                    throw DivergenceError("structure loss diverged at restart " +
                                          std::to_string(k) + " step " + std::to_string(t));
                tape.backward(total);
                auto params = gen.params();
                for (std::size_t i = 0; i < params.size(); ++i)
                    params[i] -= cfg.etaStructure * phi_nodes[i].grad();
                gen.set_params(params);
            }

            std::optional<Matrix> dense_prop;
            if (learned)
                dense_prop = synthetic_propagation_value(sgdd_generate_value(gen, z, x, y));
            advance_model(theta, cfg, x, y, dense_prop);

            trace.entries.push_back(TraceEntry{global_step++, k, t,
                                               feature_phase ? "feature" : "structure", loss_value,
                                               per_class, elapsed_ms(started)});
        }
    }

    CondenseResult result;
    result.synthetic.features = std::move(x);
    result.synthetic.labels = y;
    if (learned) {
        result.synthetic.adjacency = threshold_adjacency(
            sgdd_generate_value(gen, z, result.synthetic.features, result.synthetic.labels),
            cfg.delta);
        result.synthetic.structureMode = StructureMode::learned;
    } else {
        result.synthetic.structureMode = StructureMode::graphless;
    }
    result.synthetic.validate();
    result.trace = std::move(trace);
    return result;
}

CondenseResult condense(const LabeledGraph& graph, const CondenseConfig& cfg) {
    switch (cfg.method) {
        case CondenseMethod::gcond:
            return gcond_condense(graph, cfg);
        case CondenseMethod::gcdm:
            return gcdm_condense(graph, cfg);
        case CondenseMethod::sgdd:
            return sgdd_condense(graph, cfg);
    }
    throw ConfigError("unknown condensation method");
}

}  // namespace mlgc
