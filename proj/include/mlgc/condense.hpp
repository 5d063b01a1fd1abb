#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlgc/graph.hpp"
#include "mlgc/init.hpp"
#include "mlgc/losses.hpp"
#include "mlgc/models.hpp"

namespace mlgc {

enum class CondenseMethod { gcond, gcdm, sgdd };

struct CondenseConfig {
    CondenseMethod method = CondenseMethod::gcond;
    double cRate = 0.1;

    int outerRestarts = 5;  // model re-initializations
    int innerSteps = 50;    // optimization steps per restart
    int featureSteps = 10;  // tau1: feature-phase length
    int structureSteps = 5; // tau2: structure-phase length (0 allowed when graphless)
    int modelSteps = 3;     // tau_theta: inner model advancement per step

    double etaFeatures = 0.1;
    double etaStructure = 0.1;
    double etaModel = 1e-2;

    LossSpec loss;
    InitStrategy init;
    StructureMode structureMode = StructureMode::learned;

    double sgddAlpha = 0.1;
    double sgddBeta = 0.01;
    double delta = 0.5;
    std::uint64_t seed = 0;

    GnnSpec model;           // matching surrogate
    int batchCap = 256;      // original-branch class batch ceiling
    int eigSolveCeiling = 20000;  // dense spectrum guard for sgdd

    int nPrime(int n) const;
    void validate(int n) const;  // throws ConfigError
};

struct TraceEntry {
    int step;           // global index across restarts
    int outer;
    int inner;
    std::string phase;  // "feature" or "structure"
    double loss;
    Vector perClass;    // per-class contribution (zero for skipped classes)
    double wallMs;
};

struct MatchTrace {
    std::vector<TraceEntry> entries;
};

struct CondenseResult {
    SyntheticGraph synthetic;
    MatchTrace trace;
};

/// Sum over parameter matrices and columns of (1 - cosine similarity)
/// between corresponding gradient columns. A zero/zero column pair
/// contributes 0, a zero/nonzero pair contributes 1.
double gradient_match_distance(const std::vector<Matrix>& gradS,
                               const std::vector<Matrix>& gradG);

/// Tape form of the distance: gradS stays differentiable, gradG is the
/// detached original-branch gradient. Throws StateError when a gradS entry
/// does not depend on any differentiable leaf.
DiffTensor gradient_match_distance_node(Tape& tape, const std::vector<DiffTensor>& gradS,
                                        const std::vector<Matrix>& gradG);

/// Class-ratio-weighted squared distance of class-conditional mean
/// embeddings between the two graphs, per the distribution-matching method.
double gcdm_distance(const LabeledGraph& graph, const SyntheticGraph& synthetic,
                     const GnnParams& params);

/// Squared-quantile mismatch of normalized-Laplacian spectra on a 32-point
/// quantile grid.
double led_distance(const Matrix& aOriginal, const Matrix& aSynthetic);
double led_distance(const SparseMatrix& aOriginal, const Matrix& aSynthetic);

/// One per-class batch of original training nodes (anchors carrying label
/// `classId`) plus their 1-hop neighbors, capped by seeded subsampling.
/// `nodes` are original ids in ascending order; `anchors` index into it.
struct ClassBatch {
    std::vector<int> nodes;
    std::vector<int> anchors;
};
ClassBatch class_training_batch(const LabeledGraph& graph, int classId, int cap,
                                std::uint64_t seed);

CondenseResult gcond_condense(const LabeledGraph& graph, const CondenseConfig& config);
CondenseResult gcdm_condense(const LabeledGraph& graph, const CondenseConfig& config);
CondenseResult sgdd_condense(const LabeledGraph& graph, const CondenseConfig& config);
CondenseResult condense(const LabeledGraph& graph, const CondenseConfig& config);

}  // namespace mlgc
