#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mlgc/graph.hpp"

namespace mlgc {

/// Line-oriented dataset directory:
///   meta.json     {"n":..., "d":..., "k":..., "directed":false}
///   edges.tsv     src<TAB>dst<TAB>weight, one line per undirected edge, src < dst
///   features.tsv  n lines of d tab-separated floats
///   labels.tsv    n lines of K tab-separated {0,1}
///   split.tsv     node_id<TAB>{train|val|test}, one line per node
LabeledGraph load_dataset(const std::filesystem::path& dir);
void save_dataset(const std::filesystem::path& dir, const LabeledGraph& graph);

/// Synthetic directory: same layout plus adj.tsv (dense rows of N' floats)
/// when the structure was learned; graphless directories omit adj.tsv and
/// leave edges.tsv empty. split.tsv tags every synthetic node as train.
void save_synthetic(const std::filesystem::path& dir, const SyntheticGraph& synthetic);
SyntheticGraph load_synthetic(const std::filesystem::path& dir);

struct PlantedConfig {
    int nodes = 300;
    int classes = 4;
    double overlap = 0.3;  // chance of carrying each secondary community label
    double pIn = 0.2;
    double pOut = 0.02;
    std::uint64_t seed = 0;
};

/// Stochastic-block-model graph with overlapping community labels; features
/// are the multi-hot community indicator plus unit Gaussian noise;
/// 60/20/20 split.
LabeledGraph make_planted_dataset(const PlantedConfig& config);

/// FNV-1a hash of the dataset files, for run manifests.
std::string dataset_hash(const std::filesystem::path& dir);

std::string format_double(double v);   // shortest round-trip text
double parse_double(const std::string& text, const std::string& where);

}  // namespace mlgc
