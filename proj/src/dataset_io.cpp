#include "mlgc/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "mlgc/errors.hpp"
#include "mlgc/rng.hpp"

namespace mlgc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw DataError("failed to format a number");
    return std::string(buf, ptr);
}

double parse_double(const std::string& text, const std::string& where) {
    double v = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw DataError(where + ": not a number: '" + text + "'");
    return v;
}

namespace {

long parse_long(const std::string& text, const std::string& where) {
    long v = 0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw DataError(where + ": not an integer: '" + text + "'");
    return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

std::vector<std::string> read_lines(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw DataError("missing file: " + file.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

std::string at_line(const fs::path& file, std::size_t idx) {
    return file.filename().string() + ":" + std::to_string(idx + 1);
}

struct Meta {
    int n = 0, d = 0, k = 0;
    std::string structure;  // empty, "learned" or "graphless"
};

Meta load_meta(const fs::path& dir) {
    std::ifstream in(dir / "meta.json");
    if (!in) throw DataError("missing file: " + (dir / "meta.json").string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("meta.json: " + std::string(e.what()));
    }
    Meta meta;
    try {
        meta.n = j.at("n").get<int>();
        meta.d = j.at("d").get<int>();
        meta.k = j.at("k").get<int>();
        if (j.at("directed").get<bool>()) throw DataError("meta.json: directed graphs unsupported");
    } catch (const json::exception& e) {
        throw DataError("meta.json: " + std::string(e.what()));
    }
    if (meta.n < 1 || meta.d < 1 || meta.k < 1)
        throw DataError("meta.json: n, d and k must be positive");
    if (j.contains("structure")) meta.structure = j["structure"].get<std::string>();
    return meta;
}

Matrix load_matrix(const fs::path& file, int rows, int cols, bool binary) {
    const auto lines = read_lines(file);
    if (static_cast<int>(lines.size()) != rows)
        throw DataError(file.filename().string() + ": expected " + std::to_string(rows) +
                        " lines, found " + std::to_string(lines.size()));
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        const auto cells = split_tabs(lines[static_cast<std::size_t>(i)]);
        if (static_cast<int>(cells.size()) != cols)
            throw DataError(at_line(file, static_cast<std::size_t>(i)) + ": expected " +
                            std::to_string(cols) + " columns, found " +
                            std::to_string(cells.size()));
        for (int c = 0; c < cols; ++c) {
            const double v = parse_double(cells[static_cast<std::size_t>(c)],
                                          at_line(file, static_cast<std::size_t>(i)));
            if (binary && v != 0.0 && v != 1.0)
                throw DataError(at_line(file, static_cast<std::size_t>(i)) +
                                ": label must be 0 or 1, found '" +
                                cells[static_cast<std::size_t>(c)] + "'");
            m(i, c) = v;
        }
    }
    return m;
}

void save_matrix(const fs::path& file, const Matrix& m) {
    std::ofstream out(file, std::ios::binary);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out << '\t';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

SparseMatrix load_edges(const fs::path& file, int n) {
    const auto lines = read_lines(file);
    std::set<std::pair<int, int>> seen;
    std::vector<Eigen::Triplet<double>> triplets;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) {
            if (i + 1 == lines.size()) continue;  // trailing newline artifacts
            throw DataError(at_line(file, i) + ": empty line");
        }
        const auto cells = split_tabs(lines[i]);
        if (cells.size() != 3)
            throw DataError(at_line(file, i) + ": expected src<TAB>dst<TAB>weight");
        const long src = parse_long(cells[0], at_line(file, i));
        const long dst = parse_long(cells[1], at_line(file, i));
        const double w = parse_double(cells[2], at_line(file, i));
        if (src < 0 || src >= n || dst < 0 || dst >= n)
            throw DataError(at_line(file, i) + ": node id out of range");
        if (src == dst)
            throw DataError(at_line(file, i) +
                            ": self-loop; self-loops are injected at normalization time");
        if (w <= 0.0) throw DataError(at_line(file, i) + ": edge weight must be positive");
        const int lo = static_cast<int>(std::min(src, dst));
        const int hi = static_cast<int>(std::max(src, dst));
        if (!seen.insert({lo, hi}).second)
            throw DataError(at_line(file, i) + ": duplicate edge");
        triplets.emplace_back(lo, hi, w);
        triplets.emplace_back(hi, lo, w);
    }
    SparseMatrix adj(n, n);
    adj.setFromTriplets(triplets.begin(), triplets.end());
    adj.makeCompressed();
    return adj;
}

void save_edges(const fs::path& file, const SparseMatrix& adj) {
    std::vector<std::pair<int, std::pair<int, double>>> edges;
    for (int j = 0; j < adj.outerSize(); ++j)
        for (SparseMatrix::InnerIterator it(adj, j); it; ++it)
            if (it.row() < it.col())
                edges.push_back({static_cast<int>(it.row()),
                                 {static_cast<int>(it.col()), it.value()}});
    std::sort(edges.begin(), edges.end());
    std::ofstream out(file, std::ios::binary);
    for (const auto& [src, rest] : edges)
        out << src << '\t' << rest.first << '\t' << format_double(rest.second) << '\n';
}

std::vector<Split> load_split(const fs::path& file, int n) {
    const auto lines = read_lines(file);
    if (static_cast<int>(lines.size()) != n)
        throw DataError(file.filename().string() + ": expected " + std::to_string(n) +
                        " lines, found " + std::to_string(lines.size()));
    std::vector<Split> split(static_cast<std::size_t>(n));
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto cells = split_tabs(lines[i]);
        if (cells.size() != 2) throw DataError(at_line(file, i) + ": expected node_id<TAB>role");
        const long id = parse_long(cells[0], at_line(file, i));
        if (id < 0 || id >= n) throw DataError(at_line(file, i) + ": node id out of range");
        if (seen[static_cast<std::size_t>(id)])
            throw DataError(at_line(file, i) + ": duplicate node id");
        seen[static_cast<std::size_t>(id)] = true;
        Split role;
        if (cells[1] == "train") role = Split::train;
        else if (cells[1] == "val") role = Split::val;
        else if (cells[1] == "test") role = Split::test;
        else throw DataError(at_line(file, i) + ": unknown role '" + cells[1] + "'");
        split[static_cast<std::size_t>(id)] = role;
    }
    return split;
}

void save_split(const fs::path& file, const std::vector<Split>& split) {
    std::ofstream out(file, std::ios::binary);
    for (std::size_t i = 0; i < split.size(); ++i) {
        const char* role = split[i] == Split::train ? "train"
                           : split[i] == Split::val ? "val"
                                                    : "test";
        out << i << '\t' << role << '\n';
    }
}

void save_meta(const fs::path& file, int n, int d, int k, const std::string& structure = "") {
    json j;
    j["n"] = n;
    j["d"] = d;
    j["k"] = k;
    j["directed"] = false;
    if (!structure.empty()) j["structure"] = structure;
    std::ofstream out(file, std::ios::binary);
    out << j.dump(2) << '\n';
}

}  // namespace

LabeledGraph load_dataset(const fs::path& dir) {
    const Meta meta = load_meta(dir);
    LabeledGraph graph;
    graph.adjacency = load_edges(dir / "edges.tsv", meta.n);
    graph.features = load_matrix(dir / "features.tsv", meta.n, meta.d, false);
    graph.labels = load_matrix(dir / "labels.tsv", meta.n, meta.k, true);
    graph.split = load_split(dir / "split.tsv", meta.n);
    graph.validate();
    return graph;
}

void save_dataset(const fs::path& dir, const LabeledGraph& graph) {
    graph.validate();
    fs::create_directories(dir);
    save_meta(dir / "meta.json", graph.n(), graph.d(), graph.k());
    save_edges(dir / "edges.tsv", graph.adjacency);
    save_matrix(dir / "features.tsv", graph.features);
    save_matrix(dir / "labels.tsv", graph.labels);
    save_split(dir / "split.tsv", graph.split);
}

void save_synthetic(const fs::path& dir, const SyntheticGraph& synthetic) {
    synthetic.validate();
    fs::create_directories(dir);
    const bool learned = synthetic.structureMode == StructureMode::learned;
    save_meta(dir / "meta.json", synthetic.nPrime(), static_cast<int>(synthetic.features.cols()),
              static_cast<int>(synthetic.labels.cols()), learned ? "learned" : "graphless");
    save_matrix(dir / "features.tsv", synthetic.features);
    save_matrix(dir / "labels.tsv", synthetic.labels);
    save_split(dir / "split.tsv",
               std::vector<Split>(static_cast<std::size_t>(synthetic.nPrime()), Split::train));

    std::ofstream edges(dir / "edges.tsv", std::ios::binary);
    if (learned) {
        const Matrix& a = *synthetic.adjacency;
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = i + 1; j < a.cols(); ++j)
                if (a(i, j) != 0.0)
                    edges << i << '\t' << j << '\t' << format_double(a(i, j)) << '\n';
        save_matrix(dir / "adj.tsv", a);
    }
}

SyntheticGraph load_synthetic(const fs::path& dir) {
    const Meta meta = load_meta(dir);
    SyntheticGraph synthetic;
    synthetic.features = load_matrix(dir / "features.tsv", meta.n, meta.d, false);
    synthetic.labels = load_matrix(dir / "labels.tsv", meta.n, meta.k, true);

    const bool has_adj = fs::exists(dir / "adj.tsv");
    const bool learned = meta.structure.empty() ? has_adj : meta.structure == "learned";
    if (learned != has_adj)
        throw DataError("adj.tsv presence disagrees with the declared structure mode");
    if (learned) {
        Matrix a = load_matrix(dir / "adj.tsv", meta.n, meta.n, false);
        if (!a.isApprox(a.transpose(), 0.0))
            throw DataError("adj.tsv: adjacency is not symmetric");
        synthetic.adjacency = std::move(a);
        synthetic.structureMode = StructureMode::learned;
    } else {
        synthetic.structureMode = StructureMode::graphless;
    }
    synthetic.validate();
    return synthetic;
}

LabeledGraph make_planted_dataset(const PlantedConfig& config) {
    if (config.classes < 2 || config.nodes < config.classes)
        throw ConfigError("planted dataset needs nodes >= classes >= 2");
    if (config.overlap < 0.0 || config.overlap > 1.0)
        throw ConfigError("overlap must lie in [0, 1]");
    if (config.pIn < 0.0 || config.pIn > 1.0 || config.pOut < 0.0 || config.pOut > 1.0)
        throw ConfigError("edge probabilities must lie in [0, 1]");

    const int n = config.nodes;
    const int k = config.classes;
    const int block = n / k;

    std::vector<int> community(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) community[static_cast<std::size_t>(i)] = std::min(i / block, k - 1);

    LabeledGraph graph;

    // Primary community always labeled; secondary labels drawn per class.
    {
        auto gen = rng::engine(rng::derive(config.seed, 0x6c626cULL));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        graph.labels = Matrix::Zero(n, k);
        for (int i = 0; i < n; ++i) {
            graph.labels(i, community[static_cast<std::size_t>(i)]) = 1.0;
            for (int c = 0; c < k; ++c) {
                if (c == community[static_cast<std::size_t>(i)]) continue;
                if (unit(gen) < config.overlap) graph.labels(i, c) = 1.0;
            }
        }
    }

    {
        auto gen = rng::engine(rng::derive(config.seed, 0x656467ULL));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::vector<Eigen::Triplet<double>> triplets;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double p = community[static_cast<std::size_t>(i)] ==
                                         community[static_cast<std::size_t>(j)]
                                     ? config.pIn
                                     : config.pOut;
                if (unit(gen) < p) {
                    triplets.emplace_back(i, j, 1.0);
                    triplets.emplace_back(j, i, 1.0);
                }
            }
        graph.adjacency.resize(n, n);
        graph.adjacency.setFromTriplets(triplets.begin(), triplets.end());
        graph.adjacency.makeCompressed();
    }

    {
        auto gen = rng::engine(rng::derive(config.seed, 0x666561ULL));
        std::normal_distribution<double> noise(0.0, 1.0);
        graph.features = graph.labels;
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < k; ++c) graph.features(i, c) += noise(gen);
    }

    {
        auto gen = rng::engine(rng::derive(config.seed, 0x73706cULL));
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), gen);
        graph.split.assign(static_cast<std::size_t>(n), Split::test);
        const int train_count = static_cast<int>(0.6 * n);
        const int val_count = static_cast<int>(0.2 * n);
        for (int p = 0; p < n; ++p) {
            Split role = p < train_count                ? Split::train
                         : p < train_count + val_count  ? Split::val
                                                        : Split::test;
            graph.split[static_cast<std::size_t>(order[static_cast<std::size_t>(p)])] = role;
        }
    }

    graph.validate();
    return graph;
}

std::string dataset_hash(const fs::path& dir) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const char* data, std::streamsize count) {
        for (std::streamsize i = 0; i < count; ++i) {
            h ^= static_cast<unsigned char>(data[i]);
            h *= 0x100000001b3ULL;
        }
    };
    for (const char* name :
         {"meta.json", "edges.tsv", "features.tsv", "labels.tsv", "split.tsv", "adj.tsv"}) {
        const fs::path file = dir / name;
        if (!fs::exists(file)) continue;
        std::ifstream in(file, std::ios::binary);
        char buf[4096];
        while (in.read(buf, sizeof(buf)) || in.gcount() > 0) mix(buf, in.gcount());
    }
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

}  // namespace mlgc
