#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mlgc/dataset_io.hpp"
#include "mlgc/errors.hpp"
#include "mlgc/init.hpp"
#include "test_support.hpp"

using namespace mlgc;
using namespace mlgc::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mlgc_test_" + std::to_string(rng::splitmix64(
                                   std::chrono::steady_clock::now().time_since_epoch().count())));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

bool same_directory_bytes(const fs::path& a, const fs::path& b) {
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(a)) names.insert(e.path().filename().string());
    std::set<std::string> other;
    for (const auto& e : fs::directory_iterator(b)) other.insert(e.path().filename().string());
    if (names != other) return false;
    for (const auto& name : names)
        if (slurp(a / name) != slurp(b / name)) return false;
    return true;
}

}  // namespace

TEST_CASE("dataset save/load round trip is exact") {
    TempDir tmp;
    LabeledGraph g = random_graph(12, 4, 3, 101);
    save_dataset(tmp.path / "a", g);
    LabeledGraph loaded = load_dataset(tmp.path / "a");
    CHECK(loaded.features == g.features);
    CHECK(loaded.labels == g.labels);
    CHECK(Matrix(loaded.adjacency) == Matrix(g.adjacency));
    CHECK(loaded.split == g.split);

    save_dataset(tmp.path / "b", loaded);
    CHECK(same_directory_bytes(tmp.path / "a", tmp.path / "b"));
}

TEST_CASE("loader reports the offending line") {
    TempDir tmp;
    LabeledGraph g = random_graph(4, 2, 2, 102);
    save_dataset(tmp.path / "d", g);

    {
        std::ofstream labels(tmp.path / "d" / "labels.tsv");
        labels << "1\t0\n0\t2\n1\t0\n0\t1\n";
    }
    try {
        load_dataset(tmp.path / "d");
        FAIL("expected a data error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("labels.tsv:2") != std::string::npos);
    }
}

TEST_CASE("edges with src > dst are canonicalized") {
    TempDir tmp;
    LabeledGraph g = random_graph(3, 2, 2, 103, 0.0);
    g.adjacency = edge_list_adjacency(3, {{0, 1}});
    save_dataset(tmp.path / "d", g);
    {
        std::ofstream edges(tmp.path / "d" / "edges.tsv");
        edges << "1\t0\t1\n2\t1\t0.5\n";
    }
    LabeledGraph loaded = load_dataset(tmp.path / "d");
    CHECK(loaded.adjacency.coeff(0, 1) == 1.0);
    CHECK(loaded.adjacency.coeff(1, 0) == 1.0);
    CHECK(loaded.adjacency.coeff(1, 2) == 0.5);
    CHECK(loaded.adjacency.coeff(2, 1) == 0.5);
}

TEST_CASE("loader rejects self-loops, duplicates and bad weights") {
    TempDir tmp;
    LabeledGraph g = random_graph(3, 2, 2, 104, 0.0);
    g.adjacency = edge_list_adjacency(3, {{0, 1}});
    save_dataset(tmp.path / "d", g);

    auto write_edges = [&](const std::string& content) {
        std::ofstream edges(tmp.path / "d" / "edges.tsv");
        edges << content;
    };

    write_edges("0\t0\t1\n");
    CHECK_THROWS_AS(load_dataset(tmp.path / "d"), DataError);
    write_edges("0\t1\t1\n1\t0\t1\n");
    CHECK_THROWS_AS(load_dataset(tmp.path / "d"), DataError);
    write_edges("0\t1\t0\n");
    CHECK_THROWS_AS(load_dataset(tmp.path / "d"), DataError);
    write_edges("0\t1\t-2\n");
    CHECK_THROWS_AS(load_dataset(tmp.path / "d"), DataError);
    write_edges("0\t9\t1\n");
    CHECK_THROWS_AS(load_dataset(tmp.path / "d"), DataError);
}

TEST_CASE("missing files are reported") {
    TempDir tmp;
    LabeledGraph g = random_graph(3, 2, 2, 105);
    save_dataset(tmp.path / "d", g);
    fs::remove(tmp.path / "d" / "features.tsv");
    CHECK_THROWS_AS(load_dataset(tmp.path / "d"), DataError);
}

TEST_CASE("synthetic graphless round trip omits adj.tsv") {
    TempDir tmp;
    LabeledGraph g = random_graph(8, 3, 2, 106);
    SyntheticGraph s = init_kcenter(g, 3, false);
    save_synthetic(tmp.path / "s", s);
    CHECK(!fs::exists(tmp.path / "s" / "adj.tsv"));
    CHECK(slurp(tmp.path / "s" / "edges.tsv").empty());

    SyntheticGraph loaded = load_synthetic(tmp.path / "s");
    CHECK(loaded.structureMode == StructureMode::graphless);
    CHECK(loaded.features == s.features);
    CHECK(loaded.labels == s.labels);
}

TEST_CASE("synthetic learned round trip preserves thresholded zeros exactly") {
    TempDir tmp;
    LabeledGraph g = random_graph(8, 3, 2, 107);
    SyntheticGraph s = init_kcenter(g, 4, true);
    save_synthetic(tmp.path / "s", s);
    SyntheticGraph loaded = load_synthetic(tmp.path / "s");
    CHECK(loaded.structureMode == StructureMode::learned);
    CHECK(*loaded.adjacency == *s.adjacency);
    for (Eigen::Index i = 0; i < loaded.adjacency->rows(); ++i)
        for (Eigen::Index j = 0; j < loaded.adjacency->cols(); ++j)
            if ((*s.adjacency)(i, j) == 0.0) CHECK((*loaded.adjacency)(i, j) == 0.0);
}

TEST_CASE("asymmetric adj.tsv is rejected") {
    TempDir tmp;
    LabeledGraph g = random_graph(4, 2, 2, 108);
    SyntheticGraph s = init_kcenter(g, 3, true);
    save_synthetic(tmp.path / "s", s);
    {
        std::ofstream adj(tmp.path / "s" / "adj.tsv");
        adj << "1\t0.5\t0\n0.25\t1\t0\n0\t0\t1\n";
    }
    CHECK_THROWS_AS(load_synthetic(tmp.path / "s"), DataError);
}

TEST_CASE("planted dataset: overlap zero gives single labels") {
    PlantedConfig pc;
    pc.nodes = 40;
    pc.classes = 4;
    pc.overlap = 0.0;
    pc.seed = 9;
    LabeledGraph g = make_planted_dataset(pc);
    for (int i = 0; i < g.n(); ++i) CHECK(g.labels.row(i).sum() == 1.0);
}

TEST_CASE("planted dataset: fixed seed gives identical directory bytes") {
    TempDir tmp;
    PlantedConfig pc;
    pc.nodes = 30;
    pc.classes = 3;
    pc.seed = 12;
    save_dataset(tmp.path / "a", make_planted_dataset(pc));
    save_dataset(tmp.path / "b", make_planted_dataset(pc));
    CHECK(same_directory_bytes(tmp.path / "a", tmp.path / "b"));
}

TEST_CASE("planted dataset: intra-block degree exceeds inter-block degree") {
    PlantedConfig pc;
    pc.nodes = 200;
    pc.classes = 4;
    pc.seed = 3;
    LabeledGraph g = make_planted_dataset(pc);

    const int block = pc.nodes / pc.classes;
    double intra = 0.0, inter = 0.0;
    for (int j = 0; j < g.adjacency.outerSize(); ++j)
        for (SparseMatrix::InnerIterator it(g.adjacency, j); it; ++it) {
            if (it.row() >= it.col()) continue;
            const bool same = it.row() / block == it.col() / block;
            (same ? intra : inter) += 1.0;
        }
    // Per-pair rates, not raw counts: intra pairs are fewer than inter pairs.
    const double intra_pairs = pc.classes * (block * (block - 1) / 2.0);
    const double total_pairs = pc.nodes * (pc.nodes - 1) / 2.0;
    CHECK(intra / intra_pairs > inter / (total_pairs - intra_pairs));
}

TEST_CASE("planted dataset: split fractions are 60/20/20") {
    PlantedConfig pc;
    pc.nodes = 100;
    pc.classes = 4;
    pc.seed = 6;
    LabeledGraph g = make_planted_dataset(pc);
    int train = 0, val = 0, test = 0;
    for (Split s : g.split) {
        if (s == Split::train) train++;
        else if (s == Split::val) val++;
        else test++;
    }
    CHECK(train == 60);
    CHECK(val == 20);
    CHECK(test == 20);
}

TEST_CASE("number formatting round trips") {
    auto gen = rng::engine(110);
    std::uniform_real_distribution<double> dist(-1e6, 1e6);
    for (int trial = 0; trial < 200; ++trial) {
        const double v = dist(gen);
        CHECK(parse_double(format_double(v), "test") == v);
    }
    CHECK(parse_double(format_double(1.0 / 3.0), "test") == 1.0 / 3.0);
    CHECK_THROWS_AS(parse_double("1.2x", "test"), DataError);
}

TEST_CASE("dataset hash is stable and content sensitive") {
    TempDir tmp;
    LabeledGraph g = random_graph(6, 2, 2, 111);
    save_dataset(tmp.path / "a", g);
    const std::string h1 = dataset_hash(tmp.path / "a");
    CHECK(h1 == dataset_hash(tmp.path / "a"));

    g.features(0, 0) += 1.0;
    save_dataset(tmp.path / "b", g);
    CHECK(h1 != dataset_hash(tmp.path / "b"));
}
