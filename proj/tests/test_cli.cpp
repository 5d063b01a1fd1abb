#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "mlgc/dataset_io.hpp"
#include "mlgc/eval.hpp"
#include "mlgc/models.hpp"
#include "test_support.hpp"

using namespace mlgc;
using namespace mlgc::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_path() {
    const char* p = std::getenv("MLGC_CLI");
    return p == nullptr ? std::string() : std::string(p);
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mlgc_cli_" + std::to_string(rng::splitmix64(
                                  std::chrono::steady_clock::now().time_since_epoch().count())));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args, bool quiet = true) {
    std::string cmd = cli_path() + " " + args;
    if (quiet) cmd += " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cli smoke: make-data, condense, eval, inspect") {
    if (cli_path().empty()) return;  // suite requires MLGC_CLI
    TempDir tmp;
    const std::string data = (tmp.path / "data").string();

    REQUIRE(run("make-data --out " + data + " --nodes 80 --classes 3 --overlap 0.3 --seed 0") == 0);
    CHECK(fs::exists(tmp.path / "data" / "meta.json"));
    CHECK(fs::exists(tmp.path / "data" / "manifest.json"));

    const std::string out = (tmp.path / "run").string();
    REQUIRE(run("condense --data " + data + " --out " + out +
                " --method gcond --init kcenter --loss bce --crate 0.1 --seed 0"
                " --outer 2 --inner 6") == 0);
    CHECK(fs::exists(tmp.path / "run" / "synthetic" / "adj.tsv"));
    CHECK(fs::exists(tmp.path / "run" / "trace.csv"));

    json manifest;
    std::ifstream(tmp.path / "run" / "manifest.json") >> manifest;
    CHECK(manifest["status"] == "complete");
    CHECK(manifest["config"]["method"] == "gcond");
    CHECK(manifest["tool_version"] == "0.1.0");
    CHECK(manifest.contains("input_hash"));
    CHECK(manifest.contains("wall_ms"));

    REQUIRE(run("eval --data " + data + " --out " + (tmp.path / "ev").string() +
                " --synthetic " + out + "/synthetic --seeds 2 --epochs 20 --lr 0.5 --seed 1") == 0);
    CHECK(fs::exists(tmp.path / "ev" / "report.json"));

    REQUIRE(run("inspect --data " + data + " --out " + (tmp.path / "insp").string() +
                " --synthetic " + out + "/synthetic") == 0);
    CHECK(fs::exists(tmp.path / "insp" / "correlation.csv"));
    CHECK(fs::exists(tmp.path / "insp" / "distribution.csv"));
}

TEST_CASE("cli exit codes") {
    if (cli_path().empty()) return;
    TempDir tmp;
    const std::string data = (tmp.path / "data").string();
    REQUIRE(run("make-data --out " + data + " --nodes 30 --classes 3 --seed 0") == 0);

    // config error
    CHECK(run("condense --data " + data + " --out " + (tmp.path / "o1").string() +
              " --crate 0") == 2);
    // unknown flag
    CHECK(run("condense --data " + data + " --out " + (tmp.path / "o2").string() +
              " --definitely-not-a-flag 1") == 2);
    // data error
    CHECK(run("condense --data " + (tmp.path / "missing").string() + " --out " +
              (tmp.path / "o3").string()) == 3);
    // refusing to overwrite without --force
    REQUIRE(run("condense --data " + data + " --out " + (tmp.path / "o4").string() +
                " --outer 1 --inner 2 --crate 0.2 --seed 0") == 0);
    CHECK(run("condense --data " + data + " --out " + (tmp.path / "o4").string() +
              " --outer 1 --inner 2 --crate 0.2 --seed 0") == 2);
    CHECK(run("condense --data " + data + " --out " + (tmp.path / "o4").string() +
              " --outer 1 --inner 2 --crate 0.2 --seed 0 --force") == 0);
}

TEST_CASE("cli whole-baseline eval matches the direct library call") {
    if (cli_path().empty()) return;
    TempDir tmp;
    const std::string data = (tmp.path / "data").string();
    REQUIRE(run("make-data --out " + data + " --nodes 60 --classes 3 --overlap 0.3 --seed 2") == 0);
    REQUIRE(run("eval --data " + data + " --out " + (tmp.path / "ev").string() +
                " --whole-baseline --seeds 3 --epochs 25 --lr 0.5 --seed 7") == 0);

    json report;
    std::ifstream(tmp.path / "ev" / "report.json") >> report;

    LabeledGraph g = load_dataset(data);
    SyntheticGraph none;
    none.features = Matrix(0, g.d());
    none.labels = Matrix(0, g.k());
    none.structureMode = StructureMode::graphless;
    EvalModelSpec model;
    model.gnn = GnnSpec{GnnArch::gcn2, 16, 2};
    model.epochs = 25;
    model.learningRate = 0.5;
    EvalReport direct = train_eval_pipeline(g, none, model, LossSpec{}, {7, 8, 9}, true);

    CHECK(report["f1_micro"].get<double>() == direct.f1Micro);
    CHECK(report["f1_macro"].get<double>() == direct.f1Macro);
    CHECK(report["trained_on"] == "whole");
    for (int c = 0; c < g.k(); ++c)
        CHECK(report["per_class_f1"][static_cast<std::size_t>(c)].get<double>() ==
              direct.perClassF1(c));
}
