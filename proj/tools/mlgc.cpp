#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mlgc/condense.hpp"
#include "mlgc/dataset_io.hpp"
#include "mlgc/errors.hpp"
#include "mlgc/eval.hpp"
#include "mlgc/graph.hpp"
#include "mlgc/losses.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mlgc;

namespace {

constexpr const char* kToolVersion = "0.1.0";

void ensure_out_dir(const fs::path& out, bool force) {
    if (fs::exists(out) && !fs::is_empty(out) && !force)
        throw ConfigError("output directory '" + out.string() +
                          "' is not empty; pass --force to reuse it");
    fs::create_directories(out);
}

class ManifestWriter {
  public:
    ManifestWriter(fs::path out, std::string command, json config, std::uint64_t seed,
                   std::string input_hash)
        : path_(std::move(out)), start_(std::chrono::steady_clock::now()) {
        doc_["command"] = std::move(command);
        doc_["config"] = std::move(config);
        doc_["seed"] = seed;
        doc_["tool_version"] = kToolVersion;
        if (!input_hash.empty()) doc_["input_hash"] = input_hash;
        doc_["status"] = "running";
        write();
    }

    void finalize(const std::vector<std::string>& outputs) {
        doc_["status"] = "complete";
        doc_["outputs"] = outputs;
        doc_["wall_ms"] =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
                .count();
        write();
    }

  private:
    void write() const {
        std::ofstream out(path_, std::ios::binary);
        out << doc_.dump(2) << '\n';
    }

    fs::path path_;
    json doc_;
    std::chrono::steady_clock::time_point start_;
};

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

void write_trace_csv(const fs::path& file, const MatchTrace& trace) {
    std::ofstream out(file, std::ios::binary);
    out << "step,phase,loss\n";
    for (const TraceEntry& e : trace.entries)
        out << e.step << ',' << e.phase << ',' << format_double(e.loss) << '\n';
}

json report_to_json(const EvalReport& r) {
    json j;
    j["f1_micro"] = r.f1Micro;
    j["f1_macro"] = r.f1Macro;
    j["per_class_f1"] = vector_to_json(r.perClassF1);
    j["trained_on"] = r.trainedOn;
    j["seeds"] = r.seedsUsed;
    j["label_correlation_original"] = matrix_to_json(r.labelCorrelationOriginal);
    j["label_laplacian_original"] = matrix_to_json(r.labelLaplacianOriginal);
    j["label_correlation_synthetic"] = matrix_to_json(r.labelCorrelationSynthetic);
    j["label_laplacian_synthetic"] = matrix_to_json(r.labelLaplacianSynthetic);
    j["class_dist_original"] = vector_to_json(r.classDistOriginal);
    j["class_dist_synthetic"] = vector_to_json(r.classDistSynthetic);
    return j;
}

struct SharedArgs {
    std::string data;
    std::string out;
    std::uint64_t seed = 0;
    bool force = false;
    int jobs = 1;
};

void add_shared(CLI::App* cmd, SharedArgs& args, bool needs_data) {
    auto* data = cmd->add_option("--data", args.data, "dataset directory");
    if (needs_data) data->required();
    cmd->add_option("--out", args.out, "output directory")->required();
    cmd->add_option("--seed", args.seed, "run seed");
    cmd->add_flag("--force", args.force, "reuse a non-empty output directory");
    cmd->add_option("--jobs", args.jobs, "parallel workers for independent runs")
        ->check(CLI::PositiveNumber);
}

LossSpec make_loss_spec(const std::string& name, bool weighted, bool classwise,
                        const LabeledGraph& graph) {
    LossSpec spec;
    if (name == "bce") spec.kind = LossKind::bce;
    else if (name == "softmargin") spec.kind = LossKind::softmargin;
    else throw ConfigError("unknown loss '" + name + "'");
    spec.classwiseCoeff = classwise;
    if (weighted) {
        Matrix train_labels(0, graph.k());
        const auto idx = split_indices(graph, Split::train);
        train_labels.resize(static_cast<Eigen::Index>(idx.size()), graph.k());
        for (std::size_t p = 0; p < idx.size(); ++p)
            train_labels.row(static_cast<Eigen::Index>(p)) = graph.labels.row(idx[p]);
        spec.classWeights = positive_class_weights(train_labels);
    }
    return spec;
}

int run_make_data(const SharedArgs& shared, const PlantedConfig& planted) {
    ensure_out_dir(shared.out, shared.force);
    json config{{"nodes", planted.nodes},   {"classes", planted.classes},
                {"overlap", planted.overlap}, {"p_in", planted.pIn},
                {"p_out", planted.pOut},      {"seed", planted.seed}};
    ManifestWriter manifest(fs::path(shared.out) / "manifest.json", "make-data", config,
                            planted.seed, "");
    save_dataset(shared.out, make_planted_dataset(planted));
    manifest.finalize({shared.out});
    return 0;
}

struct CondenseArgs {
    std::string method = "gcond";
    std::string init = "kcenter";
    std::string loss = "bce";
    bool weighted = false;
    bool classwise = false;
    double crate = 0.1;
    bool noStructure = false;
    std::string profile;
};

int run_condense_cmd(const SharedArgs& shared, CondenseArgs& args, CondenseConfig& cfg,
                     const CLI::App* cmd) {
    if (!args.profile.empty()) {
        if (args.profile != "paper-best")
            throw ConfigError("unknown profile '" + args.profile + "'");
        if (cmd->count("--init") == 0) args.init = "kcenter";
        if (cmd->count("--loss") == 0) args.loss = "bce";
        if (cmd->count("--no-structure") == 0) args.noStructure = false;
    }

    if (args.method == "gcond") cfg.method = CondenseMethod::gcond;
    else if (args.method == "gcdm") cfg.method = CondenseMethod::gcdm;
    else if (args.method == "sgdd") cfg.method = CondenseMethod::sgdd;
    else throw ConfigError("unknown method '" + args.method + "'");

    if (args.init == "random") cfg.init.kind = InitKind::random;
    else if (args.init == "herding") cfg.init.kind = InitKind::herding;
    else if (args.init == "kcenter") cfg.init.kind = InitKind::kcenter;
    else if (args.init == "prob") cfg.init.kind = InitKind::probability;
    else throw ConfigError("unknown initializer '" + args.init + "'");

    cfg.cRate = args.crate;
    cfg.seed = shared.seed;
    cfg.structureMode = args.noStructure ? StructureMode::graphless : StructureMode::learned;
    if (args.noStructure) {
        cfg.structureSteps = 0;
        cfg.init.useSubgraphStructure = false;
    }
    if (cfg.init.kind == InitKind::probability) cfg.init.useSubgraphStructure = false;

    ensure_out_dir(shared.out, shared.force);
    LabeledGraph graph = load_dataset(shared.data);
    cfg.loss = make_loss_spec(args.loss, args.weighted, args.classwise, graph);

    json config{{"method", args.method},
                {"init", args.init},
                {"loss", args.loss},
                {"weighted", args.weighted},
                {"classwise", args.classwise},
                {"crate", cfg.cRate},
                {"structure", args.noStructure ? "graphless" : "learned"},
                {"delta", cfg.delta},
                {"alpha", cfg.sgddAlpha},
                {"beta", cfg.sgddBeta},
                {"outer", cfg.outerRestarts},
                {"inner", cfg.innerSteps},
                {"tau1", cfg.featureSteps},
                {"tau2", cfg.structureSteps},
                {"tau_theta", cfg.modelSteps},
                {"eta1", cfg.etaFeatures},
                {"eta2", cfg.etaStructure},
                {"eta_theta", cfg.etaModel},
                {"hidden", cfg.model.hidden},
                {"data", shared.data}};
    ManifestWriter manifest(fs::path(shared.out) / "manifest.json", "condense", config,
                            shared.seed, dataset_hash(shared.data));

    CondenseResult result = condense(graph, cfg);

    const fs::path syn_dir = fs::path(shared.out) / "synthetic";
    save_synthetic(syn_dir, result.synthetic);
    write_trace_csv(fs::path(shared.out) / "trace.csv", result.trace);
    manifest.finalize({syn_dir.string(), (fs::path(shared.out) / "trace.csv").string()});
    return 0;
}

struct EvalArgs {
    std::string synthetic;
    std::string model = "gcn";
    std::string loss = "bce";
    bool weighted = false;
    int seeds = 1;
    bool wholeBaseline = false;
    int hidden = 16;
    int hops = 2;
    int epochs = 200;
    double lr = 1e-2;
};

int run_eval_cmd(const SharedArgs& shared, const EvalArgs& args) {
    if (!args.wholeBaseline && args.synthetic.empty())
        throw ConfigError("--synthetic is required unless --whole-baseline is set");

    ensure_out_dir(shared.out, shared.force);
    LabeledGraph graph = load_dataset(shared.data);

    SyntheticGraph synthetic;
    if (!args.synthetic.empty()) {
        synthetic = load_synthetic(args.synthetic);
    } else {
        synthetic.features = Matrix(0, graph.d());
        synthetic.labels = Matrix(0, graph.k());
        synthetic.structureMode = StructureMode::graphless;
    }

    EvalModelSpec model;
    if (args.model == "sgc") model.gnn.arch = GnnArch::sgc;
    else if (args.model == "gcn") model.gnn.arch = GnnArch::gcn2;
    else throw ConfigError("unknown model '" + args.model + "'");
    model.gnn.hidden = args.hidden;
    model.gnn.hops = args.hops;
    model.epochs = args.epochs;
    model.learningRate = args.lr;

    LossSpec loss = make_loss_spec(args.loss, args.weighted, false, graph);

    std::vector<std::uint64_t> seeds;
    for (int s = 0; s < args.seeds; ++s) seeds.push_back(shared.seed + static_cast<std::uint64_t>(s));

    json config{{"model", args.model},     {"loss", args.loss},
                {"weighted", args.weighted}, {"seeds", args.seeds},
                {"whole_baseline", args.wholeBaseline},
                {"hidden", args.hidden},   {"hops", args.hops},
                {"epochs", args.epochs},   {"lr", args.lr},
                {"data", shared.data},     {"synthetic", args.synthetic}};
    ManifestWriter manifest(fs::path(shared.out) / "manifest.json", "eval", config, shared.seed,
                            dataset_hash(shared.data));

    EvalReport report = train_eval_pipeline(graph, synthetic, model, loss, seeds,
                                            args.wholeBaseline, shared.jobs);

    const fs::path report_path = fs::path(shared.out) / "report.json";
    {
        std::ofstream out(report_path, std::ios::binary);
        out << report_to_json(report).dump(2) << '\n';
    }
    manifest.finalize({report_path.string()});
    return 0;
}

int run_inspect_cmd(const SharedArgs& shared, const std::string& synthetic_dir) {
    ensure_out_dir(shared.out, shared.force);
    LabeledGraph graph = load_dataset(shared.data);

    std::optional<SyntheticGraph> synthetic;
    if (!synthetic_dir.empty()) synthetic = load_synthetic(synthetic_dir);

    json config{{"data", shared.data}, {"synthetic", synthetic_dir}};
    ManifestWriter manifest(fs::path(shared.out) / "manifest.json", "inspect", config,
                            shared.seed, dataset_hash(shared.data));

    auto [p_orig, lo_orig] = label_correlation(graph.labels);
    Vector dist_orig = label_distribution(graph.labels);

    const fs::path corr_path = fs::path(shared.out) / "correlation.csv";
    {
        std::ofstream out(corr_path, std::ios::binary);
        out << "set,i,j,p,laplacian\n";
        auto emit = [&out](const char* tag, const Matrix& p, const Matrix& lo) {
            for (Eigen::Index i = 0; i < p.rows(); ++i)
                for (Eigen::Index j = 0; j < p.cols(); ++j)
                    out << tag << ',' << i << ',' << j << ',' << format_double(p(i, j)) << ','
                        << format_double(lo(i, j)) << '\n';
        };
        emit("original", p_orig, lo_orig);
        if (synthetic) {
            auto [p_syn, lo_syn] = label_correlation(synthetic->labels);
            emit("synthetic", p_syn, lo_syn);
        }
    }

    const fs::path dist_path = fs::path(shared.out) / "distribution.csv";
    {
        std::ofstream out(dist_path, std::ios::binary);
        out << "class,original,synthetic\n";
        std::optional<Vector> dist_syn;
        if (synthetic) dist_syn = label_distribution(synthetic->labels);
        for (Eigen::Index c = 0; c < dist_orig.size(); ++c) {
            out << c << ',' << format_double(dist_orig(c)) << ',';
            if (dist_syn) out << format_double((*dist_syn)(c));
            out << '\n';
        }
    }
    manifest.finalize({corr_path.string(), dist_path.string()});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-label graph condensation toolkit"};
    app.require_subcommand(1);

    SharedArgs make_shared_args, cond_shared, eval_shared, inspect_shared;
    PlantedConfig planted;

    CLI::App* make_data = app.add_subcommand("make-data", "generate a planted multi-label SBM dataset");
    add_shared(make_data, make_shared_args, false);
    make_data->add_option("--nodes", planted.nodes)->check(CLI::PositiveNumber);
    make_data->add_option("--classes", planted.classes)->check(CLI::PositiveNumber);
    make_data->add_option("--overlap", planted.overlap);
    make_data->add_option("--p-in", planted.pIn);
    make_data->add_option("--p-out", planted.pOut);

    CondenseArgs cond_args;
    CondenseConfig cond_cfg;
    CLI::App* cond = app.add_subcommand("condense", "condense a dataset into a synthetic graph");
    add_shared(cond, cond_shared, true);
    cond->add_option("--method", cond_args.method, "gcond | gcdm | sgdd");
    cond->add_option("--init", cond_args.init, "random | herding | kcenter | prob");
    cond->add_option("--loss", cond_args.loss, "bce | softmargin");
    cond->add_flag("--weighted", cond_args.weighted, "positive class weights from the train split");
    cond->add_flag("--alpha-c", cond_args.classwise, "class-size coefficients on class batches");
    cond->add_option("--crate", cond_args.crate, "condensation rate in (0, 1]");
    cond->add_flag("--no-structure", cond_args.noStructure, "graphless synthetic output");
    cond->add_option("--delta", cond_cfg.delta, "adjacency threshold");
    cond->add_option("--alpha", cond_cfg.sgddAlpha, "spectral supervision weight");
    cond->add_option("--beta", cond_cfg.sgddBeta, "sparsity weight");
    cond->add_option("--outer", cond_cfg.outerRestarts);
    cond->add_option("--inner", cond_cfg.innerSteps);
    cond->add_option("--tau1", cond_cfg.featureSteps);
    cond->add_option("--tau2", cond_cfg.structureSteps);
    cond->add_option("--tau-theta", cond_cfg.modelSteps);
    cond->add_option("--eta1", cond_cfg.etaFeatures);
    cond->add_option("--eta2", cond_cfg.etaStructure);
    cond->add_option("--eta-theta", cond_cfg.etaModel);
    cond->add_option("--hidden", cond_cfg.model.hidden, "matching surrogate width");
    cond->add_option("--profile", cond_args.profile, "paper-best");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "train on synthetic data, test on the original");
    add_shared(eval, eval_shared, true);
    eval->add_option("--synthetic", eval_args.synthetic, "synthetic dataset directory");
    eval->add_option("--model", eval_args.model, "sgc | gcn");
    eval->add_option("--loss", eval_args.loss, "bce | softmargin");
    eval->add_flag("--weighted", eval_args.weighted);
    eval->add_option("--seeds", eval_args.seeds)->check(CLI::PositiveNumber);
    eval->add_flag("--whole-baseline", eval_args.wholeBaseline, "train on the original train split");
    eval->add_option("--hidden", eval_args.hidden);
    eval->add_option("--hops", eval_args.hops);
    eval->add_option("--epochs", eval_args.epochs)->check(CLI::PositiveNumber);
    eval->add_option("--lr", eval_args.lr);

    std::string inspect_synthetic;
    CLI::App* inspect = app.add_subcommand("inspect", "emit correlation and distribution tables");
    add_shared(inspect, inspect_shared, true);
    inspect->add_option("--synthetic", inspect_synthetic, "synthetic dataset directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (make_data->parsed()) {
            planted.seed = make_shared_args.seed;
            return run_make_data(make_shared_args, planted);
        }
        if (cond->parsed()) return run_condense_cmd(cond_shared, cond_args, cond_cfg, cond);
        if (eval->parsed()) return run_eval_cmd(eval_shared, eval_args);
        if (inspect->parsed()) return run_inspect_cmd(inspect_shared, inspect_synthetic);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const DivergenceError& e) {
        std::cerr << "numeric divergence: " << e.what() << '\n';
        return 4;
    } catch (const std::domain_error& e) {
        std::cerr << "numeric divergence: " << e.what() << '\n';
        return 4;
    } catch (const ScaleError& e) {
        std::cerr << "scale unsupported: " << e.what() << '\n';
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
