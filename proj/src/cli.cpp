#include "relnn/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "relnn/engine.hpp"
#include "relnn/learn.hpp"
#include "relnn/metrics.hpp"
#include "relnn/model_templates.hpp"
#include "relnn/oracle.hpp"
#include "relnn/rng.hpp"

namespace relnn::cli {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CliError("cannot open " + path.string());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw CliError("cannot write " + path.string());
    f << content;
}

ModelBundle load_model_text(const std::string& text, const std::string& origin) {
    auto parsed = modelspec::parse(text);
    if (!parsed.ok()) throw CliError(origin + ": " + parsed.error->to_string());
    ModelBundle b;
    b.doc = std::move(*parsed.doc);
    modelspec::LowerResult lowered;
    try {
        lowered = modelspec::lower(b.doc);
    } catch (const modelspec::LowerError& e) {
        throw CliError(origin + ": " + e.what());
    }
    if (!lowered.report.ok())
        throw CliError(origin + ": model is invalid:\n" + lowered.report.to_string());
    b.schema = std::move(lowered.schema);
    b.graph = std::move(lowered.graph);
    b.store = std::move(lowered.store);
    return b;
}

ModelBundle load_model_file(const fs::path& path) {
    return load_model_text(read_file(path), path.string());
}

void sync_latents(ParameterStore& store, const Schema& schema) {
    for (auto& [pred, table] : store.latents) {
        int size = schema.pop(schema.pred(pred).args[0]).size;
        if (static_cast<int>(table.size()) < size) table.resize(size, 0.0);
    }
}

namespace {

struct CommonOpts {
    std::string model;
    std::string data_dir;
    std::string labels_file = "labels.tsv";
    uint64_t seed = 0;
    double split = 0.8;
};

struct TrainOpts : CommonOpts {
    std::string out = "params.txt";
    std::string log_csv;
    double lr = 0.05;
    int epochs = 500;
    int restarts = 5;
    double l1 = 1e-4;
    double lambda = -1.0; // <0: keep the model's value
    int truncate_train_rmax = -1;
    std::string saturate; // relation name
    bool no_precondition = false;
};

learn::TrainConfig to_config(const TrainOpts& o) {
    learn::TrainConfig cfg;
    cfg.lr = o.lr;
    cfg.epochs = o.epochs;
    cfg.restarts = o.restarts;
    cfg.l1 = o.l1;
    cfg.seed = o.seed;
    cfg.precondition = !o.no_precondition;
    if (o.lambda >= 0.0) cfg.lambda_override = o.lambda;
    return cfg;
}

std::string training_log_csv(const learn::TrainingLog& log) {
    std::ostringstream os;
    os << "restart,epoch,train_loss\n";
    char buf[64];
    for (const auto& e : log.entries) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g\n", e.restart, e.epoch, e.loss);
        os << buf;
    }
    return os.str();
}

int cmd_train(const TrainOpts& o) {
    ModelBundle m = load_model_file(o.model);
    data::DatasetManifest manifest{o.data_dir, o.labels_file};
    data::LoadedData loaded = data::load(manifest, m.schema, m.graph.labels);
    sync_latents(m.store, m.schema);

    const Population& target_pop = m.schema.pop(m.schema.pred(m.graph.labels).args[0]);
    data::LabeledSplit sp = data::split(loaded.labels, target_pop, o.split, o.seed);

    if (o.truncate_train_rmax >= 0) {
        std::set<int> train_rows;
        for (const auto& [obj, v] : sp.train.items) train_rows.insert(obj);
        PredicateId rel = -1;
        for (PredicateId p = 0; p < static_cast<PredicateId>(m.schema.predicates.size()); ++p)
            if (m.schema.pred(p).arity() == 2 &&
                m.schema.pred(p).kind != PredicateKind::Derived) {
                rel = p;
                break;
            }
        if (rel < 0) throw CliError("--truncate-train-rmax needs a binary relation in the model");
        data::truncate_relations(loaded.interp, rel,
                                 data::RandomR{o.truncate_train_rmax, o.seed}, train_rows);
    }

    if (!o.saturate.empty()) {
        PredicateId rel = m.schema.find_predicate(o.saturate);
        if (rel < 0) throw CliError("unknown relation for --saturate: " + o.saturate);
        data::add_saturating_objects(m.schema, loaded.interp, sp.train, rel, &m.store);
        sync_latents(m.store, m.schema);
    }

    learn::TrainConfig cfg = to_config(o);
    learn::TrainResult result = learn::train(m.graph, m.schema, loaded.interp, sp.train, cfg, m.store);

    write_file(o.out, modelspec::serialize_trained(result.store, m.schema));
    fs::path log_path = o.log_csv.empty()
                            ? fs::path(o.out).parent_path() / "training_log.csv"
                            : fs::path(o.log_csv);
    write_file(log_path, training_log_csv(result.log));

    std::printf("best_restart=%d\n", result.log.best_restart);
    std::printf("final_train_loss=%.6f\n", result.log.best_loss);
    return 0;
}

struct EvalOpts : CommonOpts {
    std::string params;
    std::string baseline = "none";
    std::string csv;
    double lambda = -1.0;
};

int cmd_eval(const EvalOpts& o) {
    ModelBundle m = load_model_file(o.model);
    data::DatasetManifest manifest{o.data_dir, o.labels_file};
    data::LoadedData loaded = data::load(manifest, m.schema, m.graph.labels);
    sync_latents(m.store, m.schema);

    const Population& target_pop = m.schema.pop(m.schema.pred(m.graph.labels).args[0]);
    data::LabeledSplit sp = data::split(loaded.labels, target_pop, o.split, o.seed);

    bool classification = m.graph.rel()->loss == LossKind::LogLoss;
    MetricsReport report;
    if (o.baseline == "mean") {
        report = mean_baseline(sp.train.mean(), sp.test, classification);
    } else {
        if (o.params.empty()) throw CliError("--params is required unless --baseline mean is used");
        modelspec::load_trained(read_file(o.params), m.store, m.schema);
        m.store.mix_mean = sp.train.mean();
        LayerGraph graph = m.graph;
        if (o.lambda >= 0.0) {
            learn::TrainConfig cfg;
            cfg.lambda_override = o.lambda;
            graph = learn::apply_lambda_override(graph, cfg);
        }
        LayerOutputs out = engine::graph_forward(graph, m.schema, loaded.interp, m.store);
        report = compute_metrics(out.find(m.graph.target)->v, sp.test, classification);
    }

    std::fputs(report.lines().c_str(), stdout);
    if (!o.csv.empty())
        write_file(o.csv, MetricsReport::csv_header() + "\n" + report.csv_row() + "\n");
    return 0;
}

struct GradcheckOpts : CommonOpts {
    double h = 1e-5;
    double tol = 1e-4;
    bool corrupt = false; // test hook: perturb one analytic gradient
};

int cmd_gradcheck(const GradcheckOpts& o) {
    ModelBundle m = load_model_file(o.model);
    data::DatasetManifest manifest{o.data_dir, o.labels_file};
    data::LoadedData loaded = data::load(manifest, m.schema, m.graph.labels);
    sync_latents(m.store, m.schema);

    learn::TrainConfig cfg;
    cfg.seed = o.seed;
    learn::init_params(m.store, cfg, o.seed);
    if (m.graph.mix()) m.store.mix_mean = loaded.labels.mean();

    engine::ForwardTrace trace = engine::graph_forward_traced(m.graph, m.schema, loaded.interp, m.store);
    learn::GradientTape tape;
    tape.reset(m.graph, m.schema, m.store);
    learn::graph_backward(m.graph, m.schema, loaded.interp, m.store, trace, loaded.labels, tape);
    if (o.corrupt && !tape.d_weights.empty()) tape.d_weights[0] += 0.5;

    oracle::NumericGrad num =
        oracle::numeric_grad(m.graph, m.schema, loaded.interp, m.store, loaded.labels, o.h);

    auto err_of = [](double a, double n) {
        double scale = std::max({std::fabs(a), std::fabs(n), 1e-4});
        return std::fabs(a - n) / scale;
    };
    double worst = 0.0;
    std::string worst_name = "(none)";
    for (size_t i = 0; i < m.store.weights.size(); ++i) {
        double e = err_of(tape.d_weights[i], num.d_weights[i]);
        if (e > worst) {
            worst = e;
            worst_name = "weight " + m.store.weights[i].name;
        }
    }
    for (const auto& [pred, table] : num.d_latents) {
        const auto& analytic = tape.d_latents.at(pred);
        for (size_t i = 0; i < table.size(); ++i) {
            double e = err_of(analytic[i], table[i]);
            if (e > worst) {
                worst = e;
                worst_name = "latent " + m.schema.pred(pred).name + "[" + std::to_string(i) + "]";
            }
        }
    }
    std::printf("max_rel_err=%.3e\n", worst);
    std::printf("worst_param=%s\n", worst_name.c_str());
    if (worst > o.tol) {
        std::printf("gradcheck=FAIL\n");
        return 1;
    }
    std::printf("gradcheck=PASS\n");
    return 0;
}

struct ExtrapolateOpts : CommonOpts {
    std::string params;
    std::string model2;
    std::string params2;
    std::string k_list;
    std::string relation = "Likes";
    std::string csv;
};

int cmd_extrapolate(const ExtrapolateOpts& o) {
    std::vector<int> ks;
    {
        std::istringstream is(o.k_list);
        std::string tok;
        while (std::getline(is, tok, ','))
            if (!tok.empty()) ks.push_back(std::atoi(tok.c_str()));
    }
    if (ks.empty()) throw CLI::ValidationError("--k-list", "k list must not be empty");

    struct Entry {
        std::string name;
        ModelBundle m;
        data::LoadedData data;
        data::LabeledSplit sp;
        std::set<int> test_rows;
    };
    std::vector<Entry> entries;
    auto add_model = [&](const std::string& model, const std::string& params) {
        Entry e{fs::path(model).stem().string(), load_model_file(model), {}, {}, {}};
        data::DatasetManifest manifest{o.data_dir, o.labels_file};
        e.data = data::load(manifest, e.m.schema, e.m.graph.labels);
        sync_latents(e.m.store, e.m.schema);
        modelspec::load_trained(read_file(params), e.m.store, e.m.schema);
        const Population& pop = e.m.schema.pop(e.m.schema.pred(e.m.graph.labels).args[0]);
        e.sp = data::split(e.data.labels, pop, o.split, o.seed);
        e.m.store.mix_mean = e.sp.train.mean();
        for (const auto& [obj, v] : e.sp.test.items) e.test_rows.insert(obj);
        entries.push_back(std::move(e));
    };
    add_model(o.model, o.params);
    add_model(o.model2, o.params2);

    std::ostringstream csv;
    csv << "k,model,logloss\n";
    for (int k : ks) {
        for (Entry& e : entries) {
            PredicateId rel = e.m.schema.find_predicate(o.relation);
            if (rel < 0) throw CliError("unknown relation: " + o.relation);
            Interpretation work = e.data.interp;
            data::truncate_relations(work, rel, data::FirstK{k}, e.test_rows);
            LayerOutputs out = engine::graph_forward(e.m.graph, e.m.schema, work, e.m.store);
            MetricsReport rep = compute_metrics(out.find(e.m.graph.target)->v, e.sp.test, true);
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%d,%s,%.4f\n", k, e.name.c_str(),
                          rep.log_loss.value_or(NAN));
            csv << buf;
        }
    }
    if (o.csv.empty()) std::fputs(csv.str().c_str(), stdout);
    else write_file(o.csv, csv.str());
    return 0;
}

struct SweepOpts : CommonOpts {
    std::string grid; // "0,1,2x0,1,2" -> hidden counts x latent counts
    std::string csv;
    double lr = 0.05;
    int epochs = 500;
    int restarts = 5;
    double l1 = 1e-4;
    double lambda = 0.05;
};

int cmd_sweep(const SweepOpts& o) {
    auto parse_list = [](const std::string& s) {
        std::vector<int> out;
        std::istringstream is(s);
        std::string tok;
        while (std::getline(is, tok, ','))
            if (!tok.empty()) out.push_back(std::atoi(tok.c_str()));
        return out;
    };
    auto x = o.grid.find('x');
    if (x == std::string::npos)
        throw CLI::ValidationError("--grid", "expected '<hidden list>x<latent list>', e.g. 0,1x0,1,2");
    std::vector<int> hiddens = parse_list(o.grid.substr(0, x));
    std::vector<int> latents = parse_list(o.grid.substr(x + 1));
    if (hiddens.empty() || latents.empty())
        throw CLI::ValidationError("--grid", "both grid axes must be non-empty");

    std::ostringstream csv;
    csv << "hidden,latents,acc,logloss,mse\n";
    for (int h : hiddens) {
        for (int l : latents) {
            ModelBundle m = load_model_text(gender_model_text(h, l, o.lambda),
                                            "sweep(" + std::to_string(h) + "," + std::to_string(l) + ")");
            data::DatasetManifest manifest{o.data_dir, o.labels_file};
            data::LoadedData loaded = data::load(manifest, m.schema, m.graph.labels);
            sync_latents(m.store, m.schema);
            const Population& pop = m.schema.pop(m.schema.pred(m.graph.labels).args[0]);
            data::LabeledSplit sp = data::split(loaded.labels, pop, o.split, o.seed);

            learn::TrainConfig cfg;
            cfg.lr = o.lr;
            cfg.epochs = o.epochs;
            cfg.restarts = o.restarts;
            cfg.l1 = o.l1;
            cfg.seed = o.seed;
            learn::TrainResult result =
                learn::train(m.graph, m.schema, loaded.interp, sp.train, cfg, m.store);

            LayerOutputs out = engine::graph_forward(m.graph, m.schema, loaded.interp, result.store);
            MetricsReport rep = compute_metrics(out.find(m.graph.target)->v, sp.test, true);
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%d,%d,%.4f,%.4f,%.4f\n", h, l,
                          rep.accuracy.value_or(NAN), rep.log_loss.value_or(NAN), rep.mse);
            csv << buf;
            std::fputs(buf, stdout);
        }
    }
    if (!o.csv.empty()) write_file(o.csv, csv.str());
    return 0;
}

struct ConvertOpts {
    std::string src;
    std::string out;
};

int cmd_convert_ml1m(const ConvertOpts& o) {
    data::movielens_convert(o.src, o.out);
    std::printf("manifest written to %s\n", o.out.c_str());
    return 0;
}

void add_common(CLI::App* cmd, CommonOpts& o, bool data_required = true) {
    cmd->add_option("--model", o.model, "model file (.rnn)")->required();
    auto* d = cmd->add_option("--data", o.data_dir, "dataset manifest directory");
    if (data_required) d->required();
    cmd->add_option("--labels", o.labels_file, "labels file inside the data directory");
    cmd->add_option("--seed", o.seed, "seed for all random substreams");
    cmd->add_option("--split", o.split, "train fraction of the labeled objects");
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"relnn: train and evaluate relational neural network models"};
    app.require_subcommand(1);

    TrainOpts t;
    auto* train = app.add_subcommand("train", "train a model and write its parameters");
    add_common(train, t);
    train->add_option("--out", t.out, "trained-parameter output file");
    train->add_option("--log", t.log_csv, "training log CSV path (default: training_log.csv beside --out)");
    train->add_option("--epochs", t.epochs, "gradient-descent epochs per restart");
    train->add_option("--lr", t.lr, "learning rate");
    train->add_option("--l1", t.l1, "L1 (Laplacian prior) strength");
    train->add_option("--lambda", t.lambda, "override the model's mix lambda");
    train->add_option("--restarts", t.restarts, "independent restarts");
    train->add_option("--truncate-train-rmax", t.truncate_train_rmax,
                      "keep only the first r (random, 0..rmax) relation cells per train object");
    train->add_option("--saturate", t.saturate,
                      "add one all-ones row object per label class to this relation");
    train->add_flag("--no-precondition", t.no_precondition,
                    "disable the per-weight feature-scale step sizes");

    EvalOpts e;
    auto* eval = app.add_subcommand("eval", "evaluate trained parameters on the test split");
    add_common(eval, e);
    eval->add_option("--params", e.params, "trained-parameter file");
    eval->add_option("--baseline", e.baseline, "mean|none")
        ->check(CLI::IsMember({"mean", "none"}));
    eval->add_option("--csv", e.csv, "write metrics as a CSV file");
    eval->add_option("--lambda", e.lambda, "override the model's mix lambda");

    GradcheckOpts g;
    auto* grad = app.add_subcommand("gradcheck",
                                    "compare analytic gradients against finite differences");
    add_common(grad, g);
    grad->add_option("--step", g.h, "finite-difference step");
    grad->add_option("--tol", g.tol, "max relative error tolerated");
    grad->add_flag("--corrupt", g.corrupt)->group(""); // hidden test hook

    ExtrapolateOpts x;
    auto* ext = app.add_subcommand("extrapolate",
                                   "evaluate two trained models at truncated test relations");
    add_common(ext, x);
    ext->add_option("--params", x.params, "trained parameters for --model")->required();
    ext->add_option("--model2", x.model2, "second model file")->required();
    ext->add_option("--params2", x.params2, "trained parameters for --model2")->required();
    ext->add_option("--k-list", x.k_list, "comma-separated k values")->required();
    ext->add_option("--relation", x.relation, "binary relation to truncate");
    ext->add_option("--csv", x.csv, "output CSV path (default: stdout)");

    ConvertOpts c;
    auto* convert = app.add_subcommand("convert-ml1m",
                                       "convert a MovieLens-1M distribution into a manifest");
    convert->add_option("--src", c.src, "directory holding users.dat/movies.dat/ratings.dat")
        ->required();
    convert->add_option("--out", c.out, "manifest output directory")->required();

    SweepOpts s;
    auto* sweep = app.add_subcommand("sweep", "train a grid of generated model structures");
    sweep->add_option("--data", s.data_dir, "dataset manifest directory")->required();
    sweep->add_option("--labels", s.labels_file, "labels file inside the data directory");
    sweep->add_option("--seed", s.seed, "seed shared by every configuration");
    sweep->add_option("--split", s.split, "train fraction");
    sweep->add_option("--grid", s.grid, "'<hidden list>x<latent list>', e.g. 0,1,2x0,1,2")->required();
    sweep->add_option("--epochs", s.epochs, "epochs per configuration");
    sweep->add_option("--lr", s.lr, "learning rate");
    sweep->add_option("--l1", s.l1, "L1 strength");
    sweep->add_option("--restarts", s.restarts, "restarts per configuration");
    sweep->add_option("--lambda", s.lambda, "mix lambda for generated models");
    sweep->add_option("--csv", s.csv, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(train)) return cmd_train(t);
        if (app.got_subcommand(eval)) return cmd_eval(e);
        if (app.got_subcommand(grad)) return cmd_gradcheck(g);
        if (app.got_subcommand(ext)) return cmd_extrapolate(x);
        if (app.got_subcommand(sweep)) return cmd_sweep(s);
        if (app.got_subcommand(convert)) return cmd_convert_ml1m(c);
    } catch (const CLI::ParseError& err) {
        int code = app.exit(err);
        return code == 0 ? 0 : 2;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 2;
}

} // namespace relnn::cli
