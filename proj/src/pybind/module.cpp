#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "relnn/cli.hpp"
#include "relnn/data.hpp"
#include "relnn/engine.hpp"
#include "relnn/learn.hpp"
#include "relnn/metrics.hpp"
#include "relnn/modelspec.hpp"
#include "relnn/oracle.hpp"

namespace py = pybind11;
using namespace relnn;

namespace {

struct Session {
    cli::ModelBundle model;
    data::LoadedData data;
};

Session open_session(const std::string& model_text, const std::string& data_dir,
                     const std::string& labels_file) {
    Session s{cli::load_model_text(model_text), {}};
    data::DatasetManifest manifest{data_dir, labels_file};
    s.data = data::load(manifest, s.model.schema, s.model.graph.labels);
    cli::sync_latents(s.model.store, s.model.schema);
    return s;
}

py::dict metrics_dict(const cli::MetricsReport& r) {
    py::dict d;
    if (r.accuracy) d["accuracy"] = *r.accuracy;
    if (r.log_loss) d["logloss"] = *r.log_loss;
    d["mse"] = r.mse;
    d["n"] = r.n;
    d["class_balance"] = r.class_balance;
    return d;
}

} // namespace

PYBIND11_MODULE(_relnn, m) {
    m.doc() = "Relational neural network engine: weighted-formula counting, "
              "layer-graph forward/backward, and training.";

    m.def(
        "validate",
        [](const std::string& model_text) {
            auto parsed = modelspec::parse(model_text);
            if (!parsed.ok()) throw std::invalid_argument(parsed.error->to_string());
            auto lowered = modelspec::lower(*parsed.doc);
            std::vector<std::string> out;
            for (const auto& v : lowered.report.items)
                out.push_back(v.code + " at " + v.where + ": " + v.message);
            return out;
        },
        py::arg("model_text"),
        "Parse and lower a model; returns the list of structural violations (empty when valid).");

    m.def(
        "layer_outputs",
        [](const std::string& model_text, const std::string& data_dir,
           const std::string& predicate, const std::string& params_text,
           const std::string& labels_file) {
            Session s = open_session(model_text, data_dir, labels_file);
            if (!params_text.empty())
                modelspec::load_trained(params_text, s.model.store, s.model.schema);
            if (s.model.graph.mix()) s.model.store.mix_mean = s.data.labels.mean();
            LayerOutputs out =
                engine::graph_forward(s.model.graph, s.model.schema, s.data.interp, s.model.store);
            PredicateId pid = s.model.schema.find_predicate(predicate);
            if (pid < 0) throw std::invalid_argument("unknown predicate: " + predicate);
            const Dense* d = out.find(pid);
            if (!d) throw std::invalid_argument("predicate has no layer output: " + predicate);
            return d->v;
        },
        py::arg("model_text"), py::arg("data_dir"), py::arg("predicate"),
        py::arg("params_text") = "", py::arg("labels_file") = "labels.tsv",
        "Run a forward pass and return one derived predicate's values.");

    m.def(
        "train",
        [](const std::string& model_text, const std::string& data_dir, uint64_t seed,
           int epochs, int restarts, double lr, double l1, double split,
           const std::string& labels_file) {
            Session s = open_session(model_text, data_dir, labels_file);
            const Population& pop =
                s.model.schema.pop(s.model.schema.pred(s.model.graph.labels).args[0]);
            data::LabeledSplit sp = data::split(s.data.labels, pop, split, seed);
            learn::TrainConfig cfg;
            cfg.seed = seed;
            cfg.epochs = epochs;
            cfg.restarts = restarts;
            cfg.lr = lr;
            cfg.l1 = l1;
            learn::TrainResult result = learn::train(s.model.graph, s.model.schema, s.data.interp,
                                                     sp.train, cfg, s.model.store);
            LayerOutputs out = engine::graph_forward(s.model.graph, s.model.schema, s.data.interp,
                                                     result.store);
            bool classification = s.model.graph.rel()->loss == LossKind::LogLoss;
            cli::MetricsReport rep =
                cli::compute_metrics(out.find(s.model.graph.target)->v, sp.test, classification);

            py::dict d;
            d["params"] = modelspec::serialize_trained(result.store, s.model.schema);
            d["final_train_loss"] = result.log.best_loss;
            d["best_restart"] = result.log.best_restart;
            d["test_metrics"] = metrics_dict(rep);
            return d;
        },
        py::arg("model_text"), py::arg("data_dir"), py::arg("seed") = 0, py::arg("epochs") = 100,
        py::arg("restarts") = 1, py::arg("lr") = 0.05, py::arg("l1") = 1e-4,
        py::arg("split") = 0.8, py::arg("labels_file") = "labels.tsv",
        "Train with full-batch gradient descent; returns the serialized parameters, the final "
        "training loss, and held-out metrics.");

    m.def(
        "evaluate",
        [](const std::string& model_text, const std::string& params_text,
           const std::string& data_dir, uint64_t seed, double split, const std::string& baseline,
           const std::string& labels_file) {
            Session s = open_session(model_text, data_dir, labels_file);
            const Population& pop =
                s.model.schema.pop(s.model.schema.pred(s.model.graph.labels).args[0]);
            data::LabeledSplit sp = data::split(s.data.labels, pop, split, seed);
            bool classification = s.model.graph.rel()->loss == LossKind::LogLoss;
            if (baseline == "mean")
                return metrics_dict(cli::mean_baseline(sp.train.mean(), sp.test, classification));
            modelspec::load_trained(params_text, s.model.store, s.model.schema);
            s.model.store.mix_mean = sp.train.mean();
            LayerOutputs out =
                engine::graph_forward(s.model.graph, s.model.schema, s.data.interp, s.model.store);
            return metrics_dict(
                cli::compute_metrics(out.find(s.model.graph.target)->v, sp.test, classification));
        },
        py::arg("model_text"), py::arg("params_text"), py::arg("data_dir"), py::arg("seed") = 0,
        py::arg("split") = 0.8, py::arg("baseline") = "none", py::arg("labels_file") = "labels.tsv",
        "Evaluate trained parameters (or the mean baseline) on the held-out split.");

    m.def(
        "gradcheck",
        [](const std::string& model_text, const std::string& data_dir, uint64_t seed, double h,
           const std::string& labels_file) {
            Session s = open_session(model_text, data_dir, labels_file);
            learn::TrainConfig cfg;
            cfg.seed = seed;
            learn::init_params(s.model.store, cfg, seed);
            if (s.model.graph.mix()) s.model.store.mix_mean = s.data.labels.mean();
            engine::ForwardTrace trace = engine::graph_forward_traced(
                s.model.graph, s.model.schema, s.data.interp, s.model.store);
            learn::GradientTape tape;
            tape.reset(s.model.graph, s.model.schema, s.model.store);
            learn::graph_backward(s.model.graph, s.model.schema, s.data.interp, s.model.store,
                                  trace, s.data.labels, tape);
            oracle::NumericGrad num = oracle::numeric_grad(s.model.graph, s.model.schema,
                                                           s.data.interp, s.model.store,
                                                           s.data.labels, h);
            double worst = 0.0;
            auto upd = [&](double a, double n) {
                double scale = std::max({std::fabs(a), std::fabs(n), 1e-4});
                worst = std::max(worst, std::fabs(a - n) / scale);
            };
            for (size_t i = 0; i < num.d_weights.size(); ++i)
                upd(tape.d_weights[i], num.d_weights[i]);
            for (const auto& [pred, table] : num.d_latents)
                for (size_t i = 0; i < table.size(); ++i)
                    upd(tape.d_latents.at(pred)[i], table[i]);
            return worst;
        },
        py::arg("model_text"), py::arg("data_dir"), py::arg("seed") = 0, py::arg("h") = 1e-5,
        py::arg("labels_file") = "labels.tsv",
        "Worst relative error between analytic gradients and central finite differences.");

    m.def(
        "convert_movielens",
        [](const std::string& src_dir, const std::string& out_dir) {
            data::movielens_convert(src_dir, out_dir);
        },
        py::arg("src_dir"), py::arg("out_dir"),
        "Convert a MovieLens-1M distribution directory into a dataset manifest.");
}
