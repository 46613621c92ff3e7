#include "relnn/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "relnn/rng.hpp"

namespace relnn::learn {

void GradientTape::reset(const LayerGraph& graph, const Schema& schema,
                         const ParameterStore& store) {
    d_weights.assign(store.weights.size(), 0.0);
    d_latents.clear();
    for (const auto& [pred, table] : store.latents)
        d_latents.emplace(pred, std::vector<double>(table.size(), 0.0));
    d_derived.clear();
    for (const LayerNode& node : graph.nodes) {
        auto shape_for = [&](PredicateId p) {
            const PredicateDecl& pd = schema.pred(p);
            int rows = schema.pop(pd.args[0]).size;
            int cols = pd.arity() == 2 ? schema.pop(pd.args[1]).size : 1;
            d_derived.emplace(p, Dense(rows, cols));
        };
        if (const auto* rll = std::get_if<RllNode>(&node))
            for (const auto& unit : rll->units) shape_for(unit.head);
        else if (const auto* ral = std::get_if<RalNode>(&node))
            for (const auto& [in, out] : ral->maps) shape_for(out);
        else if (const auto* mix = std::get_if<MixNode>(&node))
            shape_for(mix->output);
    }
}

std::pair<double, std::vector<double>> loss_and_dout(const std::vector<double>& pred,
                                                     const Labels& labels, LossKind kind) {
    std::vector<double> d(pred.size(), 0.0);
    if (labels.items.empty()) return {0.0, d};
    double inv_n = 1.0 / static_cast<double>(labels.items.size());
    double loss = 0.0;
    for (const auto& [obj, y] : labels.items) {
        double p = pred.at(obj);
        if (kind == LossKind::LogLoss) {
            if (p <= 0.0 || p >= 1.0)
                throw TrainError("degenerate probability " + std::to_string(p) +
                                 " for object " + std::to_string(obj));
            loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p)) * inv_n;
            d[obj] += (p - y) / (p * (1.0 - p)) * inv_n;
        } else {
            double e = p - y;
            loss += e * e * inv_n;
            d[obj] += 2.0 * e * inv_n;
        }
    }
    return {loss, d};
}

std::vector<double> weight_grad(const RelationalLinearUnit& unit, const engine::EvalContext& ctx,
                                const std::vector<double>& d_out) {
    std::vector<double> grads;
    grads.reserve(unit.wfs.size());
    for (const WeightedFormula& wf : unit.wfs) {
        Dense eta = engine::join_fastpath(wf.formula, unit.head_arity, ctx);
        double g = 0.0;
        for (size_t i = 0; i < eta.v.size(); ++i) g += eta.v[i] * d_out[i];
        grads.push_back(g);
    }
    return grads;
}

void input_grad(const RelationalLinearUnit& unit, const engine::EvalContext& ctx,
                const Dense& d_out, GradientTape& tape) {
    engine::InputGradSink sink{&tape.d_latents, &tape.d_derived};
    for (const WeightedFormula& wf : unit.wfs) {
        double w = ctx.store.weights.at(wf.weight_id).value;
        engine::FormulaEval ev(wf.formula, unit.head_arity, ctx.schema);
        ev.backward_all(ctx, d_out, w, sink);
    }
}

std::vector<double> activation_backward(Activation kind, const std::vector<double>& out,
                                        const std::vector<double>& d_out) {
    std::vector<double> d(out.size());
    for (size_t i = 0; i < out.size(); ++i) {
        switch (kind) {
            case Activation::Sigmoid: d[i] = d_out[i] * out[i] * (1.0 - out[i]); break;
            case Activation::Tanh: d[i] = d_out[i] * (1.0 - out[i] * out[i]); break;
            case Activation::Relu: d[i] = out[i] > 0.0 ? d_out[i] : 0.0; break;
            case Activation::Identity: d[i] = d_out[i]; break;
        }
    }
    return d;
}

double graph_backward(const LayerGraph& graph, const Schema& schema, const Interpretation& interp,
                      const ParameterStore& store, const engine::ForwardTrace& trace,
                      const Labels& labels, GradientTape& tape) {
    const RelNode* rel = graph.rel();
    if (!rel) throw TrainError("graph has no REL node");

    const Dense* target_out = trace.outputs.find(rel->input);
    if (!target_out) throw TrainError("forward trace is missing the target predicate");

    auto [loss, d_target] = loss_and_dout(target_out->v, labels, rel->loss);
    tape.d_derived.at(rel->input).v = d_target;

    engine::EvalContext ctx{schema, interp, store, &trace.outputs};

    for (size_t ni = graph.nodes.size(); ni-- > 0;) {
        const LayerNode& node = graph.nodes[ni];
        if (const auto* mix = std::get_if<MixNode>(&node)) {
            const Dense& d_out = tape.d_derived.at(mix->output);
            Dense& d_in = tape.d_derived.at(mix->input);
            for (size_t i = 0; i < d_out.v.size(); ++i)
                d_in.v[i] += (1.0 - mix->lambda) * d_out.v[i];
        } else if (const auto* ral = std::get_if<RalNode>(&node)) {
            for (auto it = ral->maps.rbegin(); it != ral->maps.rend(); ++it) {
                const auto& [in, out] = *it;
                const Dense& d_out = tape.d_derived.at(out);
                const Dense* fwd = trace.outputs.find(out);
                std::vector<double> d_in = activation_backward(ral->act, fwd->v, d_out.v);
                Dense& dst = tape.d_derived.at(in);
                for (size_t i = 0; i < d_in.size(); ++i) dst.v[i] += d_in[i];
            }
        } else if (const auto* rll = std::get_if<RllNode>(&node)) {
            for (size_t u = rll->units.size(); u-- > 0;) {
                const RelationalLinearUnit& unit = rll->units[u];
                const Dense& d_out = tape.d_derived.at(unit.head);
                for (size_t k = 0; k < unit.wfs.size(); ++k) {
                    auto key = std::make_tuple(static_cast<int>(ni), static_cast<int>(u),
                                               static_cast<int>(k));
                    auto eta_it = trace.etas.find(key);
                    double g = 0.0;
                    if (eta_it != trace.etas.end()) {
                        const Dense& eta = eta_it->second;
                        for (size_t i = 0; i < eta.v.size(); ++i) g += eta.v[i] * d_out.v[i];
                    } else {
                        Dense eta = engine::join_fastpath(unit.wfs[k].formula, unit.head_arity, ctx);
                        for (size_t i = 0; i < eta.v.size(); ++i) g += eta.v[i] * d_out.v[i];
                    }
                    tape.d_weights.at(unit.wfs[k].weight_id) += g;
                }
                input_grad(unit, ctx, d_out, tape);
            }
        }
    }
    return loss;
}

void sgd_step(ParameterStore& store, const GradientTape& tape, const TrainConfig& cfg,
              const std::vector<double>* weight_scale) {
    auto step = [&](double& value, double grad, double scale) {
        if (!std::isfinite(grad))
            throw TrainError("non-finite gradient encountered; aborting epoch");
        double sign = value > 0.0 ? 1.0 : (value < 0.0 ? -1.0 : 0.0);
        value -= cfg.lr / scale * (grad + cfg.l1 * sign);
    };
    for (size_t i = 0; i < store.weights.size(); ++i) {
        if (store.weights[i].frozen) continue;
        step(store.weights[i].value, tape.d_weights.at(i),
             weight_scale ? (*weight_scale)[i] : 1.0);
    }
    for (auto& [pred, table] : store.latents) {
        const auto& grads = tape.d_latents.at(pred);
        for (size_t i = 0; i < table.size(); ++i) step(table[i], grads[i], 1.0);
    }
}

std::vector<double> weight_preconditioner(const LayerGraph& graph, const Schema& schema,
                                          const Interpretation& interp,
                                          const ParameterStore& store) {
    std::vector<double> scale(store.weights.size(), 1.0);
    engine::ForwardTrace trace = engine::graph_forward_traced(graph, schema, interp, store);
    for (size_t n = 0; n < graph.nodes.size(); ++n) {
        const auto* rll = std::get_if<RllNode>(&graph.nodes[n]);
        if (!rll) continue;
        for (size_t u = 0; u < rll->units.size(); ++u) {
            const RelationalLinearUnit& unit = rll->units[u];
            for (size_t k = 0; k < unit.wfs.size(); ++k) {
                const Dense& eta = trace.etas.at(std::make_tuple(static_cast<int>(n),
                                                                 static_cast<int>(u),
                                                                 static_cast<int>(k)));
                double s = 0.0;
                for (double v : eta.v) s += v * v;
                // tied weights keep the largest of their usage scales
                scale[unit.wfs[k].weight_id] =
                    std::max(scale[unit.wfs[k].weight_id],
                             std::max(1.0, s / static_cast<double>(eta.v.size())));
            }
        }
    }
    return scale;
}

void init_params(ParameterStore& store, const TrainConfig& cfg, uint64_t seed) {
    Rng rng(Rng::substream(seed, "init"));
    for (WeightParam& w : store.weights)
        if (!w.frozen) w.value = rng.uniform(cfg.weight_init_lo, cfg.weight_init_hi);
    for (auto& [pred, table] : store.latents)
        for (double& v : table) v = rng.uniform(cfg.latent_init_lo, cfg.latent_init_hi);
}

LayerGraph apply_lambda_override(const LayerGraph& graph, const TrainConfig& cfg) {
    LayerGraph g = graph;
    if (cfg.lambda_override)
        for (LayerNode& node : g.nodes)
            if (auto* mix = std::get_if<MixNode>(&node)) mix->lambda = *cfg.lambda_override;
    return g;
}

TrainResult train(const LayerGraph& graph_in, const Schema& schema, const Interpretation& interp,
                  const Labels& train_labels, const TrainConfig& cfg,
                  const ParameterStore& store_template) {
    LayerGraph graph = apply_lambda_override(graph_in, cfg);

    TrainResult best;
    TrainingLog log;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    log.final_losses.assign(std::max(cfg.restarts, 1), nan);

    int restarts = std::max(cfg.restarts, 1);
    for (int r = 0; r < restarts; ++r) {
        ParameterStore store = store_template;
        store.seed = cfg.seed + static_cast<uint64_t>(r);
        init_params(store, cfg, store.seed);
        if (graph.mix()) store.mix_mean = train_labels.mean();

        std::vector<double> scale;
        if (cfg.precondition) {
            scale = weight_preconditioner(graph, schema, interp, store);
            // start every weight at the scale its feature warrants
            for (size_t i = 0; i < store.weights.size(); ++i)
                if (!store.weights[i].frozen) store.weights[i].value /= std::sqrt(scale[i]);
        }

        GradientTape tape;
        bool diverged = false;
        double last_loss = nan;
        for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
            engine::ForwardTrace trace;
            double loss;
            try {
                trace = engine::graph_forward_traced(graph, schema, interp, store);
                const Dense* out = trace.outputs.find(graph.target);
                if (!out) throw TrainError("target predicate missing from forward outputs");
                loss = loss_and_dout(out->v, train_labels, graph.rel()->loss).first;
            } catch (const TrainError&) {
                diverged = true;
                break;
            }
            if (!std::isfinite(loss)) {
                diverged = true;
                break;
            }
            log.entries.push_back(TrainingLog::Entry{r, epoch, loss});
            last_loss = loss;
            if (epoch == cfg.epochs) break;

            tape.reset(graph, schema, store);
            try {
                graph_backward(graph, schema, interp, store, trace, train_labels, tape);
                sgd_step(store, tape, cfg, cfg.precondition ? &scale : nullptr);
            } catch (const TrainError&) {
                diverged = true;
                break;
            }
        }
        if (diverged) continue;

        log.final_losses[r] = last_loss;
        if (log.best_restart < 0 || last_loss < log.best_loss) {
            log.best_restart = r;
            log.best_loss = last_loss;
            best.store = std::move(store);
        }
    }

    if (log.best_restart < 0)
        throw TrainError("all restarts diverged (non-finite loss); see training log");
    best.log = std::move(log);
    return best;
}

} // namespace relnn::learn
