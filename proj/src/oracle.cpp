#include "relnn/oracle.hpp"

#include <cmath>

namespace relnn::oracle {

namespace {

double lookup(PredicateId pred, const std::vector<int>& objs, const Schema& schema,
              const Interpretation& interp, const ParameterStore& store,
              const LayerOutputs* derived) {
    const PredicateDecl& pd = schema.pred(pred);
    switch (pd.kind) {
        case PredicateKind::NumericLatent: {
            auto it = store.latents.find(pred);
            if (it == store.latents.end()) throw OracleError("missing latent table: " + pd.name);
            return it->second.at(objs[0]);
        }
        case PredicateKind::Derived: {
            const Dense* d = derived ? derived->find(pred) : nullptr;
            if (!d) throw OracleError("missing derived values: " + pd.name);
            return pd.arity() == 1 ? d->at(objs[0], 0) : d->at(objs[0], objs[1]);
        }
        default: break;
    }
    if (pd.arity() == 1) {
        const auto* v = interp.find_unary(pred);
        return v ? (*v)[objs[0]] : 0.0;
    }
    const auto* rel = interp.find_binary(pred);
    return rel ? rel->value_at(objs[0], objs[1]) : 0.0;
}

} // namespace

double naive_eta(const ConjunctiveFormula& f, int head_arity, const std::vector<int>& head_binding,
                 const Schema& schema, const Interpretation& interp, const ParameterStore& store,
                 const LayerOutputs* derived) {
    if (f.is_true) return 1.0;

    std::vector<int> assign(f.num_logvars, 0);
    for (int h = 0; h < head_arity; ++h) assign[h] = head_binding[h];

    for (int s = head_arity; s < f.num_logvars; ++s)
        if (schema.pop(f.logvar_pops[s]).size > 64)
            throw OracleError("population too large for the brute-force oracle");

    double total = 0.0;
    // Odometer over all groundings of the free logvars.
    std::vector<int> idx(std::max(f.num_logvars - head_arity, 0), 0);
    while (true) {
        for (size_t i = 0; i < idx.size(); ++i) assign[head_arity + static_cast<int>(i)] = idx[i];
        double prod = 1.0;
        for (const Literal& lit : f.literals) {
            std::vector<int> objs;
            for (int a : lit.args) objs.push_back(assign[a]);
            double v = lookup(lit.predicate, objs, schema, interp, store, derived);
            prod *= lit.negated ? 1.0 - v : v;
        }
        total += prod;

        size_t d = 0;
        while (d < idx.size()) {
            if (++idx[d] < schema.pop(f.logvar_pops[head_arity + static_cast<int>(d)]).size) break;
            idx[d] = 0;
            ++d;
        }
        if (d == idx.size()) break;
        if (idx.empty()) break;
    }
    return total;
}

namespace {

double naive_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double naive_activation(Activation a, double x) {
    switch (a) {
        case Activation::Sigmoid: return naive_sigmoid(x);
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Identity: return x;
    }
    return x;
}

} // namespace

LayerOutputs naive_forward(const LayerGraph& graph, const Schema& schema,
                           const Interpretation& interp, const ParameterStore& store) {
    LayerOutputs outputs;
    for (const LayerNode& node : graph.nodes) {
        if (const auto* rll = std::get_if<RllNode>(&node)) {
            for (const RelationalLinearUnit& unit : rll->units) {
                const PredicateDecl& head = schema.pred(unit.head);
                int rows = schema.pop(head.args[0]).size;
                int cols = unit.head_arity == 2 ? schema.pop(head.args[1]).size : 1;
                Dense out(rows, cols);
                for (int r = 0; r < rows; ++r) {
                    for (int c = 0; c < cols; ++c) {
                        std::vector<int> binding{r};
                        if (unit.head_arity == 2) binding.push_back(c);
                        double sum = 0.0;
                        for (const WeightedFormula& wf : unit.wfs)
                            sum += store.weights.at(wf.weight_id).value *
                                   naive_eta(wf.formula, unit.head_arity, binding, schema, interp,
                                             store, &outputs);
                        out.at(r, c) = sum;
                    }
                }
                outputs.values[unit.head] = std::move(out);
            }
        } else if (const auto* ral = std::get_if<RalNode>(&node)) {
            for (const auto& [in, outp] : ral->maps) {
                const Dense* src = outputs.find(in);
                if (!src) throw OracleError("missing derived values: " + schema.pred(in).name);
                Dense dst(src->rows, src->cols);
                for (size_t i = 0; i < src->v.size(); ++i)
                    dst.v[i] = naive_activation(ral->act, src->v[i]);
                outputs.values[outp] = std::move(dst);
            }
        } else if (const auto* mix = std::get_if<MixNode>(&node)) {
            const Dense* src = outputs.find(mix->input);
            if (!src) throw OracleError("missing derived values: " + schema.pred(mix->input).name);
            if (!store.mix_mean) throw OracleError("mix mean unset");
            Dense dst(src->rows, src->cols);
            for (size_t i = 0; i < src->v.size(); ++i)
                dst.v[i] = mix->lambda * *store.mix_mean + (1.0 - mix->lambda) * src->v[i];
            outputs.values[mix->output] = std::move(dst);
        }
    }
    return outputs;
}

double naive_loss(const LayerGraph& graph, const Schema& schema, const Interpretation& interp,
                  const ParameterStore& store, const learn::Labels& labels) {
    const RelNode* rel = graph.rel();
    if (!rel) throw OracleError("graph has no REL node");
    LayerOutputs outputs = naive_forward(graph, schema, interp, store);
    const Dense* pred = outputs.find(rel->input);
    if (!pred) throw OracleError("missing target values");

    double loss = 0.0;
    if (labels.items.empty()) return 0.0;
    for (const auto& [obj, y] : labels.items) {
        double p = pred->v.at(obj);
        if (rel->loss == LossKind::LogLoss) {
            if (p <= 0.0 || p >= 1.0) throw OracleError("degenerate probability in naive loss");
            loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        } else {
            loss += (p - y) * (p - y);
        }
    }
    return loss / static_cast<double>(labels.items.size());
}

NumericGrad numeric_grad(const LayerGraph& graph, const Schema& schema,
                         const Interpretation& interp, const ParameterStore& store,
                         const learn::Labels& labels, double h) {
    if (h <= 0.0) throw OracleError("finite-difference step must be positive");
    NumericGrad out;
    ParameterStore work = store;

    auto central = [&](double& slot) {
        double orig = slot;
        slot = orig + h;
        double up = naive_loss(graph, schema, interp, work, labels);
        slot = orig - h;
        double down = naive_loss(graph, schema, interp, work, labels);
        slot = orig;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw OracleError("non-finite loss during finite differences");
        return (up - down) / (2.0 * h);
    };

    out.d_weights.resize(work.weights.size(), 0.0);
    for (size_t i = 0; i < work.weights.size(); ++i)
        out.d_weights[i] = central(work.weights[i].value);
    for (auto& [pred, table] : work.latents) {
        auto& dst = out.d_latents[pred];
        dst.resize(table.size(), 0.0);
        for (size_t i = 0; i < table.size(); ++i) dst[i] = central(table[i]);
    }
    return out;
}

} // namespace relnn::oracle
