#include "relnn/engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace relnn::engine {

namespace {

uint64_t g_cell_ops = 0;

// Binary literal values come either from the sparse interpretation or from
// a dense derived matrix; absent relations are all-zero (closed world).
struct EdgeData {
    const SparseRelation* sparse = nullptr;
    const Dense* dense = nullptr;
    int rows = 0;
    int cols = 0;

    template <class F>
    void for_each(F&& f) const {
        if (sparse) {
            for (const auto& c : sparse->cells) {
                ++g_cell_ops;
                f(c.row, c.col, c.value);
            }
        } else if (dense) {
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < cols; ++c) {
                    ++g_cell_ops;
                    f(r, c, dense->at(r, c));
                }
        }
    }

    template <class F>
    void for_row(int row, F&& f) const {
        if (sparse) {
            for (int i = sparse->row_ptr[row]; i < sparse->row_ptr[row + 1]; ++i) {
                ++g_cell_ops;
                f(sparse->cells[i].col, sparse->cells[i].value);
            }
        } else if (dense) {
            for (int c = 0; c < cols; ++c) {
                ++g_cell_ops;
                f(c, dense->at(row, c));
            }
        }
    }

    template <class F>
    void for_col(int col, F&& f) const {
        if (sparse) {
            for (int i = sparse->col_ptr[col]; i < sparse->col_ptr[col + 1]; ++i) {
                ++g_cell_ops;
                const auto& c = sparse->cells[sparse->col_order[i]];
                f(c.row, c.value);
            }
        } else if (dense) {
            for (int r = 0; r < rows; ++r) {
                ++g_cell_ops;
                f(r, dense->at(r, col));
            }
        }
    }
};

EdgeData edge_data(const EvalContext& ctx, PredicateId pred, int rows, int cols) {
    EdgeData e;
    e.rows = rows;
    e.cols = cols;
    const PredicateDecl& pd = ctx.schema.pred(pred);
    if (pd.kind == PredicateKind::Derived) {
        const Dense* d = ctx.derived ? ctx.derived->find(pred) : nullptr;
        if (!d) throw EngineError("missing input predicate: " + pd.name);
        e.dense = d;
    } else {
        e.sparse = ctx.interp.find_binary(pred); // may be null: empty relation
    }
    return e;
}

double sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

} // namespace

uint64_t cell_ops() { return g_cell_ops; }
void reset_cell_ops() { g_cell_ops = 0; }

double activation_apply(Activation a, double x) {
    switch (a) {
        case Activation::Sigmoid:
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            else {
                double e = std::exp(x);
                return e / (1.0 + e);
            }
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Identity: return x;
    }
    return x;
}

FormulaEval::FormulaEval(const ConjunctiveFormula& f, int head_arity, const Schema&)
    : is_true_(f.is_true), head_arity_(head_arity) {
    slots_.resize(f.num_logvars);
    for (int s = 0; s < f.num_logvars; ++s) slots_[s].pop = f.logvar_pops[s];
    if (is_true_) return;

    std::vector<std::vector<std::pair<int, int>>> adj(f.num_logvars); // (other slot, edge)
    for (const Literal& lit : f.literals) {
        if (lit.args.size() == 1) {
            slots_[lit.args[0]].unary.push_back(UnaryRef{lit.predicate, lit.negated});
        } else {
            Edge e;
            e.pred = lit.predicate;
            e.negated = lit.negated;
            e.row_slot = lit.args[0];
            e.col_slot = lit.args[1];
            int id = static_cast<int>(edges_.size());
            edges_.push_back(e);
            adj[e.row_slot].push_back({e.col_slot, id});
            adj[e.col_slot].push_back({e.row_slot, id});
        }
    }

    // Root the join tree at the first head logvar.
    std::vector<bool> seen(f.num_logvars, false);
    std::deque<int> queue{0};
    seen[0] = true;
    std::vector<int> order;
    while (!queue.empty()) {
        int v = queue.front();
        queue.pop_front();
        order.push_back(v);
        for (auto [w, e] : adj[v]) {
            if (seen[w]) continue;
            seen[w] = true;
            slots_[w].parent = v;
            slots_[v].children.push_back(w);
            slots_[v].child_edge.push_back(e);
            queue.push_back(w);
        }
    }
    for (int s = 0; s < f.num_logvars; ++s)
        if (!seen[s]) throw EngineError("formula join graph is disconnected (run validate first)");

    postorder_.assign(order.rbegin(), order.rend());

    if (head_arity_ == 2) {
        // Path from root to the second head logvar, used by the pairwise DP.
        std::vector<int> path;
        for (int v = 1; v != -1; v = slots_[v].parent) path.push_back(v);
        std::reverse(path.begin(), path.end());
        head2_path_ = std::move(path); // starts at 0, ends at 1
    }
}

int FormulaEval::pop_size(const EvalContext& ctx, int slot) const {
    return ctx.schema.pop(slots_[slot].pop).size;
}

std::vector<double> FormulaEval::unary_factor(const EvalContext& ctx, int slot) const {
    return unary_factor_except(ctx, slot, -1);
}

std::vector<double> FormulaEval::unary_factor_except(const EvalContext& ctx, int slot,
                                                     int skip) const {
    int n = pop_size(ctx, slot);
    std::vector<double> f(n, 1.0);
    const auto& refs = slots_[slot].unary;
    for (size_t i = 0; i < refs.size(); ++i) {
        if (static_cast<int>(i) == skip) continue;
        const PredicateDecl& pd = ctx.schema.pred(refs[i].pred);
        const std::vector<double>* vals = nullptr;
        if (pd.kind == PredicateKind::NumericLatent) {
            auto it = ctx.store.latents.find(refs[i].pred);
            if (it == ctx.store.latents.end())
                throw EngineError("missing latent table: " + pd.name);
            vals = &it->second;
        } else if (pd.kind == PredicateKind::Derived) {
            const Dense* d = ctx.derived ? ctx.derived->find(refs[i].pred) : nullptr;
            if (!d) throw EngineError("missing input predicate: " + pd.name);
            vals = &d->v;
        } else {
            vals = ctx.interp.find_unary(refs[i].pred); // null: all zeros
        }
        if (vals && static_cast<int>(vals->size()) != n)
            throw EngineError("value table of " + pd.name + " does not match population size");
        for (int o = 0; o < n; ++o) {
            double v = vals ? (*vals)[o] : 0.0;
            f[o] *= refs[i].negated ? 1.0 - v : v;
        }
    }
    return f;
}

std::vector<double> FormulaEval::propagate(const EvalContext& ctx, int edge, int parent_slot,
                                           const std::vector<double>& from) const {
    const Edge& e = edges_[edge];
    bool parent_is_row = (e.row_slot == parent_slot);
    int np = pop_size(ctx, parent_slot);
    int child = parent_is_row ? e.col_slot : e.row_slot;
    EdgeData data = edge_data(ctx, e.pred, pop_size(ctx, e.row_slot), pop_size(ctx, e.col_slot));

    std::vector<double> out(np, 0.0);
    if (parent_is_row)
        data.for_each([&](int r, int c, double v) { out[r] += v * from[c]; });
    else
        data.for_each([&](int r, int c, double v) { out[c] += v * from[r]; });
    if (e.negated) {
        double total = sum(from);
        for (int o = 0; o < np; ++o) out[o] = total - out[o];
    }
    (void)child;
    return out;
}

std::vector<double> FormulaEval::propagate_back(const EvalContext& ctx, int edge, int parent_slot,
                                                const std::vector<double>& toward_child) const {
    const Edge& e = edges_[edge];
    bool parent_is_row = (e.row_slot == parent_slot);
    int child = parent_is_row ? e.col_slot : e.row_slot;
    int nc = pop_size(ctx, child);
    EdgeData data = edge_data(ctx, e.pred, pop_size(ctx, e.row_slot), pop_size(ctx, e.col_slot));

    std::vector<double> out(nc, 0.0);
    if (parent_is_row)
        data.for_each([&](int r, int c, double v) { out[c] += v * toward_child[r]; });
    else
        data.for_each([&](int r, int c, double v) { out[r] += v * toward_child[c]; });
    if (e.negated) {
        double total = sum(toward_child);
        for (int o = 0; o < nc; ++o) out[o] = total - out[o];
    }
    return out;
}

FormulaEval::InsideState FormulaEval::run_inside(const EvalContext& ctx,
                                                 const std::vector<double>* head2_mask) const {
    InsideState st;
    int ns = static_cast<int>(slots_.size());
    st.factor.resize(ns);
    st.msg.resize(ns);
    st.inside.resize(ns);
    for (int v : postorder_) {
        st.factor[v] = unary_factor(ctx, v);
        if (head2_mask && v == 1)
            for (size_t o = 0; o < st.factor[v].size(); ++o) st.factor[v][o] *= (*head2_mask)[o];
        st.msg[v].resize(slots_[v].children.size());
        st.inside[v] = st.factor[v];
        for (size_t k = 0; k < slots_[v].children.size(); ++k) {
            int c = slots_[v].children[k];
            st.msg[v][k] = propagate(ctx, slots_[v].child_edge[k], v, st.inside[c]);
            for (size_t o = 0; o < st.inside[v].size(); ++o) st.inside[v][o] *= st.msg[v][k][o];
        }
    }
    return st;
}

Dense FormulaEval::forward_all(const EvalContext& ctx) const {
    int n0 = ctx.schema.pop(slots_[0].pop).size;
    if (head_arity_ == 1) {
        Dense out(n0, 1);
        if (is_true_) {
            std::fill(out.v.begin(), out.v.end(), 1.0);
            return out;
        }
        InsideState st = run_inside(ctx, nullptr);
        out.v = st.inside[0];
        return out;
    }

    int n1 = ctx.schema.pop(slots_[1].pop).size;
    Dense out(n0, n1);
    if (is_true_) {
        std::fill(out.v.begin(), out.v.end(), 1.0);
        return out;
    }

    // Pairwise output: fold every off-path subtree into its path slot's
    // factor, then sweep the path with a dense frontier over the first head
    // population.
    InsideState st = run_inside(ctx, nullptr);
    auto folded = [&](int path_idx) {
        int v = head2_path_[path_idx];
        std::vector<double> f = st.factor[v];
        int next = path_idx + 1 < static_cast<int>(head2_path_.size()) ? head2_path_[path_idx + 1] : -1;
        for (size_t k = 0; k < slots_[v].children.size(); ++k) {
            if (slots_[v].children[k] == next) continue;
            for (size_t o = 0; o < f.size(); ++o) f[o] *= st.msg[v][k][o];
        }
        return f;
    };

    std::vector<double> f0 = folded(0);
    // frontier[x][y]: partial sums with path slot i grounded at y
    std::vector<std::vector<double>> frontier(n0);
    for (int x = 0; x < n0; ++x) frontier[x].assign(n0, 0.0);
    for (int x = 0; x < n0; ++x) frontier[x][x] = f0[x];

    for (size_t i = 0; i + 1 < head2_path_.size(); ++i) {
        int v = head2_path_[i];
        int w = head2_path_[i + 1];
        int edge = -1;
        for (size_t k = 0; k < slots_[v].children.size(); ++k)
            if (slots_[v].children[k] == w) edge = slots_[v].child_edge[k];
        const Edge& e = edges_[edge];
        bool parent_is_row = (e.row_slot == v);
        EdgeData data = edge_data(ctx, e.pred, pop_size(ctx, e.row_slot), pop_size(ctx, e.col_slot));
        std::vector<double> fw = folded(static_cast<int>(i) + 1);
        int nw = pop_size(ctx, w);

        std::vector<std::vector<double>> next(n0);
        if (e.negated) {
            for (int x = 0; x < n0; ++x) {
                double rowsum = sum(frontier[x]);
                next[x].assign(nw, rowsum);
            }
        } else {
            for (int x = 0; x < n0; ++x) next[x].assign(nw, 0.0);
        }
        double sign = e.negated ? -1.0 : 1.0;
        data.for_each([&](int r, int c, double val) {
            int from = parent_is_row ? r : c;
            int to = parent_is_row ? c : r;
            for (int x = 0; x < n0; ++x) next[x][to] += sign * val * frontier[x][from];
        });
        for (int x = 0; x < n0; ++x)
            for (int y = 0; y < nw; ++y) next[x][y] *= fw[y];
        frontier = std::move(next);
    }

    for (int x = 0; x < n0; ++x)
        for (int y = 0; y < n1; ++y) out.at(x, y) = frontier[x][y];
    return out;
}

double FormulaEval::eval_clamped(const EvalContext& ctx, int slot, int obj,
                                 const std::vector<int>& binding,
                                 std::vector<std::map<int, double>>& memo) const {
    if (slot < head_arity_ && obj != binding[slot]) return 0.0;
    auto it = memo[slot].find(obj);
    if (it != memo[slot].end()) return it->second;

    double v = 1.0;
    for (size_t i = 0; i < slots_[slot].unary.size(); ++i) {
        const UnaryRef& ref = slots_[slot].unary[i];
        const PredicateDecl& pd = ctx.schema.pred(ref.pred);
        double raw = 0.0;
        if (pd.kind == PredicateKind::NumericLatent) {
            raw = ctx.store.latents.at(ref.pred).at(obj);
        } else if (pd.kind == PredicateKind::Derived) {
            const Dense* d = ctx.derived ? ctx.derived->find(ref.pred) : nullptr;
            if (!d) throw EngineError("missing input predicate: " + pd.name);
            raw = d->v.at(obj);
        } else if (const auto* u = ctx.interp.find_unary(ref.pred)) {
            raw = (*u)[obj];
        }
        v *= ref.negated ? 1.0 - raw : raw;
    }

    for (size_t k = 0; k < slots_[slot].children.size() && v != 0.0; ++k) {
        int c = slots_[slot].children[k];
        const Edge& e = edges_[slots_[slot].child_edge[k]];
        bool parent_is_row = (e.row_slot == slot);
        EdgeData data = edge_data(ctx, e.pred, pop_size(ctx, e.row_slot), pop_size(ctx, e.col_slot));
        double m = 0.0;
        auto visit = [&](int child_obj, double val) {
            m += val * eval_clamped(ctx, c, child_obj, binding, memo);
        };
        if (parent_is_row)
            data.for_row(obj, visit);
        else
            data.for_col(obj, visit);
        if (e.negated) {
            double total = 0.0;
            for (int o = 0; o < pop_size(ctx, c); ++o)
                total += eval_clamped(ctx, c, o, binding, memo);
            m = total - m;
        }
        v *= m;
    }

    memo[slot][obj] = v;
    return v;
}

double FormulaEval::forward_one(const EvalContext& ctx, const std::vector<int>& binding) const {
    if (is_true_) return 1.0;
    std::vector<std::map<int, double>> memo(slots_.size());
    return eval_clamped(ctx, 0, binding[0], binding, memo);
}

void FormulaEval::backward_unary_head(const EvalContext& ctx, const std::vector<double>& d_out,
                                      double w, const std::vector<double>* head2_mask,
                                      InputGradSink& sink) const {
    if (is_true_) return; // no inputs

    InsideState st = run_inside(ctx, head2_mask);

    int ns = static_cast<int>(slots_.size());
    std::vector<std::vector<double>> outside(ns);
    outside[0].resize(d_out.size());
    for (size_t o = 0; o < d_out.size(); ++o) outside[0][o] = w * d_out[o];

    // Pre-order: parents before children (reverse of postorder).
    for (auto it = postorder_.rbegin(); it != postorder_.rend(); ++it) {
        int v = *it;
        const auto& B = outside[v];

        // Gradients for differentiable unary literals on this slot.
        for (size_t i = 0; i < slots_[v].unary.size(); ++i) {
            const UnaryRef& ref = slots_[v].unary[i];
            const PredicateDecl& pd = ctx.schema.pred(ref.pred);
            if (pd.kind != PredicateKind::NumericLatent && pd.kind != PredicateKind::Derived)
                continue;
            std::vector<double> partial = unary_factor_except(ctx, v, static_cast<int>(i));
            if (head2_mask && v == 1)
                for (size_t o = 0; o < partial.size(); ++o) partial[o] *= (*head2_mask)[o];
            for (size_t k = 0; k < slots_[v].children.size(); ++k)
                for (size_t o = 0; o < partial.size(); ++o) partial[o] *= st.msg[v][k][o];
            double sign = ref.negated ? -1.0 : 1.0;
            if (pd.kind == PredicateKind::NumericLatent) {
                auto& dst = sink.latents->at(ref.pred);
                for (size_t o = 0; o < partial.size(); ++o) dst[o] += sign * B[o] * partial[o];
            } else {
                auto& dst = sink.derived->at(ref.pred);
                for (size_t o = 0; o < partial.size(); ++o) dst.v[o] += sign * B[o] * partial[o];
            }
        }

        // Push outside messages to children; collect edge gradients.
        for (size_t k = 0; k < slots_[v].children.size(); ++k) {
            int c = slots_[v].children[k];
            int eid = slots_[v].child_edge[k];
            const Edge& e = edges_[eid];

            std::vector<double> Bm = st.factor[v];
            for (size_t k2 = 0; k2 < slots_[v].children.size(); ++k2) {
                if (k2 == k) continue;
                for (size_t o = 0; o < Bm.size(); ++o) Bm[o] *= st.msg[v][k2][o];
            }
            for (size_t o = 0; o < Bm.size(); ++o) Bm[o] *= B[o];

            const PredicateDecl& pd = ctx.schema.pred(e.pred);
            if (pd.kind == PredicateKind::Derived) {
                // Dense gradient: every pair has a derivative.
                Dense& dst = sink.derived->at(e.pred);
                bool parent_is_row = (e.row_slot == v);
                double sign = e.negated ? -1.0 : 1.0;
                const auto& Ac = st.inside[c];
                for (size_t po = 0; po < Bm.size(); ++po) {
                    if (Bm[po] == 0.0) continue;
                    for (size_t co = 0; co < Ac.size(); ++co) {
                        double g = sign * Bm[po] * Ac[co];
                        if (parent_is_row)
                            dst.at(static_cast<int>(po), static_cast<int>(co)) += g;
                        else
                            dst.at(static_cast<int>(co), static_cast<int>(po)) += g;
                    }
                }
            }
            outside[c] = propagate_back(ctx, eid, v, Bm);
        }
    }
}

void FormulaEval::backward_all(const EvalContext& ctx, const Dense& d_out, double w,
                               InputGradSink& sink) const {
    if (is_true_) return;
    if (head_arity_ == 1) {
        backward_unary_head(ctx, d_out.v, w, nullptr, sink);
        return;
    }
    // Binary head: clamp the second head logvar one object at a time.
    int n1 = pop_size(ctx, 1);
    int n0 = pop_size(ctx, 0);
    std::vector<double> mask(n1, 0.0);
    std::vector<double> dcol(n0, 0.0);
    for (int y = 0; y < n1; ++y) {
        mask.assign(n1, 0.0);
        mask[y] = 1.0;
        for (int x = 0; x < n0; ++x) dcol[x] = d_out.at(x, y);
        backward_unary_head(ctx, dcol, w, &mask, sink);
    }
}

double count_eta(const ConjunctiveFormula& f, int head_arity,
                 const std::vector<int>& head_binding, const EvalContext& ctx) {
    FormulaEval ev(f, head_arity, ctx.schema);
    return ev.forward_one(ctx, head_binding);
}

Dense join_fastpath(const ConjunctiveFormula& f, int head_arity, const EvalContext& ctx) {
    FormulaEval ev(f, head_arity, ctx.schema);
    return ev.forward_all(ctx);
}

Dense unit_forward(const RelationalLinearUnit& unit, const EvalContext& ctx) {
    const PredicateDecl& head = ctx.schema.pred(unit.head);
    int rows = ctx.schema.pop(head.args[0]).size;
    int cols = unit.head_arity == 2 ? ctx.schema.pop(head.args[1]).size : 1;
    Dense out(rows, cols);
    for (const WeightedFormula& wf : unit.wfs) {
        double w = ctx.store.weights.at(wf.weight_id).value;
        Dense eta = join_fastpath(wf.formula, unit.head_arity, ctx);
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += w * eta.v[i];
    }
    return out;
}

namespace {

ForwardTrace run_graph(const LayerGraph& graph, const Schema& schema,
                       const Interpretation& interp, const ParameterStore& store,
                       bool keep_etas) {
    ForwardTrace trace;
    EvalContext ctx{schema, interp, store, &trace.outputs};

    for (size_t n = 0; n < graph.nodes.size(); ++n) {
        const LayerNode& node = graph.nodes[n];
        if (const auto* rll = std::get_if<RllNode>(&node)) {
            for (size_t u = 0; u < rll->units.size(); ++u) {
                const RelationalLinearUnit& unit = rll->units[u];
                const PredicateDecl& head = schema.pred(unit.head);
                int rows = schema.pop(head.args[0]).size;
                int cols = unit.head_arity == 2 ? schema.pop(head.args[1]).size : 1;
                Dense out(rows, cols);
                for (size_t k = 0; k < unit.wfs.size(); ++k) {
                    const WeightedFormula& wf = unit.wfs[k];
                    double w = store.weights.at(wf.weight_id).value;
                    Dense eta = join_fastpath(wf.formula, unit.head_arity, ctx);
                    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += w * eta.v[i];
                    if (keep_etas)
                        trace.etas.emplace(std::make_tuple(static_cast<int>(n), static_cast<int>(u),
                                                           static_cast<int>(k)),
                                           std::move(eta));
                }
                trace.outputs.values[unit.head] = std::move(out);
            }
        } else if (const auto* ral = std::get_if<RalNode>(&node)) {
            for (const auto& [in, outp] : ral->maps) {
                const Dense* src = trace.outputs.find(in);
                if (!src) throw EngineError("missing input predicate: " + schema.pred(in).name);
                Dense dst(src->rows, src->cols);
                for (size_t i = 0; i < src->v.size(); ++i)
                    dst.v[i] = activation_apply(ral->act, src->v[i]);
                trace.outputs.values[outp] = std::move(dst);
            }
        } else if (const auto* mix = std::get_if<MixNode>(&node)) {
            const Dense* src = trace.outputs.find(mix->input);
            if (!src) throw EngineError("missing input predicate: " + schema.pred(mix->input).name);
            if (!store.mix_mean)
                throw EngineError("mix mean unset: train (or evaluate with labels) before forwarding a MIX graph");
            double mean = *store.mix_mean;
            Dense dst(src->rows, src->cols);
            for (size_t i = 0; i < src->v.size(); ++i)
                dst.v[i] = mix->lambda * mean + (1.0 - mix->lambda) * src->v[i];
            trace.outputs.values[mix->output] = std::move(dst);
        }
        // RelNode: evaluated by the learner, not by forward.
    }
    return trace;
}

} // namespace

LayerOutputs graph_forward(const LayerGraph& graph, const Schema& schema,
                           const Interpretation& interp, const ParameterStore& store) {
    return run_graph(graph, schema, interp, store, false).outputs;
}

ForwardTrace graph_forward_traced(const LayerGraph& graph, const Schema& schema,
                                  const Interpretation& interp, const ParameterStore& store) {
    return run_graph(graph, schema, interp, store, true);
}

} // namespace relnn::engine
