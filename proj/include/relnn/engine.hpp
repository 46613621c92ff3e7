#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "relnn/formula.hpp"
#include "relnn/graph.hpp"
#include "relnn/interpretation.hpp"
#include "relnn/schema.hpp"

namespace relnn::engine {

class EngineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Everything a formula evaluation may read: observed values from the
// interpretation, latent tables from the store, derived values from the
// outputs computed so far.
struct EvalContext {
    const Schema& schema;
    const Interpretation& interp;
    const ParameterStore& store;
    const LayerOutputs* derived = nullptr;
};

// Counts sparse-cell visits so tests can assert the linear-time contract.
uint64_t cell_ops();
void reset_cell_ops();

// Gradient accumulators a formula backward pass writes into. Entries must
// exist with the right shapes; observed predicates never receive gradient.
struct InputGradSink {
    std::map<PredicateId, std::vector<double>>* latents = nullptr;
    std::map<PredicateId, Dense>* derived = nullptr;
};

// A conjunctive formula compiled against its schema: unary literals grouped
// per logvar, binary literals as edges of the join tree, the tree rooted at
// the first head logvar. Evaluation is variable elimination leaves-first;
// the backward pass runs the matching inside-outside sweep.
class FormulaEval {
public:
    FormulaEval(const ConjunctiveFormula& f, int head_arity, const Schema& schema);

    // eta for every head binding at once (vector, or matrix for binary heads).
    Dense forward_all(const EvalContext& ctx) const;

    // eta for a single head binding, computed by per-binding recursion over
    // row/column slices (an independent arithmetic path from forward_all).
    double forward_one(const EvalContext& ctx, const std::vector<int>& binding) const;

    // Accumulates d(sum_X d_out[X] * w * eta(X)) / d(input value) for every
    // differentiable (latent or derived) predicate occurrence.
    void backward_all(const EvalContext& ctx, const Dense& d_out, double w,
                      InputGradSink& sink) const;

private:
    struct UnaryRef {
        PredicateId pred;
        bool negated;
    };
    struct Edge {
        PredicateId pred = -1;
        bool negated = false;
        int row_slot = -1;
        int col_slot = -1;
    };
    struct Slot {
        PopulationId pop = -1;
        std::vector<UnaryRef> unary;
        std::vector<int> children;   // child slot ids
        std::vector<int> child_edge; // edge index per child
        int parent = -1;
    };

    bool is_true_ = false;
    int head_arity_ = 1;
    std::vector<Slot> slots_;
    std::vector<Edge> edges_;
    std::vector<int> postorder_;  // children before parents, root last
    std::vector<int> head2_path_; // slots from root to second head logvar (binary heads)

    int pop_size(const EvalContext& ctx, int slot) const;
    std::vector<double> unary_factor(const EvalContext& ctx, int slot) const;
    std::vector<double> unary_factor_except(const EvalContext& ctx, int slot, int skip) const;

    // msg_to_parent[o_parent] = sum_{o_child} edge(o_parent, o_child) * from[o_child]
    std::vector<double> propagate(const EvalContext& ctx, int edge, int parent_slot,
                                  const std::vector<double>& from) const;
    // transposed direction, used by the outside sweep
    std::vector<double> propagate_back(const EvalContext& ctx, int edge, int parent_slot,
                                       const std::vector<double>& toward_child) const;

    struct InsideState {
        std::vector<std::vector<double>> factor;           // per slot
        std::vector<std::vector<std::vector<double>>> msg; // per slot, per child
        std::vector<std::vector<double>> inside;           // factor * prod(msg)
    };
    InsideState run_inside(const EvalContext& ctx,
                           const std::vector<double>* head2_mask) const;

    void backward_unary_head(const EvalContext& ctx, const std::vector<double>& d_out,
                             double w, const std::vector<double>* head2_mask,
                             InputGradSink& sink) const;

    double eval_clamped(const EvalContext& ctx, int slot, int obj,
                        const std::vector<int>& binding,
                        std::vector<std::map<int, double>>& memo) const;
};

// eta(f theta, I-hat) for one grounding of the head logvars.
double count_eta(const ConjunctiveFormula& f, int head_arity,
                 const std::vector<int>& head_binding, const EvalContext& ctx);

// eta for all head bindings simultaneously via the join-tree fast path.
Dense join_fastpath(const ConjunctiveFormula& f, int head_arity, const EvalContext& ctx);

// out[X] = sum_k w_k * eta(phi_k theta_X, I-hat)
Dense unit_forward(const RelationalLinearUnit& unit, const EvalContext& ctx);

// Forward trace: derived outputs plus per-WF eta tensors, keyed by
// (node, unit, wf); the backward pass reuses the etas for weight gradients.
struct ForwardTrace {
    LayerOutputs outputs;
    std::map<std::tuple<int, int, int>, Dense> etas;
};

LayerOutputs graph_forward(const LayerGraph& graph, const Schema& schema,
                           const Interpretation& interp, const ParameterStore& store);

ForwardTrace graph_forward_traced(const LayerGraph& graph, const Schema& schema,
                                  const Interpretation& interp, const ParameterStore& store);

double activation_apply(Activation a, double x);

} // namespace relnn::engine
