#pragma once

#include <map>
#include <stdexcept>
#include <vector>

#include "relnn/graph.hpp"
#include "relnn/interpretation.hpp"
#include "relnn/learn.hpp"
#include "relnn/schema.hpp"

namespace relnn::oracle {

class OracleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Exhaustive nested-loop evaluation of eta: every grounding of the free
// logvars is enumerated and literal values multiplied directly. No join
// tree, no sparsity; cyclic join graphs are fine here. Populations are
// capped at 64 objects per logvar to guard against blowup.
double naive_eta(const ConjunctiveFormula& f, int head_arity, const std::vector<int>& head_binding,
                 const Schema& schema, const Interpretation& interp, const ParameterStore& store,
                 const LayerOutputs* derived);

// Same contract as engine::graph_forward, built on naive_eta.
LayerOutputs naive_forward(const LayerGraph& graph, const Schema& schema,
                           const Interpretation& interp, const ParameterStore& store);

struct NumericGrad {
    std::vector<double> d_weights;
    std::map<PredicateId, std::vector<double>> d_latents;
};

// Central finite differences of the data loss through naive_forward,
// (E(theta+h) - E(theta-h)) / 2h per learnable scalar.
NumericGrad numeric_grad(const LayerGraph& graph, const Schema& schema,
                         const Interpretation& interp, const ParameterStore& store,
                         const learn::Labels& labels, double h);

// The loss the finite differences go through (recoded here, not shared with
// learn): natural-log logloss or mean squared error over labeled objects.
double naive_loss(const LayerGraph& graph, const Schema& schema, const Interpretation& interp,
                  const ParameterStore& store, const learn::Labels& labels);

} // namespace relnn::oracle
