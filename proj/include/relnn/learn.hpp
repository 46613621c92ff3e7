#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "relnn/engine.hpp"
#include "relnn/graph.hpp"
#include "relnn/interpretation.hpp"
#include "relnn/schema.hpp"

namespace relnn::learn {

class TrainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Label values for a subset of the target population.
struct Labels {
    std::vector<std::pair<int, double>> items; // (object index, value)

    double mean() const {
        if (items.empty()) return 0.0;
        double s = 0.0;
        for (const auto& [o, v] : items) s += v;
        return s / static_cast<double>(items.size());
    }
};

// dE/d(every learnable scalar) plus the derived-layer boundary derivatives.
// Shapes mirror ParameterStore and LayerOutputs; zeroed at pass start.
struct GradientTape {
    std::vector<double> d_weights;
    std::map<PredicateId, std::vector<double>> d_latents;
    std::map<PredicateId, Dense> d_derived;

    void reset(const LayerGraph& graph, const Schema& schema, const ParameterStore& store);
};

struct TrainConfig {
    double lr = 0.05;
    int epochs = 500;
    int restarts = 5;
    double l1 = 1e-4;
    std::optional<double> lambda_override; // replaces the model's MIX lambda when set
    double weight_init_lo = -0.1, weight_init_hi = 0.1;
    double latent_init_lo = -1.0, latent_init_hi = 1.0;
    uint64_t seed = 0;
    // Scale each weight's step by 1/mean(eta^2), computed once per restart
    // right after initialization. Counting features span orders of magnitude
    // (a bias sees eta = 1, a relation aggregate sees eta in the hundreds);
    // without this a single step size cannot move the biases.
    bool precondition = true;
};

struct TrainingLog {
    struct Entry {
        int restart = 0;
        int epoch = 0;
        double loss = 0.0;
    };
    std::vector<Entry> entries;
    int best_restart = -1;
    double best_loss = 0.0;
    std::vector<double> final_losses; // per restart; NaN for diverged restarts
};

struct TrainResult {
    ParameterStore store;
    TrainingLog log;
};

// Loss over the labeled subset and dE/d(prediction) per object (zero for
// unlabeled objects). LogLoss uses the natural logarithm.
std::pair<double, std::vector<double>> loss_and_dout(const std::vector<double>& pred,
                                                     const Labels& labels, LossKind kind);

// dE/dw per weighted formula of one unit. Frozen weights are reported too;
// exclusion from updates happens in sgd_step.
std::vector<double> weight_grad(const RelationalLinearUnit& unit, const engine::EvalContext& ctx,
                                const std::vector<double>& d_out);

// Accumulates dE/d(input) into the tape for every differentiable input of
// the unit (latent tables and derived predicates).
void input_grad(const RelationalLinearUnit& unit, const engine::EvalContext& ctx,
                const Dense& d_out, GradientTape& tape);

// d_in from d_out through an activation, expressed via the forward output.
std::vector<double> activation_backward(Activation kind, const std::vector<double>& out,
                                        const std::vector<double>& d_out);

// Full reverse pass (REL -> MIX -> RAL/RLL...). Returns the training loss.
double graph_backward(const LayerGraph& graph, const Schema& schema, const Interpretation& interp,
                      const ParameterStore& store, const engine::ForwardTrace& trace,
                      const Labels& labels, GradientTape& tape);

// theta <- theta - lr * (grad + l1 * sign(theta)) for every learnable
// scalar. When weight_scale is given, weight k steps with lr / weight_scale[k]
// instead of lr.
void sgd_step(ParameterStore& store, const GradientTape& tape, const TrainConfig& cfg,
              const std::vector<double>* weight_scale = nullptr);

// mean(eta^2) per weight over its unit's head bindings, floored at 1.
std::vector<double> weight_preconditioner(const LayerGraph& graph, const Schema& schema,
                                          const Interpretation& interp,
                                          const ParameterStore& store);

// Random initialization of all learnable parameters (frozen weights keep
// their declared values).
void init_params(ParameterStore& store, const TrainConfig& cfg, uint64_t seed);

// Replaces the MIX lambda when the config overrides it.
LayerGraph apply_lambda_override(const LayerGraph& graph, const TrainConfig& cfg);

// Full-batch gradient descent with cfg.restarts independent restarts
// (restart r seeds its init with cfg.seed + r); returns the restart with the
// lowest final training loss plus the per-epoch loss log.
TrainResult train(const LayerGraph& graph, const Schema& schema, const Interpretation& interp,
                  const Labels& train_labels, const TrainConfig& cfg,
                  const ParameterStore& store_template);

} // namespace relnn::learn
