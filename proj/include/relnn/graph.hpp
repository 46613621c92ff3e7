#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "relnn/formula.hpp"
#include "relnn/schema.hpp"

namespace relnn {

enum class Activation { Sigmoid, Tanh, Relu, Identity };
enum class LossKind { LogLoss, Mse };

std::string to_string(Activation a);
std::string to_string(LossKind l);

// Linear layer: units evaluated against the current interpretation.
struct RllNode {
    std::vector<RelationalLinearUnit> units;
};

// Activation layer: elementwise map from one derived predicate to another.
struct RalNode {
    Activation act = Activation::Sigmoid;
    std::vector<std::pair<PredicateId, PredicateId>> maps; // input -> output
};

// Output regularization toward the training-label mean:
// out = lambda * mean + (1 - lambda) * in. The mean itself is data, not a
// parameter; it lives in ParameterStore::mix_mean and is set from the
// training split.
struct MixNode {
    double lambda = 0.0;
    PredicateId input = -1;
    PredicateId output = -1;
};

// Error layer; always the sink. `input` is the model's final prediction.
struct RelNode {
    LossKind loss = LossKind::LogLoss;
    PredicateId input = -1;
    PredicateId labels = -1;
};

using LayerNode = std::variant<RllNode, RalNode, MixNode, RelNode>;

struct LayerGraph {
    std::vector<LayerNode> nodes; // topological order, REL last
    PredicateId target = -1;      // final prediction predicate (== REL input)
    PredicateId labels = -1;

    const RelNode* rel() const {
        for (auto it = nodes.rbegin(); it != nodes.rend(); ++it)
            if (auto* r = std::get_if<RelNode>(&*it)) return r;
        return nullptr;
    }
    const MixNode* mix() const {
        for (const auto& n : nodes)
            if (auto* m = std::get_if<MixNode>(&n)) return m;
        return nullptr;
    }
};

struct WeightParam {
    std::string name;
    double value = 0.0;
    bool frozen = false;
};

// Every learnable scalar of a model: formula weights plus per-object latent
// value tables. Gradient accumulators live in learn::GradientTape with
// matching shapes.
struct ParameterStore {
    std::vector<WeightParam> weights;
    std::map<PredicateId, std::vector<double>> latents;
    std::optional<double> mix_mean; // set from train labels when a MIX is present
    uint64_t seed = 0;

    int find_weight(const std::string& name) const {
        for (size_t i = 0; i < weights.size(); ++i)
            if (weights[i].name == name) return static_cast<int>(i);
        return -1;
    }

    int add_weight(const std::string& name, double value, bool frozen) {
        weights.push_back(WeightParam{name, value, frozen});
        return static_cast<int>(weights.size()) - 1;
    }
};

} // namespace relnn
