#pragma once

#include <string>
#include <vector>

#include "relnn/graph.hpp"
#include "relnn/schema.hpp"

namespace relnn {

struct Violation {
    std::string code;    // stable identifier, e.g. "self-join"
    std::string message; // human-readable detail
    std::string where;   // node/unit/formula location
};

struct ValidationReport {
    std::vector<Violation> items;

    bool ok() const { return items.empty(); }
    std::string to_string() const;
};

// Structural validation. A graph that passes is evaluable by the engine
// (tree-join fast path included) and differentiable by learn.
ValidationReport validate(const LayerGraph& graph, const Schema& schema);

} // namespace relnn
