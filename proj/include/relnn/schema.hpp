#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace relnn {

using PopulationId = int;
using PredicateId = int;

// A finite set of objects. Objects are dense indices 0..size-1; external
// names are optional and filled in by the data loader (fixtures built in
// code can leave them empty, in which case decimal indices are used).
struct Population {
    std::string name;
    int size = 1;
    std::vector<std::string> object_names;
    std::unordered_map<std::string, int> name_to_index;

    // Registers a named object, assigning the next free index.
    // Returns -1 when the population is already at capacity.
    int intern_object(const std::string& obj) {
        auto it = name_to_index.find(obj);
        if (it != name_to_index.end()) return it->second;
        if (static_cast<int>(object_names.size()) >= size) return -1;
        int idx = static_cast<int>(object_names.size());
        object_names.push_back(obj);
        name_to_index.emplace(obj, idx);
        return idx;
    }

    int find_object(const std::string& obj) const {
        auto it = name_to_index.find(obj);
        return it == name_to_index.end() ? -1 : it->second;
    }

    std::string name_of(int idx) const {
        if (idx >= 0 && idx < static_cast<int>(object_names.size()))
            return object_names[idx];
        return std::to_string(idx);
    }
};

enum class PredicateKind {
    ObservedBool,
    ObservedReal,
    NumericLatent,
    Derived,
};

// Closed interval of possible values; unbounded ends use infinities.
struct ValueRange {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();

    bool within_unit() const { return lo >= 0.0 && hi <= 1.0; }

    static ValueRange unit() { return {0.0, 1.0}; }
    static ValueRange unbounded() { return {}; }
};

struct PredicateDecl {
    std::string name;
    std::vector<PopulationId> args; // 1 or 2 entries
    PredicateKind kind = PredicateKind::ObservedBool;
    ValueRange range = ValueRange::unit();

    int arity() const { return static_cast<int>(args.size()); }
};

struct Schema {
    std::vector<Population> populations;
    std::vector<PredicateDecl> predicates;

    PopulationId add_population(const std::string& name, int size) {
        if (find_population(name) >= 0)
            throw std::invalid_argument("duplicate population: " + name);
        populations.push_back(Population{name, size, {}, {}});
        return static_cast<PopulationId>(populations.size()) - 1;
    }

    PredicateId add_predicate(PredicateDecl decl) {
        if (find_predicate(decl.name) >= 0)
            throw std::invalid_argument("duplicate predicate: " + decl.name);
        if (decl.args.empty() || decl.args.size() > 2)
            throw std::invalid_argument("predicate arity must be 1 or 2: " + decl.name);
        if (decl.kind == PredicateKind::NumericLatent && decl.args.size() != 1)
            throw std::invalid_argument("numeric latent predicates must be unary: " + decl.name);
        predicates.push_back(std::move(decl));
        return static_cast<PredicateId>(predicates.size()) - 1;
    }

    PopulationId find_population(const std::string& name) const {
        for (size_t i = 0; i < populations.size(); ++i)
            if (populations[i].name == name) return static_cast<PopulationId>(i);
        return -1;
    }

    PredicateId find_predicate(const std::string& name) const {
        for (size_t i = 0; i < predicates.size(); ++i)
            if (predicates[i].name == name) return static_cast<PredicateId>(i);
        return -1;
    }

    const Population& pop(PopulationId id) const { return populations.at(id); }
    Population& pop(PopulationId id) { return populations.at(id); }
    const PredicateDecl& pred(PredicateId id) const { return predicates.at(id); }
    PredicateDecl& pred(PredicateId id) { return predicates.at(id); }
};

} // namespace relnn
