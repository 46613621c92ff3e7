#pragma once

#include <string>
#include <vector>

#include "relnn/schema.hpp"

namespace relnn {

// An atom or its negation. Arguments are logvar slots local to the
// enclosing formula; slot k < head arity refers to the k-th head logvar.
struct Literal {
    PredicateId predicate = -1;
    std::vector<int> args;
    bool negated = false;
};

// Conjunction of literals, or the distinguished formula TRUE (eta == 1).
// Slots are allocated in order of first appearance, head logvars first;
// every slot's population is recorded so counting loops never have to
// consult the predicate table.
struct ConjunctiveFormula {
    bool is_true = false;
    std::vector<Literal> literals;
    int num_logvars = 0;
    std::vector<PopulationId> logvar_pops;
    std::vector<std::string> logvar_names;

    static ConjunctiveFormula make_true(int head_arity,
                                        std::vector<PopulationId> head_pops,
                                        std::vector<std::string> head_names) {
        ConjunctiveFormula f;
        f.is_true = true;
        f.num_logvars = head_arity;
        f.logvar_pops = std::move(head_pops);
        f.logvar_names = std::move(head_names);
        return f;
    }
};

// Logvars of f not bound by the head substitution.
inline std::vector<int> free_logvars(const ConjunctiveFormula& f, int head_arity) {
    std::vector<int> out;
    for (int s = head_arity; s < f.num_logvars; ++s) out.push_back(s);
    return out;
}

struct WeightedFormula {
    int weight_id = -1;
    ConjunctiveFormula formula;
};

// One linear unit: a head atom over a derived predicate plus its weighted
// formulas. out[X] = sum_k w_k * eta(phi_k theta_X).
struct RelationalLinearUnit {
    PredicateId head = -1;
    int head_arity = 1;
    std::vector<WeightedFormula> wfs;
};

// Renders a literal/formula for error messages and reports.
std::string to_string(const Literal& lit, const ConjunctiveFormula& f, const Schema& schema);
std::string to_string(const ConjunctiveFormula& f, const Schema& schema);

} // namespace relnn
