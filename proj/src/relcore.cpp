#include "relnn/validate.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "relnn/formula.hpp"

namespace relnn {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Identity: return "identity";
    }
    return "?";
}

std::string to_string(LossKind l) {
    return l == LossKind::LogLoss ? "logloss" : "mse";
}

std::string to_string(const Literal& lit, const ConjunctiveFormula& f, const Schema& schema) {
    std::string s = lit.negated ? "~" : "";
    s += (lit.predicate >= 0 && lit.predicate < static_cast<int>(schema.predicates.size()))
             ? schema.pred(lit.predicate).name
             : "<pred#" + std::to_string(lit.predicate) + ">";
    s += "(";
    for (size_t i = 0; i < lit.args.size(); ++i) {
        if (i) s += ",";
        int a = lit.args[i];
        s += (a >= 0 && a < static_cast<int>(f.logvar_names.size()) && !f.logvar_names[a].empty())
                 ? f.logvar_names[a]
                 : "v" + std::to_string(a);
    }
    s += ")";
    return s;
}

std::string to_string(const ConjunctiveFormula& f, const Schema& schema) {
    if (f.is_true) return "True";
    std::string s;
    for (size_t i = 0; i < f.literals.size(); ++i) {
        if (i) s += " & ";
        s += to_string(f.literals[i], f, schema);
    }
    return s;
}

std::string ValidationReport::to_string() const {
    std::ostringstream os;
    for (const auto& v : items)
        os << v.code << " at " << v.where << ": " << v.message << "\n";
    return os.str();
}

namespace {

void check_formula(const ConjunctiveFormula& f, const Schema& schema,
                   const std::string& where, ValidationReport& rep) {
    auto bad = [&](const std::string& code, const std::string& msg) {
        rep.items.push_back(Violation{code, msg, where});
    };

    if (f.is_true) return;
    if (f.literals.empty()) {
        bad("empty-formula", "conjunctive formula has no literals");
        return;
    }

    std::set<PredicateId> seen_preds;
    for (const Literal& lit : f.literals) {
        if (lit.predicate < 0 || lit.predicate >= static_cast<int>(schema.predicates.size())) {
            bad("undeclared-predicate", "literal references an undeclared predicate");
            return;
        }
        const PredicateDecl& pd = schema.pred(lit.predicate);
        if (pd.arity() > 2) {
            bad("arity-cap", "predicate " + pd.name + " has arity > 2; only unary and binary predicates are supported");
            return;
        }
        if (static_cast<int>(lit.args.size()) != pd.arity()) {
            bad("arity-mismatch", "literal " + to_string(lit, f, schema) + " does not match arity of " + pd.name);
            return;
        }
        for (size_t i = 0; i < lit.args.size(); ++i) {
            int a = lit.args[i];
            if (a < 0 || a >= f.num_logvars) {
                bad("bad-logvar", "literal argument out of range in " + to_string(lit, f, schema));
                return;
            }
            if (f.logvar_pops[a] != pd.args[i]) {
                bad("population-mismatch", "logvar " + f.logvar_names[a] + " used where population " +
                                               schema.pop(pd.args[i]).name + " is expected");
                return;
            }
        }
        if (!seen_preds.insert(lit.predicate).second)
            bad("self-join", "self-join: " + pd.name);
        if (lit.negated && !pd.range.within_unit())
            bad("negation-unbounded", "negation of unbounded range: " + pd.name);
    }

    // Join graph: logvars are nodes, binary literals are edges. For the
    // tree-join fast path the graph must be acyclic and connected once the
    // head logvars are included.
    std::vector<int> comp(f.num_logvars);
    for (int i = 0; i < f.num_logvars; ++i) comp[i] = i;
    auto find = [&](int x) {
        while (comp[x] != x) x = comp[x] = comp[comp[x]];
        return x;
    };
    bool cyclic = false;
    for (const Literal& lit : f.literals) {
        if (lit.args.size() != 2) continue;
        int a = lit.args[0], b = lit.args[1];
        if (a == b) {
            cyclic = true;
            break;
        }
        int ra = find(a), rb = find(b);
        if (ra == rb) {
            cyclic = true;
            break;
        }
        comp[ra] = rb;
    }
    if (cyclic) {
        bad("cyclic-join-graph", "join graph of " + to_string(f, schema) + " is not a tree");
        return;
    }
    int root = find(0);
    for (int i = 1; i < f.num_logvars; ++i)
        if (find(i) != root) {
            bad("disconnected-formula",
                "join graph of " + to_string(f, schema) + " is disconnected from the head logvars");
            return;
        }
}

} // namespace

ValidationReport validate(const LayerGraph& graph, const Schema& schema) {
    ValidationReport rep;
    auto bad = [&](const std::string& code, const std::string& msg, const std::string& where) {
        rep.items.push_back(Violation{code, msg, where});
    };

    // Schema-level invariants.
    for (const PredicateDecl& pd : schema.predicates) {
        if (pd.arity() > 2)
            bad("arity-cap", "predicate " + pd.name + " has arity > 2", "schema");
        if (pd.kind == PredicateKind::NumericLatent && pd.arity() != 1)
            bad("latent-not-unary", "numeric latent predicate " + pd.name + " must be unary", "schema");
    }

    std::map<PredicateId, int> producers;
    std::set<PredicateId> available; // derived predicates produced by earlier nodes
    int rel_index = -1, mix_index = -1;

    for (size_t n = 0; n < graph.nodes.size(); ++n) {
        const std::string where = "node " + std::to_string(n);
        const LayerNode& node = graph.nodes[n];

        if (const auto* rll = std::get_if<RllNode>(&node)) {
            for (size_t u = 0; u < rll->units.size(); ++u) {
                const RelationalLinearUnit& unit = rll->units[u];
                std::string uwhere = where + ", unit " + std::to_string(u);
                if (unit.head < 0 || unit.head >= static_cast<int>(schema.predicates.size())) {
                    bad("undeclared-predicate", "unit head is not a declared predicate", uwhere);
                    continue;
                }
                const PredicateDecl& head = schema.pred(unit.head);
                uwhere = where + ", unit " + head.name;
                if (head.kind != PredicateKind::Derived)
                    bad("bad-head", "unit head " + head.name + " is not a derived predicate", uwhere);
                if (head.arity() != unit.head_arity)
                    bad("bad-head", "unit head arity does not match declaration of " + head.name, uwhere);
                producers[unit.head]++;
                if (unit.wfs.empty())
                    bad("empty-unit", "unit " + head.name + " has no weighted formulas", uwhere);
                for (size_t k = 0; k < unit.wfs.size(); ++k) {
                    const WeightedFormula& wf = unit.wfs[k];
                    std::string fwhere = uwhere + ", wf " + std::to_string(k);
                    if (wf.weight_id < 0)
                        bad("unresolved-weight", "weighted formula has no parameter handle", fwhere);
                    const ConjunctiveFormula& f = wf.formula;
                    if (f.num_logvars < unit.head_arity ||
                        static_cast<int>(f.logvar_pops.size()) != f.num_logvars) {
                        bad("bad-logvar", "formula logvar table inconsistent with unit head", fwhere);
                        continue;
                    }
                    bool consistent = true;
                    for (int h = 0; h < unit.head_arity; ++h)
                        if (f.logvar_pops[h] != head.args[h]) consistent = false;
                    if (!consistent) {
                        bad("population-mismatch", "head logvar populations do not match " + head.name, fwhere);
                        continue;
                    }
                    check_formula(f, schema, fwhere, rep);
                    // Derived inputs must come from earlier nodes.
                    for (const Literal& lit : f.literals) {
                        if (lit.predicate < 0 ||
                            lit.predicate >= static_cast<int>(schema.predicates.size()))
                            continue;
                        if (schema.pred(lit.predicate).kind == PredicateKind::Derived &&
                            !available.count(lit.predicate))
                            bad("cyclic-layer-graph",
                                "derived predicate " + schema.pred(lit.predicate).name +
                                    " consumed before it is produced",
                                fwhere);
                    }
                }
            }
            for (const auto& unit : rll->units) available.insert(unit.head);
        } else if (const auto* ral = std::get_if<RalNode>(&node)) {
            for (const auto& [in, out] : ral->maps) {
                if (!available.count(in))
                    bad("cyclic-layer-graph",
                        "activation input " + schema.pred(in).name + " is not produced by an earlier node",
                        where);
                producers[out]++;
                available.insert(out);
            }
        } else if (const auto* mix = std::get_if<MixNode>(&node)) {
            if (mix_index >= 0) bad("mix-position", "more than one MIX node", where);
            mix_index = static_cast<int>(n);
            if (mix->lambda < 0.0 || mix->lambda > 1.0)
                bad("bad-lambda", "MIX lambda must lie in [0,1]", where);
            if (!available.count(mix->input))
                bad("cyclic-layer-graph", "MIX input is not produced by an earlier node", where);
            producers[mix->output]++;
            available.insert(mix->output);
        } else if (const auto* rel = std::get_if<RelNode>(&node)) {
            if (rel_index >= 0) bad("rel-position", "more than one REL node", where);
            rel_index = static_cast<int>(n);
            if (!available.count(rel->input))
                bad("cyclic-layer-graph", "REL input is not produced by an earlier node", where);
            if (rel->input >= 0 && rel->input < static_cast<int>(schema.predicates.size())) {
                const PredicateDecl& tp = schema.pred(rel->input);
                if (tp.arity() != 1)
                    bad("bad-target", "target predicate " + tp.name + " must be unary", where);
                if (rel->loss == LossKind::LogLoss && !tp.range.within_unit())
                    bad("bad-target-range",
                        "logloss target " + tp.name + " must have range within [0,1]", where);
            }
        }
    }

    if (rel_index < 0)
        bad("no-target", "graph has no REL (error) node", "graph");
    else if (rel_index != static_cast<int>(graph.nodes.size()) - 1)
        bad("rel-position", "REL must be the final node", "graph");
    if (mix_index >= 0 && rel_index >= 0 && mix_index != rel_index - 1)
        bad("mix-position", "MIX must sit immediately before REL", "graph");

    for (const auto& [pred, count] : producers)
        if (count > 1)
            bad("multiple-producers",
                "derived predicate " + schema.pred(pred).name + " has " + std::to_string(count) +
                    " producers",
                "graph");

    // The supervision signal must not double as an input feature.
    if (const RelNode* rel = graph.rel()) {
        for (size_t n = 0; n < graph.nodes.size(); ++n) {
            const auto* rll = std::get_if<RllNode>(&graph.nodes[n]);
            if (!rll) continue;
            for (const auto& unit : rll->units)
                for (const auto& wf : unit.wfs)
                    for (const Literal& lit : wf.formula.literals)
                        if (lit.predicate == rel->labels)
                            bad("label-leak",
                                "label predicate " + schema.pred(rel->labels).name +
                                    " appears in a formula of unit " + schema.pred(unit.head).name,
                                "node " + std::to_string(n));
        }
    }

    return rep;
}

} // namespace relnn
