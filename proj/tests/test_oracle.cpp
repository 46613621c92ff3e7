#include <doctest.h>

#include <cmath>

#include "relnn/oracle.hpp"
#include "support/support.hpp"

using namespace relnn;
using doctest::Approx;

TEST_CASE("naive_eta counts groundings by exhaustive enumeration") {
    auto model = cli::load_model_text(R"(population person 10
predicate Friend(person, person) bool
predicate Kind(person) bool
unit Happy(x: person): 1.0 * Friend(y,x) & Kind(y)
target Happy sigmoid logloss labels Y
)");
    Interpretation interp;
    auto& kind = interp.unary_values(model.schema.find_predicate("Kind"), 10);
    for (int i = 2; i <= 8; ++i) kind[i] = 1.0;
    SparseRelation rel;
    rel.rows = rel.cols = 10;
    for (int y = 2; y <= 4; ++y) rel.add(y, 1, 1.0);
    rel.build_indexes();
    interp.binary.emplace(model.schema.find_predicate("Friend"), std::move(rel));

    const auto& f = std::get<RllNode>(model.graph.nodes[0]).units[0].wfs[0].formula;
    CHECK(oracle::naive_eta(f, 1, {1}, model.schema, interp, model.store, nullptr) == 3.0);

    Interpretation empty; // all-false world: every positive conjunction counts 0
    CHECK(oracle::naive_eta(f, 1, {1}, model.schema, empty, model.store, nullptr) == 0.0);
}

TEST_CASE("naive_eta handles cyclic join graphs the engine rejects") {
    // Triangle R(x,y) & S(y,z) & T(z,x) over 3 objects, hand-computed.
    Schema schema;
    PopulationId pa = schema.add_population("a", 3);
    auto add_rel = [&](const std::string& name) {
        PredicateDecl d;
        d.name = name;
        d.args = {pa, pa};
        d.kind = PredicateKind::ObservedBool;
        return schema.add_predicate(d);
    };
    PredicateId r = add_rel("R"), s = add_rel("S"), t = add_rel("T");

    Interpretation interp;
    auto fill = [&](PredicateId p, std::vector<std::pair<int, int>> cells) {
        SparseRelation rel;
        rel.rows = rel.cols = 3;
        for (auto [i, j] : cells) rel.add(i, j, 1.0);
        rel.build_indexes();
        interp.binary.emplace(p, std::move(rel));
    };
    fill(r, {{0, 1}, {0, 2}});
    fill(s, {{1, 2}, {2, 0}});
    fill(t, {{2, 0}, {0, 0}});

    ConjunctiveFormula f;
    f.num_logvars = 3; // x, y, z
    f.logvar_pops = {pa, pa, pa};
    f.logvar_names = {"x", "y", "z"};
    f.literals = {
        Literal{r, {0, 1}, false},
        Literal{s, {1, 2}, false},
        Literal{t, {2, 0}, false},
    };
    ParameterStore store;
    // x=0: y in {1,2}; (y=1,z=2): S(1,2)=1, T(2,0)=1 -> 1; (y=2,z): S(2,0)=1, T(0,0)=1 -> 1
    CHECK(oracle::naive_eta(f, 1, {0}, schema, interp, store, nullptr) == 2.0);

    // The engine's validator rejects the same formula as cyclic.
    Schema schema2 = schema;
    PredicateDecl head;
    head.name = "U";
    head.args = {pa};
    head.kind = PredicateKind::Derived;
    PredicateId hid = schema2.add_predicate(head);
    PredicateDecl lab;
    lab.name = "Y";
    lab.args = {pa};
    lab.kind = PredicateKind::ObservedBool;
    PredicateId lid = schema2.add_predicate(lab);
    RelationalLinearUnit unit;
    unit.head = hid;
    unit.head_arity = 1;
    unit.wfs.push_back(WeightedFormula{0, f});
    LayerGraph g;
    g.nodes.push_back(RllNode{{unit}});
    g.nodes.push_back(RelNode{LossKind::Mse, hid, lid});
    g.target = hid;
    g.labels = lid;
    CHECK(!validate(g, schema2).ok());
}

TEST_CASE("naive_eta guards against oversized populations") {
    Schema schema;
    PopulationId pa = schema.add_population("a", 100);
    PredicateDecl b;
    b.name = "B";
    b.args = {pa};
    b.kind = PredicateKind::ObservedBool;
    PredicateId bid = schema.add_predicate(b);
    ConjunctiveFormula f;
    f.num_logvars = 2;
    f.logvar_pops = {pa, pa};
    f.logvar_names = {"x", "y"};
    f.literals = {Literal{bid, {1}, false}};
    ParameterStore store;
    Interpretation interp;
    CHECK_THROWS_WITH_AS(
        oracle::naive_eta(f, 1, {0}, schema, interp, store, nullptr),
        doctest::Contains("population too large"), oracle::OracleError);
}

TEST_CASE("numeric_grad recovers the derivative of a quadratic exactly") {
    // Single object, identity head, MSE against label 0: E = w^2 * B^2 with
    // B = 1, so dE/dw = 2w.
    auto model = cli::load_model_text(R"(population a 1
predicate B(a) bool
unit U(x: a): w0 * B(x)
target U identity mse labels Y
)");
    Interpretation interp;
    interp.unary_values(model.schema.find_predicate("B"), 1) = {1.0};
    learn::Labels labels;
    labels.items = {{0, 0.0}};
    model.store.weights[0].value = 0.7;

    oracle::NumericGrad g =
        oracle::numeric_grad(model.graph, model.schema, interp, model.store, labels, 1e-5);
    // central differences are exact for quadratics up to roundoff
    CHECK(g.d_weights[0] == Approx(1.4).epsilon(1e-9));
}

TEST_CASE("finite-difference error shrinks quadratically in h") {
    // Smooth non-quadratic 1-parameter model: sigmoid head, logloss.
    auto model = cli::load_model_text(R"(population a 2
predicate B(a) bool
unit U(x: a): w0 * B(x)
target U sigmoid logloss labels Y
)");
    Interpretation interp;
    interp.unary_values(model.schema.find_predicate("B"), 2) = {1.0, 1.0};
    learn::Labels labels;
    labels.items = {{0, 1.0}, {1, 0.0}};
    model.store.weights[0].value = 0.3;

    // true derivative of mean logloss wrt w at prediction p = sigmoid(w):
    // d/dw = mean((p - y)) since dp/dw = p(1-p) cancels the logloss factor
    double p = 1.0 / (1.0 + std::exp(-0.3));
    double exact = ((p - 1.0) + (p - 0.0)) / 2.0;

    auto err_at = [&](double h) {
        oracle::NumericGrad g =
            oracle::numeric_grad(model.graph, model.schema, interp, model.store, labels, h);
        return std::fabs(g.d_weights[0] - exact);
    };
    double e3 = err_at(1e-1);
    double e4 = err_at(1e-2);
    double e5 = err_at(1e-3);
    // Richardson behavior: each 10x shrink of h cuts the error ~100x.
    CHECK(e4 < e3 / 20.0);
    CHECK(e5 < e4 / 20.0);
}

TEST_CASE("a frozen-only model still reports matching gradients") {
    auto model = cli::load_model_text(R"(population a 4
predicate B(a) bool
unit U(x: a): 0.5 * B(x)
    -0.25 * True
target U sigmoid logloss labels Y
)");
    Interpretation interp;
    interp.unary_values(model.schema.find_predicate("B"), 4) = {1, 0, 1, 0};
    learn::Labels labels;
    labels.items = {{0, 1.0}, {1, 0.0}};

    engine::ForwardTrace trace =
        engine::graph_forward_traced(model.graph, model.schema, interp, model.store);
    learn::GradientTape tape;
    tape.reset(model.graph, model.schema, model.store);
    learn::graph_backward(model.graph, model.schema, interp, model.store, trace, labels, tape);
    oracle::NumericGrad num =
        oracle::numeric_grad(model.graph, model.schema, interp, model.store, labels, 1e-5);
    for (size_t i = 0; i < num.d_weights.size(); ++i)
        CHECK(tape.d_weights[i] == Approx(num.d_weights[i]).epsilon(1e-6));
}

TEST_CASE("naive_forward agrees with the engine across random models") {
    for (uint64_t seed = 800; seed < 820; ++seed) {
        testsupport::Scenario s = testsupport::random_scenario(seed);
        LayerOutputs fast =
            engine::graph_forward(s.model.graph, s.model.schema, s.interp, s.model.store);
        LayerOutputs slow =
            oracle::naive_forward(s.model.graph, s.model.schema, s.interp, s.model.store);
        for (const auto& [pred, dense] : fast.values) {
            const Dense* other = slow.find(pred);
            REQUIRE(other);
            REQUIRE(other->v.size() == dense.v.size());
            for (size_t i = 0; i < dense.v.size(); ++i)
                CHECK(dense.v[i] == Approx(other->v[i]).epsilon(1e-9));
        }
    }
}
