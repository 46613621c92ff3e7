#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "relnn/graph.hpp"
#include "relnn/schema.hpp"
#include "relnn/validate.hpp"

namespace relnn::modelspec {

struct SrcLoc {
    int line = 1;
    int col = 1;
};

struct ParseError {
    SrcLoc loc;
    std::string message;
    std::vector<std::string> expected;

    std::string to_string() const;
};

struct PopulationDecl {
    std::string name;
    std::optional<long> size;
    SrcLoc loc;
};

struct PredicateDeclSrc {
    std::string name;
    std::vector<std::string> arg_pops;
    bool is_real = false;
    SrcLoc loc;
};

struct LatentDeclSrc {
    std::string name;
    std::string pop;
    SrcLoc loc;
};

struct LiteralSrc {
    bool negated = false;
    std::string pred;
    std::vector<std::string> args;
    SrcLoc loc;
};

// Weight is a literal value (frozen) or a named parameter, optionally
// frozen with "!".
struct WeightSrc {
    std::optional<double> value;
    std::string name;
    bool frozen = false;
};

struct WfSrc {
    WeightSrc weight;
    bool is_true = false;
    std::vector<LiteralSrc> literals;
    SrcLoc loc;
};

struct BinderSrc {
    std::string logvar;
    std::string pop;
};

struct UnitDecl {
    std::string name;
    std::vector<BinderSrc> binders;
    std::vector<WfSrc> wfs;
    SrcLoc loc;
};

struct ActivationDecl {
    std::string name;
    Activation act = Activation::Sigmoid;
    std::string input;
    SrcLoc loc;
};

struct MixDecl {
    double lambda = 0.0;
    SrcLoc loc;
};

struct TargetDecl {
    std::string pred;
    Activation act = Activation::Sigmoid; // sigmoid or identity
    LossKind loss = LossKind::LogLoss;
    std::string labels;
    SrcLoc loc;
};

using Decl = std::variant<PopulationDecl, PredicateDeclSrc, LatentDeclSrc, UnitDecl,
                          ActivationDecl, MixDecl, TargetDecl>;

struct ModelDocument {
    std::vector<Decl> decls;
};

struct ParseResult {
    std::optional<ModelDocument> doc;
    std::optional<ParseError> error;

    bool ok() const { return doc.has_value(); }
};

// Parses a model document: syntax, name resolution, duplicate checks.
ParseResult parse(const std::string& text);

// Canonical rendering; parse(print(doc)) is a fixed point.
std::string print(const ModelDocument& doc);

class LowerError : public std::runtime_error {
public:
    LowerError(SrcLoc loc, const std::string& msg)
        : std::runtime_error(msg + " (line " + std::to_string(loc.line) + ", col " +
                             std::to_string(loc.col) + ")"),
          loc(loc) {}
    SrcLoc loc;
};

struct LowerResult {
    Schema schema;
    LayerGraph graph;
    ParameterStore store; // template: literal weights set, learnables at 0
    ValidationReport report;
};

// Deterministic mapping from a parsed document to the in-memory model.
// Structural violations are returned in `report` (same ones relcore.validate
// finds); impossibilities that prevent construction throw LowerError.
LowerResult lower(const ModelDocument& doc);

// 17-significant-digit scientific rendering, e.g. 0.5 -> 5.00000000000000000e-1.
std::string fmt_float17(double x);

// Trained-parameter file: `weight <name> = <float17>` lines followed by
// `latent <pred> <object> <float17>` lines (tab-separated), LF endings.
std::string serialize_trained(const ParameterStore& store, const Schema& schema);

// Inverse of serialize_trained; object names are interned into the schema's
// populations when capacity allows.
void load_trained(const std::string& text, ParameterStore& store, Schema& schema);

class SerializeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace relnn::modelspec
