#include "relnn/modelspec.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <map>
#include <set>
#include <sstream>

namespace relnn::modelspec {

namespace {

const char* kDeclKeywords[] = {"population", "predicate", "latent", "unit",
                               "activation", "mix", "target"};

bool is_decl_keyword(const std::string& s) {
    for (const char* k : kDeclKeywords)
        if (s == k) return true;
    return false;
}

enum class Tok { Ident, Number, LParen, RParen, Comma, Colon, Star, Amp, Tilde, Eq, Bang, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    double num = 0.0;
    SrcLoc loc;
};

struct ParseException {
    ParseError err;
};

[[noreturn]] void fail(SrcLoc loc, const std::string& msg, std::vector<std::string> expected = {}) {
    throw ParseException{ParseError{loc, msg, std::move(expected)}};
}

std::vector<Token> lex(const std::string& text) {
    std::vector<Token> out;
    int line = 1, col = 1;
    size_t i = 0;
    auto loc = [&] { return SrcLoc{line, col}; };
    auto advance = [&](size_t n) {
        for (size_t k = 0; k < n; ++k) {
            if (text[i + k] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        i += n;
    };
    while (i < text.size()) {
        char c = text[i];
        if (c == '#') {
            size_t j = i;
            while (j < text.size() && text[j] != '\n') ++j;
            advance(j - i);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        SrcLoc here = loc();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i;
            while (j < text.size() &&
                   (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
                ++j;
            out.push_back(Token{Tok::Ident, text.substr(i, j - i), 0.0, here});
            advance(j - i);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            ((c == '-' || c == '+') && i + 1 < text.size() &&
             (std::isdigit(static_cast<unsigned char>(text[i + 1])) || text[i + 1] == '.')) ||
            (c == '.' && i + 1 < text.size() &&
             std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
            size_t j = i;
            if (text[j] == '-' || text[j] == '+') ++j;
            while (j < text.size() && (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == '.'))
                ++j;
            if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
                size_t k = j + 1;
                if (k < text.size() && (text[k] == '-' || text[k] == '+')) ++k;
                if (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) {
                    ++k;
                    while (k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]))) ++k;
                    j = k;
                }
            }
            std::string s = text.substr(i, j - i);
            char* end = nullptr;
            double v = std::strtod(s.c_str(), &end);
            if (end != s.c_str() + s.size()) fail(here, "malformed number '" + s + "'");
            out.push_back(Token{Tok::Number, s, v, here});
            advance(j - i);
            continue;
        }
        Tok kind;
        switch (c) {
            case '(': kind = Tok::LParen; break;
            case ')': kind = Tok::RParen; break;
            case ',': kind = Tok::Comma; break;
            case ':': kind = Tok::Colon; break;
            case '*': kind = Tok::Star; break;
            case '&': kind = Tok::Amp; break;
            case '~': kind = Tok::Tilde; break;
            case '=': kind = Tok::Eq; break;
            case '!': kind = Tok::Bang; break;
            default: fail(here, std::string("unexpected character '") + c + "'");
        }
        out.push_back(Token{kind, std::string(1, c), 0.0, here});
        advance(1);
    }
    out.push_back(Token{Tok::End, "", 0.0, loc()});
    return out;
}

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    ModelDocument run() {
        ModelDocument doc;
        while (peek().kind != Tok::End) {
            const Token& t = peek();
            if (t.kind != Tok::Ident || !is_decl_keyword(t.text))
                fail(t.loc,
                     "expected 'population', 'predicate', 'latent', 'unit', 'activation', "
                     "'mix', or 'target'",
                     {kDeclKeywords, kDeclKeywords + 7});
            if (t.text == "population") doc.decls.push_back(population());
            else if (t.text == "predicate") doc.decls.push_back(predicate());
            else if (t.text == "latent") doc.decls.push_back(latent());
            else if (t.text == "unit") doc.decls.push_back(unit());
            else if (t.text == "activation") doc.decls.push_back(activation());
            else if (t.text == "mix") doc.decls.push_back(mix());
            else doc.decls.push_back(target());
        }
        if (doc.decls.empty())
            fail(peek().loc,
                 "expected 'population', 'predicate', 'latent', 'unit', 'activation', "
                 "'mix', or 'target'",
                 {kDeclKeywords, kDeclKeywords + 7});
        resolve(doc);
        return doc;
    }

private:
    std::vector<Token> toks_;
    size_t pos_ = 0;

    const Token& peek(size_t ahead = 0) const {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    }
    Token next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
    Token expect(Tok kind, const std::string& what) {
        if (peek().kind != kind)
            fail(peek().loc, "expected " + what + " but found '" + peek().text + "'", {what});
        return next();
    }
    std::string ident(const std::string& what) {
        Token t = expect(Tok::Ident, what);
        if (is_decl_keyword(t.text))
            fail(t.loc, "'" + t.text + "' is a reserved keyword", {what});
        return t.text;
    }
    bool accept(Tok kind) {
        if (peek().kind == kind) {
            ++pos_;
            return true;
        }
        return false;
    }

    static bool is_logvar(const std::string& s) {
        return !s.empty() && (std::islower(static_cast<unsigned char>(s[0])) || s[0] == '_');
    }

    PopulationDecl population() {
        SrcLoc loc = next().loc; // 'population'
        PopulationDecl d;
        d.loc = loc;
        d.name = ident("population name");
        if (peek().kind == Tok::Number) {
            Token t = next();
            if (t.num < 1 || t.num != static_cast<long>(t.num))
                fail(t.loc, "population size must be a positive integer");
            d.size = static_cast<long>(t.num);
        }
        return d;
    }

    PredicateDeclSrc predicate() {
        SrcLoc loc = next().loc;
        PredicateDeclSrc d;
        d.loc = loc;
        d.name = ident("predicate name");
        expect(Tok::LParen, "'('");
        d.arg_pops.push_back(ident("population name"));
        if (accept(Tok::Comma)) d.arg_pops.push_back(ident("population name"));
        expect(Tok::RParen, "')'");
        Token t = expect(Tok::Ident, "'bool' or 'real'");
        if (t.text == "bool") d.is_real = false;
        else if (t.text == "real") d.is_real = true;
        else fail(t.loc, "expected 'bool' or 'real' but found '" + t.text + "'", {"bool", "real"});
        return d;
    }

    LatentDeclSrc latent() {
        SrcLoc loc = next().loc;
        LatentDeclSrc d;
        d.loc = loc;
        d.name = ident("latent predicate name");
        expect(Tok::LParen, "'('");
        d.pop = ident("population name");
        expect(Tok::RParen, "')'");
        return d;
    }

    UnitDecl unit() {
        SrcLoc loc = next().loc;
        UnitDecl d;
        d.loc = loc;
        d.name = ident("unit name");
        expect(Tok::LParen, "'('");
        do {
            BinderSrc b;
            Token lv = expect(Tok::Ident, "logvar");
            if (!is_logvar(lv.text))
                fail(lv.loc, "head logvar '" + lv.text + "' must start with a lowercase letter");
            b.logvar = lv.text;
            expect(Tok::Colon, "':'");
            b.pop = ident("population name");
            d.binders.push_back(std::move(b));
        } while (accept(Tok::Comma));
        expect(Tok::RParen, "')'");
        expect(Tok::Colon, "':'");
        while (starts_wf()) d.wfs.push_back(wf());
        if (d.wfs.empty())
            fail(peek().loc, "expected a weighted formula (weight '*' conjunction)",
                 {"weighted formula"});
        return d;
    }

    bool starts_wf() const {
        const Token& t = peek();
        if (t.kind == Tok::Number) return true;
        if (t.kind != Tok::Ident || is_decl_keyword(t.text)) return false;
        const Token& n1 = peek(1);
        return n1.kind == Tok::Star || n1.kind == Tok::Bang;
    }

    WfSrc wf() {
        WfSrc w;
        w.loc = peek().loc;
        if (peek().kind == Tok::Number) {
            w.weight.value = next().num;
            w.weight.frozen = true;
        } else {
            w.weight.name = ident("weight name");
            if (accept(Tok::Bang)) w.weight.frozen = true;
        }
        expect(Tok::Star, "'*'");
        if (peek().kind == Tok::Ident && peek().text == "True" && peek(1).kind != Tok::LParen) {
            next();
            w.is_true = true;
            return w;
        }
        do {
            w.literals.push_back(literal());
        } while (accept(Tok::Amp));
        return w;
    }

    LiteralSrc literal() {
        LiteralSrc lit;
        lit.loc = peek().loc;
        lit.negated = accept(Tok::Tilde);
        lit.pred = ident("predicate name");
        expect(Tok::LParen, "'('");
        do {
            Token t = expect(Tok::Ident, "logvar");
            if (!is_logvar(t.text))
                fail(t.loc, "constants are not supported in model formulas: '" + t.text + "'");
            lit.args.push_back(t.text);
        } while (accept(Tok::Comma));
        expect(Tok::RParen, "')'");
        return lit;
    }

    ActivationDecl activation() {
        SrcLoc loc = next().loc;
        ActivationDecl d;
        d.loc = loc;
        d.name = ident("activation output name");
        expect(Tok::Eq, "'='");
        Token t = expect(Tok::Ident, "'sigmoid', 'tanh', or 'relu'");
        if (t.text == "sigmoid") d.act = Activation::Sigmoid;
        else if (t.text == "tanh") d.act = Activation::Tanh;
        else if (t.text == "relu") d.act = Activation::Relu;
        else
            fail(t.loc, "expected 'sigmoid', 'tanh', or 'relu' but found '" + t.text + "'",
                 {"sigmoid", "tanh", "relu"});
        expect(Tok::LParen, "'('");
        d.input = ident("derived predicate name");
        expect(Tok::RParen, "')'");
        return d;
    }

    MixDecl mix() {
        SrcLoc loc = next().loc;
        MixDecl d;
        d.loc = loc;
        Token t = expect(Tok::Ident, "'lambda'");
        if (t.text != "lambda")
            fail(t.loc, "expected 'lambda' but found '" + t.text + "'", {"lambda"});
        expect(Tok::Eq, "'='");
        Token v = expect(Tok::Number, "number");
        d.lambda = v.num;
        if (d.lambda < 0.0 || d.lambda > 1.0) fail(v.loc, "mix lambda must lie in [0,1]");
        return d;
    }

    TargetDecl target() {
        SrcLoc loc = next().loc;
        TargetDecl d;
        d.loc = loc;
        d.pred = ident("derived predicate name");
        Token a = expect(Tok::Ident, "'sigmoid' or 'identity'");
        if (a.text == "sigmoid") d.act = Activation::Sigmoid;
        else if (a.text == "identity") d.act = Activation::Identity;
        else
            fail(a.loc, "expected 'sigmoid' or 'identity' but found '" + a.text + "'",
                 {"sigmoid", "identity"});
        Token l = expect(Tok::Ident, "'logloss' or 'mse'");
        if (l.text == "logloss") d.loss = LossKind::LogLoss;
        else if (l.text == "mse") d.loss = LossKind::Mse;
        else
            fail(l.loc, "expected 'logloss' or 'mse' but found '" + l.text + "'",
                 {"logloss", "mse"});
        Token lab = expect(Tok::Ident, "'labels'");
        if (lab.text != "labels")
            fail(lab.loc, "expected 'labels' but found '" + lab.text + "'", {"labels"});
        d.labels = ident("label predicate name");
        return d;
    }

    // Name resolution and duplicate checks over the whole document.
    void resolve(const ModelDocument& doc) {
        std::set<std::string> pops;
        std::set<std::string> preds;   // observed, latent, derived
        std::set<std::string> derived; // unit heads and activation outputs
        bool has_mix = false, has_target = false;

        auto need_pop = [&](const std::string& name, SrcLoc loc) {
            if (!pops.count(name)) fail(loc, "unknown population '" + name + "'");
        };

        for (const Decl& decl : doc.decls) {
            if (const auto* p = std::get_if<PopulationDecl>(&decl)) {
                if (!pops.insert(p->name).second)
                    fail(p->loc, "duplicate declaration of population '" + p->name + "'");
            } else if (const auto* p = std::get_if<PredicateDeclSrc>(&decl)) {
                for (const auto& a : p->arg_pops) need_pop(a, p->loc);
                if (!preds.insert(p->name).second)
                    fail(p->loc, "duplicate declaration of predicate '" + p->name + "'");
            } else if (const auto* p = std::get_if<LatentDeclSrc>(&decl)) {
                need_pop(p->pop, p->loc);
                if (!preds.insert(p->name).second)
                    fail(p->loc, "duplicate declaration of predicate '" + p->name + "'");
            } else if (const auto* p = std::get_if<UnitDecl>(&decl)) {
                std::set<std::string> binder_names;
                for (const auto& b : p->binders) {
                    need_pop(b.pop, p->loc);
                    if (!binder_names.insert(b.logvar).second)
                        fail(p->loc, "repeated head logvar '" + b.logvar + "'");
                }
                if (p->binders.size() > 2)
                    fail(p->loc, "unit heads support at most 2 logvars");
                for (const auto& w : p->wfs)
                    for (const auto& lit : w.literals)
                        if (!preds.count(lit.pred))
                            fail(lit.loc, "unknown identifier '" + lit.pred + "'");
                if (!preds.insert(p->name).second)
                    fail(p->loc, "duplicate declaration of predicate '" + p->name + "'");
                derived.insert(p->name);
            } else if (const auto* p = std::get_if<ActivationDecl>(&decl)) {
                if (!derived.count(p->input))
                    fail(p->loc, "unknown identifier '" + p->input + "' (activation input must be a derived predicate)");
                if (!preds.insert(p->name).second)
                    fail(p->loc, "duplicate declaration of predicate '" + p->name + "'");
                derived.insert(p->name);
            } else if (std::get_if<MixDecl>(&decl)) {
                if (has_mix) fail(std::get<MixDecl>(decl).loc, "duplicate 'mix' declaration");
                has_mix = true;
            } else if (const auto* p = std::get_if<TargetDecl>(&decl)) {
                if (has_target) fail(p->loc, "duplicate 'target' declaration");
                has_target = true;
                if (!derived.count(p->pred))
                    fail(p->loc, "unknown identifier '" + p->pred + "' (target must be a derived predicate)");
            }
        }
    }
};

} // namespace

std::string ParseError::to_string() const {
    std::ostringstream os;
    os << "parse error at line " << loc.line << ", col " << loc.col << ": " << message;
    return os.str();
}

ParseResult parse(const std::string& text) {
    try {
        Parser p(lex(text));
        return ParseResult{p.run(), std::nullopt};
    } catch (const ParseException& e) {
        return ParseResult{std::nullopt, e.err};
    }
}

namespace {

std::string fmt_g17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string weight_str(const WeightSrc& w) {
    if (w.value) return fmt_g17(*w.value);
    return w.name + (w.frozen ? "!" : "");
}

std::string lit_str(const LiteralSrc& lit) {
    std::string s = lit.negated ? "~" : "";
    s += lit.pred + "(";
    for (size_t i = 0; i < lit.args.size(); ++i) {
        if (i) s += ",";
        s += lit.args[i];
    }
    return s + ")";
}

} // namespace

std::string print(const ModelDocument& doc) {
    std::ostringstream os;
    for (const Decl& decl : doc.decls) {
        if (const auto* p = std::get_if<PopulationDecl>(&decl)) {
            os << "population " << p->name;
            if (p->size) os << " " << *p->size;
            os << "\n";
        } else if (const auto* p = std::get_if<PredicateDeclSrc>(&decl)) {
            os << "predicate " << p->name << "(";
            for (size_t i = 0; i < p->arg_pops.size(); ++i) {
                if (i) os << ", ";
                os << p->arg_pops[i];
            }
            os << ") " << (p->is_real ? "real" : "bool") << "\n";
        } else if (const auto* p = std::get_if<LatentDeclSrc>(&decl)) {
            os << "latent " << p->name << "(" << p->pop << ")\n";
        } else if (const auto* p = std::get_if<UnitDecl>(&decl)) {
            os << "unit " << p->name << "(";
            for (size_t i = 0; i < p->binders.size(); ++i) {
                if (i) os << ", ";
                os << p->binders[i].logvar << ": " << p->binders[i].pop;
            }
            os << "):";
            for (const WfSrc& w : p->wfs) {
                os << "\n    " << weight_str(w.weight) << " * ";
                if (w.is_true) os << "True";
                else
                    for (size_t i = 0; i < w.literals.size(); ++i) {
                        if (i) os << " & ";
                        os << lit_str(w.literals[i]);
                    }
            }
            os << "\n";
        } else if (const auto* p = std::get_if<ActivationDecl>(&decl)) {
            os << "activation " << p->name << " = " << relnn::to_string(p->act) << "(" << p->input
               << ")\n";
        } else if (const auto* p = std::get_if<MixDecl>(&decl)) {
            os << "mix lambda = " << fmt_g17(p->lambda) << "\n";
        } else if (const auto* p = std::get_if<TargetDecl>(&decl)) {
            os << "target " << p->pred << " "
               << (p->act == Activation::Sigmoid ? "sigmoid" : "identity") << " "
               << relnn::to_string(p->loss) << " labels " << p->labels << "\n";
        }
    }
    return os.str();
}

namespace {

ValueRange activation_range(Activation a, ValueRange in) {
    switch (a) {
        case Activation::Sigmoid: return ValueRange::unit();
        case Activation::Tanh: return ValueRange{-1.0, 1.0};
        case Activation::Relu: return ValueRange{0.0, std::numeric_limits<double>::infinity()};
        case Activation::Identity: return in;
    }
    return ValueRange::unbounded();
}

} // namespace

LowerResult lower(const ModelDocument& doc) {
    LowerResult out;
    Schema& schema = out.schema;
    ParameterStore& store = out.store;

    std::map<std::string, int> weight_by_name;
    int const_counter = 0;

    // Level (layer depth) of each derived predicate, for grouping.
    std::map<PredicateId, int> level;
    std::map<int, std::vector<RelationalLinearUnit>> rll_by_level;
    std::map<int, std::vector<std::pair<Activation, std::pair<PredicateId, PredicateId>>>>
        ral_by_level;
    std::vector<int> level_order; // levels in first-appearance order
    const MixDecl* mix_decl = nullptr;
    const TargetDecl* target_decl = nullptr;

    auto touch_level = [&](int l) {
        if (std::find(level_order.begin(), level_order.end(), l) == level_order.end())
            level_order.push_back(l);
    };

    for (const Decl& decl : doc.decls) {
        if (const auto* p = std::get_if<PopulationDecl>(&decl)) {
            schema.add_population(p->name, p->size ? static_cast<int>(*p->size) : 1);
        } else if (const auto* p = std::get_if<PredicateDeclSrc>(&decl)) {
            PredicateDecl pd;
            pd.name = p->name;
            for (const auto& a : p->arg_pops) pd.args.push_back(schema.find_population(a));
            pd.kind = p->is_real ? PredicateKind::ObservedReal : PredicateKind::ObservedBool;
            pd.range = p->is_real ? ValueRange::unbounded() : ValueRange::unit();
            schema.add_predicate(std::move(pd));
        } else if (const auto* p = std::get_if<LatentDeclSrc>(&decl)) {
            PredicateDecl pd;
            pd.name = p->name;
            pd.args.push_back(schema.find_population(p->pop));
            pd.kind = PredicateKind::NumericLatent;
            pd.range = ValueRange::unbounded();
            PredicateId id = schema.add_predicate(std::move(pd));
            store.latents.emplace(id, std::vector<double>(schema.pop(schema.pred(id).args[0]).size, 0.0));
        } else if (const auto* p = std::get_if<UnitDecl>(&decl)) {
            PredicateDecl head;
            head.name = p->name;
            for (const auto& b : p->binders) head.args.push_back(schema.find_population(b.pop));
            head.kind = PredicateKind::Derived;
            head.range = ValueRange::unbounded();
            PredicateId head_id = schema.add_predicate(std::move(head));

            RelationalLinearUnit unit;
            unit.head = head_id;
            unit.head_arity = static_cast<int>(p->binders.size());

            int unit_level = 1;
            for (const WfSrc& w : p->wfs) {
                WeightedFormula wf;
                // Weight handle: literal values become anonymous frozen
                // parameters; names are shared (tied) across formulas.
                if (w.weight.value) {
                    wf.weight_id = store.add_weight("_c" + std::to_string(const_counter++),
                                                    *w.weight.value, true);
                } else {
                    auto it = weight_by_name.find(w.weight.name);
                    if (it != weight_by_name.end()) {
                        wf.weight_id = it->second;
                        if (store.weights[wf.weight_id].frozen != w.weight.frozen)
                            throw LowerError(w.loc, "weight '" + w.weight.name +
                                                        "' is declared both frozen and learnable");
                    } else {
                        wf.weight_id = store.add_weight(w.weight.name, 0.0, w.weight.frozen);
                        weight_by_name.emplace(w.weight.name, wf.weight_id);
                    }
                }

                ConjunctiveFormula f;
                std::map<std::string, int> slot_of;
                for (const auto& b : p->binders) {
                    slot_of[b.logvar] = f.num_logvars++;
                    f.logvar_pops.push_back(schema.find_population(b.pop));
                    f.logvar_names.push_back(b.logvar);
                }
                if (w.is_true) {
                    f.is_true = true;
                } else {
                    for (const LiteralSrc& ls : w.literals) {
                        PredicateId pid = schema.find_predicate(ls.pred);
                        const PredicateDecl& pd = schema.pred(pid);
                        if (static_cast<int>(ls.args.size()) != pd.arity())
                            throw LowerError(ls.loc, "predicate " + pd.name + " expects " +
                                                         std::to_string(pd.arity()) +
                                                         " argument(s)");
                        Literal lit;
                        lit.predicate = pid;
                        lit.negated = ls.negated;
                        for (size_t ai = 0; ai < ls.args.size(); ++ai) {
                            PopulationId want = pd.args[ai];
                            auto sit = slot_of.find(ls.args[ai]);
                            if (sit == slot_of.end()) {
                                sit = slot_of.emplace(ls.args[ai], f.num_logvars++).first;
                                f.logvar_pops.push_back(want);
                                f.logvar_names.push_back(ls.args[ai]);
                            } else if (f.logvar_pops[sit->second] != want) {
                                throw LowerError(
                                    ls.loc, "logvar '" + ls.args[ai] + "' is used with population " +
                                                schema.pop(f.logvar_pops[sit->second]).name +
                                                " and with population " + schema.pop(want).name);
                            }
                            lit.args.push_back(sit->second);
                        }
                        if (pd.kind == PredicateKind::Derived)
                            unit_level = std::max(unit_level, level.at(pid) + 1);
                        f.literals.push_back(std::move(lit));
                    }
                }
                wf.formula = std::move(f);
                unit.wfs.push_back(std::move(wf));
            }
            level[head_id] = unit_level;
            touch_level(unit_level);
            rll_by_level[unit_level].push_back(std::move(unit));
        } else if (const auto* p = std::get_if<ActivationDecl>(&decl)) {
            PredicateId in_id = schema.find_predicate(p->input);
            PredicateDecl pd;
            pd.name = p->name;
            pd.args = schema.pred(in_id).args;
            pd.kind = PredicateKind::Derived;
            pd.range = activation_range(p->act, schema.pred(in_id).range);
            PredicateId out_id = schema.add_predicate(std::move(pd));
            int l = level.at(in_id);
            level[out_id] = l;
            touch_level(l);
            ral_by_level[l].push_back({p->act, {in_id, out_id}});
        } else if (const auto* p = std::get_if<MixDecl>(&decl)) {
            mix_decl = p;
        } else if (const auto* p = std::get_if<TargetDecl>(&decl)) {
            target_decl = p;
        }
    }

    if (!target_decl) throw LowerError(SrcLoc{}, "no target layer");

    PredicateId target_in = schema.find_predicate(target_decl->pred);
    if (schema.pred(target_in).arity() != 1)
        throw LowerError(target_decl->loc, "target predicate must be unary");
    PopulationId target_pop = schema.pred(target_in).args[0];

    // Label predicate: auto-declared over the target population when absent.
    PredicateId labels_id = schema.find_predicate(target_decl->labels);
    if (labels_id < 0) {
        PredicateDecl pd;
        pd.name = target_decl->labels;
        pd.args.push_back(target_pop);
        pd.kind = target_decl->loss == LossKind::LogLoss ? PredicateKind::ObservedBool
                                                         : PredicateKind::ObservedReal;
        pd.range = target_decl->loss == LossKind::LogLoss ? ValueRange::unit()
                                                          : ValueRange::unbounded();
        labels_id = schema.add_predicate(std::move(pd));
    } else {
        const PredicateDecl& pd = schema.pred(labels_id);
        if (pd.arity() != 1 || pd.args[0] != target_pop)
            throw LowerError(target_decl->loc, "label predicate " + pd.name +
                                                   " must be unary over the target population");
    }

    // Assemble nodes level by level.
    std::sort(level_order.begin(), level_order.end());
    for (int l : level_order) {
        auto rit = rll_by_level.find(l);
        if (rit != rll_by_level.end())
            out.graph.nodes.push_back(RllNode{std::move(rit->second)});
        auto ait = ral_by_level.find(l);
        if (ait != ral_by_level.end()) {
            // one RAL node per activation kind, declaration order preserved
            std::vector<std::pair<Activation, std::pair<PredicateId, PredicateId>>>& acts =
                ait->second;
            size_t i = 0;
            while (i < acts.size()) {
                RalNode ral;
                ral.act = acts[i].first;
                while (i < acts.size() && acts[i].first == ral.act) {
                    ral.maps.push_back(acts[i].second);
                    ++i;
                }
                out.graph.nodes.push_back(std::move(ral));
            }
        }
    }

    // Output activation from the target declaration, then optional MIX, then REL.
    auto reserve_name = [&](const std::string& name) {
        if (schema.find_predicate(name) >= 0)
            throw LowerError(target_decl->loc, "predicate name '" + name + "' is reserved");
        return name;
    };
    PredicateDecl actp;
    actp.name = reserve_name(target_decl->pred + "__p");
    actp.args = {target_pop};
    actp.kind = PredicateKind::Derived;
    actp.range = activation_range(target_decl->act, schema.pred(target_in).range);
    PredicateId act_out = schema.add_predicate(std::move(actp));
    out.graph.nodes.push_back(RalNode{target_decl->act, {{target_in, act_out}}});

    PredicateId final_pred = act_out;
    if (mix_decl) {
        PredicateDecl mixp;
        mixp.name = reserve_name(target_decl->pred + "__mix");
        mixp.args = {target_pop};
        mixp.kind = PredicateKind::Derived;
        mixp.range = schema.pred(act_out).range;
        PredicateId mix_out = schema.add_predicate(std::move(mixp));
        out.graph.nodes.push_back(MixNode{mix_decl->lambda, act_out, mix_out});
        final_pred = mix_out;
    }

    out.graph.nodes.push_back(RelNode{target_decl->loss, final_pred, labels_id});
    out.graph.target = final_pred;
    out.graph.labels = labels_id;

    out.report = validate(out.graph, schema);
    return out;
}

std::string fmt_float17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17e", x);
    std::string s = buf;
    auto e = s.find('e');
    if (e == std::string::npos) return s; // inf/nan
    std::string mant = s.substr(0, e);
    std::string exp = s.substr(e + 1);
    bool neg = !exp.empty() && exp[0] == '-';
    size_t i = (!exp.empty() && (exp[0] == '+' || exp[0] == '-')) ? 1 : 0;
    while (i + 1 < exp.size() && exp[i] == '0') ++i;
    return mant + "e" + (neg ? "-" : "") + exp.substr(i);
}

std::string serialize_trained(const ParameterStore& store, const Schema& schema) {
    std::ostringstream os;
    for (const WeightParam& w : store.weights)
        os << "weight " << w.name << " = " << fmt_float17(w.value) << "\n";
    for (const auto& [pred, table] : store.latents) {
        if (pred < 0 || pred >= static_cast<int>(schema.predicates.size()))
            throw SerializeError("mismatched store/graph: unknown latent predicate id");
        const PredicateDecl& pd = schema.pred(pred);
        const Population& pop = schema.pop(pd.args[0]);
        if (static_cast<int>(table.size()) != pop.size)
            throw SerializeError("mismatched store/graph: latent table " + pd.name +
                                 " has size " + std::to_string(table.size()) + ", population " +
                                 pop.name + " has size " + std::to_string(pop.size));
        for (size_t o = 0; o < table.size(); ++o)
            os << "latent\t" << pd.name << "\t" << pop.name_of(static_cast<int>(o)) << "\t"
               << fmt_float17(table[o]) << "\n";
    }
    return os.str();
}

void load_trained(const std::string& text, ParameterStore& store, Schema& schema) {
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string trimmed = line;
        auto hash = trimmed.find('#');
        if (hash != std::string::npos) trimmed.resize(hash);
        std::istringstream ls(trimmed);
        std::string kind;
        if (!(ls >> kind)) continue;
        auto bad = [&](const std::string& msg) {
            throw SerializeError("parameter file line " + std::to_string(lineno) + ": " + msg);
        };
        if (kind == "weight") {
            std::string name, eq, value;
            if (!(ls >> name >> eq >> value) || eq != "=") bad("expected 'weight <name> = <value>'");
            int id = store.find_weight(name);
            if (id < 0) bad("unknown weight '" + name + "'");
            char* end = nullptr;
            double v = std::strtod(value.c_str(), &end);
            if (end != value.c_str() + value.size()) bad("malformed value '" + value + "'");
            store.weights[id].value = v;
        } else if (kind == "latent") {
            std::string pred, obj, value;
            if (!(ls >> pred >> obj >> value)) bad("expected 'latent <pred> <object> <value>'");
            PredicateId pid = schema.find_predicate(pred);
            if (pid < 0 || schema.pred(pid).kind != PredicateKind::NumericLatent)
                bad("unknown latent predicate '" + pred + "'");
            Population& pop = schema.pop(schema.pred(pid).args[0]);
            int oid = pop.find_object(obj);
            if (oid < 0) oid = pop.intern_object(obj);
            if (oid < 0) bad("object '" + obj + "' does not fit population " + pop.name);
            auto& table = store.latents[pid];
            if (static_cast<int>(table.size()) < pop.size) table.resize(pop.size, 0.0);
            char* end = nullptr;
            double v = std::strtod(value.c_str(), &end);
            if (end != value.c_str() + value.size()) bad("malformed value '" + value + "'");
            table[oid] = v;
        } else {
            bad("unknown directive '" + kind + "'");
        }
    }
}

} // namespace relnn::modelspec
