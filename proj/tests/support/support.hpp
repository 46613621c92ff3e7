#pragma once

// Shared test apparatus: deterministic random model/scenario generation and
// synthetic dataset fixtures. Everything here is seeded; the same seed
// always yields the same scenario.

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "relnn/cli.hpp"
#include "relnn/data.hpp"
#include "relnn/engine.hpp"
#include "relnn/learn.hpp"
#include "relnn/modelspec.hpp"
#include "relnn/rng.hpp"

namespace relnn::testsupport {

struct Scenario {
    std::string model_text;
    cli::ModelBundle model;
    Interpretation interp;
    learn::Labels labels;
};

// Random interpretation and labels for a lowered model: boolean facts with
// density ~0.4, reals in [0,2], labels on ~80% of the target population.
inline void randomize_data(Scenario& s, Rng& rng) {
    Schema& schema = s.model.schema;
    for (PredicateId p = 0; p < static_cast<PredicateId>(schema.predicates.size()); ++p) {
        const PredicateDecl& pd = schema.pred(p);
        if (pd.kind != PredicateKind::ObservedBool && pd.kind != PredicateKind::ObservedReal)
            continue;
        if (p == s.model.graph.labels) continue;
        if (pd.arity() == 1) {
            auto& v = s.interp.unary_values(p, schema.pop(pd.args[0]).size);
            for (double& x : v)
                x = pd.kind == PredicateKind::ObservedBool ? (rng.uniform() < 0.5 ? 1.0 : 0.0)
                                                           : rng.uniform(0.0, 2.0);
        } else {
            SparseRelation rel;
            rel.rows = schema.pop(pd.args[0]).size;
            rel.cols = schema.pop(pd.args[1]).size;
            for (int r = 0; r < rel.rows; ++r)
                for (int c = 0; c < rel.cols; ++c)
                    if (rng.uniform() < 0.4) rel.add(r, c, 1.0);
            rel.build_indexes();
            s.interp.binary.emplace(p, std::move(rel));
        }
    }
    const PredicateDecl& lp = schema.pred(s.model.graph.labels);
    bool binary_labels = lp.kind == PredicateKind::ObservedBool;
    int n = schema.pop(lp.args[0]).size;
    for (int o = 0; o < n; ++o) {
        if (rng.uniform() < 0.2 && static_cast<int>(s.labels.items.size()) + (n - o) > 1) continue;
        double y = binary_labels ? (rng.uniform() < 0.5 ? 1.0 : 0.0) : rng.uniform(0.0, 2.0);
        s.labels.items.push_back({o, y});
    }
    if (s.labels.items.empty()) s.labels.items.push_back({0, binary_labels ? 1.0 : 0.5});
}

// Generates a random valid model document: 2-3 populations (sizes <= 8),
// observed unary/binary predicates, up to 2 numeric latents, 1-3 unit
// levels with mixed activations, optional MIX, logloss or MSE target.
inline Scenario random_scenario(uint64_t seed) {
    Rng rng(seed);
    std::ostringstream os;

    int n_pops = 2 + static_cast<int>(rng.uniform_int(2));
    std::vector<int> pop_size(n_pops);
    for (int i = 0; i < n_pops; ++i) {
        pop_size[i] = 2 + static_cast<int>(rng.uniform_int(7));
        os << "population p" << i << " " << pop_size[i] << "\n";
    }
    auto pop_name = [](int i) { return "p" + std::to_string(i); };

    struct Pred {
        std::string name;
        std::vector<int> pops;
        bool negatable = false; // range within [0,1]
        bool differentiable = false;
    };
    std::vector<Pred> unary, binary;

    int n_bin = 2;
    for (int i = 0; i < n_bin; ++i) {
        int a = static_cast<int>(rng.uniform_int(n_pops));
        int b = static_cast<int>(rng.uniform_int(n_pops));
        os << "predicate R" << i << "(" << pop_name(a) << ", " << pop_name(b) << ") bool\n";
        binary.push_back({"R" + std::to_string(i), {a, b}, true, false});
    }
    for (int i = 0; i < 2; ++i) {
        int a = static_cast<int>(rng.uniform_int(n_pops));
        os << "predicate B" << i << "(" << pop_name(a) << ") bool\n";
        unary.push_back({"B" + std::to_string(i), {a}, true, false});
    }
    {
        int a = static_cast<int>(rng.uniform_int(n_pops));
        os << "predicate C0(" << pop_name(a) << ") real\n";
        unary.push_back({"C0", {a}, false, false});
    }
    int n_latents = static_cast<int>(rng.uniform_int(3));
    for (int i = 0; i < n_latents; ++i) {
        int a = static_cast<int>(rng.uniform_int(n_pops));
        os << "latent L" << i << "(" << pop_name(a) << ")\n";
        unary.push_back({"L" + std::to_string(i), {a}, false, true});
    }

    int n_levels = 1 + static_cast<int>(rng.uniform_int(3));
    int weight_counter = 0;
    int unit_counter = 0;
    std::vector<Pred> prev_unary = unary, prev_binary = binary;

    for (int level = 1; level <= n_levels; ++level) {
        std::vector<Pred> cur_unary = prev_unary, cur_binary = prev_binary;
        bool last = level == n_levels;
        int n_units = last ? 1 : 1 + static_cast<int>(rng.uniform_int(2));
        for (int u = 0; u < n_units; ++u) {
            std::string uname = "U" + std::to_string(unit_counter++);
            bool binary_head = !last && !prev_binary.empty() && rng.uniform() < 0.2;
            int head_pop0, head_pop1 = -1;
            if (binary_head) {
                const Pred& base = prev_binary[rng.uniform_int(prev_binary.size())];
                head_pop0 = base.pops[0];
                head_pop1 = base.pops[1];
                os << "unit " << uname << "(x: " << pop_name(head_pop0) << ", y: "
                   << pop_name(head_pop1) << "):";
            } else {
                binary_head = false;
                head_pop0 = static_cast<int>(rng.uniform_int(n_pops));
                os << "unit " << uname << "(x: " << pop_name(head_pop0) << "):";
            }

            int n_wfs = 1 + static_cast<int>(rng.uniform_int(3));
            for (int k = 0; k < n_wfs; ++k) {
                os << (k == 0 ? " " : "    ");
                if (rng.uniform() < 0.2) {
                    os << rng.uniform(-0.5, 0.5) << " * ";
                } else {
                    os << "w" << weight_counter++ << " * ";
                }

                // Build one conjunctive formula as text.
                struct SlotInfo {
                    std::string var;
                    int pop;
                };
                std::vector<SlotInfo> slots{{"x", head_pop0}};
                if (binary_head) slots.push_back({"y", head_pop1});
                std::set<std::string> used_preds;
                std::vector<std::string> lits;

                if (binary_head) {
                    // Guarantee a path between the two head logvars.
                    std::vector<const Pred*> direct;
                    for (const Pred& r : prev_binary)
                        if ((r.pops[0] == head_pop0 && r.pops[1] == head_pop1) ||
                            (r.pops[0] == head_pop1 && r.pops[1] == head_pop0))
                            direct.push_back(&r);
                    const Pred& r = *direct[rng.uniform_int(direct.size())];
                    if (r.pops[0] == head_pop0 && r.pops[1] == head_pop1)
                        lits.push_back(r.name + "(x,y)");
                    else
                        lits.push_back(r.name + "(y,x)");
                    used_preds.insert(r.name);
                } else {
                    if (rng.uniform() < 0.15) {
                        os << "True\n";
                        continue;
                    }
                    // Grow a short chain of edges from the head logvar.
                    int chain = static_cast<int>(rng.uniform_int(3)); // 0..2 edges
                    int frontier = 0;
                    int mvar = 0;
                    for (int e = 0; e < chain; ++e) {
                        std::vector<std::pair<const Pred*, bool>> options; // (pred, frontier_is_row)
                        for (const Pred& r : prev_binary) {
                            if (used_preds.count(r.name)) continue;
                            if (r.pops[0] == slots[frontier].pop) options.push_back({&r, true});
                            else if (r.pops[1] == slots[frontier].pop) options.push_back({&r, false});
                        }
                        if (options.empty()) break;
                        auto [r, frontier_is_row] = options[rng.uniform_int(options.size())];
                        std::string nv = "m" + std::to_string(mvar++);
                        int new_pop = frontier_is_row ? r->pops[1] : r->pops[0];
                        std::string neg = (r->negatable && rng.uniform() < 0.12) ? "~" : "";
                        if (frontier_is_row)
                            lits.push_back(neg + r->name + "(" + slots[frontier].var + "," + nv + ")");
                        else
                            lits.push_back(neg + r->name + "(" + nv + "," + slots[frontier].var + ")");
                        used_preds.insert(r->name);
                        slots.push_back({nv, new_pop});
                        frontier = static_cast<int>(slots.size()) - 1;
                    }
                }

                // Sprinkle unary literals over the slots.
                for (const SlotInfo& sl : slots) {
                    for (const Pred& up : prev_unary) {
                        if (up.pops[0] != sl.pop || used_preds.count(up.name)) continue;
                        if (rng.uniform() >= 0.35) continue;
                        std::string neg = (up.negatable && rng.uniform() < 0.3) ? "~" : "";
                        lits.push_back(neg + up.name + "(" + sl.var + ")");
                        used_preds.insert(up.name);
                    }
                }

                if (lits.empty()) {
                    os << "True\n";
                    continue;
                }
                for (size_t i = 0; i < lits.size(); ++i) os << (i ? " & " : "") << lits[i];
                os << "\n";
            }

            if (binary_head) {
                cur_binary.push_back({uname, {head_pop0, head_pop1}, false, true});
            } else if (last) {
                // target unit stays raw; the target declaration activates it
            } else {
                cur_unary.push_back({uname, {head_pop0}, false, true});
                const char* acts[] = {"sigmoid", "tanh", "relu"};
                int a = static_cast<int>(rng.uniform_int(3));
                os << "activation A" << uname << " = " << acts[a] << "(" << uname << ")\n";
                cur_unary.push_back({"A" + uname, {head_pop0}, a == 0, true});
            }
        }
        prev_unary = std::move(cur_unary);
        prev_binary = std::move(cur_binary);
    }

    bool logloss = rng.uniform() < 0.6;
    std::string target_unit = "U" + std::to_string(unit_counter - 1);
    if (logloss) {
        os << "mix lambda = 0.1\n";
        os << "target " << target_unit << " sigmoid logloss labels Y\n";
    } else {
        if (rng.uniform() < 0.3) os << "mix lambda = 0.1\n";
        os << "target " << target_unit << " identity mse labels Y\n";
    }

    Scenario s;
    s.model_text = os.str();
    s.model = cli::load_model_text(s.model_text, "random_scenario(" + std::to_string(seed) + ")");
    randomize_data(s, rng);

    learn::TrainConfig cfg;
    learn::init_params(s.model.store, cfg, seed);
    if (s.model.graph.mix()) s.model.store.mix_mean = s.labels.mean();
    return s;
}

// Synthetic dataset following the rule "label 1 iff the object relates to at
// least p `special` columns whose total degree is below q". A model with a
// hidden per-column unit can represent the rule; a flat one cannot.
struct RuleDataset {
    int users = 0, movies = 0;
    std::vector<std::vector<int>> likes; // per user, liked movie ids (ordered)
    std::vector<bool> action;
    std::vector<int> label;
};

inline RuleDataset make_rule_dataset(int users, int movies, int p, int q, uint64_t seed) {
    Rng rng(seed);
    RuleDataset d;
    d.users = users;
    d.movies = movies;
    d.action.resize(movies);
    std::vector<double> popularity(movies);
    for (int m = 0; m < movies; ++m) {
        d.action[m] = rng.uniform() < 0.5;
        popularity[m] = rng.uniform(0.08, 0.6);
    }
    d.likes.resize(users);
    std::vector<int> degree(movies, 0);
    for (int u = 0; u < users; ++u)
        for (int m = 0; m < movies; ++m)
            if (rng.uniform() < popularity[m]) {
                d.likes[u].push_back(m);
                degree[m]++;
            }
    d.label.resize(users);
    for (int u = 0; u < users; ++u) {
        int count = 0;
        for (int m : d.likes[u])
            if (d.action[m] && degree[m] < q) count++;
        d.label[u] = count >= p ? 1 : 0;
    }
    return d;
}

inline void write_rule_manifest(const std::filesystem::path& dir, const RuleDataset& d) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "facts");
    {
        std::ofstream f(dir / "populations.tsv");
        f << "user\t" << d.users << "\n";
        f << "movie\t" << d.movies << "\n";
    }
    {
        std::ofstream f(dir / "facts" / "Likes.tsv");
        for (int u = 0; u < d.users; ++u)
            for (int m : d.likes[u]) f << "u" << u << "\tm" << m << "\n";
    }
    {
        std::ofstream f(dir / "facts" / "Action.tsv");
        for (int m = 0; m < d.movies; ++m)
            if (d.action[m]) f << "m" << m << "\n";
    }
    {
        std::ofstream f(dir / "labels.tsv");
        for (int u = 0; u < d.users; ++u) f << "u" << u << "\t" << d.label[u] << "\n";
    }
}

inline std::string rule_relnn_model() {
    return R"(population user
population movie
predicate Likes(user, movie) bool
predicate Action(movie) bool
unit HL(m: movie): h0 * True
    h1 * Likes(u,m)
activation H = sigmoid(HL)
unit Out(u: user): o0 * True
    o1 * Likes(u,m) & Action(m) & H(m)
    o2 * Likes(u,m) & Action(m)
mix lambda = 0.05
target Out sigmoid logloss labels Gender
)";
}

inline std::string rule_rlr_model() {
    return R"(population user
population movie
predicate Likes(user, movie) bool
predicate Action(movie) bool
unit Out(u: user): o0 * True
    o1 * Likes(u,m) & Action(m)
    o2 * Likes(u,m)
mix lambda = 0.05
target Out sigmoid logloss labels Gender
)";
}

// Unique scratch directory under the build tree's temp space.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    namespace fs = std::filesystem;
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() /
                   ("relnn_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
    fs::create_directories(dir);
    return dir;
}

} // namespace relnn::testsupport
