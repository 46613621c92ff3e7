#include "relnn/data.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "relnn/rng.hpp"

namespace relnn::data {

namespace {

std::vector<std::string> split_tsv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == '\t') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_value(const std::string& s, const std::string& where) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
        throw DataError(where + ": non-numeric value '" + s + "'");
    return v;
}

int intern_or_fail(Population& pop, const std::string& obj, const std::string& where) {
    int idx = pop.intern_object(obj);
    if (idx < 0)
        throw DataError(where + ": undeclared object '" + obj + "' (population " + pop.name +
                        " already has " + std::to_string(pop.size) + " objects)");
    return idx;
}

} // namespace

LoadedData load(const DatasetManifest& manifest, Schema& schema, PredicateId labels_pred) {
    namespace fs = std::filesystem;
    LoadedData out;

    fs::path popfile = manifest.dir / "populations.tsv";
    std::ifstream pf(popfile);
    if (!pf) throw DataError("cannot open " + popfile.string());
    std::string line;
    int lineno = 0;
    while (std::getline(pf, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_tsv(line);
        if (fields.size() != 2)
            throw DataError(popfile.string() + ":" + std::to_string(lineno) +
                            ": expected 'name<TAB>size'");
        PopulationId pid = schema.find_population(fields[0]);
        if (pid < 0) continue; // dataset may carry populations this model does not use
        int size = static_cast<int>(parse_value(fields[1], popfile.string() + ":" + std::to_string(lineno)));
        Population& pop = schema.pop(pid);
        if (size < static_cast<int>(pop.object_names.size()))
            throw DataError(popfile.string() + ": population " + pop.name +
                            " cannot shrink below its known objects");
        if (size >= pop.size) pop.size = size;
        else
            throw DataError(popfile.string() + ": population " + pop.name + " has declared size " +
                            std::to_string(pop.size) + "; manifest size " + std::to_string(size) +
                            " may only override upward");
    }

    for (PredicateId p = 0; p < static_cast<PredicateId>(schema.predicates.size()); ++p) {
        const PredicateDecl& pd = schema.pred(p);
        if (pd.kind != PredicateKind::ObservedBool && pd.kind != PredicateKind::ObservedReal)
            continue;
        fs::path file = manifest.dir / "facts" / (pd.name + ".tsv");
        std::ifstream f(file);
        if (!f) continue; // absent file: all-zero relation (closed world)

        if (pd.arity() == 1) {
            auto& values = out.interp.unary_values(p, schema.pop(pd.args[0]).size);
            std::vector<bool> seen(values.size(), false);
            lineno = 0;
            while (std::getline(f, line)) {
                ++lineno;
                if (line.empty() || line[0] == '#') continue;
                std::string where = file.string() + ":" + std::to_string(lineno);
                auto fields = split_tsv(line);
                if (fields.size() != 1 && fields.size() != 2)
                    throw DataError(where + ": expected 'obj' or 'obj<TAB>value'");
                int obj = intern_or_fail(schema.pop(pd.args[0]), fields[0], where);
                if (static_cast<size_t>(obj) >= values.size()) {
                    values.resize(schema.pop(pd.args[0]).size, 0.0);
                    seen.resize(values.size(), false);
                }
                double v = fields.size() == 2 ? parse_value(fields[1], where) : 1.0;
                if (pd.kind == PredicateKind::ObservedBool && v != 0.0 && v != 1.0)
                    throw DataError(where + ": boolean predicate " + pd.name +
                                    " requires values in {0,1}, got " + fields[1]);
                if (seen[obj]) throw DataError(where + ": duplicate fact for object '" + fields[0] + "'");
                seen[obj] = true;
                values[obj] = v;
            }
        } else {
            SparseRelation rel;
            rel.rows = schema.pop(pd.args[0]).size;
            rel.cols = schema.pop(pd.args[1]).size;
            lineno = 0;
            while (std::getline(f, line)) {
                ++lineno;
                if (line.empty() || line[0] == '#') continue;
                std::string where = file.string() + ":" + std::to_string(lineno);
                auto fields = split_tsv(line);
                if (fields.size() != 2 && fields.size() != 3)
                    throw DataError(where + ": expected 'obj1<TAB>obj2' or 'obj1<TAB>obj2<TAB>value'");
                int r = intern_or_fail(schema.pop(pd.args[0]), fields[0], where);
                int c = intern_or_fail(schema.pop(pd.args[1]), fields[1], where);
                double v = fields.size() == 3 ? parse_value(fields[2], where) : 1.0;
                if (pd.kind == PredicateKind::ObservedBool && v != 0.0 && v != 1.0)
                    throw DataError(where + ": boolean predicate " + pd.name +
                                    " requires values in {0,1}, got " + fields[2]);
                rel.add(r, c, v);
            }
            try {
                rel.build_indexes();
            } catch (const std::invalid_argument& e) {
                throw DataError(file.string() + ": " + e.what());
            }
            out.interp.binary.emplace(p, std::move(rel));
        }
    }

    // Every declared observed unary predicate gets a vector so lookups are
    // uniform even when its fact file is absent.
    for (PredicateId p = 0; p < static_cast<PredicateId>(schema.predicates.size()); ++p) {
        const PredicateDecl& pd = schema.pred(p);
        if ((pd.kind == PredicateKind::ObservedBool || pd.kind == PredicateKind::ObservedReal) &&
            pd.arity() == 1) {
            auto& v = out.interp.unary_values(p, schema.pop(pd.args[0]).size);
            if (static_cast<int>(v.size()) < schema.pop(pd.args[0]).size)
                v.resize(schema.pop(pd.args[0]).size, 0.0);
        }
    }

    fs::path labfile = manifest.dir / manifest.labels_file;
    std::ifstream lf(labfile);
    if (!lf) throw DataError("cannot open " + labfile.string());
    const PredicateDecl& lp = schema.pred(labels_pred);
    Population& lpop = schema.pop(lp.args[0]);
    std::set<int> seen_labels;
    lineno = 0;
    while (std::getline(lf, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::string where = labfile.string() + ":" + std::to_string(lineno);
        auto fields = split_tsv(line);
        if (fields.size() != 2) throw DataError(where + ": expected 'obj<TAB>value'");
        int obj = intern_or_fail(lpop, fields[0], where);
        double v = parse_value(fields[1], where);
        if (lp.kind == PredicateKind::ObservedBool && v != 0.0 && v != 1.0)
            throw DataError(where + ": label predicate " + lp.name + " requires values in {0,1}");
        if (!seen_labels.insert(obj).second)
            throw DataError(where + ": duplicate label for object '" + fields[0] + "'");
        out.labels.items.push_back({obj, v});
    }

    return out;
}

void save_manifest(const std::filesystem::path& dir, const Schema& schema,
                   const Interpretation& interp, const learn::Labels& labels,
                   PredicateId labels_pred) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "facts");

    std::ofstream pf(dir / "populations.tsv");
    for (const Population& pop : schema.populations)
        pf << pop.name << "\t" << pop.size << "\n";

    for (const auto& [p, values] : interp.unary) {
        const PredicateDecl& pd = schema.pred(p);
        std::ofstream f(dir / "facts" / (pd.name + ".tsv"));
        const Population& pop = schema.pop(pd.args[0]);
        for (size_t o = 0; o < values.size(); ++o)
            if (values[o] != 0.0)
                f << pop.name_of(static_cast<int>(o)) << "\t" << values[o] << "\n";
    }
    for (const auto& [p, rel] : interp.binary) {
        const PredicateDecl& pd = schema.pred(p);
        std::ofstream f(dir / "facts" / (pd.name + ".tsv"));
        const Population& rp = schema.pop(pd.args[0]);
        const Population& cp = schema.pop(pd.args[1]);
        for (const auto& cell : rel.cells) // cells are (row, col)-sorted
            f << rp.name_of(cell.row) << "\t" << cp.name_of(cell.col) << "\t" << cell.value << "\n";
    }

    std::ofstream lf(dir / "labels.tsv");
    const Population& lpop = schema.pop(schema.pred(labels_pred).args[0]);
    std::vector<std::pair<int, double>> sorted = labels.items;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& [o, v] : sorted) lf << lpop.name_of(o) << "\t" << v << "\n";
}

LabeledSplit split(const learn::Labels& labels, const Population& pop, double fraction,
                   uint64_t seed) {
    if (labels.items.size() < 2) throw DataError("need at least 2 labeled objects to split");
    std::vector<std::pair<int, double>> items = labels.items;
    std::sort(items.begin(), items.end(), [&](const auto& a, const auto& b) {
        return pop.name_of(a.first) < pop.name_of(b.first);
    });
    Rng rng(Rng::substream(seed, "split"));
    for (size_t i = items.size() - 1; i > 0; --i)
        std::swap(items[i], items[rng.uniform_int(i + 1)]);

    size_t n_train = static_cast<size_t>(fraction * static_cast<double>(items.size()));
    if (n_train >= items.size()) throw DataError("empty test set (fraction too large)");
    if (n_train == 0) throw DataError("empty train set (fraction too small)");

    LabeledSplit out;
    out.train.items.assign(items.begin(), items.begin() + n_train);
    out.test.items.assign(items.begin() + n_train, items.end());
    return out;
}

void truncate_relations(Interpretation& interp, PredicateId pred, const TruncationMode& mode,
                        const std::optional<std::set<int>>& rows) {
    auto it = interp.binary.find(pred);
    if (it == interp.binary.end()) return;
    SparseRelation& rel = it->second;

    // Per-row keep budget.
    std::vector<int> budget(rel.rows, -1); // -1: keep all
    if (const auto* fk = std::get_if<FirstK>(&mode)) {
        for (int r = 0; r < rel.rows; ++r)
            if (!rows || rows->count(r)) budget[r] = fk->k;
    } else {
        const auto& rr = std::get<RandomR>(mode);
        Rng rng(Rng::substream(rr.seed, "truncate"));
        for (int r = 0; r < rel.rows; ++r) {
            if (rows && !rows->count(r)) continue;
            budget[r] = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(rr.rmax) + 1));
        }
    }

    // Rank cells within each row by insertion order and keep the first k.
    std::vector<std::vector<int>> by_row(rel.rows);
    for (size_t i = 0; i < rel.cells.size(); ++i) by_row[rel.cells[i].row].push_back(static_cast<int>(i));
    std::vector<bool> keep(rel.cells.size(), true);
    for (int r = 0; r < rel.rows; ++r) {
        if (budget[r] < 0) continue;
        auto& idx = by_row[r];
        std::sort(idx.begin(), idx.end(),
                  [&](int a, int b) { return rel.cells[a].ord < rel.cells[b].ord; });
        for (size_t j = static_cast<size_t>(budget[r]); j < idx.size(); ++j) keep[idx[j]] = false;
    }

    SparseRelation next;
    next.rows = rel.rows;
    next.cols = rel.cols;
    for (size_t i = 0; i < rel.cells.size(); ++i)
        if (keep[i]) next.cells.push_back(rel.cells[i]); // ord preserved
    next.build_indexes();
    rel = std::move(next);
}

std::vector<int> add_saturating_objects(Schema& schema, Interpretation& interp,
                                        learn::Labels& labels, PredicateId relation,
                                        ParameterStore* store) {
    const PredicateDecl& rd = schema.pred(relation);
    if (rd.arity() != 2) throw DataError("saturating objects require a binary relation");
    PopulationId row_pop_id = rd.args[0];
    Population& row_pop = schema.pop(row_pop_id);

    std::vector<double> classes;
    for (const auto& [o, v] : labels.items)
        if (std::find(classes.begin(), classes.end(), v) == classes.end()) classes.push_back(v);
    std::sort(classes.begin(), classes.end());

    std::vector<int> created;
    for (double cls : classes) {
        std::ostringstream name;
        name << "__sat_" << cls;
        if (row_pop.find_object(name.str()) >= 0)
            throw DataError("saturating object name collides with a real object: " + name.str());
        row_pop.size += 1;
        int obj = row_pop.intern_object(name.str());
        created.push_back(obj);
        labels.items.push_back({obj, cls});
    }

    // Resize every structure shaped by the grown population.
    for (auto& [p, values] : interp.unary)
        if (schema.pred(p).args[0] == row_pop_id) values.resize(row_pop.size, 0.0);
    for (auto& [p, rel] : interp.binary) {
        const PredicateDecl& pd = schema.pred(p);
        if (pd.args[0] == row_pop_id) rel.rows = row_pop.size;
        if (pd.args[1] == row_pop_id) rel.cols = row_pop.size;
        if (pd.args[0] == row_pop_id || pd.args[1] == row_pop_id) rel.build_indexes();
    }
    if (store)
        for (auto& [p, table] : store->latents)
            if (schema.pred(p).args[0] == row_pop_id) table.resize(row_pop.size, 0.0);

    SparseRelation& rel = interp.binary[relation];
    if (rel.rows == 0) {
        rel.rows = row_pop.size;
        rel.cols = schema.pop(rd.args[1]).size;
    }
    int next_ord = 0;
    for (const auto& c : rel.cells) next_ord = std::max(next_ord, c.ord + 1);
    for (int obj : created)
        for (int col = 0; col < rel.cols; ++col) {
            rel.cells.push_back(SparseRelation::Cell{obj, col, 1.0, next_ord++});
        }
    rel.build_indexes();
    return created;
}

namespace {

std::vector<std::string> split_on(const std::string& line, const std::string& sep) {
    std::vector<std::string> fields;
    size_t pos = 0;
    while (true) {
        size_t next = line.find(sep, pos);
        if (next == std::string::npos) {
            fields.push_back(line.substr(pos));
            break;
        }
        fields.push_back(line.substr(pos, next - pos));
        pos = next + sep.size();
    }
    if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r')
        fields.back().pop_back();
    return fields;
}

// MovieLens-1M age categories mapped to interval midpoints.
double age_midpoint(int code, const std::string& where) {
    switch (code) {
        case 1: return 16.0;   // Under 18
        case 18: return 21.0;  // 18-24
        case 25: return 29.5;  // 25-34
        case 35: return 39.5;  // 35-44
        case 45: return 47.0;  // 45-49
        case 50: return 52.5;  // 50-55
        case 56: return 60.0;  // 56+
        default: throw DataError(where + ": unknown age category " + std::to_string(code));
    }
}

} // namespace

void movielens_convert(const std::filesystem::path& src_dir, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;

    struct UserRow {
        std::string id;
        int gender = 0;
        double age = 0.0;
        int occupation = 0;
    };
    std::vector<UserRow> users;
    {
        fs::path file = src_dir / "users.dat";
        std::ifstream f(file);
        if (!f) throw DataError("cannot open " + file.string());
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::string where = file.string() + ":" + std::to_string(lineno);
            auto fields = split_on(line, "::");
            if (fields.size() < 4) throw DataError(where + ": expected UserID::Gender::Age::Occupation");
            UserRow u;
            u.id = fields[0];
            if (fields[1] == "M") u.gender = 1;
            else if (fields[1] == "F") u.gender = 0;
            else throw DataError(where + ": unknown gender '" + fields[1] + "'");
            u.age = age_midpoint(std::atoi(fields[2].c_str()), where);
            u.occupation = std::atoi(fields[3].c_str());
            if (u.occupation < 0 || u.occupation > 20)
                throw DataError(where + ": occupation code out of range");
            users.push_back(std::move(u));
        }
    }

    struct MovieRow {
        std::string id;
        bool action = false;
        bool drama = false;
    };
    std::vector<MovieRow> movies;
    {
        fs::path file = src_dir / "movies.dat";
        std::ifstream f(file);
        if (!f) throw DataError("cannot open " + file.string());
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::string where = file.string() + ":" + std::to_string(lineno);
            auto fields = split_on(line, "::");
            if (fields.size() < 3) throw DataError(where + ": expected MovieID::Title::Genres");
            MovieRow m;
            m.id = fields[0];
            for (const std::string& g : split_on(fields[2], "|")) {
                if (g == "Action") m.action = true;
                if (g == "Drama") m.drama = true;
            }
            movies.push_back(std::move(m));
        }
    }

    struct Rating {
        long user = 0;
        long movie = 0;
        long ts = 0;
    };
    std::vector<Rating> ratings;
    {
        fs::path file = src_dir / "ratings.dat";
        std::ifstream f(file);
        if (!f) throw DataError("cannot open " + file.string());
        std::string line;
        int lineno = 0;
        while (std::getline(f, line)) {
            ++lineno;
            if (line.empty()) continue;
            std::string where = file.string() + ":" + std::to_string(lineno);
            auto fields = split_on(line, "::");
            if (fields.size() < 4)
                throw DataError(where + ": expected UserID::MovieID::Rating::Timestamp");
            // the rating value itself is deliberately ignored
            ratings.push_back(Rating{std::atol(fields[0].c_str()), std::atol(fields[1].c_str()),
                                     std::atol(fields[3].c_str())});
        }
    }
    std::sort(ratings.begin(), ratings.end(), [](const Rating& a, const Rating& b) {
        if (a.user != b.user) return a.user < b.user;
        if (a.ts != b.ts) return a.ts < b.ts;
        return a.movie < b.movie;
    });

    fs::create_directories(out_dir / "facts");
    {
        std::ofstream pf(out_dir / "populations.tsv");
        pf << "user\t" << users.size() << "\n";
        pf << "movie\t" << movies.size() << "\n";
    }
    {
        std::ofstream f(out_dir / "facts" / "Likes.tsv");
        for (const Rating& r : ratings) f << r.user << "\t" << r.movie << "\n";
    }
    {
        std::ofstream fa(out_dir / "facts" / "Action.tsv");
        std::ofstream fd(out_dir / "facts" / "Drama.tsv");
        for (const MovieRow& m : movies) {
            if (m.action) fa << m.id << "\n";
            if (m.drama) fd << m.id << "\n";
        }
    }
    {
        std::ofstream fg(out_dir / "facts" / "Gender.tsv");
        std::ofstream fage(out_dir / "facts" / "AgeMid.tsv");
        std::vector<std::ofstream> focc;
        for (int k = 0; k <= 20; ++k)
            focc.emplace_back(out_dir / "facts" / ("Occ" + std::to_string(k) + ".tsv"));
        std::ofstream lg(out_dir / "labels.tsv");
        std::ofstream la(out_dir / "labels_age.tsv");
        for (const UserRow& u : users) {
            fg << u.id << "\t" << u.gender << "\n";
            fage << u.id << "\t" << u.age << "\n";
            focc[u.occupation] << u.id << "\n";
            lg << u.id << "\t" << u.gender << "\n";
            la << u.id << "\t" << u.age << "\n";
        }
    }
}

} // namespace relnn::data
