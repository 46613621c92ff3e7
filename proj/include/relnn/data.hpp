#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "relnn/graph.hpp"
#include "relnn/interpretation.hpp"
#include "relnn/learn.hpp"
#include "relnn/schema.hpp"

namespace relnn::data {

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A dataset directory: populations.tsv (name<TAB>size), facts/<Pred>.tsv,
// and a labels file (default labels.tsv, obj<TAB>value).
struct DatasetManifest {
    std::filesystem::path dir;
    std::string labels_file = "labels.tsv";
};

struct LoadedData {
    Interpretation interp;
    learn::Labels labels;
};

// Sizes populations from populations.tsv (upward only), loads all declared
// observed predicates from facts/ with the closed-world default, and reads
// the labels file against the given label predicate.
LoadedData load(const DatasetManifest& manifest, Schema& schema, PredicateId labels_pred);

// Canonical save: facts sorted by object index, one file per predicate with
// any loaded values. load(save(x)) reproduces x up to cell ordering.
void save_manifest(const std::filesystem::path& dir, const Schema& schema,
                   const Interpretation& interp, const learn::Labels& labels,
                   PredicateId labels_pred);

struct LabeledSplit {
    learn::Labels train;
    learn::Labels test;
};

// Deterministic shuffle by seed over label entries sorted by object name;
// train gets floor(fraction * n).
LabeledSplit split(const learn::Labels& labels, const Population& pop, double fraction,
                   uint64_t seed);

// Keep only the first k cells of each row object (by insertion order).
struct FirstK {
    int k = 0;
};
// Keep the first r cells per row object, r drawn uniformly from {0..rmax}.
struct RandomR {
    int rmax = 20;
    uint64_t seed = 0;
};
using TruncationMode = std::variant<FirstK, RandomR>;

// Truncates one binary relation; rows outside `rows` (when given) keep all
// their cells. Idempotent for FirstK at the same k.
void truncate_relations(Interpretation& interp, PredicateId pred, const TruncationMode& mode,
                        const std::optional<std::set<int>>& rows = std::nullopt);

// Adds one synthetic object per label class, related to every column object
// of `relation` with value 1. Returns the new object ids; callers keep them
// out of evaluation sets.
std::vector<int> add_saturating_objects(Schema& schema, Interpretation& interp,
                                        learn::Labels& labels, PredicateId relation,
                                        ParameterStore* store = nullptr);

// Converts the MovieLens-1M distribution (users.dat, movies.dat,
// ratings.dat) into a manifest directory. Ratings become Likes=1 facts
// sorted by (user, timestamp, movie); genres reduce to Action/Drama flags;
// gender is 1 for male; ages map to category midpoints with 16 and 60 at
// the ends; occupations become one-hot unary predicates. Gender labels go
// to labels.tsv, age labels to labels_age.tsv.
void movielens_convert(const std::filesystem::path& src_dir, const std::filesystem::path& out_dir);

} // namespace relnn::data
