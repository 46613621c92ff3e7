#pragma once

#include <algorithm>
#include <map>
#include <stdexcept>
#include <vector>

#include "relnn/schema.hpp"

namespace relnn {

// Sparse cells of a binary predicate with row- and column-major access.
// Absent cells are 0 (closed world). `ord` preserves the order cells were
// added in (file order at load time), which is the order key used by
// relation truncation.
struct SparseRelation {
    struct Cell {
        int row = 0;
        int col = 0;
        double value = 0.0;
        int ord = 0;
    };

    int rows = 0;
    int cols = 0;
    std::vector<Cell> cells;      // sorted by (row, col) after build_indexes
    std::vector<int> row_ptr;     // rows+1 offsets into cells
    std::vector<int> col_order;   // cell indices sorted by (col, row)
    std::vector<int> col_ptr;     // cols+1 offsets into col_order

    void add(int row, int col, double value) {
        cells.push_back(Cell{row, col, value, static_cast<int>(cells.size())});
    }

    // Sorts cells and rebuilds both adjacency indexes. Rejects duplicates.
    void build_indexes() {
        std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        for (size_t i = 1; i < cells.size(); ++i)
            if (cells[i].row == cells[i - 1].row && cells[i].col == cells[i - 1].col)
                throw std::invalid_argument("duplicate fact at row " + std::to_string(cells[i].row) +
                                            ", col " + std::to_string(cells[i].col));
        row_ptr.assign(rows + 1, 0);
        for (const Cell& c : cells) row_ptr[c.row + 1]++;
        for (int r = 0; r < rows; ++r) row_ptr[r + 1] += row_ptr[r];

        col_order.resize(cells.size());
        for (size_t i = 0; i < cells.size(); ++i) col_order[i] = static_cast<int>(i);
        std::sort(col_order.begin(), col_order.end(), [this](int a, int b) {
            return cells[a].col != cells[b].col ? cells[a].col < cells[b].col
                                                : cells[a].row < cells[b].row;
        });
        col_ptr.assign(cols + 1, 0);
        for (const Cell& c : cells) col_ptr[c.col + 1]++;
        for (int c = 0; c < cols; ++c) col_ptr[c + 1] += col_ptr[c];
    }

    double value_at(int row, int col) const {
        auto lo = cells.begin() + row_ptr[row];
        auto hi = cells.begin() + row_ptr[row + 1];
        auto it = std::lower_bound(lo, hi, col,
                                   [](const Cell& c, int v) { return c.col < v; });
        if (it != hi && it->col == col) return it->value;
        return 0.0;
    }

    size_t nnz() const { return cells.size(); }
};

// The function I-hat: dense per-object vectors for unary predicates, sparse
// cell sets for binary ones. Values for predicates with no entry default to
// 0 everywhere (closed world).
struct Interpretation {
    std::map<PredicateId, std::vector<double>> unary;
    std::map<PredicateId, SparseRelation> binary;

    const std::vector<double>* find_unary(PredicateId p) const {
        auto it = unary.find(p);
        return it == unary.end() ? nullptr : &it->second;
    }
    const SparseRelation* find_binary(PredicateId p) const {
        auto it = binary.find(p);
        return it == binary.end() ? nullptr : &it->second;
    }

    std::vector<double>& unary_values(PredicateId p, int size) {
        auto it = unary.find(p);
        if (it == unary.end())
            it = unary.emplace(p, std::vector<double>(size, 0.0)).first;
        return it->second;
    }
};

// Dense per-object values of a derived predicate: a vector over the head
// population (cols == 1) or a row-major matrix for binary heads.
struct Dense {
    int rows = 0;
    int cols = 1;
    std::vector<double> v;

    Dense() = default;
    Dense(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return v.size(); }
};

// O-hat for every derived predicate computed by a forward pass.
struct LayerOutputs {
    std::map<PredicateId, Dense> values;

    const Dense* find(PredicateId p) const {
        auto it = values.find(p);
        return it == values.end() ? nullptr : &it->second;
    }
};

} // namespace relnn
