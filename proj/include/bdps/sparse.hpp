#pragma once

// Minimal CSR matrix: assembled once from triplets, then immutable.

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace bdps {

struct Triplet {
    int row, col;
    double value;
};

struct CsrMatrix {
    int n = 0;  // square
    std::vector<int> row_ptr;
    std::vector<int> col;
    std::vector<double> val;

    static CsrMatrix from_triplets(int n, std::vector<Triplet> trips) {
        // Stable assembly: sort by (row, col), merge duplicates by addition.
        std::sort(trips.begin(), trips.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        CsrMatrix m;
        m.n = n;
        m.row_ptr.assign(n + 1, 0);
        for (std::size_t i = 0; i < trips.size();) {
            std::size_t j = i + 1;
            double s = trips[i].value;
            while (j < trips.size() && trips[j].row == trips[i].row && trips[j].col == trips[i].col)
                s += trips[j++].value;
            m.col.push_back(trips[i].col);
            m.val.push_back(s);
            m.row_ptr[trips[i].row + 1]++;
            i = j;
        }
        for (int r = 0; r < n; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
        return m;
    }

    void apply(const double* x, double* y) const {
        for (int r = 0; r < n; ++r) {
            double s = 0.0;
            for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += val[k] * x[col[k]];
            y[r] = s;
        }
    }

    std::vector<double> apply(const std::vector<double>& x) const {
        if (static_cast<int>(x.size()) != n) throw std::invalid_argument("CsrMatrix::apply: size mismatch");
        std::vector<double> y(n);
        apply(x.data(), y.data());
        return y;
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(n, 0.0);
        for (int r = 0; r < n; ++r)
            for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
                if (col[k] == r) d[r] = val[k];
        return d;
    }

    double coeff(int r, int c) const {
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
            if (col[k] == c) return val[k];
        return 0.0;
    }

    // max |K - K^T| entry over max |K| entry; 0 for exactly symmetric matrices.
    double symmetry_defect() const {
        double num = 0.0, den = 0.0;
        for (int r = 0; r < n; ++r)
            for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
                num = std::max(num, std::abs(val[k] - coeff(col[k], r)));
                den = std::max(den, std::abs(val[k]));
            }
        return den > 0 ? num / den : 0.0;
    }

    std::vector<double> row_sums() const {
        std::vector<double> s(n, 0.0);
        for (int r = 0; r < n; ++r)
            for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s[r] += val[k];
        return s;
    }
};

// Sum (a*A + b*B) of two same-pattern-or-not CSR matrices.
inline CsrMatrix csr_add(const CsrMatrix& a, double ca, const CsrMatrix& b, double cb) {
    if (a.n != b.n) throw std::invalid_argument("csr_add: size mismatch");
    std::vector<Triplet> t;
    t.reserve(a.val.size() + b.val.size());
    for (int r = 0; r < a.n; ++r)
        for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k)
            t.push_back({r, a.col[k], ca * a.val[k]});
    for (int r = 0; r < b.n; ++r)
        for (int k = b.row_ptr[r]; k < b.row_ptr[r + 1]; ++k)
            t.push_back({r, b.col[k], cb * b.val[k]});
    return CsrMatrix::from_triplets(a.n, std::move(t));
}

}  // namespace bdps
