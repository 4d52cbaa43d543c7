#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "bnit/error.hpp"

namespace bnit {

using IndexSet = std::vector<std::size_t>;

// One point of {0,1}^n. Coordinate i is bit i of code().
struct Assignment {
    std::vector<std::uint8_t> bits;

    Assignment() = default;
    explicit Assignment(std::vector<std::uint8_t> b) : bits(std::move(b)) {
        for (auto v : bits)
            if (v > 1) throw Error(Errc::InvalidArgument, "assignment entries must be 0 or 1");
    }

    static Assignment from_string(std::string_view s) {
        std::vector<std::uint8_t> b;
        b.reserve(s.size());
        for (char c : s) {
            if (c != '0' && c != '1') throw Error(Errc::ParseError, "assignment string must contain only 0/1");
            b.push_back(std::uint8_t(c - '0'));
        }
        return Assignment(std::move(b));
    }

    static Assignment from_code(std::uint64_t code, std::size_t n) {
        std::vector<std::uint8_t> b(n);
        for (std::size_t i = 0; i < n; ++i) b[i] = std::uint8_t((code >> i) & 1u);
        return Assignment(std::move(b));
    }

    std::size_t size() const { return bits.size(); }
    std::uint8_t operator[](std::size_t i) const { return bits[i]; }

    std::uint64_t code() const {
        if (bits.size() > 64) throw Error(Errc::TooLargeForDense, "assignment too long to encode");
        std::uint64_t c = 0;
        for (std::size_t i = 0; i < bits.size(); ++i) c |= std::uint64_t(bits[i]) << i;
        return c;
    }

    std::string str() const {
        std::string s;
        for (auto v : bits) s.push_back(char('0' + v));
        return s;
    }

    bool operator==(const Assignment&) const = default;
};

inline void check_index_set(const IndexSet& T, std::size_t n, bool require_sorted) {
    for (std::size_t j = 0; j < T.size(); ++j) {
        if (T[j] >= n) throw Error(Errc::IndexOutOfRange, "index " + std::to_string(T[j]) + " outside dimension " + std::to_string(n));
        if (require_sorted && j > 0 && T[j] <= T[j - 1])
            throw Error(Errc::InvalidArgument, "index set must be distinct and sorted ascending");
    }
    if (!require_sorted) {
        IndexSet s = T;
        std::sort(s.begin(), s.end());
        if (std::adjacent_find(s.begin(), s.end()) != s.end())
            throw Error(Errc::InvalidArgument, "index set has duplicates");
    }
}

inline Assignment restrict(const Assignment& x, const IndexSet& T) {
    check_index_set(T, x.size(), true);
    std::vector<std::uint8_t> b(T.size());
    for (std::size_t j = 0; j < T.size(); ++j) b[j] = x.bits[T[j]];
    return Assignment(std::move(b));
}

// Column-major bitset storage; a SampleSet is a view onto shared immutable columns.
class SampleSet {
public:
    using Column = std::vector<std::uint64_t>;

    SampleSet() = default;
    SampleSet(std::shared_ptr<const std::vector<Column>> cols, std::size_t m, IndexSet view)
        : cols_(std::move(cols)), m_(m), view_(std::move(view)) {}

    std::size_t size() const { return m_; }
    std::size_t dim() const { return view_.size(); }

    bool bit(std::size_t s, std::size_t j) const {
        const Column& c = (*cols_)[view_[j]];
        return (c[s >> 6] >> (s & 63)) & 1u;
    }

    Assignment at(std::size_t s) const {
        std::vector<std::uint8_t> b(dim());
        for (std::size_t j = 0; j < dim(); ++j) b[j] = bit(s, j);
        return Assignment(std::move(b));
    }

    SampleSet restrict(const IndexSet& T) const {
        check_index_set(T, dim(), true);
        IndexSet v(T.size());
        for (std::size_t j = 0; j < T.size(); ++j) v[j] = view_[T[j]];
        return SampleSet(cols_, m_, std::move(v));
    }

    const Column& column(std::size_t j) const { return (*cols_)[view_[j]]; }

    std::uint64_t count_ones(std::size_t j, std::size_t begin, std::size_t end) const {
        const Column& c = column(j);
        std::uint64_t total = 0;
        for_words(begin, end, [&](std::size_t w, std::uint64_t mask) { total += std::popcount(c[w] & mask); });
        return total;
    }

    // counts[code] over samples [begin, end); code bit j = coordinate j
    std::vector<std::uint64_t> cell_counts(std::size_t begin, std::size_t end) const {
        const std::size_t k = dim();
        if (k > 24) throw Error(Errc::TooLargeForDense, "cell counts need dim <= 24");
        std::vector<std::uint64_t> counts(std::size_t(1) << k, 0);
        if (begin >= end) return counts;
        if (k <= 6) {
            // g[S] = #samples with all coordinates in S equal to 1; Moebius inversion gives exact cells
            const std::size_t cells = std::size_t(1) << k;
            std::vector<std::uint64_t> g(cells, 0);
            std::vector<std::uint64_t> acc(cells);
            for_words(begin, end, [&](std::size_t w, std::uint64_t mask) {
                acc[0] = mask;
                g[0] += std::popcount(mask);
                for (std::size_t S = 1; S < cells; ++S) {
                    std::size_t low = std::countr_zero(S);
                    acc[S] = acc[S & (S - 1)] & column(low)[w];
                    g[S] += std::popcount(acc[S]);
                }
            });
            // superset Moebius: f[S] = sum_{U >= S} (-1)^{|U\S|} g[U]
            std::vector<std::int64_t> f(g.begin(), g.end());
            for (std::size_t j = 0; j < k; ++j)
                for (std::size_t S = 0; S < cells; ++S)
                    if (!(S & (std::size_t(1) << j))) f[S] -= f[S | (std::size_t(1) << j)];
            for (std::size_t S = 0; S < cells; ++S) counts[S] = std::uint64_t(f[S]);
            return counts;
        }
        return cell_counts_gather(begin, end);
    }

    std::vector<std::uint64_t> cell_counts_gather(std::size_t begin, std::size_t end) const {
        const std::size_t k = dim();
        std::vector<std::uint64_t> counts(std::size_t(1) << k, 0);
        for (std::size_t s = begin; s < end; ++s) {
            std::size_t code = 0;
            for (std::size_t j = 0; j < k; ++j) code |= std::size_t(bit(s, j)) << j;
            ++counts[code];
        }
        return counts;
    }

private:
    template <class F>
    static void for_words(std::size_t begin, std::size_t end, F&& f) {
        if (begin >= end) return;
        std::size_t wb = begin >> 6, we = (end - 1) >> 6;
        for (std::size_t w = wb; w <= we; ++w) {
            std::uint64_t mask = ~std::uint64_t(0);
            if (w == wb) mask &= ~std::uint64_t(0) << (begin & 63);
            if (w == we && (end & 63)) mask &= ~std::uint64_t(0) >> (64 - (end & 63));
            f(w, mask);
        }
    }

    std::shared_ptr<const std::vector<Column>> cols_;
    std::size_t m_ = 0;
    IndexSet view_;
};

class SampleSetBuilder {
public:
    SampleSetBuilder(std::size_t m, std::size_t n)
        : m_(m), n_(n), cols_(std::make_shared<std::vector<SampleSet::Column>>(n, SampleSet::Column((m + 63) / 64, 0))) {}

    void set(std::size_t s, std::size_t j, bool v) {
        auto& c = (*cols_)[j];
        if (v)
            c[s >> 6] |= std::uint64_t(1) << (s & 63);
        else
            c[s >> 6] &= ~(std::uint64_t(1) << (s & 63));
    }

    void set_row(std::size_t s, const Assignment& x) {
        if (x.size() != n_) throw Error(Errc::DimensionMismatch, "row length differs from builder dimension");
        for (std::size_t j = 0; j < n_; ++j) set(s, j, x[j]);
    }

    SampleSet::Column& column(std::size_t j) { return (*cols_)[j]; }

    SampleSet build() && {
        IndexSet v(n_);
        for (std::size_t j = 0; j < n_; ++j) v[j] = j;
        return SampleSet(std::move(cols_), m_, std::move(v));
    }

private:
    std::size_t m_, n_;
    std::shared_ptr<std::vector<SampleSet::Column>> cols_;
};

inline SampleSet make_sample_set(const std::vector<Assignment>& rows, std::size_t n) {
    SampleSetBuilder b(rows.size(), n);
    for (std::size_t s = 0; s < rows.size(); ++s) b.set_row(s, rows[s]);
    return std::move(b).build();
}

} // namespace bnit
