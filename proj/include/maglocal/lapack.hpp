#pragma once
//
// maglocal : thin LAPACKE wrappers (tridiagonal and dense Hermitian eigensolvers)
//

#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#ifndef lapack_complex_double
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

#include "errors.hpp"

namespace maglocal::lapack {

// which eigenvalues to keep
struct Range {
    enum class Kind { all, value, index } kind = Kind::all;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    std::size_t first = 0, last = 0;   // 0-based inclusive, for Kind::index

    static Range all() { return {}; }
    static Range values(double lo, double hi) { return {Kind::value, lo, hi, 0, 0}; }
    static Range below(double hi) { return values(-std::numeric_limits<double>::max(), hi); }
    static Range indices(std::size_t first, std::size_t last) { return {Kind::index, 0.0, 0.0, first, last}; }
};

template <class T>
struct EigenResult {
    std::vector<double> values;   // ascending
    std::vector<T> vectors;       // column-major n x values.size(), empty if not requested
};

namespace detail {
inline char range_char(const Range& r) {
    switch (r.kind) {
    case Range::Kind::value: return 'V';
    case Range::Kind::index: return 'I';
    default: return 'A';
    }
}
inline void check(lapack_int info, const char* who) {
    if (info != 0) throw numerical_error(std::string(who) + " failed, info = " + std::to_string(info));
}
} // namespace detail

// symmetric tridiagonal: diag d (n), off-diagonal e (n-1)
inline EigenResult<double> stevr(std::vector<double> d, std::vector<double> e, const Range& range, bool vectors) {
    const auto n = static_cast<lapack_int>(d.size());
    EigenResult<double> out;
    if (n == 0) return out;
    if (range.kind == Range::Kind::value && !(range.hi > range.lo)) return out;
    e.resize(d.size());   // dstevr uses e as workspace of length n
    std::vector<double> w(d.size());
    std::vector<lapack_int> isuppz(2 * d.size());
    lapack_int m = 0;
    const bool idx = range.kind == Range::Kind::index;
    const lapack_int il = idx ? static_cast<lapack_int>(range.first) + 1 : 1;
    const lapack_int iu = idx ? static_cast<lapack_int>(range.last) + 1 : n;
    std::vector<double> z;
    if (vectors) {
        const std::size_t cols = idx ? static_cast<std::size_t>(iu - il + 1) : d.size();
        z.assign(d.size() * cols, 0.0);
    }
    const lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', detail::range_char(range), n,
                                           d.data(), e.data(), range.lo, range.hi, il, iu, 0.0, &m, w.data(),
                                           vectors ? z.data() : nullptr, n, isuppz.data());
    detail::check(info, "dstevr");
    w.resize(static_cast<std::size_t>(m));
    out.values = std::move(w);
    if (vectors) {
        z.resize(d.size() * static_cast<std::size_t>(m));
        out.vectors = std::move(z);
    }
    return out;
}

// dense Hermitian, column-major n x n (upper triangle referenced); a is overwritten
inline EigenResult<std::complex<double>> heevr(std::size_t n, std::vector<std::complex<double>> a, const Range& range,
                                               bool vectors) {
    EigenResult<std::complex<double>> out;
    if (n == 0) return out;
    if (range.kind == Range::Kind::value && !(range.hi > range.lo)) return out;
    const auto ln = static_cast<lapack_int>(n);
    std::vector<double> w(n);
    std::vector<lapack_int> isuppz(2 * n);
    lapack_int m = 0;
    const bool idx = range.kind == Range::Kind::index;
    const lapack_int il = idx ? static_cast<lapack_int>(range.first) + 1 : 1;
    const lapack_int iu = idx ? static_cast<lapack_int>(range.last) + 1 : ln;
    std::vector<std::complex<double>> z;
    if (vectors) z.assign(n * (idx ? static_cast<std::size_t>(iu - il + 1) : n), {});
    const lapack_int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', detail::range_char(range), 'U', ln,
                                           a.data(), ln, range.lo, range.hi, il, iu, 0.0, &m, w.data(),
                                           vectors ? z.data() : nullptr, ln, isuppz.data());
    detail::check(info, "zheevr");
    w.resize(static_cast<std::size_t>(m));
    out.values = std::move(w);
    if (vectors) {
        z.resize(n * static_cast<std::size_t>(m));
        out.vectors = std::move(z);
    }
    return out;
}

} // namespace maglocal::lapack
