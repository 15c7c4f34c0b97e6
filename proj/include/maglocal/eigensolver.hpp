#pragma once
//
// maglocal : eigenpairs of the block Hamiltonian
//
// Three routes, picked by structure and size:
//   block diagonal (W radial or zero)  -> per-channel tridiagonal solves
//   coupled, dim <= dense_limit         -> dense Hermitian solve
//   coupled, larger                     -> spectrum slicing: exact inertia counts from a
//                                          block LDL^H factorization of the radial-major
//                                          block tridiagonal matrix, shift-invert Lanczos
//                                          per slice, then one global Rayleigh-Ritz pass
//

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "hamiltonian.hpp"
#include "lapack.hpp"

namespace maglocal {

struct DiagonalizeOptions {
    std::optional<double> upper;      // keep eigenvalues <= upper (all when unset)
    bool vectors = true;
    std::size_t dense_limit = 4000;
    double tol = 1e-9;                // residual tolerance relative to ||H||
    std::size_t slice_target = 40;    // eigenvalues per slice
    std::uint64_t seed = 0x6d61676cULL;
};

struct EigenSystem {
    std::vector<double> values;       // ascending
    MatrixC vectors;                  // dim x k, Euclidean-orthonormal, channel-major flat layout
    std::optional<double> upper;      // every eigenvalue <= upper is present
    std::string route;
    double norm_estimate = 0.0;
    double max_residual = 0.0;        // max ||H v - lambda v||, absolute
    std::size_t size() const noexcept { return values.size(); }
};

//
// block LDL^H of (T - sigma) for a block tridiagonal T
//
class BlockLDL {
public:
    BlockLDL(const BlockTridiagonal& t, double sigma, bool keep_inverses) : t_(&t), sigma_(sigma) {
        const std::size_t n = t.blocks();
        const Eigen::Index m = t.block_size();
        if (keep_inverses) s_inv_.resize(n);
        MatrixC s;
        Eigen::SelfAdjointEigenSolver<MatrixC> es;
        for (std::size_t i = 0; i < n; ++i) {
            s = t.diag[i];
            s.diagonal().array() -= sigma;
            if (i > 0) {
                const auto& b = t.lower[i - 1];
                s -= b.asDiagonal() * prev_inv_ * b.asDiagonal();
            }
            es.compute(s);
            const auto& ev = es.eigenvalues();
            for (Eigen::Index a = 0; a < m; ++a) {
                if (ev(a) < 0.0) ++negatives_;
                min_pivot_ = std::min(min_pivot_, std::abs(ev(a)));
            }
            prev_inv_ = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
            if (keep_inverses) s_inv_[i] = prev_inv_;
        }
    }

    // number of eigenvalues strictly below sigma
    std::size_t negatives() const noexcept { return negatives_; }
    double min_pivot() const noexcept { return min_pivot_; }
    double sigma() const noexcept { return sigma_; }

    // x = (T - sigma)^{-1} b in radial-major layout (block i = entries i*m .. i*m+m-1)
    VectorC solve(const VectorC& b) const {
        const std::size_t n = t_->blocks();
        const Eigen::Index m = t_->block_size();
        VectorC y = b;
        for (std::size_t i = 1; i < n; ++i) {
            const auto& bl = t_->lower[i - 1];
            y.segment(blk(i, m), m) -= bl.asDiagonal() * (s_inv_[i - 1] * y.segment(blk(i - 1, m), m));
        }
        VectorC x(b.size());
        x.segment(blk(n - 1, m), m) = s_inv_[n - 1] * y.segment(blk(n - 1, m), m);
        for (std::size_t i = n - 1; i-- > 0;) {
            const auto& bl = t_->lower[i];
            x.segment(blk(i, m), m) =
                s_inv_[i] * (y.segment(blk(i, m), m) - bl.asDiagonal() * x.segment(blk(i + 1, m), m));
        }
        return x;
    }

private:
    static Eigen::Index blk(std::size_t i, Eigen::Index m) { return static_cast<Eigen::Index>(i) * m; }

    const BlockTridiagonal* t_;
    double sigma_;
    std::size_t negatives_ = 0;
    double min_pivot_ = std::numeric_limits<double>::infinity();
    MatrixC prev_inv_;
    std::vector<MatrixC> s_inv_;
};

// y = T x, radial-major
inline VectorC block_apply(const BlockTridiagonal& t, const VectorC& x) {
    const std::size_t n = t.blocks();
    const Eigen::Index m = t.block_size();
    VectorC y(x.size());
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Index o = static_cast<Eigen::Index>(i) * m;
        y.segment(o, m) = t.diag[i] * x.segment(o, m);
        if (i > 0) y.segment(o, m) += t.lower[i - 1].asDiagonal() * x.segment(o - m, m);
        if (i + 1 < n) y.segment(o, m) += t.lower[i].asDiagonal() * x.segment(o + m, m);
    }
    return y;
}

// Sylvester count of eigenvalues < x; shifts that land (numerically) on an eigenvalue are
// nudged by a relative 1e-12 so the count is well defined
inline std::size_t count_below(const BlockTridiagonal& t, double x, double norm) {
    const double eps = 1e-12 * std::max(1.0, norm);
    for (int attempt = 0; attempt < 8; ++attempt) {
        BlockLDL f(t, x, false);
        if (f.min_pivot() > 1e-13 * std::max(1.0, norm)) return f.negatives();
        x += eps * (attempt + 1);
    }
    return BlockLDL(t, x, false).negatives();
}

namespace detail {

// radial-major <-> channel-major permutations
inline VectorC to_channel_major(const VectorC& x, std::size_t n_r, std::size_t n_c) {
    VectorC y(x.size());
    for (std::size_t i = 0; i < n_r; ++i)
        for (std::size_t a = 0; a < n_c; ++a)
            y[static_cast<Eigen::Index>(a * n_r + i)] = x[static_cast<Eigen::Index>(i * n_c + a)];
    return y;
}

struct LockedSet {
    MatrixC v;                    // N x cap
    std::vector<double> values;
    Eigen::Index count = 0;

    // orthogonalize w against the locked vectors (two passes)
    void project_out(VectorC& w) const {
        if (count == 0) return;
        for (int pass = 0; pass < 2; ++pass) {
            const VectorC h = v.leftCols(count).adjoint() * w;
            w.noalias() -= v.leftCols(count) * h;
        }
    }
    void push(const VectorC& x, double lambda) {
        if (count == v.cols()) v.conservativeResize(Eigen::NoChange, std::max<Eigen::Index>(8, 2 * v.cols()));
        v.col(count++) = x;
        values.push_back(lambda);
    }
};

// all eigenpairs of T in [lo, hi), k of them by inertia count
inline void lanczos_slice(const BlockTridiagonal& t, double lo, double hi, std::size_t k, double norm, double tol,
                          std::mt19937_64& rng, LockedSet& locked) {
    const Eigen::Index N = static_cast<Eigen::Index>(t.blocks()) * t.block_size();
    double sigma = 0.5 * (lo + hi);
    std::optional<BlockLDL> f;
    for (int attempt = 0; attempt < 8; ++attempt) {
        f.emplace(t, sigma, true);
        if (f->min_pivot() > 1e-10 * std::max(1.0, norm)) break;
        sigma += 1e-7 * (hi - lo) * (attempt + 1);
    }
    const double abs_tol = tol * norm;
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    auto random_vector = [&] {
        VectorC x(N);
        for (Eigen::Index p = 0; p < N; ++p) x[p] = cplx(unif(rng), unif(rng));
        return x;
    };

    const Eigen::Index m_dim = std::min<Eigen::Index>(N - locked.count, std::max<Eigen::Index>(2 * k + 40, 80));
    std::size_t found = 0;
    VectorC start = random_vector();
    const int max_restarts = 30 + 4 * static_cast<int>(k);
    double worst = 0.0;
    for (int restart = 0; restart < max_restarts && found < k; ++restart) {
        locked.project_out(start);
        double nrm = start.norm();
        if (nrm < 1e-300) {
            start = random_vector();
            locked.project_out(start);
            nrm = start.norm();
        }
        MatrixC q(N, m_dim);
        std::vector<double> alpha, beta;
        q.col(0) = start / nrm;
        Eigen::Index steps = 0;
        for (Eigen::Index it = 0; it < m_dim; ++it) {
            VectorC w = f->solve(q.col(it));
            locked.project_out(w);
            for (int pass = 0; pass < 2; ++pass) {
                const VectorC h = q.leftCols(it + 1).adjoint() * w;
                w.noalias() -= q.leftCols(it + 1) * h;
                if (pass == 0) alpha.push_back(h[it].real());
                else alpha.back() += h[it].real();
            }
            steps = it + 1;
            const double b = w.norm();
            if (it + 1 == m_dim) break;
            if (b < 1e-12 * std::abs(alpha.back()) || b < 1e-300) break;   // invariant subspace
            beta.push_back(b);
            q.col(it + 1) = w / b;
        }
        Eigen::MatrixXd tm = Eigen::MatrixXd::Zero(steps, steps);
        for (Eigen::Index a = 0; a < steps; ++a) {
            tm(a, a) = alpha[static_cast<std::size_t>(a)];
            if (a + 1 < steps) tm(a, a + 1) = tm(a + 1, a) = beta[static_cast<std::size_t>(a)];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tm);
        VectorC next = VectorC::Zero(N);
        bool any_wanted = false;
        // largest |theta| first: nearest to sigma
        std::vector<Eigen::Index> order(static_cast<std::size_t>(steps));
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) {
            return std::abs(es.eigenvalues()(a)) > std::abs(es.eigenvalues()(b));
        });
        for (Eigen::Index s : order) {
            const double theta = es.eigenvalues()(s);
            if (theta == 0.0) continue;
            const double lam_est = sigma + 1.0 / theta;
            if (lam_est < lo - 1e-8 * norm || lam_est >= hi + 1e-8 * norm) continue;
            VectorC y = q.leftCols(steps) * es.eigenvectors().col(s).cast<cplx>();
            locked.project_out(y);
            const double yn = y.norm();
            if (yn < 0.5) continue;
            y /= yn;
            const VectorC hy = block_apply(t, y);
            const double lam = y.dot(hy).real();
            const double res = (hy - lam * y).norm();
            if (res <= abs_tol && lam >= lo && lam < hi && found < k) {
                locked.push(y, lam);
                ++found;
            } else {
                worst = std::max(worst, res);
                next += y;
                any_wanted = true;
            }
        }
        start = any_wanted ? VectorC(next + 1e-3 * next.norm() / std::sqrt(double(N)) * random_vector())
                           : random_vector();
    }
    if (found < k)
        throw numerical_error("sliced eigensolver: found " + std::to_string(found) + " of " + std::to_string(k) +
                              " eigenvalues in [" + io::fmt(lo) + ", " + io::fmt(hi) +
                              "); worst residual " + io::fmt(worst) + " vs tolerance " + io::fmt(abs_tol));
}

} // namespace detail

//
// routes
//
inline EigenSystem diagonalize_block_diagonal(const BlockHamiltonian& h, const DiagonalizeOptions& opt) {
    struct Entry {
        double value;
        int j;
        std::size_t col;
    };
    const std::size_t n = h.n_r();
    std::vector<lapack::EigenResult<double>> per(h.channels());
    std::vector<Entry> all;
    const auto range = opt.upper ? lapack::Range::below(*opt.upper) : lapack::Range::all();
    for (int j = -h.j_max(); j <= h.j_max(); ++j) {
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = h.diagonal(j, i);
        auto& r = per[static_cast<std::size_t>(j + h.j_max())];
        r = lapack::stevr(d, h.channel(j).off_diagonal, range, opt.vectors);
        for (std::size_t c = 0; c < r.values.size(); ++c) all.push_back({r.values[c], j, c});
    }
    std::stable_sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });
    EigenSystem es;
    es.route = "channel_tridiagonal";
    es.upper = opt.upper;
    es.values.reserve(all.size());
    for (const auto& e : all) es.values.push_back(e.value);
    if (opt.vectors) {
        es.vectors = MatrixC::Zero(static_cast<Eigen::Index>(h.dim()), static_cast<Eigen::Index>(all.size()));
        for (std::size_t c = 0; c < all.size(); ++c) {
            const auto& r = per[static_cast<std::size_t>(all[c].j + h.j_max())];
            const std::size_t base = h.index(all[c].j, 0);
            for (std::size_t i = 0; i < n; ++i)
                es.vectors(static_cast<Eigen::Index>(base + i), static_cast<Eigen::Index>(c)) = r.vectors[all[c].col * n + i];
        }
    }
    return es;
}

inline EigenSystem diagonalize_dense(const BlockHamiltonian& h, const DiagonalizeOptions& opt) {
    const std::size_t N = h.dim();
    auto r = lapack::heevr(N, h.dense(), opt.upper ? lapack::Range::below(*opt.upper) : lapack::Range::all(),
                           opt.vectors);
    EigenSystem es;
    es.route = "dense";
    es.upper = opt.upper;
    es.values = std::move(r.values);
    if (opt.vectors)
        es.vectors = Eigen::Map<MatrixC>(r.vectors.data(), static_cast<Eigen::Index>(N),
                                         static_cast<Eigen::Index>(es.values.size()));
    return es;
}

inline EigenSystem diagonalize_sliced(const BlockHamiltonian& h, const DiagonalizeOptions& opt) {
    if (!opt.upper) throw numerical_error("sliced eigensolver needs an upper energy (window E0)");
    const BlockTridiagonal t = h.block_tridiagonal();
    const auto [g_lo, norm] = t.gershgorin();
    const double hi = *opt.upper + 1e-12 * std::max(1.0, std::abs(*opt.upper));
    const double lo0 = g_lo - 1e-9 * std::max(1.0, norm);

    EigenSystem es;
    es.route = "sliced_lanczos";
    es.upper = opt.upper;
    es.norm_estimate = norm;
    const std::size_t total = count_below(t, hi, norm);
    if (total == 0) {
        es.vectors = MatrixC(static_cast<Eigen::Index>(h.dim()), 0);
        return es;
    }

    // split [lo0, hi) until every slice holds <= slice_target eigenvalues
    struct Slice {
        double lo, hi;
        std::size_t clo, chi;
    };
    std::vector<Slice> todo{{lo0, hi, 0, total}}, done;
    while (!todo.empty()) {
        Slice s = todo.back();
        todo.pop_back();
        if (s.chi == s.clo) continue;
        // tighten an empty lower part first so sigma sits close to the eigenvalues
        if (s.chi - s.clo <= opt.slice_target) {
            for (int it = 0; it < 40; ++it) {
                const double mid = 0.5 * (s.lo + s.hi);
                if (count_below(t, mid, norm) != s.clo) break;
                s.lo = mid;
            }
            done.push_back(s);
            continue;
        }
        const double mid = 0.5 * (s.lo + s.hi);
        const std::size_t cm = count_below(t, mid, norm);
        todo.push_back({mid, s.hi, cm, s.chi});
        todo.push_back({s.lo, mid, s.clo, cm});
    }
    std::sort(done.begin(), done.end(), [](const Slice& a, const Slice& b) { return a.lo < b.lo; });

    std::mt19937_64 rng(opt.seed);
    detail::LockedSet locked;
    locked.v = MatrixC(static_cast<Eigen::Index>(h.dim()), static_cast<Eigen::Index>(total));
    for (const auto& s : done) detail::lanczos_slice(t, s.lo, s.hi, s.chi - s.clo, norm, opt.tol, rng, locked);

    // global Rayleigh-Ritz on the union of slice vectors
    MatrixC v = locked.v.leftCols(locked.count);
    Eigen::Index kept = 0;
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
        VectorC x = v.col(c);
        for (int pass = 0; pass < 2; ++pass) {
            if (kept == 0) break;
            const VectorC hh = v.leftCols(kept).adjoint() * x;
            x.noalias() -= v.leftCols(kept) * hh;
        }
        const double nx = x.norm();
        if (nx < 1e-8) continue;   // duplicate across slices
        v.col(kept++) = x / nx;
    }
    v.conservativeResize(Eigen::NoChange, kept);
    MatrixC hv(v.rows(), kept);
    for (Eigen::Index c = 0; c < kept; ++c) hv.col(c) = block_apply(t, v.col(c));
    MatrixC g = v.adjoint() * hv;
    g = 0.5 * (g + g.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixC> rr(g);
    const MatrixC u = v * rr.eigenvectors();
    const MatrixC hu = hv * rr.eigenvectors();

    std::vector<Eigen::Index> keep;
    for (Eigen::Index c = 0; c < kept; ++c)
        if (rr.eigenvalues()(c) <= *opt.upper) keep.push_back(c);
    es.values.reserve(keep.size());
    if (opt.vectors) es.vectors = MatrixC(v.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
        const double lam = rr.eigenvalues()(keep[c]);
        es.values.push_back(lam);
        es.max_residual = std::max(es.max_residual, (hu.col(keep[c]) - lam * u.col(keep[c])).norm());
        if (opt.vectors)
            es.vectors.col(static_cast<Eigen::Index>(c)) = detail::to_channel_major(u.col(keep[c]), h.n_r(), h.channels());
    }
    if (es.values.size() != total)
        throw numerical_error("sliced eigensolver: Rayleigh-Ritz kept " + std::to_string(es.values.size()) +
                              " pairs, inertia count is " + std::to_string(total));
    if (es.max_residual > opt.tol * norm)
        throw numerical_error("sliced eigensolver: residual " + io::fmt(es.max_residual) + " exceeds " +
                              io::fmt(opt.tol * norm));
    return es;
}

// residual check shared by all routes
inline double max_residual(const BlockHamiltonian& h, const EigenSystem& es) {
    double mx = 0.0;
    for (Eigen::Index c = 0; c < es.vectors.cols(); ++c) {
        const VectorC v = es.vectors.col(c);
        mx = std::max(mx, (h.apply(v) - es.values[static_cast<std::size_t>(c)] * v).norm());
    }
    return mx;
}

inline EigenSystem diagonalize(const BlockHamiltonian& h, const DiagonalizeOptions& opt = {}) {
    EigenSystem es;
    if (h.block_diagonal()) es = diagonalize_block_diagonal(h, opt);
    else if (h.dim() <= opt.dense_limit) es = diagonalize_dense(h, opt);
    else return diagonalize_sliced(h, opt);
    es.norm_estimate = h.norm_bound();
    if (opt.vectors) {
        es.max_residual = max_residual(h, es);
        if (es.max_residual > opt.tol * es.norm_estimate)
            throw numerical_error(es.route + " eigensolver: residual " + io::fmt(es.max_residual) + " exceeds " +
                                  io::fmt(opt.tol * es.norm_estimate));
    }
    return es;
}

} // namespace maglocal
