#pragma once
//
// maglocal : truncated block Hamiltonian on channels |j| <= J_max
//
// State layout is channel-major: index(j, i) = (j + J_max) n_r + i, flat representation.
// Channel (j, k) couples through the diagonal-in-r block W^(r_i, j - k) / sqrt(2 pi);
// for W = g(r) cos(theta) that is g/2 on the (j, j +- 1) blocks.
//

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "flux.hpp"
#include "grid.hpp"
#include "perturbation.hpp"
#include "radial.hpp"

namespace maglocal {

using VectorC = Eigen::VectorXcd;
using MatrixC = Eigen::MatrixXcd;

// Radial-major block tridiagonal form: block i collects all channels at node r_i.
// Diagonal blocks are Hermitian n_c x n_c; the coupling between nodes i and i+1 is
// diagonal (the radial stencil does not mix channels).
struct BlockTridiagonal {
    std::vector<MatrixC> diag;
    std::vector<Eigen::VectorXd> lower;   // lower[i] couples node i and i+1

    std::size_t blocks() const noexcept { return diag.size(); }
    Eigen::Index block_size() const noexcept { return diag.empty() ? 0 : diag.front().rows(); }

    // Gershgorin bounds (lowest, largest |row sum|)
    std::pair<double, double> gershgorin() const {
        double lo = std::numeric_limits<double>::infinity(), norm = 0.0;
        for (std::size_t i = 0; i < diag.size(); ++i)
            for (Eigen::Index a = 0; a < diag[i].rows(); ++a) {
                double off = 0.0;
                for (Eigen::Index b = 0; b < diag[i].cols(); ++b)
                    if (b != a) off += std::abs(diag[i](a, b));
                if (i > 0) off += std::abs(lower[i - 1](a));
                if (i + 1 < diag.size()) off += std::abs(lower[i](a));
                const double d = diag[i](a, a).real();
                lo = std::min(lo, d - off);
                norm = std::max(norm, std::abs(d) + off);
            }
        return {lo, norm};
    }
};

class BlockHamiltonian {
public:
    BlockHamiltonian() = default;

    const RadialGrid& grid() const noexcept { return grid_; }
    int j_max() const noexcept { return j_max_; }
    int m_max() const noexcept { return m_max_; }
    std::size_t channels() const noexcept { return static_cast<std::size_t>(2 * j_max_ + 1); }
    std::size_t n_r() const noexcept { return grid_.size(); }
    std::size_t dim() const noexcept { return channels() * n_r(); }
    std::size_t index(int j, std::size_t i) const noexcept {
        return static_cast<std::size_t>(j + j_max_) * n_r() + i;
    }
    int channel_of(std::size_t k) const noexcept { return static_cast<int>(k / n_r()) - j_max_; }

    const ChannelOperator& channel(int j) const { return ops_[static_cast<std::size_t>(j + j_max_)]; }
    const std::vector<double>& symmetric_part() const noexcept { return w_s_; }
    bool symmetric_part_included() const noexcept { return !w_s_.empty(); }
    double dropped_coupling_bound() const noexcept { return dropped_bound_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    // coupling value for m = j - k at node i (zero outside 0 < |m| <= M)
    cplx coupling(int m, std::size_t i) const {
        if (m == 0 || std::abs(m) > m_max_) return {};
        return coupling_[static_cast<std::size_t>(m + m_max_)][i];
    }

    // no nonsymmetric part retained
    bool block_diagonal() const noexcept { return !has_coupling_; }

    // total diagonal entry of channel j at node i
    double diagonal(int j, std::size_t i) const {
        const double d = channel(j).diagonal[i];
        return w_s_.empty() ? d : d + w_s_[i];
    }

    // y = H x
    void apply(const VectorC& x, VectorC& y) const {
        y.resize(static_cast<Eigen::Index>(dim()));
        const std::size_t n = n_r();
        for (int j = -j_max_; j <= j_max_; ++j) {
            const auto& op = channel(j);
            const std::size_t base = index(j, 0);
            for (std::size_t i = 0; i < n; ++i) {
                cplx s = diagonal(j, i) * x[idx(base + i)];
                if (i > 0) s += op.off_diagonal[i - 1] * x[idx(base + i - 1)];
                if (i + 1 < n) s += op.off_diagonal[i] * x[idx(base + i + 1)];
                y[idx(base + i)] = s;
            }
        }
        if (has_coupling_) add_coupling(x, y);
    }

    VectorC apply(const VectorC& x) const {
        VectorC y;
        apply(x, y);
        return y;
    }

    // y = W_ns x (only the channel coupling)
    VectorC apply_nonsymmetric(const VectorC& x) const {
        VectorC y = VectorC::Zero(static_cast<Eigen::Index>(dim()));
        if (has_coupling_) add_coupling(x, y);
        return y;
    }

    // dense column-major matrix (upper and lower triangles filled)
    std::vector<cplx> dense() const {
        const std::size_t N = dim(), n = n_r();
        std::vector<cplx> a(N * N);
        auto at = [&](std::size_t r, std::size_t c) -> cplx& { return a[c * N + r]; };
        for (int j = -j_max_; j <= j_max_; ++j) {
            const auto& op = channel(j);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t p = index(j, i);
                at(p, p) = diagonal(j, i);
                if (i + 1 < n) at(p, p + 1) = at(p + 1, p) = op.off_diagonal[i];
                if (!has_coupling_) continue;
                for (int k = std::max(-j_max_, j - m_max_); k <= std::min(j_max_, j + m_max_); ++k)
                    if (k != j) at(p, index(k, i)) = coupling(j - k, i);
            }
        }
        return a;
    }

    // radial-major block tridiagonal copy; extra_diag (channel-major, optional) is added
    BlockTridiagonal block_tridiagonal(const std::vector<double>* extra_diag = nullptr) const {
        const std::size_t n = n_r();
        const auto nc = static_cast<Eigen::Index>(channels());
        BlockTridiagonal bt;
        bt.diag.assign(n, MatrixC::Zero(nc, nc));
        bt.lower.assign(n > 0 ? n - 1 : 0, Eigen::VectorXd::Zero(nc));
        for (int j = -j_max_; j <= j_max_; ++j) {
            const auto a = static_cast<Eigen::Index>(j + j_max_);
            const auto& op = channel(j);
            for (std::size_t i = 0; i < n; ++i) {
                double d = diagonal(j, i);
                if (extra_diag) d += (*extra_diag)[index(j, i)];
                bt.diag[i](a, a) = d;
                if (i + 1 < n) bt.lower[i](a) = op.off_diagonal[i];
                if (!has_coupling_) continue;
                for (int k = std::max(-j_max_, j - m_max_); k <= std::min(j_max_, j + m_max_); ++k)
                    if (k != j) bt.diag[i](a, static_cast<Eigen::Index>(k + j_max_)) = coupling(j - k, i);
            }
        }
        return bt;
    }

    // max absolute row sum (an upper bound for ||H||_2)
    double norm_bound() const { return block_tridiagonal().gershgorin().second; }

    friend BlockHamiltonian assemble_hamiltonian(const FluxProfile&, const AngularPotential&, const RadialGrid&, int,
                                                 int);

private:
    static Eigen::Index idx(std::size_t k) noexcept { return static_cast<Eigen::Index>(k); }

    void add_coupling(const VectorC& x, VectorC& y) const {
        const std::size_t n = n_r();
        for (int j = -j_max_; j <= j_max_; ++j)
            for (int k = std::max(-j_max_, j - m_max_); k <= std::min(j_max_, j + m_max_); ++k) {
                if (k == j) continue;
                const auto& c = coupling_[static_cast<std::size_t>(j - k + m_max_)];
                const std::size_t bj = index(j, 0), bk = index(k, 0);
                for (std::size_t i = 0; i < n; ++i) y[idx(bj + i)] += c[i] * x[idx(bk + i)];
            }
    }

    RadialGrid grid_;
    int j_max_ = 0;
    int m_max_ = 0;
    std::vector<ChannelOperator> ops_;
    std::vector<double> w_s_;
    std::vector<std::vector<cplx>> coupling_;   // index m + M
    bool has_coupling_ = false;
    double dropped_bound_ = 0.0;
    std::vector<std::string> warnings_;
};

// m_max < 0 selects the default angular truncation (Gevrey bound < 1e-12, capped at 2 J_max)
inline BlockHamiltonian assemble_hamiltonian(const FluxProfile& profile, const AngularPotential& w,
                                             const RadialGrid& grid, int j_max, int m_max = -1) {
    if (j_max < 0) throw construction_error("J_max must be >= 0");
    BlockHamiltonian h;
    h.grid_ = grid;
    h.j_max_ = j_max;
    for (int j = -j_max; j <= j_max; ++j) h.ops_.push_back(build_channel_operator(profile, j, grid));
    if (w.zero) return h;

    int m_req = m_max;
    if (m_req < 0) {
        const int by_envelope = default_m_max(w.envelope, grid);
        m_req = w.natural_m_max >= 0 ? w.natural_m_max : by_envelope;
        if (by_envelope > 0) m_req = std::min(m_req, by_envelope);
    }
    const int m_eff = std::min(m_req, 2 * j_max);
    if (m_req > m_eff) {
        // couplings |j - k| > M cannot be represented; bound what is dropped
        double b_max = 0.0;
        for (double r : grid.nodes()) b_max = std::max(b_max, w.envelope.b(r));
        double tail = 0.0;
        for (int m = m_eff + 1; m <= 100000; ++m) {
            const double t = b_max * std::exp(-w.envelope.a * std::pow(m, w.envelope.zeta));
            tail += 2.0 * t;
            if (t < 1e-18 * (1.0 + tail)) break;
        }
        h.dropped_bound_ = tail / sqrt_2pi;
        h.warnings_.push_back("angular couplings beyond |j-k| = " + std::to_string(m_eff) +
                              " dropped; dropped-norm bound " + io::fmt(h.dropped_bound_));
    }
    h.m_max_ = m_eff;

    const CoefficientTable table = coefficient_table(w, grid, m_eff);
    if (table.hermitian_defect() > 1e-12)
        throw construction_error("coefficient table is not Hermitian (W must be real valued)");
    const auto split = symmetric_split(table);
    if (std::any_of(split.w_s.begin(), split.w_s.end(), [](double v) { return v != 0.0; })) h.w_s_ = split.w_s;
    h.coupling_.assign(static_cast<std::size_t>(2 * m_eff + 1), std::vector<cplx>(grid.size()));
    for (int m = -m_eff; m <= m_eff; ++m) {
        if (m == 0) continue;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const cplx c = table.at(i, m) / sqrt_2pi;
            h.coupling_[static_cast<std::size_t>(m + m_eff)][i] = c;
            if (c != cplx{}) h.has_coupling_ = true;
        }
    }
    return h;
}

} // namespace maglocal
