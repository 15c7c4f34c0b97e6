#pragma once
//
// maglocal : uniform radial grid on (0, r_max) with Dirichlet ends implied
//

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"

namespace maglocal {

// Nodes r_i = (i+1) h for i = 0..n_r-1, so r_max = (n_r + 1) h and the origin is
// excluded. The discrete norm sum_i |phi(r_i)|^2 r_i h approximates L^2(R+, r dr).
class RadialGrid {
public:
    RadialGrid() = default;

    RadialGrid(std::size_t n_r, double r_max) : n_r_(n_r), r_max_(r_max) {
        if (n_r < 8)
            throw domain_error("radial grid needs at least 8 nodes, got " + std::to_string(n_r));
        if (!(r_max > 0.0))
            throw domain_error("radial grid needs r_max > 0");
        h_ = r_max / static_cast<double>(n_r + 1);
    }

    std::size_t size() const noexcept { return n_r_; }
    double h() const noexcept { return h_; }
    double r_max() const noexcept { return r_max_; }
    double node(std::size_t i) const noexcept { return static_cast<double>(i + 1) * h_; }

    std::vector<double> nodes() const {
        std::vector<double> r(n_r_);
        for (std::size_t i = 0; i < n_r_; ++i) r[i] = node(i);
        return r;
    }

    // same spacing, domain stretched by `factor` (node count rounded)
    RadialGrid stretched(double factor) const {
        const auto n = static_cast<std::size_t>(std::llround(factor * r_max_ / h_)) - 1;
        return RadialGrid(n, static_cast<double>(n + 1) * h_);
    }

    friend bool operator==(const RadialGrid& a, const RadialGrid& b) noexcept {
        return a.n_r_ == b.n_r_ && a.r_max_ == b.r_max_;
    }

private:
    std::size_t n_r_ = 0;
    double r_max_ = 0.0;
    double h_ = 0.0;
};

inline RadialGrid build_grid(long long n_r, double r_max) {
    if (n_r <= 0) throw domain_error("n_r must be positive");
    return RadialGrid(static_cast<std::size_t>(n_r), r_max);
}

} // namespace maglocal
