#pragma once
//
// maglocal : error types shared by all modules
//

#include <stdexcept>
#include <string>

namespace maglocal {

// argument outside the mathematical domain of an operation (r <= 0, E < 0, ...)
struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

// tabulated data queried outside its node range
struct extrapolation_error : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// inconsistent inputs at construction (mismatched grids, signed flux, ...)
struct construction_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// quadrature would alias retained Fourier modes
struct aliasing_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// a solver or fit could not deliver its contract
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// run configuration problems; key() names the first failing key
class config_error : public std::runtime_error {
public:
    config_error(std::string key, const std::string& what)
        : std::runtime_error("config key '" + key + "': " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

} // namespace maglocal
