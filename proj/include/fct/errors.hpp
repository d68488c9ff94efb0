#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fct {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CapacityError : public Error { using Error::Error; };
class OverflowError : public Error { using Error::Error; };
class DimensionError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class NonFiniteError : public Error { using Error::Error; };
class InfeasibleError : public Error { using Error::Error; };
class BudgetError : public Error { using Error::Error; };
class CgBreakdownError : public Error { using Error::Error; };
class RetryExhaustedError : public Error { using Error::Error; };
class CacheError : public Error { using Error::Error; };
class CacheVersionError : public CacheError { using CacheError::CacheError; };
class IoError : public Error { using Error::Error; };

// Raised when the adaptive L-grid loop hits its block cap without reaching
// full column rank and kappa <= kappa_max.
class ConditioningError : public Error {
public:
    ConditioningError(const std::string& what, std::size_t blocks, double kappa,
                      std::size_t rank_estimate)
        : Error(what), blocks_(blocks), kappa_(kappa), rank_estimate_(rank_estimate) {}

    [[nodiscard]] std::size_t blocks() const noexcept { return blocks_; }
    [[nodiscard]] double kappa() const noexcept { return kappa_; }
    [[nodiscard]] std::size_t rank_estimate() const noexcept { return rank_estimate_; }

private:
    std::size_t blocks_;
    double kappa_;
    std::size_t rank_estimate_;
};

} // namespace fct
