#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vipaint {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A set of equally sized sample vectors.
using SampleSet = std::vector<Vec>;

/// Argument outside the mathematical domain of an operation (bad time, bad ordering, bad shape).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A numerical computation produced a non-finite value or diverged.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw DomainError(what);
}

} // namespace vipaint
