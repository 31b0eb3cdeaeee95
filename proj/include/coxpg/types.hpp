#ifndef COXPG_TYPES_HPP
#define COXPG_TYPES_HPP

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace coxpg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexVector = Eigen::VectorXi;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Malformed or inconsistent user input (CSV contents, flags, model options).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical failure inside the sampler (non-PD precision, no finite draws).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid arguments to a sampling primitive.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

}  // namespace coxpg

#endif  // COXPG_TYPES_HPP
