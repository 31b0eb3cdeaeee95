#ifndef COXPG_BASIS_HPP
#define COXPG_BASIS_HPP

#include <algorithm>
#include <string>
#include <vector>

#include "coxpg/types.hpp"

namespace coxpg {

/// Histogram partitions [s_{j-1}, s_j) of the (rescaled) time axis together with
/// the uncensored event count of each partition.
struct PartitionGrid {
    Vector knots;         ///< s_0 < s_1 < ... < s_J
    Vector event_counts;  ///< n_j (weighted when weights were supplied)
    int requested_partitions = 0;
    std::vector<std::string> warnings;

    Eigen::Index partitions() const { return knots.size() - 1; }
    double lower(Eigen::Index j) const { return knots[j]; }
    double upper(Eigen::Index j) const { return knots[j + 1]; }
    Vector half_widths() const {
        return 0.5 * (knots.tail(knots.size() - 1) - knots.head(knots.size() - 1));
    }
    Vector midpoints() const {
        return 0.5 * (knots.tail(knots.size() - 1) + knots.head(knots.size() - 1));
    }
};

/// Linear-interpolation sample quantile (R type 7) of already sorted values.
double sorted_quantile(const std::vector<double>& sorted, double p);

/// Interior knots at the k/J quantiles of the uncensored times; s_0 = 0 and
/// s_J is the largest time inflated by 1e-9 relative. Partitions left without
/// an event are merged into a neighbour (with a warning). Throws InputError
/// when there are fewer uncensored events than J.
PartitionGrid select_knots(const Vector& times, const Vector& events, int J);
PartitionGrid select_knots(const Vector& times, const Vector& events, const Vector& weights, int J);

/// Centered ramp bases z_j(t) = clamp(t, s_{j-1}, s_j) - (s_{j-1} + s_j) / 2.
template <typename Scalar>
VectorX<Scalar> eval_basis(const PartitionGrid& grid, Scalar t) {
    const Eigen::Index J = grid.partitions();
    VectorX<Scalar> z(J);
    for (Eigen::Index j = 0; j < J; ++j) {
        const Scalar lo = grid.lower(j), hi = grid.upper(j);
        z[j] = std::clamp(t, lo, hi) - (lo + hi) / Scalar(2);
    }
    return z;
}

/// Indicator row delta_j(t) = 1{s_{j-1} <= t < s_j}.
template <typename Scalar>
VectorX<Scalar> eval_deriv(const PartitionGrid& grid, Scalar t) {
    const Eigen::Index J = grid.partitions();
    VectorX<Scalar> d = VectorX<Scalar>::Zero(J);
    for (Eigen::Index j = 0; j < J; ++j) {
        if (grid.lower(j) <= t && t < grid.upper(j)) {
            d[j] = Scalar(1);
            break;
        }
    }
    return d;
}

/// Partition index containing t, or -1 outside [s_0, s_J).
Eigen::Index partition_of(const PartitionGrid& grid, double t);

/// N x J matrix of basis rows z(t_i).
Matrix basis_matrix(const PartitionGrid& grid, const Vector& t);
/// N x J 0/1 matrix of derivative rows delta(t_i).
Matrix deriv_matrix(const PartitionGrid& grid, const Vector& t);

/// n*_j = sum_i y_i delta_j(t_i) w_i.
Vector event_counts(const PartitionGrid& grid, const Vector& times, const Vector& events, const Vector& weights);
Vector event_counts(const PartitionGrid& grid, const Vector& times, const Vector& events);

}  // namespace coxpg

#endif  // COXPG_BASIS_HPP
