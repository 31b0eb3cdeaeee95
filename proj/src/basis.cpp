#include "coxpg/basis.hpp"

#include <cmath>

namespace coxpg {

double sorted_quantile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw InputError("quantile of an empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Eigen::Index partition_of(const PartitionGrid& grid, double t) {
    const Eigen::Index J = grid.partitions();
    if (t < grid.knots[0] || t >= grid.knots[J]) return -1;
    // upper_bound over the interior knots
    const double* first = grid.knots.data() + 1;
    const double* last = grid.knots.data() + J;
    return static_cast<Eigen::Index>(std::upper_bound(first, last, t) - first);
}

Vector event_counts(const PartitionGrid& grid, const Vector& times, const Vector& events, const Vector& weights) {
    Vector n = Vector::Zero(grid.partitions());
    for (Eigen::Index i = 0; i < times.size(); ++i) {
        if (events[i] == 0.0) continue;
        const auto j = partition_of(grid, times[i]);
        if (j >= 0) n[j] += events[i] * weights[i];
    }
    return n;
}

Vector event_counts(const PartitionGrid& grid, const Vector& times, const Vector& events) {
    return event_counts(grid, times, events, Vector::Ones(times.size()));
}

PartitionGrid select_knots(const Vector& times, const Vector& events, int J) {
    return select_knots(times, events, Vector::Ones(times.size()), J);
}

PartitionGrid select_knots(const Vector& times, const Vector& events, const Vector& weights, int J) {
    if (J < 1) throw InputError("number of partitions J must be at least 1");
    std::vector<double> death_times;
    for (Eigen::Index i = 0; i < times.size(); ++i)
        if (events[i] == 1.0 && weights[i] > 0.0) death_times.push_back(times[i]);
    if (static_cast<int>(death_times.size()) < J)
        throw InputError("only " + std::to_string(death_times.size()) + " uncensored events for J = " +
                         std::to_string(J) + " partitions; choose a smaller J");
    std::sort(death_times.begin(), death_times.end());

    std::vector<double> knots{0.0};
    for (int k = 1; k < J; ++k) knots.push_back(sorted_quantile(death_times, static_cast<double>(k) / J));
    knots.push_back(times.maxCoeff() * (1.0 + 1e-9));

    PartitionGrid grid;
    grid.requested_partitions = J;
    auto counts_for = [&](const std::vector<double>& k) {
        PartitionGrid g;
        g.knots = Eigen::Map<const Vector>(k.data(), static_cast<Eigen::Index>(k.size()));
        return event_counts(g, times, events, weights);
    };

    // Repeatedly drop the knot that closes the first empty (or zero-width)
    // partition: the empty partition is absorbed by its left neighbour, or by
    // its right neighbour when it is the first one.
    for (;;) {
        Vector n = counts_for(knots);
        Eigen::Index empty = -1;
        for (Eigen::Index j = 0; j < n.size(); ++j) {
            const bool degenerate = !(knots[static_cast<std::size_t>(j) + 1] > knots[static_cast<std::size_t>(j)]);
            if (n[j] <= 0.0 || degenerate) {
                empty = j;
                break;
            }
        }
        if (empty < 0) {
            grid.knots = Eigen::Map<const Vector>(knots.data(), static_cast<Eigen::Index>(knots.size()));
            grid.event_counts = n;
            break;
        }
        const auto e = static_cast<std::size_t>(empty);
        if (e == 0)
            knots.erase(knots.begin() + 1);
        else
            knots.erase(knots.begin() + static_cast<std::ptrdiff_t>(e));
    }
    if (grid.partitions() < J)
        grid.warnings.push_back("merged partitions with no uncensored events: J reduced from " + std::to_string(J) +
                                " to " + std::to_string(grid.partitions()));
    return grid;
}

Matrix basis_matrix(const PartitionGrid& grid, const Vector& t) {
    Matrix z(t.size(), grid.partitions());
    for (Eigen::Index i = 0; i < t.size(); ++i) z.row(i) = eval_basis(grid, t[i]).transpose();
    return z;
}

Matrix deriv_matrix(const PartitionGrid& grid, const Vector& t) {
    Matrix d(t.size(), grid.partitions());
    for (Eigen::Index i = 0; i < t.size(); ++i) d.row(i) = eval_deriv(grid, t[i]).transpose();
    return d;
}

}  // namespace coxpg
