#ifndef COXPG_DESIGN_HPP
#define COXPG_DESIGN_HPP

#include <string>
#include <vector>

#include "json.hpp"

#include "coxpg/basis.hpp"
#include "coxpg/data_io.hpp"
#include "coxpg/samplers.hpp"

namespace coxpg {

/// Penalized-spline smooth of one variable: a linear fixed-effect column plus
/// Demmler-Reinsch oscillation columns whose penalty is the identity.
struct SmoothTerm {
    std::string name;
    double x_min = 0.0;
    double x_range = 1.0;
    double linear_center = 0.0;  ///< mean of the scaled x over the fitting rows
    Vector knots;                ///< full clamped cubic knot vector on [0, 1]
    Matrix transform;            ///< (K + 2) x K map from B-spline to oscillation coordinates
    Vector linear;               ///< N linear column
    Matrix oscillation;          ///< N x K

    Eigen::Index size() const { return transform.cols(); }
    /// Linear column value at new x.
    double eval_linear(double x) const;
    /// Oscillation row at new x (x is clamped into the fitted range).
    Vector eval_oscillation(double x) const;
};

/// Cubic B-spline basis (all basis functions) at x on a clamped knot vector.
Vector bspline_row(const Vector& knots, double x);
/// Second derivatives of the same basis functions.
Vector bspline_row_d2(const Vector& knots, double x);
/// Exact integral of B''(x) B''(x)' over the knot span.
Matrix bspline_penalty(const Vector& knots);

/// Builds the smooth for column x with K oscillation columns. Throws InputError
/// when x has fewer than K + 4 distinct values.
SmoothTerm build_dr_smooth(const std::string& name, const Vector& x, int K);

/// A random-effect block of eta with its own precision tau.
struct RandomEffectBlock {
    std::string name;
    Eigen::Index offset = 0;  ///< first column of the block within eta
    Eigen::Index size = 0;
};

/// Full linear system for eta = (u_alpha | beta | u_B) with prior and bounds.
struct DesignSystem {
    Matrix M;                 ///< N x D, columns ordered (Z_alpha | X | Z_B)
    Matrix Z_alpha_deriv;     ///< N x J_total indicators delta_j(t_i)
    Vector y;
    Vector w;
    Vector time;              ///< rescaled times
    Vector n_alpha;           ///< weighted event counts per u_alpha coordinate

    Eigen::Index J_total = 0;
    Eigen::Index P = 0;
    Eigen::Index M_random = 0;

    std::vector<std::string> strata;          ///< sorted stratum levels; one unnamed level when unstratified
    std::vector<int> row_stratum;             ///< stratum index per row
    std::vector<PartitionGrid> grids;         ///< one per stratum
    std::vector<Eigen::Index> alpha_offset;   ///< first u_alpha column per stratum
    std::vector<Eigen::Index> intercept_col;  ///< intercept column per stratum, -1 when absent
    std::vector<std::string> clusters;        ///< sorted cluster levels
    std::vector<std::string> covariate_names;
    std::vector<SmoothTerm> smooths;
    std::vector<Eigen::Index> smooth_linear_col;
    std::vector<RandomEffectBlock> blocks;
    std::vector<std::string> coef_names;

    Matrix fixed_precision;   ///< Sigma_0^{-1} over (u_alpha | beta)
    Vector prior_mean;        ///< b over all of eta (zero on u_B)
    Vector u_plus;            ///< upper bounds on u_alpha
    TimeTransform transform;
    double eta_epsilon = 0.0;

    Eigen::Index dim() const { return M.cols(); }
    Eigen::Index rows() const { return M.rows(); }
    Eigen::Index fixed_dim() const { return J_total + P; }

    auto Z_alpha() const { return M.leftCols(J_total); }
    auto X() const { return M.middleCols(J_total, P); }
    auto Z_B() const { return M.rightCols(M_random); }

    /// A(tau) = Sigma_0^{-1} (+) tau_1 I (+) tau_2 I ...
    Matrix prior_precision(const Vector& tau) const;
    /// Box with lower = v on u_alpha, upper = u_plus; other coordinates unbounded.
    ConstraintBox bounds(const Vector& v) const;
    std::vector<int> block_sizes() const;

    nlohmann::json describe() const;
};

/// Knot grids: one per sorted stratum level, each from its own rows.
std::vector<PartitionGrid> select_grids(const SurvivalDataset& rescaled, const ModelSpec& spec);

/// Assembles the design from rescaled data and per-stratum grids.
DesignSystem assemble(const SurvivalDataset& rescaled, const std::vector<PartitionGrid>& grids, const ModelSpec& spec,
                      const TimeTransform& transform = {});

/// Rescales times, selects knots, and assembles.
DesignSystem build_design(const SurvivalDataset& data, const ModelSpec& spec);

/// Concatenates current and historical rows; historical weights become a * w.
SurvivalDataset apply_power_prior(const SurvivalDataset& current, const SurvivalDataset& historical, double a);

}  // namespace coxpg

#endif  // COXPG_DESIGN_HPP
