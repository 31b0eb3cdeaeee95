#include "coxpg/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace coxpg {

namespace {

constexpr int kDegree = 3;

double safe_div(double num, double den) { return den > 0.0 ? num / den : 0.0; }

// Degree-`d` B-spline values N_{i,d}(x), i = 0 .. m - d - 1, for knots t_0..t_m.
Vector bspline_degree(const Vector& t, int d, double x) {
    const Eigen::Index m = t.size() - 1;
    Vector n = Vector::Zero(m);
    // Span containing x; the right end belongs to the last nonempty span.
    Eigen::Index span = -1;
    for (Eigen::Index i = 0; i < m; ++i)
        if (t[i] <= x && x < t[i + 1]) span = i;
    if (span < 0 && x >= t[m]) {
        for (Eigen::Index i = m - 1; i >= 0; --i)
            if (t[i] < t[i + 1]) {
                span = i;
                break;
            }
    }
    if (span < 0) return Vector::Zero(m - d);
    n[span] = 1.0;
    for (int k = 1; k <= d; ++k) {
        Vector next = Vector::Zero(m - k);
        for (Eigen::Index i = 0; i < m - k; ++i)
            next[i] = safe_div(x - t[i], t[i + k] - t[i]) * n[i] +
                      safe_div(t[i + k + 1] - x, t[i + k + 1] - t[i + 1]) * n[i + 1];
        n = std::move(next);
    }
    return n;
}

std::vector<std::string> sorted_levels(const std::vector<std::string>& labels) {
    std::set<std::string> s(labels.begin(), labels.end());
    return {s.begin(), s.end()};
}

}  // namespace

Vector bspline_row(const Vector& knots, double x) { return bspline_degree(knots, kDegree, x); }

Vector bspline_row_d2(const Vector& t, double x) {
    const Vector n1 = bspline_degree(t, 1, x);
    const Eigen::Index nb = t.size() - 1 - kDegree;
    Vector d2(nb);
    for (Eigen::Index i = 0; i < nb; ++i) {
        const double left = safe_div(n1[i], t[i + 2] - t[i]) - safe_div(n1[i + 1], t[i + 3] - t[i + 1]);
        const double right = safe_div(n1[i + 1], t[i + 3] - t[i + 1]) - safe_div(n1[i + 2], t[i + 4] - t[i + 2]);
        d2[i] = 6.0 * (safe_div(left, t[i + 3] - t[i]) - safe_div(right, t[i + 4] - t[i + 1]));
    }
    return d2;
}

Matrix bspline_penalty(const Vector& t) {
    const Eigen::Index nb = t.size() - 1 - kDegree;
    Matrix omega = Matrix::Zero(nb, nb);
    // B'' is linear on each span, so two-point Gauss-Legendre is exact.
    const double g = 1.0 / std::sqrt(3.0);
    for (Eigen::Index i = 0; i + 1 < t.size(); ++i) {
        const double a = t[i], b = t[i + 1];
        if (!(b > a)) continue;
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (double s : {-g, g}) {
            const Vector d2 = bspline_row_d2(t, mid + s * half);
            omega.noalias() += half * d2 * d2.transpose();
        }
    }
    return omega;
}

double SmoothTerm::eval_linear(double x) const { return (x - x_min) / x_range - linear_center; }

Vector SmoothTerm::eval_oscillation(double x) const {
    const double s = std::clamp((x - x_min) / x_range, 0.0, 1.0);
    return transform.transpose() * bspline_row(knots, s);
}

SmoothTerm build_dr_smooth(const std::string& name, const Vector& x, int K) {
    if (K < 2) throw InputError("smooth '" + name + "': basis size must be at least 2");
    std::vector<double> sorted(x.data(), x.data() + x.size());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    if (static_cast<int>(sorted.size()) < K + 4)
        throw InputError("smooth '" + name + "' needs at least " + std::to_string(K + 4) + " distinct values, found " +
                         std::to_string(sorted.size()));

    SmoothTerm st;
    st.name = name;
    st.x_min = sorted.front();
    st.x_range = sorted.back() - sorted.front();
    const Vector s = (x.array() - st.x_min) / st.x_range;
    std::vector<double> scaled_unique;
    for (double v : sorted) scaled_unique.push_back((v - st.x_min) / st.x_range);

    // K + 2 cubic B-splines: K - 2 interior knots at quantiles of the distinct values.
    const int interior = K - 2;
    st.knots.resize(interior + 2 * (kDegree + 1));
    for (int k = 0; k <= kDegree; ++k) {
        st.knots[k] = 0.0;
        st.knots[st.knots.size() - 1 - k] = 1.0;
    }
    for (int k = 1; k <= interior; ++k)
        st.knots[kDegree + k] = sorted_quantile(scaled_unique, static_cast<double>(k) / (interior + 1));

    const Eigen::Index n = x.size(), nb = K + 2;
    Matrix B(n, nb);
    for (Eigen::Index i = 0; i < n; ++i) B.row(i) = bspline_row(st.knots, s[i]).transpose();

    Eigen::LLT<Matrix> gram(B.transpose() * B);
    if (gram.info() != Eigen::Success) throw InputError("smooth '" + name + "': B-spline Gram matrix is singular");
    const Matrix R = gram.matrixU();
    const Matrix R_inv = R.triangularView<Eigen::Upper>().solve(Matrix::Identity(nb, nb));
    const Matrix C = R_inv.transpose() * bspline_penalty(st.knots) * R_inv;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (C + C.transpose()));
    if (eig.info() != Eigen::Success) throw NumericalError("smooth '" + name + "': eigendecomposition failed");

    // Eigenvalues ascend; the first two span the constant and linear null space.
    const Vector s_plus = eig.eigenvalues().tail(K);
    const Matrix U_plus = eig.eigenvectors().rightCols(K);
    st.transform = R_inv * U_plus * s_plus.cwiseInverse().cwiseSqrt().asDiagonal();
    st.oscillation = B * st.transform;
    st.linear_center = s.mean();
    st.linear = s.array() - st.linear_center;
    return st;
}

// ---------------------------------------------------------------------------

Matrix DesignSystem::prior_precision(const Vector& tau) const {
    const Eigen::Index d = dim(), f = fixed_dim();
    Matrix A = Matrix::Zero(d, d);
    A.topLeftCorner(f, f) = fixed_precision;
    for (std::size_t b = 0; b < blocks.size(); ++b)
        A.diagonal().segment(blocks[b].offset, blocks[b].size).setConstant(tau[static_cast<Eigen::Index>(b)]);
    return A;
}

ConstraintBox DesignSystem::bounds(const Vector& v) const {
    ConstraintBox box = ConstraintBox::unbounded(dim());
    for (Eigen::Index j = 0; j < J_total; ++j) {
        box.lower[j] = std::max(v[j], std::numeric_limits<double>::min());
        box.upper[j] = u_plus[j];
    }
    return box;
}

std::vector<int> DesignSystem::block_sizes() const {
    std::vector<int> out;
    for (const auto& b : blocks) out.push_back(static_cast<int>(b.size));
    return out;
}

nlohmann::json DesignSystem::describe() const {
    nlohmann::json j;
    j["rows"] = rows();
    j["columns"] = dim();
    j["J_total"] = J_total;
    j["P"] = P;
    j["M"] = M_random;
    j["eta_epsilon"] = eta_epsilon;
    j["t_max"] = transform.t_max;
    j["coefficients"] = coef_names;
    nlohmann::json strata_json = nlohmann::json::array();
    for (std::size_t s = 0; s < strata.size(); ++s) {
        nlohmann::json e;
        e["label"] = strata[s];
        e["alpha_offset"] = alpha_offset[s];
        e["partitions"] = grids[s].partitions();
        e["knots"] = std::vector<double>(grids[s].knots.data(), grids[s].knots.data() + grids[s].knots.size());
        e["event_counts"] =
            std::vector<double>(grids[s].event_counts.data(), grids[s].event_counts.data() + grids[s].event_counts.size());
        e["intercept_col"] = intercept_col[s];
        strata_json.push_back(e);
    }
    j["strata"] = strata_json;
    nlohmann::json blocks_json = nlohmann::json::array();
    for (const auto& b : blocks) blocks_json.push_back({{"name", b.name}, {"offset", b.offset}, {"size", b.size}});
    j["random_effect_blocks"] = blocks_json;
    return j;
}

std::vector<PartitionGrid> select_grids(const SurvivalDataset& data, const ModelSpec& spec) {
    std::vector<PartitionGrid> grids;
    if (!data.has_strata()) {
        grids.push_back(select_knots(data.time, data.event, data.weight, spec.J));
        return grids;
    }
    for (const auto& level : sorted_levels(data.stratum)) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < data.size(); ++i)
            if (data.stratum[static_cast<std::size_t>(i)] == level) rows.push_back(i);
        const auto sub = subset_rows(data, rows);
        try {
            grids.push_back(select_knots(sub.time, sub.event, sub.weight, spec.J));
        } catch (const InputError& e) {
            throw InputError("stratum '" + level + "': " + e.what());
        }
    }
    return grids;
}

DesignSystem assemble(const SurvivalDataset& data, const std::vector<PartitionGrid>& grids, const ModelSpec& spec,
                      const TimeTransform& transform) {
    const Eigen::Index n = data.size();
    DesignSystem ds;
    ds.strata = data.has_strata() ? sorted_levels(data.stratum) : std::vector<std::string>{""};
    if (grids.size() != ds.strata.size())
        throw InputError("expected " + std::to_string(ds.strata.size()) + " knot grids, got " +
                         std::to_string(grids.size()));
    ds.grids = grids;
    ds.transform = transform;
    ds.eta_epsilon = spec.eta_epsilon();
    ds.y = data.event;
    ds.w = data.weight;
    ds.time = data.time;
    ds.covariate_names = data.covariate_names;

    std::map<std::string, int> stratum_index;
    for (std::size_t s = 0; s < ds.strata.size(); ++s) stratum_index[ds.strata[s]] = static_cast<int>(s);
    ds.row_stratum.resize(static_cast<std::size_t>(n), 0);
    if (data.has_strata())
        for (Eigen::Index i = 0; i < n; ++i) {
            auto it = stratum_index.find(data.stratum[static_cast<std::size_t>(i)]);
            if (it == stratum_index.end())
                throw InputError("row " + std::to_string(i + 1) + ": unknown stratum '" +
                                 data.stratum[static_cast<std::size_t>(i)] + "'");
            ds.row_stratum[static_cast<std::size_t>(i)] = it->second;
        }

    const bool multi = ds.strata.size() > 1;
    auto suffix = [&](std::size_t s) { return multi ? "[" + ds.strata[s] + "]" : std::string(); };

    for (std::size_t s = 0; s < grids.size(); ++s) {
        ds.alpha_offset.push_back(ds.J_total);
        for (Eigen::Index j = 0; j < grids[s].partitions(); ++j)
            ds.coef_names.push_back("u_alpha" + suffix(s) + "_" + std::to_string(j + 1));
        ds.J_total += grids[s].partitions();
    }

    std::vector<SmoothTerm> smooths;
    for (const auto& col : data.smooth) smooths.push_back(build_dr_smooth(col.name, col.values, spec.smooth_basis));

    const Eigen::Index n_intercepts = spec.intercept ? static_cast<Eigen::Index>(ds.strata.size()) : 0;
    ds.P = n_intercepts + data.num_covariates() + static_cast<Eigen::Index>(smooths.size());
    ds.clusters = data.has_clusters() ? sorted_levels(data.cluster) : std::vector<std::string>{};
    const auto n_clusters = static_cast<Eigen::Index>(ds.clusters.size());
    ds.M_random = n_clusters;
    for (const auto& st : smooths) ds.M_random += st.size();

    const Eigen::Index d = ds.J_total + ds.P + ds.M_random;
    ds.M = Matrix::Zero(n, d);
    ds.Z_alpha_deriv = Matrix::Zero(n, ds.J_total);

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto s = static_cast<std::size_t>(ds.row_stratum[static_cast<std::size_t>(i)]);
        const auto& g = grids[s];
        const double t = data.time[i];
        if (partition_of(g, t) < 0)
            throw InputError("row " + std::to_string(i + 1) + ": time " + std::to_string(t) +
                             " lies outside the knot grid");
        ds.M.row(i).segment(ds.alpha_offset[s], g.partitions()) = eval_basis(g, t).transpose();
        ds.Z_alpha_deriv.row(i).segment(ds.alpha_offset[s], g.partitions()) = eval_deriv(g, t).transpose();
    }

    Eigen::Index col = ds.J_total;
    for (std::size_t s = 0; s < ds.strata.size(); ++s) {
        if (!spec.intercept) {
            ds.intercept_col.push_back(-1);
            continue;
        }
        ds.intercept_col.push_back(col);
        for (Eigen::Index i = 0; i < n; ++i)
            if (ds.row_stratum[static_cast<std::size_t>(i)] == static_cast<int>(s)) ds.M(i, col) = 1.0;
        ds.coef_names.push_back("(Intercept)" + suffix(s));
        ++col;
    }
    for (Eigen::Index p = 0; p < data.num_covariates(); ++p) {
        ds.M.col(col) = data.covariates.col(p);
        ds.coef_names.push_back(data.covariate_names[static_cast<std::size_t>(p)]);
        ++col;
    }
    for (const auto& st : smooths) {
        ds.smooth_linear_col.push_back(col);
        ds.M.col(col) = st.linear;
        ds.coef_names.push_back("s(" + st.name + "):linear");
        ++col;
    }

    if (n_clusters > 0) {
        std::map<std::string, Eigen::Index> cluster_index;
        for (Eigen::Index k = 0; k < n_clusters; ++k) cluster_index[ds.clusters[static_cast<std::size_t>(k)]] = k;
        for (Eigen::Index i = 0; i < n; ++i)
            ds.M(i, col + cluster_index[data.cluster[static_cast<std::size_t>(i)]]) = 1.0;
        for (const auto& c : ds.clusters) ds.coef_names.push_back("b[" + c + "]");
        ds.blocks.push_back({"frailty", col, n_clusters});
        col += n_clusters;
    }
    for (const auto& st : smooths) {
        ds.M.middleCols(col, st.size()) = st.oscillation;
        for (Eigen::Index k = 0; k < st.size(); ++k) ds.coef_names.push_back("s(" + st.name + "):" + std::to_string(k + 1));
        ds.blocks.push_back({"s(" + st.name + ")", col, st.size()});
        col += st.size();
    }
    ds.smooths = std::move(smooths);

    ds.n_alpha = ds.Z_alpha_deriv.transpose() * (ds.y.array() * ds.w.array()).matrix();

    const Eigen::Index f = ds.fixed_dim();
    if (spec.prior_cov) {
        if (spec.prior_cov->rows() != f || spec.prior_cov->cols() != f)
            throw InputError("prior covariance must be " + std::to_string(f) + " x " + std::to_string(f));
        Eigen::LLT<Matrix> llt(*spec.prior_cov);
        if (llt.info() != Eigen::Success) throw InputError("prior covariance is not positive definite");
        ds.fixed_precision = llt.solve(Matrix::Identity(f, f));
    } else {
        ds.fixed_precision = Matrix::Identity(f, f) / spec.prior_variance;
    }
    ds.prior_mean = Vector::Zero(d);
    if (spec.prior_mean) {
        if (spec.prior_mean->size() != f) throw InputError("prior mean must have length " + std::to_string(f));
        ds.prior_mean.head(f) = *spec.prior_mean;
    }
    ds.u_plus = Vector::Constant(ds.J_total, spec.u_alpha_plus);
    return ds;
}

DesignSystem build_design(const SurvivalDataset& data, const ModelSpec& spec) {
    validate(data, /*allow_zero_weights=*/true);
    const auto [rescaled, tf] = rescale_times(data);
    const auto grids = select_grids(rescaled, spec);
    auto ds = assemble(rescaled, grids, spec, tf);
    validate(spec, ds.block_sizes());
    return ds;
}

SurvivalDataset apply_power_prior(const SurvivalDataset& current, const SurvivalDataset& historical, double a) {
    if (!(a >= 0.0 && a <= 1.0)) throw InputError("power prior exponent a must lie in [0, 1]");
    if (current.covariate_names != historical.covariate_names)
        throw InputError("historical covariates do not match the current data");
    if (current.has_clusters() != historical.has_clusters() || current.has_strata() != historical.has_strata())
        throw InputError("historical cluster/stratum columns do not match the current data");
    if (current.smooth.size() != historical.smooth.size())
        throw InputError("historical smooth columns do not match the current data");
    for (std::size_t s = 0; s < current.smooth.size(); ++s)
        if (current.smooth[s].name != historical.smooth[s].name)
            throw InputError("historical smooth columns do not match the current data");

    const Eigen::Index nc = current.size(), nh = historical.size();
    SurvivalDataset out;
    out.time.resize(nc + nh);
    out.time << current.time, historical.time;
    out.event.resize(nc + nh);
    out.event << current.event, historical.event;
    out.weight.resize(nc + nh);
    out.weight << current.weight, a * historical.weight;
    out.covariates.resize(nc + nh, current.num_covariates());
    if (current.num_covariates() > 0) out.covariates << current.covariates, historical.covariates;
    out.covariate_names = current.covariate_names;
    out.cluster = current.cluster;
    out.cluster.insert(out.cluster.end(), historical.cluster.begin(), historical.cluster.end());
    out.stratum = current.stratum;
    out.stratum.insert(out.stratum.end(), historical.stratum.begin(), historical.stratum.end());
    for (std::size_t s = 0; s < current.smooth.size(); ++s) {
        Vector v(nc + nh);
        v << current.smooth[s].values, historical.smooth[s].values;
        out.smooth.push_back({current.smooth[s].name, v});
    }
    validate(out, /*allow_zero_weights=*/true);
    return out;
}

}  // namespace coxpg
