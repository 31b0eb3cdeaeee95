#include "coxpg/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace coxpg {

namespace {

std::string trim(std::string_view s) {
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return std::string(s);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(trim(std::string_view(line).substr(start)));
            break;
        }
        out.push_back(trim(std::string_view(line).substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const char* first = s.data();
    if (*first == '+') ++first;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

std::string row_msg(std::size_t row, const std::string& what) {
    return "row " + std::to_string(row) + ": " + what;
}

}  // namespace

bool SurvivalDataset::operator==(const SurvivalDataset& o) const {
    if (time.size() != o.time.size() || event.size() != o.event.size() || weight.size() != o.weight.size())
        return false;
    return time == o.time && event == o.event && covariates.rows() == o.covariates.rows() &&
           covariates.cols() == o.covariates.cols() && covariates == o.covariates &&
           covariate_names == o.covariate_names && weight == o.weight && cluster == o.cluster &&
           stratum == o.stratum && smooth == o.smooth;
}

void validate(const SurvivalDataset& d, bool allow_zero_weights) {
    const auto n = d.size();
    if (n == 0) throw InputError("dataset has no rows");
    if (d.event.size() != n || d.weight.size() != n || d.covariates.rows() != n)
        throw InputError("dataset columns have inconsistent lengths");
    if (static_cast<Eigen::Index>(d.covariate_names.size()) != d.covariates.cols())
        throw InputError("covariate names do not match covariate columns");
    if (d.has_clusters() && static_cast<Eigen::Index>(d.cluster.size()) != n)
        throw InputError("cluster column has the wrong length");
    if (d.has_strata() && static_cast<Eigen::Index>(d.stratum.size()) != n)
        throw InputError("stratum column has the wrong length");
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = static_cast<std::size_t>(i + 1);
        if (!std::isfinite(d.time[i]) || d.time[i] <= 0.0)
            throw InputError(row_msg(row, "time must be positive and finite"));
        if (d.event[i] != 0.0 && d.event[i] != 1.0) throw InputError(row_msg(row, "event must be 0 or 1"));
        const bool weight_ok = allow_zero_weights ? d.weight[i] >= 0.0 : d.weight[i] > 0.0;
        if (!std::isfinite(d.weight[i]) || !weight_ok) throw InputError(row_msg(row, "weight must be positive"));
        for (Eigen::Index p = 0; p < d.covariates.cols(); ++p)
            if (!std::isfinite(d.covariates(i, p)))
                throw InputError(row_msg(row, "covariate '" + d.covariate_names[p] + "' is not finite"));
    }
    for (const auto& s : d.smooth)
        if (s.values.size() != n) throw InputError("smooth column '" + s.name + "' has the wrong length");
    bool any_event = false;
    for (Eigen::Index i = 0; i < n; ++i) any_event = any_event || (d.event[i] == 1.0 && d.weight[i] > 0.0);
    if (!any_event) throw InputError("dataset has no uncensored events; the baseline hazard is unidentifiable");
}

SurvivalDataset subset_rows(const SurvivalDataset& d, const std::vector<Eigen::Index>& rows) {
    SurvivalDataset out;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.time.resize(n);
    out.event.resize(n);
    out.weight.resize(n);
    out.covariates.resize(n, d.covariates.cols());
    out.covariate_names = d.covariate_names;
    for (const auto& s : d.smooth) out.smooth.push_back({s.name, Vector(n)});
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto i = rows[static_cast<std::size_t>(k)];
        out.time[k] = d.time[i];
        out.event[k] = d.event[i];
        out.weight[k] = d.weight[i];
        out.covariates.row(k) = d.covariates.row(i);
        if (d.has_clusters()) out.cluster.push_back(d.cluster[static_cast<std::size_t>(i)]);
        if (d.has_strata()) out.stratum.push_back(d.stratum[static_cast<std::size_t>(i)]);
        for (std::size_t s = 0; s < d.smooth.size(); ++s) out.smooth[s].values[k] = d.smooth[s].values[i];
    }
    return out;
}

SurvivalDataset parse_csv(const std::string& text, const CsvSchema& schema) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InputError("CSV input is empty");
    const auto header = split_line(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (col.count(header[k])) throw InputError("duplicate CSV column '" + header[k] + "'");
        col[header[k]] = k;
    }
    auto require = [&](const std::string& name, const char* role) -> std::size_t {
        auto it = col.find(name);
        if (it == col.end()) throw InputError(std::string("missing required ") + role + " column '" + name + "'");
        return it->second;
    };
    auto optional_col = [&](const std::string& name, const char* role) -> std::optional<std::size_t> {
        if (name.empty()) return std::nullopt;
        return require(name, role);
    };

    const auto time_col = require(schema.time, "time");
    const auto event_col = require(schema.event, "event");
    const auto weight_col = optional_col(schema.weight, "weight");
    const auto cluster_col = optional_col(schema.cluster, "cluster");
    const auto stratum_col = optional_col(schema.stratum, "stratum");
    std::vector<std::size_t> smooth_cols;
    for (const auto& s : schema.smooth) smooth_cols.push_back(require(s, "smooth"));

    std::vector<std::string> cov_names;
    if (schema.covariates) {
        cov_names = *schema.covariates;
    } else {
        std::vector<std::string> bound = {schema.time, schema.event, schema.weight, schema.cluster, schema.stratum};
        bound.insert(bound.end(), schema.smooth.begin(), schema.smooth.end());
        for (const auto& h : header)
            if (std::find(bound.begin(), bound.end(), h) == bound.end()) cov_names.push_back(h);
    }
    std::vector<std::size_t> cov_cols;
    for (const auto& c : cov_names) cov_cols.push_back(require(c, "covariate"));

    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != header.size())
            throw InputError(row_msg(rows.size() + 1, "expected " + std::to_string(header.size()) + " fields, found " +
                                                          std::to_string(fields.size())));
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw InputError("CSV input has a header but no data rows");

    const auto n = static_cast<Eigen::Index>(rows.size());
    SurvivalDataset d;
    d.time.resize(n);
    d.event.resize(n);
    d.weight = Vector::Ones(n);
    d.covariates.resize(n, static_cast<Eigen::Index>(cov_cols.size()));
    d.covariate_names = cov_names;
    for (std::size_t s = 0; s < smooth_cols.size(); ++s) d.smooth.push_back({schema.smooth[s], Vector(n)});

    auto number = [&](std::size_t r, std::size_t c, const std::string& what) {
        const auto v = parse_double(rows[r][c]);
        if (!v) throw InputError(row_msg(r + 1, what + " value '" + rows[r][c] + "' is not numeric"));
        return *v;
    };
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto i = static_cast<Eigen::Index>(r);
        d.time[i] = number(r, time_col, "time");
        if (!(d.time[i] > 0.0) || !std::isfinite(d.time[i]))
            throw InputError(row_msg(r + 1, "time must be positive and finite"));
        const double e = number(r, event_col, "event");
        if (e != 0.0 && e != 1.0) throw InputError(row_msg(r + 1, "event value '" + rows[r][event_col] + "' is not 0 or 1"));
        d.event[i] = e;
        if (weight_col) {
            d.weight[i] = number(r, *weight_col, "weight");
            if (!(d.weight[i] > 0.0) || !std::isfinite(d.weight[i]))
                throw InputError(row_msg(r + 1, "weight must be positive"));
        }
        for (std::size_t p = 0; p < cov_cols.size(); ++p)
            d.covariates(i, static_cast<Eigen::Index>(p)) = number(r, cov_cols[p], "covariate '" + cov_names[p] + "'");
        for (std::size_t s = 0; s < smooth_cols.size(); ++s)
            d.smooth[s].values[i] = number(r, smooth_cols[s], "smooth '" + schema.smooth[s] + "'");
        if (cluster_col) d.cluster.push_back(rows[r][*cluster_col]);
        if (stratum_col) d.stratum.push_back(rows[r][*stratum_col]);
    }
    validate(d);
    return d;
}

SurvivalDataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open data file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), schema);
}

std::pair<SurvivalDataset, TimeTransform> rescale_times(const SurvivalDataset& data) {
    TimeTransform tf;
    tf.t_max = data.time.maxCoeff();
    tf.scale = 0.5 / tf.t_max;
    SurvivalDataset out = data;
    out.time = tf.forward(data.time);
    // Pin the maximum exactly; 0.5 / t_max * t_max can be off by an ulp.
    for (Eigen::Index i = 0; i < out.time.size(); ++i)
        if (data.time[i] == tf.t_max) out.time[i] = 0.5;
    return {std::move(out), tf};
}

double ModelSpec::eta_epsilon() const { return -std::log(epsilon); }

void validate(const ModelSpec& s, const std::vector<int>& random_effect_sizes) {
    if (!(s.epsilon > 0.0) || !std::isfinite(s.epsilon)) throw InputError("epsilon must be positive");
    if (s.J < 1) throw InputError("J must be at least 1");
    if (!(s.tau0 > 0.0)) throw InputError("tau0 must be positive");
    if (!(s.b0 > 0.0)) throw InputError("b0 must be positive");
    if (!(s.a0 > 0.0)) throw InputError("a0 must be positive");
    if (!(s.u_alpha_plus > 0.0) || !std::isfinite(s.u_alpha_plus))
        throw InputError("u_alpha_plus must be positive and finite");
    if (!(s.prior_variance > 0.0)) throw InputError("prior variance must be positive");
    for (int m : random_effect_sizes)
        if (s.a0 + m / 2.0 < 1.0)
            throw InputError("a0 + M/2 must be at least 1 for every random-effect block (M = " + std::to_string(m) + ")");
    if (s.draws < 1 || s.burnin < 0 || s.thin < 1 || s.burnin >= s.draws)
        throw InputError("need draws > burnin >= 0 and thin >= 1");
    if (s.tn_sweeps < 1) throw InputError("tn_sweeps must be at least 1");
    if (s.smooth_basis < 1) throw InputError("smooth basis size must be at least 1");
}

nlohmann::json to_json(const ModelSpec& s) {
    nlohmann::json j;
    j["J"] = s.J;
    j["epsilon"] = s.epsilon;
    j["mh_calibration"] = s.mh_calibration;
    j["intercept"] = s.intercept;
    j["prior_variance"] = s.prior_variance;
    if (s.prior_cov) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < s.prior_cov->rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(s.prior_cov->cols()));
            for (Eigen::Index c = 0; c < s.prior_cov->cols(); ++c) row[static_cast<std::size_t>(c)] = (*s.prior_cov)(r, c);
            rows.push_back(row);
        }
        j["prior_cov"] = rows;
    } else {
        j["prior_cov"] = nullptr;
    }
    if (s.prior_mean)
        j["prior_mean"] = std::vector<double>(s.prior_mean->data(), s.prior_mean->data() + s.prior_mean->size());
    else
        j["prior_mean"] = nullptr;
    j["a0"] = s.a0;
    j["b0"] = s.b0;
    j["tau0"] = s.tau0;
    j["u_alpha_plus"] = s.u_alpha_plus;
    j["draws"] = s.draws;
    j["burnin"] = s.burnin;
    j["thin"] = s.thin;
    j["seed"] = s.seed;
    j["tn_sweeps"] = s.tn_sweeps;
    j["pg_exact_cutoff"] = s.pg_exact_cutoff;
    j["smooth_basis"] = s.smooth_basis;
    j["newton_iterations"] = s.newton_iterations;
    return j;
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
    ModelSpec s;
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("J", s.J);
        get("epsilon", s.epsilon);
        get("mh_calibration", s.mh_calibration);
        get("intercept", s.intercept);
        get("prior_variance", s.prior_variance);
        get("a0", s.a0);
        get("b0", s.b0);
        get("tau0", s.tau0);
        get("u_alpha_plus", s.u_alpha_plus);
        get("draws", s.draws);
        get("burnin", s.burnin);
        get("thin", s.thin);
        get("seed", s.seed);
        get("tn_sweeps", s.tn_sweeps);
        get("pg_exact_cutoff", s.pg_exact_cutoff);
        get("smooth_basis", s.smooth_basis);
        get("newton_iterations", s.newton_iterations);
        if (j.contains("prior_mean") && !j.at("prior_mean").is_null()) {
            const auto v = j.at("prior_mean").get<std::vector<double>>();
            s.prior_mean = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
        }
        if (j.contains("prior_cov") && !j.at("prior_cov").is_null()) {
            const auto rows = j.at("prior_cov").get<std::vector<std::vector<double>>>();
            Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (static_cast<Eigen::Index>(rows[r].size()) != m.cols()) throw InputError("prior_cov rows differ in length");
                for (std::size_t c = 0; c < rows[r].size(); ++c)
                    m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
            }
            s.prior_cov = m;
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("invalid model configuration: ") + e.what());
    }
    return s;
}

}  // namespace coxpg
