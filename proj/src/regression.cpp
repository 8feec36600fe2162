#include "mwspill/regression.hpp"

#include "mwspill/error.hpp"
#include "mwspill/inference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <unordered_map>

namespace mwspill {

Transform parse_transform(const std::string& s) {
    if (s == "levels") return Transform::levels;
    if (s == "first_difference" || s == "fd") return Transform::first_difference;
    throw Error("invalid_spec", "unknown transform '" + s + "'");
}

FixedEffect parse_fixed_effect(const std::string& s) {
    if (s == "time") return FixedEffect::time;
    if (s == "zip") return FixedEffect::zip;
    if (s == "time_county") return FixedEffect::time_county;
    if (s == "time_cbsa") return FixedEffect::time_cbsa;
    if (s == "time_state") return FixedEffect::time_state;
    if (s == "time_event") return FixedEffect::time_event;
    if (s == "time_entry_cohort") return FixedEffect::time_entry_cohort;
    throw Error("invalid_spec", "unknown fixed effect '" + s + "'");
}

ClusterDim parse_cluster(const std::string& s) {
    if (s == "state") return ClusterDim::state;
    if (s == "zip") return ClusterDim::zip;
    if (s == "county") return ClusterDim::county;
    if (s == "cbsa") return ClusterDim::cbsa;
    if (s == "none") return ClusterDim::none;
    throw Error("invalid_spec", "unknown cluster dimension '" + s + "'");
}

FeMethod parse_fe_method(const std::string& s) {
    if (s == "auto" || s == "automatic") return FeMethod::automatic;
    if (s == "demean") return FeMethod::demean;
    if (s == "dummies") return FeMethod::dummies;
    throw Error("invalid_spec", "unknown fixed-effect method '" + s + "'");
}

std::string to_string(Transform t) {
    return t == Transform::levels ? "levels" : "first_difference";
}

std::string to_string(FixedEffect fe) {
    switch (fe) {
        case FixedEffect::time: return "time";
        case FixedEffect::zip: return "zip";
        case FixedEffect::time_county: return "time_county";
        case FixedEffect::time_cbsa: return "time_cbsa";
        case FixedEffect::time_state: return "time_state";
        case FixedEffect::time_event: return "time_event";
        case FixedEffect::time_entry_cohort: return "time_entry_cohort";
    }
    return "time";
}

std::string to_string(ClusterDim c) {
    switch (c) {
        case ClusterDim::state: return "state";
        case ClusterDim::zip: return "zip";
        case ClusterDim::county: return "county";
        case ClusterDim::cbsa: return "cbsa";
        case ClusterDim::none: return "none";
    }
    return "state";
}

void RegressionSpec::validate() const {
    if (res_window < 0 || wkp_window < 0) throw Error("invalid_spec", "lead/lag windows must be >= 0");
    if (iv && !lagged_dep) throw Error("invalid_spec", "an IV spec requires lagged_dep");
    if (iv && iv_instrument_lag < 1) throw Error("invalid_spec", "instrument lag must be >= 1");
    if (!include_res && !include_wkp && controls.empty() && !lagged_dep) {
        throw Error("invalid_spec", "spec has no regressors");
    }
    if (!interactions.empty() && !include_res && !include_wkp) {
        throw Error("invalid_spec", "interactions need at least one MW measure");
    }
}

std::string measure_term_name(const std::string& measure, int event_time) {
    if (event_time == 0) return measure;
    if (event_time < 0) return measure + "_lead" + std::to_string(-event_time);
    return measure + "_lag" + std::to_string(event_time);
}

Eigen::Index RegressionResult::index_of(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error("unknown_coefficient", "no coefficient named '" + name + "'");
    return static_cast<Eigen::Index>(it - names.begin());
}

bool RegressionResult::has(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
}

double RegressionResult::coefficient(const std::string& name) const {
    return coef(index_of(name));
}

double RegressionResult::se(const std::string& name) const {
    const auto k = index_of(name);
    return std::sqrt(std::max(0.0, vcov(k, k)));
}

namespace {

bool finite(double v) { return std::isfinite(v); }

// Dense integer codes for string keys, assigned in sorted key order.
class Coder {
public:
    void add(const std::string& key) { keys_.emplace(key, 0); }
    void freeze() {
        int next = 0;
        for (auto& [k, v] : keys_) v = next++;
    }
    int code(const std::string& key) const { return keys_.at(key); }
    std::size_t size() const { return keys_.size(); }

private:
    std::map<std::string, int> keys_;
};

std::string fe_key(FixedEffect fe, const PanelObservation& o) {
    const std::string m = o.month.to_string();
    switch (fe) {
        case FixedEffect::time: return m;
        case FixedEffect::zip: return unit_key(o);
        case FixedEffect::time_county: return o.county.empty() ? "" : o.county + "|" + m;
        case FixedEffect::time_cbsa: return o.cbsa.empty() ? "" : o.cbsa + "|" + m;
        case FixedEffect::time_state: return o.state.empty() ? "" : o.state + "|" + m;
        case FixedEffect::time_event: return o.event_id.empty() ? "" : o.event_id + "|" + m;
        case FixedEffect::time_entry_cohort: return o.entry_cohort.empty() ? "" : o.entry_cohort + "|" + m;
    }
    return m;
}

std::string cluster_key(ClusterDim c, const PanelObservation& o) {
    switch (c) {
        case ClusterDim::state: return o.state;
        case ClusterDim::zip: return o.zip;
        case ClusterDim::county: return o.county;
        case ClusterDim::cbsa: return o.cbsa;
        case ClusterDim::none: return unit_key(o) + "#" + o.month.to_string();
    }
    return o.state;
}

struct Design {
    std::vector<std::string> names;
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    Eigen::VectorXd w;
    Eigen::VectorXd endog;  // lag_dr when instrumented
    Eigen::VectorXd inst;
    std::vector<std::vector<int>> groups;
    std::vector<int> clusters;
    std::size_t n_clusters = 0;
    std::vector<RowKey> rows;
    std::size_t n_dropped = 0;
};

// Rows of one unit sorted by month, for lead/lag lookups.
class UnitIndex {
public:
    explicit UnitIndex(const Panel& p) : panel_(p) {
        for (std::size_t i = 0; i < p.size(); ++i) by_unit_[unit_key(p[i])].push_back(i);
        for (auto& [u, rows] : by_unit_) {
            std::sort(rows.begin(), rows.end(),
                      [&](std::size_t a, std::size_t b) { return p[a].month < p[b].month; });
        }
    }

    const PanelObservation* at(const PanelObservation& o, int month_offset) const {
        if (month_offset == 0) return &o;
        const auto& rows = by_unit_.at(unit_key(o));
        const YearMonth target = o.month + month_offset;
        auto it = std::lower_bound(rows.begin(), rows.end(), target,
                                   [&](std::size_t r, YearMonth m) { return panel_[r].month < m; });
        if (it == rows.end() || panel_[*it].month != target) return nullptr;
        return &panel_[*it];
    }

    std::size_t longest_unit() const {
        std::size_t n = 0;
        for (const auto& [u, rows] : by_unit_) n = std::max(n, rows.size());
        return n;
    }

private:
    const Panel& panel_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_unit_;
};

Design build_design(const RegressionSpec& spec, const Panel& raw) {
    spec.validate();
    Panel data = spec.transform == Transform::first_difference ? first_difference(raw) : raw;
    sort_panel(data);
    const UnitIndex index(data);

    using Getter = std::function<double(const PanelObservation&)>;
    struct Term {
        std::string name;
        Getter get;
    };
    std::vector<Term> terms;
    auto add_measure = [&](const std::string& measure, int window, double PanelObservation::*field) {
        for (int k = -window; k <= window; ++k) {
            const int offset = spec.measure_shift - k;
            terms.push_back({measure_term_name(measure, k), [&index, field, offset](const PanelObservation& o) {
                                 const auto* src = index.at(o, offset);
                                 return src ? src->*field : kMissing;
                             }});
        }
    };
    if (spec.include_res) add_measure("mw_res", spec.res_window, &PanelObservation::mw_res);
    if (spec.include_wkp) add_measure("mw_wkp", spec.wkp_window, &PanelObservation::mw_wkp);
    for (const auto& c : spec.controls) {
        terms.push_back({c, [c](const PanelObservation& o) {
                             auto it = o.controls.find(c);
                             return it == o.controls.end() ? kMissing : it->second;
                         }});
    }
    const std::size_t n_base_terms = terms.size();
    auto shifted = [&index, &spec](const PanelObservation& o, double PanelObservation::*field) {
        const auto* src = index.at(o, spec.measure_shift);
        return src ? src->*field : kMissing;
    };
    auto moderator = [](const PanelObservation& o, const std::string& m) {
        auto it = o.moderators.find(m);
        return it == o.moderators.end() ? kMissing : it->second;
    };
    auto lagged_outcome = [&index](const PanelObservation& o, int lag) {
        const auto* src = index.at(o, -lag);
        return src ? src->r : kMissing;
    };

    // Listwise deletion over every required column.
    std::vector<std::size_t> keep;
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& o = data[i];
        bool ok = finite(o.r) && (!spec.use_weights || (finite(o.weight) && o.weight > 0.0));
        for (std::size_t t = 0; ok && t < n_base_terms; ++t) ok = finite(terms[t].get(o));
        for (const auto& m : spec.interactions) {
            if (!ok) break;
            ok = finite(moderator(o, m)) && (!spec.include_res || finite(shifted(o, &PanelObservation::mw_res))) &&
                 (!spec.include_wkp || finite(shifted(o, &PanelObservation::mw_wkp)));
        }
        if (ok && spec.lagged_dep) ok = finite(lagged_outcome(o, 1));
        if (ok && spec.iv) ok = finite(lagged_outcome(o, spec.iv_instrument_lag));
        for (auto fe : spec.fe) {
            if (!ok) break;
            ok = !fe_key(fe, o).empty();
        }
        if (ok && spec.cluster != ClusterDim::none) ok = !cluster_key(spec.cluster, o).empty();
        if (ok) {
            keep.push_back(i);
        } else {
            ++dropped;
        }
    }
    if (keep.empty()) throw Error("empty_sample", "no complete observations for spec '" + spec.name + "'");

    for (const auto& m : spec.interactions) {
        double mean = 0.0;
        for (auto i : keep) mean += moderator(data[i], m);
        mean /= static_cast<double>(keep.size());
        double var = 0.0;
        for (auto i : keep) var += std::pow(moderator(data[i], m) - mean, 2);
        const double sd = std::sqrt(var / static_cast<double>(keep.size()));
        if (!(sd > 1e-12 * (1.0 + std::abs(mean)))) {
            throw Error("degenerate_moderator", "moderator '" + m + "' has no variation in the estimation sample");
        }
        auto z = [m, mean, sd, moderator](const PanelObservation& o) { return (moderator(o, m) - mean) / sd; };
        if (spec.include_res) {
            terms.push_back({"mw_res_x_" + m, [z, shifted](const PanelObservation& o) {
                                 return z(o) * shifted(o, &PanelObservation::mw_res);
                             }});
        }
        if (spec.include_wkp) {
            terms.push_back({"mw_wkp_x_" + m, [z, shifted](const PanelObservation& o) {
                                 return z(o) * shifted(o, &PanelObservation::mw_wkp);
                             }});
        }
    }
    if (spec.lagged_dep) {
        terms.push_back({"lag_dr", [lagged_outcome](const PanelObservation& o) { return lagged_outcome(o, 1); }});
    }

    Design d;
    const auto n = static_cast<Eigen::Index>(keep.size());
    const auto p = static_cast<Eigen::Index>(terms.size());
    d.n_dropped = dropped;
    d.x.resize(n, p);
    d.y.resize(n);
    d.w.resize(n);
    for (const auto& t : terms) d.names.push_back(t.name);
    if (spec.iv) d.inst.resize(n);

    std::vector<Coder> fe_codes(spec.fe.size());
    Coder cluster_codes;
    for (auto i : keep) {
        for (std::size_t f = 0; f < spec.fe.size(); ++f) fe_codes[f].add(fe_key(spec.fe[f], data[i]));
        cluster_codes.add(cluster_key(spec.cluster, data[i]));
    }
    for (auto& c : fe_codes) c.freeze();
    cluster_codes.freeze();
    d.groups.assign(spec.fe.size(), std::vector<int>(keep.size()));
    d.clusters.resize(keep.size());
    d.n_clusters = cluster_codes.size();

    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& o = data[keep[static_cast<std::size_t>(r)]];
        d.y(r) = o.r;
        d.w(r) = spec.use_weights ? o.weight : 1.0;
        for (Eigen::Index c = 0; c < p; ++c) d.x(r, c) = terms[static_cast<std::size_t>(c)].get(o);
        if (spec.iv) d.inst(r) = lagged_outcome(o, spec.iv_instrument_lag);
        for (std::size_t f = 0; f < spec.fe.size(); ++f) {
            d.groups[f][static_cast<std::size_t>(r)] = fe_codes[f].code(fe_key(spec.fe[f], o));
        }
        const int cl = cluster_codes.code(cluster_key(spec.cluster, o));
        d.clusters[static_cast<std::size_t>(r)] = cl;
        d.rows.push_back({unit_key(o), o.zip, o.month, cl});
    }
    return d;
}

Eigen::MatrixXd robust_vcov(const RegressionSpec& spec, const Design& d, const Eigen::MatrixXd& x,
                            const Eigen::VectorXd& u, Eigen::Index extra) {
    if (spec.cluster == ClusterDim::none) return hc1_vcov(x, u, d.w, extra);
    return cluster_robust_vcov(x, u, d.clusters, spec.small_sample, d.w, extra);
}

void check_absorbed(const Eigen::MatrixXd& raw, const Eigen::MatrixXd& absorbed, const Eigen::VectorXd& w,
                    const std::vector<std::string>& names) {
    const Eigen::VectorXd sw = w.array().sqrt();
    for (Eigen::Index c = 0; c < raw.cols(); ++c) {
        const double before = (sw.asDiagonal() * raw.col(c)).norm();
        const double after = (sw.asDiagonal() * absorbed.col(c)).norm();
        if (!(after > 1e-9 * before)) {
            throw Error("collinear_design", "collinear design: '" + names[static_cast<std::size_t>(c)] +
                                                "' is absorbed by the fixed effects");
        }
    }
}

double r_squared(const Eigen::VectorXd& y_tilde, const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                 bool centre) {
    double mean = 0.0;
    if (centre) mean = w.dot(y_tilde) / w.sum();
    const double sst = (w.array() * (y_tilde.array() - mean).square()).sum();
    const double ssr = (w.array() * u.array().square()).sum();
    return sst > 0.0 ? 1.0 - ssr / sst : 0.0;
}

bool use_dummies(const RegressionSpec& spec, const Design& d) {
    if (spec.fe.empty()) return false;
    if (spec.fe_method == FeMethod::dummies) return true;
    if (spec.fe_method == FeMethod::demean) return false;
    // One dimension is exact in a single demeaning sweep.
    if (d.groups.size() == 1) return false;
    double levels = 0.0;
    for (const auto& g : d.groups) levels += *std::max_element(g.begin(), g.end()) + 1.0;
    const double n = static_cast<double>(d.x.rows());
    const double cols = static_cast<double>(d.x.cols()) + levels;
    return levels <= 2000.0 && n * cols * levels <= 2e9;
}

// Independent dummy columns (weighted), chosen by pivoted QR.
Eigen::MatrixXd independent_dummies(const Design& d) {
    const Eigen::MatrixXd full = fixed_effect_dummies(d.groups);
    const Eigen::VectorXd sw = d.w.array().sqrt();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sw.asDiagonal() * full);
    qr.setThreshold(1e-10);
    std::vector<Eigen::Index> cols;
    for (Eigen::Index k = 0; k < qr.rank(); ++k) cols.push_back(qr.colsPermutation().indices()(k));
    std::sort(cols.begin(), cols.end());
    Eigen::MatrixXd out(full.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = full.col(cols[k]);
    return out;
}

// Residuals of the columns of m after weighted projection on dummies.
Eigen::MatrixXd project_out(const Eigen::MatrixXd& dummies, const Eigen::MatrixXd& m, const Eigen::VectorXd& w) {
    const Eigen::VectorXd sw = w.array().sqrt();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(sw.asDiagonal() * dummies);
    const Eigen::MatrixXd coef = qr.solve(Eigen::MatrixXd(sw.asDiagonal() * m));
    return m - dummies * coef;
}

RegressionResult finish(const RegressionSpec& spec, Design& d, Eigen::VectorXd coef, Eigen::MatrixXd vcov,
                        const Eigen::VectorXd& u, std::size_t n_params, double r2, const std::string& method) {
    RegressionResult res;
    res.spec_name = spec.name;
    res.names = d.names;
    res.coef = std::move(coef);
    res.vcov = std::move(vcov);
    res.n_obs = static_cast<std::size_t>(d.x.rows());
    res.n_dropped = d.n_dropped;
    res.n_clusters = spec.cluster == ClusterDim::none ? res.n_obs : d.n_clusters;
    res.n_params = n_params;
    res.r_squared = r2;
    res.fe_method = method;
    res.residuals = u;
    res.rows = std::move(d.rows);
    if (res.has("mw_res") && res.has("mw_wkp")) {
        res.tests["equality"] = equality_test(res, "mw_res", "mw_wkp").p_value;
    }
    return res;
}

}  // namespace

RegressionResult estimate_ols(const RegressionSpec& spec, const Panel& panel) {
    if (spec.iv) return estimate_iv_lagged_dep(spec, panel);
    Design d = build_design(spec, panel);
    const auto p = d.x.cols();
    if (!use_dummies(spec, d)) {
        Eigen::MatrixXd stacked(d.x.rows(), p + 1);
        stacked << d.y, d.x;
        const Eigen::MatrixXd absorbed = absorb_fixed_effects(stacked, d.groups, d.w);
        const Eigen::VectorXd y_t = absorbed.col(0);
        const Eigen::MatrixXd x_t = absorbed.rightCols(p);
        check_absorbed(d.x, x_t, d.w, d.names);
        const LinearFit fit = weighted_least_squares(x_t, y_t, d.w);
        const Eigen::Index extra = absorbed_parameter_count(d.groups);
        Eigen::MatrixXd v = robust_vcov(spec, d, x_t, fit.residuals, extra);
        const double r2 = r_squared(y_t, fit.residuals, d.w, d.groups.empty());
        return finish(spec, d, fit.coef, std::move(v), fit.residuals, static_cast<std::size_t>(p + extra), r2,
                      d.groups.empty() ? "none" : "demean");
    }

    const Eigen::MatrixXd dummies = independent_dummies(d);
    const Eigen::Index k = dummies.cols();
    Eigen::MatrixXd full(d.x.rows(), p + k);
    full << d.x, dummies;
    const LinearFit fit = weighted_least_squares(full, d.y, d.w);
    Eigen::MatrixXd yx(d.x.rows(), p + 1);
    yx << d.y, d.x;
    const Eigen::MatrixXd resid = project_out(dummies, yx, d.w);
    const Eigen::MatrixXd x_t = resid.rightCols(p);
    Eigen::MatrixXd v = robust_vcov(spec, d, x_t, fit.residuals, k);
    const double r2 = r_squared(resid.col(0), fit.residuals, d.w, false);
    return finish(spec, d, fit.coef.head(p), std::move(v), fit.residuals, static_cast<std::size_t>(p + k), r2,
                  "dummies");
}

RegressionResult estimate_iv_lagged_dep(const RegressionSpec& spec_in, const Panel& panel) {
    RegressionSpec spec = spec_in;
    spec.lagged_dep = true;
    spec.iv = true;
    Design d = build_design(spec, panel);
    const auto p = d.x.cols();  // lag_dr is the last column

    Eigen::MatrixXd stacked(d.x.rows(), p + 2);
    stacked << d.y, d.x, d.inst;
    const Eigen::MatrixXd absorbed = absorb_fixed_effects(stacked, d.groups, d.w);
    const Eigen::VectorXd y_t = absorbed.col(0);
    const Eigen::MatrixXd x_t = absorbed.middleCols(1, p);
    const Eigen::VectorXd z_t = absorbed.col(p + 1);
    check_absorbed(d.x, x_t, d.w, d.names);
    const Eigen::Index extra = absorbed_parameter_count(d.groups);

    // First stage: endogenous lag on exogenous regressors plus the instrument.
    Eigen::MatrixXd first(d.x.rows(), p);
    first << x_t.leftCols(p - 1), z_t;
    const LinearFit fs = weighted_least_squares(first, x_t.col(p - 1), d.w);
    const Eigen::MatrixXd fs_v = robust_vcov(spec, d, first, fs.residuals, extra);
    const double f_stat = fs.coef(p - 1) * fs.coef(p - 1) / fs_v(p - 1, p - 1);
    if (!(f_stat >= 1e-6)) throw Error("weak_instrument", "weak instrument: first-stage F below 1e-6");

    Eigen::MatrixXd x_hat = x_t;
    x_hat.col(p - 1) = first * fs.coef;
    const LinearFit ss = weighted_least_squares(x_hat, y_t, d.w);
    const Eigen::VectorXd u = y_t - x_t * ss.coef;
    Eigen::MatrixXd v = robust_vcov(spec, d, x_hat, u, extra);
    const double r2 = r_squared(y_t, u, d.w, d.groups.empty());
    RegressionResult res = finish(spec, d, ss.coef, std::move(v), u, static_cast<std::size_t>(p + extra), r2,
                                  d.groups.empty() ? "none" : "demean");
    res.first_stage_f = f_stat;
    return res;
}

std::vector<EventTimeEffect> implied_levels(const RegressionResult& result, const std::string& measure,
                                            int window) {
    std::vector<EventTimeEffect> path;
    path.push_back({-window - 1, 0.0, 0.0, 0.0, 0.0});
    Eigen::VectorXd weights = Eigen::VectorXd::Zero(result.coef.size());
    for (int k = -window; k <= window; ++k) {
        const auto idx = result.index_of(measure_term_name(measure, k));
        weights(idx) = 1.0;
        EventTimeEffect e;
        e.event_time = k;
        e.coef = result.coef(idx);
        e.se = std::sqrt(std::max(0.0, result.vcov(idx, idx)));
        e.level = weights.dot(result.coef);
        e.level_se = std::sqrt(std::max(0.0, weights.dot(result.vcov * weights)));
        path.push_back(e);
    }
    return path;
}

EventStudyResult event_study(const RegressionSpec& spec, const Panel& panel) {
    const int s = spec.wkp_window;
    {
        Panel sorted = panel;
        sort_panel(sorted);
        std::size_t longest = 0;
        std::size_t run = 0;
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            run = (i > 0 && unit_key(sorted[i]) == unit_key(sorted[i - 1])) ? run + 1 : 1;
            longest = std::max(longest, run);
        }
        const std::size_t needed = static_cast<std::size_t>(2 * std::max(s, spec.res_window) + 1) +
                                   (spec.transform == Transform::first_difference ? 1u : 0u);
        if (longest < needed) {
            throw Error("insufficient_months", "panel too short for a window of " + std::to_string(s));
        }
    }
    EventStudyResult out;
    out.regression = estimate_ols(spec, panel);
    if (spec.include_wkp) out.path = implied_levels(out.regression, "mw_wkp", s);
    if (spec.include_res && spec.res_window > 0) {
        out.res_path = implied_levels(out.regression, "mw_res", spec.res_window);
    }
    // With fewer clusters than leads the clustered vcov cannot support the
    // joint test; the estimates stand and the p-value is NaN.
    auto joint_p = [&out](const std::string& measure, int window) {
        std::vector<std::string> leads;
        for (int k = -window; k < 0; ++k) leads.push_back(measure_term_name(measure, k));
        try {
            return joint_zero_test(out.regression, leads).p_value;
        } catch (const Error& e) {
            if (e.kind() != "singular_restriction") throw;
            return std::nan("");
        }
    };
    if (spec.include_wkp && s > 0) {
        out.pretrend_p = joint_p("mw_wkp", s);
        out.regression.tests["pretrend_wkp"] = out.pretrend_p;
    }
    if (spec.include_res && spec.res_window > 0) out.regression.tests["pretrend_res"] = joint_p("mw_res", spec.res_window);
    return out;
}

RegressionSpec heterogeneity_spec(const Panel& panel, const std::string& moderator, RegressionSpec base) {
    if (panel.empty()) throw Error("empty_sample", "empty panel");
    double lo = 0.0;
    double hi = 0.0;
    bool first = true;
    for (const auto& o : panel) {
        auto it = o.moderators.find(moderator);
        if (it == o.moderators.end()) {
            throw Error("missing_moderator", "moderator '" + moderator + "' missing for zip " + o.zip);
        }
        if (!std::isfinite(it->second)) {
            throw Error("missing_moderator", "moderator '" + moderator + "' not finite for zip " + o.zip);
        }
        lo = first ? it->second : std::min(lo, it->second);
        hi = first ? it->second : std::max(hi, it->second);
        first = false;
    }
    if (!(hi > lo)) throw Error("degenerate_moderator", "moderator '" + moderator + "' has zero variance");
    if (std::find(base.interactions.begin(), base.interactions.end(), moderator) == base.interactions.end()) {
        base.interactions.push_back(moderator);
    }
    base.name = base.name + "_x_" + moderator;
    return base;
}

}  // namespace mwspill
