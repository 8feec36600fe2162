#pragma once

#include "mwspill/panel.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mwspill {

enum class Transform { levels, first_difference };
enum class FixedEffect { time, zip, time_county, time_cbsa, time_state, time_event, time_entry_cohort };
enum class ClusterDim { state, zip, county, cbsa, none };
enum class FeMethod { automatic, demean, dummies };

Transform parse_transform(const std::string& s);
FixedEffect parse_fixed_effect(const std::string& s);
ClusterDim parse_cluster(const std::string& s);
FeMethod parse_fe_method(const std::string& s);
std::string to_string(Transform t);
std::string to_string(FixedEffect fe);
std::string to_string(ClusterDim c);

struct RegressionSpec {
    std::string name = "model";
    Transform transform = Transform::first_difference;
    std::vector<FixedEffect> fe{FixedEffect::time};
    bool include_res = true;
    bool include_wkp = true;
    int res_window = 0;     // leads/lags of the residence measure
    int wkp_window = 0;     // leads/lags of the workplace measure
    int measure_shift = 0;  // every measure term uses month t + shift
    std::vector<std::string> controls;
    std::vector<std::string> interactions;  // moderators, standardized on the estimation sample
    bool lagged_dep = false;                // adds lag_dr = outcome at t-1
    bool iv = false;                        // instruments lag_dr with the outcome at t - iv_instrument_lag
    int iv_instrument_lag = 2;
    ClusterDim cluster = ClusterDim::state;
    bool use_weights = false;
    bool small_sample = true;
    FeMethod fe_method = FeMethod::automatic;

    void validate() const;
};

// Names of measure terms: event time k uses the measure at t - k, so k < 0
// are leads ("mw_wkp_lead2") and k > 0 lags ("mw_wkp_lag3").
std::string measure_term_name(const std::string& measure, int event_time);

struct RowKey {
    std::string unit;
    std::string zip;
    YearMonth month;
    int cluster = 0;
};

struct RegressionResult {
    std::string spec_name;
    std::vector<std::string> names;
    Eigen::VectorXd coef;
    Eigen::MatrixXd vcov;
    std::size_t n_obs = 0;
    std::size_t n_dropped = 0;  // listwise deletions
    std::size_t n_clusters = 0;
    std::size_t n_params = 0;   // slopes plus absorbed fixed effects
    double r_squared = 0.0;
    std::map<std::string, double> tests;  // p-values
    std::optional<double> first_stage_f;
    std::string fe_method;
    Eigen::VectorXd residuals;
    std::vector<RowKey> rows;

    Eigen::Index index_of(const std::string& name) const;
    bool has(const std::string& name) const;
    double coefficient(const std::string& name) const;
    double se(const std::string& name) const;
};

// Alternating weighted within-transformation over categorical groupings
// (one code vector per dimension). One dimension is exact in a single sweep.
Eigen::MatrixXd absorb_fixed_effects(const Eigen::MatrixXd& m, const std::vector<std::vector<int>>& groups,
                                     const Eigen::VectorXd& weights, double tolerance = 1e-10,
                                     int max_sweeps = 100000);

// Dummy columns: full set for the first dimension, first level dropped for
// the others.
Eigen::MatrixXd fixed_effect_dummies(const std::vector<std::vector<int>>& groups);

// Number of free parameters spanned by the groupings (assumes a connected
// design; dimensions nested in another are not counted).
Eigen::Index absorbed_parameter_count(const std::vector<std::vector<int>>& groups);

struct LinearFit {
    Eigen::VectorXd coef;
    Eigen::VectorXd residuals;
};

// Weighted least squares; throws "collinear_design" on rank deficiency.
LinearFit weighted_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& weights);

// (X'WX)^-1 (sum_g s_g s_g') (X'WX)^-1 with s_g = sum_{i in g} w_i x_i u_i,
// times G/(G-1) (N-1)/(N-K) when small_sample, K = cols + extra_params.
Eigen::MatrixXd cluster_robust_vcov(const Eigen::MatrixXd& x, const Eigen::VectorXd& residuals,
                                    const std::vector<int>& clusters, bool small_sample,
                                    const Eigen::VectorXd& weights = Eigen::VectorXd(),
                                    Eigen::Index extra_params = 0);

// Heteroskedasticity-robust HC1 covariance.
Eigen::MatrixXd hc1_vcov(const Eigen::MatrixXd& x, const Eigen::VectorXd& residuals,
                         const Eigen::VectorXd& weights = Eigen::VectorXd(),
                         Eigen::Index extra_params = 0);

RegressionResult estimate_ols(const RegressionSpec& spec, const Panel& panel);

// 2SLS with lag_dr endogenous and the outcome at t - iv_instrument_lag as the
// excluded instrument. Reports the first-stage F.
RegressionResult estimate_iv_lagged_dep(const RegressionSpec& spec, const Panel& panel);

struct EventTimeEffect {
    int event_time = 0;
    double coef = 0.0;
    double se = 0.0;
    double level = 0.0;     // cumulative effect in levels
    double level_se = 0.0;
};

struct EventStudyResult {
    RegressionResult regression;
    std::vector<EventTimeEffect> path;      // workplace measure, event times -window-1 .. window
    std::vector<EventTimeEffect> res_path;  // residence measure when res_window > 0
    double pretrend_p = 1.0;                // joint test that every workplace lead is zero; NaN with too few clusters
};

// Coefficient path of one measure with implied levels: zero at -window-1,
// then cumulative sums of the coefficients.
std::vector<EventTimeEffect> implied_levels(const RegressionResult& result, const std::string& measure,
                                            int window);

EventStudyResult event_study(const RegressionSpec& spec, const Panel& panel);

// Adds standardized-moderator interactions with both measures. Throws for a
// missing, non-finite or zero-variance moderator.
RegressionSpec heterogeneity_spec(const Panel& panel, const std::string& moderator,
                                  RegressionSpec base = {});

}  // namespace mwspill
