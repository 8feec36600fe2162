#pragma once

#include "mwspill/exposure.hpp"
#include "mwspill/policy_panel.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mwspill {

struct PolicyOverride {
    JurisdictionLevel level = JurisdictionLevel::federal;
    std::string region_code;
    double mw = 0.0;
};

// Splits ZIPs by their pre-policy statutory MW for the summary table.
struct GroupSplit {
    double threshold = 9.0;
    bool threshold_in_upper = false;  // upper group is mw >= threshold rather than mw > threshold
};

struct PolicyScenario {
    std::string name = "scenario";
    YearMonth base_month{2019, 12};
    std::vector<PolicyOverride> overrides;
    double beta = 0.0685;
    double gamma = -0.0219;
    double epsilon = 0.1;
    double wage_threshold = 0.001;  // CBSAs with a smaller mean wage change are dropped
    GroupSplit groups;

    void validate() const;
};

struct ZipPolicyChange {
    std::string zip;
    double mw_before = 0.0;
    double mw_after = 0.0;
    double d_mw_res = 0.0;
};

// Statutory MW per ZIP at the base month before and after the overrides.
// Each block binds at the max of its jurisdictions' levels and the overrides
// that cover it; blocks are then averaged by housing units.
std::vector<ZipPolicyChange> apply_scenario(const std::vector<BlockRecord>& blocks, const PolicySet& policies,
                                            const PolicyScenario& scenario);

struct MeasureChange {
    std::string zip;
    double mw_before = 0.0;
    double d_mw_res = 0.0;
    double d_mw_wkp = 0.0;
};

// Workplace change is the commuting-weighted average of destination changes.
// ZIPs without commuting shares are skipped; missing destinations throw.
std::vector<MeasureChange> measure_changes(const ShareTable& shares, const std::vector<ZipPolicyChange>& changes);

struct PredictedChange {
    double d_r = 0.0;
    double d_y = 0.0;
};

PredictedChange predict_changes(double d_mw_res, double d_mw_wkp, const PolicyScenario& scenario);

// s (exp(beta dwkp + gamma dres) - 1) / (exp(epsilon dwkp) - 1); throws when
// the wage change is zero.
double share_pocketed(double s, double d_mw_res, double d_mw_wkp, const PolicyScenario& scenario);

struct IncidenceInput {
    std::string zip;
    double safmr_rent = 0.0;          // monthly
    double wage_per_household = 0.0;  // monthly
    double d_mw_res = 0.0;
    double d_mw_wkp = 0.0;
};

// Aggregate rent change over aggregate wage change across the set.
double total_incidence(const std::vector<IncidenceInput>& zips, const PolicyScenario& scenario);

struct IncidenceRow {
    std::string zip;
    std::string cbsa;
    double mw_before = 0.0;
    double d_mw_res = 0.0;
    double d_mw_wkp = 0.0;
    double d_r = 0.0;
    double d_y = 0.0;
    double s = 0.0;
    double safmr_rent = 0.0;
    double wage_per_household = 0.0;
    std::optional<double> rho;  // empty when there is no wage change
    bool retained = true;       // false when its CBSA is filtered out
};

struct CbsaFilter {
    std::vector<std::string> retained_zips;
    std::vector<std::string> excluded_cbsas;
};

CbsaFilter filter_affected_cbsas(const std::vector<IncidenceRow>& rows, double wage_threshold);

struct DecileRow {
    int decile = 0;  // 1..10
    std::size_t count = 0;
    double mean_gap = 0.0;  // d_mw_wkp - d_mw_res
    double mean_rho = 0.0;
};

// Equal-count deciles of d_mw_wkp - d_mw_res over rows with a defined rho;
// ties ordered by zip.
std::vector<DecileRow> decile_profile(const std::vector<IncidenceRow>& rows);

struct EpsilonPoint {
    double epsilon = 0.0;
    double rho_total = 0.0;
};

std::vector<EpsilonPoint> sensitivity_epsilon(const std::vector<IncidenceInput>& zips, PolicyScenario scenario,
                                              const std::vector<double>& epsilon_grid);

struct IncidenceGroup {
    std::string label;
    std::size_t count = 0;
    double median_d_mw_res = 0.0;
    double median_d_mw_wkp = 0.0;
    double median_s = 0.0;
    double median_rho = 0.0;
};

struct IncidenceResult {
    std::vector<IncidenceRow> rows;  // every ZIP with a measure change and covariates
    std::vector<std::string> excluded_cbsas;
    std::vector<std::string> missing_covariates;
    std::size_t n_undefined = 0;  // retained ZIPs without a wage change
    std::size_t n_retained = 0;
    double rho_total = 0.0;
    std::vector<IncidenceGroup> groups;
    std::vector<DecileRow> deciles;  // empty with fewer than 10 defined values

    std::vector<IncidenceInput> aggregate_inputs() const;  // retained ZIPs with a wage change
};

struct ZipEconomics {
    std::string cbsa;
    double housing_exp_share = 0.0;
    double safmr_rent = 0.0;
    double wage_per_household = 0.0;
};

IncidenceResult evaluate_incidence(const std::vector<MeasureChange>& changes,
                                   const std::map<std::string, ZipEconomics>& economics,
                                   const PolicyScenario& scenario);

double median(std::vector<double> values);

}  // namespace mwspill
