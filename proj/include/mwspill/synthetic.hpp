#pragma once

#include "mwspill/exposure.hpp"
#include "mwspill/panel.hpp"
#include "mwspill/policy_panel.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mwspill {

struct SyntheticPanelConfig {
    std::size_t n_zips = 500;
    int n_months = 60;
    YearMonth start{2015, 1};
    int n_states = 10;
    int n_cbsas = 25;

    // staggered adoption
    double state_adoption_prob = 0.6;
    double place_prob = 0.5;         // share of CBSAs with a city ordinance
    bool commute_own_only = false;   // everybody works where they live

    double true_beta = 0.0685;
    double true_gamma = -0.0219;
    std::map<int, double> dynamic_effects;  // extra workplace effects by event time (k < 0 are leads)
    double beta_slope = 0.0;                // beta_i = beta + slope * standardized mw_worker_share
    std::vector<double> controls_effect{0.05, -0.03};

    double fe_scale = 0.3;
    double time_scale = 0.004;
    double noise_scale = 0.01;
    double ar1_rho = 0.0;  // levels error persistence; 1 is a random walk
    double control_scale = 0.01;

    std::uint64_t seed = 1;

    void validate() const;
};

struct ZipInfo {
    std::string zip;
    std::string state;
    std::string county;
    std::string cbsa;
    std::string entry_cohort;
    std::map<std::string, double> moderators;
};

// Jurisdictions, crosswalk, commuting and measures; reusable across outcome draws.
struct SyntheticGeography {
    std::vector<ZipInfo> zips;
    std::vector<BlockRecord> blocks;
    PolicySet policies;
    CommutingMatrix commuting;
    std::vector<MeasureRow> measures;  // padded months, sorted by (zip, month)
    YearMonth first_month;             // first observed month
    int n_months = 0;
    int pad = 0;
};

struct SyntheticTruth {
    double beta = 0.0;
    double gamma = 0.0;
    std::map<int, double> dynamic_effects;
    double beta_slope = 0.0;
    std::map<std::string, double> eta;
    std::vector<std::pair<YearMonth, double>> delta;  // first-differenced time effects
    std::uint64_t seed = 0;
};

struct SyntheticPanel {
    Panel panel;  // levels
    SyntheticTruth truth;
};

// Throws "collinear_adoption" when the measures fail the rank condition.
SyntheticGeography build_geography(const SyntheticPanelConfig& cfg);

SyntheticPanel simulate_outcomes(const SyntheticGeography& geo, const SyntheticPanelConfig& cfg,
                                 std::uint64_t seed);

SyntheticPanel generate_synthetic_panel(const SyntheticPanelConfig& cfg);

std::vector<std::string> control_names(const SyntheticPanelConfig& cfg);

}  // namespace mwspill
