#pragma once

#include "mwspill/counterfactual.hpp"
#include "mwspill/equilibrium.hpp"
#include "mwspill/dynamic.hpp"
#include "mwspill/exposure.hpp"
#include "mwspill/panel.hpp"
#include "mwspill/policy_panel.hpp"
#include "mwspill/regression.hpp"
#include "mwspill/synthetic.hpp"

#include <json.hpp>

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mwspill::io {

using nlohmann::json;

// policies.csv: jurisdiction_id,level,region_code,month,mw_dollars
PolicySet read_policies(const std::string& path);
void write_policies(std::ostream& out, const PolicySet& policies);

// blocks.csv: block_id,zip,state,county,place,housing_units
std::vector<BlockRecord> read_blocks(const std::string& path);
void write_blocks(std::ostream& out, const std::vector<BlockRecord>& blocks);

// commuting.csv: year,category,origin_zip,dest_zip,jobs
std::vector<CommutingMatrix> read_commuting(const std::string& path);
void write_commuting(std::ostream& out, const std::vector<CommutingMatrix>& matrices);

// covariates.csv: zip,safmr_rent,annual_wage_hh,median_hh_income,public_housing_share[,mw_worker_share]
struct CovariateRecord {
    std::string zip;
    double safmr_rent = 0.0;
    std::optional<double> annual_wage_hh;
    std::optional<double> median_hh_income;
    std::optional<double> public_housing_share;
    std::optional<double> mw_worker_share;
};
std::vector<CovariateRecord> read_covariates(const std::string& path);

// zip_info.csv: zip,state,county,cbsa[,entry_cohort][,<moderator>...]
std::map<std::string, ZipInfo> read_zip_info(const std::string& path);
void write_zip_info(std::ostream& out, const std::vector<ZipInfo>& zips);

// panel.csv: zip,month,statutory_mw,mw_res
std::vector<ZipMonthPolicy> read_zip_panel(const std::string& path);
void write_zip_panel(std::ostream& out, const std::vector<ZipMonthPolicy>& rows);

// measures.csv: zip,month,mw_res,mw_wkp[,category,share_policy]
std::vector<MeasureRow> read_measures(const std::string& path);
void write_measures(std::ostream& out, const std::vector<MeasureRow>& rows, const std::string& category,
                    const std::string& share_policy);

// rents.csv: zip,month,rent_per_sqft[,<control>...]; controls.csv: zip,month,<control>...
void write_rents(std::ostream& out, const Panel& panel);
void write_controls(std::ostream& out, const Panel& panel, const std::vector<std::string>& names);

// Inner join of measures and rents on (zip, month); controls and zip
// attributes are left-joined. r is the log of rent_per_sqft.
Panel assemble_panel(const std::vector<MeasureRow>& measures, const std::string& rents_path,
                     const std::string& controls_path, const std::map<std::string, ZipInfo>& zip_info);

json read_json(const std::string& path);

MarketPrimitives primitives_from_json(const json& j);
json primitives_to_json(const MarketPrimitives& prim);
MwLevels mw_levels_from_json(const json& j);

PolicyScenario scenario_from_json(const json& j);

RegressionSpec spec_from_json(const json& j);
json spec_to_json(const RegressionSpec& spec);

SyntheticPanelConfig synthetic_config_from_json(const json& j);
json truth_to_json(const SyntheticTruth& truth);

// Finite doubles as JSON numbers; NaN and infinities as strings.
json number(double v);

}  // namespace mwspill::io
