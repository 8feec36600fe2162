#pragma once

#include "mwspill/year_month.hpp"

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mwspill {

enum class JurisdictionLevel { federal, state, county, place };

JurisdictionLevel parse_level(const std::string& text);
std::string to_string(JurisdictionLevel level);

struct PolicyStep {
    YearMonth month;
    double mw = 0.0;  // dollars per hour
};

// Dated statutory minimum wage of one jurisdiction. The level in force at a
// month is the last step at or before it.
struct PolicySchedule {
    std::string jurisdiction_id;
    JurisdictionLevel level = JurisdictionLevel::federal;
    std::string region_code;
    std::vector<PolicyStep> steps;

    void validate() const;
    std::optional<double> level_at(YearMonth month) const;
};

// Validated collection of schedules with exactly one federal schedule and
// lookup by (level, region_code).
class PolicySet {
public:
    PolicySet() = default;
    explicit PolicySet(std::vector<PolicySchedule> schedules);

    const std::vector<PolicySchedule>& schedules() const { return schedules_; }
    const PolicySchedule& federal() const { return schedules_[federal_index_]; }
    const PolicySchedule* find(JurisdictionLevel level, const std::string& region_code) const;

private:
    std::vector<PolicySchedule> schedules_;
    std::size_t federal_index_ = 0;
    std::map<std::pair<JurisdictionLevel, std::string>, std::size_t> index_;
};

struct BlockRecord {
    std::string block_id;
    std::string zip;
    std::string state;
    std::string county;
    std::string place;  // may be empty
    double housing_units = 0.0;
};

struct ZipMonthPolicy {
    std::string zip;
    YearMonth month;
    double statutory_mw = 0.0;
    double mw_res = 0.0;  // ln(statutory_mw)
};

struct ZipCovariates {
    std::string zip;
    double mw_worker_share = 0.0;
    double median_hh_income = 0.0;
    double housing_exp_share = 0.0;
    double safmr_rent = 0.0;
    double wage_per_household = 0.0;  // monthly
    double public_housing_share = 0.0;
};

// Per-jurisdiction components that bind a block in one month.
struct BlockLevels {
    double federal = 0.0;
    std::optional<double> state;
    std::optional<double> county;
    std::optional<double> place;

    double binding() const;
};

BlockLevels block_levels(const BlockRecord& block, YearMonth month, const PolicySet& policies);

// Max of federal, state, county and place levels in force for the block.
double binding_mw_for_block(const BlockRecord& block, YearMonth month, const PolicySet& policies);

// Housing-unit weighted mean of block-level minimum wages (simple mean when
// the ZIP has no housing units).
double weighted_zip_mw(const std::vector<std::pair<double, double>>& units_and_mw);

ZipMonthPolicy aggregate_zip_mw(const std::vector<BlockRecord>& blocks, YearMonth month,
                                const PolicySet& policies);

// One row per (zip, month), sorted by zip then month.
std::vector<ZipMonthPolicy> build_zip_panel(const std::vector<BlockRecord>& blocks,
                                            const PolicySet& policies, YearMonth first,
                                            YearMonth last);

std::map<std::string, std::vector<BlockRecord>> group_blocks_by_zip(
    const std::vector<BlockRecord>& blocks);

struct WageBin {
    double lower = 0.0;
    double upper = 0.0;  // may be +inf for the open top bin
    double workers = 0.0;
};

struct MwWorkerShare {
    double share = 0.0;
    double annual_mw_income = 0.0;  // YW
    bool above_top_bin = false;     // warning: YW beyond every finite bin
};

// Share of workers at or below the annual income of a full-time minimum-wage
// worker, interpolating linearly inside the bin that contains it.
MwWorkerShare estimate_mw_worker_share(const std::vector<WageBin>& bins, double hourly_mw,
                                       double hours_per_month = 130.0, double months = 12.0);

struct HousingShareInput {
    std::string zip;
    double safmr_rent = 0.0;                   // monthly
    std::optional<double> annual_wage_per_hh;  // nullopt when missing
};

struct HousingShares {
    std::vector<std::pair<std::string, double>> shares;  // input order, excluded rows skipped
    std::vector<std::string> excluded;                   // zips with missing or invalid wages
    double lower_clamp = 0.0;
    double upper_clamp = 0.0;
};

// Nearest-rank percentile (p in [0, 100]) of an already sorted sample.
double nearest_rank_percentile(const std::vector<double>& sorted, double p);

// Clamp to the [lo, hi] nearest-rank percentiles of the sample itself.
std::vector<double> winsorize(const std::vector<double>& values, double lo_pct, double hi_pct);

HousingShares housing_expenditure_shares(const std::vector<HousingShareInput>& raw,
                                         double winsor_lo = 0.5, double winsor_hi = 99.5);

}  // namespace mwspill
