#include "mwspill/policy_panel.hpp"

#include "mwspill/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mwspill {

JurisdictionLevel parse_level(const std::string& text) {
    if (text == "federal") return JurisdictionLevel::federal;
    if (text == "state") return JurisdictionLevel::state;
    if (text == "county") return JurisdictionLevel::county;
    if (text == "place" || text == "city" || text == "local") return JurisdictionLevel::place;
    throw Error("schema", "unknown jurisdiction level '" + text + "'");
}

std::string to_string(JurisdictionLevel level) {
    switch (level) {
        case JurisdictionLevel::federal: return "federal";
        case JurisdictionLevel::state: return "state";
        case JurisdictionLevel::county: return "county";
        case JurisdictionLevel::place: return "place";
    }
    return "unknown";
}

void PolicySchedule::validate() const {
    if (steps.empty()) {
        throw Error("invalid_schedule", "schedule '" + jurisdiction_id + "' has no steps");
    }
    for (std::size_t k = 0; k < steps.size(); ++k) {
        if (!(steps[k].mw > 0.0) || !std::isfinite(steps[k].mw)) {
            throw Error("invalid_schedule", "schedule '" + jurisdiction_id +
                                                "' has a non-positive level at " +
                                                steps[k].month.to_string());
        }
        if (k > 0 && !(steps[k - 1].month < steps[k].month)) {
            throw Error("invalid_schedule", "schedule '" + jurisdiction_id +
                                                "' months not strictly increasing at " +
                                                steps[k].month.to_string());
        }
    }
}

std::optional<double> PolicySchedule::level_at(YearMonth month) const {
    auto it = std::upper_bound(steps.begin(), steps.end(), month,
                               [](YearMonth m, const PolicyStep& s) { return m < s.month; });
    if (it == steps.begin()) return std::nullopt;
    return std::prev(it)->mw;
}

PolicySet::PolicySet(std::vector<PolicySchedule> schedules) : schedules_(std::move(schedules)) {
    std::size_t n_federal = 0;
    for (std::size_t k = 0; k < schedules_.size(); ++k) {
        const auto& s = schedules_[k];
        s.validate();
        if (s.level == JurisdictionLevel::federal) {
            ++n_federal;
            federal_index_ = k;
        }
        auto [it, inserted] = index_.emplace(std::make_pair(s.level, s.region_code), k);
        if (!inserted) {
            throw Error("invalid_schedule", "duplicate schedule for " + to_string(s.level) + " '" +
                                                s.region_code + "'");
        }
    }
    if (n_federal != 1) {
        throw Error("invalid_schedule", "expected exactly one federal schedule, found " +
                                            std::to_string(n_federal));
    }
}

const PolicySchedule* PolicySet::find(JurisdictionLevel level, const std::string& region_code) const {
    if (level == JurisdictionLevel::federal) return &federal();
    auto it = index_.find({level, region_code});
    return it == index_.end() ? nullptr : &schedules_[it->second];
}

double BlockLevels::binding() const {
    double v = federal;
    for (const auto& o : {state, county, place}) {
        if (o) v = std::max(v, *o);
    }
    return v;
}

BlockLevels block_levels(const BlockRecord& block, YearMonth month, const PolicySet& policies) {
    BlockLevels lv;
    auto fed = policies.federal().level_at(month);
    if (!fed) {
        throw Error("uncovered_month", "uncovered month " + month.to_string() +
                                           ": federal schedule starts at " +
                                           policies.federal().steps.front().month.to_string());
    }
    lv.federal = *fed;
    auto lookup = [&](JurisdictionLevel level, const std::string& code) -> std::optional<double> {
        if (code.empty()) return std::nullopt;
        const PolicySchedule* s = policies.find(level, code);
        return s ? s->level_at(month) : std::nullopt;
    };
    lv.state = lookup(JurisdictionLevel::state, block.state);
    lv.county = lookup(JurisdictionLevel::county, block.county);
    lv.place = lookup(JurisdictionLevel::place, block.place);
    return lv;
}

double binding_mw_for_block(const BlockRecord& block, YearMonth month, const PolicySet& policies) {
    return block_levels(block, month, policies).binding();
}

double weighted_zip_mw(const std::vector<std::pair<double, double>>& units_and_mw) {
    if (units_and_mw.empty()) throw Error("empty_zip", "ZIP has no blocks");
    double units = 0.0;
    double num = 0.0;
    double plain = 0.0;
    double lo = units_and_mw.front().second;
    double hi = lo;
    for (const auto& [u, mw] : units_and_mw) {
        units += u;
        num += u * mw;
        plain += mw;
        lo = std::min(lo, mw);
        hi = std::max(hi, mw);
    }
    // Rounding can push the mean of equal levels a ulp outside the block range.
    const double mean = units > 0.0 ? num / units : plain / static_cast<double>(units_and_mw.size());
    return std::clamp(mean, lo, hi);
}

ZipMonthPolicy aggregate_zip_mw(const std::vector<BlockRecord>& blocks, YearMonth month,
                                const PolicySet& policies) {
    if (blocks.empty()) throw Error("empty_zip", "ZIP has no blocks");
    std::vector<std::pair<double, double>> cells;
    cells.reserve(blocks.size());
    for (const auto& b : blocks) {
        if (b.zip != blocks.front().zip) {
            throw Error("mixed_zip", "aggregate_zip_mw received blocks from several ZIPs");
        }
        cells.emplace_back(b.housing_units, binding_mw_for_block(b, month, policies));
    }
    ZipMonthPolicy out;
    out.zip = blocks.front().zip;
    out.month = month;
    out.statutory_mw = weighted_zip_mw(cells);
    out.mw_res = std::log(out.statutory_mw);
    return out;
}

std::map<std::string, std::vector<BlockRecord>> group_blocks_by_zip(
    const std::vector<BlockRecord>& blocks) {
    std::map<std::string, std::vector<BlockRecord>> by_zip;
    for (const auto& b : blocks) {
        if (b.zip.empty()) throw Error("schema", "block '" + b.block_id + "' has an empty zip");
        by_zip[b.zip].push_back(b);
    }
    return by_zip;
}

std::vector<ZipMonthPolicy> build_zip_panel(const std::vector<BlockRecord>& blocks,
                                            const PolicySet& policies, YearMonth first,
                                            YearMonth last) {
    std::vector<ZipMonthPolicy> out;
    if (last < first) return out;
    auto by_zip = group_blocks_by_zip(blocks);
    out.reserve(by_zip.size() * static_cast<std::size_t>(last - first + 1));
    for (const auto& [zip, zb] : by_zip) {
        for (YearMonth m = first; m <= last; m = m + 1) {
            out.push_back(aggregate_zip_mw(zb, m, policies));
        }
    }
    return out;
}

MwWorkerShare estimate_mw_worker_share(const std::vector<WageBin>& bins, double hourly_mw,
                                       double hours_per_month, double months) {
    MwWorkerShare out;
    out.annual_mw_income = hourly_mw * hours_per_month * months;
    const double yw = out.annual_mw_income;

    double total = 0.0;
    for (std::size_t k = 0; k < bins.size(); ++k) {
        const auto& b = bins[k];
        if (b.workers < 0.0) throw Error("invalid_bins", "negative worker count in wage bin");
        if (!(b.upper > b.lower)) throw Error("invalid_bins", "wage bin with upper <= lower");
        if (k > 0 && bins[k - 1].upper != b.lower) {
            throw Error("invalid_bins", "wage bins must be contiguous and non-overlapping");
        }
        total += b.workers;
    }
    if (!(total > 0.0)) throw Error("empty_workforce", "empty workforce: no workers in wage bins");

    double below = 0.0;
    bool inside = false;
    for (const auto& b : bins) {
        if (yw >= b.upper) {
            below += b.workers;
        } else if (yw > b.lower) {
            // Open top bin carries no interpolation range.
            if (std::isfinite(b.upper)) below += b.workers * (yw - b.lower) / (b.upper - b.lower);
            inside = true;
            break;
        } else {
            inside = true;
            break;
        }
    }
    if (!inside) out.above_top_bin = true;
    out.share = below / total;
    return out;
}

double nearest_rank_percentile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw Error("empty_sample", "percentile of an empty sample");
    const auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<long long>(std::ceil(p / 100.0 * n));
    rank = std::clamp<long long>(rank, 1, static_cast<long long>(sorted.size()));
    return sorted[static_cast<std::size_t>(rank - 1)];
}

std::vector<double> winsorize(const std::vector<double>& values, double lo_pct, double hi_pct) {
    if (values.empty()) return {};
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const double lo = nearest_rank_percentile(sorted, lo_pct);
    const double hi = nearest_rank_percentile(sorted, hi_pct);
    std::vector<double> out(values.size());
    std::transform(values.begin(), values.end(), out.begin(),
                   [&](double v) { return std::clamp(v, lo, hi); });
    return out;
}

HousingShares housing_expenditure_shares(const std::vector<HousingShareInput>& raw,
                                         double winsor_lo, double winsor_hi) {
    if (!(winsor_lo >= 0.0 && winsor_lo <= winsor_hi && winsor_hi <= 100.0)) {
        throw Error("invalid_argument", "winsorization percentiles must satisfy 0 <= lo <= hi <= 100");
    }
    HousingShares out;
    std::vector<double> ratios;
    std::vector<std::string> zips;
    for (const auto& r : raw) {
        if (!r.annual_wage_per_hh || !(*r.annual_wage_per_hh > 0.0) || !(r.safmr_rent > 0.0)) {
            out.excluded.push_back(r.zip);
            continue;
        }
        zips.push_back(r.zip);
        ratios.push_back(r.safmr_rent / (*r.annual_wage_per_hh / 12.0));
    }
    if (ratios.empty()) return out;
    std::vector<double> sorted = ratios;
    std::sort(sorted.begin(), sorted.end());
    out.lower_clamp = nearest_rank_percentile(sorted, winsor_lo);
    out.upper_clamp = nearest_rank_percentile(sorted, winsor_hi);
    for (std::size_t k = 0; k < ratios.size(); ++k) {
        out.shares.emplace_back(zips[k], std::clamp(ratios[k], out.lower_clamp, out.upper_clamp));
    }
    return out;
}

}  // namespace mwspill
