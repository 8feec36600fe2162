#include "mwspill/counterfactual.hpp"

#include "mwspill/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace mwspill {

void PolicyScenario::validate() const {
    for (double v : {beta, gamma, epsilon, wage_threshold}) {
        if (!std::isfinite(v)) throw Error("invalid_scenario", "scenario elasticities must be finite");
    }
    for (const auto& o : overrides) {
        if (!(o.mw > 0.0)) throw Error("invalid_scenario", "override MW must be positive");
    }
}

std::vector<ZipPolicyChange> apply_scenario(const std::vector<BlockRecord>& blocks, const PolicySet& policies,
                                            const PolicyScenario& scenario) {
    scenario.validate();
    for (const auto& o : scenario.overrides) {
        if (!policies.find(o.level, o.region_code)) {
            throw Error("unknown_jurisdiction", "unknown jurisdiction in override: " + to_string(o.level) + " '" +
                                                    o.region_code + "'");
        }
    }
    auto covers = [](const PolicyOverride& o, const BlockRecord& b) {
        switch (o.level) {
            case JurisdictionLevel::federal: return true;
            case JurisdictionLevel::state: return !b.state.empty() && b.state == o.region_code;
            case JurisdictionLevel::county: return !b.county.empty() && b.county == o.region_code;
            case JurisdictionLevel::place: return !b.place.empty() && b.place == o.region_code;
        }
        return false;
    };

    std::vector<ZipPolicyChange> out;
    for (const auto& [zip, zip_blocks] : group_blocks_by_zip(blocks)) {
        std::vector<std::pair<double, double>> before;
        std::vector<std::pair<double, double>> after;
        for (const auto& b : zip_blocks) {
            const double base = block_levels(b, scenario.base_month, policies).binding();
            double cf = base;
            for (const auto& o : scenario.overrides) {
                if (covers(o, b)) cf = std::max(cf, o.mw);
            }
            before.emplace_back(b.housing_units, base);
            after.emplace_back(b.housing_units, cf);
        }
        ZipPolicyChange c;
        c.zip = zip;
        c.mw_before = weighted_zip_mw(before);
        c.mw_after = weighted_zip_mw(after);
        c.d_mw_res = std::log(c.mw_after) - std::log(c.mw_before);
        out.push_back(c);
    }
    return out;
}

std::vector<MeasureChange> measure_changes(const ShareTable& shares, const std::vector<ZipPolicyChange>& changes) {
    std::map<std::string, const ZipPolicyChange*> by_zip;
    for (const auto& c : changes) by_zip[c.zip] = &c;
    std::vector<MeasureChange> out;
    for (const auto& c : changes) {
        auto it = shares.by_origin.find(c.zip);
        if (it == shares.by_origin.end()) continue;
        double wkp = 0.0;
        std::string missing;
        for (const auto& [dest, pi] : it->second.weights) {
            auto d = by_zip.find(dest);
            if (d == by_zip.end()) {
                missing += (missing.empty() ? "" : ", ") + dest;
                continue;
            }
            wkp += pi * d->second->d_mw_res;
        }
        if (!missing.empty()) {
            throw Error("missing_destination_policy", "origin " + c.zip + " has destinations without a policy: " + missing);
        }
        out.push_back({c.zip, c.mw_before, c.d_mw_res, wkp});
    }
    return out;
}

PredictedChange predict_changes(double d_mw_res, double d_mw_wkp, const PolicyScenario& scenario) {
    return {scenario.beta * d_mw_wkp + scenario.gamma * d_mw_res, scenario.epsilon * d_mw_wkp};
}

double share_pocketed(double s, double d_mw_res, double d_mw_wkp, const PolicyScenario& scenario) {
    const double wage = std::expm1(scenario.epsilon * d_mw_wkp);
    if (wage == 0.0) throw Error("undefined_incidence", "undefined incidence: no wage change");
    return s * std::expm1(scenario.beta * d_mw_wkp + scenario.gamma * d_mw_res) / wage;
}

double total_incidence(const std::vector<IncidenceInput>& zips, const PolicyScenario& scenario) {
    if (zips.empty()) throw Error("empty_set", "total incidence needs at least one ZIP");
    double rent = 0.0;
    double wage = 0.0;
    for (const auto& z : zips) {
        rent += z.safmr_rent * std::expm1(scenario.beta * z.d_mw_wkp + scenario.gamma * z.d_mw_res);
        wage += z.wage_per_household * std::expm1(scenario.epsilon * z.d_mw_wkp);
    }
    if (wage == 0.0) throw Error("zero_denominator", "total wage change is zero");
    return rent / wage;
}

CbsaFilter filter_affected_cbsas(const std::vector<IncidenceRow>& rows, double wage_threshold) {
    std::map<std::string, std::pair<double, std::size_t>> sums;
    for (const auto& r : rows) {
        auto& s = sums[r.cbsa];
        s.first += r.d_y;
        ++s.second;
    }
    CbsaFilter out;
    for (const auto& [cbsa, s] : sums) {
        if (s.first / static_cast<double>(s.second) < wage_threshold) out.excluded_cbsas.push_back(cbsa);
    }
    for (const auto& r : rows) {
        if (!std::binary_search(out.excluded_cbsas.begin(), out.excluded_cbsas.end(), r.cbsa)) {
            out.retained_zips.push_back(r.zip);
        }
    }
    return out;
}

std::vector<DecileRow> decile_profile(const std::vector<IncidenceRow>& rows) {
    std::vector<const IncidenceRow*> defined;
    for (const auto& r : rows) {
        if (r.rho) defined.push_back(&r);
    }
    if (defined.size() < 10) throw Error("too_few_values", "decile profile needs at least 10 defined values");
    std::sort(defined.begin(), defined.end(), [](const IncidenceRow* a, const IncidenceRow* b) {
        const double ga = a->d_mw_wkp - a->d_mw_res;
        const double gb = b->d_mw_wkp - b->d_mw_res;
        if (ga != gb) return ga < gb;
        return a->zip < b->zip;
    });
    std::vector<DecileRow> out(10);
    const std::size_t n = defined.size();
    for (std::size_t k = 0; k < n; ++k) {
        auto& d = out[k * 10 / n];
        d.mean_gap += defined[k]->d_mw_wkp - defined[k]->d_mw_res;
        d.mean_rho += *defined[k]->rho;
        ++d.count;
    }
    for (std::size_t k = 0; k < 10; ++k) {
        out[k].decile = static_cast<int>(k) + 1;
        out[k].mean_gap /= static_cast<double>(out[k].count);
        out[k].mean_rho /= static_cast<double>(out[k].count);
    }
    return out;
}

std::vector<EpsilonPoint> sensitivity_epsilon(const std::vector<IncidenceInput>& zips, PolicyScenario scenario,
                                              const std::vector<double>& epsilon_grid) {
    std::vector<EpsilonPoint> out;
    for (double e : epsilon_grid) {
        if (!(e > 0.0)) throw Error("invalid_argument", "epsilon grid must be positive");
        scenario.epsilon = e;
        out.push_back({e, total_incidence(zips, scenario)});
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) return std::nan("");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<IncidenceInput> IncidenceResult::aggregate_inputs() const {
    std::vector<IncidenceInput> out;
    for (const auto& r : rows) {
        if (r.retained && r.rho) out.push_back({r.zip, r.safmr_rent, r.wage_per_household, r.d_mw_res, r.d_mw_wkp});
    }
    return out;
}

IncidenceResult evaluate_incidence(const std::vector<MeasureChange>& changes,
                                   const std::map<std::string, ZipEconomics>& economics,
                                   const PolicyScenario& scenario) {
    scenario.validate();
    IncidenceResult res;
    for (const auto& c : changes) {
        auto it = economics.find(c.zip);
        if (it == economics.end()) {
            res.missing_covariates.push_back(c.zip);
            continue;
        }
        IncidenceRow row;
        row.zip = c.zip;
        row.cbsa = it->second.cbsa;
        row.mw_before = c.mw_before;
        row.d_mw_res = c.d_mw_res;
        row.d_mw_wkp = c.d_mw_wkp;
        const auto pred = predict_changes(c.d_mw_res, c.d_mw_wkp, scenario);
        row.d_r = pred.d_r;
        row.d_y = pred.d_y;
        row.s = it->second.housing_exp_share;
        row.safmr_rent = it->second.safmr_rent;
        row.wage_per_household = it->second.wage_per_household;
        if (std::expm1(scenario.epsilon * c.d_mw_wkp) != 0.0) {
            row.rho = share_pocketed(row.s, c.d_mw_res, c.d_mw_wkp, scenario);
        }
        res.rows.push_back(std::move(row));
    }

    const auto filter = filter_affected_cbsas(res.rows, scenario.wage_threshold);
    res.excluded_cbsas = filter.excluded_cbsas;
    for (auto& r : res.rows) {
        r.retained = !std::binary_search(filter.excluded_cbsas.begin(), filter.excluded_cbsas.end(), r.cbsa);
        if (!r.retained) continue;
        ++res.n_retained;
        if (!r.rho) ++res.n_undefined;
    }
    const auto inputs = res.aggregate_inputs();
    if (inputs.empty()) throw Error("empty_set", "no retained ZIP has a wage change");
    res.rho_total = total_incidence(inputs, scenario);

    const auto& split = scenario.groups;
    auto upper = [&](double mw) { return split.threshold_in_upper ? mw >= split.threshold : mw > split.threshold; };
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", split.threshold);
    const std::string thr = buf;
    const std::string low_label = (split.threshold_in_upper ? "previous_mw_lt_" : "previous_mw_le_") + thr;
    const std::string high_label = (split.threshold_in_upper ? "previous_mw_ge_" : "previous_mw_gt_") + thr;
    for (bool hi : {false, true}) {
        IncidenceGroup g;
        g.label = hi ? high_label : low_label;
        std::vector<double> dres, dwkp, s, rho;
        for (const auto& r : res.rows) {
            if (!r.retained || !r.rho || upper(r.mw_before) != hi) continue;
            dres.push_back(r.d_mw_res);
            dwkp.push_back(r.d_mw_wkp);
            s.push_back(r.s);
            rho.push_back(*r.rho);
        }
        g.count = rho.size();
        g.median_d_mw_res = median(dres);
        g.median_d_mw_wkp = median(dwkp);
        g.median_s = median(s);
        g.median_rho = median(rho);
        res.groups.push_back(g);
    }

    std::vector<IncidenceRow> retained;
    for (const auto& r : res.rows) {
        if (r.retained) retained.push_back(r);
    }
    std::size_t defined = 0;
    for (const auto& r : retained) defined += r.rho ? 1 : 0;
    if (defined >= 10) res.deciles = decile_profile(retained);
    return res;
}

}  // namespace mwspill
