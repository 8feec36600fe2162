#include "mwspill/synthetic.hpp"

#include "mwspill/error.hpp"
#include "mwspill/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

namespace mwspill {

void SyntheticPanelConfig::validate() const {
    if (n_zips < 4) throw Error("invalid_config", "synthetic panel needs at least 4 zips");
    if (n_months < 3) throw Error("invalid_config", "synthetic panel needs at least 3 months");
    if (n_states < 2) throw Error("invalid_config", "synthetic panel needs at least 2 states");
    if (n_cbsas < 1 || static_cast<std::size_t>(n_cbsas) > n_zips) {
        throw Error("invalid_config", "number of CBSAs must lie in [1, n_zips]");
    }
    if (!(noise_scale >= 0.0) || !(fe_scale >= 0.0) || !(time_scale >= 0.0) || !(control_scale >= 0.0)) {
        throw Error("invalid_config", "scales must be non-negative");
    }
    if (!(ar1_rho >= -1.0 && ar1_rho <= 1.0)) throw Error("invalid_config", "ar1_rho must lie in [-1, 1]");
}

std::vector<std::string> control_names(const SyntheticPanelConfig& cfg) {
    std::vector<std::string> names;
    for (std::size_t k = 0; k < cfg.controls_effect.size(); ++k) names.push_back("x" + std::to_string(k + 1));
    return names;
}

namespace {

std::string zip_code(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu", 10000 + i);
    return buf;
}

std::string state_code(int s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "S%02d", s);
    return buf;
}

double round_cents(double v) { return std::round(v * 20.0) / 20.0; }

}  // namespace

SyntheticGeography build_geography(const SyntheticPanelConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(derive_seed(cfg.seed, 0));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto uniform = [&](double a, double b) { return a + (b - a) * unif(rng); };
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    SyntheticGeography geo;
    int pad = 0;
    for (const auto& [k, v] : cfg.dynamic_effects) pad = std::max(pad, std::abs(k));
    geo.pad = pad;
    geo.first_month = cfg.start;
    geo.n_months = cfg.n_months;
    const YearMonth first = cfg.start - pad;
    const YearMonth last = cfg.start + (cfg.n_months - 1 + pad);
    const int span = cfg.n_months;

    // Jurisdictions.
    std::vector<PolicySchedule> schedules;
    schedules.push_back({"federal", JurisdictionLevel::federal, "US", {{first, 7.25}}});
    std::vector<double> state_top(static_cast<std::size_t>(cfg.n_states), 7.25);
    for (int s = 0; s < cfg.n_states; ++s) {
        if (unif(rng) >= cfg.state_adoption_prob) continue;
        PolicySchedule sch{"state_" + state_code(s), JurisdictionLevel::state, state_code(s), {}};
        const int m1 = pick(2, std::max(2, span - 3));
        double level = round_cents(7.25 + uniform(0.5, 2.5));
        sch.steps.push_back({cfg.start + m1, level});
        if (unif(rng) < 0.5 && m1 + 12 < span - 1) {
            level = round_cents(level + uniform(0.25, 1.0));
            sch.steps.push_back({cfg.start + (m1 + 12), level});
        }
        state_top[static_cast<std::size_t>(s)] = level;
        schedules.push_back(std::move(sch));
    }

    // Geography: CBSA c lives in state c mod S; every third CBSA straddles a border.
    const auto n_cbsas = static_cast<std::size_t>(cfg.n_cbsas);
    std::vector<std::vector<std::size_t>> cbsa_zips(n_cbsas);
    std::vector<std::string> cbsa_place(n_cbsas);
    for (std::size_t c = 0; c < n_cbsas; ++c) {
        if (unif(rng) >= cfg.place_prob) continue;
        const int s = static_cast<int>(c) % cfg.n_states;
        cbsa_place[c] = "P" + std::to_string(c);
        const double level = round_cents(state_top[static_cast<std::size_t>(s)] + uniform(0.5, 2.5));
        schedules.push_back({"place_" + cbsa_place[c], JurisdictionLevel::place, cbsa_place[c],
                             {{cfg.start + pick(2, std::max(2, span - 3)), level}}});
    }
    geo.policies = PolicySet(std::move(schedules));

    for (std::size_t i = 0; i < cfg.n_zips; ++i) {
        const std::size_t c = i % n_cbsas;
        int s = static_cast<int>(c) % cfg.n_states;
        if (c % 3 == 0 && (i / n_cbsas) % 2 == 1) s = (s + 1) % cfg.n_states;
        ZipInfo z;
        z.zip = zip_code(i);
        z.state = state_code(s);
        z.cbsa = "M" + std::to_string(c);
        z.county = "C" + std::to_string(s) + "-" + std::to_string(c);
        z.entry_cohort = "Q" + std::to_string(pick(1, 4));
        z.moderators["mw_worker_share"] = uniform(0.05, 0.45);
        z.moderators["median_hh_income"] = std::exp(std::log(60000.0) + 0.3 * (unif(rng) - 0.5) * 3.46);
        z.moderators["public_housing_share"] = uniform(0.0, 0.1);
        const bool in_place_state = s == static_cast<int>(c) % cfg.n_states;
        const int n_blocks = pick(1, 3);
        for (int b = 0; b < n_blocks; ++b) {
            BlockRecord blk;
            blk.block_id = z.zip + "-" + std::to_string(b);
            blk.zip = z.zip;
            blk.state = z.state;
            blk.county = z.county;
            if (!cbsa_place[c].empty() && in_place_state && unif(rng) < 0.5) blk.place = cbsa_place[c];
            blk.housing_units = std::floor(uniform(0.0, 500.0));
            geo.blocks.push_back(std::move(blk));
        }
        cbsa_zips[c].push_back(i);
        geo.zips.push_back(std::move(z));
    }

    // Commuting: own zip, several zips of the same CBSA, sometimes one far away.
    geo.commuting.year = 2017;
    geo.commuting.category = CommutingCategory::all;
    for (std::size_t i = 0; i < cfg.n_zips; ++i) {
        const auto& origin = geo.zips[i].zip;
        geo.commuting.entries.push_back({origin, origin, std::floor(uniform(50.0, 200.0))});
        if (cfg.commute_own_only) continue;
        const auto& peers = cbsa_zips[i % n_cbsas];
        std::set<std::size_t> dests;
        const int want = std::min<int>(pick(3, 6), static_cast<int>(peers.size()) - 1);
        while (static_cast<int>(dests.size()) < want) {
            const std::size_t j = peers[static_cast<std::size_t>(pick(0, static_cast<int>(peers.size()) - 1))];
            if (j != i) dests.insert(j);
        }
        if (unif(rng) < 0.3) {
            const auto j = static_cast<std::size_t>(pick(0, static_cast<int>(cfg.n_zips) - 1));
            if (j != i) dests.insert(j);
        }
        for (auto j : dests) geo.commuting.entries.push_back({origin, geo.zips[j].zip, std::floor(uniform(10.0, 100.0))});
    }

    const auto zip_policies = build_zip_panel(geo.blocks, geo.policies, first, last);
    std::vector<YearMonth> months;
    for (YearMonth m = first; m <= last; m = m + 1) months.push_back(m);
    auto mp = build_measure_panel({geo.commuting}, zip_policies, months, SharePolicy::fixed(2017),
                                  CommutingCategory::all);
    geo.measures = std::move(mp.rows);

    std::vector<MeasureRow> observed;
    for (const auto& r : geo.measures) {
        if (r.month >= cfg.start && r.month < cfg.start + cfg.n_months) observed.push_back(r);
    }
    const auto diag = rank_condition_check(observed);
    if (diag.collinear) {
        throw Error("collinear_adoption", "adoption pattern leaves the residence and workplace measures collinear");
    }
    return geo;
}

SyntheticPanel simulate_outcomes(const SyntheticGeography& geo, const SyntheticPanelConfig& cfg,
                                 std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 1));
    std::normal_distribution<double> normal(0.0, 1.0);
    const int t_len = geo.n_months;
    const int span = t_len + 2 * geo.pad;
    const auto names = control_names(cfg);

    std::map<std::string, std::size_t> offset;
    for (std::size_t k = 0; k < geo.measures.size(); ++k) offset.emplace(geo.measures[k].zip, k);
    for (auto& [zip, k] : offset) {
        if (k + static_cast<std::size_t>(span) > geo.measures.size() || geo.measures[k].month != geo.first_month - geo.pad) {
            throw Error("invalid_geography", "measure panel is not balanced over the padded months");
        }
    }

    SyntheticPanel out;
    out.truth.beta = cfg.true_beta;
    out.truth.gamma = cfg.true_gamma;
    out.truth.dynamic_effects = cfg.dynamic_effects;
    out.truth.beta_slope = cfg.beta_slope;
    out.truth.seed = seed;
    for (std::size_t k = 0; k < names.size(); ++k) out.truth.eta[names[k]] = cfg.controls_effect[k];

    std::vector<double> delta(static_cast<std::size_t>(t_len), 0.0);
    for (int t = 1; t < t_len; ++t) {
        delta[static_cast<std::size_t>(t)] = delta[static_cast<std::size_t>(t - 1)] + 0.002 + cfg.time_scale * normal(rng);
        out.truth.delta.emplace_back(geo.first_month + t,
                                     delta[static_cast<std::size_t>(t)] - delta[static_cast<std::size_t>(t - 1)]);
    }

    double mod_mean = 0.0;
    double mod_sd = 1.0;
    if (cfg.beta_slope != 0.0) {
        double s1 = 0.0;
        double s2 = 0.0;
        for (const auto& z : geo.zips) {
            const double v = z.moderators.at("mw_worker_share");
            s1 += v;
            s2 += v * v;
        }
        const double n = static_cast<double>(geo.zips.size());
        mod_mean = s1 / n;
        mod_sd = std::sqrt(std::max(1e-300, s2 / n - mod_mean * mod_mean));
    }

    const double rho = cfg.ar1_rho;
    out.panel.reserve(geo.zips.size() * static_cast<std::size_t>(t_len));
    for (const auto& z : geo.zips) {
        const std::size_t base = offset.at(z.zip) + static_cast<std::size_t>(geo.pad);
        const double alpha = 0.4 + cfg.fe_scale * normal(rng);
        std::map<int, double> effects = cfg.dynamic_effects;
        effects[0] += cfg.true_beta +
                      (cfg.beta_slope != 0.0 ? cfg.beta_slope * (z.moderators.at("mw_worker_share") - mod_mean) / mod_sd
                                             : 0.0);
        std::vector<double> x(names.size());
        for (auto& v : x) v = 0.1 * normal(rng);
        double u = std::abs(rho) < 1.0 ? cfg.noise_scale / std::sqrt(1.0 - rho * rho) * normal(rng) : 0.0;
        for (int t = 0; t < t_len; ++t) {
            if (t > 0) {
                for (auto& v : x) v += cfg.control_scale * normal(rng);
                u = rho * u + cfg.noise_scale * normal(rng);
            }
            const auto& row = geo.measures[base + static_cast<std::size_t>(t)];
            PanelObservation o;
            o.zip = z.zip;
            o.month = row.month;
            o.mw_res = row.mw_res;
            o.mw_wkp = row.mw_wkp;
            double r = alpha + delta[static_cast<std::size_t>(t)] + cfg.true_gamma * row.mw_res + u;
            for (const auto& [k, b] : effects) {
                r += b * geo.measures[static_cast<std::size_t>(static_cast<long>(base) + t - k)].mw_wkp;
            }
            for (std::size_t k = 0; k < names.size(); ++k) {
                o.controls[names[k]] = x[k];
                r += cfg.controls_effect[k] * x[k];
            }
            o.r = r;
            o.state = z.state;
            o.county = z.county;
            o.cbsa = z.cbsa;
            o.entry_cohort = z.entry_cohort;
            o.moderators = z.moderators;
            out.panel.push_back(std::move(o));
        }
    }
    return out;
}

SyntheticPanel generate_synthetic_panel(const SyntheticPanelConfig& cfg) {
    return simulate_outcomes(build_geography(cfg), cfg, cfg.seed);
}

}  // namespace mwspill
