#include "mwspill/io.hpp"

#include "mwspill/csv.hpp"
#include "mwspill/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mwspill::io {

namespace {

std::string where(const csv::Table& t, std::size_t row) {
    return t.source() + ":" + std::to_string(t.line_of(row));
}

YearMonth month_at(const csv::Table& t, std::size_t row, std::size_t col) {
    try {
        return YearMonth::parse(t.at(row, col));
    } catch (const Error& e) {
        throw Error("schema", where(t, row) + ": " + e.what());
    }
}

const std::string& text_at(const csv::Table& t, std::size_t row, std::size_t col) {
    const auto& v = t.at(row, col);
    if (v.empty()) throw Error("schema", where(t, row) + ": missing value in column '" + t.header()[col] + "'");
    return v;
}

std::string fmt(double v) { return csv::format_double(v); }

}  // namespace

PolicySet read_policies(const std::string& path) {
    const auto t = csv::Table::read_file(path);
    t.require_columns({"jurisdiction_id", "level", "region_code", "month", "mw_dollars"});
    const auto c_id = t.column("jurisdiction_id");
    const auto c_level = t.column("level");
    const auto c_region = t.column("region_code");
    const auto c_month = t.column("month");
    const auto c_mw = t.column("mw_dollars");

    std::map<std::string, PolicySchedule> by_id;
    std::map<std::pair<std::string, int>, std::size_t> seen;
    std::vector<std::string> order;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        const auto& id = text_at(t, r, c_id);
        JurisdictionLevel level;
        try {
            level = parse_level(t.at(r, c_level));
        } catch (const Error& e) {
            throw Error("schema", where(t, r) + ": " + e.what());
        }
        const auto& region = t.at(r, c_region);
        const YearMonth month = month_at(t, r, c_month);
        const double mw = t.number(r, c_mw);
        if (!(mw > 0.0)) throw Error("schema", where(t, r) + ": mw_dollars must be positive");
        auto [it, inserted] = seen.emplace(std::make_pair(id, month.index()), r);
        if (!inserted) {
            throw Error("duplicate_step", where(t, r) + ": duplicate step for jurisdiction '" + id + "' at " +
                                              month.to_string() + " (first at line " +
                                              std::to_string(t.line_of(it->second)) + ")");
        }
        auto found = by_id.find(id);
        if (found == by_id.end()) {
            by_id.emplace(id, PolicySchedule{id, level, region, {}});
            order.push_back(id);
            found = by_id.find(id);
        } else if (found->second.level != level || found->second.region_code != region) {
            throw Error("schema", where(t, r) + ": jurisdiction '" + id + "' changes level or region code");
        }
        found->second.steps.push_back({month, mw});
    }
    std::vector<PolicySchedule> schedules;
    for (const auto& id : order) {
        auto s = by_id.at(id);
        std::stable_sort(s.steps.begin(), s.steps.end(),
                         [](const PolicyStep& a, const PolicyStep& b) { return a.month < b.month; });
        schedules.push_back(std::move(s));
    }
    return PolicySet(std::move(schedules));
}

void write_policies(std::ostream& out, const PolicySet& policies) {
    csv::Writer w(out);
    w.row({"jurisdiction_id", "level", "region_code", "month", "mw_dollars"});
    for (const auto& s : policies.schedules()) {
        for (const auto& step : s.steps) {
            w.row({s.jurisdiction_id, to_string(s.level), s.region_code, step.month.to_string(), fmt(step.mw)});
        }
    }
}

std::vector<BlockRecord> read_blocks(const std::string& path) {
    const auto t = csv::Table::read_file(path);
    t.require_columns({"block_id", "zip", "state", "county", "place", "housing_units"});
    const auto c_id = t.column("block_id");
    const auto c_zip = t.column("zip");
    const auto c_state = t.column("state");
    const auto c_county = t.column("county");
    const auto c_place = t.column("place");
    const auto c_units = t.column("housing_units");
    std::vector<BlockRecord> out;
    std::set<std::string> ids;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        BlockRecord b;
        b.block_id = text_at(t, r, c_id);
        b.zip = text_at(t, r, c_zip);
        b.state = t.at(r, c_state);
        b.county = t.at(r, c_county);
        b.place = t.at(r, c_place);
        b.housing_units = t.number(r, c_units);
        if (!(b.housing_units >= 0.0)) throw Error("schema", where(t, r) + ": housing_units must be >= 0");
        if (!ids.insert(b.block_id).second) {
            throw Error("schema", where(t, r) + ": duplicate block_id '" + b.block_id + "'");
        }
        out.push_back(std::move(b));
    }
    return out;
}

void write_blocks(std::ostream& out, const std::vector<BlockRecord>& blocks) {
    csv::Writer w(out);
    w.row({"block_id", "zip", "state", "county", "place", "housing_units"});
    for (const auto& b : blocks) w.row({b.block_id, b.zip, b.state, b.county, b.place, fmt(b.housing_units)});
}

std::vector<CommutingMatrix> read_commuting(const std::string& path) {
    const auto t = csv::Table::read_file(path);
    t.require_columns({"year", "category", "origin_zip", "dest_zip", "jobs"});
    const auto c_year = t.column("year");
    const auto c_cat = t.column("category");
    const auto c_origin = t.column("origin_zip");
    const auto c_dest = t.column("dest_zip");
    const auto c_jobs = t.column("jobs");
    std::map<std::pair<int, int>, CommutingMatrix> by_key;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        const int year = static_cast<int>(t.integer(r, c_year));
        CommutingCategory cat;
        try {
            cat = parse_category(t.at(r, c_cat));
        } catch (const Error& e) {
            throw Error("schema", where(t, r) + ": " + e.what());
        }
        auto& m = by_key[{year, static_cast<int>(cat)}];
        m.year = year;
        m.category = cat;
        const double jobs = t.number(r, c_jobs);
        if (!(jobs >= 0.0)) throw Error("schema", where(t, r) + ": jobs must be >= 0");
        m.entries.push_back({text_at(t, r, c_origin), text_at(t, r, c_dest), jobs});
    }
    std::vector<CommutingMatrix> out;
    for (auto& [k, m] : by_key) {
        m.validate();
        out.push_back(std::move(m));
    }
    return out;
}

void write_commuting(std::ostream& out, const std::vector<CommutingMatrix>& matrices) {
    csv::Writer w(out);
    w.row({"year", "category", "origin_zip", "dest_zip", "jobs"});
    for (const auto& m : matrices) {
        for (const auto& e : m.entries) {
            w.row({std::to_string(m.year), to_string(m.category), e.origin_zip, e.dest_zip, fmt(e.jobs)});
        }
    }
}

std::vector<CovariateRecord> read_covariates(const std::string& path) {
    const auto t = csv::Table::read_file(path);
    t.require_columns({"zip", "safmr_rent", "annual_wage_hh", "median_hh_income", "public_housing_share"});
    const auto c_zip = t.column("zip");
    const auto c_rent = t.column("safmr_rent");
    const auto c_wage = t.column("annual_wage_hh");
    const auto c_inc = t.column("median_hh_income");
    const auto c_pub = t.column("public_housing_share");
    const bool has_share = t.has_column("mw_worker_share");
    std::vector<CovariateRecord> out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        CovariateRecord c;
        c.zip = text_at(t, r, c_zip);
        c.safmr_rent = t.number(r, c_rent);
        if (!(c.safmr_rent > 0.0)) throw Error("schema", where(t, r) + ": safmr_rent must be positive");
        c.annual_wage_hh = t.optional_number(r, c_wage);
        c.median_hh_income = t.optional_number(r, c_inc);
        c.public_housing_share = t.optional_number(r, c_pub);
        if (has_share) c.mw_worker_share = t.optional_number(r, t.column("mw_worker_share"));
        out.push_back(std::move(c));
    }
    return out;
}

std::map<std::string, ZipInfo> read_zip_info(const std::string& path) {
    const auto t = csv::Table::read_file(path);
    t.require_columns({"zip", "state", "county", "cbsa"});
    const std::set<std::string> fixed{"zip", "state", "county", "cbsa", "entry_cohort"};
    std::map<std::string, ZipInfo> out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        ZipInfo z;
        z.zip = text_at(t, r, t.column("zip"));
        z.state = t.at(r, t.column("state"));
        z.county = t.at(r, t.column("county"));
        z.cbsa = t.at(r, t.column("cbsa"));
        if (t.has_column("entry_cohort")) z.entry_cohort = t.at(r, t.column("entry_cohort"));
        for (std::size_t c = 0; c < t.header().size(); ++c) {
            if (fixed.count(t.header()[c])) continue;
            const auto v = t.optional_number(r, c);
            z.moderators[t.header()[c]] = v ? *v : kMissing;
        }
        if (!out.emplace(z.zip, z).second) throw Error("schema", where(t, r) + ": duplicate zip '" + z.zip + "'");
    }
    return out;
}

void write_zip_info(std::ostream& out, const std::vector<ZipInfo>& zips) {
    csv::Writer w(out);
    std::vector<std::string> header{"zip", "state", "county", "cbsa", "entry_cohort"};
    std::vector<std::string> mods;
    if (!zips.empty()) {
        for (const auto& [k, v] : zips.front().moderators) mods.push_back(k);
    }
    header.insert(header.end(), mods.begin(), mods.end());
    w.row(header);
    for (const auto& z : zips) {
        std::vector<std::string> row{z.zip, z.state, z.county, z.cbsa, z.entry_cohort};
        for (const auto& m : mods) {
            auto it = z.moderators.find(m);
            row.push_back(it == z.moderators.end() ? "NA" : fmt(it->second));
        }
        w.row(row);
    }
}

std::vector<ZipMonthPolicy> read_zip_panel(const std::string& path) {
    const auto t = csv::Table::read_file(path);
    t.require_columns({"zip", "month", "statutory_mw", "mw_res"});
    std::vector<ZipMonthPolicy> out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        ZipMonthPolicy p;
        p.zip = text_at(t, r, t.column("zip"));
        p.month = month_at(t, r, t.column("month"));
        p.statutory_mw = t.number(r, t.column("statutory_mw"));
        p.mw_res = t.number(r, t.column("mw_res"));
        if (!(p.statutory_mw > 0.0)) throw Error("schema", where(t, r) + ": statutory_mw must be positive");
        out.push_back(std::move(p));
    }
    return out;
}

void write_zip_panel(std::ostream& out, const std::vector<ZipMonthPolicy>& rows) {
    csv::Writer w(out);
    w.row({"zip", "month", "statutory_mw", "mw_res"});
    for (const auto& p : rows) w.row({p.zip, p.month.to_string(), fmt(p.statutory_mw), fmt(p.mw_res)});
}

std::vector<MeasureRow> read_measures(const std::string& path) {
    const auto t = csv::Table::read_file(path);
    t.require_columns({"zip", "month", "mw_res", "mw_wkp"});
    std::vector<MeasureRow> out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        MeasureRow m;
        m.zip = text_at(t, r, t.column("zip"));
        m.month = month_at(t, r, t.column("month"));
        m.mw_res = t.number(r, t.column("mw_res"));
        m.mw_wkp = t.number(r, t.column("mw_wkp"));
        out.push_back(std::move(m));
    }
    return out;
}

void write_measures(std::ostream& out, const std::vector<MeasureRow>& rows, const std::string& category,
                    const std::string& share_policy) {
    csv::Writer w(out);
    w.row({"zip", "month", "mw_res", "mw_wkp", "category", "share_policy"});
    for (const auto& m : rows) {
        w.row({m.zip, m.month.to_string(), fmt(m.mw_res), fmt(m.mw_wkp), category, share_policy});
    }
}

void write_rents(std::ostream& out, const Panel& panel) {
    csv::Writer w(out);
    w.row({"zip", "month", "rent_per_sqft"});
    for (const auto& o : panel) w.row({o.zip, o.month.to_string(), fmt(std::exp(o.r))});
}

void write_controls(std::ostream& out, const Panel& panel, const std::vector<std::string>& names) {
    csv::Writer w(out);
    std::vector<std::string> header{"zip", "month"};
    header.insert(header.end(), names.begin(), names.end());
    w.row(header);
    for (const auto& o : panel) {
        std::vector<std::string> row{o.zip, o.month.to_string()};
        for (const auto& n : names) {
            auto it = o.controls.find(n);
            row.push_back(it == o.controls.end() ? "NA" : fmt(it->second));
        }
        w.row(row);
    }
}

namespace {

using CellKey = std::pair<std::string, int>;

// zip-month -> named numeric columns (every column except zip and month, and except `skip`).
std::map<CellKey, std::map<std::string, double>> read_cells(const std::string& path, const std::string& skip) {
    const auto t = csv::Table::read_file(path);
    t.require_columns({"zip", "month"});
    std::map<CellKey, std::map<std::string, double>> out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        const CellKey key{text_at(t, r, t.column("zip")), month_at(t, r, t.column("month")).index()};
        auto [it, inserted] = out.emplace(key, std::map<std::string, double>{});
        if (!inserted) throw Error("schema", where(t, r) + ": duplicate (zip, month)");
        for (std::size_t c = 0; c < t.header().size(); ++c) {
            const auto& h = t.header()[c];
            if (h == "zip" || h == "month" || h == skip) continue;
            const auto v = t.optional_number(r, c);
            it->second[h] = v ? *v : kMissing;
        }
        if (!skip.empty()) {
            const auto v = t.optional_number(r, t.column(skip));
            it->second[skip] = v ? *v : kMissing;
        }
    }
    return out;
}

}  // namespace

Panel assemble_panel(const std::vector<MeasureRow>& measures, const std::string& rents_path,
                     const std::string& controls_path, const std::map<std::string, ZipInfo>& zip_info) {
    auto rents = read_cells(rents_path, "rent_per_sqft");
    std::map<CellKey, std::map<std::string, double>> controls;
    if (!controls_path.empty()) controls = read_cells(controls_path, "");

    Panel out;
    for (const auto& m : measures) {
        const CellKey key{m.zip, m.month.index()};
        auto rent = rents.find(key);
        if (rent == rents.end()) continue;
        PanelObservation o;
        o.zip = m.zip;
        o.month = m.month;
        o.mw_res = m.mw_res;
        o.mw_wkp = m.mw_wkp;
        const double level = rent->second.at("rent_per_sqft");
        o.r = level > 0.0 ? std::log(level) : kMissing;
        for (const auto& [name, v] : rent->second) {
            if (name != "rent_per_sqft") o.controls[name] = v;
        }
        auto c = controls.find(key);
        if (c != controls.end()) {
            for (const auto& [name, v] : c->second) o.controls[name] = v;
        }
        auto z = zip_info.find(m.zip);
        if (z != zip_info.end()) {
            o.state = z->second.state;
            o.county = z->second.county;
            o.cbsa = z->second.cbsa;
            o.entry_cohort = z->second.entry_cohort;
            o.moderators = z->second.moderators;
        }
        out.push_back(std::move(o));
    }
    if (out.empty()) throw Error("empty_join", "joining measures and rents produced an empty sample");
    sort_panel(out);
    return out;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error("schema", path + ": " + e.what());
    }
}

namespace {

template <typename T>
void get_if(const json& j, const char* key, T& target) {
    if (j.contains(key)) {
        try {
            target = j.at(key).get<T>();
        } catch (const json::exception& e) {
            throw Error("schema", std::string("field '") + key + "': " + e.what());
        }
    }
}

}  // namespace

MarketPrimitives primitives_from_json(const json& j) {
    MarketPrimitives prim;
    if (!j.contains("zips") || !j.at("zips").is_array()) throw Error("schema", "primitives need a 'zips' array");
    for (const auto& z : j.at("zips")) {
        ZipMarket m;
        get_if(z, "zip", m.zip);
        if (m.zip.empty()) throw Error("schema", "every market needs a 'zip'");
        get_if(z, "workers", m.workers);
        m.weights.origin_zip = m.zip;
        if (z.contains("weights")) {
            for (const auto& [dest, w] : z.at("weights").items()) m.weights.weights[dest] = w.get<double>();
        } else {
            m.weights.weights[m.zip] = 1.0;
        }
        get_if(z, "xi_r", m.xi_r);
        get_if(z, "xi_p", m.xi_p);
        get_if(z, "xi_y", m.xi_y);
        get_if(z, "eps_p", m.eps_p);
        get_if(z, "eps_y", m.eps_y);
        if (z.contains("eps_y_by_dest")) {
            for (const auto& [dest, e] : z.at("eps_y_by_dest").items()) m.eps_y_by_dest[dest] = e.get<double>();
        }
        get_if(z, "eta", m.eta);
        get_if(z, "demand_scale", m.demand_scale);
        get_if(z, "supply_scale", m.supply_scale);
        prim.zips.push_back(std::move(m));
    }
    prim.validate();
    return prim;
}

json primitives_to_json(const MarketPrimitives& prim) {
    json zs = json::array();
    for (const auto& m : prim.zips) {
        json z;
        z["zip"] = m.zip;
        z["workers"] = m.workers;
        z["weights"] = m.weights.weights;
        z["xi_r"] = m.xi_r;
        z["xi_p"] = m.xi_p;
        z["xi_y"] = m.xi_y;
        z["eps_p"] = m.eps_p;
        z["eps_y"] = m.eps_y;
        if (!m.eps_y_by_dest.empty()) z["eps_y_by_dest"] = m.eps_y_by_dest;
        z["eta"] = m.eta;
        z["demand_scale"] = m.demand_scale;
        z["supply_scale"] = m.supply_scale;
        zs.push_back(z);
    }
    return json{{"zips", zs}};
}

MwLevels mw_levels_from_json(const json& j) {
    MwLevels out;
    for (const auto& [zip, v] : j.items()) {
        const double mw = v.get<double>();
        if (!(mw > 0.0)) throw Error("schema", "MW level for zip " + zip + " must be positive");
        out[zip] = mw;
    }
    return out;
}

PolicyScenario scenario_from_json(const json& j) {
    PolicyScenario s;
    get_if(j, "name", s.name);
    if (j.contains("base_month")) s.base_month = YearMonth::parse(j.at("base_month").get<std::string>());
    if (j.contains("overrides")) {
        for (const auto& o : j.at("overrides")) {
            PolicyOverride ov;
            ov.level = parse_level(o.at("level").get<std::string>());
            get_if(o, "region_code", ov.region_code);
            ov.mw = o.at("mw_dollars").get<double>();
            s.overrides.push_back(std::move(ov));
        }
    }
    get_if(j, "beta", s.beta);
    get_if(j, "gamma", s.gamma);
    get_if(j, "epsilon", s.epsilon);
    get_if(j, "wage_threshold", s.wage_threshold);
    if (j.contains("group_split")) {
        get_if(j.at("group_split"), "threshold", s.groups.threshold);
        get_if(j.at("group_split"), "threshold_in_upper", s.groups.threshold_in_upper);
    }
    s.validate();
    return s;
}

RegressionSpec spec_from_json(const json& j) {
    RegressionSpec s;
    get_if(j, "name", s.name);
    if (j.contains("transform")) s.transform = parse_transform(j.at("transform").get<std::string>());
    if (j.contains("fe")) {
        s.fe.clear();
        for (const auto& f : j.at("fe")) s.fe.push_back(parse_fixed_effect(f.get<std::string>()));
    }
    get_if(j, "include_res", s.include_res);
    get_if(j, "include_wkp", s.include_wkp);
    get_if(j, "res_window", s.res_window);
    get_if(j, "wkp_window", s.wkp_window);
    get_if(j, "measure_shift", s.measure_shift);
    get_if(j, "controls", s.controls);
    get_if(j, "interactions", s.interactions);
    get_if(j, "lagged_dep", s.lagged_dep);
    get_if(j, "iv", s.iv);
    get_if(j, "iv_instrument_lag", s.iv_instrument_lag);
    if (j.contains("cluster")) s.cluster = parse_cluster(j.at("cluster").get<std::string>());
    get_if(j, "use_weights", s.use_weights);
    get_if(j, "small_sample", s.small_sample);
    if (j.contains("fe_method")) s.fe_method = parse_fe_method(j.at("fe_method").get<std::string>());
    s.validate();
    return s;
}

json spec_to_json(const RegressionSpec& s) {
    json fe = json::array();
    for (auto f : s.fe) fe.push_back(to_string(f));
    return json{{"name", s.name},
                {"transform", to_string(s.transform)},
                {"fe", fe},
                {"include_res", s.include_res},
                {"include_wkp", s.include_wkp},
                {"res_window", s.res_window},
                {"wkp_window", s.wkp_window},
                {"measure_shift", s.measure_shift},
                {"controls", s.controls},
                {"interactions", s.interactions},
                {"lagged_dep", s.lagged_dep},
                {"iv", s.iv},
                {"iv_instrument_lag", s.iv_instrument_lag},
                {"cluster", to_string(s.cluster)},
                {"use_weights", s.use_weights},
                {"small_sample", s.small_sample}};
}

SyntheticPanelConfig synthetic_config_from_json(const json& j) {
    SyntheticPanelConfig c;
    get_if(j, "n_zips", c.n_zips);
    get_if(j, "n_months", c.n_months);
    if (j.contains("start")) c.start = YearMonth::parse(j.at("start").get<std::string>());
    get_if(j, "n_states", c.n_states);
    get_if(j, "n_cbsas", c.n_cbsas);
    get_if(j, "state_adoption_prob", c.state_adoption_prob);
    get_if(j, "place_prob", c.place_prob);
    get_if(j, "commute_own_only", c.commute_own_only);
    get_if(j, "true_beta", c.true_beta);
    get_if(j, "true_gamma", c.true_gamma);
    if (j.contains("dynamic_effects")) {
        c.dynamic_effects.clear();
        for (const auto& [k, v] : j.at("dynamic_effects").items()) c.dynamic_effects[std::stoi(k)] = v.get<double>();
    }
    get_if(j, "beta_slope", c.beta_slope);
    get_if(j, "controls_effect", c.controls_effect);
    get_if(j, "fe_scale", c.fe_scale);
    get_if(j, "time_scale", c.time_scale);
    get_if(j, "noise_scale", c.noise_scale);
    get_if(j, "ar1_rho", c.ar1_rho);
    get_if(j, "control_scale", c.control_scale);
    get_if(j, "seed", c.seed);
    c.validate();
    return c;
}

json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "NA";
    return v > 0 ? "inf" : "-inf";
}

json truth_to_json(const SyntheticTruth& truth) {
    json dyn = json::object();
    for (const auto& [k, v] : truth.dynamic_effects) dyn[std::to_string(k)] = v;
    json delta = json::array();
    for (const auto& [m, d] : truth.delta) delta.push_back(json{{"month", m.to_string()}, {"delta", d}});
    return json{{"beta", truth.beta},   {"gamma", truth.gamma},       {"dynamic_effects", dyn},
                {"beta_slope", truth.beta_slope}, {"eta", truth.eta}, {"delta", delta},
                {"seed", truth.seed}};
}

}  // namespace mwspill::io
