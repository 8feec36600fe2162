#include "mwspill/cli.hpp"

#include "mwspill/binscatter.hpp"
#include "mwspill/counterfactual.hpp"
#include "mwspill/csv.hpp"
#include "mwspill/dynamic.hpp"
#include "mwspill/entropy_balance.hpp"
#include "mwspill/equilibrium.hpp"
#include "mwspill/error.hpp"
#include "mwspill/exposure.hpp"
#include "mwspill/inference.hpp"
#include "mwspill/io.hpp"
#include "mwspill/policy_panel.hpp"
#include "mwspill/stacked.hpp"
#include "mwspill/synthetic.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace mwspill::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

enum class LogLevel { quiet = 0, error, warn, info, debug };

LogLevel log_level() {
    const char* env = std::getenv("SPILLOVER_LOG");
    if (!env) return LogLevel::warn;
    const std::string v = env;
    if (v == "quiet" || v == "off" || v == "0") return LogLevel::quiet;
    if (v == "error") return LogLevel::error;
    if (v == "info") return LogLevel::info;
    if (v == "debug") return LogLevel::debug;
    return LogLevel::warn;
}

void log(LogLevel level, const std::string& message) {
    static const LogLevel threshold = log_level();
    if (level > threshold) return;
    static const char* names[] = {"", "error", "warn", "info", "debug"};
    std::cerr << "[" << names[static_cast<int>(level)] << "] " << message << "\n";
}

std::string fmt(double v) { return csv::format_double(v); }

struct Table {
    std::vector<std::string> header;
    std::vector<bool> numeric;  // per column, for JSON output
    std::vector<std::vector<std::string>> rows;
};

struct Context {
    fs::path out = ".";
    std::string format = "csv";
    unsigned long long seed = 1;
    bool seed_given = false;
    int threads = 1;
    RunManifest manifest;

    void write_text(const std::string& name, const std::string& content) {
        fs::create_directories(out);
        const fs::path path = out / name;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw Error("io", "cannot write '" + path.string() + "'");
        f << content;
        if (!f) throw Error("io", "write failed for '" + path.string() + "'");
        manifest.outputs.emplace_back(name, sha256_hex(content));
        log(LogLevel::info, "wrote " + path.string());
    }

    void write_json(const std::string& name, const json& j) { write_text(name, j.dump(2) + "\n"); }

    void write_table(const std::string& stem, const Table& t) {
        if (format == "json") {
            json arr = json::array();
            for (const auto& row : t.rows) {
                json obj = json::object();
                for (std::size_t c = 0; c < t.header.size(); ++c) {
                    const auto& cell = row[c];
                    if (!t.numeric[c]) {
                        obj[t.header[c]] = cell;
                    } else if (cell == "NA" || cell.empty()) {
                        obj[t.header[c]] = nullptr;
                    } else {
                        obj[t.header[c]] = io::number(std::strtod(cell.c_str(), nullptr));
                    }
                }
                arr.push_back(obj);
            }
            write_json(stem + ".json", arr);
            return;
        }
        std::ostringstream s;
        csv::Writer w(s);
        w.row(t.header);
        for (const auto& row : t.rows) w.row(row);
        write_text(stem + ".csv", s.str());
    }

    void finish() {
        manifest.seed = seed;
        fs::create_directories(out);
        std::ofstream f(out / "manifest.json", std::ios::binary);
        f << manifest.to_json().dump(2) << "\n";
    }
};

std::string opt_text(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

// ---------------------------------------------------------------- build-panel

struct BuildPanelOptions {
    std::string policies;
    std::string blocks;
    std::string first;
    std::string last;
    std::string covariates;
    double winsor_lo = 0.5;
    double winsor_hi = 99.5;
};

void cmd_build_panel(Context& ctx, const BuildPanelOptions& o) {
    ctx.manifest.add_input(o.policies);
    ctx.manifest.add_input(o.blocks);
    ctx.manifest.add_input(o.covariates);
    const PolicySet policies = io::read_policies(o.policies);
    const auto blocks = io::read_blocks(o.blocks);
    const auto rows = build_zip_panel(blocks, policies, YearMonth::parse(o.first), YearMonth::parse(o.last));
    Table t{{"zip", "month", "statutory_mw", "mw_res"}, {false, false, true, true}, {}};
    for (const auto& r : rows) t.rows.push_back({r.zip, r.month.to_string(), fmt(r.statutory_mw), fmt(r.mw_res)});
    ctx.write_table("panel", t);

    if (o.covariates.empty()) return;
    const auto cov = io::read_covariates(o.covariates);
    std::vector<HousingShareInput> raw;
    for (const auto& c : cov) raw.push_back({c.zip, c.safmr_rent, c.annual_wage_hh});
    const auto shares = housing_expenditure_shares(raw, o.winsor_lo, o.winsor_hi);
    std::map<std::string, double> s_by_zip(shares.shares.begin(), shares.shares.end());
    for (const auto& z : shares.excluded) log(LogLevel::warn, "zip " + z + " excluded: missing or invalid wage");
    Table c{{"zip", "safmr_rent", "wage_per_household", "housing_exp_share", "median_hh_income",
             "public_housing_share", "mw_worker_share"},
            {false, true, true, true, true, true, true},
            {}};
    for (const auto& r : cov) {
        auto it = s_by_zip.find(r.zip);
        if (it == s_by_zip.end()) continue;
        c.rows.push_back({r.zip, fmt(r.safmr_rent), fmt(*r.annual_wage_hh / 12.0), fmt(it->second),
                          opt_text(r.median_hh_income), opt_text(r.public_housing_share),
                          opt_text(r.mw_worker_share)});
    }
    ctx.write_table("zip_covariates", c);
    ctx.write_json("covariates_report.json", {{"excluded", shares.excluded},
                                              {"lower_clamp", shares.lower_clamp},
                                              {"upper_clamp", shares.upper_clamp}});
}

// ------------------------------------------------------------------- exposure

struct ExposureOptions {
    std::string commuting;
    std::string panel;
    int share_year = 2017;
    bool time_varying = false;
    std::string category = "all";
};

void cmd_exposure(Context& ctx, const ExposureOptions& o) {
    ctx.manifest.add_input(o.commuting);
    ctx.manifest.add_input(o.panel);
    const auto matrices = io::read_commuting(o.commuting);
    const auto policies = io::read_zip_panel(o.panel);
    std::set<YearMonth> month_set;
    for (const auto& p : policies) month_set.insert(p.month);
    const std::vector<YearMonth> months(month_set.begin(), month_set.end());
    const SharePolicy share = o.time_varying ? SharePolicy::varying() : SharePolicy::fixed(o.share_year);
    const auto category = parse_category(o.category);
    const auto mp = build_measure_panel(matrices, policies, months, share, category);
    for (const auto& z : mp.no_commuting) log(LogLevel::warn, "zip " + z + " has no commuting data");
    for (const auto& z : mp.no_workers) log(LogLevel::warn, "zip " + z + " has no resident workers");

    Table t{{"zip", "month", "mw_res", "mw_wkp", "category", "share_policy"},
            {false, false, true, true, false, false},
            {}};
    for (const auto& r : mp.rows) {
        t.rows.push_back({r.zip, r.month.to_string(), fmt(r.mw_res), fmt(r.mw_wkp), o.category, share.to_string()});
    }
    ctx.write_table("measures", t);

    json report{{"rows", mp.rows.size()}, {"no_commuting", mp.no_commuting}, {"no_workers", mp.no_workers}};
    if (mp.rows.size() >= 2) {
        const auto d = rank_condition_check(mp.rows);
        report["rank_condition"] = {{"min_singular_value", io::number(d.min_singular_value)},
                                    {"max_singular_value", io::number(d.max_singular_value)},
                                    {"pairwise_corr", io::number(d.pairwise_corr)},
                                    {"collinear", d.collinear},
                                    {"n_obs", d.n_obs}};
        if (d.collinear) log(LogLevel::warn, "residence and workplace measures are collinear");
    }
    ctx.write_json("exposure_report.json", report);
}

// ------------------------------------------------------------------- estimate

struct EstimateOptions {
    std::string measures;
    std::string rents;
    std::string controls;
    std::string zip_info;
    std::string spec;
};

double normal_p(double estimate, double se) {
    if (!(se > 0.0)) return std::nan("");
    return chi_square_sf(std::pow(estimate / se, 2), 1.0);
}

json result_json(const RegressionResult& r) {
    json coefs = json::array();
    for (std::size_t k = 0; k < r.names.size(); ++k) {
        const double b = r.coef(static_cast<Eigen::Index>(k));
        const double se = r.se(r.names[k]);
        coefs.push_back({{"term", r.names[k]}, {"estimate", io::number(b)}, {"se", io::number(se)},
                         {"p_value", io::number(normal_p(b, se))}});
    }
    json tests = json::object();
    for (const auto& [k, v] : r.tests) tests[k] = io::number(v);
    json out{{"name", r.spec_name},       {"n_obs", r.n_obs},           {"n_dropped", r.n_dropped},
             {"n_clusters", r.n_clusters}, {"n_params", r.n_params},    {"r_squared", io::number(r.r_squared)},
             {"fe_method", r.fe_method},  {"coefficients", coefs},       {"tests", tests}};
    if (r.has("mw_res") && r.has("mw_wkp")) {
        const auto sum = linear_combination(r, {{"mw_res", 1.0}, {"mw_wkp", 1.0}});
        out["sum_of_coefficients"] = {{"estimate", io::number(sum.estimate)}, {"se", io::number(sum.se)},
                                      {"p_value_equality", io::number(r.tests.at("equality"))}};
    }
    if (r.first_stage_f) out["first_stage_f"] = io::number(*r.first_stage_f);
    return out;
}

void add_coefficient_rows(Table& t, const RegressionResult& r) {
    for (std::size_t k = 0; k < r.names.size(); ++k) {
        const double b = r.coef(static_cast<Eigen::Index>(k));
        const double se = r.se(r.names[k]);
        t.rows.push_back({r.spec_name, r.names[k], fmt(b), fmt(se), fmt(normal_p(b, se))});
    }
    if (r.has("mw_res") && r.has("mw_wkp")) {
        const auto sum = linear_combination(r, {{"mw_res", 1.0}, {"mw_wkp", 1.0}});
        t.rows.push_back({r.spec_name, "sum_of_coefficients", fmt(sum.estimate), fmt(sum.se), fmt(r.tests.at("equality"))});
    }
}

// Entropy-balancing weights computed per ZIP and attached to every row.
void apply_entropy_weights(Panel& panel, const json& cfg, json& report) {
    const auto names = cfg.at("moderators").get<std::vector<std::string>>();
    const auto targets = cfg.at("targets").get<std::vector<double>>();
    if (names.size() != targets.size()) throw Error("schema", "entropy_balance needs one target per moderator");
    std::map<std::string, std::vector<double>> by_zip;
    for (const auto& o : panel) {
        if (by_zip.count(o.zip)) continue;
        std::vector<double> row;
        for (const auto& n : names) {
            auto it = o.moderators.find(n);
            if (it == o.moderators.end() || !std::isfinite(it->second)) {
                throw Error("missing_moderator", "moderator '" + n + "' missing for zip " + o.zip);
            }
            row.push_back(it->second);
        }
        by_zip[o.zip] = row;
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(by_zip.size()), static_cast<Eigen::Index>(names.size()));
    Eigen::Index r = 0;
    for (const auto& [zip, row] : by_zip) {
        for (std::size_t c = 0; c < row.size(); ++c) x(r, static_cast<Eigen::Index>(c)) = row[c];
        ++r;
    }
    const auto bw = entropy_balance_weights(x, Eigen::Map<const Eigen::VectorXd>(targets.data(), x.cols()));
    std::map<std::string, double> w;
    r = 0;
    for (const auto& [zip, row] : by_zip) w[zip] = bw.weights(r++) * static_cast<double>(by_zip.size());
    for (auto& o : panel) o.weight = w.at(o.zip);
    report["entropy_balance"] = {{"iterations", bw.iterations}, {"max_gap", io::number(bw.max_gap)}};
}

void cmd_estimate(Context& ctx, const EstimateOptions& o) {
    for (const auto& p : {o.measures, o.rents, o.controls, o.zip_info, o.spec}) ctx.manifest.add_input(p);
    std::map<std::string, ZipInfo> info;
    if (!o.zip_info.empty()) info = io::read_zip_info(o.zip_info);
    const Panel base = io::assemble_panel(io::read_measures(o.measures), o.rents, o.controls, info);
    const json doc = io::read_json(o.spec);
    std::vector<json> entries;
    if (doc.contains("specs")) {
        for (const auto& s : doc.at("specs")) entries.push_back(s);
    } else {
        entries.push_back(doc);
    }

    json results = json::array();
    Table coefs{{"spec", "term", "estimate", "se", "p_value"}, {false, false, true, true, true}, {}};
    for (const auto& entry : entries) {
        RegressionSpec spec = io::spec_from_json(entry);
        const std::string kind = entry.value("kind", "ols");
        Panel panel = base;
        json extra = json::object();
        if (entry.contains("entropy_balance")) {
            apply_entropy_weights(panel, entry.at("entropy_balance"), extra);
            spec.use_weights = true;
        }
        log(LogLevel::info, "estimating '" + spec.name + "' (" + kind + ")");
        RegressionResult res;
        if (kind == "ols") {
            res = estimate_ols(spec, panel);
        } else if (kind == "iv") {
            spec.lagged_dep = true;
            spec.iv = true;
            res = estimate_iv_lagged_dep(spec, panel);
        } else if (kind == "heterogeneity") {
            res = estimate_ols(heterogeneity_spec(panel, entry.at("moderator").get<std::string>(), spec), panel);
        } else if (kind == "stacked") {
            const auto sample = build_stacked_sample(panel, entry.value("window", 6),
                                                     entry.value("min_zips", std::size_t{10}));
            res = estimate_ols(stacked_spec(spec), sample.observations);
            json events = json::array();
            for (const auto& ev : sample.events) {
                events.push_back({{"event_id", ev.event_id}, {"zips", ev.zips.size()}, {"treated", ev.treated.size()}});
            }
            extra["stacked"] = {{"n_events", sample.events.size()},
                                {"events", events},
                                {"dropped_events", sample.small_events},
                                {"incomplete_windows", sample.incomplete_windows}};
        } else if (kind == "event_study") {
            const auto es = event_study(spec, panel);
            res = es.regression;
            Table path{{"measure", "event_time", "coef", "se", "level", "level_se"},
                       {false, true, true, true, true, true},
                       {}};
            for (const auto* p : {&es.path, &es.res_path}) {
                for (const auto& e : *p) {
                    path.rows.push_back({p == &es.path ? "mw_wkp" : "mw_res", std::to_string(e.event_time), fmt(e.coef),
                                         fmt(e.se), fmt(e.level), fmt(e.level_se)});
                }
            }
            ctx.write_table("event_study_" + spec.name, path);
            extra["pretrend_p"] = io::number(es.pretrend_p);
        } else {
            throw Error("schema", "unknown spec kind '" + kind + "'");
        }

        json rj = result_json(res);
        rj["kind"] = kind;
        rj["spec"] = io::spec_to_json(spec);
        for (const auto& [k, v] : extra.items()) rj[k] = v;
        if (entry.value("autocorrelation", false)) {
            const auto ac = autocorrelation_test(res, -0.5);
            rj["autocorrelation"] = {{"phi", io::number(ac.phi)},
                                     {"se", io::number(ac.se)},
                                     {"statistic", io::number(ac.statistic)},
                                     {"p_value_phi_minus_half", io::number(ac.p_value)},
                                     {"n_pairs", ac.n_pairs}};
        }
        if (entry.contains("binscatter")) {
            const auto& b = entry.at("binscatter");
            BinscatterOptions bo;
            bo.measure = b.value("measure", std::string("wkp")) == "res" ? Measure::res : Measure::wkp;
            bo.n_bins = b.value("n_bins", 30);
            bo.other_measure_bins = b.value("other_measure_bins", 100);
            bo.transform = spec.transform;
            bo.increase_months_only = b.value("increase_months_only", true);
            const auto points = binned_residual_scatter(panel, bo);
            Table bt{{"bin", "x_mean", "y_mean", "count"}, {true, true, true, true}, {}};
            for (std::size_t k = 0; k < points.size(); ++k) {
                bt.rows.push_back({std::to_string(k + 1), fmt(points[k].x_mean), fmt(points[k].y_mean),
                                   std::to_string(points[k].count)});
            }
            ctx.write_table("binscatter_" + spec.name, bt);
        }
        add_coefficient_rows(coefs, res);
        results.push_back(rj);
    }
    ctx.write_json("results.json", {{"results", results}});
    ctx.write_table("coefficients", coefs);
}

// ------------------------------------------------------------------- simulate

struct SimulateOptions {
    std::string mode = "synth";
    std::string params;
    int draws = 100;
    int n_zips = 5;
};

void simulate_synth(Context& ctx, const SimulateOptions& o) {
    SyntheticPanelConfig cfg;
    if (!o.params.empty()) cfg = io::synthetic_config_from_json(io::read_json(o.params));
    if (ctx.seed_given || o.params.empty()) cfg.seed = ctx.seed;
    ctx.seed = cfg.seed;
    const auto geo = build_geography(cfg);
    const auto sp = simulate_outcomes(geo, cfg, cfg.seed);

    Table m{{"zip", "month", "mw_res", "mw_wkp", "category", "share_policy"},
            {false, false, true, true, false, false},
            {}};
    for (const auto& o2 : sp.panel) {
        m.rows.push_back({o2.zip, o2.month.to_string(), fmt(o2.mw_res), fmt(o2.mw_wkp), "all", "fixed_2017"});
    }
    ctx.write_table("measures", m);
    Table rents{{"zip", "month", "rent_per_sqft"}, {false, false, true}, {}};
    for (const auto& o2 : sp.panel) rents.rows.push_back({o2.zip, o2.month.to_string(), fmt(std::exp(o2.r))});
    ctx.write_table("rents", rents);
    const auto names = control_names(cfg);
    Table controls{{"zip", "month"}, {false, false}, {}};
    for (const auto& n : names) {
        controls.header.push_back(n);
        controls.numeric.push_back(true);
    }
    for (const auto& o2 : sp.panel) {
        std::vector<std::string> row{o2.zip, o2.month.to_string()};
        for (const auto& n : names) row.push_back(fmt(o2.controls.at(n)));
        controls.rows.push_back(row);
    }
    ctx.write_table("controls", controls);

    std::ostringstream s;
    io::write_zip_info(s, geo.zips);
    ctx.write_text("zip_info.csv", s.str());
    // Rents and wages scale with income; poorer, MW-heavy ZIPs spend a larger share on rent.
    Table cov{{"zip", "safmr_rent", "annual_wage_hh", "median_hh_income", "public_housing_share", "mw_worker_share"},
              {false, true, true, true, true, true},
              {}};
    for (const auto& z : geo.zips) {
        const double income = z.moderators.at("median_hh_income");
        const double mw_share = z.moderators.at("mw_worker_share");
        const double wage = 0.85 * income;
        cov.rows.push_back({z.zip, fmt(wage / 12.0 * (0.16 + 0.2 * mw_share)), fmt(wage), fmt(income),
                            fmt(z.moderators.at("public_housing_share")), fmt(mw_share)});
    }
    ctx.write_table("covariates", cov);
    s.str("");
    io::write_policies(s, geo.policies);
    ctx.write_text("policies.csv", s.str());
    s.str("");
    io::write_blocks(s, geo.blocks);
    ctx.write_text("blocks.csv", s.str());
    s.str("");
    io::write_commuting(s, {geo.commuting});
    ctx.write_text("commuting.csv", s.str());
    ctx.write_json("truth.json", io::truth_to_json(sp.truth));
}

void simulate_props(Context& ctx, const SimulateOptions& o) {
    const auto rep = run_proposition_suite(o.draws, ctx.seed, static_cast<std::size_t>(o.n_zips));
    ctx.write_json("propositions.json", {{"draws", rep.draws},
                                         {"workplace_sign_ok", rep.workplace_sign_ok},
                                         {"no_exposure_zero_ok", rep.no_exposure_zero_ok},
                                         {"indirect_total_ok", rep.indirect_total_ok},
                                         {"linearization_ratio_ok", rep.linearization_ratio_ok},
                                         {"slopes_ok", rep.slopes_ok},
                                         {"min_ratio", io::number(rep.min_ratio)},
                                         {"max_ratio", io::number(rep.max_ratio)},
                                         {"max_slope_rel_error", io::number(rep.max_slope_rel_error)},
                                         {"all_ok", rep.all_ok()}});
    if (!rep.all_ok()) log(LogLevel::warn, "proposition suite reported failures");
}

MarketPrimitives primitives_of(const json& j) {
    return io::primitives_from_json(j.contains("primitives") ? j.at("primitives") : j);
}

void simulate_equilibrium(Context& ctx, const SimulateOptions& o) {
    if (o.params.empty()) throw Error("usage", "equilibrium mode needs --params");
    const json j = io::read_json(o.params);
    const auto prim = primitives_of(j);
    const MwLevels mw = io::mw_levels_from_json(j.at("mw"));
    const auto sol = solve_equilibrium(prim, mw);
    std::map<std::string, double> cs;
    if (j.contains("shock")) {
        const auto zips = j.at("shock").at("zips").get<std::vector<std::string>>();
        cs = comparative_static(prim, mw, zips, j.at("shock").value("d_ln_mw", 1e-4));
    }
    bool homogeneous = true;
    for (const auto& m : prim.zips) homogeneous = homogeneous && m.homogeneous_income_elasticity();
    std::map<std::string, LinearResponse> lin;
    if (homogeneous) lin = linearized_response(prim);
    Table t{{"zip", "rent", "beta", "gamma", "d_ln_rent"}, {false, true, true, true, true}, {}};
    for (const auto& m : prim.zips) {
        auto l = lin.find(m.zip);
        auto c = cs.find(m.zip);
        t.rows.push_back({m.zip, fmt(sol.rents.at(m.zip)), l == lin.end() ? "NA" : fmt(l->second.beta),
                          l == lin.end() ? "NA" : fmt(l->second.gamma), c == cs.end() ? "NA" : fmt(c->second)});
    }
    ctx.write_table("equilibrium", t);
    ctx.write_json("equilibrium_report.json", {{"iterations", sol.iterations}, {"residual", io::number(sol.residual)}});
}

void simulate_dynamic(Context& ctx, const SimulateOptions& o) {
    if (o.params.empty()) throw Error("usage", "dynamic mode needs --params");
    const json j = io::read_json(o.params);
    const auto prim = primitives_of(j);
    const MwLevels base = io::mw_levels_from_json(j.at("mw"));
    const int horizon = j.value("horizon", 36);
    const int len = j.value("contract_length", 12);
    const auto steady = solve_equilibrium(prim, base);
    std::map<std::string, double> stock;
    const double multiplier = j.value("stock_multiplier", 1.25);
    for (const auto& m : prim.zips) {
        stock[m.zip] = j.contains("total_stock") ? j.at("total_stock").at(m.zip).get<double>()
                                                 : multiplier * m.supply_scale * std::pow(steady.rents.at(m.zip), m.eta);
    }
    DynamicConfig dyn = DynamicConfig::uniform(prim, horizon, stock, len);
    if (j.contains("lambda")) {
        for (const auto& [zip, v] : j.at("lambda").items()) dyn.lambda[zip] = v.get<std::vector<double>>();
    }
    std::vector<MwLevels> path(static_cast<std::size_t>(horizon), base);
    if (j.contains("shock")) {
        const int t0 = j.at("shock").at("month").get<int>();
        const MwLevels after = io::mw_levels_from_json(j.at("shock").at("mw"));
        for (int t = std::max(0, t0); t < horizon; ++t) {
            for (const auto& [zip, v] : after) path[static_cast<std::size_t>(t)][zip] = v;
        }
    }
    const auto result = solve_dynamic_path(prim, dyn, path, base);
    Table t{{"zip", "t", "rent", "average_rent", "new_contracts", "vacancies", "available", "feasibility_bound",
             "no_market"},
            {false, true, true, true, true, true, true, false, false},
            {}};
    for (const auto& [zip, cells] : result.by_zip) {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            const auto& c = cells[k];
            t.rows.push_back({zip, std::to_string(k), fmt(c.rent), fmt(c.average_rent), fmt(c.new_contracts),
                              fmt(c.vacancies), fmt(c.available), c.feasibility_bound ? "true" : "false",
                              c.no_market ? "true" : "false"});
        }
    }
    ctx.write_table("rent_path", t);
}

void cmd_simulate(Context& ctx, const SimulateOptions& o) {
    ctx.manifest.add_input(o.params);
    if (o.mode == "synth") return simulate_synth(ctx, o);
    if (o.mode == "props") return simulate_props(ctx, o);
    if (o.mode == "equilibrium") return simulate_equilibrium(ctx, o);
    if (o.mode == "dynamic") return simulate_dynamic(ctx, o);
    throw Error("usage", "unknown simulate mode '" + o.mode + "'");
}

// ------------------------------------------------------------- counterfactual

struct CounterfactualOptions {
    std::string policies;
    std::string blocks;
    std::string commuting;
    std::string covariates;
    std::string zip_info;
    std::string scenario;
    int share_year = 2017;
    std::string category = "all";
    std::string epsilon_grid;
    std::vector<std::string> cbsas;
};

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    auto to_double = [&](const std::string& s) {
        double v = 0.0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size()) throw Error("usage", "bad number '" + s + "' in epsilon grid");
        return v;
    };
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) throw Error("usage", "epsilon grid range must be start:stop:step");
        const double a = to_double(parts[0]);
        const double b = to_double(parts[1]);
        const double step = to_double(parts[2]);
        if (!(step > 0.0) || b < a) throw Error("usage", "invalid epsilon grid range");
        const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
        for (long k = 0; k <= n; ++k) out.push_back(std::round((a + static_cast<double>(k) * step) * 1e12) / 1e12);
        return out;
    }
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(to_double(p));
    return out;
}

void cmd_counterfactual(Context& ctx, const CounterfactualOptions& o) {
    for (const auto& p : {o.policies, o.blocks, o.commuting, o.covariates, o.zip_info, o.scenario}) {
        ctx.manifest.add_input(p);
    }
    const PolicySet policies = io::read_policies(o.policies);
    const auto blocks = io::read_blocks(o.blocks);
    const PolicyScenario scenario = io::scenario_from_json(io::read_json(o.scenario));
    const auto changes = apply_scenario(blocks, policies, scenario);

    const auto category = parse_category(o.category);
    const CommutingMatrix* matrix = nullptr;
    const auto matrices = io::read_commuting(o.commuting);
    for (const auto& m : matrices) {
        if (m.year == o.share_year && m.category == category) matrix = &m;
    }
    if (!matrix) {
        throw Error("missing_year", "no " + o.category + " commuting matrix for " + std::to_string(o.share_year));
    }
    const auto shares = compute_all_shares(*matrix);
    auto mchanges = measure_changes(shares, changes);

    std::map<std::string, ZipInfo> info;
    if (!o.zip_info.empty()) info = io::read_zip_info(o.zip_info);
    if (!o.cbsas.empty()) {
        const std::set<std::string> keep(o.cbsas.begin(), o.cbsas.end());
        std::vector<MeasureChange> kept;
        for (const auto& c : mchanges) {
            auto it = info.find(c.zip);
            if (it != info.end() && keep.count(it->second.cbsa)) kept.push_back(c);
        }
        mchanges = std::move(kept);
    }

    const auto cov = io::read_covariates(o.covariates);
    std::vector<HousingShareInput> raw;
    std::map<std::string, double> rents;
    std::map<std::string, double> wages;
    for (const auto& c : cov) {
        raw.push_back({c.zip, c.safmr_rent, c.annual_wage_hh});
        rents[c.zip] = c.safmr_rent;
        if (c.annual_wage_hh) wages[c.zip] = *c.annual_wage_hh / 12.0;
    }
    const auto hs = housing_expenditure_shares(raw);
    std::map<std::string, ZipEconomics> econ;
    for (const auto& [zip, s] : hs.shares) {
        auto it = info.find(zip);
        econ[zip] = {it == info.end() ? "" : it->second.cbsa, s, rents.at(zip), wages.at(zip)};
    }

    const auto res = evaluate_incidence(mchanges, econ, scenario);
    Table t{{"zip", "cbsa", "mw_before", "d_mw_res", "d_mw_wkp", "d_r", "d_y", "s_i", "rho_i", "retained"},
            {false, false, true, true, true, true, true, true, true, false},
            {}};
    for (const auto& r : res.rows) {
        t.rows.push_back({r.zip, r.cbsa, fmt(r.mw_before), fmt(r.d_mw_res), fmt(r.d_mw_wkp), fmt(r.d_r), fmt(r.d_y),
                          fmt(r.s), opt_text(r.rho), r.retained ? "true" : "false"});
    }
    ctx.write_table("incidence", t);

    json groups = json::array();
    for (const auto& g : res.groups) {
        groups.push_back({{"group", g.label},
                          {"n", g.count},
                          {"median_d_mw_res", io::number(g.median_d_mw_res)},
                          {"median_d_mw_wkp", io::number(g.median_d_mw_wkp)},
                          {"median_s", io::number(g.median_s)},
                          {"median_rho", io::number(g.median_rho)}});
    }
    json deciles = json::array();
    Table dt{{"decile", "count", "mean_gap", "mean_rho"}, {true, true, true, true}, {}};
    for (const auto& d : res.deciles) {
        deciles.push_back({{"decile", d.decile}, {"count", d.count}, {"mean_gap", io::number(d.mean_gap)},
                           {"mean_rho", io::number(d.mean_rho)}});
        dt.rows.push_back({std::to_string(d.decile), std::to_string(d.count), fmt(d.mean_gap), fmt(d.mean_rho)});
    }
    json summary{{"scenario", scenario.name},
                 {"epsilon", scenario.epsilon},
                 {"rho_total", io::number(res.rho_total)},
                 {"n_zips", res.rows.size()},
                 {"n_retained", res.n_retained},
                 {"n_undefined", res.n_undefined},
                 {"excluded_cbsas", res.excluded_cbsas},
                 {"missing_covariates", res.missing_covariates},
                 {"groups", groups},
                 {"deciles", deciles}};
    if (!res.deciles.empty()) ctx.write_table("deciles", dt);
    if (!o.epsilon_grid.empty()) {
        const auto curve = sensitivity_epsilon(res.aggregate_inputs(), scenario, parse_grid(o.epsilon_grid));
        json cj = json::array();
        Table ct{{"epsilon", "rho_total"}, {true, true}, {}};
        for (const auto& p : curve) {
            cj.push_back({{"epsilon", p.epsilon}, {"rho_total", io::number(p.rho_total)}});
            ct.rows.push_back({fmt(p.epsilon), fmt(p.rho_total)});
        }
        summary["epsilon_curve"] = cj;
        ctx.write_table("epsilon_curve", ct);
    }
    ctx.write_json("summary.json", summary);
}

// --config: a JSON object whose keys name long options; values fill options
// not given on the command line.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t k = 0; k < args.size(); ++k) {
        if (args[k] == "--config" && k + 1 < args.size()) path = args[k + 1];
        if (args[k].rfind("--config=", 0) == 0) path = args[k].substr(9);
    }
    if (path.empty()) return args;
    const json cfg = io::read_json(path);
    if (!cfg.is_object()) throw Error("schema", path + ": config must be a JSON object");
    auto given = [&](const std::string& flag) {
        for (const auto& a : args) {
            if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
        }
        return false;
    };
    for (const auto& [key, value] : cfg.items()) {
        const std::string flag = "--" + key;
        if (key == "config" || given(flag)) continue;
        if (value.is_boolean()) {
            if (value.get<bool>()) args.push_back(flag);
        } else if (value.is_array()) {
            for (const auto& v : value) {
                args.push_back(flag);
                args.push_back(v.is_string() ? v.get<std::string>() : v.dump());
            }
        } else {
            args.push_back(flag);
            args.push_back(value.is_string() ? value.get<std::string>() : value.dump());
        }
    }
    return args;
}

void error_json(const std::string& kind, const std::string& message) {
    std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

void record_options(const CLI::App& app, json& config) {
    for (const auto* opt : app.get_options()) {
        const std::string name = opt->get_single_name();
        if (opt->count() == 0 || name == "out" || name == "help" || name == "config") continue;
        const auto values = opt->results();
        if (values.size() == 1) {
            config[name] = values.front();
        } else {
            config[name] = values;
        }
    }
}

}  // namespace

int run(int argc, char** argv) {
    Context ctx;
    CLI::App app{"Minimum-wage spillovers: exposure measures, rental-market simulation, panel estimation and "
                 "counterfactual incidence"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string out = ".";
    std::string config;
    app.add_option("--out", out, "Output directory");
    auto* seed_opt = app.add_option("--seed", ctx.seed, "Random seed");
    app.add_option("--config", config, "JSON file of option defaults");
    app.add_option("--threads", ctx.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--format", ctx.format, "Table format")->check(CLI::IsMember({"csv", "json"}));

    BuildPanelOptions bp;
    auto* c_bp = app.add_subcommand("build-panel", "ZIP-month statutory MW panel from schedules and blocks");
    c_bp->add_option("--policies", bp.policies)->required();
    c_bp->add_option("--blocks", bp.blocks)->required();
    c_bp->add_option("--first", bp.first, "First month, YYYY-MM")->required();
    c_bp->add_option("--last", bp.last, "Last month, YYYY-MM")->required();
    c_bp->add_option("--covariates", bp.covariates, "Optional covariates.csv");
    c_bp->add_option("--winsor-lo", bp.winsor_lo);
    c_bp->add_option("--winsor-hi", bp.winsor_hi);

    ExposureOptions ex;
    auto* c_ex = app.add_subcommand("exposure", "Residence and workplace MW measures");
    c_ex->add_option("--commuting", ex.commuting)->required();
    c_ex->add_option("--panel", ex.panel)->required();
    c_ex->add_option("--share-year", ex.share_year);
    c_ex->add_flag("--time-varying", ex.time_varying, "Use the latest matrix year at or before each month");
    c_ex->add_option("--category", ex.category)->check(CLI::IsMember({"all", "low_income", "young"}));

    EstimateOptions es;
    auto* c_es = app.add_subcommand("estimate", "Panel regressions from a spec file");
    c_es->add_option("--measures", es.measures)->required();
    c_es->add_option("--rents", es.rents)->required();
    c_es->add_option("--controls", es.controls);
    c_es->add_option("--zip-info", es.zip_info);
    c_es->add_option("--spec", es.spec)->required();

    SimulateOptions si;
    auto* c_si = app.add_subcommand("simulate", "Synthetic panels and rental-market simulations");
    c_si->add_option("--mode", si.mode)->check(CLI::IsMember({"synth", "props", "equilibrium", "dynamic"}));
    c_si->add_option("--params", si.params, "Primitives or synthetic-panel JSON");
    c_si->add_option("--draws", si.draws)->check(CLI::PositiveNumber);
    c_si->add_option("--n-zips", si.n_zips)->check(CLI::Range(4, 1000));

    CounterfactualOptions cf;
    auto* c_cf = app.add_subcommand("counterfactual", "Landlord incidence of a hypothetical MW policy");
    c_cf->add_option("--policies", cf.policies)->required();
    c_cf->add_option("--blocks", cf.blocks)->required();
    c_cf->add_option("--commuting", cf.commuting)->required();
    c_cf->add_option("--covariates", cf.covariates)->required();
    c_cf->add_option("--zip-info", cf.zip_info);
    c_cf->add_option("--scenario", cf.scenario)->required();
    c_cf->add_option("--share-year", cf.share_year);
    c_cf->add_option("--category", cf.category)->check(CLI::IsMember({"all", "low_income", "young"}));
    c_cf->add_option("--epsilon-grid", cf.epsilon_grid, "Comma list or start:stop:step");
    c_cf->add_option("--cbsa", cf.cbsas, "Restrict the incidence set to these CBSAs");

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_config(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        error_json("usage", e.what());
        return 2;
    } catch (const Error& e) {
        error_json(e.kind(), e.what());
        return 1;
    }

    try {
        ctx.out = out;
        ctx.seed_given = seed_opt->count() > 0;
        record_options(app, ctx.manifest.config);
        for (auto* sub : app.get_subcommands()) {
            ctx.manifest.command = sub->get_name();
            json sub_cfg = json::object();
            record_options(*sub, sub_cfg);
            ctx.manifest.config[sub->get_name()] = sub_cfg;
        }
        if (*c_bp) cmd_build_panel(ctx, bp);
        if (*c_ex) cmd_exposure(ctx, ex);
        if (*c_es) cmd_estimate(ctx, es);
        if (*c_si) cmd_simulate(ctx, si);
        if (*c_cf) cmd_counterfactual(ctx, cf);
        ctx.finish();
    } catch (const Error& e) {
        error_json(e.kind(), e.what());
        return 1;
    } catch (const json::exception& e) {
        error_json("schema", e.what());
        return 1;
    } catch (const std::exception& e) {
        error_json("internal", e.what());
        return 1;
    }
    return 0;
}

}  // namespace mwspill::cli
