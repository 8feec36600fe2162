#include "helpers.hpp"

#include "mwspill/dynamic.hpp"
#include "mwspill/equilibrium.hpp"

#include <cmath>
#include <random>

using namespace mwspill;

namespace {

ZipMarket market(const std::string& zip, std::map<std::string, double> weights) {
    ZipMarket m;
    m.zip = zip;
    m.weights.origin_zip = zip;
    m.weights.weights = std::move(weights);
    return m;
}

MarketPrimitives two_zips() {
    MarketPrimitives p;
    auto a = market("a", {{"a", 0.7}, {"b", 0.3}});
    a.workers = 120;
    a.eta = 0.4;
    auto b = market("b", {{"b", 1.0}});
    b.workers = 80;
    b.xi_r = -0.7;
    p.zips = {a, b};
    return p;
}

}  // namespace

TEST_CASE("single-zip closed form") {
    MarketPrimitives p;
    auto m = market("i", {{"i", 1.0}});
    m.workers = 3.0;
    m.demand_scale = 2.0;
    m.supply_scale = 5.0;
    m.xi_r = -1.0;
    m.eta = 0.0;
    p.zips = {m};
    const double mw = 10.0;
    const double closed = 3.0 * 2.0 * std::pow(std::pow(mw, 0.2), -0.5) * std::pow(std::pow(mw, 0.1), 1.0) / 5.0;
    for (auto method : {SolverMethod::bisection, SolverMethod::newton}) {
        SolverOptions opt;
        opt.method = method;
        const auto sol = solve_equilibrium(p, {{"i", mw}}, opt);
        CHECK(std::abs(sol.rents.at("i") - closed) <= 1e-10 * closed);
        CHECK(sol.residual < 1e-11);
    }
    p.zips[0].supply_scale = 10.0;
    CHECK(solve_equilibrium(p, {{"i", mw}}).rents.at("i") == doctest::Approx(closed / 2.0).epsilon(1e-11));
}

TEST_CASE("symmetric markets clear at identical rents") {
    MarketPrimitives p;
    p.zips = {market("a", {{"a", 0.5}, {"b", 0.5}}), market("b", {{"a", 0.5}, {"b", 0.5}})};
    const auto sol = solve_equilibrium(p, {{"a", 9.0}, {"b", 9.0}});
    CHECK(sol.rents.at("a") == doctest::Approx(sol.rents.at("b")).epsilon(1e-13));
}

TEST_CASE("sign restrictions are enforced") {
    auto p = two_zips();
    p.zips[0].xi_r = 0.1;
    CHECK_ERROR_KIND(p.validate(), "invalid_primitives");
    p = two_zips();
    p.zips[1].eps_p = 0.0;
    CHECK_ERROR_KIND(p.validate(), "invalid_primitives");
    p = two_zips();
    p.zips[0].weights.weights["b"] = 0.5;
    CHECK_ERROR_KIND(p.validate(), "invalid_primitives");
}

TEST_CASE("bracketing failure when the root is out of range") {
    auto f = [](double x) { return 100.0 - x; };
    CHECK_ERROR_KIND(solve_decreasing_root(f, 0.0, {}), "bracketing_failure");
    auto g = [](double x) { return 3.0 - 2.0 * x; };
    CHECK(solve_decreasing_root(g, 0.0, {}).x == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("comparative statics signs") {
    const auto p = two_zips();
    const MwLevels mw{{"a", 8.0}, {"b", 8.0}};
    // a commutes to b; b does not commute to a.
    const auto shock_b = comparative_static(p, mw, {"b"});
    CHECK(shock_b.at("a") > 0.0);
    const auto shock_a = comparative_static(p, mw, {"a"});
    CHECK(shock_a.at("b") == 0.0);

    MarketPrimitives q;
    auto m = market("i", {{"i", 1.0}});
    m.xi_p = -2.0;
    m.eps_p = 0.5;
    m.xi_y = 0.5;
    m.eps_y = 0.05;
    q.zips = {m};
    const double d = comparative_static(q, {{"i", 9.0}}, {"i"}).at("i");
    CHECK(d < 0.0);
    const auto lin = linearized_response(q).at("i");
    CHECK(d == doctest::Approx(lin.beta + lin.gamma).epsilon(1e-6));
}

TEST_CASE("linearized response by substitution") {
    MarketPrimitives p;
    auto m = market("i", {{"i", 0.4}, {"j", 0.6}});
    m.xi_y = 1.0;
    m.eps_y = 0.1;
    m.eta = 0.0;
    m.xi_r = -1.0;
    m.xi_p = -0.5;
    m.eps_p = 0.2;
    p.zips = {m, market("j", {{"j", 1.0}})};
    auto r = linearized_response(p).at("i");
    CHECK(r.beta == doctest::Approx(0.1));
    CHECK(r.gamma == doctest::Approx(-0.1));
    p.zips[0].eps_y = 0.0;
    CHECK(linearized_response(p).at("i").beta == 0.0);

    p.zips[0].eps_y = 0.1;
    p.zips[0].eps_y_by_dest["j"] = 0.3;
    CHECK_ERROR_KIND(linearized_response(p), "heterogeneous_elasticity");
}

TEST_CASE("endogenous shares attenuate the workplace coefficient") {
    auto p = two_zips();
    const auto fixed = linearized_response(p);
    const auto zero = endogenous_shares_response(p, 0.0);
    for (const auto& [zip, r] : fixed) {
        CHECK(zero.at(zip).beta == r.beta);
        CHECK(zero.at(zip).gamma == r.gamma);
    }
    const auto& a = p.zips[0];
    const double denom = a.eta - a.xi_r;
    const auto small = endogenous_shares_response(p, -0.02).at("a");
    CHECK(small.beta == doctest::Approx(fixed.at("a").beta - 0.02 / denom));
    CHECK(small.beta > 0.0);
    CHECK(small.beta < fixed.at("a").beta);
    const double cancel = -a.xi_y * a.eps_y;
    CHECK(std::abs(endogenous_shares_response(p, cancel).at("a").beta) < 1e-15);
    CHECK_ERROR_KIND(endogenous_shares_response(p, 0.1), "invalid_argument");

    // Finite-difference check on the unnormalized equilibrium.
    const MwLevels base{{"a", 8.0}, {"b", 8.0}};
    const double zeta = -0.03;
    const double h = 1e-5;
    MwLevels up = base, down = base;
    up["b"] *= std::exp(h);
    down["b"] *= std::exp(-h);
    const double r_up = solve_equilibrium_endogenous_shares(p, up, base, zeta).rents.at("a");
    const double r_dn = solve_equilibrium_endogenous_shares(p, down, base, zeta).rents.at("a");
    const double slope = (std::log(r_up) - std::log(r_dn)) / (2.0 * h);
    const double d_wkp = 0.3;  // pi_ab
    CHECK(slope == doctest::Approx(endogenous_shares_response(p, zeta).at("a").beta * d_wkp).epsilon(1e-6));

    const auto same = solve_equilibrium_endogenous_shares(p, base, base, zeta);
    CHECK(same.rents.at("a") == doctest::Approx(solve_equilibrium(p, base).rents.at("a")).epsilon(1e-12));
}

TEST_CASE("property: linearization error falls quadratically") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto p = random_primitives(4, seed);
        const auto lin = linearized_response(p);
        MwLevels mw;
        for (const auto& m : p.zips) mw[m.zip] = 10.0;
        const auto base = solve_equilibrium(p, mw);
        const std::string shocked = p.zips[1].zip;
        auto err = [&](double shock) {
            MwLevels after = mw;
            after[shocked] *= std::exp(shock);
            const auto sol = solve_equilibrium(p, after);
            const auto& m = p.zips[0];
            const double d_wkp = m.weights.weights.count(shocked) ? m.weights.weights.at(shocked) * shock : 0.0;
            const double pred = lin.at(m.zip).beta * d_wkp;
            return std::abs(std::log(sol.rents.at(m.zip)) - std::log(base.rents.at(m.zip)) - pred);
        };
        const double e1 = err(1e-2);
        const double e2 = err(5e-3);
        if (e1 < 1e-13) continue;  // origin not exposed
        const double ratio = e1 / e2;
        CHECK(ratio >= 3.5);
        CHECK(ratio <= 4.5);
    }
}

TEST_CASE("proposition suite on random draws") {
    const auto rep = run_proposition_suite(40, 9, 5);
    CHECK(rep.draws == 40);
    CHECK(rep.workplace_sign_ok == 40);
    CHECK(rep.no_exposure_zero_ok == 40);
    CHECK(rep.indirect_total_ok == 40);
    CHECK(rep.linearization_ratio_ok == 40);
    CHECK(rep.slopes_ok == 40);
    CHECK(rep.all_ok());
    const auto again = run_proposition_suite(40, 9, 5);
    CHECK(again.min_ratio == rep.min_ratio);
    CHECK(again.max_slope_rel_error == rep.max_slope_rel_error);
}

TEST_CASE("perturbed income elasticities keep the share-weighted mean") {
    const auto p = random_primitives(5, 4);
    const auto q = perturb_income_elasticities(p, 0.02, 77);
    for (std::size_t k = 0; k < p.zips.size(); ++k) {
        const auto& m = q.zips[k];
        double mean = 0.0;
        for (const auto& [d, pi] : m.weights.weights) mean += pi * m.eps_y_for(d);
        CHECK(mean == doctest::Approx(p.zips[k].eps_y).epsilon(1e-12));
        CHECK_FALSE(m.homogeneous_income_elasticity());
    }
}

TEST_CASE("dynamic path with one-month contracts equals the static path") {
    const auto p = two_zips();
    const int horizon = 8;
    std::vector<MwLevels> path;
    for (int t = 0; t < horizon; ++t) path.push_back({{"a", 8.0 + 0.3 * t}, {"b", 8.0 + 0.1 * (t % 3)}});
    std::map<std::string, double> stock;
    const auto ss = solve_equilibrium(p, path.front());
    for (const auto& m : p.zips) stock[m.zip] = 1e6;
    const auto dyn = DynamicConfig::uniform(p, horizon, stock, 1);
    const auto out = solve_dynamic_path(p, dyn, path);
    for (int t = 0; t < horizon; ++t) {
        const auto sol = solve_equilibrium(p, path[static_cast<std::size_t>(t)]);
        for (const auto& m : p.zips) {
            const auto& cell = out.by_zip.at(m.zip)[static_cast<std::size_t>(t)];
            CHECK(cell.rent == doctest::Approx(sol.rents.at(m.zip)).epsilon(1e-11));
            CHECK_FALSE(cell.feasibility_bound);
        }
    }
    CHECK(out.steady_state_rent("a") == doctest::Approx(ss.rents.at("a")));
}

TEST_CASE("dynamic rent jumps once after a workplace shock") {
    const auto p = two_zips();
    const int horizon = 30;
    const int t0 = 10;
    const MwLevels before{{"a", 8.0}, {"b", 8.0}};
    MwLevels after = before;
    after["b"] = 10.0;
    std::vector<MwLevels> path(horizon, before);
    for (int t = t0; t < horizon; ++t) path[static_cast<std::size_t>(t)] = after;
    const auto s0 = solve_equilibrium(p, before);
    const auto s1 = solve_equilibrium(p, after);
    std::map<std::string, double> stock;
    for (const auto& m : p.zips) stock[m.zip] = 2.0 * m.supply_scale * std::pow(s1.rents.at(m.zip), m.eta);

    const auto uni = solve_dynamic_path(p, DynamicConfig::uniform(p, horizon, stock), path);
    const auto& a = uni.by_zip.at("a");
    for (int t = 0; t < t0; ++t) CHECK(a[static_cast<std::size_t>(t)].rent == doctest::Approx(s0.rents.at("a")).epsilon(1e-11));
    for (int t = t0; t < horizon; ++t) CHECK(a[static_cast<std::size_t>(t)].rent == doctest::Approx(s1.rents.at("a")).epsilon(1e-11));
    CHECK(s1.rents.at("a") > s0.rents.at("a"));
    // Average rent catches up over one contract length.
    CHECK(a[t0].average_rent < a[t0 + 11].average_rent);
    CHECK(a[t0 + 11].average_rent == doctest::Approx(s1.rents.at("a")).epsilon(1e-10));

    // All contracts expiring at the shock month reprice everything at once.
    DynamicConfig conc = DynamicConfig::uniform(p, horizon, stock);
    for (auto& [zip, lam] : conc.lambda) {
        for (int t = 0; t < horizon; ++t) lam[static_cast<std::size_t>(t)] = (t % 12 == t0 % 12) ? 1.0 : 0.0;
    }
    const auto con = solve_dynamic_path(p, conc, path);
    const auto& c = con.by_zip.at("a");
    const double jump_conc = c[t0].average_rent - c[t0 - 1].average_rent;
    const double jump_uni = a[t0].average_rent - a[t0 - 1].average_rent;
    CHECK(jump_conc > jump_uni);
    CHECK(c[t0 + 1].no_market);
    CHECK(c[t0 + 1].rent == c[t0].rent);
}

TEST_CASE("feasibility bound raises rent to the clearing price") {
    auto p = two_zips();
    const int horizon = 14;
    const MwLevels before{{"a", 8.0}, {"b", 8.0}};
    MwLevels after = before;
    after["b"] = 12.0;
    std::vector<MwLevels> path(horizon, before);
    for (int t = 3; t < horizon; ++t) path[static_cast<std::size_t>(t)] = after;
    const auto s0 = solve_equilibrium(p, before);
    const auto s1 = solve_equilibrium(p, after);
    std::map<std::string, double> stock;
    for (const auto& m : p.zips) stock[m.zip] = 1.0001 * m.supply_scale * std::pow(s0.rents.at(m.zip), m.eta);
    const auto out = solve_dynamic_path(p, DynamicConfig::uniform(p, horizon, stock), path);
    const auto& cell = out.by_zip.at("a")[3];
    CHECK(cell.feasibility_bound);
    CHECK(cell.rent > s1.rents.at("a"));
    CHECK(cell.vacancies == doctest::Approx(cell.available));

    std::map<std::string, double> tiny;
    for (const auto& m : p.zips) tiny[m.zip] = 1e-9;
    CHECK_ERROR_KIND(solve_dynamic_path(p, DynamicConfig::uniform(p, horizon, tiny), path), "infeasible_stock");
    auto bad = DynamicConfig::uniform(p, horizon, stock);
    bad.lambda["a"][5] = 0.5;
    CHECK_ERROR_KIND(solve_dynamic_path(p, bad, path), "invalid_dynamic");
}
