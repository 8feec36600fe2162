#include "helpers.hpp"

#include "mwspill/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace mwspill;
using testing::block;

namespace {

PolicySet policies() {
    return PolicySet({testing::federal(),
                      testing::schedule("s-hi", JurisdictionLevel::state, "HI", {{"2015-01", 15.0}}),
                      testing::schedule("s-s1", JurisdictionLevel::state, "S1", {{"2015-01", 7.25}})});
}

PolicyScenario federal_nine() {
    PolicyScenario s;
    s.overrides.push_back({JurisdictionLevel::federal, "US", 9.0});
    return s;
}

const ZipPolicyChange& find(const std::vector<ZipPolicyChange>& v, const std::string& zip) {
    return *std::find_if(v.begin(), v.end(), [&](const auto& c) { return c.zip == zip; });
}

}  // namespace

TEST_CASE("scenario overrides bind at the block max") {
    const std::vector<BlockRecord> blocks{
        block("b1", "low", 10), block("b2", "high", 5, "HI"),
        block("b3", "mixed", 4), block("b4", "mixed", 4, "HI")};
    const auto changes = apply_scenario(blocks, policies(), federal_nine());
    REQUIRE(changes.size() == 3);
    CHECK(std::abs(find(changes, "low").d_mw_res - (std::log(9.0) - std::log(7.25))) < 1e-12);
    CHECK(find(changes, "low").d_mw_res == doctest::Approx(0.2162).epsilon(1e-4));
    CHECK(find(changes, "high").d_mw_res == 0.0);
    const auto& mixed = find(changes, "mixed");
    CHECK(mixed.mw_after - mixed.mw_before == doctest::Approx(0.875).epsilon(1e-12));

    // An override below the current level leaves everything unchanged.
    PolicyScenario low;
    low.overrides.push_back({JurisdictionLevel::state, "S1", 7.0});
    for (const auto& c : apply_scenario(blocks, policies(), low)) CHECK(c.d_mw_res == 0.0);

    PolicyScenario unknown;
    unknown.overrides.push_back({JurisdictionLevel::place, "Nowhere", 12.0});
    CHECK_ERROR_KIND(apply_scenario(blocks, policies(), unknown), "unknown_jurisdiction");
    PolicyScenario bad = federal_nine();
    bad.beta = std::nan("");
    CHECK_ERROR_KIND(apply_scenario(blocks, policies(), bad), "invalid_scenario");
}

TEST_CASE("workplace change averages destination changes") {
    const std::vector<ZipPolicyChange> changes{{"a", 7.25, 9.0, 0.2}, {"b", 15.0, 15.0, 0.0}};
    ShareTable shares;
    shares.by_origin["a"] = {"a", {{"a", 0.25}, {"b", 0.75}}};
    shares.by_origin["b"] = {"b", {{"b", 1.0}}};
    const auto m = measure_changes(shares, changes);
    REQUIRE(m.size() == 2);
    CHECK(m[0].d_mw_wkp == doctest::Approx(0.05));
    CHECK(m[1].d_mw_wkp == 0.0);
    shares.by_origin["b"] = {"b", {{"c", 1.0}}};
    CHECK_ERROR_KIND(measure_changes(shares, changes), "missing_destination_policy");
}

TEST_CASE("predicted changes and share pocketed") {
    const PolicyScenario sc;
    CHECK(predict_changes(0, 0, sc).d_r == 0.0);
    CHECK(predict_changes(0, 0, sc).d_y == 0.0);
    CHECK(predict_changes(0.2162, 0.2162, sc).d_r == doctest::Approx(0.2162 * (0.0685 - 0.0219)).epsilon(1e-14));
    CHECK(predict_changes(0.2162, 0.2162, sc).d_r == doctest::Approx(0.010075).epsilon(1e-4));
    CHECK(predict_changes(0, 0.013, sc).d_y == doctest::Approx(0.0013));

    CHECK(share_pocketed(0.214, 0.216, 0.204, sc) == doctest::Approx(0.0964).epsilon(1e-3));
    CHECK(share_pocketed(0.232, 0.0, 0.013, sc) == doctest::Approx(0.1589).epsilon(1e-3));
    PolicyScenario flat;
    flat.gamma = 0.0;
    flat.beta = flat.epsilon;
    CHECK(share_pocketed(0.3, 0.0, 0.12, flat) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK_ERROR_KIND(share_pocketed(0.3, 0.1, 0.0, sc), "undefined_incidence");
}

TEST_CASE("property: share pocketed magnitude monotone in epsilon and s, sign follows the rent change") {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(0.001, 0.3);
    std::uniform_real_distribution<double> share(0.05, 0.6);
    for (int draw = 0; draw < 500; ++draw) {
        const double dwkp = u(gen);
        const double dres = u(gen);
        const double s = share(gen);
        PolicyScenario a;
        PolicyScenario b;
        b.epsilon = a.epsilon * 1.5;
        // Monotone in magnitude; a negative rent change flips the direction.
        const double base = std::abs(share_pocketed(s, dres, dwkp, a));
        CHECK(std::abs(share_pocketed(s, dres, dwkp, b)) < base);
        CHECK(std::abs(share_pocketed(s * 1.1, dres, dwkp, a)) > base);
        const double rent = a.beta * dwkp + a.gamma * dres;
        const double rho = share_pocketed(s, dres, dwkp, a);
        CHECK((rho > 0.0) == (rent > 0.0));
        CHECK(share_pocketed(s, 0.0, dwkp, a) > 0.0);
    }
}

TEST_CASE("total incidence") {
    const PolicyScenario sc;
    std::vector<IncidenceInput> one{{"a", 0.25 * 4000.0, 4000.0, 0.1, 0.15}};
    CHECK(total_incidence(one, sc) == doctest::Approx(share_pocketed(0.25, 0.1, 0.15, sc)).epsilon(1e-14));

    std::vector<IncidenceInput> same(5, one[0]);
    CHECK(total_incidence(same, sc) == doctest::Approx(share_pocketed(0.25, 0.1, 0.15, sc)).epsilon(1e-14));

    const std::vector<IncidenceInput> two{{"a", 900.0, 3500.0, 0.2, 0.18}, {"b", 1400.0, 5200.0, 0.0, 0.03}};
    const double rent = 900.0 * (std::exp(0.0685 * 0.18 - 0.0219 * 0.2) - 1.0) + 1400.0 * (std::exp(0.0685 * 0.03) - 1.0);
    const double wage = 3500.0 * (std::exp(0.1 * 0.18) - 1.0) + 5200.0 * (std::exp(0.1 * 0.03) - 1.0);
    CHECK(total_incidence(two, sc) == doctest::Approx(rent / wage).epsilon(1e-13));

    auto scaled = two;
    for (auto& z : scaled) {
        z.safmr_rent *= 7.5;
        z.wage_per_household *= 7.5;
    }
    CHECK(total_incidence(scaled, sc) == doctest::Approx(total_incidence(two, sc)).epsilon(1e-14));

    CHECK_ERROR_KIND(total_incidence({}, sc), "empty_set");
    CHECK_ERROR_KIND(total_incidence({{"a", 1.0, 1.0, 0.1, 0.0}}, sc), "zero_denominator");

    const auto curve = sensitivity_epsilon(two, sc, {0.02, 0.05, 0.1, 0.2, 0.5, 5.0, 500.0});
    for (std::size_t k = 1; k < curve.size(); ++k) CHECK(curve[k].rho_total < curve[k - 1].rho_total);
    CHECK(curve.back().rho_total < 1e-3);
    CHECK_ERROR_KIND(sensitivity_epsilon(two, sc, {0.1, 0.0}), "invalid_argument");
}

TEST_CASE("CBSA filter") {
    std::vector<IncidenceRow> rows(4);
    rows[0].zip = "a"; rows[0].cbsa = "bound"; rows[0].d_y = 0.02;
    rows[1].zip = "b"; rows[1].cbsa = "bound"; rows[1].d_y = 0.015;
    rows[2].zip = "c"; rows[2].cbsa = "above"; rows[2].d_y = 0.0;
    rows[3].zip = "d"; rows[3].cbsa = "above"; rows[3].d_y = 0.0005;
    const auto f = filter_affected_cbsas(rows, 0.001);
    CHECK(f.excluded_cbsas == std::vector<std::string>{"above"});
    CHECK(f.retained_zips == std::vector<std::string>{"a", "b"});
    CHECK(filter_affected_cbsas(rows, 0.0).excluded_cbsas.empty());
}

TEST_CASE("decile profile") {
    std::vector<IncidenceRow> rows;
    for (int i = 0; i < 37; ++i) {
        IncidenceRow r;
        r.zip = "z" + std::to_string(100 + i);
        r.d_mw_res = 0.01 * ((i * 7) % 37);
        r.d_mw_wkp = 0.2;
        r.rho = 1.0 - r.d_mw_res;  // rho rises with the gap
        rows.push_back(r);
    }
    const auto d = decile_profile(rows);
    REQUIRE(d.size() == 10);
    std::size_t total = 0;
    for (std::size_t k = 0; k < 10; ++k) {
        total += d[k].count;
        CHECK(d[k].count >= 3);
        CHECK(d[k].count <= 4);
        if (k > 0) {
            CHECK(d[k].mean_gap > d[k - 1].mean_gap);
            CHECK(d[k].mean_rho > d[k - 1].mean_rho);
        }
    }
    CHECK(total == 37);

    auto shuffled = rows;
    std::mt19937_64 gen(5);
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    const auto d2 = decile_profile(shuffled);
    for (std::size_t k = 0; k < 10; ++k) {
        CHECK(d2[k].mean_rho == d[k].mean_rho);
        CHECK(d2[k].count == d[k].count);
    }

    auto flat = rows;
    for (auto& r : flat) r.d_mw_res = 0.1;
    for (const auto& row : decile_profile(flat)) CHECK(row.mean_gap == doctest::Approx(0.1));

    rows.resize(9);
    CHECK_ERROR_KIND(decile_profile(rows), "too_few_values");
}

TEST_CASE("evaluate incidence end to end") {
    const PolicyScenario sc;
    std::vector<MeasureChange> changes;
    std::map<std::string, ZipEconomics> econ;
    for (int i = 0; i < 14; ++i) {
        const std::string zip = "z" + std::to_string(10 + i);
        const bool above = i >= 10;
        const bool still = i == 9;  // no workplace change
        changes.push_back({zip, above ? 15.0 : 7.25, above || still ? 0.0 : 0.2162,
                           above || still ? 0.0 : 0.15 + 0.005 * i});
        econ[zip] = {above ? "rich" : "metro", 0.2 + 0.01 * i, 1000.0 + 10 * i, 4000.0};
    }
    changes.push_back({"orphan", 7.25, 0.2, 0.2});
    const auto res = evaluate_incidence(changes, econ, sc);
    CHECK(res.missing_covariates == std::vector<std::string>{"orphan"});
    CHECK(res.excluded_cbsas == std::vector<std::string>{"rich"});
    CHECK(res.n_retained == 10);
    CHECK(res.n_undefined == 1);
    CHECK(res.aggregate_inputs().size() == 9);
    CHECK(res.deciles.empty());
    for (const auto& r : res.rows) {
        CHECK(r.d_r == sc.beta * r.d_mw_wkp + sc.gamma * r.d_mw_res);
        if (r.d_mw_wkp > 0.0) {
            REQUIRE(r.rho.has_value());
            CHECK(std::isfinite(*r.rho));
        }
    }
    CHECK(res.rho_total == doctest::Approx(total_incidence(res.aggregate_inputs(), sc)).epsilon(1e-15));

    REQUIRE(res.groups.size() == 2);
    CHECK(res.groups[0].label == "previous_mw_le_9");
    CHECK(res.groups[0].count == 9);
    CHECK(res.groups[1].count == 0);
    std::vector<double> rhos;
    for (const auto& r : res.rows) {
        if (r.retained && r.rho) rhos.push_back(*r.rho);
    }
    std::sort(rhos.begin(), rhos.end());
    CHECK(res.groups[0].median_rho == rhos[4]);
    CHECK(median({3.0, 1.0, 2.0, 10.0}) == 2.5);
    CHECK(std::isnan(median({})));
}
