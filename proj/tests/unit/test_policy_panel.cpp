#include "helpers.hpp"

#include "mwspill/policy_panel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace mwspill;
using testing::block;
using testing::federal;
using testing::schedule;

namespace {

// Linear scan over dated steps: last step at or before the month.
std::optional<double> scan_level(const PolicySchedule& s, YearMonth m) {
    std::optional<double> v;
    for (const auto& st : s.steps) {
        if (!(m < st.month)) v = st.mw;
    }
    return v;
}

PolicySet three_level_set() {
    return PolicySet({federal(),
                      schedule("st", JurisdictionLevel::state, "S1", {{"2015-01", 8.0}}),
                      schedule("cy", JurisdictionLevel::place, "P1", {{"2016-01", 13.0}})});
}

}  // namespace

TEST_CASE("binding level is the max of applicable jurisdictions") {
    const auto set = three_level_set();
    const YearMonth m{2019, 3};
    CHECK(binding_mw_for_block(block("b", "z", 1, "S1", "C1", "P1"), m, set) == 13.0);
    CHECK(binding_mw_for_block(block("b", "z", 1, "S9", "C9", ""), m, set) == 7.25);
    CHECK(binding_mw_for_block(block("b", "z", 1, "S1", "C1", ""), m, set) == 8.0);
}

TEST_CASE("county step not yet in force") {
    const PolicySet set({federal(), schedule("ck", JurisdictionLevel::county, "C1", {{"2019-07", 12.0}})});
    const auto b = block("b", "z", 1);
    CHECK(binding_mw_for_block(b, YearMonth{2019, 6}, set) == 7.25);
    CHECK(binding_mw_for_block(b, YearMonth{2019, 7}, set) == 12.0);
}

TEST_CASE("month before the federal schedule is uncovered") {
    const PolicySet set({federal(7.25, "2012-01")});
    CHECK_ERROR_KIND(binding_mw_for_block(block("b", "z", 1), YearMonth{2011, 12}, set), "uncovered_month");
}

TEST_CASE("schedule validation") {
    CHECK_ERROR_KIND(PolicySet({schedule("st", JurisdictionLevel::state, "S1", {{"2015-01", 8.0}})}),
                     "invalid_schedule");
    CHECK_ERROR_KIND(PolicySet({federal(), federal()}), "invalid_schedule");
    auto dup = schedule("st", JurisdictionLevel::state, "S1", {{"2015-01", 8.0}, {"2015-01", 9.0}});
    CHECK_ERROR_KIND(dup.validate(), "invalid_schedule");
    auto neg = schedule("st", JurisdictionLevel::state, "S1", {{"2015-01", -1.0}});
    CHECK_ERROR_KIND(neg.validate(), "invalid_schedule");
}

TEST_CASE("ZIP aggregation by housing units") {
    CHECK(weighted_zip_mw({{100, 7.25}, {300, 13.0}}) == doctest::Approx((725.0 + 3900.0) / 400.0).epsilon(1e-15));
    CHECK(weighted_zip_mw({{100, 7.25}, {300, 13.0}}) == doctest::Approx(11.5625));
    CHECK(weighted_zip_mw({{5, 7.25}}) == 7.25);
    CHECK(weighted_zip_mw({{0, 7.25}, {0, 13.0}}) == doctest::Approx(10.125));

    const auto set = three_level_set();
    const auto z = aggregate_zip_mw({block("a", "z", 100, "S9", "C9"), block("b", "z", 300, "S1", "C1", "P1")},
                                    YearMonth{2019, 1}, set);
    CHECK(z.statutory_mw == doctest::Approx(11.5625));
    CHECK(z.mw_res == std::log(z.statutory_mw));
    CHECK_ERROR_KIND(aggregate_zip_mw({block("a", "z1", 1), block("b", "z2", 1)}, YearMonth{2019, 1}, set),
                     "mixed_zip");
}

TEST_CASE("panel rows sorted by zip then month") {
    const auto set = three_level_set();
    std::vector<BlockRecord> blocks{block("c", "z2", 10), block("a", "z1", 5, "S1"), block("b", "z3", 1, "S1", "C1", "P1")};
    const auto rows = build_zip_panel(blocks, set, YearMonth{2015, 11}, YearMonth{2016, 2});
    REQUIRE(rows.size() == 12);
    CHECK(std::is_sorted(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.zip != b.zip ? a.zip < b.zip : a.month < b.month;
    }));
    CHECK(rows[8].zip == "z3");
    CHECK(rows[9].statutory_mw == 8.0);   // 2015-12, place not yet in force
    CHECK(rows[10].statutory_mw == 13.0);  // 2016-01
    CHECK(build_zip_panel(blocks, set, YearMonth{2016, 2}, YearMonth{2016, 1}).empty());
}

TEST_CASE("property: floor, bounds and monotonicity over random schedules") {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> mw(7.3, 16.0);
    std::uniform_int_distribution<int> month(0, 59);
    std::uniform_real_distribution<double> units(0.0, 400.0);
    for (int draw = 0; draw < 50; ++draw) {
        std::vector<PolicySchedule> scheds{federal(7.25, "2015-01")};
        const std::vector<std::pair<JurisdictionLevel, std::string>> regions{
            {JurisdictionLevel::state, "S1"}, {JurisdictionLevel::county, "C1"}, {JurisdictionLevel::place, "P1"}};
        for (const auto& [lvl, code] : regions) {
            std::vector<int> ms{month(gen), month(gen), month(gen)};
            std::sort(ms.begin(), ms.end());
            ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
            std::vector<std::pair<std::string, double>> steps;
            for (int k : ms) steps.push_back({(YearMonth{2015, 1} + k).to_string(), mw(gen)});
            scheds.push_back(schedule(code, lvl, code, steps));
        }
        std::vector<BlockRecord> blocks{block("a", "z", units(gen), "S1", "C2", ""),
                                        block("b", "z", units(gen), "S1", "C1", "P1"),
                                        block("c", "z", units(gen), "S2", "C1", "")};
        const PolicySet set(scheds);
        // Raise one random step of the place schedule.
        auto raised = scheds;
        auto& steps = raised[3].steps;
        const std::size_t k = static_cast<std::size_t>(draw) % steps.size();
        steps[k].mw += 1.5;
        const PolicySet set_hi(raised);
        for (int t = 0; t < 60; ++t) {
            const YearMonth m = YearMonth{2015, 1} + t;
            const auto z = aggregate_zip_mw(blocks, m, set);
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto& b : blocks) {
                double expect = *scan_level(scheds[0], m);
                for (std::size_t s = 1; s < scheds.size(); ++s) {
                    const auto& code = scheds[s].region_code;
                    const bool applies = (code == b.state && scheds[s].level == JurisdictionLevel::state) ||
                                         (code == b.county && scheds[s].level == JurisdictionLevel::county) ||
                                         (code == b.place && scheds[s].level == JurisdictionLevel::place);
                    if (auto v = scan_level(scheds[s], m); applies && v) expect = std::max(expect, *v);
                }
                CHECK(binding_mw_for_block(b, m, set) == expect);
                lo = std::min(lo, expect);
                hi = std::max(hi, expect);
            }
            CHECK(z.statutory_mw >= 7.25);
            CHECK(z.statutory_mw >= lo - 1e-12);
            CHECK(z.statutory_mw <= hi + 1e-12);
            CHECK(aggregate_zip_mw(blocks, m, set_hi).statutory_mw >= z.statutory_mw - 1e-12);
        }
    }
}

TEST_CASE("MW worker share interpolates inside the containing bin") {
    const double inf = std::numeric_limits<double>::infinity();
    const std::vector<WageBin> bins{{0, 10000, 20}, {10000, 15000, 50}, {15000, inf, 30}};
    const auto r = estimate_mw_worker_share(bins, 7.25);
    CHECK(r.annual_mw_income == doctest::Approx(11310.0));
    CHECK(r.share == doctest::Approx((20.0 + 50.0 * (11310.0 - 10000.0) / 5000.0) / 100.0).epsilon(1e-14));
    CHECK(r.share == doctest::Approx(0.331).epsilon(1e-3));

    // Lower edge: fraction term vanishes.
    CHECK(estimate_mw_worker_share(bins, 10000.0 / 1560.0).share == doctest::Approx(0.2));
    CHECK(estimate_mw_worker_share({{0, 20000, 40}}, 10000.0 / 1560.0).share == doctest::Approx(0.5));
    CHECK(estimate_mw_worker_share({{5000, 20000, 40}}, 1.0).share == 0.0);

    const auto top = estimate_mw_worker_share({{0, 5000, 10}, {5000, 10000, 10}}, 7.25);
    CHECK(top.share == 1.0);
    CHECK(top.above_top_bin);

    CHECK_ERROR_KIND(estimate_mw_worker_share({{0, 100, 0}}, 7.25), "empty_workforce");
    CHECK_ERROR_KIND(estimate_mw_worker_share({{0, 100, 1}, {150, 200, 1}}, 7.25), "invalid_bins");
}

TEST_CASE("property: MW worker share weakly increasing in the hourly MW") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> w(0.0, 100.0);
    for (int draw = 0; draw < 30; ++draw) {
        std::vector<WageBin> bins;
        double edge = 0.0;
        for (int b = 0; b < 8; ++b) {
            bins.push_back({edge, edge + 2500.0 + 500.0 * b, w(gen)});
            edge = bins.back().upper;
        }
        bins.push_back({edge, std::numeric_limits<double>::infinity(), w(gen)});
        double prev = -1.0;
        for (double h = 1.0; h < 40.0; h += 0.37) {
            const double s = estimate_mw_worker_share(bins, h).share;
            CHECK(s >= prev - 1e-15);
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
            prev = s;
        }
    }
}

TEST_CASE("housing expenditure shares") {
    const auto one = housing_expenditure_shares({{"a", 1000.0, 48000.0}});
    REQUIRE(one.shares.size() == 1);
    CHECK(one.shares[0].second == doctest::Approx(0.25));

    const auto missing = housing_expenditure_shares({{"a", 1000.0, 48000.0}, {"b", 900.0, std::nullopt}});
    CHECK(missing.excluded == std::vector<std::string>{"b"});
    CHECK(missing.shares.size() == 1);

    std::vector<HousingShareInput> equal;
    for (int k = 0; k < 300; ++k) equal.push_back({"z" + std::to_string(k), 500.0, 24000.0});
    for (const auto& [z, s] : housing_expenditure_shares(equal).shares) CHECK(s == 0.25);
}

TEST_CASE("winsorization clamps an outlier to the nearest-rank percentile") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.2, 0.3);
    std::vector<HousingShareInput> raw;
    for (int k = 0; k < 1000; ++k) raw.push_back({"z" + std::to_string(k), u(gen) * 4000.0, 48000.0});
    raw[123].safmr_rent *= 10.0;
    const auto got = housing_expenditure_shares(raw);

    // Oracle: sort and clamp with ceil(p/100 * N) ranks.
    std::vector<double> s;
    for (const auto& r : raw) s.push_back(r.safmr_rent / 4000.0);
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted[static_cast<std::size_t>(std::ceil(0.005 * 1000)) - 1];
    const double hi = sorted[static_cast<std::size_t>(std::ceil(0.995 * 1000)) - 1];
    REQUIRE(got.shares.size() == s.size());
    for (std::size_t k = 0; k < s.size(); ++k) CHECK(got.shares[k].second == std::clamp(s[k], lo, hi));
    CHECK(got.shares[123].second == hi);
    CHECK(got.upper_clamp == hi);
}

TEST_CASE("property: winsorization is idempotent") {
    std::mt19937_64 gen(5);
    std::lognormal_distribution<double> d(0.0, 1.0);
    for (int n : {1, 7, 199, 200, 1000}) {
        std::vector<double> v(static_cast<std::size_t>(n));
        for (auto& x : v) x = d(gen);
        const auto once = winsorize(v, 0.5, 99.5);
        CHECK(winsorize(once, 0.5, 99.5) == once);
        const auto wide = winsorize(v, 10, 90);
        CHECK(winsorize(wide, 10, 90) == wide);
    }
}
