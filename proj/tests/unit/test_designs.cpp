#include "helpers.hpp"

#include "mwspill/binscatter.hpp"
#include "mwspill/entropy_balance.hpp"
#include "mwspill/stacked.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace mwspill;

namespace {

// One CBSA of `n` ZIPs over 24 months; the first `treated` ZIPs raise their MW at month 12.
void add_cbsa(Panel& p, const std::string& cbsa, int n, int treated, std::mt19937_64& gen, int missing_zip = -1) {
    std::normal_distribution<double> n01;
    for (int i = 0; i < n; ++i) {
        for (int t = 0; t < 24; ++t) {
            if (i == missing_zip && t == 15) continue;
            PanelObservation o;
            o.zip = cbsa + "-" + std::to_string(100 + i);
            o.cbsa = cbsa;
            o.state = "S" + std::to_string(i % 3);
            o.month = YearMonth{2018, 1} + t;
            const bool post = i < treated && t >= 12;
            o.mw_res = std::log(post ? 10.0 : 8.0);
            o.mw_wkp = std::log(8.0) + (t >= 12 ? 0.01 * (1 + i % 5) : 0.0) + 0.001 * (i % 4);
            o.r = 0.1 * i + 0.06 * o.mw_wkp - 0.02 * o.mw_res + 0.002 * t + 0.003 * n01(gen);
            p.push_back(o);
        }
    }
}

}  // namespace

TEST_CASE("stacked events need a strict subset of treated ZIPs and enough ZIPs") {
    std::mt19937_64 gen(1);
    Panel p;
    add_cbsa(p, "A", 12, 5, gen);
    add_cbsa(p, "B", 8, 3, gen);
    add_cbsa(p, "C", 11, 11, gen);
    const auto s = build_stacked_sample(p, 6, 10);
    REQUIRE(s.events.size() == 1);
    const auto& ev = s.events.front();
    CHECK(ev.event_id == "A:2019-01");
    CHECK(ev.zips.size() == 12);
    CHECK(ev.treated.size() == 5);
    CHECK(s.observations.size() == 12 * 13);
    for (const auto& o : s.observations) {
        CHECK(o.event_id == ev.event_id);
        CHECK(o.month >= ev.month - 6);
        CHECK(o.month <= ev.month + 6);
    }
    CHECK(s.small_events == std::vector<std::string>{"B:2019-01"});

    // A ZIP missing a window month is dropped from the event.
    Panel gap;
    add_cbsa(gap, "A", 12, 5, gen, 7);
    CHECK_ERROR_KIND(build_stacked_sample(gap, 6, 12), "no_events");
    const auto g = build_stacked_sample(gap, 6, 10);
    CHECK(g.events.front().zips.size() == 11);
    CHECK(g.incomplete_windows == 1);

    Panel none;
    add_cbsa(none, "C", 11, 11, gen);
    CHECK_ERROR_KIND(build_stacked_sample(none), "no_events");
    Panel dup = p;
    dup.push_back(p.front());
    CHECK_ERROR_KIND(build_stacked_sample(dup), "duplicate_observation");
}

TEST_CASE("single-event stack equals time fixed effects on the window") {
    std::mt19937_64 gen(2);
    Panel p;
    add_cbsa(p, "A", 12, 5, gen);
    const auto s = build_stacked_sample(p, 6, 10);
    RegressionSpec base;
    const auto stacked = estimate_ols(stacked_spec(base), s.observations);

    Panel window;
    for (const auto& o : p) {
        if (o.month >= YearMonth{2019, 1} - 6 && o.month <= YearMonth{2019, 1} + 6) window.push_back(o);
    }
    const auto plain = estimate_ols(base, window);
    REQUIRE(stacked.names == plain.names);
    CHECK((stacked.coef - plain.coef).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(stacked.n_obs == plain.n_obs);
}

TEST_CASE("entropy balancing") {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> n01;
    const int n = 200;
    Eigen::MatrixXd x(n, 3);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = n01(gen);
        x(i, 1) = std::exp(0.5 * n01(gen));
        x(i, 2) = 0.3 * x(i, 0) + n01(gen);
    }
    const Eigen::VectorXd means = x.colwise().mean();
    const auto uniform = entropy_balance_weights(x, means);
    CHECK((uniform.weights.array() - 1.0 / n).abs().maxCoeff() < 1e-12);

    Eigen::VectorXd target(3);
    target << 0.2, 1.3, -0.1;
    const auto bw = entropy_balance_weights(x, target);
    CHECK((x.transpose() * bw.weights - target).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(bw.weights.minCoeff() > 0.0);
    CHECK(bw.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(bw.max_gap < 1e-8);

    // Affine rescaling of the columns leaves the weights unchanged.
    Eigen::MatrixXd scaled = x;
    Eigen::VectorXd scaled_target = target;
    const double a[3] = {2.0, -0.5, 1000.0};
    const double b[3] = {5.0, 1.0, -3.0};
    for (int c = 0; c < 3; ++c) {
        scaled.col(c) = a[c] * x.col(c).array() + b[c];
        scaled_target(c) = a[c] * target(c) + b[c];
    }
    const auto bs = entropy_balance_weights(scaled, scaled_target);
    CHECK((bs.weights - bw.weights).cwiseAbs().maxCoeff() < 1e-8);

    Eigen::VectorXd outside = target;
    outside(0) = x.col(0).maxCoeff() + 1.0;
    CHECK_ERROR_KIND(entropy_balance_weights(x, outside), "infeasible_targets");
}

TEST_CASE("entropy balancing on three points matches a grid search") {
    Eigen::MatrixXd x(3, 1);
    x << 0, 1, 2;
    Eigen::VectorXd t(1);
    t << 1.5;
    const auto bw = entropy_balance_weights(x, t);
    // On the constraint set w = (u - 0.5, 1.5 - 2u, u), u in [0.5, 0.75].
    double best_u = 0.5, best = 1e300;
    for (double u = 0.5; u <= 0.75; u += 1e-5) {
        const double w[3] = {u - 0.5, 1.5 - 2.0 * u, u};
        double obj = 0.0;
        for (double v : w) obj += v > 0.0 ? v * std::log(3.0 * v) : 0.0;
        if (obj < best) {
            best = obj;
            best_u = u;
        }
    }
    CHECK(bw.weights(0) == doctest::Approx(best_u - 0.5).epsilon(1e-3));
    CHECK(bw.weights(1) == doctest::Approx(1.5 - 2.0 * best_u).epsilon(1e-3));
    CHECK(bw.weights(2) == doctest::Approx(best_u).epsilon(1e-3));
}

TEST_CASE("binscatter of an exactly linear model") {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> n01;
    std::bernoulli_distribution flip(0.3);
    Panel p;
    const double beta = 0.08;
    for (int i = 0; i < 60; ++i) {
        double res = 2.0, wkp = 2.0;
        for (int t = 0; t < 20; ++t) {
            if (t > 0 && flip(gen)) res += 0.1;
            wkp += 0.02 * n01(gen);
            PanelObservation o;
            o.zip = "z" + std::to_string(i);
            o.cbsa = "m" + std::to_string(i % 5);
            o.month = YearMonth{2016, 1} + t;
            o.mw_res = res;
            o.mw_wkp = wkp;
            o.r = 0.5 * i + beta * wkp - 0.03 * res;
            p.push_back(o);
        }
    }
    BinscatterOptions opt;
    opt.n_bins = 20;
    opt.increase_months_only = false;
    const auto pts = binned_residual_scatter(p, opt);
    REQUIRE(pts.size() == 20);
    std::size_t total = 0;
    for (const auto& b : pts) {
        CHECK(b.y_mean == doctest::Approx(beta * b.x_mean).epsilon(1e-6).scale(1e-9));
        total += b.count;
    }
    CHECK(total == 60u * 19u);
    for (std::size_t k = 1; k < pts.size(); ++k) CHECK(pts[k].x_mean >= pts[k - 1].x_mean);

    opt.n_bins = static_cast<int>(total);
    for (const auto& b : binned_residual_scatter(p, opt)) CHECK(b.count == 1);
    opt.n_bins = static_cast<int>(total) + 1;
    CHECK_ERROR_KIND(binned_residual_scatter(p, opt), "too_few_observations");

    // Restricting to CBSA-months with an increase keeps only those rows.
    BinscatterOptions inc;
    inc.n_bins = 10;
    std::set<std::pair<std::string, int>> cells;
    Panel sorted = p;
    sort_panel(sorted);
    for (std::size_t k = 1; k < sorted.size(); ++k) {
        if (sorted[k].zip == sorted[k - 1].zip && sorted[k].mw_res > sorted[k - 1].mw_res) {
            cells.emplace(sorted[k].cbsa, sorted[k].month.index());
        }
    }
    std::size_t expected = 0;
    for (const auto& o : first_difference(p)) expected += cells.count({o.cbsa, o.month.index()});
    std::size_t got = 0;
    for (const auto& b : binned_residual_scatter(p, inc)) got += b.count;
    CHECK(got == expected);
}

TEST_CASE("binscatter is deterministic with tied residuals") {
    Panel p;
    for (int i = 0; i < 10; ++i) {
        for (int t = 0; t < 5; ++t) {
            PanelObservation o;
            o.zip = "z" + std::to_string(i);
            o.cbsa = "m";
            o.month = YearMonth{2016, 1} + t;
            o.mw_res = 2.0;
            o.mw_wkp = 2.0 + 0.01 * (t % 2);
            o.r = 0.01 * i * t;
            p.push_back(o);
        }
    }
    BinscatterOptions opt;
    opt.n_bins = 4;
    opt.increase_months_only = false;
    const auto a = binned_residual_scatter(p, opt);
    const auto b = binned_residual_scatter(p, opt);
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].x_mean == b[k].x_mean);
        CHECK(a[k].y_mean == b[k].y_mean);
        CHECK(a[k].count == b[k].count);
    }
}
