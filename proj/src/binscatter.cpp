#include "mwspill/binscatter.hpp"

#include "mwspill/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace mwspill {

namespace {

std::set<std::pair<std::string, int>> increase_cells(const Panel& panel) {
    Panel sorted = panel;
    sort_panel(sorted);
    std::set<std::pair<std::string, int>> cells;
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        const auto& a = sorted[i - 1];
        const auto& b = sorted[i];
        if (unit_key(a) != unit_key(b) || b.month - a.month != 1) continue;
        if (b.mw_res > a.mw_res) cells.emplace(b.cbsa, b.month.index());
    }
    return cells;
}

}  // namespace

std::vector<BinPoint> binned_residual_scatter(const Panel& panel, const BinscatterOptions& options) {
    if (options.n_bins < 1 || options.other_measure_bins < 1) {
        throw Error("invalid_argument", "bin counts must be positive");
    }
    Panel data = options.transform == Transform::first_difference ? first_difference(panel) : panel;
    sort_panel(data);
    std::set<std::pair<std::string, int>> keep_cells;
    if (options.increase_months_only) keep_cells = increase_cells(panel);

    const bool wkp = options.measure == Measure::wkp;
    std::vector<double> y;
    std::vector<double> x;
    std::vector<double> other;
    std::vector<std::string> units;
    for (const auto& o : data) {
        const double xv = wkp ? o.mw_wkp : o.mw_res;
        const double ov = wkp ? o.mw_res : o.mw_wkp;
        if (!std::isfinite(o.r) || !std::isfinite(xv) || !std::isfinite(ov)) continue;
        if (options.increase_months_only && !keep_cells.count({o.cbsa, o.month.index()})) continue;
        y.push_back(o.r);
        x.push_back(xv);
        other.push_back(ov);
        units.push_back(unit_key(o));
    }
    const std::size_t n = y.size();
    const auto bins = static_cast<std::size_t>(options.n_bins);
    if (n < bins) throw Error("too_few_observations", "fewer observations than bins");

    // Quantile cutpoints on values so that ties always share a bin.
    std::vector<double> sorted_other = other;
    std::sort(sorted_other.begin(), sorted_other.end());
    std::vector<double> cuts;
    const auto ob = static_cast<std::size_t>(options.other_measure_bins);
    for (std::size_t j = 1; j < ob; ++j) cuts.push_back(sorted_other[j * n / ob]);
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    std::map<std::string, int> unit_codes;
    for (const auto& u : units) unit_codes.emplace(u, 0);
    int next = 0;
    for (auto& [u, c] : unit_codes) c = next++;
    std::vector<std::vector<int>> groups(2, std::vector<int>(n));
    for (std::size_t i = 0; i < n; ++i) {
        groups[0][i] = unit_codes[units[i]];
        groups[1][i] = static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), other[i]) - cuts.begin());
    }

    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
        m(static_cast<Eigen::Index>(i), 0) = y[i];
        m(static_cast<Eigen::Index>(i), 1) = x[i];
    }
    const Eigen::MatrixXd resid = absorb_fixed_effects(m, groups, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return resid(static_cast<Eigen::Index>(a), 1) < resid(static_cast<Eigen::Index>(b), 1);
    });
    std::vector<BinPoint> out(bins);
    for (std::size_t rank = 0; rank < n; ++rank) {
        auto& bin = out[rank * bins / n];
        const auto row = static_cast<Eigen::Index>(order[rank]);
        bin.x_mean += resid(row, 1);
        bin.y_mean += resid(row, 0);
        ++bin.count;
    }
    for (auto& b : out) {
        b.x_mean /= static_cast<double>(b.count);
        b.y_mean /= static_cast<double>(b.count);
    }
    return out;
}

}  // namespace mwspill
