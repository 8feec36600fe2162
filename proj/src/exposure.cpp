#include "mwspill/exposure.hpp"

#include "mwspill/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace mwspill {

CommutingCategory parse_category(const std::string& text) {
    if (text == "all") return CommutingCategory::all;
    if (text == "low_income") return CommutingCategory::low_income;
    if (text == "young") return CommutingCategory::young;
    throw Error("schema", "unknown commuting category '" + text + "'");
}

std::string to_string(CommutingCategory category) {
    switch (category) {
        case CommutingCategory::all: return "all";
        case CommutingCategory::low_income: return "low_income";
        case CommutingCategory::young: return "young";
    }
    return "unknown";
}

void CommutingMatrix::validate() const {
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& e : entries) {
        if (!(e.jobs >= 0.0) || !std::isfinite(e.jobs)) {
            throw Error("invalid_commuting", "negative job count for " + e.origin_zip + " -> " +
                                                 e.dest_zip);
        }
        if (!seen.emplace(e.origin_zip, e.dest_zip).second) {
            throw Error("invalid_commuting", "duplicate commuting pair " + e.origin_zip + " -> " +
                                                 e.dest_zip + " in " + std::to_string(year) + "/" +
                                                 mwspill::to_string(category));
        }
    }
}

std::vector<std::string> CommutingMatrix::origins() const {
    std::set<std::string> s;
    for (const auto& e : entries) s.insert(e.origin_zip);
    return {s.begin(), s.end()};
}

namespace {

ExposureWeights normalize(const std::string& origin, const std::map<std::string, double>& jobs) {
    double total = 0.0;
    for (const auto& [dest, n] : jobs) total += n;
    if (!(total > 0.0)) {
        throw Error("no_resident_workers", "no resident workers for origin " + origin);
    }
    ExposureWeights w;
    w.origin_zip = origin;
    for (const auto& [dest, n] : jobs) {
        if (n > 0.0) w.weights.emplace(dest, n / total);
    }
    return w;
}

}  // namespace

ExposureWeights compute_shares(const CommutingMatrix& matrix, const std::string& origin_zip) {
    std::map<std::string, double> jobs;
    for (const auto& e : matrix.entries) {
        if (e.origin_zip == origin_zip) jobs[e.dest_zip] += e.jobs;
    }
    return normalize(origin_zip, jobs);
}

ShareTable compute_all_shares(const CommutingMatrix& matrix) {
    std::map<std::string, std::map<std::string, double>> jobs;
    for (const auto& e : matrix.entries) jobs[e.origin_zip][e.dest_zip] += e.jobs;
    ShareTable table;
    for (const auto& [origin, row] : jobs) {
        double total = 0.0;
        for (const auto& [d, n] : row) total += n;
        if (!(total > 0.0)) {
            table.excluded.push_back(origin);
            continue;
        }
        table.by_origin.emplace(origin, normalize(origin, row));
    }
    return table;
}

ZipPolicyIndex::ZipPolicyIndex(const std::vector<ZipMonthPolicy>& rows) {
    for (const auto& r : rows) mw_[r.zip][r.month.index()] = r.statutory_mw;
}

std::optional<double> ZipPolicyIndex::statutory_mw(const std::string& zip, YearMonth month) const {
    auto it = mw_.find(zip);
    if (it == mw_.end()) return std::nullopt;
    auto jt = it->second.find(month.index());
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
}

std::vector<std::string> ZipPolicyIndex::zips() const {
    std::vector<std::string> out;
    out.reserve(mw_.size());
    for (const auto& [z, m] : mw_) out.push_back(z);
    return out;
}

double workplace_mw(const ExposureWeights& weights, const ZipPolicyIndex& policies, YearMonth month) {
    double acc = 0.0;
    std::vector<std::string> missing;
    for (const auto& [dest, pi] : weights.weights) {
        auto mw = policies.statutory_mw(dest, month);
        if (!mw) {
            missing.push_back(dest);
            continue;
        }
        acc += pi * std::log(*mw);
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& z : missing) list += (list.empty() ? "" : ",") + z;
        throw Error("missing_destination_policy", "origin " + weights.origin_zip + ", month " +
                                                      month.to_string() +
                                                      ": no statutory MW for destination zips " + list);
    }
    return acc;
}

std::string SharePolicy::to_string() const {
    if (kind == Kind::time_varying) return "time_varying";
    return "fixed_year(" + std::to_string(year) + ")";
}

MeasurePanel build_measure_panel(const std::vector<CommutingMatrix>& matrices,
                                 const std::vector<ZipMonthPolicy>& policies,
                                 const std::vector<YearMonth>& months, SharePolicy share_policy,
                                 CommutingCategory category) {
    std::map<int, const CommutingMatrix*> by_year;
    for (const auto& m : matrices) {
        if (m.category != category) continue;
        if (!by_year.emplace(m.year, &m).second) {
            throw Error("invalid_commuting", "several commuting matrices for year " +
                                                 std::to_string(m.year) + "/" + to_string(category));
        }
    }
    std::map<int, ShareTable> tables;
    auto table_for = [&](int year) -> const ShareTable& {
        auto it = tables.find(year);
        if (it != tables.end()) return it->second;
        auto mt = by_year.find(year);
        mt->second->validate();
        return tables.emplace(year, compute_all_shares(*mt->second)).first->second;
    };
    auto year_for = [&](YearMonth month) -> int {
        if (share_policy.kind == SharePolicy::Kind::fixed_year) {
            if (!by_year.count(share_policy.year)) {
                throw Error("missing_year", "no " + to_string(category) +
                                                " commuting matrix for year " +
                                                std::to_string(share_policy.year));
            }
            return share_policy.year;
        }
        auto it = by_year.upper_bound(month.year());
        if (it == by_year.begin()) {
            throw Error("missing_year", "no " + to_string(category) +
                                            " commuting matrix at or before year " +
                                            std::to_string(month.year()));
        }
        return std::prev(it)->first;
    };

    ZipPolicyIndex index(policies);
    MeasurePanel out;
    std::set<std::string> no_commuting;
    std::set<std::string> no_workers;
    std::vector<YearMonth> sorted_months = months;
    std::sort(sorted_months.begin(), sorted_months.end());
    sorted_months.erase(std::unique(sorted_months.begin(), sorted_months.end()), sorted_months.end());

    for (const auto& zip : index.zips()) {
        for (YearMonth m : sorted_months) {
            auto own = index.statutory_mw(zip, m);
            if (!own) continue;
            const ShareTable& table = table_for(year_for(m));
            auto wt = table.by_origin.find(zip);
            if (wt == table.by_origin.end()) {
                if (std::find(table.excluded.begin(), table.excluded.end(), zip) != table.excluded.end()) {
                    no_workers.insert(zip);
                } else {
                    no_commuting.insert(zip);
                }
                continue;
            }
            MeasureRow row;
            row.zip = zip;
            row.month = m;
            row.mw_res = std::log(*own);
            row.mw_wkp = workplace_mw(wt->second, index, m);
            out.rows.push_back(std::move(row));
        }
    }
    out.no_commuting.assign(no_commuting.begin(), no_commuting.end());
    out.no_workers.assign(no_workers.begin(), no_workers.end());
    return out;
}

RankDiagnostic rank_condition_check(const std::vector<MeasureRow>& rows,
                                    const Eigen::MatrixXd& controls) {
    const bool has_controls = controls.size() > 0;
    if (has_controls && static_cast<std::size_t>(controls.rows()) != rows.size()) {
        throw Error("invalid_argument", "controls rows must align with measure rows");
    }
    std::vector<std::size_t> order(rows.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (rows[a].zip != rows[b].zip) return rows[a].zip < rows[b].zip;
        return rows[a].month < rows[b].month;
    });

    std::vector<std::size_t> cur;
    std::vector<std::size_t> prev;
    for (std::size_t k = 1; k < order.size(); ++k) {
        const auto& a = rows[order[k - 1]];
        const auto& b = rows[order[k]];
        if (a.zip == b.zip && b.month - a.month == 1) {
            cur.push_back(order[k]);
            prev.push_back(order[k - 1]);
        }
    }

    RankDiagnostic diag;
    diag.n_obs = cur.size();
    diag.pairwise_corr = std::numeric_limits<double>::quiet_NaN();
    if (cur.empty()) return diag;

    const auto n = static_cast<Eigen::Index>(cur.size());
    Eigen::MatrixXd d(n, 2);
    std::map<int, Eigen::Index> month_col;
    for (std::size_t k = 0; k < cur.size(); ++k) month_col.emplace(rows[cur[k]].month.index(), 0);
    Eigen::Index c = 0;
    for (auto& [m, col] : month_col) col = c++;
    const Eigen::Index kc = has_controls ? controls.cols() : 0;
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, c + kc);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& a = rows[prev[static_cast<std::size_t>(k)]];
        const auto& b = rows[cur[static_cast<std::size_t>(k)]];
        d(k, 0) = b.mw_res - a.mw_res;
        d(k, 1) = b.mw_wkp - a.mw_wkp;
        z(k, month_col[b.month.index()]) = 1.0;
        if (has_controls) {
            z.row(k).tail(kc) = controls.row(static_cast<Eigen::Index>(cur[static_cast<std::size_t>(k)])) -
                                controls.row(static_cast<Eigen::Index>(prev[static_cast<std::size_t>(k)]));
        }
    }
    const double raw_norm = Eigen::JacobiSVD<Eigen::MatrixXd>(d).singularValues()(0);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
    Eigen::MatrixXd resid = d - z * qr.solve(d);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(resid);
    diag.max_singular_value = svd.singularValues()(0);
    diag.min_singular_value = svd.singularValues()(1);
    diag.collinear = !(raw_norm > 0.0) || diag.min_singular_value < 1e-10 * raw_norm;

    const Eigen::VectorXd x0 = resid.col(0).array() - resid.col(0).mean();
    const Eigen::VectorXd x1 = resid.col(1).array() - resid.col(1).mean();
    const double s0 = x0.norm();
    const double s1 = x1.norm();
    if (s0 > 1e-12 * std::max(raw_norm, 1.0) && s1 > 1e-12 * std::max(raw_norm, 1.0)) {
        diag.pairwise_corr = x0.dot(x1) / (s0 * s1);
    }
    return diag;
}

}  // namespace mwspill
