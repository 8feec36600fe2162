#pragma once

#include "mwspill/policy_panel.hpp"
#include "mwspill/year_month.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mwspill {

enum class CommutingCategory { all, low_income, young };

CommutingCategory parse_category(const std::string& text);
std::string to_string(CommutingCategory category);

struct CommutingFlow {
    std::string origin_zip;
    std::string dest_zip;
    double jobs = 0.0;
};

// Residence-by-workplace job counts for one year and worker category.
struct CommutingMatrix {
    int year = 0;
    CommutingCategory category = CommutingCategory::all;
    std::vector<CommutingFlow> entries;

    void validate() const;
    std::vector<std::string> origins() const;  // sorted, unique
};

// Commuting shares of one origin over its positive-jobs destinations.
struct ExposureWeights {
    std::string origin_zip;
    std::map<std::string, double> weights;
};

ExposureWeights compute_shares(const CommutingMatrix& matrix, const std::string& origin_zip);

struct ShareTable {
    std::map<std::string, ExposureWeights> by_origin;
    std::vector<std::string> excluded;  // origins with no resident workers
};

ShareTable compute_all_shares(const CommutingMatrix& matrix);

// (zip, month) -> statutory MW lookup.
class ZipPolicyIndex {
public:
    ZipPolicyIndex() = default;
    explicit ZipPolicyIndex(const std::vector<ZipMonthPolicy>& rows);

    std::optional<double> statutory_mw(const std::string& zip, YearMonth month) const;
    std::vector<std::string> zips() const;

private:
    std::map<std::string, std::map<int, double>> mw_;
};

// sum_z pi_iz * ln MW_zt; throws listing every destination without a policy.
double workplace_mw(const ExposureWeights& weights, const ZipPolicyIndex& policies, YearMonth month);

struct SharePolicy {
    enum class Kind { fixed_year, time_varying } kind = Kind::fixed_year;
    int year = 2017;

    static SharePolicy fixed(int y) { return {Kind::fixed_year, y}; }
    static SharePolicy varying() { return {Kind::time_varying, 0}; }
    std::string to_string() const;
};

struct MeasureRow {
    std::string zip;
    YearMonth month;
    double mw_res = 0.0;
    double mw_wkp = 0.0;
};

struct MeasurePanel {
    std::vector<MeasureRow> rows;          // sorted by (zip, month)
    std::vector<std::string> no_commuting;  // panel zips absent from the share table
    std::vector<std::string> no_workers;    // origins with zero resident workers
};

// Residence and workplace measures for every panel zip and month.
MeasurePanel build_measure_panel(const std::vector<CommutingMatrix>& matrices,
                                 const std::vector<ZipMonthPolicy>& policies,
                                 const std::vector<YearMonth>& months, SharePolicy share_policy,
                                 CommutingCategory category);

struct RankDiagnostic {
    double min_singular_value = 0.0;
    double max_singular_value = 0.0;
    double pairwise_corr = 0.0;  // NaN when either column has no residual variation
    bool collinear = true;
    std::size_t n_obs = 0;
};

// First-differences both measures, residualizes them on month dummies and the
// differenced controls, and checks that the two residual columns are not
// collinear. `controls` rows align with `rows` (levels) and may be empty.
RankDiagnostic rank_condition_check(const std::vector<MeasureRow>& rows,
                                    const Eigen::MatrixXd& controls = Eigen::MatrixXd());

}  // namespace mwspill
