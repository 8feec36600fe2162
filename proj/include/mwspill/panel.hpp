#pragma once

#include "mwspill/year_month.hpp"

#include <limits>
#include <map>
#include <string>
#include <vector>

namespace mwspill {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// One ZIP-month row. Outcome, measures and controls are levels in a raw
// panel and changes after first_difference. NaN marks a missing value.
struct PanelObservation {
    std::string zip;
    YearMonth month;
    double r = kMissing;  // log rent per square foot
    double mw_res = kMissing;
    double mw_wkp = kMissing;
    std::map<std::string, double> controls;
    std::string state;  // default cluster
    std::string county;
    std::string cbsa;
    std::string entry_cohort;
    std::string event_id;  // set for stacked samples
    std::map<std::string, double> moderators;
    double weight = 1.0;
};

using Panel = std::vector<PanelObservation>;

// Units are (zip, event_id) so stacked copies difference within their event.
std::string unit_key(const PanelObservation& obs);

// Sorts by unit then month.
void sort_panel(Panel& panel);

// Month-over-month changes of r, mw_res, mw_wkp and controls within each unit;
// the first month of every unit is dropped. Throws listing any gaps.
Panel first_difference(const Panel& panel);

}  // namespace mwspill
