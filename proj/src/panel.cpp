#include "mwspill/panel.hpp"

#include "mwspill/error.hpp"

#include <algorithm>

namespace mwspill {

std::string unit_key(const PanelObservation& obs) {
    return obs.event_id.empty() ? obs.zip : obs.zip + "@" + obs.event_id;
}

namespace {

bool unit_month_less(const PanelObservation& a, const PanelObservation& b) {
    if (a.event_id != b.event_id) return a.event_id < b.event_id;
    if (a.zip != b.zip) return a.zip < b.zip;
    return a.month < b.month;
}

// Stable order by (event, zip, month) as indices, leaving the rows in place.
std::vector<std::size_t> sorted_order(const Panel& panel) {
    std::vector<std::size_t> order(panel.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (std::is_sorted(panel.begin(), panel.end(), unit_month_less)) return order;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return unit_month_less(panel[a], panel[b]); });
    return order;
}

}  // namespace

void sort_panel(Panel& panel) {
    if (std::is_sorted(panel.begin(), panel.end(), unit_month_less)) return;
    const auto order = sorted_order(panel);
    Panel out;
    out.reserve(panel.size());
    for (auto i : order) out.push_back(std::move(panel[i]));
    panel = std::move(out);
}

Panel first_difference(const Panel& panel) {
    const auto order = sorted_order(panel);
    Panel out;
    out.reserve(panel.size());
    std::string gaps;
    int n_gaps = 0;
    for (std::size_t k = 1; k < order.size(); ++k) {
        const auto& prev = panel[order[k - 1]];
        const auto& cur = panel[order[k]];
        if (prev.zip != cur.zip || prev.event_id != cur.event_id) continue;
        const int step = cur.month - prev.month;
        if (step == 0) {
            throw Error("duplicate_observation", "duplicate observation for zip " + cur.zip + " at " +
                                                     cur.month.to_string());
        }
        if (step != 1) {
            if (n_gaps < 20) {
                gaps += (gaps.empty() ? "" : "; ") + cur.zip + " " + prev.month.to_string() + ".." +
                        cur.month.to_string();
            }
            ++n_gaps;
            continue;
        }
        PanelObservation d = cur;
        d.r = cur.r - prev.r;
        d.mw_res = cur.mw_res - prev.mw_res;
        d.mw_wkp = cur.mw_wkp - prev.mw_wkp;
        for (auto& [name, v] : d.controls) {
            auto it = prev.controls.find(name);
            v = it == prev.controls.end() ? kMissing : v - it->second;
        }
        out.push_back(std::move(d));
    }
    if (n_gaps > 0) {
        throw Error("panel_gaps", std::to_string(n_gaps) + " gap(s) in monthly panel: " + gaps);
    }
    return out;
}

}  // namespace mwspill
