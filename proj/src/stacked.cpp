#include "mwspill/stacked.hpp"

#include "mwspill/error.hpp"

#include <cmath>
#include <map>
#include <set>

namespace mwspill {

StackedSample build_stacked_sample(const Panel& panel, int window, std::size_t min_zips) {
    if (window < 0) throw Error("invalid_argument", "stacking window must be >= 0");

    // cbsa -> zip -> month index -> row
    std::map<std::string, std::map<std::string, std::map<int, std::size_t>>> by_cbsa;
    for (std::size_t i = 0; i < panel.size(); ++i) {
        const auto& o = panel[i];
        if (o.cbsa.empty()) continue;
        auto [it, inserted] = by_cbsa[o.cbsa][o.zip].emplace(o.month.index(), i);
        if (!inserted) {
            throw Error("duplicate_observation", "duplicate observation for zip " + o.zip + " at " +
                                                     o.month.to_string());
        }
    }

    StackedSample out;
    for (const auto& [cbsa, zips] : by_cbsa) {
        std::set<int> months;
        for (const auto& [zip, rows] : zips) {
            for (const auto& [m, row] : rows) months.insert(m);
        }
        for (int m : months) {
            std::vector<std::string> changed;
            std::size_t observed = 0;
            for (const auto& [zip, rows] : zips) {
                auto cur = rows.find(m);
                auto prev = rows.find(m - 1);
                if (cur == rows.end() || prev == rows.end()) continue;
                const double a = panel[cur->second].mw_res;
                const double b = panel[prev->second].mw_res;
                if (!std::isfinite(a) || !std::isfinite(b)) continue;
                ++observed;
                if (a != b) changed.push_back(zip);
            }
            if (changed.empty() || changed.size() == observed) continue;

            StackedEvent ev;
            ev.cbsa = cbsa;
            ev.month = YearMonth::from_index(m);
            ev.event_id = cbsa + ":" + ev.month.to_string();
            const std::set<std::string> treated(changed.begin(), changed.end());
            for (const auto& [zip, rows] : zips) {
                bool complete = true;
                for (int t = m - window; t <= m + window && complete; ++t) complete = rows.count(t) > 0;
                if (!complete) {
                    ++out.incomplete_windows;
                    continue;
                }
                ev.zips.push_back(zip);
                if (treated.count(zip)) ev.treated.push_back(zip);
            }
            if (ev.zips.size() < min_zips || ev.treated.empty() || ev.treated.size() == ev.zips.size()) {
                out.small_events.push_back(ev.event_id);
                continue;
            }
            for (const auto& zip : ev.zips) {
                const auto& rows = zips.at(zip);
                for (int t = m - window; t <= m + window; ++t) {
                    PanelObservation o = panel[rows.at(t)];
                    o.event_id = ev.event_id;
                    out.observations.push_back(std::move(o));
                }
            }
            out.events.push_back(std::move(ev));
        }
    }
    if (out.events.empty()) throw Error("no_events", "no qualifying stacked events");
    sort_panel(out.observations);
    return out;
}

RegressionSpec stacked_spec(RegressionSpec base) {
    base.fe = {FixedEffect::time_event};
    return base;
}

}  // namespace mwspill
