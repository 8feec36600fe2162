#pragma once

#include "mwspill/panel.hpp"
#include "mwspill/regression.hpp"

#include <string>
#include <vector>

namespace mwspill {

struct StackedEvent {
    std::string event_id;  // "<cbsa>:<YYYY-MM>"
    std::string cbsa;
    YearMonth month;
    std::vector<std::string> zips;     // retained, complete windows
    std::vector<std::string> treated;  // subset with a residence MW change at the event month
};

struct StackedSample {
    std::vector<StackedEvent> events;
    Panel observations;  // copies tagged with event_id, months month-window .. month+window
    std::vector<std::string> small_events;  // candidate events with fewer than min_zips complete zips
    std::size_t incomplete_windows = 0;     // zip windows dropped for missing months
};

// An event is a CBSA-month in which a strict subset of the CBSA's ZIPs saw
// their residence MW change. ZIPs missing any month of the window are
// dropped from that event.
StackedSample build_stacked_sample(const Panel& panel, int window = 6, std::size_t min_zips = 10);

// The base spec re-targeted at a stacked sample: event-by-month fixed effects.
RegressionSpec stacked_spec(RegressionSpec base);

}  // namespace mwspill
