#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace mwspill {

// Calendar month, stored as a single month count so that ordering and
// arithmetic are trivial.
class YearMonth {
public:
    constexpr YearMonth() = default;
    constexpr YearMonth(int year, int month) : index_(year * 12 + (month - 1)) {}

    static YearMonth parse(std::string_view text);  // "YYYY-MM"
    static constexpr YearMonth from_index(int index) {
        YearMonth ym;
        ym.index_ = index;
        return ym;
    }

    constexpr int year() const { return index_ >= 0 ? index_ / 12 : -((-index_ - 1) / 12) - 1; }
    constexpr int month() const { return index_ - year() * 12 + 1; }
    constexpr int index() const { return index_; }

    std::string to_string() const;

    constexpr YearMonth operator+(int months) const { return from_index(index_ + months); }
    constexpr YearMonth operator-(int months) const { return from_index(index_ - months); }
    constexpr int operator-(YearMonth other) const { return index_ - other.index_; }

    constexpr auto operator<=>(const YearMonth&) const = default;

private:
    int index_ = 0;
};

}  // namespace mwspill
