#include "bubblenet/series.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "bubblenet/errors.hpp"

namespace bubblenet {

namespace {

int parse_int(std::string_view text, std::string_view whole) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw InvalidArgument("malformed date '" + std::string(whole) + "'");
    }
    return value;
}

}  // namespace

Date::Date(int year, unsigned month, unsigned day) {
    const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                          std::chrono::day{day}};
    if (!ymd.ok()) {
        throw InvalidArgument("invalid calendar date " + std::to_string(year) + "-" +
                              std::to_string(month) + "-" + std::to_string(day));
    }
    days_ = std::chrono::sys_days{ymd};
}

Date Date::parse(std::string_view iso) {
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
        throw InvalidArgument("malformed date '" + std::string(iso) + "', expected YYYY-MM-DD");
    }
    const int y = parse_int(iso.substr(0, 4), iso);
    const int m = parse_int(iso.substr(5, 2), iso);
    const int d = parse_int(iso.substr(8, 2), iso);
    if (m < 1 || d < 1) {
        throw InvalidArgument("malformed date '" + std::string(iso) + "'");
    }
    return Date(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

std::string Date::iso() const {
    const std::chrono::year_month_day ymd{days_};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

LogPriceSeries::LogPriceSeries(std::string asset_id, std::vector<Date> timestamps,
                               std::vector<double> log_prices)
    : asset_id_(std::move(asset_id)), timestamps_(std::move(timestamps)), log_prices_(std::move(log_prices)) {
    if (timestamps_.size() != log_prices_.size()) {
        throw InvalidArgument("series '" + asset_id_ + "': timestamps and log prices differ in length");
    }
    if (log_prices_.size() < 2) {
        throw InsufficientData("series '" + asset_id_ + "' needs at least 2 points");
    }
    for (std::size_t t = 0; t < log_prices_.size(); ++t) {
        if (!std::isfinite(log_prices_[t])) {
            throw InvalidArgument("series '" + asset_id_ + "': non-finite log price at index " +
                                  std::to_string(t));
        }
        if (t > 0 && !(timestamps_[t - 1] < timestamps_[t])) {
            throw InvalidArgument("series '" + asset_id_ + "': timestamps not strictly increasing at " +
                                  timestamps_[t].iso());
        }
    }
}

LogPriceSeries LogPriceSeries::daily(std::string asset_id, Date start, std::vector<double> log_prices) {
    std::vector<Date> dates;
    dates.reserve(log_prices.size());
    for (std::size_t t = 0; t < log_prices.size(); ++t) {
        dates.push_back(start.plus_days(static_cast<int>(t)));
    }
    return LogPriceSeries(std::move(asset_id), std::move(dates), std::move(log_prices));
}

LogPriceSeries LogPriceSeries::clip(Date first, Date last) const {
    std::vector<Date> dates;
    std::vector<double> values;
    for (std::size_t t = 0; t < size(); ++t) {
        if (first <= timestamps_[t] && timestamps_[t] <= last) {
            dates.push_back(timestamps_[t]);
            values.push_back(log_prices_[t]);
        }
    }
    return LogPriceSeries(asset_id_, std::move(dates), std::move(values));
}

ProbabilitySeries::ProbabilitySeries(std::string asset_id, std::vector<Date> timestamps,
                                     std::vector<double> values)
    : asset_id_(std::move(asset_id)), timestamps_(std::move(timestamps)), values_(std::move(values)) {
    if (timestamps_.size() != values_.size()) {
        throw InvalidArgument("probability series '" + asset_id_ + "': length mismatch");
    }
    for (std::size_t t = 0; t < values_.size(); ++t) {
        if (!(values_[t] >= 0.0 && values_[t] <= 1.0)) {
            throw InvalidArgument("probability series '" + asset_id_ + "': value outside [0,1] at index " +
                                  std::to_string(t));
        }
    }
}

}  // namespace bubblenet
