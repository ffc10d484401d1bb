#pragma once

#include <chrono>
#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bubblenet {

// Calendar date with ISO-8601 (YYYY-MM-DD) text form.
class Date {
public:
    Date() = default;
    explicit Date(std::chrono::sys_days days) : days_(days) {}
    Date(int year, unsigned month, unsigned day);

    // Throws InvalidArgument on malformed text or impossible dates.
    static Date parse(std::string_view iso);

    std::string iso() const;
    std::chrono::sys_days days() const { return days_; }
    Date plus_days(int n) const { return Date(days_ + std::chrono::days(n)); }

    auto operator<=>(const Date&) const = default;

private:
    std::chrono::sys_days days_{};
};

// Log prices y_t = ln p_t of one asset on strictly increasing dates.
class LogPriceSeries {
public:
    LogPriceSeries(std::string asset_id, std::vector<Date> timestamps, std::vector<double> log_prices);

    // Consecutive calendar days starting at `start`; convenient for synthetic data.
    static LogPriceSeries daily(std::string asset_id, Date start, std::vector<double> log_prices);

    const std::string& asset_id() const { return asset_id_; }
    std::span<const Date> timestamps() const { return timestamps_; }
    std::span<const double> log_prices() const { return log_prices_; }
    std::size_t size() const { return log_prices_.size(); }
    double operator[](std::size_t t) const { return log_prices_[t]; }

    // Sub-series of points whose date lies in [first, last].
    LogPriceSeries clip(Date first, Date last) const;

private:
    std::string asset_id_;
    std::vector<Date> timestamps_;
    std::vector<double> log_prices_;
};

// Per-time bubble-state probabilities aligned with the source price series.
class ProbabilitySeries {
public:
    ProbabilitySeries(std::string asset_id, std::vector<Date> timestamps, std::vector<double> values);

    const std::string& asset_id() const { return asset_id_; }
    std::span<const Date> timestamps() const { return timestamps_; }
    std::span<const double> values() const { return values_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }
    double operator[](std::size_t t) const { return values_[t]; }

private:
    std::string asset_id_;
    std::vector<Date> timestamps_;
    std::vector<double> values_;
};

}  // namespace bubblenet
