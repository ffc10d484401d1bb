#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bubblenet/entropy.hpp"
#include "bubblenet/network.hpp"
#include "bubblenet/series.hpp"

namespace bubblenet::io {

struct ColumnMap {
    std::string date = "date";
    std::string price = "price";
    // Optional column; ignored when absent from the file.
    std::string market_cap = "market_cap";
};

struct PriceTable {
    std::string asset_id;
    std::vector<Date> dates;
    std::vector<double> prices;
    std::optional<std::vector<double>> market_cap;

    LogPriceSeries log_series() const;
};

/// Reads date and price columns, sorts by date. Errors carry the 1-based file
/// line: unparseable rows, non-positive prices, duplicate dates. A missing
/// required column is reported by name.
PriceTable read_price_table(const std::filesystem::path& path, const std::string& asset_id,
                            const ColumnMap& columns = {});

LogPriceSeries load_price_csv(const std::filesystem::path& path, const std::string& asset_id,
                              const ColumnMap& columns = {});

// Shortest text that parses back to the same double; "nan", "inf", "-inf" otherwise.
std::string format_double(double v);
// Parses a double, rejecting trailing characters.
std::optional<double> parse_double(std::string_view text);

std::string trim(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);

// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view data);

// Identifies the configuration and analysis window an output came from.
struct Provenance {
    std::string config_hash;
    std::string window;
};

// "key = value" lines; '#' starts a comment; later keys override earlier ones.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::string_view text, const std::string& source = "config");
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.contains(key); }
    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    void erase(const std::string& key) { values_.erase(key); }

    const std::map<std::string, std::string>& values() const { return values_; }
    // Canonical "key=value\n" lines in key order; what the config hash covers.
    std::string canonical() const;

private:
    std::map<std::string, std::string> values_;
    std::string source_;
};

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

// Comment lines "# config_hash: ..." and "# window: ..." for text outputs.
std::string provenance_header(const Provenance& p);

// ---- tabular formats ------------------------------------------------------

/// date column followed by one column per series. All series must share dates.
std::string format_probability_table(const std::vector<ProbabilitySeries>& series, const Provenance& p);
std::vector<ProbabilitySeries> parse_probability_table(const std::string& text);

std::string format_sii_matrix(const te::SIIMatrix& m, const Provenance& p);
te::SIIMatrix parse_sii_matrix(const std::string& text);

std::string format_indicator_table(const network::IndicatorTable& t, const network::NodeGroup& groups,
                                   const Provenance& p);

// ---- graph export -----------------------------------------------------------

enum class GraphFormat { dot, graph_json };

// "dot" or "graph-json"; anything else is a UsageError.
GraphFormat parse_graph_format(const std::string& token);

inline constexpr const char* kGraphSchema = "sin-graph/1";

std::string format_graph(const network::SINGraph& g, GraphFormat format, const Provenance& p);
void export_graph(const network::SINGraph& g, GraphFormat format, const Provenance& p,
                  const std::filesystem::path& path);

struct ImportedGraph {
    network::SINGraph graph;
    Provenance provenance;
};

// Reads graph-JSON; rejects other schema versions.
ImportedGraph parse_graph_json(const std::string& text);

}  // namespace bubblenet::io
