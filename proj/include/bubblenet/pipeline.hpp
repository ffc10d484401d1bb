#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bubblenet/analysis.hpp"
#include "bubblenet/entropy.hpp"
#include "bubblenet/hmm.hpp"
#include "bubblenet/io.hpp"
#include "bubblenet/network.hpp"

namespace bubblenet::pipeline {

struct AssetSpec {
    std::string id;
    std::filesystem::path path;
    network::Group group = network::Group::industrial;
    std::string subsector;
};

struct PipelineConfig {
    std::vector<AssetSpec> assets;
    io::ColumnMap columns;
    std::optional<Date> window_start;
    std::optional<Date> window_end;
    std::optional<Date> loss_start;
    std::optional<Date> loss_end;
    // Trailing window of the geometric price average; 0 or 1 disables it.
    std::size_t average_window = 100;
    // Added to every log price before calibration.
    double log_price_offset = 0.0;
    hmm::EMConfig em;
    te::SiiOptions te;
    double threshold = 0.3;
    // Each model is a list of regressor expressions such as "NSII-on-Fin - SI-from-IX".
    std::vector<std::vector<std::string>> regress_industrial;
    std::vector<std::vector<std::string>> regress_financial;
    std::vector<std::string> correlate_industrial;
    std::vector<std::string> correlate_financial;
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 0;
    // FNV-1a of the canonical config without output.dir.
    std::string hash;

    static PipelineConfig from_kv(const io::KeyValueConfig& kv, const std::filesystem::path& base_dir);
    // Checks everything that can be checked without reading price data.
    void validate() const;
};

PipelineConfig load_config(const std::filesystem::path& path);

/// Evaluates "A", "A - B", "A + B - C", ... over indicator names. Operators
/// must be separated by spaces since names contain '-'; parentheses around
/// a name are ignored.
double evaluate_indicator_expression(const network::NodeIndicators& row, const std::string& expression);

/// Log prices shifted by `offset`, averaged over a trailing window using all
/// history up to `end`, then clipped to [start, end].
LogPriceSeries preprocess(const LogPriceSeries& raw, std::size_t average_window, double offset,
                          std::optional<Date> start, std::optional<Date> end);

struct AssetOutcome {
    std::string id;
    bool ok = false;
    std::string error;
    std::size_t iterations = 0;
    bool converged = false;
    double loglik = 0.0;
};

struct RunReport {
    std::vector<AssetOutcome> assets;
    std::vector<std::string> files;
    std::vector<std::string> notes;
};

/// Calibrates every asset, then builds the SII matrix, indicators, network and
/// (when a loss window is configured) regressions and correlations, writing
/// each to config.output_dir. Per-asset failures are recorded in the report.
/// Throws PipelineFailure when fewer than two assets survive.
RunReport run_pipeline(const PipelineConfig& config);

}  // namespace bubblenet::pipeline
