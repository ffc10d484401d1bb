#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bubblenet/series.hpp"

namespace bubblenet::te {

struct BinnedSeries {
    std::vector<int> bins;
    int bin_count = 10;

    std::size_t size() const { return bins.size(); }
};

/// Equal-width bins on [0,1]: bin k = floor(v * B), with 1.0 in bin B-1.
BinnedSeries discretize(std::span<const double> values, int bin_count = 10);
BinnedSeries discretize(const ProbabilitySeries& probs, int bin_count = 10);

// Counts over the one-lag triples (u_t, u_{t-1}, v_{t-1}).
class JointHistogram {
public:
    // Uses every t in 1..T-1, or only those with include[t] set when a mask is given.
    static JointHistogram build(const BinnedSeries& u, const BinnedSeries& v,
                                std::span<const std::uint8_t> include = {});

    int bin_count() const { return bins_; }
    std::size_t sample_size() const { return samples_; }

    std::size_t triple_count(int now, int past, int source) const;
    std::size_t now_past_count(int now, int past) const;
    std::size_t past_source_count(int past, int source) const;
    std::size_t past_count(int past) const;

    double triple(int now, int past, int source) const;
    double now_past(int now, int past) const;
    double past_source(int past, int source) const;
    double past(int past) const;

private:
    int bins_ = 0;
    std::size_t samples_ = 0;
    std::vector<std::size_t> triples_;
    std::vector<std::size_t> now_past_;
    std::vector<std::size_t> past_source_;
    std::vector<std::size_t> past_;
};

struct TransferEntropy {
    double value;  // clamped at 0
    double raw;    // before clamping
};

/// Transfer entropy from source v to target u with one lag each, in the given
/// log base. Cells with zero joint count are skipped.
TransferEntropy transfer_entropy_detail(const JointHistogram& h, double base = 10.0);

/// As above from binned series. Prints a warning to stderr when the raw value
/// is below -1e-9 before clamping.
double transfer_entropy(const BinnedSeries& u, const BinnedSeries& v, double base = 10.0);

struct SiiOptions {
    int bin_count = 10;
    double base = 10.0;
    // When set, only transitions where both assets have probability >= this
    // value at t-1 and at t enter the histogram.
    std::optional<double> bubble_day_threshold;
};

/// Speculative influence of x onto y: TE with y's binned probabilities as the
/// target and x's as the source.
double sii(const ProbabilitySeries& x_probs, const ProbabilitySeries& y_probs, const SiiOptions& options = {});

class SIIMatrix {
public:
    SIIMatrix(std::vector<std::string> ids, std::vector<double> values, std::string window);

    const std::vector<std::string>& ids() const { return ids_; }
    std::size_t size() const { return ids_.size(); }
    const std::string& window() const { return window_; }

    // Influence of node i onto node j.
    double at(std::size_t i, std::size_t j) const { return values_[i * ids_.size() + j]; }
    double operator()(const std::string& from, const std::string& to) const;

    // Throws LookupError for unknown ids.
    std::size_t index(const std::string& id) const;

private:
    std::vector<std::string> ids_;
    std::vector<double> values_;
    std::string window_;
};

// m[x -> y] - m[y -> x]
double nsii(const std::string& x, const std::string& y, const SIIMatrix& m);

/// Every ordered pair of assets. All series must share the same timestamps.
SIIMatrix sii_matrix(std::span<const ProbabilitySeries> assets, const SiiOptions& options = {});

}  // namespace bubblenet::te
