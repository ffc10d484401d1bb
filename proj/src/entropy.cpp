#include "bubblenet/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include "bubblenet/errors.hpp"

namespace bubblenet::te {

namespace {

void check_bin_count(int bin_count) {
    if (bin_count < 2) throw InvalidArgument("bin count must be at least 2");
}

std::string describe_window(const ProbabilitySeries& s) {
    if (s.empty()) return "";
    return s.timestamps().front().iso() + ".." + s.timestamps().back().iso();
}

void check_aligned(const ProbabilitySeries& a, const ProbabilitySeries& b) {
    const auto ta = a.timestamps();
    const auto tb = b.timestamps();
    if (!std::equal(ta.begin(), ta.end(), tb.begin(), tb.end())) {
        throw InvalidArgument("probability series '" + a.asset_id() + "' and '" + b.asset_id() +
                              "' are not aligned on the same dates");
    }
}

}  // namespace

BinnedSeries discretize(std::span<const double> values, int bin_count) {
    check_bin_count(bin_count);
    BinnedSeries out;
    out.bin_count = bin_count;
    out.bins.reserve(values.size());
    for (std::size_t t = 0; t < values.size(); ++t) {
        const double v = values[t];
        if (!(v >= 0.0 && v <= 1.0)) {
            throw InvalidArgument("value " + std::to_string(v) + " at index " + std::to_string(t) +
                                  " is outside [0,1]");
        }
        const int bin = static_cast<int>(std::floor(v * bin_count));
        out.bins.push_back(std::min(bin, bin_count - 1));
    }
    return out;
}

BinnedSeries discretize(const ProbabilitySeries& probs, int bin_count) {
    return discretize(probs.values(), bin_count);
}

JointHistogram JointHistogram::build(const BinnedSeries& u, const BinnedSeries& v, std::span<const std::uint8_t> include) {
    if (u.size() != v.size()) throw InvalidArgument("target and source series differ in length");
    if (u.size() < 3) throw InvalidArgument("transfer entropy needs series of length at least 3");
    if (u.bin_count != v.bin_count) throw InvalidArgument("target and source use different bin counts");
    if (!include.empty() && include.size() != u.size()) {
        throw InvalidArgument("inclusion mask does not match the series length");
    }
    check_bin_count(u.bin_count);

    const int b = u.bin_count;
    const auto ub = static_cast<std::size_t>(b);
    JointHistogram h;
    h.bins_ = b;
    h.triples_.assign(ub * ub * ub, 0);
    h.now_past_.assign(ub * ub, 0);
    h.past_source_.assign(ub * ub, 0);
    h.past_.assign(ub, 0);

    for (std::size_t t = 1; t < u.size(); ++t) {
        if (!include.empty() && !include[t]) continue;
        const int now = u.bins[t];
        const int past = u.bins[t - 1];
        const int source = v.bins[t - 1];
        for (int x : {now, past, source}) {
            if (x < 0 || x >= b) throw InvalidArgument("bin index outside [0, B-1]");
        }
        ++h.triples_[(static_cast<std::size_t>(now) * ub + past) * ub + source];
        ++h.now_past_[static_cast<std::size_t>(now) * ub + past];
        ++h.past_source_[static_cast<std::size_t>(past) * ub + source];
        ++h.past_[past];
        ++h.samples_;
    }
    return h;
}

std::size_t JointHistogram::triple_count(int now, int past, int source) const {
    const auto b = static_cast<std::size_t>(bins_);
    return triples_[(static_cast<std::size_t>(now) * b + past) * b + source];
}

std::size_t JointHistogram::now_past_count(int now, int past) const {
    return now_past_[static_cast<std::size_t>(now) * bins_ + past];
}

std::size_t JointHistogram::past_source_count(int past, int source) const {
    return past_source_[static_cast<std::size_t>(past) * bins_ + source];
}

std::size_t JointHistogram::past_count(int past) const { return past_[past]; }

double JointHistogram::triple(int now, int past, int source) const {
    return static_cast<double>(triple_count(now, past, source)) / static_cast<double>(samples_);
}

double JointHistogram::now_past(int now, int past) const {
    return static_cast<double>(now_past_count(now, past)) / static_cast<double>(samples_);
}

double JointHistogram::past_source(int past, int source) const {
    return static_cast<double>(past_source_count(past, source)) / static_cast<double>(samples_);
}

double JointHistogram::past(int past) const {
    return static_cast<double>(past_count(past)) / static_cast<double>(samples_);
}

TransferEntropy transfer_entropy_detail(const JointHistogram& h, double base) {
    if (!(base > 0.0) || base == 1.0) throw InvalidArgument("log base must be positive and not 1");
    if (h.sample_size() == 0) return {0.0, 0.0};
    const double n = static_cast<double>(h.sample_size());
    const double log_base = std::log(base);
    const int b = h.bin_count();
    double total = 0.0;
    for (int now = 0; now < b; ++now) {
        for (int past = 0; past < b; ++past) {
            if (h.now_past_count(now, past) == 0) continue;
            for (int source = 0; source < b; ++source) {
                const auto c = h.triple_count(now, past, source);
                if (c == 0) continue;
                // Frequencies share the denominator, so the ratio is taken on counts.
                const double ratio = (static_cast<double>(c) * static_cast<double>(h.past_count(past))) /
                                     (static_cast<double>(h.now_past_count(now, past)) *
                                      static_cast<double>(h.past_source_count(past, source)));
                total += static_cast<double>(c) / n * std::log(ratio);
            }
        }
    }
    const double raw = total / log_base;
    return {std::max(raw, 0.0), raw};
}

double transfer_entropy(const BinnedSeries& u, const BinnedSeries& v, double base) {
    const auto result = transfer_entropy_detail(JointHistogram::build(u, v), base);
    if (result.raw < -1e-9) {
        std::cerr << "warning: transfer entropy " << result.raw << " below zero before clamping\n";
    }
    return result.value;
}

double sii(const ProbabilitySeries& x_probs, const ProbabilitySeries& y_probs, const SiiOptions& options) {
    check_aligned(x_probs, y_probs);
    const auto target = discretize(y_probs, options.bin_count);
    const auto source = discretize(x_probs, options.bin_count);
    if (!options.bubble_day_threshold) return transfer_entropy(target, source, options.base);

    const double cut = *options.bubble_day_threshold;
    const auto x = x_probs.values();
    const auto y = y_probs.values();
    std::vector<std::uint8_t> keep(x.size(), 0);
    for (std::size_t t = 1; t < x.size(); ++t) {
        keep[t] = x[t - 1] >= cut && x[t] >= cut && y[t - 1] >= cut && y[t] >= cut;
    }
    const auto h = JointHistogram::build(target, source, keep);
    const auto result = transfer_entropy_detail(h, options.base);
    if (result.raw < -1e-9) {
        std::cerr << "warning: transfer entropy " << result.raw << " below zero before clamping\n";
    }
    return result.value;
}

SIIMatrix::SIIMatrix(std::vector<std::string> ids, std::vector<double> values, std::string window)
    : ids_(std::move(ids)), values_(std::move(values)), window_(std::move(window)) {
    if (values_.size() != ids_.size() * ids_.size()) {
        throw InvalidArgument("SII matrix values do not form a square array over the node ids");
    }
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        for (std::size_t j = i + 1; j < ids_.size(); ++j) {
            if (ids_[i] == ids_[j]) throw InvalidArgument("duplicate node id '" + ids_[i] + "'");
        }
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw InvalidArgument("SII matrix entries must be finite");
    }
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (values_[i * ids_.size() + i] != 0.0) throw InvalidArgument("SII matrix diagonal must be zero");
    }
}

std::size_t SIIMatrix::index(const std::string& id) const {
    const auto it = std::find(ids_.begin(), ids_.end(), id);
    if (it == ids_.end()) throw LookupError("unknown node '" + id + "'");
    return static_cast<std::size_t>(it - ids_.begin());
}

double SIIMatrix::operator()(const std::string& from, const std::string& to) const {
    return at(index(from), index(to));
}

double nsii(const std::string& x, const std::string& y, const SIIMatrix& m) {
    const auto i = m.index(x);
    const auto j = m.index(y);
    return m.at(i, j) - m.at(j, i);
}

SIIMatrix sii_matrix(std::span<const ProbabilitySeries> assets, const SiiOptions& options) {
    if (assets.size() < 2) throw InvalidArgument("SII matrix needs at least 2 assets");
    for (std::size_t k = 1; k < assets.size(); ++k) check_aligned(assets[0], assets[k]);

    const std::size_t n = assets.size();
    std::vector<std::string> ids;
    for (const auto& a : assets) ids.push_back(a.asset_id());
    std::vector<double> values(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) values[i * n + j] = sii(assets[i], assets[j], options);
        }
    }
    return SIIMatrix(std::move(ids), std::move(values), describe_window(assets[0]));
}

}  // namespace bubblenet::te
