#include "bubblenet/network.hpp"

#include <algorithm>

#include "bubblenet/analysis.hpp"
#include "bubblenet/errors.hpp"

namespace bubblenet::network {

std::string to_string(Group g) { return g == Group::industrial ? "industrial" : "financial"; }

Group parse_group(const std::string& text) {
    if (text == "industrial") return Group::industrial;
    if (text == "financial") return Group::financial;
    throw ConfigError("unknown node group '" + text + "', expected industrial or financial");
}

void NodeGroup::assign(const std::string& id, Group group, std::string subsector) {
    if (!groups_.emplace(id, group).second) throw ConfigError("node '" + id + "' is labeled twice");
    subsectors_[id] = std::move(subsector);
}

Group NodeGroup::of(const std::string& id) const {
    const auto it = groups_.find(id);
    if (it == groups_.end()) throw ConfigError("node '" + id + "' has no group label");
    return it->second;
}

const std::string& NodeGroup::subsector(const std::string& id) const {
    of(id);
    return subsectors_.at(id);
}

const std::vector<std::string>& indicator_names() {
    static const std::vector<std::string> names{"SI-to-All", "SI-from-All", "SI-to-Fin",
                                                "SI-from-Fin", "SI-to-IX", "SI-from-IX",
                                                "NSII-on-All", "NSII-on-Fin", "NSII-on-IX"};
    return names;
}

double indicator_value(const NodeIndicators& row, const std::string& name) {
    if (name == "SI-to-All") return row.si_to_all;
    if (name == "SI-from-All") return row.si_from_all;
    if (name == "SI-to-Fin") return row.si_to_fin;
    if (name == "SI-from-Fin") return row.si_from_fin;
    if (name == "SI-to-IX") return row.si_to_ix;
    if (name == "SI-from-IX") return row.si_from_ix;
    if (name == "NSII-on-All") return row.nsii_on_all;
    if (name == "NSII-on-Fin") return row.nsii_on_fin;
    if (name == "NSII-on-IX") return row.nsii_on_ix;
    throw LookupError("unknown indicator '" + name + "'");
}

const NodeIndicators& IndicatorTable::at(const std::string& id) const {
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw LookupError("no indicators for node '" + id + "'");
    return rows[static_cast<std::size_t>(it - ids.begin())];
}

IndicatorTable compute_indicators(const te::SIIMatrix& m, const NodeGroup& groups) {
    const std::size_t n = m.size();
    std::vector<Group> label(n);
    for (std::size_t i = 0; i < n; ++i) label[i] = groups.of(m.ids()[i]);

    IndicatorTable table;
    table.ids = m.ids();
    table.rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& r = table.rows[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double out = m.at(i, j);
            const double in = m.at(j, i);
            r.si_to_all += out;
            r.si_from_all += in;
            if (label[j] == Group::financial) {
                r.si_to_fin += out;
                r.si_from_fin += in;
            } else {
                r.si_to_ix += out;
                r.si_from_ix += in;
            }
        }
        r.nsii_on_all = r.si_to_all - r.si_from_all;
        r.nsii_on_fin = r.si_to_fin - r.si_from_fin;
        r.nsii_on_ix = r.si_to_ix - r.si_from_ix;
    }
    return table;
}

SINGraph build_sin(const te::SIIMatrix& m, const NodeGroup& groups, double threshold,
                   const std::map<std::string, double>* losses) {
    if (!(threshold >= 0.0)) throw InvalidArgument("NSII threshold must be non-negative");
    const auto table = compute_indicators(m, groups);
    const std::size_t n = m.size();

    SINGraph g;
    g.threshold = threshold;
    for (const auto& id : m.ids()) g.nodes.push_back({id, groups.of(id), 0.0, std::nullopt});

    for (const Group group : {Group::industrial, Group::financial}) {
        std::vector<std::size_t> members;
        std::vector<double> size_basis;
        std::vector<double> loss_basis;
        for (std::size_t i = 0; i < n; ++i) {
            if (g.nodes[i].group != group) continue;
            members.push_back(i);
            const auto& r = table.rows[i];
            size_basis.push_back(group == Group::industrial ? r.nsii_on_ix : r.nsii_on_fin - r.si_from_ix);
            if (losses) {
                const auto it = losses->find(g.nodes[i].id);
                if (it == losses->end()) throw LookupError("no loss value for node '" + g.nodes[i].id + "'");
                loss_basis.push_back(it->second);
            }
        }
        const auto size_rank = analysis::rank_transform(size_basis);
        const auto loss_rank = analysis::rank_transform(loss_basis);
        for (std::size_t k = 0; k < members.size(); ++k) {
            g.nodes[members[k]].size_value = size_rank[k];
            if (losses) g.nodes[members[k]].color_value = loss_rank[k];
        }
    }

    std::vector<Edge> candidates;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double net = m.at(i, j) - m.at(j, i);
            if (net > 0.0) candidates.push_back({m.ids()[i], m.ids()[j], 0.0, net});
            if (net < 0.0) candidates.push_back({m.ids()[j], m.ids()[i], 0.0, -net});
        }
    }
    if (candidates.empty()) return g;
    const auto [lo, hi] = std::minmax_element(candidates.begin(), candidates.end(),
                                              [](const Edge& a, const Edge& b) { return a.nsii < b.nsii; });
    const double min = lo->nsii;
    const double span = hi->nsii - min;
    for (auto& e : candidates) {
        if (e.nsii < threshold) continue;
        e.weight = span > 0.0 ? (e.nsii - min) / span : 1.0;
        g.edges.push_back(e);
    }
    return g;
}

}  // namespace bubblenet::network
