#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bubblenet/entropy.hpp"

namespace bubblenet::network {

enum class Group { industrial, financial };

std::string to_string(Group g);
// "industrial" or "financial"; throws ConfigError otherwise.
Group parse_group(const std::string& text);

class NodeGroup {
public:
    // Throws ConfigError when the node is already labeled.
    void assign(const std::string& id, Group group, std::string subsector = "");

    // Throws ConfigError for unlabeled nodes.
    Group of(const std::string& id) const;
    const std::string& subsector(const std::string& id) const;
    bool contains(const std::string& id) const { return groups_.contains(id); }
    std::size_t size() const { return groups_.size(); }

private:
    std::map<std::string, Group> groups_;
    std::map<std::string, std::string> subsectors_;
};

struct NodeIndicators {
    double si_to_all = 0.0;
    double si_from_all = 0.0;
    double si_to_fin = 0.0;
    double si_from_fin = 0.0;
    double si_to_ix = 0.0;
    double si_from_ix = 0.0;
    double nsii_on_all = 0.0;
    double nsii_on_fin = 0.0;
    double nsii_on_ix = 0.0;
};

// Column names in NodeIndicators order.
const std::vector<std::string>& indicator_names();
// Value of the named indicator; throws LookupError for unknown names.
double indicator_value(const NodeIndicators& row, const std::string& name);

struct IndicatorTable {
    std::vector<std::string> ids;
    std::vector<NodeIndicators> rows;

    const NodeIndicators& at(const std::string& id) const;
};

/// Gross in/out sums of SII over all other nodes, over financial nodes and over
/// industrial nodes, and the net indicators as their differences.
IndicatorTable compute_indicators(const te::SIIMatrix& m, const NodeGroup& groups);

struct Node {
    std::string id;
    Group group;
    // Rank used for display size.
    double size_value = 0.0;
    // Within-group rank of the percentage loss, when losses were supplied.
    std::optional<double> color_value;
};

struct Edge {
    std::string source;
    std::string target;
    // Min-max rescaled NSII in [0,1].
    double weight;
    double nsii;
};

struct SINGraph {
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    double threshold = 0.3;
};

/// Keeps the positive direction of every pair with NSII >= threshold.
/// Node size: rank of NSII-on-IX for industrial nodes, rank of
/// NSII-on-Fin minus SI-from-IX for financial nodes, ranked within the group.
SINGraph build_sin(const te::SIIMatrix& m, const NodeGroup& groups, double threshold = 0.3,
                   const std::map<std::string, double>* losses = nullptr);

}  // namespace bubblenet::network
