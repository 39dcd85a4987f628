#pragma once

#include "crn/clustering.hpp"
#include "crn/metrics.hpp"

#include <string>

namespace crn
{
    /// Hand-built topology with a fixed clustering and one discovery to run.
    struct Fixture
    {
        World world;
        Clustering clustering;
        NodeId src;
        NodeId dst;
    };

    /// Reads a world document that also carries "clusters", "source" and "destination".
    /// Endpoints may be given as node ids or labels.
    Fixture load_fixture(const std::string &path);

    /// Node id for a label such as "SU5"; throws ConfigError when absent.
    NodeId node_by_label(const World &world, const std::string &label);

    /// "{SU1, SU5, SU8}"
    std::string format_route(const World &world, const std::vector<NodeId> &route);

    /// Heads as 1-based cluster numbers, e.g. "1->2->3".
    std::string format_head_path(const World &world, const std::vector<NodeId> &heads);
}
