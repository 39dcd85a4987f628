#pragma once

#include "crn/types.hpp"

#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

namespace crn
{
    /// (src, dst, request_id): identifies one discovery attempt network-wide.
    struct RequestKey
    {
        NodeId src;
        NodeId dst;
        std::uint32_t request_id = 0;

        friend constexpr auto operator<=>(const RequestKey &, const RequestKey &) = default;
    };

    struct Hello
    {
        std::optional<ClusterId> cluster;
        bool from_head = false;
    };

    struct TriggeredHello
    {
        std::optional<ClusterId> cluster;
    };

    struct Rreq
    {
        RequestKey key;
        // Cluster heads traversed so far, source head first.
        std::vector<NodeId> ch_path;

        std::size_t hops() const { return ch_path.size(); }
    };

    struct Rrep
    {
        RequestKey key;
        // Winning head path reversed: destination head first, source head last.
        std::vector<NodeId> ch_path;
        // Relays in the order they were appended, i.e. destination side first.
        std::vector<NodeId> relay_nodes;
    };

    enum class RerrCause
    {
        LinkLost,      // an on-route node lost its next hop
        SourceMoved,   // source re-homed to another cluster
        NoRelay,       // reply could not pick a relay; discovery failed
        Rediscover,    // head instructs the source to run a fresh discovery
        Unreachable,   // destination itself is gone
    };

    struct Rerr
    {
        NodeId reporter;
        // (upstream, downstream) of the broken hop; equal ids when not hop-specific.
        std::pair<NodeId, NodeId> broken_hop;
        RequestKey affected;
        RerrCause cause = RerrCause::LinkLost;
        // Head path of the route being repaired, source head first.
        std::vector<NodeId> head_path;
        // Node route src .. dst of the route being repaired, when one exists.
        std::vector<NodeId> route;
    };

    struct CheckForNewClusterHead
    {
        ClusterId cluster = 0;
        NodeId resigning;
    };

    /// A patched route pushed back to the source after local maintenance.
    struct RouteUpdate
    {
        RequestKey key;
        std::vector<NodeId> head_path;
        // Full node route src .. dst.
        std::vector<NodeId> route;
    };

    struct AodvRreq
    {
        RequestKey key;
        std::vector<NodeId> node_path;

        std::size_t hops() const { return node_path.empty() ? 0 : node_path.size() - 1; }
    };

    struct AodvRrep
    {
        RequestKey key;
        // Reversed winning node path: destination first, source last.
        std::vector<NodeId> node_path;
    };

    using ControlMessage = std::variant<Hello, TriggeredHello, Rreq, Rrep, Rerr, CheckForNewClusterHead, RouteUpdate,
                                        AodvRreq, AodvRrep>;

    std::string_view message_name(const ControlMessage &m);
    bool is_route_request(const ControlMessage &m);
    bool is_route_reply(const ControlMessage &m);
    std::optional<RequestKey> request_key_of(const ControlMessage &m);
    /// Path length carried by the message (head path for the cluster protocol, edge count for AODV).
    std::optional<std::size_t> hops_of(const ControlMessage &m);
}
