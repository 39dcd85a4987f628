#pragma once

#include "crn/clustering.hpp"
#include "crn/messages.hpp"
#include "crn/sim.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <variant>
#include <vector>

namespace crn
{
    struct NeighborEntry
    {
        // Control channels shared with the neighbor head. Head pairs in range are assumed to
        // share a control channel, so an empty set does not disqualify the link.
        ChannelSet common;
        SimTime last_heard = 0.0;
    };
    using NeighborTable = std::map<NodeId, NeighborEntry>;

    struct RouteEntry
    {
        NodeId next_hop_head;
        // Heads after this one up to the destination head; front() == next_hop_head.
        std::vector<NodeId> full_head_path;
        SimTime learned_at = 0.0;
    };
    using RoutingTable = std::map<NodeId, RouteEntry>;

    using SeenCache = std::set<RequestKey>;

    struct Candidate
    {
        Rreq rreq;
        SimTime arrival = 0.0;
    };

    struct Collector
    {
        RequestKey key;
        std::vector<Candidate> candidates;
        SimTime tr_expiry = 0.0;
        bool closed = false;
    };

    struct DropCounters
    {
        std::uint32_t duplicate = 0;
        std::uint32_t hmax = 0;
        std::uint32_t loop = 0;
    };

    struct HeadState
    {
        NodeId head;
        NeighborTable neighbors;
        RoutingTable routes;
        SeenCache seen;
        std::map<RequestKey, Collector> collectors;
        DropCounters drops;
    };

    /// Refreshes the neighbor table from the heads currently in radio range and evicts
    /// entries not heard for 3 * hello_period.
    void hello_tick(HeadState &state, const World &world, std::span<const NodeId> heads, SimTime now,
                    double hello_period);

    namespace rreq_action
    {
        struct ReplyAsDestinationSide
        {
            bool opened = false;
        };
        struct ForwardBroadcast
        {
            std::vector<NodeId> targets;
        };
        struct ForwardDirected
        {
            NodeId next;
        };
        enum class DropReason
        {
            Duplicate,
            Hmax,
            Loop
        };
        struct Drop
        {
            DropReason reason;
        };
    }
    using RreqAction = std::variant<rreq_action::ReplyAsDestinationSide, rreq_action::ForwardBroadcast,
                                    rreq_action::ForwardDirected, rreq_action::Drop>;

    /// Route-request handling at a cluster head. In order: duplicate discard (except further
    /// copies reaching an open collector at the destination head), loop check, append own id,
    /// destination-member check, hop cap, routing-table shortcut, broadcast to neighbor heads
    /// other than `from`. Mutates `state` (seen cache, collectors, drop counters) and `rreq`.
    RreqAction ch_process_rreq(HeadState &state, const Cluster &own_cluster, Rreq &rreq, NodeId from, SimTime now,
                               std::uint32_t hmax, SimTime tr);

    /// Fewest heads wins; then earliest arrival; then lexicographically smallest head path.
    /// Throws InvariantError when empty.
    const Candidate &collect_and_select(std::span<const Candidate> candidates);

    /// Highest-throughput member (lowest id on ties) sharing a channel with `prev_hop` and,
    /// when given, with `also_adjacent`. The head itself is eligible.
    std::optional<NodeId> select_intermediate_node(const World &world, std::span<const NodeId> members,
                                                   const Node &prev_hop, const Node *also_adjacent = nullptr,
                                                   std::span<const NodeId> exclude = {});

    /// An installed source route.
    struct ActiveRoute
    {
        RequestKey key;
        // Source head first.
        std::vector<NodeId> head_path;
        // relay_at[i] belongs to head_path[i]; endpoint heads hold none.
        std::vector<std::optional<NodeId>> relay_at;
        SimTime installed_at = 0.0;

        std::vector<NodeId> nodes() const;
    };

    namespace move_decision
    {
        struct NoOp
        {
        };
        struct Truncate
        {
            ActiveRoute route;
        };
        struct Rediscover
        {
        };
    }
    using SourceMoveDecision = std::variant<move_decision::NoOp, move_decision::Truncate, move_decision::Rediscover>;

    /// Source re-homed under `new_head`: no-op if it is still the source head, splice the
    /// route at `new_head` if it lies on the head path, otherwise rediscover.
    SourceMoveDecision handle_source_move(const ActiveRoute &route, NodeId new_head);

    /// Outcome of one discovery attempt as seen by its source.
    struct DiscoveryRecord
    {
        RequestKey key;
        SimTime started = 0.0;
        std::optional<SimTime> completed;
        bool success = false;
        bool failed = false;
        // Set when a RERR ended the discovery; a plain deadline miss leaves it empty.
        std::optional<RerrCause> failure;
        std::vector<NodeId> route;
        std::vector<NodeId> head_path;
    };

    /// Protocol-side audit entries consumed by the invariant checks.
    struct HeadAction
    {
        enum class Kind
        {
            ForwardBroadcast,
            ForwardDirected,
            DropDuplicate,
            DropHmax,
            DropLoop,
            Collect,
        };
        SimTime at = 0.0;
        NodeId head;
        RequestKey key;
        Kind kind = Kind::Collect;
        std::vector<NodeId> ch_path;
    };

    struct Selection
    {
        RequestKey key;
        NodeId head;
        std::vector<NodeId> winner_path;
        std::size_t candidates = 0;
    };

    struct InstalledRoute
    {
        SimTime at = 0.0;
        RequestKey key;
        std::vector<NodeId> route;
        // Channel sets of the route nodes at installation time, aligned with `route`.
        std::vector<ChannelSet> channels;
        bool repaired = false;
    };

    enum class DiscoveryStart
    {
        Started,
        CachedRoute,
        Refused,
    };

    class CrpProtocol final : public Protocol
    {
    public:
        CrpProtocol(const SimConfig &config, Clustering clustering);

        /// Initial HELLO round: fills every head's neighbor table at the current time.
        void bootstrap(Simulator &sim);

        DiscoveryStart initiate_discovery(Simulator &sim, NodeId src, NodeId dst);

        /// `reporter` lost its next hop `next_hop` on an active route.
        void notify_link_loss(Simulator &sim, NodeId reporter, NodeId next_hop);

        /// Head of `cluster` retires; false when there is no successor.
        bool resign(Simulator &sim, ClusterId cluster);

        void on_deliver(Simulator &sim, const ev::Deliver &d) override;
        void on_timer(Simulator &sim, const ev::TimerExpiry &t) override;
        void on_topology_change(Simulator &sim, NodeId node) override;
        void on_hello_tick(Simulator &sim) override;

        const Clustering &clustering() const { return m_clustering; }
        const HeadState &head_state(NodeId head) const { return m_heads.at(head); }
        bool is_head(NodeId n) const { return m_heads.contains(n); }
        const std::vector<DiscoveryRecord> &records() const { return m_records; }
        const DiscoveryRecord *record(const RequestKey &key) const;
        const std::vector<HeadAction> &actions() const { return m_actions; }
        const std::vector<Selection> &selections() const { return m_selections; }
        const std::vector<InstalledRoute> &installs() const { return m_installs; }
        std::optional<ActiveRoute> active_route(NodeId src, NodeId dst) const;
        std::uint32_t hmax() const { return m_hmax; }

    private:
        struct SourceState
        {
            std::uint32_t next_request_id = 0;
            std::map<NodeId, ActiveRoute> routes;
            std::set<NodeId> repairing;
        };

        struct CollectorTimer
        {
            NodeId head;
            RequestKey key;
        };
        struct DeadlineTimer
        {
            RequestKey key;
        };
        using TimerPurpose = std::variant<CollectorTimer, DeadlineTimer>;

        void handle_rreq(Simulator &sim, NodeId head, Rreq rreq, NodeId from);
        void handle_rrep(Simulator &sim, NodeId at, Rrep rrep);
        void handle_rerr(Simulator &sim, NodeId at, const Rerr &rerr);
        void handle_route_update(Simulator &sim, NodeId at, const RouteUpdate &upd);
        void send_toward_source(Simulator &sim, NodeId at, NodeId src, std::span<const NodeId> head_path,
                                const ControlMessage &msg);
        void fail_discovery(Simulator &sim, NodeId at, const Rrep &rrep);
        void install(Simulator &sim, const ActiveRoute &route, bool repaired);
        void refresh_tables(Simulator &sim);
        void rehome(Simulator &sim, NodeId node);
        std::uint64_t add_timer(TimerPurpose p);
        DiscoveryRecord *find_record(const RequestKey &key);

        Clustering m_clustering;
        std::uint32_t m_hmax;
        SimTime m_tr;
        SimTime m_deadline;
        double m_hello_period;
        std::uint32_t m_knn_k;
        std::uint64_t m_seed;

        std::map<NodeId, HeadState> m_heads;
        std::map<NodeId, SourceState> m_sources;
        std::vector<TimerPurpose> m_timers;
        std::vector<DiscoveryRecord> m_records;
        std::vector<HeadAction> m_actions;
        std::vector<Selection> m_selections;
        std::vector<InstalledRoute> m_installs;
    };
}
