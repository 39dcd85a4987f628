#pragma once

#include "crn/messages.hpp"
#include "crn/sim.hpp"

#include <map>
#include <optional>
#include <set>
#include <vector>

namespace crn
{
    /// Radio neighbors of `n` that share at least one channel with it, by id.
    std::vector<NodeId> aodv_neighbors(const World &world, NodeId n);

    struct AodvRecord
    {
        RequestKey key;
        SimTime started = 0.0;
        std::optional<SimTime> completed;
        bool success = false;
        bool failed = false;
        std::vector<NodeId> route;
    };

    /// Flat on-demand discovery: network-wide RREQ flooding with per-node duplicate
    /// suppression; the destination answers the first copy along the reversed node path.
    class AodvProtocol final : public Protocol
    {
    public:
        explicit AodvProtocol(const SimConfig &config);

        /// Starts a discovery at the current time; returns the request key.
        RequestKey aodv_discover(Simulator &sim, NodeId src, NodeId dst);

        void on_deliver(Simulator &sim, const ev::Deliver &d) override;
        void on_timer(Simulator &sim, const ev::TimerExpiry &t) override;

        const std::vector<AodvRecord> &records() const { return m_records; }
        const AodvRecord *record(const RequestKey &key) const;
        /// Number of RREQ broadcasts each node made per request.
        const std::map<std::pair<NodeId, RequestKey>, std::uint32_t> &forwards() const { return m_forwards; }
        /// Winning node path per request, as seen by the destination.
        const std::map<RequestKey, std::vector<NodeId>> &winners() const { return m_winners; }

    private:
        void broadcast(Simulator &sim, NodeId at, const AodvRreq &rreq);
        AodvRecord *find_record(const RequestKey &key);

        std::uint32_t m_hmax;
        SimTime m_deadline;
        std::map<NodeId, std::uint32_t> m_next_request_id;
        std::set<std::pair<NodeId, RequestKey>> m_seen;
        std::map<std::pair<NodeId, RequestKey>, std::uint32_t> m_forwards;
        std::map<RequestKey, std::vector<NodeId>> m_winners;
        std::vector<RequestKey> m_timers;
        std::vector<AodvRecord> m_records;
    };
}
