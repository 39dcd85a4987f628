#pragma once

#include "crn/messages.hpp"
#include "crn/rng.hpp"
#include "crn/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <queue>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace crn
{
    using SimTime = double;

    namespace ev
    {
        struct Deliver
        {
            NodeId from;
            NodeId to;
            ControlMessage msg;
        };
        struct TimerExpiry
        {
            NodeId owner;
            std::uint64_t tag = 0;
        };
        struct NodeMove
        {
            NodeId node;
            Position to;
        };
        struct PuActivityToggle
        {
            NodeId node;
        };
        struct HelloTick
        {
        };
    }

    using EventKind = std::variant<ev::Deliver, ev::TimerExpiry, ev::NodeMove, ev::PuActivityToggle, ev::HelloTick>;

    struct SimEvent
    {
        SimTime at = 0.0;
        std::uint64_t seq = 0;
        EventKind kind;
    };

    std::string_view event_name(const EventKind &k);

    /// Min-queue on (at, seq). seq is assigned in scheduling order, so equal-time
    /// events pop in the order they were scheduled.
    class EventQueue
    {
    public:
        /// Throws InvariantError if at < now().
        std::uint64_t schedule(SimTime at, EventKind kind);
        SimEvent pop();
        const SimEvent &top() const { return m_heap.top(); }
        bool empty() const { return m_heap.empty(); }
        std::size_t size() const { return m_heap.size(); }
        SimTime now() const { return m_now; }

    private:
        struct Later
        {
            bool operator()(const SimEvent &a, const SimEvent &b) const
            {
                if (a.at != b.at)
                    return a.at > b.at;
                return a.seq > b.seq;
            }
        };

        std::priority_queue<SimEvent, std::vector<SimEvent>, Later> m_heap;
        std::uint64_t m_next_seq = 0;
        SimTime m_now = 0.0;
    };

    class Simulator;

    /// Protocol callbacks invoked from the event loop.
    class Protocol
    {
    public:
        virtual ~Protocol() = default;
        virtual void on_deliver(Simulator &sim, const ev::Deliver &d) = 0;
        virtual void on_timer(Simulator &, const ev::TimerExpiry &) {}
        /// Called after the simulator applied a position or spectrum change.
        virtual void on_topology_change(Simulator &, NodeId) {}
        virtual void on_hello_tick(Simulator &) {}
    };

    struct TraceRecord
    {
        SimTime at = 0.0;
        std::uint64_t seq = 0;
        EventKind kind;
    };

    struct TransmissionCounters
    {
        std::uint64_t rreq = 0;
        std::uint64_t rrep = 0;
        std::uint64_t rerr = 0;
        std::uint64_t other = 0;
        // Unicast attempts to an out-of-range receiver.
        std::uint64_t dropped = 0;
        std::uint64_t delivered = 0;
    };

    /// Formats one trace line: time,seq,event,node,msg,from,to,src,dst,rid,hops
    std::string format_trace_line(const TraceRecord &r);
    inline constexpr std::string_view kTraceHeader = "time,seq,event,node,msg,from,to,src,dst,rid,hops";

    class Simulator
    {
    public:
        Simulator(World world, SimTime link_delay);

        World &world() { return m_world; }
        const World &world() const { return m_world; }
        SimTime now() const { return m_queue.now(); }
        SimTime link_delay() const { return m_link_delay; }

        std::uint64_t schedule(SimTime at, EventKind kind) { return m_queue.schedule(at, std::move(kind)); }
        std::uint64_t schedule_timer(SimTime at, NodeId owner, std::uint64_t tag)
        {
            return schedule(at, ev::TimerExpiry{owner, tag});
        }

        /// Schedules a Deliver at now + link_delay when the pair is in range; otherwise
        /// the send is dropped and counted. Does not touch transmission counters.
        bool deliver(NodeId from, NodeId to, const ControlMessage &msg);

        /// One radio transmission addressed to `to` (one or many receivers). Counts once.
        /// Returns how many receivers were in range.
        std::size_t transmit(NodeId from, std::span<const NodeId> to, const ControlMessage &msg);
        bool unicast(NodeId from, NodeId to, const ControlMessage &msg)
        {
            return transmit(from, std::span<const NodeId>(&to, 1), msg) == 1;
        }

        /// Processes events in (at, seq) order up to and including `until`.
        void run(Protocol &protocol, SimTime until);

        const TransmissionCounters &counters() const { return m_counters; }
        std::uint64_t processed() const { return m_processed; }

        void enable_trace(bool on) { m_trace_on = on; }
        const std::vector<TraceRecord> &trace() const { return m_trace; }
        void write_trace(std::ostream &out) const;

    private:
        World m_world;
        SimTime m_link_delay;
        EventQueue m_queue;
        TransmissionCounters m_counters;
        std::uint64_t m_processed = 0;
        bool m_trace_on = false;
        std::vector<TraceRecord> m_trace;
    };

    /// Per-epoch PU flips (each PU flips with probability pu_activity_rate) up to `until`.
    std::vector<std::pair<SimTime, EventKind>> plan_pu_activity(const World &world, SimTime until);

    /// Random waypoint legs for every SU, sampled every mobility_step, up to `until`.
    std::vector<std::pair<SimTime, EventKind>> plan_random_waypoint(const World &world, SimTime until);

    /// Triggered-hello round trip between a joining node and a responder at distance `d`:
    /// one link delay, a propagation share proportional to d / range, and U[0, 0.1] jitter.
    double triggered_hello_delay(double d, double range, SimTime link_delay, Rng &rng);
}
