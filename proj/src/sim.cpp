#include "crn/sim.hpp"

#include "crn/world.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace crn
{
    std::string_view message_name(const ControlMessage &m)
    {
        struct Names
        {
            std::string_view operator()(const Hello &) const { return "HELLO"; }
            std::string_view operator()(const TriggeredHello &) const { return "THELLO"; }
            std::string_view operator()(const Rreq &) const { return "RREQ"; }
            std::string_view operator()(const Rrep &) const { return "RREP"; }
            std::string_view operator()(const Rerr &) const { return "RERR"; }
            std::string_view operator()(const CheckForNewClusterHead &) const { return "CHECK_HEAD"; }
            std::string_view operator()(const RouteUpdate &) const { return "ROUTE_UPDATE"; }
            std::string_view operator()(const AodvRreq &) const { return "AODV_RREQ"; }
            std::string_view operator()(const AodvRrep &) const { return "AODV_RREP"; }
        };
        return std::visit(Names{}, m);
    }

    bool is_route_request(const ControlMessage &m)
    {
        return std::holds_alternative<Rreq>(m) || std::holds_alternative<AodvRreq>(m);
    }

    bool is_route_reply(const ControlMessage &m)
    {
        return std::holds_alternative<Rrep>(m) || std::holds_alternative<AodvRrep>(m);
    }

    std::optional<RequestKey> request_key_of(const ControlMessage &m)
    {
        if (auto *p = std::get_if<Rreq>(&m))
            return p->key;
        if (auto *p = std::get_if<Rrep>(&m))
            return p->key;
        if (auto *p = std::get_if<Rerr>(&m))
            return p->affected;
        if (auto *p = std::get_if<RouteUpdate>(&m))
            return p->key;
        if (auto *p = std::get_if<AodvRreq>(&m))
            return p->key;
        if (auto *p = std::get_if<AodvRrep>(&m))
            return p->key;
        return std::nullopt;
    }

    std::optional<std::size_t> hops_of(const ControlMessage &m)
    {
        if (auto *p = std::get_if<Rreq>(&m))
            return p->hops();
        if (auto *p = std::get_if<Rrep>(&m))
            return p->ch_path.size();
        if (auto *p = std::get_if<AodvRreq>(&m))
            return p->hops();
        if (auto *p = std::get_if<AodvRrep>(&m))
            return p->node_path.empty() ? 0 : p->node_path.size() - 1;
        return std::nullopt;
    }

    std::string_view event_name(const EventKind &k)
    {
        struct Names
        {
            std::string_view operator()(const ev::Deliver &) const { return "deliver"; }
            std::string_view operator()(const ev::TimerExpiry &) const { return "timer"; }
            std::string_view operator()(const ev::NodeMove &) const { return "move"; }
            std::string_view operator()(const ev::PuActivityToggle &) const { return "pu_toggle"; }
            std::string_view operator()(const ev::HelloTick &) const { return "hello_tick"; }
        };
        return std::visit(Names{}, k);
    }

    std::uint64_t EventQueue::schedule(SimTime at, EventKind kind)
    {
        if (!(at >= m_now))
        {
            char buf[96];
            std::snprintf(buf, sizeof buf, "event scheduled in the past (at=%.6f, now=%.6f)", at, m_now);
            throw InvariantError(buf);
        }
        const std::uint64_t seq = m_next_seq++;
        m_heap.push(SimEvent{at, seq, std::move(kind)});
        return seq;
    }

    SimEvent EventQueue::pop()
    {
        SimEvent e = m_heap.top();
        m_heap.pop();
        m_now = e.at;
        return e;
    }

    Simulator::Simulator(World world, SimTime link_delay) : m_world(std::move(world)), m_link_delay(link_delay) {}

    bool Simulator::deliver(NodeId from, NodeId to, const ControlMessage &msg)
    {
        if (!in_range(m_world.node(from), m_world.node(to)))
        {
            ++m_counters.dropped;
            return false;
        }
        schedule(now() + m_link_delay, ev::Deliver{from, to, msg});
        ++m_counters.delivered;
        return true;
    }

    std::size_t Simulator::transmit(NodeId from, std::span<const NodeId> to, const ControlMessage &msg)
    {
        if (is_route_request(msg))
            ++m_counters.rreq;
        else if (is_route_reply(msg))
            ++m_counters.rrep;
        else if (std::holds_alternative<Rerr>(msg))
            ++m_counters.rerr;
        else
            ++m_counters.other;

        std::size_t reached = 0;
        for (NodeId r : to)
        {
            if (deliver(from, r, msg))
                ++reached;
        }
        return reached;
    }

    void Simulator::run(Protocol &protocol, SimTime until)
    {
        while (!m_queue.empty() && m_queue.top().at <= until)
        {
            SimEvent e = m_queue.pop();
            ++m_processed;
            if (m_trace_on)
                m_trace.push_back(TraceRecord{e.at, e.seq, e.kind});

            std::visit(
                [&](auto &k) {
                    using T = std::decay_t<decltype(k)>;
                    if constexpr (std::is_same_v<T, ev::Deliver>)
                    {
                        protocol.on_deliver(*this, k);
                    }
                    else if constexpr (std::is_same_v<T, ev::TimerExpiry>)
                    {
                        protocol.on_timer(*this, k);
                    }
                    else if constexpr (std::is_same_v<T, ev::NodeMove>)
                    {
                        m_world.node(k.node).pos = k.to;
                        refresh_spectrum(m_world);
                        protocol.on_topology_change(*this, k.node);
                    }
                    else if constexpr (std::is_same_v<T, ev::PuActivityToggle>)
                    {
                        Node &pu = m_world.node(k.node);
                        if (!pu.is_primary())
                            throw InvariantError("PU activity toggle on a secondary user");
                        pu.active = !pu.active;
                        refresh_spectrum(m_world);
                        protocol.on_topology_change(*this, k.node);
                    }
                    else
                    {
                        protocol.on_hello_tick(*this);
                    }
                },
                e.kind);
        }
    }

    namespace
    {
        std::string id_or_empty(std::optional<NodeId> id)
        {
            return id ? std::to_string(id->value) : std::string{};
        }
    }

    std::string format_trace_line(const TraceRecord &r)
    {
        char head[64];
        std::snprintf(head, sizeof head, "%.6f,%llu,", r.at, static_cast<unsigned long long>(r.seq));
        std::string line = head;
        line += event_name(r.kind);
        line += ',';

        std::optional<NodeId> node, from, to;
        std::string msg;
        std::optional<RequestKey> key;
        std::optional<std::size_t> hops;
        if (auto *d = std::get_if<ev::Deliver>(&r.kind))
        {
            node = d->to;
            from = d->from;
            to = d->to;
            msg = message_name(d->msg);
            key = request_key_of(d->msg);
            hops = hops_of(d->msg);
        }
        else if (auto *t = std::get_if<ev::TimerExpiry>(&r.kind))
        {
            node = t->owner;
            msg = "tag" + std::to_string(t->tag);
        }
        else if (auto *m = std::get_if<ev::NodeMove>(&r.kind))
        {
            node = m->node;
        }
        else if (auto *p = std::get_if<ev::PuActivityToggle>(&r.kind))
        {
            node = p->node;
        }

        line += id_or_empty(node) + ',' + msg + ',' + id_or_empty(from) + ',' + id_or_empty(to) + ',';
        if (key)
        {
            line += std::to_string(key->src.value) + ',' + std::to_string(key->dst.value) + ',' +
                    std::to_string(key->request_id) + ',';
        }
        else
        {
            line += ",,,";
        }
        if (hops)
            line += std::to_string(*hops);
        return line;
    }

    void Simulator::write_trace(std::ostream &out) const
    {
        out << kTraceHeader << '\n';
        for (const auto &r : m_trace)
            out << format_trace_line(r) << '\n';
    }

    std::vector<std::pair<SimTime, EventKind>> plan_pu_activity(const World &world, SimTime until)
    {
        std::vector<std::pair<SimTime, EventKind>> out;
        const auto &cfg = world.config;
        if (!(cfg.pu_epoch > 0.0))
            return out;
        Rng rng(cfg.seed, Stream::PuActivity);
        const auto pus = world.primary_ids();
        for (SimTime t = cfg.pu_epoch; t <= until; t += cfg.pu_epoch)
        {
            for (NodeId pu : pus)
            {
                if (rng.bernoulli(cfg.pu_activity_rate))
                    out.emplace_back(t, ev::PuActivityToggle{pu});
            }
        }
        return out;
    }

    std::vector<std::pair<SimTime, EventKind>> plan_random_waypoint(const World &world, SimTime until)
    {
        std::vector<std::pair<SimTime, EventKind>> out;
        const auto &cfg = world.config;
        if (!cfg.mobility)
            return out;
        Rng rng(cfg.seed, Stream::Mobility);
        for (NodeId id : world.secondary_ids())
        {
            Position at = world.node(id).pos;
            SimTime t = 0.0;
            while (t < until)
            {
                const Position target{rng.uniform(0.0, cfg.area_side), rng.uniform(0.0, cfg.area_side)};
                const double leg = distance(at, target);
                const SimTime travel = leg / cfg.mobility_speed;
                const int steps = std::max(1, static_cast<int>(std::ceil(travel / cfg.mobility_step)));
                for (int s = 1; s <= steps; ++s)
                {
                    const double f = static_cast<double>(s) / steps;
                    const SimTime when = t + travel * f;
                    if (when > until)
                        break;
                    out.emplace_back(when, ev::NodeMove{id, Position{at.x + (target.x - at.x) * f, at.y + (target.y - at.y) * f}});
                }
                at = target;
                t += travel + cfg.mobility_pause;
            }
        }
        return out;
    }

    double triggered_hello_delay(double d, double range, SimTime link_delay, Rng &rng)
    {
        const double share = range > 0.0 ? d / range : 0.0;
        return link_delay + link_delay * share + rng.uniform(0.0, 0.1);
    }
}
