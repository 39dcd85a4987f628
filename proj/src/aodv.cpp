#include "crn/aodv.hpp"

#include "crn/world.hpp"

#include <algorithm>

namespace crn
{
    std::vector<NodeId> aodv_neighbors(const World &world, NodeId n)
    {
        const Node &self = world.node(n);
        std::vector<NodeId> out;
        for (const auto &other : world.nodes)
        {
            if (other.id == n || !other.is_secondary())
                continue;
            if (in_range(self, other) && !common_channels(self, other).empty())
                out.push_back(other.id);
        }
        return out;
    }

    AodvProtocol::AodvProtocol(const SimConfig &config) : m_hmax(config.hmax), m_deadline(config.discovery_deadline())
    {
    }

    AodvRecord *AodvProtocol::find_record(const RequestKey &key)
    {
        for (auto &r : m_records)
        {
            if (r.key == key)
                return &r;
        }
        return nullptr;
    }

    const AodvRecord *AodvProtocol::record(const RequestKey &key) const
    {
        for (const auto &r : m_records)
        {
            if (r.key == key)
                return &r;
        }
        return nullptr;
    }

    void AodvProtocol::broadcast(Simulator &sim, NodeId at, const AodvRreq &rreq)
    {
        ++m_forwards[{at, rreq.key}];
        // A blind radio broadcast: it always goes out, even if only the upstream node hears it.
        const auto neighbors = aodv_neighbors(sim.world(), at);
        sim.transmit(at, neighbors, rreq);
    }

    RequestKey AodvProtocol::aodv_discover(Simulator &sim, NodeId src, NodeId dst)
    {
        if (src == dst)
            throw InvariantError("discovery with identical source and destination");
        const RequestKey key{src, dst, m_next_request_id[src]++};
        AodvRecord rec;
        rec.key = key;
        rec.started = sim.now();
        m_records.push_back(std::move(rec));
        m_timers.push_back(key);
        sim.schedule_timer(sim.now() + m_deadline, src, m_timers.size() - 1);

        m_seen.insert({src, key});
        broadcast(sim, src, AodvRreq{key, {src}});
        return key;
    }

    void AodvProtocol::on_deliver(Simulator &sim, const ev::Deliver &d)
    {
        if (const auto *rreq = std::get_if<AodvRreq>(&d.msg))
        {
            if (!m_seen.insert({d.to, rreq->key}).second)
                return;
            if (std::find(rreq->node_path.begin(), rreq->node_path.end(), d.to) != rreq->node_path.end())
                return;
            AodvRreq next = *rreq;
            next.node_path.push_back(d.to);
            if (d.to == next.key.dst)
            {
                m_winners[next.key] = next.node_path;
                AodvRrep rep{next.key, next.node_path};
                std::reverse(rep.node_path.begin(), rep.node_path.end());
                sim.unicast(d.to, rep.node_path[1], rep);
                return;
            }
            if (next.node_path.size() > m_hmax)
                return;
            broadcast(sim, d.to, next);
            return;
        }

        if (const auto *rrep = std::get_if<AodvRrep>(&d.msg))
        {
            const auto &path = rrep->node_path;
            const auto pos = std::find(path.begin(), path.end(), d.to);
            if (pos == path.end())
                return;
            if (d.to == rrep->key.src)
            {
                AodvRecord *rec = find_record(rrep->key);
                if (rec && !rec->completed && !rec->failed)
                {
                    rec->completed = sim.now();
                    rec->success = true;
                    rec->route.assign(path.rbegin(), path.rend());
                }
                return;
            }
            sim.unicast(d.to, *(pos + 1), *rrep);
        }
    }

    void AodvProtocol::on_timer(Simulator &, const ev::TimerExpiry &t)
    {
        if (AodvRecord *rec = find_record(m_timers.at(t.tag)); rec && !rec->completed)
            rec->failed = true;
    }
}
