#pragma once

#include "crn/aodv.hpp"
#include "crn/crp.hpp"
#include "crn/fixture.hpp"
#include "crn/metrics.hpp"
#include "crn/world.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#ifndef CRN_FIXTURE_DIR
#define CRN_FIXTURE_DIR "fixtures"
#endif

namespace crn::test
{
    inline std::string fixture_path(const std::string &name)
    {
        return std::string(CRN_FIXTURE_DIR) + "/" + name;
    }

    inline ChannelSet channels(std::initializer_list<std::uint32_t> ids)
    {
        ChannelSet s;
        for (auto c : ids)
            s.insert(ChannelId{c});
        return s;
    }

    inline Node su(std::uint32_t id, double x, double y, double range, ChannelSet ch, double energy = 0.5,
                   double throughput = 10.0)
    {
        Node n;
        n.id = NodeId{id};
        n.kind = NodeKind::Secondary;
        n.pos = {x, y};
        n.radio_range = range;
        n.channels = ch;
        n.capable = ch;
        n.energy = energy;
        n.throughput = throughput;
        return n;
    }

    inline Node pu(std::uint32_t id, double x, double y, double range, std::uint32_t channel, bool active)
    {
        Node n;
        n.id = NodeId{id};
        n.kind = NodeKind::Primary;
        n.pos = {x, y};
        n.radio_range = range;
        n.channels = channels({channel});
        n.active = active;
        return n;
    }

    /// Hop distance by plain BFS over an explicit adjacency predicate; nullopt if unreachable.
    template <class Adjacent>
    std::optional<std::size_t> bfs_hops(const std::vector<NodeId> &vertices, NodeId from, NodeId to, Adjacent adjacent)
    {
        std::map<NodeId, std::size_t> dist;
        std::deque<NodeId> queue{from};
        dist[from] = 0;
        while (!queue.empty())
        {
            const NodeId u = queue.front();
            queue.pop_front();
            if (u == to)
                return dist[u];
            for (NodeId v : vertices)
            {
                if (!dist.contains(v) && adjacent(u, v))
                {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        return std::nullopt;
    }

    inline bool pairwise_distinct(std::vector<NodeId> v)
    {
        std::sort(v.begin(), v.end());
        return std::adjacent_find(v.begin(), v.end()) == v.end();
    }

    /// Checks the protocol laws over one recorded CRP episode; returns violation messages.
    inline std::vector<std::string> crp_violations(const Episode &e)
    {
        std::vector<std::string> out;
        const CrpProtocol &crp = *e.crp;
        const std::uint32_t hmax = crp.hmax();

        std::map<std::pair<NodeId, RequestKey>, int> forwards;
        for (const auto &a : crp.actions())
        {
            if (a.kind == HeadAction::Kind::ForwardBroadcast || a.kind == HeadAction::Kind::ForwardDirected)
            {
                if (++forwards[{a.head, a.key}] > 1)
                    out.push_back("head " + std::to_string(a.head.value) + " forwarded a request twice");
                if (a.ch_path.size() > hmax)
                    out.push_back("forwarded request with " + std::to_string(a.ch_path.size()) + " hops");
            }
        }

        std::map<RequestKey, std::vector<NodeId>> winners;
        for (const auto &s : crp.selections())
            winners[s.key] = s.winner_path;

        for (const auto &rec : e.sim->trace())
        {
            const auto *d = std::get_if<ev::Deliver>(&rec.kind);
            if (!d)
                continue;
            if (const auto *rreq = std::get_if<Rreq>(&d->msg))
            {
                if (!pairwise_distinct(rreq->ch_path))
                    out.push_back("looping RREQ path delivered");
                if (rreq->ch_path.size() > hmax)
                    out.push_back("RREQ carried beyond hmax");
            }
            else if (const auto *rrep = std::get_if<Rrep>(&d->msg))
            {
                if (!pairwise_distinct(rrep->ch_path))
                    out.push_back("looping RREP path delivered");
                auto it = winners.find(rrep->key);
                std::vector<NodeId> fwd(rrep->ch_path.rbegin(), rrep->ch_path.rend());
                if (it == winners.end() || fwd != it->second)
                    out.push_back("RREP path is not the reversed winner");
                if (rrep->relay_nodes.size() > rrep->ch_path.size())
                    out.push_back("more relays than heads");
            }
        }

        for (const auto &inst : crp.installs())
        {
            if (inst.route.size() != inst.channels.size())
            {
                out.push_back("install audit misaligned");
                continue;
            }
            for (std::size_t i = 0; i + 1 < inst.route.size(); ++i)
            {
                if ((inst.channels[i] & inst.channels[i + 1]).empty())
                    out.push_back("installed route hop without a common channel");
            }
        }
        return out;
    }

    inline std::vector<std::string> aodv_violations(const Episode &e)
    {
        std::vector<std::string> out;
        for (const auto &[k, n] : e.aodv->forwards())
        {
            if (n > 1)
                out.push_back("AODV node forwarded a request twice");
        }
        for (const auto &rec : e.sim->trace())
        {
            const auto *d = std::get_if<ev::Deliver>(&rec.kind);
            if (!d)
                continue;
            if (const auto *rreq = std::get_if<AodvRreq>(&d->msg))
            {
                if (!pairwise_distinct(rreq->node_path))
                    out.push_back("looping AODV RREQ");
                if (rreq->node_path.size() > e.config.hmax)
                    out.push_back("AODV RREQ carried beyond hmax");
            }
            else if (const auto *rrep = std::get_if<AodvRrep>(&d->msg))
            {
                const auto &w = e.aodv->winners().at(rrep->key);
                if (std::vector<NodeId>(rrep->node_path.rbegin(), rrep->node_path.rend()) != w)
                    out.push_back("AODV RREP is not the reversed winner");
            }
        }
        return out;
    }

    /// Four-cluster fixture after a completed discovery plus one scripted disturbance.
    struct MaintenanceRun
    {
        Episode episode;
        NodeId src;
        NodeId dst;
        SimTime disturbed_at = 0.0;
        std::vector<NodeId> route_before;
        std::uint64_t rreq_before = 0;
        // Source-originated RREQ transmissions after the disturbance.
        std::size_t src_rreqs_after = 0;
        std::optional<ActiveRoute> route_after;
    };

    inline std::size_t rreqs_from(const Simulator &sim, NodeId from, SimTime after)
    {
        std::size_t n = 0;
        for (const auto &r : sim.trace())
        {
            const auto *d = std::get_if<ev::Deliver>(&r.kind);
            if (d && r.at > after && d->from == from && std::holds_alternative<Rreq>(d->msg))
                ++n;
        }
        return n;
    }

    inline MaintenanceRun finish(MaintenanceRun run, EventKind disturbance)
    {
        Simulator &sim = *run.episode.sim;
        run.route_before = run.episode.crp->active_route(run.src, run.dst).value().nodes();
        run.rreq_before = sim.counters().rreq;
        run.disturbed_at = sim.now() + 1.0;
        sim.schedule(run.disturbed_at, std::move(disturbance));
        sim.run(*run.episode.crp, run.disturbed_at + 200.0);
        run.src_rreqs_after = rreqs_from(sim, run.src, run.disturbed_at);
        run.route_after = run.episode.crp->active_route(run.src, run.dst);
        return run;
    }

    /// SU1 moves to `to` after its route to SU8 is installed.
    inline MaintenanceRun source_move(Position to)
    {
        Fixture fx = load_fixture(fixture_path("figure3.json"));
        MaintenanceRun run;
        run.src = fx.src;
        run.dst = fx.dst;
        run.episode = run_crp_episode(std::move(fx.world), std::move(fx.clustering), run.src, run.dst, true);
        return finish(std::move(run), ev::NodeMove{run.src, to});
    }

    /// A PU next to SU5 switches on and takes the channel SU5 shares with SU1. With
    /// `alternate`, SU3 can take over the relay role (lower throughput, so it was not picked first).
    inline MaintenanceRun relay_failure(bool alternate)
    {
        auto j = load_json_file(fixture_path("figure3.json"));
        World world = world_from_json(j);
        if (alternate)
        {
            Node &su3 = world.node(node_by_label(world, "SU3"));
            su3.channels = su3.capable = channels({1});
            su3.throughput = 30;
        }
        Node p = pu(static_cast<std::uint32_t>(world.nodes.size()), 250, 100, 50, 1, false);
        p.label = "PU1";
        world.nodes.push_back(p);
        Clustering clustering = clustering_from_json(j, world);
        MaintenanceRun run;
        run.src = node_by_label(world, "SU1");
        run.dst = node_by_label(world, "SU8");
        const NodeId pu_id = p.id;
        run.episode = run_crp_episode(std::move(world), std::move(clustering), run.src, run.dst, true);
        return finish(std::move(run), ev::PuActivityToggle{pu_id});
    }

    inline std::vector<std::string> labels(const World &w, const std::vector<NodeId> &ids)
    {
        std::vector<std::string> out;
        for (NodeId n : ids)
            out.push_back(w.node(n).name());
        return out;
    }
}
