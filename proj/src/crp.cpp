#include "crn/crp.hpp"

#include "crn/world.hpp"

#include <algorithm>

namespace crn
{
    namespace
    {
        bool contains(std::span<const NodeId> v, NodeId n)
        {
            return std::find(v.begin(), v.end(), n) != v.end();
        }

        std::vector<NodeId> reversed(std::vector<NodeId> v)
        {
            std::reverse(v.begin(), v.end());
            return v;
        }

        /// Rebuilds relay ownership from a head path and its node route (src, relays.., dst).
        ActiveRoute route_from(const RequestKey &key, std::vector<NodeId> head_path, std::span<const NodeId> nodes)
        {
            ActiveRoute r;
            r.key = key;
            const std::size_t n = head_path.size();
            r.relay_at.assign(n, std::nullopt);
            if (n >= 3 && nodes.size() == n)
            {
                for (std::size_t i = 1; i + 1 < n; ++i)
                    r.relay_at[i] = nodes[i];
            }
            r.head_path = std::move(head_path);
            return r;
        }
    }

    void hello_tick(HeadState &state, const World &world, std::span<const NodeId> heads, SimTime now,
                    double hello_period)
    {
        const Node &self = world.node(state.head);
        for (NodeId h : heads)
        {
            if (h == state.head)
                continue;
            const Node &other = world.node(h);
            if (in_range(self, other))
                state.neighbors[h] = NeighborEntry{common_channels(self, other), now};
        }
        const double stale_after = 3.0 * hello_period;
        for (auto it = state.neighbors.begin(); it != state.neighbors.end();)
        {
            const bool still_head = contains(heads, it->first);
            if (!still_head || now - it->second.last_heard >= stale_after - 1e-9)
                it = state.neighbors.erase(it);
            else
                ++it;
        }
    }

    RreqAction ch_process_rreq(HeadState &state, const Cluster &own_cluster, Rreq &rreq, NodeId from, SimTime now,
                               std::uint32_t hmax, SimTime tr)
    {
        using namespace rreq_action;
        const NodeId self = state.head;

        if (state.seen.contains(rreq.key))
        {
            auto it = state.collectors.find(rreq.key);
            if (it != state.collectors.end() && !it->second.closed && !contains(rreq.ch_path, self))
            {
                rreq.ch_path.push_back(self);
                it->second.candidates.push_back(Candidate{rreq, now});
                return ReplyAsDestinationSide{false};
            }
            ++state.drops.duplicate;
            return Drop{DropReason::Duplicate};
        }
        state.seen.insert(rreq.key);

        if (contains(rreq.ch_path, self))
        {
            ++state.drops.loop;
            return Drop{DropReason::Loop};
        }
        rreq.ch_path.push_back(self);

        if (own_cluster.contains(rreq.key.dst))
        {
            Collector c;
            c.key = rreq.key;
            c.candidates.push_back(Candidate{rreq, now});
            c.tr_expiry = now + tr;
            state.collectors[rreq.key] = std::move(c);
            return ReplyAsDestinationSide{true};
        }

        if (rreq.hops() > hmax)
        {
            ++state.drops.hmax;
            return Drop{DropReason::Hmax};
        }

        if (auto route = state.routes.find(rreq.key.dst); route != state.routes.end())
            return ForwardDirected{route->second.next_hop_head};

        ForwardBroadcast b;
        for (const auto &[head, entry] : state.neighbors)
        {
            if (head != from)
                b.targets.push_back(head);
        }
        return b;
    }

    const Candidate &collect_and_select(std::span<const Candidate> candidates)
    {
        if (candidates.empty())
            throw InvariantError("route selection with no candidates");
        return *std::min_element(candidates.begin(), candidates.end(), [](const Candidate &a, const Candidate &b) {
            if (a.rreq.ch_path.size() != b.rreq.ch_path.size())
                return a.rreq.ch_path.size() < b.rreq.ch_path.size();
            if (a.arrival != b.arrival)
                return a.arrival < b.arrival;
            return a.rreq.ch_path < b.rreq.ch_path;
        });
    }

    std::optional<NodeId> select_intermediate_node(const World &world, std::span<const NodeId> members,
                                                   const Node &prev_hop, const Node *also_adjacent,
                                                   std::span<const NodeId> exclude)
    {
        std::optional<NodeId> best;
        for (NodeId m : members)
        {
            if (m == prev_hop.id || (also_adjacent && m == also_adjacent->id) || contains(exclude, m))
                continue;
            const Node &cand = world.node(m);
            if (!cand.is_secondary() || common_channels(cand, prev_hop).empty())
                continue;
            if (also_adjacent && common_channels(cand, *also_adjacent).empty())
                continue;
            if (!best || cand.throughput > world.node(*best).throughput ||
                (cand.throughput == world.node(*best).throughput && m < *best))
                best = m;
        }
        return best;
    }

    std::vector<NodeId> ActiveRoute::nodes() const
    {
        std::vector<NodeId> out{key.src};
        for (const auto &r : relay_at)
        {
            if (r)
                out.push_back(*r);
        }
        out.push_back(key.dst);
        return out;
    }

    SourceMoveDecision handle_source_move(const ActiveRoute &route, NodeId new_head)
    {
        if (route.head_path.empty())
            return move_decision::Rediscover{};
        if (route.head_path.front() == new_head)
            return move_decision::NoOp{};
        const auto it = std::find(route.head_path.begin(), route.head_path.end(), new_head);
        if (it == route.head_path.end())
            return move_decision::Rediscover{};
        const auto from = static_cast<std::size_t>(it - route.head_path.begin());
        ActiveRoute cut;
        cut.key = route.key;
        cut.head_path.assign(route.head_path.begin() + static_cast<std::ptrdiff_t>(from), route.head_path.end());
        cut.relay_at.assign(route.relay_at.begin() + static_cast<std::ptrdiff_t>(from), route.relay_at.end());
        // The new source head is an endpoint and carries no relay.
        cut.relay_at.front().reset();
        return move_decision::Truncate{std::move(cut)};
    }

    CrpProtocol::CrpProtocol(const SimConfig &config, Clustering clustering)
        : m_clustering(std::move(clustering)), m_hmax(config.hmax), m_tr(config.effective_tr()),
          m_deadline(config.discovery_deadline()), m_hello_period(config.hello_period), m_knn_k(config.knn_k),
          m_seed(config.seed)
    {
        for (const auto &c : m_clustering.clusters())
            m_heads[c.head].head = c.head;
    }

    void CrpProtocol::bootstrap(Simulator &sim)
    {
        m_clustering.check(sim.world());
        refresh_tables(sim);
    }

    void CrpProtocol::refresh_tables(Simulator &sim)
    {
        const auto heads = m_clustering.heads();
        for (auto it = m_heads.begin(); it != m_heads.end();)
        {
            if (!std::binary_search(heads.begin(), heads.end(), it->first))
                it = m_heads.erase(it);
            else
                ++it;
        }
        for (NodeId h : heads)
        {
            auto &state = m_heads[h];
            state.head = h;
            hello_tick(state, sim.world(), heads, sim.now(), m_hello_period);
        }
    }

    std::uint64_t CrpProtocol::add_timer(TimerPurpose p)
    {
        m_timers.push_back(std::move(p));
        return m_timers.size() - 1;
    }

    DiscoveryRecord *CrpProtocol::find_record(const RequestKey &key)
    {
        for (auto &r : m_records)
        {
            if (r.key == key)
                return &r;
        }
        return nullptr;
    }

    const DiscoveryRecord *CrpProtocol::record(const RequestKey &key) const
    {
        for (const auto &r : m_records)
        {
            if (r.key == key)
                return &r;
        }
        return nullptr;
    }

    std::optional<ActiveRoute> CrpProtocol::active_route(NodeId src, NodeId dst) const
    {
        auto s = m_sources.find(src);
        if (s == m_sources.end())
            return std::nullopt;
        auto r = s->second.routes.find(dst);
        if (r == s->second.routes.end())
            return std::nullopt;
        return r->second;
    }

    DiscoveryStart CrpProtocol::initiate_discovery(Simulator &sim, NodeId src, NodeId dst)
    {
        if (src == dst)
            throw InvariantError("discovery with identical source and destination");
        const Node &s = sim.world().node(src);
        if (!s.cluster || !s.is_secondary())
            return DiscoveryStart::Refused;
        auto &state = m_sources[src];
        if (state.routes.contains(dst))
            return DiscoveryStart::CachedRoute;

        const RequestKey key{src, dst, state.next_request_id++};
        DiscoveryRecord rec;
        rec.key = key;
        rec.started = sim.now();
        m_records.push_back(std::move(rec));
        sim.schedule_timer(sim.now() + m_deadline, src, add_timer(DeadlineTimer{key}));

        Rreq rreq{key, {}};
        const NodeId head = *m_clustering.head_of(sim.world(), src);
        if (head == src)
            handle_rreq(sim, src, std::move(rreq), src);
        else
            sim.unicast(src, head, rreq);
        return DiscoveryStart::Started;
    }

    void CrpProtocol::handle_rreq(Simulator &sim, NodeId head, Rreq rreq, NodeId from)
    {
        auto hs = m_heads.find(head);
        if (hs == m_heads.end())
            return;
        const Cluster &own = m_clustering.cluster(*sim.world().node(head).cluster);
        const RreqAction action = ch_process_rreq(hs->second, own, rreq, from, sim.now(), m_hmax, m_tr);

        HeadAction log{sim.now(), head, rreq.key, HeadAction::Kind::Collect, rreq.ch_path};
        std::visit(
            [&](const auto &a) {
                using T = std::decay_t<decltype(a)>;
                using namespace rreq_action;
                if constexpr (std::is_same_v<T, ReplyAsDestinationSide>)
                {
                    log.kind = HeadAction::Kind::Collect;
                    if (a.opened)
                        sim.schedule_timer(sim.now() + m_tr, head, add_timer(CollectorTimer{head, rreq.key}));
                }
                else if constexpr (std::is_same_v<T, ForwardBroadcast>)
                {
                    log.kind = HeadAction::Kind::ForwardBroadcast;
                    if (!a.targets.empty())
                        sim.transmit(head, a.targets, rreq);
                }
                else if constexpr (std::is_same_v<T, ForwardDirected>)
                {
                    log.kind = HeadAction::Kind::ForwardDirected;
                    sim.unicast(head, a.next, rreq);
                }
                else
                {
                    switch (a.reason)
                    {
                    case DropReason::Duplicate:
                        log.kind = HeadAction::Kind::DropDuplicate;
                        break;
                    case DropReason::Hmax:
                        log.kind = HeadAction::Kind::DropHmax;
                        break;
                    case DropReason::Loop:
                        log.kind = HeadAction::Kind::DropLoop;
                        break;
                    }
                }
            },
            action);
        m_actions.push_back(std::move(log));
    }

    void CrpProtocol::handle_rrep(Simulator &sim, NodeId at, Rrep rrep)
    {
        const World &world = sim.world();
        const NodeId src = rrep.key.src;
        const NodeId dst = rrep.key.dst;
        const auto pos = std::find(rrep.ch_path.begin(), rrep.ch_path.end(), at);
        auto install_at_source = [&] {
            std::vector<NodeId> nodes{src};
            for (auto it = rrep.relay_nodes.rbegin(); it != rrep.relay_nodes.rend(); ++it)
                nodes.push_back(*it);
            nodes.push_back(dst);
            install(sim, route_from(rrep.key, reversed(rrep.ch_path), nodes), false);
        };
        if (pos == rrep.ch_path.end())
        {
            if (at == src)
                install_at_source();
            return;
        }

        const auto i = static_cast<std::size_t>(pos - rrep.ch_path.begin());
        const std::size_t last = rrep.ch_path.size() - 1;
        const NodeId prev = rrep.relay_nodes.empty() ? dst : rrep.relay_nodes.back();

        if (i == last)
        {
            if (common_channels(world.node(src), world.node(prev)).empty())
            {
                fail_discovery(sim, at, rrep);
                return;
            }
            const auto forward = reversed(rrep.ch_path);
            if (forward.size() > 1)
            {
                auto &rt = m_heads.at(at).routes;
                rt[dst] = RouteEntry{forward[1], std::vector<NodeId>(forward.begin() + 1, forward.end()), sim.now()};
            }
            if (src == at)
                install_at_source();
            else
                sim.unicast(at, src, rrep);
            return;
        }

        if (i > 0)
        {
            const Node *also = (i + 1 == last) ? &world.node(src) : nullptr;
            const auto &members = m_clustering.cluster(*world.node(at).cluster).members;
            const auto relay = select_intermediate_node(world, members, world.node(prev), also);
            if (!relay)
            {
                fail_discovery(sim, at, rrep);
                return;
            }
            rrep.relay_nodes.push_back(*relay);
        }
        sim.unicast(at, rrep.ch_path[i + 1], rrep);
    }

    void CrpProtocol::fail_discovery(Simulator &sim, NodeId at, const Rrep &rrep)
    {
        Rerr rerr;
        rerr.reporter = at;
        rerr.broken_hop = {at, at};
        rerr.affected = rrep.key;
        rerr.cause = RerrCause::NoRelay;
        rerr.head_path = reversed(rrep.ch_path);
        send_toward_source(sim, at, rrep.key.src, rerr.head_path, rerr);
    }

    void CrpProtocol::send_toward_source(Simulator &sim, NodeId at, NodeId src, std::span<const NodeId> head_path,
                                         const ControlMessage &msg)
    {
        if (at == src)
        {
            on_deliver(sim, ev::Deliver{at, at, msg});
            return;
        }
        const auto pos = std::find(head_path.begin(), head_path.end(), at);
        if (pos == head_path.end() || pos == head_path.begin())
        {
            sim.unicast(at, src, msg);
            return;
        }
        sim.unicast(at, *(pos - 1), msg);
    }

    void CrpProtocol::install(Simulator &sim, const ActiveRoute &route, bool repaired)
    {
        DiscoveryRecord *rec = find_record(route.key);
        if (!repaired && rec && rec->failed)
            return;

        ActiveRoute r = route;
        r.installed_at = sim.now();
        auto &state = m_sources[route.key.src];
        state.routes[route.key.dst] = r;
        state.repairing.erase(route.key.dst);

        InstalledRoute audit;
        audit.at = sim.now();
        audit.key = route.key;
        audit.route = r.nodes();
        for (NodeId n : audit.route)
            audit.channels.push_back(sim.world().node(n).channels);
        audit.repaired = repaired;
        m_installs.push_back(std::move(audit));

        if (!repaired && rec && !rec->completed)
        {
            rec->completed = sim.now();
            rec->success = true;
            rec->route = r.nodes();
            rec->head_path = r.head_path;
        }
    }

    void CrpProtocol::handle_rerr(Simulator &sim, NodeId at, const Rerr &rerr)
    {
        const World &world = sim.world();
        const NodeId src = rerr.affected.src;
        const NodeId dst = rerr.affected.dst;

        if (at == src && rerr.cause != RerrCause::SourceMoved && rerr.cause != RerrCause::LinkLost)
        {
            if (rerr.cause == RerrCause::NoRelay)
            {
                if (DiscoveryRecord *rec = find_record(rerr.affected); rec && !rec->completed)
                {
                    rec->failed = true;
                    rec->failure = rerr.cause;
                }
                return;
            }
            auto &state = m_sources[src];
            state.routes.erase(dst);
            state.repairing.erase(dst);
            initiate_discovery(sim, src, dst);
            return;
        }

        switch (rerr.cause)
        {
        case RerrCause::NoRelay:
        case RerrCause::Rediscover:
        case RerrCause::Unreachable:
            send_toward_source(sim, at, src, rerr.head_path, rerr);
            return;

        case RerrCause::SourceMoved:
        {
            if (!is_head(at))
                return;
            const ActiveRoute old = route_from(rerr.affected, rerr.head_path, rerr.route);
            const SourceMoveDecision decision = handle_source_move(old, at);
            if (const auto *cut = std::get_if<move_decision::Truncate>(&decision))
            {
                sim.unicast(at, src, RouteUpdate{rerr.affected, cut->route.head_path, cut->route.nodes()});
            }
            else if (std::holds_alternative<move_decision::Rediscover>(decision))
            {
                Rerr back = rerr;
                back.reporter = at;
                back.cause = RerrCause::Rediscover;
                sim.unicast(at, src, back);
            }
            return;
        }

        case RerrCause::LinkLost:
        {
            const NodeId failed = rerr.broken_hop.second;
            if (failed == dst)
            {
                Rerr up = rerr;
                up.reporter = at;
                up.cause = RerrCause::Unreachable;
                send_toward_source(sim, at, src, rerr.head_path, up);
                return;
            }
            const auto pos = std::find(rerr.route.begin(), rerr.route.end(), failed);
            const auto idx = static_cast<std::size_t>(pos - rerr.route.begin());
            if (pos == rerr.route.end() || idx == 0 || idx + 1 >= rerr.route.size() || idx >= rerr.head_path.size())
                return;
            const NodeId failed_head = rerr.head_path[idx];
            if (at != failed_head)
            {
                sim.unicast(at, failed_head, rerr);
                return;
            }
            const auto &members = m_clustering.cluster(*world.node(at).cluster).members;
            const NodeId toward_dst = rerr.route[idx + 1];
            const NodeId toward_src = rerr.route[idx - 1];
            const NodeId excluded[] = {failed};
            const auto relay =
                select_intermediate_node(world, members, world.node(toward_dst), &world.node(toward_src), excluded);
            if (relay)
            {
                std::vector<NodeId> patched = rerr.route;
                patched[idx] = *relay;
                send_toward_source(sim, at, src, rerr.head_path, RouteUpdate{rerr.affected, rerr.head_path, patched});
            }
            else
            {
                Rerr up = rerr;
                up.reporter = at;
                up.cause = RerrCause::Rediscover;
                send_toward_source(sim, at, src, rerr.head_path, up);
            }
            return;
        }
        }
    }

    void CrpProtocol::handle_route_update(Simulator &sim, NodeId at, const RouteUpdate &upd)
    {
        if (at != upd.key.src)
        {
            send_toward_source(sim, at, upd.key.src, upd.head_path, upd);
            return;
        }
        install(sim, route_from(upd.key, upd.head_path, upd.route), true);
    }

    void CrpProtocol::on_deliver(Simulator &sim, const ev::Deliver &d)
    {
        std::visit(
            [&](const auto &m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, Rreq>)
                    handle_rreq(sim, d.to, m, d.from);
                else if constexpr (std::is_same_v<T, Rrep>)
                    handle_rrep(sim, d.to, m);
                else if constexpr (std::is_same_v<T, Rerr>)
                    handle_rerr(sim, d.to, m);
                else if constexpr (std::is_same_v<T, RouteUpdate>)
                    handle_route_update(sim, d.to, m);
            },
            d.msg);
    }

    void CrpProtocol::on_timer(Simulator &sim, const ev::TimerExpiry &t)
    {
        const TimerPurpose purpose = m_timers.at(t.tag);
        if (const auto *c = std::get_if<CollectorTimer>(&purpose))
        {
            auto hs = m_heads.find(c->head);
            if (hs == m_heads.end())
                return;
            Collector &col = hs->second.collectors.at(c->key);
            col.closed = true;
            const Candidate &winner = collect_and_select(col.candidates);
            m_selections.push_back(Selection{c->key, c->head, winner.rreq.ch_path, col.candidates.size()});
            handle_rrep(sim, c->head, Rrep{c->key, reversed(winner.rreq.ch_path), {}});
            return;
        }
        const auto &deadline = std::get<DeadlineTimer>(purpose);
        if (DiscoveryRecord *rec = find_record(deadline.key); rec && !rec->completed)
            rec->failed = true;
    }

    void CrpProtocol::notify_link_loss(Simulator &sim, NodeId reporter, NodeId next_hop)
    {
        for (auto &[src, state] : m_sources)
        {
            for (auto &[dst, route] : state.routes)
            {
                const auto nodes = route.nodes();
                for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
                {
                    if (nodes[i] != reporter || nodes[i + 1] != next_hop)
                        continue;
                    if (!state.repairing.insert(dst).second)
                        return;
                    Rerr rerr;
                    rerr.reporter = reporter;
                    rerr.broken_hop = {reporter, next_hop};
                    rerr.affected = route.key;
                    rerr.cause = RerrCause::LinkLost;
                    rerr.head_path = route.head_path;
                    rerr.route = nodes;
                    const auto head = m_clustering.head_of(sim.world(), reporter);
                    if (!head)
                        return;
                    if (*head == reporter)
                        handle_rerr(sim, reporter, rerr);
                    else
                        sim.unicast(reporter, *head, rerr);
                    return;
                }
            }
        }
    }

    void CrpProtocol::rehome(Simulator &sim, NodeId node)
    {
        World &world = sim.world();
        if (world.node(node).role == Role::ClusterHead)
            return;
        m_clustering.reassign(world, node, std::nullopt);
        const auto samples = gather_hello_samples(world, m_clustering, node, m_seed);
        const auto joined = knn_join(samples, m_knn_k);
        if (!joined)
            return;
        m_clustering.reassign(world, node, *joined);
        const NodeId new_head = m_clustering.cluster(*joined).head;

        auto s = m_sources.find(node);
        if (s == m_sources.end())
            return;
        for (const auto &[dst, route] : s->second.routes)
        {
            Rerr rerr;
            rerr.reporter = node;
            rerr.broken_hop = {node, node};
            rerr.affected = route.key;
            rerr.cause = RerrCause::SourceMoved;
            rerr.head_path = route.head_path;
            rerr.route = route.nodes();
            if (new_head == node)
                handle_rerr(sim, node, rerr);
            else
                sim.unicast(node, new_head, rerr);
        }
    }

    void CrpProtocol::on_topology_change(Simulator &sim, NodeId node)
    {
        World &world = sim.world();
        const Node &n = world.node(node);
        if (n.is_secondary() && n.role == Role::Member)
        {
            const NodeId head = m_clustering.cluster(*n.cluster).head;
            if (!in_range(n, world.node(head)))
                rehome(sim, node);
        }

        std::vector<std::pair<NodeId, NodeId>> broken;
        for (const auto &[src, state] : m_sources)
        {
            for (const auto &[dst, route] : state.routes)
            {
                if (state.repairing.contains(dst))
                    continue;
                const auto nodes = route.nodes();
                for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
                {
                    if (common_channels(world.node(nodes[i]), world.node(nodes[i + 1])).empty())
                    {
                        broken.emplace_back(nodes[i], nodes[i + 1]);
                        break;
                    }
                }
            }
        }
        for (const auto &[reporter, next] : broken)
            notify_link_loss(sim, reporter, next);
    }

    void CrpProtocol::on_hello_tick(Simulator &sim)
    {
        refresh_tables(sim);
        for (const auto &n : sim.world().nodes)
        {
            if (n.is_secondary() && n.role == Role::Undecided)
            {
                const auto samples = gather_hello_samples(sim.world(), m_clustering, n.id, m_seed);
                if (auto joined = knn_join(samples, m_knn_k))
                    m_clustering.reassign(sim.world(), n.id, *joined);
            }
        }
    }

    bool CrpProtocol::resign(Simulator &sim, ClusterId cluster)
    {
        const NodeId old = m_clustering.cluster(cluster).head;
        const auto res = resign_head(m_clustering, sim.world(), cluster);
        if (!res)
            return false;
        std::vector<NodeId> members;
        for (NodeId m : m_clustering.cluster(cluster).members)
        {
            if (m != old)
                members.push_back(m);
        }
        sim.transmit(old, members, CheckForNewClusterHead{cluster, old});
        m_heads.erase(old);
        m_heads[res->new_head].head = res->new_head;
        refresh_tables(sim);
        return true;
    }
}
