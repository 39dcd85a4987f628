#include "doctest.h"

#include "support.hpp"

#include <algorithm>
#include <numeric>

using namespace crn;
using test::channels;

namespace
{
    HeadState head_with_neighbors(NodeId self, std::initializer_list<std::uint32_t> neighbors)
    {
        HeadState s;
        s.head = self;
        for (auto n : neighbors)
            s.neighbors[NodeId{n}] = NeighborEntry{};
        return s;
    }

    Rreq request(std::uint32_t src, std::uint32_t dst, std::uint32_t id, std::vector<NodeId> path)
    {
        return Rreq{RequestKey{NodeId{src}, NodeId{dst}, id}, std::move(path)};
    }

    std::vector<NodeId> ids(std::initializer_list<std::uint32_t> v)
    {
        std::vector<NodeId> out;
        for (auto x : v)
            out.push_back(NodeId{x});
        return out;
    }

    std::size_t count_deliveries(const Simulator &sim, NodeId from, NodeId to)
    {
        std::size_t n = 0;
        for (const auto &r : sim.trace())
        {
            const auto *d = std::get_if<ev::Deliver>(&r.kind);
            if (d && d->from == from && d->to == to)
                ++n;
        }
        return n;
    }
}

TEST_CASE("ch_process_rreq broadcasts once and remembers the request")
{
    HeadState s = head_with_neighbors(NodeId{5}, {1, 2, 3});
    const Cluster own{0, NodeId{5}, ids({5, 6})};
    Rreq r = request(6, 9, 0, ids({1}));
    const auto a = ch_process_rreq(s, own, r, NodeId{1}, 2.0, 10, 40.0);
    REQUIRE(std::holds_alternative<rreq_action::ForwardBroadcast>(a));
    CHECK(std::get<rreq_action::ForwardBroadcast>(a).targets == ids({2, 3}));
    CHECK(r.ch_path == ids({1, 5}));
    CHECK(s.seen.contains(r.key));

    Rreq again = request(6, 9, 0, ids({2}));
    const auto b = ch_process_rreq(s, own, again, NodeId{2}, 3.0, 10, 40.0);
    REQUIRE(std::holds_alternative<rreq_action::Drop>(b));
    CHECK(std::get<rreq_action::Drop>(b).reason == rreq_action::DropReason::Duplicate);
    CHECK(s.drops.duplicate == 1);
    CHECK(again.ch_path == ids({2}));

    // A new request id is a new request.
    Rreq fresh = request(6, 9, 1, ids({1}));
    CHECK(std::holds_alternative<rreq_action::ForwardBroadcast>(ch_process_rreq(s, own, fresh, NodeId{1}, 4.0, 10, 40.0)));
}

TEST_CASE("ch_process_rreq drops loops and over-long paths")
{
    const Cluster own{0, NodeId{5}, ids({5})};
    {
        HeadState s = head_with_neighbors(NodeId{5}, {1});
        Rreq r = request(7, 9, 0, ids({1, 5, 2}));
        const auto a = ch_process_rreq(s, own, r, NodeId{2}, 1.0, 10, 40.0);
        REQUIRE(std::holds_alternative<rreq_action::Drop>(a));
        CHECK(std::get<rreq_action::Drop>(a).reason == rreq_action::DropReason::Loop);
        CHECK(s.drops.loop == 1);
    }
    {
        HeadState s = head_with_neighbors(NodeId{5}, {1});
        Rreq r = request(7, 9, 0, ids({1, 2, 3}));
        const auto a = ch_process_rreq(s, own, r, NodeId{3}, 1.0, 3, 40.0);
        REQUIRE(std::holds_alternative<rreq_action::Drop>(a));
        CHECK(std::get<rreq_action::Drop>(a).reason == rreq_action::DropReason::Hmax);
        CHECK(s.drops.hmax == 1);

        Rreq ok = request(7, 9, 1, ids({1, 2}));
        CHECK(std::holds_alternative<rreq_action::ForwardBroadcast>(ch_process_rreq(s, own, ok, NodeId{2}, 1.0, 3, 40.0)));
        CHECK(ok.hops() == 3);
    }
    {
        // The hop cap wins over a routing-table shortcut.
        HeadState s = head_with_neighbors(NodeId{5}, {1});
        s.routes[NodeId{9}] = RouteEntry{NodeId{8}, ids({8}), 0.0};
        Rreq r = request(7, 9, 0, ids({1, 2, 3}));
        CHECK(std::holds_alternative<rreq_action::Drop>(ch_process_rreq(s, own, r, NodeId{3}, 1.0, 3, 40.0)));
        Rreq ok = request(7, 9, 1, ids({1}));
        const auto a = ch_process_rreq(s, own, ok, NodeId{1}, 1.0, 3, 40.0);
        REQUIRE(std::holds_alternative<rreq_action::ForwardDirected>(a));
        CHECK(std::get<rreq_action::ForwardDirected>(a).next == NodeId{8});
    }
}

TEST_CASE("destination head collects copies until its collector closes")
{
    HeadState s = head_with_neighbors(NodeId{5}, {1, 2});
    const Cluster own{0, NodeId{5}, ids({5, 9})};
    Rreq first = request(7, 9, 0, ids({1}));
    const auto a = ch_process_rreq(s, own, first, NodeId{1}, 2.0, 10, 40.0);
    REQUIRE(std::holds_alternative<rreq_action::ReplyAsDestinationSide>(a));
    CHECK(std::get<rreq_action::ReplyAsDestinationSide>(a).opened);
    const RequestKey key = first.key;
    REQUIRE(s.collectors.contains(key));
    CHECK(s.collectors.at(key).tr_expiry == 42.0);

    Rreq second = request(7, 9, 0, ids({2, 3}));
    const auto b = ch_process_rreq(s, own, second, NodeId{3}, 3.0, 10, 40.0);
    REQUIRE(std::holds_alternative<rreq_action::ReplyAsDestinationSide>(b));
    CHECK_FALSE(std::get<rreq_action::ReplyAsDestinationSide>(b).opened);
    CHECK(s.collectors.at(key).candidates.size() == 2);
    CHECK(s.collectors.at(key).candidates[1].rreq.ch_path == ids({2, 3, 5}));

    s.collectors.at(key).closed = true;
    Rreq late = request(7, 9, 0, ids({4}));
    const auto c = ch_process_rreq(s, own, late, NodeId{4}, 50.0, 10, 40.0);
    CHECK(std::holds_alternative<rreq_action::Drop>(c));
    CHECK(s.drops.duplicate == 1);
}

TEST_CASE("collect_and_select prefers fewer heads, then earlier arrival, then the smaller path")
{
    std::vector<Candidate> c{
        {request(0, 9, 0, ids({1, 2, 3})), 3.0},
        {request(0, 9, 0, ids({1, 4, 3})), 2.5},
        {request(0, 9, 0, ids({1, 6, 7, 3})), 1.0},
        {request(0, 9, 0, ids({1, 2, 3})), 2.5},
    };
    CHECK(collect_and_select(c).rreq.ch_path == ids({1, 2, 3}));
    CHECK(collect_and_select(c).arrival == 2.5);

    std::vector<std::size_t> order(c.size());
    std::iota(order.begin(), order.end(), 0);
    do
    {
        std::vector<Candidate> p;
        for (auto i : order)
            p.push_back(c[i]);
        const Candidate &w = collect_and_select(p);
        REQUIRE(w.rreq.ch_path == ids({1, 2, 3}));
        REQUIRE(w.arrival == 2.5);
    } while (std::next_permutation(order.begin(), order.end()));

    CHECK_THROWS_AS(collect_and_select(std::span<const Candidate>{}), InvariantError);
}

TEST_CASE("select_intermediate_node picks the best channel-compatible member")
{
    World w;
    w.config.channel_count = 4;
    w.nodes = {test::su(0, 0, 0, 100, channels({0, 1}), 0.5, 1),
               test::su(1, 0, 0, 100, channels({1}), 0.5, 3),
               test::su(2, 0, 0, 100, channels({1, 2}), 0.5, 7),
               test::su(3, 0, 0, 100, channels({3}), 0.5, 99),
               test::su(4, 0, 0, 100, channels({2}), 0.5, 7),
               test::pu(5, 0, 0, 100, 1, true)};
    const Node prev = test::su(9, 0, 0, 100, channels({1, 2}));
    const auto all = ids({0, 1, 2, 3, 4, 5});

    CHECK(select_intermediate_node(w, all, prev) == NodeId{2});
    // Throughput tie between 2 and 4 goes to the lower id.
    CHECK(select_intermediate_node(w, ids({4, 2}), prev) == NodeId{2});
    const NodeId skip2[] = {NodeId{2}};
    CHECK(select_intermediate_node(w, all, prev, nullptr, skip2) == NodeId{4});

    const Node src = test::su(10, 0, 0, 100, channels({0}));
    CHECK(select_intermediate_node(w, all, prev, &src) == NodeId{0});
    const Node far = test::su(10, 0, 0, 100, channels({3}));
    CHECK(select_intermediate_node(w, all, prev, &far) == std::nullopt);
    const Node src1 = test::su(10, 0, 0, 100, channels({1}));
    CHECK(select_intermediate_node(w, all, prev, &src1) == NodeId{2});
    CHECK(select_intermediate_node(w, ids({3, 5}), prev) == std::nullopt);
    // The member list may contain the head; it is eligible like any other member.
    CHECK(select_intermediate_node(w, ids({0}), prev) == NodeId{0});
}

TEST_CASE("hello_tick keeps symmetric neighbor tables and evicts stale heads")
{
    World w;
    w.nodes = {test::su(0, 0, 0, 100, channels({0, 1})), test::su(1, 80, 0, 100, channels({1})),
               test::su(2, 500, 0, 100, channels({1}))};
    const auto heads = ids({0, 1, 2});
    HeadState a{NodeId{0}, {}, {}, {}, {}, {}};
    HeadState b{NodeId{1}, {}, {}, {}, {}, {}};
    HeadState c{NodeId{2}, {}, {}, {}, {}, {}};
    hello_tick(a, w, heads, 0.0, 5.0);
    hello_tick(b, w, heads, 0.0, 5.0);
    hello_tick(c, w, heads, 0.0, 5.0);
    REQUIRE(a.neighbors.size() == 1);
    REQUIRE(b.neighbors.size() == 1);
    CHECK(a.neighbors.contains(NodeId{1}));
    CHECK(b.neighbors.contains(NodeId{0}));
    CHECK(a.neighbors.at(NodeId{1}).common == channels({1}));
    CHECK(c.neighbors.empty());

    w.nodes[1].pos = {300, 0};
    hello_tick(a, w, heads, 10.0, 5.0);
    CHECK(a.neighbors.contains(NodeId{1}));
    hello_tick(a, w, heads, 15.0, 5.0);
    CHECK(a.neighbors.empty());

    w.nodes[1].pos = {50, 0};
    hello_tick(a, w, ids({0, 2}), 20.0, 5.0);
    CHECK(a.neighbors.empty());
}

TEST_CASE("four-cluster fixture discovers the route through CH2")
{
    const Fixture fx = load_fixture(test::fixture_path("figure3.json"));
    const Episode e = run_crp_episode(fx.world, fx.clustering, fx.src, fx.dst, true);
    REQUIRE(e.metrics.success);
    const World &w = e.sim->world();
    const auto &rec = e.crp->records().front();
    CHECK(format_route(w, rec.route) == "{SU1, SU5, SU8}");
    CHECK(format_head_path(w, rec.head_path) == "1->2->3");
    CHECK(e.crp->head_state(node_by_label(w, "CH4")).drops.duplicate == 1);
    CHECK(test::crp_violations(e).empty());

    // src -> CH1, CH1 broadcast, CH2 broadcast, CH4 broadcast.
    CHECK(e.metrics.rreq_count == 4);
    // CH3 -> CH2 -> CH1 -> SU1.
    CHECK(e.metrics.rrep_count == 3);
    const SimConfig &c = e.config;
    CHECK(*e.metrics.routing_delay == doctest::Approx(3 * c.link_delay + c.effective_tr() + 3 * c.link_delay));
}

TEST_CASE("four-cluster fixture variants: missing relay and same-cluster destination")
{
    {
        const Fixture fx = load_fixture(test::fixture_path("figure3_no_relay.json"));
        const Episode e = run_crp_episode(fx.world, fx.clustering, fx.src, fx.dst, true);
        CHECK_FALSE(e.metrics.success);
        const auto &rec = e.crp->records().front();
        CHECK(rec.failed);
        CHECK(rec.failure == RerrCause::NoRelay);
        CHECK(test::crp_violations(e).empty());
    }
    {
        const Fixture fx = load_fixture(test::fixture_path("figure3_same_cluster.json"));
        const Episode e = run_crp_episode(fx.world, fx.clustering, fx.src, fx.dst, true);
        REQUIRE(e.metrics.success);
        const auto &rec = e.crp->records().front();
        CHECK(format_route(e.sim->world(), rec.route) == "{SU1, SU8}");
        CHECK(rec.head_path.size() == 1);
        CHECK(e.metrics.rreq_count == 1);
        CHECK(e.metrics.rrep_count == 1);
    }
}

TEST_CASE("initiate_discovery special cases")
{
    Fixture fx = load_fixture(test::fixture_path("figure3.json"));
    const NodeId ch1 = node_by_label(fx.world, "CH1");
    const NodeId su8 = node_by_label(fx.world, "SU8");

    SUBCASE("a head source hands the request to itself")
    {
        Simulator sim(fx.world, 1.0);
        sim.enable_trace(true);
        CrpProtocol crp(fx.world.config, fx.clustering);
        crp.bootstrap(sim);
        CHECK(crp.initiate_discovery(sim, ch1, su8) == DiscoveryStart::Started);
        CHECK(sim.counters().rreq == 1);
        sim.run(crp, 100.0);
        CHECK(count_deliveries(sim, ch1, ch1) == 0);
        CHECK(crp.head_state(ch1).seen.size() == 1);
    }
    SUBCASE("a cached route needs no message")
    {
        Episode e = run_crp_episode(fx.world, fx.clustering, fx.src, fx.dst, true);
        REQUIRE(e.metrics.success);
        const auto before = e.sim->counters();
        CHECK(e.crp->initiate_discovery(*e.sim, fx.src, fx.dst) == DiscoveryStart::CachedRoute);
        CHECK(e.sim->counters().rreq == before.rreq);
        CHECK(e.crp->records().size() == 1);
    }
    SUBCASE("an undecided source is refused")
    {
        World w = fx.world;
        Clustering cl = fx.clustering;
        cl.reassign(w, fx.src, std::nullopt);
        Simulator sim(w, 1.0);
        CrpProtocol crp(w.config, cl);
        crp.bootstrap(sim);
        CHECK(crp.initiate_discovery(sim, fx.src, su8) == DiscoveryStart::Refused);
        CHECK(sim.counters().rreq == 0);
        CHECK_THROWS_AS(crp.initiate_discovery(sim, su8, su8), InvariantError);
    }
}

TEST_CASE("relay count follows the head path on random worlds")
{
    int successes = 0;
    for (std::uint64_t seed = 1; seed <= 120; ++seed)
    {
        SimConfig c;
        c.seed = seed;
        c.n_primary = 4;
        c.n_secondary = 16 + static_cast<std::uint32_t>(seed % 20);
        const Episode e = run_episode(c, ProtocolKind::Crp, true);
        REQUIRE(test::crp_violations(e).empty());
        if (!e.metrics.success)
            continue;
        ++successes;
        const auto &rec = e.crp->records().front();
        const std::size_t h = rec.head_path.size();
        REQUIRE(rec.route.size() == 2 + (h > 2 ? h - 2 : 0));
        REQUIRE(rec.route.front() == e.src);
        REQUIRE(rec.route.back() == e.dst);
        REQUIRE(test::pairwise_distinct(rec.route));
        // Delay is a closed form of the head count: RREQ out, collection window, RREP back.
        const double hops = static_cast<double>(h) + (e.crp->is_head(e.src) ? -1.0 : 0.0);
        const double back = static_cast<double>(h) - 1.0 + (rec.route.front() == rec.head_path.front() ? 0.0 : 1.0);
        REQUIRE(*e.metrics.routing_delay == doctest::Approx((hops + back) * c.link_delay + c.effective_tr()));
    }
    CHECK(successes >= 40);
}

TEST_CASE("handle_source_move decisions")
{
    ActiveRoute r;
    r.key = RequestKey{NodeId{1}, NodeId{10}, 0};
    r.head_path = ids({0, 3, 7});
    r.relay_at = {std::nullopt, NodeId{6}, std::nullopt};
    CHECK(r.nodes() == ids({1, 6, 10}));

    CHECK(std::holds_alternative<move_decision::NoOp>(handle_source_move(r, NodeId{0})));
    CHECK(std::holds_alternative<move_decision::Rediscover>(handle_source_move(r, NodeId{11})));
    const auto d = handle_source_move(r, NodeId{3});
    REQUIRE(std::holds_alternative<move_decision::Truncate>(d));
    const ActiveRoute &cut = std::get<move_decision::Truncate>(d).route;
    CHECK(cut.head_path == ids({3, 7}));
    CHECK(cut.nodes() == ids({1, 10}));
    const auto end = handle_source_move(r, NodeId{7});
    REQUIRE(std::holds_alternative<move_decision::Truncate>(end));
    CHECK(std::get<move_decision::Truncate>(end).route.nodes() == ids({1, 10}));
}

TEST_CASE("source moving into an on-path cluster truncates the route")
{
    const auto run = test::source_move({420, -50});
    const World &w = run.episode.sim->world();
    CHECK(test::labels(w, run.route_before) == std::vector<std::string>{"SU1", "SU5", "SU8"});
    CHECK(w.node(run.src).cluster == ClusterId{1});
    REQUIRE(run.route_after.has_value());
    CHECK(format_route(w, run.route_after->nodes()) == "{SU1, SU8}");
    CHECK(format_head_path(w, run.route_after->head_path) == "2->3");
    CHECK(run.episode.sim->counters().rreq == run.rreq_before);
    CHECK(run.src_rreqs_after == 0);
}

TEST_CASE("source moving off the head path rediscovers once")
{
    const auto run = test::source_move({250, 450});
    const World &w = run.episode.sim->world();
    CHECK(w.node(run.src).cluster == ClusterId{3});
    CHECK(run.src_rreqs_after == 1);
    REQUIRE(run.route_after.has_value());
    CHECK(format_head_path(w, run.route_after->head_path) == "4->2->3");
    CHECK(test::crp_violations(run.episode).empty());
}

TEST_CASE("a lost relay is replaced inside its cluster without a new discovery")
{
    const auto run = test::relay_failure(true);
    const World &w = run.episode.sim->world();
    CHECK(test::labels(w, run.route_before) == std::vector<std::string>{"SU1", "SU5", "SU8"});
    REQUIRE(run.route_after.has_value());
    CHECK(format_route(w, run.route_after->nodes()) == "{SU1, SU3, SU8}");
    CHECK(run.episode.sim->counters().rreq == run.rreq_before);
    CHECK(run.src_rreqs_after == 0);
    CHECK(test::crp_violations(run.episode).empty());
}

TEST_CASE("a lost relay without a replacement falls back to rediscovery")
{
    const auto run = test::relay_failure(false);
    CHECK(run.src_rreqs_after == 1);
    CHECK(run.episode.crp->records().size() == 2);
    CHECK_FALSE(run.route_after.has_value());
}

TEST_CASE("head resignation installs the successor")
{
    Fixture fx = load_fixture(test::fixture_path("figure3.json"));
    Episode e = run_crp_episode(fx.world, fx.clustering, fx.src, fx.dst, true);
    const NodeId ch2 = node_by_label(e.sim->world(), "CH2");
    REQUIRE(e.crp->resign(*e.sim, 1));
    CHECK_FALSE(e.crp->is_head(ch2));
    const NodeId next = e.crp->clustering().cluster(1).head;
    CHECK(e.sim->world().node(next).label == "SU4");
    CHECK(e.crp->is_head(next));
    CHECK_NOTHROW(e.crp->clustering().check(e.sim->world()));
    CHECK_FALSE(e.crp->resign(*e.sim, 3));
}
