#include "crn/clustering.hpp"

#include "crn/rng.hpp"
#include "crn/sim.hpp"
#include "crn/world.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>

namespace crn
{
    bool Cluster::contains(NodeId n) const
    {
        return std::binary_search(members.begin(), members.end(), n);
    }

    namespace
    {
        double sq(double v) { return v * v; }

        double sqdist(Position a, Position b) { return sq(a.x - b.x) + sq(a.y - b.y); }

        std::vector<Position> means_of(std::span<const Node> pts, const std::vector<std::uint32_t> &assign, std::uint32_t k)
        {
            std::vector<Position> sum(k);
            std::vector<std::size_t> count(k, 0);
            for (std::size_t i = 0; i < pts.size(); ++i)
            {
                sum[assign[i]].x += pts[i].pos.x;
                sum[assign[i]].y += pts[i].pos.y;
                ++count[assign[i]];
            }
            for (std::uint32_t c = 0; c < k; ++c)
            {
                if (count[c] > 0)
                {
                    sum[c].x /= static_cast<double>(count[c]);
                    sum[c].y /= static_cast<double>(count[c]);
                }
            }
            return sum;
        }

        double wcss_of(std::span<const Node> pts, const std::vector<std::uint32_t> &assign, std::uint32_t k)
        {
            const auto means = means_of(pts, assign, k);
            double total = 0.0;
            for (std::size_t i = 0; i < pts.size(); ++i)
                total += sqdist(pts[i].pos, means[assign[i]]);
            return total;
        }

        std::vector<std::uint32_t> assign_nearest(std::span<const Node> pts, const std::vector<Position> &centroids)
        {
            std::vector<std::uint32_t> assign(pts.size(), 0);
            for (std::size_t i = 0; i < pts.size(); ++i)
            {
                double best = std::numeric_limits<double>::infinity();
                for (std::uint32_t c = 0; c < centroids.size(); ++c)
                {
                    const double d = sqdist(pts[i].pos, centroids[c]);
                    if (d < best)
                    {
                        best = d;
                        assign[i] = c;
                    }
                }
            }
            return assign;
        }

        void repair_empty(std::span<const Node> pts, std::vector<std::uint32_t> &assign, std::uint32_t k)
        {
            for (;;)
            {
                std::vector<std::size_t> count(k, 0);
                for (auto a : assign)
                    ++count[a];
                const auto empty = std::find(count.begin(), count.end(), std::size_t{0});
                if (empty == count.end())
                    return;
                const auto largest = static_cast<std::uint32_t>(std::max_element(count.begin(), count.end()) - count.begin());
                if (count[largest] < 2)
                    throw InvariantError("k-means repair: no cluster can donate a point");
                const Position centre = means_of(pts, assign, k)[largest];
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < pts.size(); ++i)
                {
                    if (assign[i] != largest)
                        continue;
                    const double d = sqdist(pts[i].pos, centre);
                    if (d > far_d)
                    {
                        far_d = d;
                        far = i;
                    }
                }
                assign[far] = static_cast<std::uint32_t>(empty - count.begin());
            }
        }
    }

    KMeansResult kmeans_partition(std::span<const Node> sus, std::uint32_t k, std::uint64_t seed)
    {
        if (k < 1)
            throw ConfigError("invalid config field 'kmeans_k': must be >= 1");
        if (k > sus.size())
            throw ConfigError("invalid config field 'kmeans_k': " + std::to_string(k) + " clusters requested for " +
                              std::to_string(sus.size()) + " secondary users");

        // Seeding: first centroid uniform, each further one drawn with probability proportional
        // to its squared distance from the nearest centroid chosen so far.
        Rng rng(seed, Stream::KMeans);
        std::vector<Position> centroids;
        std::vector<bool> taken(sus.size(), false);
        std::vector<double> nearest(sus.size(), std::numeric_limits<double>::infinity());
        std::size_t pick = static_cast<std::size_t>(rng.below(sus.size()));
        while (true)
        {
            taken[pick] = true;
            centroids.push_back(sus[pick].pos);
            if (centroids.size() == k)
                break;
            double total = 0.0;
            for (std::size_t i = 0; i < sus.size(); ++i)
            {
                nearest[i] = taken[i] ? 0.0 : std::min(nearest[i], sqdist(sus[i].pos, sus[pick].pos));
                total += nearest[i];
            }
            if (total > 0.0)
            {
                const double target = rng.uniform01() * total;
                double acc = 0.0;
                pick = sus.size();
                for (std::size_t i = 0; i < sus.size(); ++i)
                {
                    if (nearest[i] <= 0.0)
                        continue;
                    acc += nearest[i];
                    pick = i;
                    if (acc > target)
                        break;
                }
            }
            else
            {
                // Every untaken node sits on a centroid already; fall back to a uniform draw.
                std::vector<std::size_t> free;
                for (std::size_t i = 0; i < sus.size(); ++i)
                {
                    if (!taken[i])
                        free.push_back(i);
                }
                pick = free[static_cast<std::size_t>(rng.below(free.size()))];
            }
        }

        KMeansResult result;
        auto assign = assign_nearest(sus, centroids);
        repair_empty(sus, assign, k);
        result.wcss_history.push_back(wcss_of(sus, assign, k));

        constexpr std::size_t kMaxIterations = 100;
        for (std::size_t iter = 0; iter < kMaxIterations; ++iter)
        {
            ++result.iterations;
            auto next = assign_nearest(sus, means_of(sus, assign, k));
            repair_empty(sus, next, k);
            result.wcss_history.push_back(wcss_of(sus, next, k));
            const bool stable = next == assign;
            assign = std::move(next);
            if (stable)
                break;
        }

        result.clusters.resize(k);
        for (std::uint32_t c = 0; c < k; ++c)
            result.clusters[c].id = c;
        for (std::size_t i = 0; i < sus.size(); ++i)
            result.clusters[assign[i]].members.push_back(sus[i].id);
        for (auto &c : result.clusters)
            std::sort(c.members.begin(), c.members.end());
        return result;
    }

    double within_cluster_ss(const World &world, const std::vector<Cluster> &clusters)
    {
        double total = 0.0;
        for (const auto &c : clusters)
        {
            if (c.members.empty())
                continue;
            Position m;
            for (NodeId n : c.members)
            {
                m.x += world.node(n).pos.x;
                m.y += world.node(n).pos.y;
            }
            m.x /= static_cast<double>(c.members.size());
            m.y /= static_cast<double>(c.members.size());
            for (NodeId n : c.members)
                total += sqdist(world.node(n).pos, m);
        }
        return total;
    }

    NodeId elect_cluster_head(const Cluster &c, const World &world)
    {
        if (c.members.empty())
            throw InvariantError("cannot elect a head for empty cluster " + std::to_string(c.id));
        NodeId best = c.members.front();
        for (NodeId n : c.members)
        {
            const double e = world.node(n).energy;
            const double be = world.node(best).energy;
            if (e > be || (e == be && n < best))
                best = n;
        }
        return best;
    }

    std::optional<ClusterId> knn_join(std::span<const HelloSample> samples, std::uint32_t k)
    {
        if (samples.empty())
            return std::nullopt;
        std::vector<HelloSample> sorted(samples.begin(), samples.end());
        std::stable_sort(sorted.begin(), sorted.end(), [](const HelloSample &a, const HelloSample &b) {
            if (a.delay != b.delay)
                return a.delay < b.delay;
            return a.responder < b.responder;
        });
        const std::size_t take = std::min<std::size_t>(k, sorted.size());

        std::map<ClusterId, std::size_t> votes;
        for (std::size_t i = 0; i < take; ++i)
            ++votes[sorted[i].responder_cluster];
        std::size_t top = 0;
        for (const auto &[cluster, count] : votes)
            top = std::max(top, count);
        // Among tied clusters, the one owning the lowest-delay sample wins.
        for (std::size_t i = 0; i < take; ++i)
        {
            if (votes[sorted[i].responder_cluster] == top)
                return sorted[i].responder_cluster;
        }
        return sorted.front().responder_cluster;
    }

    std::optional<NodeId> Clustering::head_of(const World &world, NodeId n) const
    {
        const auto c = world.node(n).cluster;
        if (!c)
            return std::nullopt;
        return m_clusters.at(*c).head;
    }

    std::vector<NodeId> Clustering::heads() const
    {
        std::vector<NodeId> out;
        out.reserve(m_clusters.size());
        for (const auto &c : m_clusters)
            out.push_back(c.head);
        std::sort(out.begin(), out.end());
        return out;
    }

    void Clustering::reassign(World &world, NodeId n, std::optional<ClusterId> to)
    {
        Node &node = world.node(n);
        if (node.role == Role::ClusterHead)
            throw InvariantError("cannot move cluster head " + std::to_string(n.value) + " without resignation");
        if (node.cluster)
        {
            auto &m = m_clusters.at(*node.cluster).members;
            m.erase(std::remove(m.begin(), m.end(), n), m.end());
        }
        node.cluster = to;
        node.role = to ? Role::Member : Role::Undecided;
        if (to)
        {
            auto &m = m_clusters.at(*to).members;
            m.insert(std::lower_bound(m.begin(), m.end(), n), n);
        }
    }

    void Clustering::check(const World &world) const
    {
        std::map<NodeId, ClusterId> seen;
        for (const auto &c : m_clusters)
        {
            if (!c.contains(c.head))
                throw InvariantError("head not in its own cluster " + std::to_string(c.id));
            if (world.node(c.head).role != Role::ClusterHead)
                throw InvariantError("cluster " + std::to_string(c.id) + " head lacks the head role");
            for (NodeId n : c.members)
            {
                if (!seen.emplace(n, c.id).second)
                    throw InvariantError("node " + std::to_string(n.value) + " in two clusters");
                const Node &node = world.node(n);
                if (node.cluster != c.id)
                    throw InvariantError("node " + std::to_string(n.value) + " disagrees on its cluster");
                if (n != c.head && node.role != Role::Member)
                    throw InvariantError("node " + std::to_string(n.value) + " should be a member");
                if (node.is_primary())
                    throw InvariantError("primary user inside an SU cluster");
            }
        }
        for (const auto &n : world.nodes)
        {
            if (n.cluster && !seen.contains(n.id))
                throw InvariantError("node " + std::to_string(n.id.value) + " claims a cluster that lacks it");
            if (!n.cluster && n.role != Role::Undecided)
                throw InvariantError("unclustered node " + std::to_string(n.id.value) + " is not undecided");
        }
    }

    std::optional<Resignation> resign_head(Clustering &clustering, World &world, ClusterId id)
    {
        Cluster &c = clustering.cluster(id);
        if (c.members.size() < 2)
            return std::nullopt;
        Cluster rest = c;
        rest.members.erase(std::remove(rest.members.begin(), rest.members.end(), c.head), rest.members.end());
        const NodeId successor = elect_cluster_head(rest, world);
        const NodeId old = c.head;
        world.node(old).role = Role::Member;
        world.node(successor).role = Role::ClusterHead;
        c.head = successor;
        return Resignation{old, successor};
    }

    std::vector<HelloSample> gather_hello_samples(const World &world, const Clustering &clustering, NodeId u,
                                                  std::uint64_t seed)
    {
        Rng rng(derive_seed(seed, Stream::HelloJitter) ^ splitmix64(u.value));
        const Node &joiner = world.node(u);
        std::vector<HelloSample> out;
        for (const auto &n : world.nodes)
        {
            if (n.id == u || !n.is_secondary() || !n.cluster || !in_range(joiner, n))
                continue;
            const NodeId head = clustering.cluster(*n.cluster).head;
            if (!in_range(joiner, world.node(head)))
                continue;
            out.push_back(HelloSample{
                n.id, *n.cluster,
                triggered_hello_delay(distance(joiner.pos, n.pos), joiner.radio_range, world.config.link_delay, rng)});
        }
        return out;
    }

    Clustering form_clusters(World &world, std::uint64_t seed)
    {
        std::vector<Node> sus;
        for (const auto &n : world.nodes)
        {
            if (n.is_secondary())
                sus.push_back(n);
        }
        if (sus.empty())
            return Clustering{};

        auto partition = kmeans_partition(sus, world.config.effective_kmeans_k(), seed);
        for (auto &c : partition.clusters)
        {
            c.head = elect_cluster_head(c, world);
            for (NodeId n : c.members)
            {
                world.node(n).cluster = c.id;
                world.node(n).role = n == c.head ? Role::ClusterHead : Role::Member;
            }
        }
        Clustering clustering(std::move(partition.clusters));

        std::vector<NodeId> orphans;
        for (const auto &c : clustering.clusters())
        {
            for (NodeId n : c.members)
            {
                if (n != c.head && !in_range(world.node(n), world.node(c.head)))
                    orphans.push_back(n);
            }
        }
        std::sort(orphans.begin(), orphans.end());
        for (NodeId n : orphans)
            clustering.reassign(world, n, std::nullopt);
        for (NodeId n : orphans)
        {
            const auto samples = gather_hello_samples(world, clustering, n, seed);
            if (auto joined = knn_join(samples, world.config.knn_k))
                clustering.reassign(world, n, *joined);
        }
        return clustering;
    }

    nlohmann::json to_json(const Clustering &clustering, const World &world)
    {
        nlohmann::json clusters = nlohmann::json::array();
        for (const auto &c : clustering.clusters())
        {
            nlohmann::json members = nlohmann::json::array();
            for (NodeId n : c.members)
                members.push_back(nlohmann::json{{"id", n.value}, {"name", world.node(n).name()}, {"head", n == c.head}});
            clusters.push_back(nlohmann::json{{"id", c.id}, {"head", c.head.value}, {"members", members}});
        }
        nlohmann::json undecided = nlohmann::json::array();
        for (const auto &n : world.nodes)
        {
            if (n.is_secondary() && !n.cluster)
                undecided.push_back(n.id.value);
        }
        return nlohmann::json{{"clusters", clusters}, {"undecided", undecided}};
    }

    Clustering clustering_from_json(const nlohmann::json &j, World &world)
    {
        std::vector<Cluster> clusters;
        try
        {
            for (const auto &jc : j.at("clusters"))
            {
                Cluster c;
                c.id = jc.at("id").get<ClusterId>();
                if (c.id != clusters.size())
                    throw ConfigError("cluster ids must be dense and ordered from 0");
                c.head = NodeId{jc.at("head").get<std::uint32_t>()};
                for (const auto &m : jc.at("members"))
                    c.members.push_back(NodeId{m.is_object() ? m.at("id").get<std::uint32_t>() : m.get<std::uint32_t>()});
                std::sort(c.members.begin(), c.members.end());
                clusters.push_back(std::move(c));
            }
        }
        catch (const nlohmann::json::exception &e)
        {
            throw ConfigError(std::string("malformed cluster document: ") + e.what());
        }
        for (auto &n : world.nodes)
        {
            n.cluster.reset();
            n.role = Role::Undecided;
        }
        for (const auto &c : clusters)
        {
            for (NodeId n : c.members)
            {
                if (n.value >= world.nodes.size())
                    throw ConfigError("cluster member " + std::to_string(n.value) + " is not a node");
                world.node(n).cluster = c.id;
                world.node(n).role = n == c.head ? Role::ClusterHead : Role::Member;
            }
        }
        Clustering clustering(std::move(clusters));
        try
        {
            clustering.check(world);
        }
        catch (const InvariantError &e)
        {
            throw ConfigError(std::string("inconsistent cluster document: ") + e.what());
        }
        return clustering;
    }
}
