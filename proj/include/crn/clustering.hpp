#pragma once

#include "crn/types.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace crn
{
    struct Cluster
    {
        ClusterId id = 0;
        NodeId head;
        // Sorted by id; contains the head once one is elected.
        std::vector<NodeId> members;

        bool contains(NodeId n) const;
    };

    struct KMeansResult
    {
        // clusters[i].id == i; heads unset.
        std::vector<Cluster> clusters;
        // Within-cluster sum of squares after each assignment step, initial assignment first.
        std::vector<double> wcss_history;
        std::size_t iterations = 0;
    };

    /// Lloyd's algorithm on SU positions. Initial centroids are k distinct nodes drawn
    /// with the seeded stream; stops when assignments are stable or after 100 iterations.
    /// An emptied cluster takes the point farthest from the centroid of the largest cluster.
    KMeansResult kmeans_partition(std::span<const Node> sus, std::uint32_t k, std::uint64_t seed);

    /// Sum of squared distances from each point to its cluster's mean position.
    double within_cluster_ss(const World &world, const std::vector<Cluster> &clusters);

    /// Max energy wins, lowest id on ties. Throws InvariantError on an empty cluster.
    NodeId elect_cluster_head(const Cluster &c, const World &world);

    struct HelloSample
    {
        NodeId responder;
        ClusterId responder_cluster = 0;
        double delay = 0.0;
    };

    /// Majority cluster among the k lowest-delay samples; ties go to the cluster of the
    /// single lowest-delay sample. nullopt when there are no samples.
    std::optional<ClusterId> knn_join(std::span<const HelloSample> samples, std::uint32_t k);

    /// Cluster membership plus the head-side view used by the routing protocol.
    class Clustering
    {
    public:
        Clustering() = default;
        explicit Clustering(std::vector<Cluster> clusters) : m_clusters(std::move(clusters)) {}

        const std::vector<Cluster> &clusters() const { return m_clusters; }
        const Cluster &cluster(ClusterId id) const { return m_clusters.at(id); }
        Cluster &cluster(ClusterId id) { return m_clusters.at(id); }

        std::optional<ClusterId> cluster_of(const World &world, NodeId n) const { return world.node(n).cluster; }
        std::optional<NodeId> head_of(const World &world, NodeId n) const;
        std::vector<NodeId> heads() const;

        /// Moves `n` into cluster `to` (or out of every cluster) and updates the world's node fields.
        void reassign(World &world, NodeId n, std::optional<ClusterId> to);

        /// Throws InvariantError when membership, roles, and node fields disagree.
        void check(const World &world) const;

    private:
        std::vector<Cluster> m_clusters;
    };

    /// Outcome of a head resignation.
    struct Resignation
    {
        NodeId old_head;
        NodeId new_head;
    };

    /// Replaces the head of cluster `c` by the best remaining member; the old head becomes
    /// a member. nullopt when the cluster has no other member.
    std::optional<Resignation> resign_head(Clustering &clustering, World &world, ClusterId c);

    /// K-means over the SUs, one elected head per cluster, then KNN re-homing of every member
    /// that cannot hear its head. Members left without a reachable cluster stay Undecided.
    Clustering form_clusters(World &world, std::uint64_t seed);

    /// Triggered-hello samples a joining node `u` would gather: one per clustered SU in range
    /// whose head can also hear `u`.
    std::vector<HelloSample> gather_hello_samples(const World &world, const Clustering &clustering, NodeId u,
                                                  std::uint64_t seed);

    nlohmann::json to_json(const Clustering &clustering, const World &world);
    Clustering clustering_from_json(const nlohmann::json &j, World &world);
}
