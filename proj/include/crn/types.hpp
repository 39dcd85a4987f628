#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace crn
{
    /// Raised for invalid user-supplied configuration (bad counts, unreadable files, ...).
    class ConfigError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Raised when an internal invariant is violated; aborts the run.
    class InvariantError : public std::logic_error
    {
    public:
        using std::logic_error::logic_error;
    };

    struct NodeId
    {
        std::uint32_t value = 0;

        friend constexpr auto operator<=>(NodeId, NodeId) = default;
    };

    using ClusterId = std::uint32_t;

    struct ChannelId
    {
        std::uint32_t value = 0;

        friend constexpr auto operator<=>(ChannelId, ChannelId) = default;
    };

    /// Channel availability as a bitmask; the channel universe is capped at 64.
    class ChannelSet
    {
    public:
        static constexpr std::uint32_t kMaxChannels = 64;

        constexpr ChannelSet() = default;
        constexpr explicit ChannelSet(std::uint64_t bits) : m_bits(bits) {}

        static constexpr ChannelSet all(std::uint32_t channel_count)
        {
            return ChannelSet(channel_count >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << channel_count) - 1));
        }

        constexpr void insert(ChannelId c) { m_bits |= std::uint64_t{1} << c.value; }
        constexpr void erase(ChannelId c) { m_bits &= ~(std::uint64_t{1} << c.value); }
        constexpr bool contains(ChannelId c) const { return (m_bits >> c.value) & 1u; }
        constexpr bool empty() const { return m_bits == 0; }
        constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(m_bits)); }
        constexpr std::uint64_t bits() const { return m_bits; }

        std::vector<ChannelId> to_vector() const
        {
            std::vector<ChannelId> out;
            for (std::uint32_t c = 0; c < kMaxChannels; ++c)
            {
                if ((m_bits >> c) & 1u)
                {
                    out.push_back(ChannelId{c});
                }
            }
            return out;
        }

        friend constexpr ChannelSet operator&(ChannelSet a, ChannelSet b) { return ChannelSet(a.m_bits & b.m_bits); }
        friend constexpr bool operator==(ChannelSet, ChannelSet) = default;

    private:
        std::uint64_t m_bits = 0;
    };

    struct Position
    {
        double x = 0.0;
        double y = 0.0;

        friend constexpr bool operator==(Position, Position) = default;
    };

    enum class NodeKind
    {
        Primary,
        Secondary
    };

    enum class Role
    {
        Undecided,
        Member,
        ClusterHead
    };

    struct Node
    {
        NodeId id;
        NodeKind kind = NodeKind::Secondary;
        Position pos;
        double radio_range = 0.0;
        // PU: its licensed channel. SU: channels currently sensed free.
        ChannelSet channels;
        // SU only: channels the radio can tune to; sensing never frees anything outside it.
        ChannelSet capable;
        // PU only: whether the licensed channel is currently occupied.
        bool active = false;
        double energy = 0.0;
        double throughput = 0.0;
        Role role = Role::Undecided;
        std::optional<ClusterId> cluster;
        // Display name; empty means "N<id>".
        std::string label;

        bool is_primary() const { return kind == NodeKind::Primary; }
        bool is_secondary() const { return kind == NodeKind::Secondary; }
        std::string name() const { return label.empty() ? "N" + std::to_string(id.value) : label; }

        friend bool operator==(const Node &, const Node &) = default;
    };

    struct SimConfig
    {
        double area_side = 1000.0;
        std::uint32_t n_primary = 20;
        std::uint32_t n_secondary = 80;
        std::uint32_t channel_count = 6;
        double radio_range = 700.0;
        std::uint32_t hmax = 10;
        // Destination-head collection window; <= 0 selects 4 * link_delay * hmax.
        double tr = 0.0;
        double hello_period = 1.0;
        std::uint32_t knn_k = 3;
        // 0 selects round(sqrt(n_secondary)).
        std::uint32_t kmeans_k = 0;
        double link_delay = 1.0;
        // Initial PU occupancy probability, and per-epoch flip probability when pu_epoch > 0.
        double pu_activity_rate = 0.5;
        double pu_epoch = 0.0;
        // Random waypoint mobility for SUs (off for discovery sweeps).
        bool mobility = false;
        double mobility_speed = 5.0;
        double mobility_pause = 2.0;
        double mobility_step = 1.0;
        double energy_min = 0.0;
        double energy_max = 1.0;
        double throughput_min = 1.0;
        double throughput_max = 100.0;
        std::uint64_t seed = 1;

        std::uint32_t effective_kmeans_k() const;
        double effective_tr() const;
        /// Latest time a source waits for its reply before declaring the discovery failed.
        double discovery_deadline() const;
        /// Throws ConfigError naming the offending field.
        void validate() const;

        friend bool operator==(const SimConfig &, const SimConfig &) = default;
    };

    struct World
    {
        SimConfig config;
        std::vector<Node> nodes;

        const Node &node(NodeId id) const { return nodes.at(id.value); }
        Node &node(NodeId id) { return nodes.at(id.value); }
        std::vector<NodeId> secondary_ids() const;
        std::vector<NodeId> primary_ids() const;

        friend bool operator==(const World &, const World &) = default;
    };
}
