#include "crn/world.hpp"

#include "crn/rng.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace crn
{
    std::uint32_t SimConfig::effective_kmeans_k() const
    {
        if (kmeans_k > 0)
        {
            return kmeans_k;
        }
        const auto k = static_cast<std::uint32_t>(std::lround(std::sqrt(static_cast<double>(n_secondary))));
        return k < 1 ? 1 : k;
    }

    double SimConfig::effective_tr() const
    {
        return tr > 0.0 ? tr : 4.0 * link_delay * static_cast<double>(hmax);
    }

    double SimConfig::discovery_deadline() const
    {
        return effective_tr() + 2.0 * link_delay * static_cast<double>(hmax);
    }

    void SimConfig::validate() const
    {
        auto fail = [](const std::string &field, const std::string &why) {
            throw ConfigError("invalid config field '" + field + "': " + why);
        };
        if (!(area_side > 0.0))
            fail("area_side", "must be > 0");
        if (channel_count == 0)
            fail("channel_count", "must be >= 1");
        if (channel_count > ChannelSet::kMaxChannels)
            fail("channel_count", "must be <= 64");
        if (radio_range < 0.0)
            fail("radio_range", "must be >= 0");
        if (hmax < 1)
            fail("hmax", "must be >= 1");
        if (tr < 0.0)
            fail("tr", "must be > 0 (or 0 for the default)");
        if (!(link_delay > 0.0))
            fail("link_delay", "must be > 0");
        if (!(hello_period > 0.0))
            fail("hello_period", "must be > 0");
        if (knn_k < 1)
            fail("knn_k", "must be >= 1");
        if (pu_activity_rate < 0.0 || pu_activity_rate > 1.0)
            fail("pu_activity_rate", "must lie in [0, 1]");
        if (pu_epoch < 0.0)
            fail("pu_epoch", "must be >= 0");
        if (mobility && !(mobility_speed > 0.0))
            fail("mobility_speed", "must be > 0 when mobility is on");
        if (mobility && !(mobility_step > 0.0))
            fail("mobility_step", "must be > 0 when mobility is on");
        if (mobility_pause < 0.0)
            fail("mobility_pause", "must be >= 0");
        if (energy_min < 0.0 || energy_max < energy_min)
            fail("energy_min", "need 0 <= energy_min <= energy_max");
        if (throughput_min < 0.0 || throughput_max < throughput_min)
            fail("throughput_min", "need 0 <= throughput_min <= throughput_max");
    }

    std::vector<NodeId> World::secondary_ids() const
    {
        std::vector<NodeId> out;
        for (const auto &n : nodes)
        {
            if (n.is_secondary())
                out.push_back(n.id);
        }
        return out;
    }

    std::vector<NodeId> World::primary_ids() const
    {
        std::vector<NodeId> out;
        for (const auto &n : nodes)
        {
            if (n.is_primary())
                out.push_back(n.id);
        }
        return out;
    }

    double distance(Position a, Position b)
    {
        return std::hypot(a.x - b.x, a.y - b.y);
    }

    bool in_range(const Node &a, const Node &b)
    {
        return distance(a.pos, b.pos) <= std::min(a.radio_range, b.radio_range);
    }

    ChannelSet common_channels(const Node &a, const Node &b)
    {
        return a.channels & b.channels;
    }

    void refresh_spectrum(World &world)
    {
        const ChannelSet all = ChannelSet::all(world.config.channel_count);
        for (auto &su : world.nodes)
        {
            if (!su.is_secondary())
                continue;
            ChannelSet free = su.capable & all;
            for (const auto &pu : world.nodes)
            {
                if (pu.is_primary() && pu.active && in_range(pu, su))
                {
                    for (ChannelId c : pu.channels.to_vector())
                        free.erase(c);
                }
            }
            su.channels = free;
        }
    }

    World generate_scenario(const SimConfig &config)
    {
        config.validate();
        World world;
        world.config = config;

        Rng placement(config.seed, Stream::Placement);
        Rng spectrum(config.seed, Stream::Spectrum);
        Rng attributes(config.seed, Stream::Attributes);

        const std::uint32_t total = config.n_primary + config.n_secondary;
        world.nodes.reserve(total);
        for (std::uint32_t i = 0; i < total; ++i)
        {
            Node n;
            n.id = NodeId{i};
            n.kind = i < config.n_primary ? NodeKind::Primary : NodeKind::Secondary;
            n.pos = Position{placement.uniform(0.0, config.area_side), placement.uniform(0.0, config.area_side)};
            n.radio_range = config.radio_range;
            if (n.is_primary())
            {
                n.channels.insert(ChannelId{static_cast<std::uint32_t>(spectrum.below(config.channel_count))});
                n.active = spectrum.bernoulli(config.pu_activity_rate);
            }
            else
            {
                n.capable = ChannelSet::all(config.channel_count);
                n.energy = attributes.uniform(config.energy_min, config.energy_max);
                n.throughput = attributes.uniform(config.throughput_min, config.throughput_max);
            }
            world.nodes.push_back(std::move(n));
        }
        refresh_spectrum(world);
        return world;
    }

    namespace
    {
        template <class T>
        void read_field(const nlohmann::json &j, const char *key, T &out)
        {
            auto it = j.find(key);
            if (it == j.end())
                return;
            try
            {
                out = it->get<T>();
            }
            catch (const nlohmann::json::exception &)
            {
                throw ConfigError(std::string("invalid config field '") + key + "': wrong type (" + it->dump() + ")");
            }
        }

        const char *kind_name(NodeKind k) { return k == NodeKind::Primary ? "primary" : "secondary"; }

        const char *role_name(Role r)
        {
            switch (r)
            {
            case Role::Member:
                return "member";
            case Role::ClusterHead:
                return "head";
            default:
                return "undecided";
            }
        }

        Role role_from(const std::string &s)
        {
            if (s == "member")
                return Role::Member;
            if (s == "head")
                return Role::ClusterHead;
            if (s == "undecided")
                return Role::Undecided;
            throw ConfigError("invalid node field 'role': " + s);
        }
    }

    nlohmann::json to_json(const SimConfig &c)
    {
        return nlohmann::json{
            {"area_side", c.area_side},
            {"n_primary", c.n_primary},
            {"n_secondary", c.n_secondary},
            {"channel_count", c.channel_count},
            {"radio_range", c.radio_range},
            {"hmax", c.hmax},
            {"tr", c.tr},
            {"hello_period", c.hello_period},
            {"knn_k", c.knn_k},
            {"kmeans_k", c.kmeans_k},
            {"link_delay", c.link_delay},
            {"pu_activity_rate", c.pu_activity_rate},
            {"pu_epoch", c.pu_epoch},
            {"mobility", c.mobility},
            {"mobility_speed", c.mobility_speed},
            {"mobility_pause", c.mobility_pause},
            {"mobility_step", c.mobility_step},
            {"energy_min", c.energy_min},
            {"energy_max", c.energy_max},
            {"throughput_min", c.throughput_min},
            {"throughput_max", c.throughput_max},
            {"seed", c.seed},
        };
    }

    SimConfig config_from_json(const nlohmann::json &j, SimConfig c)
    {
        if (!j.is_object())
            throw ConfigError("config must be a JSON object");
        const nlohmann::json known = to_json(c);
        for (auto it = j.begin(); it != j.end(); ++it)
        {
            if (!known.contains(it.key()))
                throw ConfigError("unknown config field '" + it.key() + "'");
        }
        read_field(j, "area_side", c.area_side);
        read_field(j, "n_primary", c.n_primary);
        read_field(j, "n_secondary", c.n_secondary);
        read_field(j, "channel_count", c.channel_count);
        read_field(j, "radio_range", c.radio_range);
        read_field(j, "hmax", c.hmax);
        read_field(j, "tr", c.tr);
        read_field(j, "hello_period", c.hello_period);
        read_field(j, "knn_k", c.knn_k);
        read_field(j, "kmeans_k", c.kmeans_k);
        read_field(j, "link_delay", c.link_delay);
        read_field(j, "pu_activity_rate", c.pu_activity_rate);
        read_field(j, "pu_epoch", c.pu_epoch);
        read_field(j, "mobility", c.mobility);
        read_field(j, "mobility_speed", c.mobility_speed);
        read_field(j, "mobility_pause", c.mobility_pause);
        read_field(j, "mobility_step", c.mobility_step);
        read_field(j, "energy_min", c.energy_min);
        read_field(j, "energy_max", c.energy_max);
        read_field(j, "throughput_min", c.throughput_min);
        read_field(j, "throughput_max", c.throughput_max);
        read_field(j, "seed", c.seed);
        return c;
    }

    namespace
    {
        nlohmann::json ids_of(ChannelSet set)
        {
            nlohmann::json out = nlohmann::json::array();
            for (ChannelId c : set.to_vector())
                out.push_back(c.value);
            return out;
        }
    }

    nlohmann::json to_json(const World &world)
    {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto &n : world.nodes)
        {
            nlohmann::json jn{
                {"id", n.id.value},
                {"kind", kind_name(n.kind)},
                {"x", n.pos.x},
                {"y", n.pos.y},
                {"radio_range", n.radio_range},
                {"channels", ids_of(n.channels)},
                {"capable", ids_of(n.capable)},
                {"active", n.active},
                {"energy", n.energy},
                {"throughput", n.throughput},
                {"role", role_name(n.role)},
                {"cluster", n.cluster ? nlohmann::json(*n.cluster) : nlohmann::json(nullptr)},
            };
            if (!n.label.empty())
                jn["label"] = n.label;
            nodes.push_back(std::move(jn));
        }
        return nlohmann::json{{"config", to_json(world.config)}, {"nodes", nodes}};
    }

    World world_from_json(const nlohmann::json &j)
    {
        World world;
        if (j.contains("config"))
            world.config = config_from_json(j.at("config"));
        if (!j.contains("nodes") || !j.at("nodes").is_array())
            throw ConfigError("world document needs a 'nodes' array");
        try
        {
            for (const auto &jn : j.at("nodes"))
            {
                Node n;
                n.id = NodeId{jn.at("id").get<std::uint32_t>()};
                if (n.id.value != world.nodes.size())
                    throw ConfigError("node ids must be dense and ordered from 0 (got " + std::to_string(n.id.value) + ")");
                const auto kind = jn.at("kind").get<std::string>();
                if (kind != "primary" && kind != "secondary")
                    throw ConfigError("invalid node field 'kind': " + kind);
                n.kind = kind == "primary" ? NodeKind::Primary : NodeKind::Secondary;
                n.pos = Position{jn.at("x").get<double>(), jn.at("y").get<double>()};
                n.radio_range = jn.value("radio_range", world.config.radio_range);
                for (const auto &c : jn.value("channels", nlohmann::json::array()))
                {
                    const auto ch = c.get<std::uint32_t>();
                    if (ch >= ChannelSet::kMaxChannels)
                        throw ConfigError("channel id out of range: " + std::to_string(ch));
                    n.channels.insert(ChannelId{ch});
                }
                if (n.is_secondary())
                {
                    n.capable = ChannelSet::all(world.config.channel_count);
                    if (jn.contains("capable"))
                    {
                        n.capable = ChannelSet{};
                        for (const auto &c : jn.at("capable"))
                        {
                            const auto ch = c.get<std::uint32_t>();
                            if (ch >= ChannelSet::kMaxChannels)
                                throw ConfigError("channel id out of range: " + std::to_string(ch));
                            n.capable.insert(ChannelId{ch});
                        }
                    }
                }
                n.active = jn.value("active", false);
                n.energy = jn.value("energy", 0.0);
                n.throughput = jn.value("throughput", 0.0);
                n.role = role_from(jn.value("role", std::string("undecided")));
                if (jn.contains("cluster") && !jn.at("cluster").is_null())
                    n.cluster = jn.at("cluster").get<ClusterId>();
                n.label = jn.value("label", std::string{});
                world.nodes.push_back(std::move(n));
            }
        }
        catch (const nlohmann::json::exception &e)
        {
            throw ConfigError(std::string("malformed world document: ") + e.what());
        }
        return world;
    }

    nlohmann::json load_json_file(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
            throw ConfigError("cannot open '" + path + "'");
        try
        {
            return nlohmann::json::parse(in);
        }
        catch (const nlohmann::json::parse_error &e)
        {
            throw ConfigError("cannot parse '" + path + "': " + e.what());
        }
    }

    void save_json_file(const std::string &path, const nlohmann::json &j)
    {
        std::ofstream out(path);
        if (!out)
            throw std::runtime_error("cannot write '" + path + "'");
        out << j.dump(2) << '\n';
    }
}
