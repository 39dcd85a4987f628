#include "crn/fixture.hpp"

#include "crn/world.hpp"

namespace crn
{
    NodeId node_by_label(const World &world, const std::string &label)
    {
        for (const auto &n : world.nodes)
        {
            if (n.name() == label)
                return n.id;
        }
        throw ConfigError("fixture has no node labelled '" + label + "'");
    }

    namespace
    {
        NodeId endpoint(const World &world, const nlohmann::json &j, const char *field)
        {
            if (!j.contains(field))
                throw ConfigError(std::string("fixture field '") + field + "' is missing");
            const auto &v = j.at(field);
            if (v.is_string())
                return node_by_label(world, v.get<std::string>());
            if (v.is_number_unsigned() && v.get<std::uint32_t>() < world.nodes.size())
                return NodeId{v.get<std::uint32_t>()};
            throw ConfigError(std::string("fixture field '") + field + "' must name a node");
        }
    }

    Fixture load_fixture(const std::string &path)
    {
        const auto j = load_json_file(path);
        Fixture f;
        f.world = world_from_json(j);
        f.clustering = clustering_from_json(j, f.world);
        f.src = endpoint(f.world, j, "source");
        f.dst = endpoint(f.world, j, "destination");
        if (f.src == f.dst)
            throw ConfigError("fixture source and destination coincide");
        return f;
    }

    std::string format_route(const World &world, const std::vector<NodeId> &route)
    {
        std::string out = "{";
        for (std::size_t i = 0; i < route.size(); ++i)
        {
            if (i > 0)
                out += ", ";
            out += world.node(route[i]).name();
        }
        return out + "}";
    }

    std::string format_head_path(const World &world, const std::vector<NodeId> &heads)
    {
        std::string out;
        for (std::size_t i = 0; i < heads.size(); ++i)
        {
            if (i > 0)
                out += "->";
            const auto &c = world.node(heads[i]).cluster;
            out += c ? std::to_string(*c + 1) : world.node(heads[i]).name();
        }
        return out;
    }
}
