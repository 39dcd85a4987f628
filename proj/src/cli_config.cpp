#include "crn/cli_config.hpp"

#include "crn/world.hpp"

#include <charconv>

namespace crn
{
    std::vector<std::uint32_t> parse_uint_list(const std::string &text, const std::string &field)
    {
        std::vector<std::uint32_t> out;
        std::size_t start = 0;
        while (start <= text.size())
        {
            const auto comma = text.find(',', start);
            const auto end = comma == std::string::npos ? text.size() : comma;
            std::uint32_t v = 0;
            const char *first = text.data() + start;
            const char *last = text.data() + end;
            const auto res = std::from_chars(first, last, v);
            if (first == last || res.ec != std::errc() || res.ptr != last)
                throw ConfigError("invalid value for '" + field + "': '" + text + "' is not a list of counts");
            out.push_back(v);
            if (comma == std::string::npos)
                break;
            start = comma + 1;
        }
        return out;
    }

    CliConfig cli_config_from_json(const nlohmann::json &j)
    {
        if (!j.is_object())
            throw ConfigError("config document must be a JSON object");
        CliConfig c;
        nlohmann::json sim = j;
        if (j.contains("sweep"))
        {
            const auto &s = j.at("sweep");
            sim.erase("sweep");
            if (!s.is_object())
                throw ConfigError("invalid config field 'sweep': must be an object");
            for (const auto &[key, value] : s.items())
            {
                try
                {
                    if (key == "n_cr")
                        c.sweep.n_cr = value.get<std::vector<std::uint32_t>>();
                    else if (key == "seeds")
                        c.sweep.seeds = value.get<std::vector<std::uint64_t>>();
                    else if (key == "pu_fraction")
                    {
                        if (!value.is_number())
                            throw ConfigError("invalid config field 'sweep.pu_fraction': expected a number");
                        c.sweep.pu_fraction = value.get<double>();
                    }
                    else if (key == "protocols")
                    {
                        c.sweep.protocols.clear();
                        for (const auto &p : value)
                            c.sweep.protocols.push_back(parse_protocol(p.get<std::string>()));
                    }
                    else
                        throw ConfigError("unknown config field 'sweep." + key + "'");
                }
                catch (const nlohmann::json::exception &)
                {
                    throw ConfigError("invalid config field 'sweep." + key + "': wrong type");
                }
            }
        }
        c.sweep.base = config_from_json(sim);
        c.sweep.base.validate();
        return c;
    }

    nlohmann::json to_json(const CliConfig &c)
    {
        nlohmann::json j = to_json(c.sweep.base);
        nlohmann::json protocols = nlohmann::json::array();
        for (ProtocolKind p : c.sweep.protocols)
            protocols.push_back(std::string(protocol_name(p)));
        j["sweep"] = {{"n_cr", c.sweep.n_cr},
                      {"seeds", c.sweep.seeds},
                      {"pu_fraction", c.sweep.pu_fraction},
                      {"protocols", protocols}};
        return j;
    }
}
