#pragma once

#include "crn/types.hpp"

#include "json.hpp"

#include <string>

namespace crn
{
    double distance(Position a, Position b);

    /// Symmetric radio connectivity; a distance equal to the smaller range still connects.
    bool in_range(const Node &a, const Node &b);

    ChannelSet common_channels(const Node &a, const Node &b);

    /// Builds a random world from config.seed. Node ids 0..n_primary-1 are PUs, the rest SUs.
    World generate_scenario(const SimConfig &config);

    /// Recomputes every SU's free-channel set from the current PU activity and positions.
    /// A channel is unavailable to an SU iff an active PU licensed on it is in range.
    void refresh_spectrum(World &world);

    nlohmann::json to_json(const SimConfig &config);
    /// Missing keys keep their defaults; unknown keys or mistyped values raise ConfigError.
    SimConfig config_from_json(const nlohmann::json &j, SimConfig base = {});

    nlohmann::json to_json(const World &world);
    World world_from_json(const nlohmann::json &j);

    nlohmann::json load_json_file(const std::string &path);
    void save_json_file(const std::string &path, const nlohmann::json &j);
}
