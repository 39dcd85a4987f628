#pragma once

#include "crn/metrics.hpp"

#include "json.hpp"

#include <optional>
#include <string>

namespace crn
{
    /// Everything a command line run needs: simulation knobs, sweep grid, outputs.
    struct CliConfig
    {
        SweepSpec sweep;
        ProtocolKind protocol = ProtocolKind::Crp;
        std::string out_dir = "results";
        std::optional<std::string> trace_path;
        bool svg = false;
    };

    /// Config document: SimConfig keys at top level plus an optional "sweep" object
    /// with "n_cr", "seeds", "pu_fraction" and "protocols". Unknown keys are errors.
    CliConfig cli_config_from_json(const nlohmann::json &j);
    nlohmann::json to_json(const CliConfig &c);

    /// Parses "20,40,60"; throws ConfigError naming `field` on malformed input.
    std::vector<std::uint32_t> parse_uint_list(const std::string &text, const std::string &field);
}
