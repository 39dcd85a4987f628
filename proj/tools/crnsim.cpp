#include "crn/cli_config.hpp"
#include "crn/fixture.hpp"
#include "crn/metrics.hpp"
#include "crn/world.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#ifndef CRN_FIXTURE_DIR
#define CRN_FIXTURE_DIR "fixtures"
#endif

namespace
{
    enum Exit
    {
        Ok = 0,
        IoError = 1,
        BadConfig = 2,
        Invariant = 3
    };

    struct Flags
    {
        std::string config;
        std::string protocol;
        std::uint64_t seed = 0;
        std::uint32_t seeds = 0;
        std::string ncr;
        std::string trace;
        std::string out;
        bool svg = false;
        std::string fixture;
    };

    crn::CliConfig resolve(const Flags &f)
    {
        crn::CliConfig c;
        if (!f.config.empty())
            c = crn::cli_config_from_json(crn::load_json_file(f.config));
        if (!f.protocol.empty())
        {
            c.protocol = crn::parse_protocol(f.protocol);
            c.sweep.protocols = {c.protocol};
        }
        if (f.seed != 0)
        {
            c.sweep.base.seed = f.seed;
            if (f.seeds == 0)
            {
                const auto n = c.sweep.seeds.size();
                c.sweep.seeds.clear();
                for (std::uint64_t s = f.seed; s < f.seed + n; ++s)
                    c.sweep.seeds.push_back(s);
            }
        }
        if (f.seeds != 0)
        {
            const std::uint64_t first = f.seed != 0 ? f.seed : 1;
            c.sweep.seeds.clear();
            for (std::uint64_t s = first; s < first + f.seeds; ++s)
                c.sweep.seeds.push_back(s);
        }
        if (!f.ncr.empty())
            c.sweep.n_cr = crn::parse_uint_list(f.ncr, "--ncr");
        if (!f.trace.empty())
            c.trace_path = f.trace;
        if (!f.out.empty())
            c.out_dir = f.out;
        c.svg = f.svg;
        return c;
    }

    std::ofstream open_out(const std::string &path)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw std::ios_base::failure("cannot write '" + path + "'");
        return out;
    }

    void write_trace(const crn::Simulator &sim, const std::string &path)
    {
        auto out = open_out(path);
        sim.write_trace(out);
    }

    int cmd_generate(const Flags &f)
    {
        const auto c = resolve(f);
        crn::SimConfig cfg = c.sweep.base;
        if (!f.ncr.empty())
        {
            if (c.sweep.n_cr.size() != 1)
                throw crn::ConfigError("invalid value for '--ncr': generate takes a single population");
            cfg = c.sweep.config_for(c.sweep.n_cr.front(), cfg.seed);
        }
        cfg.validate();
        crn::World world = crn::generate_scenario(cfg);
        const crn::Clustering clustering = crn::form_clusters(world, cfg.seed);
        std::filesystem::create_directories(c.out_dir);
        const auto scenario = (std::filesystem::path(c.out_dir) / "scenario.json").string();
        const auto clusters = (std::filesystem::path(c.out_dir) / "clusters.json").string();
        crn::save_json_file(scenario, crn::to_json(world));
        crn::save_json_file(clusters, crn::to_json(clustering, world));
        std::cout << "wrote " << scenario << " and " << clusters << " (" << clustering.clusters().size()
                  << " clusters)\n";
        return Ok;
    }

    int cmd_run(const Flags &f)
    {
        const auto c = resolve(f);
        crn::SimConfig cfg = c.sweep.base;
        std::uint32_t n_cr = cfg.n_primary + cfg.n_secondary;
        if (!f.ncr.empty())
        {
            if (c.sweep.n_cr.size() != 1)
                throw crn::ConfigError("invalid value for '--ncr': run takes a single population");
            n_cr = c.sweep.n_cr.front();
            cfg = c.sweep.config_for(n_cr, cfg.seed);
        }
        cfg.validate();
        const auto episode = crn::run_episode(cfg, c.protocol, c.trace_path.has_value());
        const auto &m = episode.metrics;
        std::cout << "protocol=" << crn::protocol_name(c.protocol) << " seed=" << cfg.seed << " n_cr=" << n_cr
                  << " src=" << episode.src.value << " dst=" << episode.dst.value << " rreq=" << m.rreq_count
                  << " rrep=" << m.rrep_count
                  << " delay=" << (m.routing_delay ? crn::format_number(*m.routing_delay) : std::string("-"))
                  << " success=" << (m.success ? 1 : 0) << '\n';
        if (c.trace_path)
            write_trace(*episode.sim, *c.trace_path);
        return Ok;
    }

    int cmd_sweep(const Flags &f)
    {
        const auto c = resolve(f);
        const auto rows = crn::run_sweep_runs(c.sweep);
        const auto points = crn::aggregate(rows);
        std::filesystem::create_directories(c.out_dir);
        const std::filesystem::path dir(c.out_dir);
        {
            auto out = open_out((dir / "runs.csv").string());
            crn::write_runs_csv(out, rows);
        }
        {
            auto out = open_out((dir / "summary.csv").string());
            crn::write_points_csv(out, points);
        }
        crn::write_figure_series(c.out_dir, points, c.svg);
        if (c.sweep.protocols.size() == 2)
        {
            const auto report = crn::compare(points, c.sweep.base.link_delay);
            auto out = open_out((dir / "report.txt").string());
            crn::write_report(out, report);
            crn::write_report(std::cout, report);
        }
        crn::write_points_csv(std::cout, points);
        return Ok;
    }

    int cmd_fig3(const Flags &f)
    {
        const std::string path = f.fixture.empty() ? std::string(CRN_FIXTURE_DIR) + "/figure3.json" : f.fixture;
        crn::Fixture fx = crn::load_fixture(path);
        const crn::NodeId src = fx.src, dst = fx.dst;
        const auto episode = crn::run_crp_episode(std::move(fx.world), std::move(fx.clustering), src, dst, !f.trace.empty());
        const crn::World &world = episode.sim->world();
        const auto &rec = episode.crp->records().front();
        if (rec.success)
        {
            std::cout << "heads " << crn::format_head_path(world, rec.head_path) << '\n';
            std::cout << "route " << crn::format_route(world, rec.route) << '\n';
        }
        else
        {
            std::cout << "discovery failed: "
                      << (rec.failure == crn::RerrCause::NoRelay ? "NoRelay (no member shares a channel with both hops)"
                                                                 : "no reply before the deadline")
                      << '\n';
        }
        for (const crn::NodeId h : episode.crp->clustering().heads())
        {
            const auto &drops = episode.crp->head_state(h).drops;
            std::cout << world.node(h).name() << " drops duplicate=" << drops.duplicate << " hmax=" << drops.hmax
                      << " loop=" << drops.loop << '\n';
        }
        if (!f.trace.empty())
            write_trace(*episode.sim, f.trace);
        return Ok;
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"Cluster-based cognitive radio routing simulator"};
    app.require_subcommand(1);
    Flags flags;

    auto common = [&](CLI::App *sub) {
        sub->add_option("--config", flags.config, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", flags.seed, "Master seed (first seed of a sweep)");
        sub->add_option("--ncr", flags.ncr, "Comma-separated CR population sizes");
        sub->add_option("--out", flags.out, "Output directory");
    };

    auto *gen = app.add_subcommand("generate", "Write a scenario and its cluster dump");
    common(gen);

    auto *run = app.add_subcommand("run", "One discovery episode");
    common(run);
    run->add_option("--protocol", flags.protocol, "crp or aodv");
    run->add_option("--trace", flags.trace, "Write the event trace to PATH");

    auto *sweep = app.add_subcommand("sweep", "Seed-averaged sweep over CR populations");
    common(sweep);
    sweep->add_option("--protocol", flags.protocol, "Restrict to one protocol");
    sweep->add_option("--seeds", flags.seeds, "Number of seeds");
    sweep->add_flag("--svg", flags.svg, "Also write SVG charts");

    auto *fig3 = app.add_subcommand("fig3", "Run the shipped four-cluster fixture");
    fig3->add_option("--fixture", flags.fixture, "Fixture JSON")->check(CLI::ExistingFile);
    fig3->add_option("--trace", flags.trace, "Write the event trace to PATH");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? Ok : BadConfig;
    }

    try
    {
        if (*gen)
            return cmd_generate(flags);
        if (*run)
            return cmd_run(flags);
        if (*sweep)
            return cmd_sweep(flags);
        return cmd_fig3(flags);
    }
    catch (const crn::ConfigError &e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return BadConfig;
    }
    catch (const crn::InvariantError &e)
    {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return Invariant;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return IoError;
    }
}
