#include "crn/metrics.hpp"

#include "crn/world.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace crn
{
    std::string_view protocol_name(ProtocolKind p)
    {
        return p == ProtocolKind::Crp ? "crp" : "aodv";
    }

    ProtocolKind parse_protocol(std::string_view s)
    {
        if (s == "crp" || s == "CRP")
            return ProtocolKind::Crp;
        if (s == "aodv" || s == "AODV")
            return ProtocolKind::Aodv;
        throw ConfigError("unknown protocol '" + std::string(s) + "' (expected crp or aodv)");
    }

    std::pair<NodeId, NodeId> pick_endpoints(const World &world)
    {
        const auto sus = world.secondary_ids();
        if (sus.size() < 2)
            throw ConfigError("invalid config field 'n_secondary': need at least 2 secondary users for a discovery");
        Rng rng(world.config.seed, Stream::EndpointPair);
        const auto a = rng.below(sus.size());
        auto b = rng.below(sus.size() - 1);
        if (b >= a)
            ++b;
        return {sus[a], sus[b]};
    }

    namespace
    {
        SimTime episode_horizon(const SimConfig &cfg)
        {
            return cfg.discovery_deadline() + 2.0 * cfg.link_delay;
        }

        void schedule_dynamics(Simulator &sim, SimTime until)
        {
            const auto &cfg = sim.world().config;
            for (auto &[at, kind] : plan_pu_activity(sim.world(), until))
                sim.schedule(at, std::move(kind));
            for (auto &[at, kind] : plan_random_waypoint(sim.world(), until))
                sim.schedule(at, std::move(kind));
            if (cfg.mobility || cfg.pu_epoch > 0.0)
            {
                for (SimTime t = cfg.hello_period; t <= until; t += cfg.hello_period)
                    sim.schedule(t, ev::HelloTick{});
            }
        }

        RunMetrics metrics_of(const Simulator &sim, bool success, std::optional<SimTime> started,
                              std::optional<SimTime> completed)
        {
            RunMetrics m;
            m.rreq_count = sim.counters().rreq;
            m.rrep_count = sim.counters().rrep;
            m.success = success;
            if (success && started && completed)
                m.routing_delay = *completed - *started;
            return m;
        }

        void finish_crp(Episode &e)
        {
            const auto &records = e.crp->records();
            if (records.empty())
            {
                e.metrics = metrics_of(*e.sim, false, std::nullopt, std::nullopt);
                return;
            }
            const auto &rec = records.front();
            e.metrics = metrics_of(*e.sim, rec.success, rec.started, rec.completed);
        }
    }

    Episode run_crp_episode(World world, Clustering clustering, NodeId src, NodeId dst, bool trace)
    {
        Episode e;
        e.config = world.config;
        e.protocol = ProtocolKind::Crp;
        e.src = src;
        e.dst = dst;
        const SimTime until = episode_horizon(e.config);
        e.sim = std::make_unique<Simulator>(std::move(world), e.config.link_delay);
        e.sim->enable_trace(trace);
        e.crp = std::make_unique<CrpProtocol>(e.config, std::move(clustering));
        e.crp->bootstrap(*e.sim);
        schedule_dynamics(*e.sim, until);
        e.crp->initiate_discovery(*e.sim, src, dst);
        e.sim->run(*e.crp, until);
        finish_crp(e);
        return e;
    }

    Episode run_episode(const SimConfig &config, ProtocolKind protocol, bool trace)
    {
        World world = generate_scenario(config);
        const auto [src, dst] = pick_endpoints(world);
        if (protocol == ProtocolKind::Crp)
        {
            Clustering clustering = form_clusters(world, config.seed);
            return run_crp_episode(std::move(world), std::move(clustering), src, dst, trace);
        }

        Episode e;
        e.config = config;
        e.protocol = protocol;
        e.src = src;
        e.dst = dst;
        const SimTime until = episode_horizon(config);
        e.sim = std::make_unique<Simulator>(std::move(world), config.link_delay);
        e.sim->enable_trace(trace);
        e.aodv = std::make_unique<AodvProtocol>(config);
        schedule_dynamics(*e.sim, until);
        const RequestKey key = e.aodv->aodv_discover(*e.sim, src, dst);
        e.sim->run(*e.aodv, until);
        const AodvRecord *rec = e.aodv->record(key);
        e.metrics = metrics_of(*e.sim, rec && rec->success, rec ? std::optional(rec->started) : std::nullopt,
                               rec ? rec->completed : std::nullopt);
        return e;
    }

    RunMetrics run_once(const SimConfig &config, ProtocolKind protocol)
    {
        return run_episode(config, protocol).metrics;
    }

    SimConfig SweepSpec::config_for(std::uint32_t n_cr, std::uint64_t seed) const
    {
        SimConfig c = base;
        c.n_primary = static_cast<std::uint32_t>(std::lround(pu_fraction * n_cr));
        c.n_secondary = n_cr - c.n_primary;
        c.seed = seed;
        return c;
    }

    void SweepSpec::validate() const
    {
        if (seeds.empty())
            throw ConfigError("invalid sweep field 'seeds': need at least one seed");
        if (n_cr.empty())
            throw ConfigError("invalid sweep field 'n_cr': empty grid");
        if (protocols.empty())
            throw ConfigError("invalid sweep field 'protocols': empty list");
        if (pu_fraction < 0.0 || pu_fraction >= 1.0)
            throw ConfigError("invalid sweep field 'pu_fraction': must lie in [0, 1)");
        base.validate();
        for (std::uint32_t n : n_cr)
        {
            const SimConfig c = config_for(n, 0);
            if (c.n_secondary < 2)
                throw ConfigError("invalid sweep field 'n_cr': " + std::to_string(n) + " users leave fewer than 2 SUs");
            if (c.effective_kmeans_k() > c.n_secondary)
                throw ConfigError("invalid sweep field 'n_cr': " + std::to_string(n) + " users cannot form " +
                                  std::to_string(c.effective_kmeans_k()) + " clusters");
        }
    }

    namespace
    {
        struct Task
        {
            std::uint32_t n_cr;
            ProtocolKind protocol;
            std::uint64_t seed;
        };

        std::vector<Task> tasks_of(const SweepSpec &spec)
        {
            std::vector<Task> tasks;
            for (std::uint32_t n : spec.n_cr)
                for (ProtocolKind p : spec.protocols)
                    for (std::uint64_t s : spec.seeds)
                        tasks.push_back(Task{n, p, s});
            return tasks;
        }

        RunRow run_task(const SweepSpec &spec, const Task &t)
        {
            return RunRow{t.n_cr, t.protocol, t.seed, run_once(spec.config_for(t.n_cr, t.seed), t.protocol)};
        }
    }

    std::vector<RunRow> run_sweep_runs_serial(const SweepSpec &spec)
    {
        spec.validate();
        const auto tasks = tasks_of(spec);
        std::vector<RunRow> rows;
        rows.reserve(tasks.size());
        for (const auto &t : tasks)
            rows.push_back(run_task(spec, t));
        return rows;
    }

    std::vector<RunRow> run_sweep_runs(const SweepSpec &spec)
    {
        spec.validate();
        const auto tasks = tasks_of(spec);
        std::vector<RunRow> rows(tasks.size());
        std::vector<std::exception_ptr> errors(tasks.size());
        const auto count = static_cast<std::ptrdiff_t>(tasks.size());

#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < count; ++i)
        {
            try
            {
                rows[static_cast<std::size_t>(i)] = run_task(spec, tasks[static_cast<std::size_t>(i)]);
            }
            catch (...)
            {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }

        for (const auto &e : errors)
        {
            if (e)
                std::rethrow_exception(e);
        }
        return rows;
    }

    std::vector<SweepPoint> aggregate(const std::vector<RunRow> &rows)
    {
        struct Acc
        {
            double rreq = 0, rrep = 0, delay = 0;
            std::uint32_t runs = 0, ok = 0;
        };
        std::map<std::pair<std::uint32_t, ProtocolKind>, Acc> acc;
        for (const auto &r : rows)
        {
            auto &a = acc[{r.n_cr, r.protocol}];
            a.rreq += static_cast<double>(r.metrics.rreq_count);
            a.rrep += static_cast<double>(r.metrics.rrep_count);
            ++a.runs;
            if (r.metrics.success)
            {
                ++a.ok;
                a.delay += r.metrics.routing_delay.value_or(0.0);
            }
        }
        std::vector<SweepPoint> out;
        for (const auto &[key, a] : acc)
        {
            SweepPoint p;
            p.n_cr = key.first;
            p.protocol = key.second;
            p.n_seeds = a.runs;
            p.mean_rreq = a.rreq / a.runs;
            p.mean_rrep = a.rrep / a.runs;
            p.success_rate = static_cast<double>(a.ok) / a.runs;
            if (a.ok > 0)
                p.mean_delay = a.delay / a.ok;
            out.push_back(p);
        }
        return out;
    }

    std::string_view verdict_name(Verdict v)
    {
        switch (v)
        {
        case Verdict::Pass:
            return "PASS";
        case Verdict::Fail:
            return "FAIL";
        case Verdict::Insufficient:
            return "INSUFFICIENT POINTS";
        default:
            return "NO VERDICT";
        }
    }

    bool TrendReport::all_pass() const
    {
        return !trends.empty() &&
               std::all_of(trends.begin(), trends.end(), [](const TrendResult &t) { return t.verdict == Verdict::Pass; });
    }

    TrendReport compare(const std::vector<SweepPoint> &points, double delay_tolerance)
    {
        TrendReport report;
        std::map<std::uint32_t, const SweepPoint *> crp, aodv;
        for (const auto &p : points)
        {
            (p.protocol == ProtocolKind::Crp ? crp : aodv)[p.n_cr] = &p;
            if (p.n_seeds < 2)
                report.low_confidence = true;
        }

        const char *names[] = {"A (RREQ count)", "B (RREP count)", "C (routing delay)", "D (success rate)"};
        for (const char *n : names)
            report.trends.push_back(TrendResult{n, Verdict::NoVerdict, ""});

        std::vector<std::uint32_t> grid;
        for (const auto &[n, p] : crp)
        {
            if (!aodv.contains(n))
            {
                report.problem = "n_cr=" + std::to_string(n) + " has no AODV point";
                return report;
            }
            grid.push_back(n);
        }
        for (const auto &[n, p] : aodv)
        {
            if (!crp.contains(n))
            {
                report.problem = "n_cr=" + std::to_string(n) + " has no CRP point";
                return report;
            }
        }
        if (grid.empty())
        {
            report.problem = "no points to compare";
            return report;
        }

        bool degenerate = true;
        for (std::uint32_t n : grid)
        {
            const SweepPoint &c = *crp[n];
            const SweepPoint &a = *aodv[n];
            TrendDelta d;
            d.n_cr = n;
            d.rreq_gap = a.mean_rreq - c.mean_rreq;
            d.rrep_gap = a.mean_rrep - c.mean_rrep;
            if (a.mean_delay && c.mean_delay)
                d.delay_gap = *a.mean_delay - *c.mean_delay;
            d.success_gap = c.success_rate - a.success_rate;
            report.deltas.push_back(d);
            if (c.mean_rreq != a.mean_rreq || c.mean_rrep != a.mean_rrep || c.mean_delay != a.mean_delay ||
                c.success_rate != a.success_rate)
                degenerate = false;
        }
        if (degenerate)
        {
            for (auto &t : report.trends)
            {
                t.verdict = Verdict::Fail;
                t.detail = "degenerate: both protocols produced identical metrics";
            }
            return report;
        }

        const std::uint32_t last = grid.back();
        std::vector<std::uint32_t> upper;
        for (std::uint32_t n : grid)
        {
            if (n >= 40)
                upper.push_back(n);
        }

        // A
        {
            auto &t = report.trends[0];
            if (upper.empty())
            {
                t.verdict = Verdict::Insufficient;
                t.detail = "no n_cr >= 40";
            }
            else
            {
                bool below = true;
                for (std::uint32_t n : upper)
                    below = below && crp[n]->mean_rreq < aodv[n]->mean_rreq;
                if (!below)
                {
                    t.verdict = Verdict::Fail;
                    t.detail = "CRP RREQ not below AODV at some n_cr >= 40";
                }
                else if (upper.size() < 2)
                {
                    t.verdict = Verdict::Insufficient;
                    t.detail = "gap growth needs two points with n_cr >= 40";
                }
                else
                {
                    const double g0 = aodv[upper.front()]->mean_rreq - crp[upper.front()]->mean_rreq;
                    const double g1 = aodv[upper.back()]->mean_rreq - crp[upper.back()]->mean_rreq;
                    t.verdict = g1 > g0 ? Verdict::Pass : Verdict::Fail;
                    t.detail = "gap " + format_number(g0) + " -> " + format_number(g1);
                }
            }
        }
        // B
        {
            auto &t = report.trends[1];
            bool le = true;
            for (std::uint32_t n : grid)
                le = le && crp[n]->mean_rrep <= aodv[n]->mean_rrep;
            const bool strict = crp[last]->mean_rrep < aodv[last]->mean_rrep;
            t.verdict = le && strict ? Verdict::Pass : Verdict::Fail;
            t.detail = !le ? "CRP RREP above AODV at some n_cr" : (!strict ? "not strictly below at the largest n_cr" : "");
        }
        // C
        {
            auto &t = report.trends[2];
            bool defined = true;
            for (std::uint32_t n : grid)
                defined = defined && crp[n]->mean_delay && aodv[n]->mean_delay;
            if (!defined)
            {
                t.verdict = Verdict::Insufficient;
                t.detail = "a protocol had no successful run at some n_cr";
            }
            else
            {
                bool below = true;
                bool crp_up = true, aodv_up = true;
                for (std::size_t i = 0; i < grid.size(); ++i)
                {
                    below = below && *crp[grid[i]]->mean_delay < *aodv[grid[i]]->mean_delay;
                    if (i > 0)
                    {
                        crp_up = crp_up && *crp[grid[i]]->mean_delay >= *crp[grid[i - 1]]->mean_delay - delay_tolerance;
                        aodv_up = aodv_up && *aodv[grid[i]]->mean_delay >= *aodv[grid[i - 1]]->mean_delay - delay_tolerance;
                    }
                }
                t.verdict = below && crp_up && aodv_up ? Verdict::Pass : Verdict::Fail;
                if (!below)
                    t.detail = "CRP delay not below AODV at some n_cr";
                else if (!crp_up || !aodv_up)
                    t.detail = std::string(!crp_up ? "CRP" : "AODV") + " delay decreases by more than the tolerance";
            }
        }
        // D
        {
            auto &t = report.trends[3];
            bool ge = true;
            for (std::uint32_t n : grid)
                ge = ge && crp[n]->success_rate >= aodv[n]->success_rate;
            const bool high = crp[last]->success_rate >= 0.9;
            if (!ge || !high)
            {
                t.verdict = Verdict::Fail;
                t.detail = !ge ? "CRP success below AODV at some n_cr" : "CRP success below 0.9 at the largest n_cr";
            }
            else if (upper.size() < 2)
            {
                t.verdict = Verdict::Insufficient;
                t.detail = "gap growth needs two points with n_cr >= 40";
            }
            else
            {
                const double g0 = crp[upper.front()]->success_rate - aodv[upper.front()]->success_rate;
                const double g1 = crp[upper.back()]->success_rate - aodv[upper.back()]->success_rate;
                t.verdict = g1 >= g0 ? Verdict::Pass : Verdict::Fail;
                t.detail = "gap " + format_number(g0) + " -> " + format_number(g1);
            }
        }
        return report;
    }

    std::string format_number(double v)
    {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    }

    void write_runs_csv(std::ostream &out, const std::vector<RunRow> &rows)
    {
        out << "n_cr,protocol,seed,rreq,rrep,delay,success\n";
        for (const auto &r : rows)
        {
            out << r.n_cr << ',' << protocol_name(r.protocol) << ',' << r.seed << ',' << r.metrics.rreq_count << ','
                << r.metrics.rrep_count << ',' << (r.metrics.routing_delay ? format_number(*r.metrics.routing_delay) : "")
                << ',' << (r.metrics.success ? 1 : 0) << '\n';
        }
    }

    void write_points_csv(std::ostream &out, const std::vector<SweepPoint> &points)
    {
        out << "n_cr,protocol,mean_rreq,mean_rrep,mean_delay,success_rate\n";
        for (const auto &p : points)
        {
            out << p.n_cr << ',' << protocol_name(p.protocol) << ',' << format_number(p.mean_rreq) << ','
                << format_number(p.mean_rrep) << ',' << (p.mean_delay ? format_number(*p.mean_delay) : "") << ','
                << format_number(p.success_rate) << '\n';
        }
    }

    std::vector<RunRow> read_runs_csv(std::istream &in)
    {
        std::vector<RunRow> rows;
        std::string line;
        if (!std::getline(in, line) || line != "n_cr,protocol,seed,rreq,rrep,delay,success")
            throw ConfigError("per-run CSV: unexpected header");
        while (std::getline(in, line))
        {
            if (line.empty())
                continue;
            std::vector<std::string> f;
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ','))
                f.push_back(cell);
            if (f.size() == 6)
                f.emplace_back();
            if (f.size() != 7)
                throw ConfigError("per-run CSV: malformed line '" + line + "'");
            RunRow r;
            r.n_cr = static_cast<std::uint32_t>(std::stoul(f[0]));
            r.protocol = parse_protocol(f[1]);
            r.seed = std::stoull(f[2]);
            r.metrics.rreq_count = std::stoull(f[3]);
            r.metrics.rrep_count = std::stoull(f[4]);
            if (!f[5].empty())
            {
                double d = 0.0;
                std::from_chars(f[5].data(), f[5].data() + f[5].size(), d);
                r.metrics.routing_delay = d;
            }
            r.metrics.success = f[6] == "1";
            rows.push_back(r);
        }
        return rows;
    }

    void write_report(std::ostream &out, const TrendReport &report)
    {
        out << "n_cr,rreq_gap(aodv-crp),rrep_gap(aodv-crp),delay_gap(aodv-crp),success_gap(crp-aodv)\n";
        for (const auto &d : report.deltas)
        {
            out << d.n_cr << ',' << format_number(d.rreq_gap) << ',' << format_number(d.rrep_gap) << ','
                << (d.delay_gap ? format_number(*d.delay_gap) : "") << ',' << format_number(d.success_gap) << '\n';
        }
        if (!report.problem.empty())
            out << "grid problem: " << report.problem << '\n';
        for (const auto &t : report.trends)
        {
            out << "trend " << t.name << ": " << verdict_name(t.verdict);
            if (!t.detail.empty())
                out << " (" << t.detail << ')';
            out << '\n';
        }
        if (report.low_confidence)
            out << "note: fewer than 2 seeds per point; verdicts are low-confidence\n";
    }

    namespace
    {
        struct Series
        {
            std::string file;
            std::string title;
            std::string y_label;
            bool bars = false;
            std::optional<double> (*value)(const SweepPoint &);
        };

        void write_svg(const std::string &path, const Series &s, const std::vector<std::uint32_t> &grid,
                       const std::map<std::uint32_t, std::optional<double>> &crp,
                       const std::map<std::uint32_t, std::optional<double>> &aodv)
        {
            const double w = 640, h = 400, left = 70, right = 20, top = 40, bottom = 50;
            double ymax = 0.0;
            for (const auto *m : {&crp, &aodv})
                for (const auto &[n, v] : *m)
                    if (v)
                        ymax = std::max(ymax, *v);
            if (ymax <= 0.0)
                ymax = 1.0;
            ymax *= 1.1;
            const double plot_w = w - left - right, plot_h = h - top - bottom;
            const double slot = plot_w / static_cast<double>(grid.size());
            auto px = [&](std::size_t i) { return left + slot * (static_cast<double>(i) + 0.5); };
            auto py = [&](double v) { return top + plot_h * (1.0 - v / ymax); };

            std::ofstream out(path);
            if (!out)
                throw std::runtime_error("cannot write '" + path + "'");
            out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
            out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
            out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << s.title << "</text>\n";
            out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
                << top + plot_h << "\" stroke=\"black\"/>\n";
            out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
                << "\" stroke=\"black\"/>\n";
            for (int k = 0; k <= 4; ++k)
            {
                const double v = ymax * k / 4.0;
                out << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
                    << format_number(std::round(v * 100.0) / 100.0) << "</text>\n";
            }
            for (std::size_t i = 0; i < grid.size(); ++i)
            {
                out << "<text x=\"" << px(i) << "\" y=\"" << top + plot_h + 18
                    << "\" text-anchor=\"middle\" font-size=\"11\">" << grid[i] << "</text>\n";
            }
            out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << h - 10
                << "\" text-anchor=\"middle\" font-size=\"12\">Number of CRs</text>\n";
            out << "<text x=\"16\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 16 " << top + plot_h / 2
                << ")\" text-anchor=\"middle\" font-size=\"12\">" << s.y_label << "</text>\n";

            const struct
            {
                const std::map<std::uint32_t, std::optional<double>> *data;
                const char *colour;
                const char *name;
                double offset;
            } lines[] = {{&crp, "#1f77b4", "CRP", -0.2}, {&aodv, "#d62728", "AODV", 0.2}};
            for (const auto &l : lines)
            {
                if (s.bars)
                {
                    for (std::size_t i = 0; i < grid.size(); ++i)
                    {
                        const auto v = l.data->at(grid[i]);
                        if (!v)
                            continue;
                        const double bw = slot * 0.35;
                        const double x = px(i) + l.offset * slot - bw / 2;
                        out << "<rect x=\"" << x << "\" y=\"" << py(*v) << "\" width=\"" << bw << "\" height=\""
                            << top + plot_h - py(*v) << "\" fill=\"" << l.colour << "\"/>\n";
                    }
                }
                else
                {
                    out << "<polyline fill=\"none\" stroke=\"" << l.colour << "\" stroke-width=\"2\" points=\"";
                    for (std::size_t i = 0; i < grid.size(); ++i)
                    {
                        const auto v = l.data->at(grid[i]);
                        if (v)
                            out << px(i) << ',' << py(*v) << ' ';
                    }
                    out << "\"/>\n";
                }
            }
            out << "<text x=\"" << left + 10 << "\" y=\"" << top + 14 << "\" fill=\"#1f77b4\" font-size=\"12\">CRP</text>\n";
            out << "<text x=\"" << left + 50 << "\" y=\"" << top + 14 << "\" fill=\"#d62728\" font-size=\"12\">AODV</text>\n";
            out << "</svg>\n";
        }
    }

    std::vector<std::string> write_figure_series(const std::string &dir, const std::vector<SweepPoint> &points,
                                                 bool svg)
    {
        std::filesystem::create_directories(dir);
        const Series series[] = {
            {"fig4_rreq", "Average number of RREQ", "RREQ transmissions", false,
             [](const SweepPoint &p) -> std::optional<double> { return p.mean_rreq; }},
            {"fig5_rrep", "Average number of RREP", "RREP transmissions", false,
             [](const SweepPoint &p) -> std::optional<double> { return p.mean_rrep; }},
            {"fig6_delay", "Average routing delay", "time units", false,
             [](const SweepPoint &p) -> std::optional<double> { return p.mean_delay; }},
            {"fig7_success", "Route discovery success rate", "fraction", true,
             [](const SweepPoint &p) -> std::optional<double> { return p.success_rate; }},
        };

        std::vector<std::uint32_t> grid;
        for (const auto &p : points)
        {
            if (std::find(grid.begin(), grid.end(), p.n_cr) == grid.end())
                grid.push_back(p.n_cr);
        }
        std::sort(grid.begin(), grid.end());

        std::vector<std::string> written;
        for (const auto &s : series)
        {
            std::map<std::uint32_t, std::optional<double>> crp, aodv;
            for (std::uint32_t n : grid)
            {
                crp[n] = std::nullopt;
                aodv[n] = std::nullopt;
            }
            for (const auto &p : points)
                (p.protocol == ProtocolKind::Crp ? crp : aodv)[p.n_cr] = s.value(p);

            const std::string csv = (std::filesystem::path(dir) / (s.file + ".csv")).string();
            std::ofstream out(csv);
            if (!out)
                throw std::runtime_error("cannot write '" + csv + "'");
            out << "n_cr,crp,aodv\n";
            for (std::uint32_t n : grid)
            {
                out << n << ',' << (crp[n] ? format_number(*crp[n]) : "") << ','
                    << (aodv[n] ? format_number(*aodv[n]) : "") << '\n';
            }
            written.push_back(csv);
            if (svg)
            {
                const std::string path = (std::filesystem::path(dir) / (s.file + ".svg")).string();
                write_svg(path, s, grid, crp, aodv);
                written.push_back(path);
            }
        }
        return written;
    }
}
