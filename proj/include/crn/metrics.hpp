#pragma once

#include "crn/aodv.hpp"
#include "crn/crp.hpp"
#include "crn/sim.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace crn
{
    enum class ProtocolKind
    {
        Crp,
        Aodv
    };

    std::string_view protocol_name(ProtocolKind p);
    /// Accepts "crp" / "aodv"; throws ConfigError otherwise.
    ProtocolKind parse_protocol(std::string_view s);

    struct RunMetrics
    {
        std::uint64_t rreq_count = 0;
        std::uint64_t rrep_count = 0;
        // Initiation to reply at the source; empty when the discovery failed.
        std::optional<double> routing_delay;
        bool success = false;

        friend bool operator==(const RunMetrics &, const RunMetrics &) = default;
    };

    /// Source/destination SU pair drawn from the run's own seed stream.
    std::pair<NodeId, NodeId> pick_endpoints(const World &world);

    /// One discovery episode with everything needed for post-hoc inspection.
    struct Episode
    {
        SimConfig config;
        ProtocolKind protocol = ProtocolKind::Crp;
        NodeId src;
        NodeId dst;
        std::unique_ptr<Simulator> sim;
        std::unique_ptr<CrpProtocol> crp;
        std::unique_ptr<AodvProtocol> aodv;
        RunMetrics metrics;
    };

    /// Generates the world for config.seed, picks the endpoint pair, runs one discovery
    /// to completion or deadline. Both protocols see the same world and pair for a seed.
    Episode run_episode(const SimConfig &config, ProtocolKind protocol, bool trace = false);

    /// Runs one discovery on a prepared world and clustering (fixtures, scripted scenarios).
    Episode run_crp_episode(World world, Clustering clustering, NodeId src, NodeId dst, bool trace = false);

    RunMetrics run_once(const SimConfig &config, ProtocolKind protocol);

    struct SweepSpec
    {
        SimConfig base;
        std::vector<std::uint32_t> n_cr{20, 40, 60, 80, 100};
        std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
        std::vector<ProtocolKind> protocols{ProtocolKind::Crp, ProtocolKind::Aodv};
        // Share of the n_cr users that are PUs.
        double pu_fraction = 0.2;

        /// Base config specialised to one grid cell.
        SimConfig config_for(std::uint32_t n_cr, std::uint64_t seed) const;
        /// Throws ConfigError for empty grids or populations too small to cluster.
        void validate() const;
    };

    struct RunRow
    {
        std::uint32_t n_cr = 0;
        ProtocolKind protocol = ProtocolKind::Crp;
        std::uint64_t seed = 0;
        RunMetrics metrics;

        friend bool operator==(const RunRow &, const RunRow &) = default;
    };

    struct SweepPoint
    {
        std::uint32_t n_cr = 0;
        ProtocolKind protocol = ProtocolKind::Crp;
        double mean_rreq = 0.0;
        double mean_rrep = 0.0;
        // Over successful runs only.
        std::optional<double> mean_delay;
        double success_rate = 0.0;
        std::uint32_t n_seeds = 0;

        friend bool operator==(const SweepPoint &, const SweepPoint &) = default;
    };

    /// Every (n_cr, protocol, seed) run, ordered by n_cr, then protocol, then seed.
    /// Runs execute on an OpenMP team; output does not depend on the thread count.
    std::vector<RunRow> run_sweep_runs(const SweepSpec &spec);
    /// Single-threaded reference for run_sweep_runs.
    std::vector<RunRow> run_sweep_runs_serial(const SweepSpec &spec);

    /// Deterministic fold over rows grouped by (n_cr, protocol).
    std::vector<SweepPoint> aggregate(const std::vector<RunRow> &rows);

    inline std::vector<SweepPoint> run_sweep(const SweepSpec &spec) { return aggregate(run_sweep_runs(spec)); }

    enum class Verdict
    {
        Pass,
        Fail,
        Insufficient,
        NoVerdict
    };
    std::string_view verdict_name(Verdict v);

    struct TrendDelta
    {
        std::uint32_t n_cr = 0;
        double rreq_gap = 0.0;    // AODV - CRP
        double rrep_gap = 0.0;    // AODV - CRP
        std::optional<double> delay_gap; // AODV - CRP
        double success_gap = 0.0; // CRP - AODV
    };

    struct TrendResult
    {
        std::string name;
        Verdict verdict = Verdict::NoVerdict;
        std::string detail;
    };

    struct TrendReport
    {
        std::vector<TrendDelta> deltas;
        // A: RREQ, B: RREP, C: delay, D: success rate.
        std::vector<TrendResult> trends;
        std::string problem;
        bool low_confidence = false;

        bool all_pass() const;
    };

    /// CRP-vs-AODV trend verdicts. `delay_tolerance` is the per-step slack allowed when
    /// checking that delay grows with the population (one link delay).
    TrendReport compare(const std::vector<SweepPoint> &points, double delay_tolerance);

    std::string format_number(double v);

    void write_runs_csv(std::ostream &out, const std::vector<RunRow> &rows);
    void write_points_csv(std::ostream &out, const std::vector<SweepPoint> &points);
    /// Parses a per-run CSV written by write_runs_csv.
    std::vector<RunRow> read_runs_csv(std::istream &in);
    void write_report(std::ostream &out, const TrendReport &report);

    /// Per-figure series files (rreq, rrep, delay, success) under `dir`; optional SVG charts.
    /// Returns the written paths.
    std::vector<std::string> write_figure_series(const std::string &dir, const std::vector<SweepPoint> &points,
                                                 bool svg);
}
