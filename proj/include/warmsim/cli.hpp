#pragma once

#include "warmsim/conditions.hpp"
#include "warmsim/config.hpp"
#include "warmsim/coupling.hpp"
#include "warmsim/kernel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace warmsim {

enum ExitCode : int
{
    kExitOk = 0,
    kExitFailure = 1, ///< numerical failure inside a run
    kExitConfig = 2,
    kExitCondition = 3,
    kExitIo = 4,
    kExitFitRejected = 5,
};

struct RunOptions
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out_dir;
};

/// Shortest round-trip decimal form; byte-stable across runs and thread counts.
inline std::string format_number(double x)
{
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    if (std::isnan(x))
        return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::string format_number(std::uint64_t x) { return std::to_string(x); }

namespace detail {

inline unsigned resolve_threads(const RunOptions& opt)
{
    if (opt.threads)
        return std::max(1u, *opt.threads);
    if (const char* env = std::getenv("WARMSIM_THREADS"); env && *env) {
        unsigned value = 0;
        const char* end = env + std::char_traits<char>::length(env);
        const auto res = std::from_chars(env, end, value);
        if (res.ec != std::errc() || res.ptr != end || value == 0)
            throw ConfigError(std::string("WARMSIM_THREADS must be a positive integer, got '") + env + "'");
        return value;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

inline std::filesystem::path output_dir(const ExperimentConfig& cfg, const RunOptions& opt)
{
    std::filesystem::path dir = opt.out_dir ? *opt.out_dir : cfg.output_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open " + path.string() + " for writing");
    out << content;
    out.flush();
    if (!out)
        throw IoError("failed writing " + path.string());
}

inline std::string slot_name(int element, int status)
{
    return "element " + std::to_string(element + 1) + ", " + (status == 1 ? "work" : "repair");
}

inline std::uint64_t seed_of(const ExperimentConfig& cfg, const RunOptions& opt)
{
    return opt.seed ? *opt.seed : cfg.run.seed;
}

inline double require_horizon(const ExperimentConfig& cfg)
{
    if (!cfg.run.horizon)
        throw ConfigError("/run/horizon: required for this command");
    return *cfg.run.horizon;
}

inline const std::vector<double>& require_grid(const ExperimentConfig& cfg)
{
    if (!cfg.run.time_grid)
        throw ConfigError("/run/time_grid: required for this command");
    return *cfg.run.time_grid;
}

/// Own-clock grid for condition d: the default clock grid plus both sides of phi's singular points.
inline std::vector<double> condition_d_grid(const EnvelopePair& env)
{
    std::vector<double> g = default_clock_grid();
    for (double p : env.phi.singular_points()) {
        g.push_back(p);
        g.push_back(p * (1.0 + 1e-9));
        if (p > 0.0)
            g.push_back(p * (1.0 - 1e-9));
    }
    g.push_back(env.t_delay * (1.0 + 1e-9) + 1e-12);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

/**
 * Rate alpha with E exp(alpha zeta~) finite for every declared lower
 * envelope: the smallest tail level of phi (infinite for bounded support).
 */
inline std::optional<double> declared_alpha(const IntensityField& field)
{
    std::optional<double> alpha;
    for (int j = 0; j < 2; ++j)
        for (int n = 0; n < 2; ++n) {
            const auto& env = field.slot(j, n).envelope;
            if (!env)
                continue;
            const double a = env->phi.support_bound() ? kInf : env->phi.continuous().tail_rate();
            alpha = alpha ? std::min(*alpha, a) : a;
        }
    return alpha;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Commands. Each returns an exit code and writes its report to `out`.
// ---------------------------------------------------------------------------

inline int cmd_validate(const ExperimentConfig& cfg, std::ostream& out)
{
    for (int j = 0; j < 2; ++j)
        for (int n = 0; n < 2; ++n)
            if (!cfg.field.slot(j, n).envelope)
                throw ConfigError("/model: " + detail::slot_name(j, n) +
                                  " has no envelope; validate needs phi, q, k, epsilon, t_delay for every slot");
    bool all = true;
    auto verdict = [](bool ok) { return ok ? "pass" : "FAIL"; };
    for (int j = 0; j < 2; ++j)
        for (int n = 1; n >= 0; --n) {
            const HazardSlot& slot = cfg.field.slot(j, n);
            const EnvelopePair& env = *slot.envelope;
            const std::string tag = "[" + detail::slot_name(j, n) + "] ";

            const auto a = check_condition_a(slot, env, default_state_grid(slot, &env));
            out << tag << "condition a: " << verdict(a.pass) << " (" << a.points_checked << " grid points, "
                << a.violations.size() << " violations)\n";
            for (std::size_t i = 0; i < std::min<std::size_t>(a.violations.size(), 5); ++i) {
                const auto& v = a.violations[i];
                out << "    " << v.what << " at s = " << format_number(v.s) << ", other "
                    << to_string(v.other_phase) << " clock " << format_number(v.other_clock) << ": lambda "
                    << format_number(v.lambda) << ", phi " << format_number(v.phi) << ", q " << format_number(v.q)
                    << "\n";
            }

            const auto b = check_condition_b(env);
            out << tag << "condition b: " << verdict(b.pass()) << " (divergence of integral phi: "
                << verdict(b.divergence_pass);
            if (b.divergence_pass)
                out << " at M = " << format_number(b.divergence_point) << (b.divergence_by_trend ? " by trend" : "");
            out << "; order-" << env.k << " integral: " << format_number(b.integral_value) << ")\n";
            if (!b.detail.empty())
                out << "    " << b.detail << "\n";

            const auto c = check_condition_c(env);
            out << tag << "condition c: " << verdict(c.pass) << " (integral of q over (-eps, eps) = "
                << format_number(c.integral) << ", largest passing epsilon = " << format_number(c.largest_epsilon)
                << ")\n";

            const auto d = check_condition_d(env, detail::condition_d_grid(env));
            out << tag << "condition d: " << verdict(d.pass) << " (" << d.points_checked << " grid points beyond T = "
                << format_number(env.t_delay) << ", " << d.violations.size() << " violations)\n";

            all = all && a.pass && b.pass() && c.pass && d.pass;
        }
    out << "overall: " << (all ? "pass" : "FAIL") << "\n";
    return all ? kExitOk : kExitCondition;
}

/// events.csv holds replication 0; summary.csv one row per replication.
inline int cmd_simulate(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out)
{
    const double horizon = detail::require_horizon(cfg);
    const std::uint64_t seed = detail::seed_of(cfg, opt);
    const unsigned threads = detail::resolve_threads(opt);
    const std::size_t reps = cfg.run.replications;
    const double burn_in = cfg.run.burn_in;

    struct Result
    {
        double availability = 0.0;
        std::size_t events = 0;
    };
    std::vector<Result> results(reps);
    std::vector<Event> first_events;
    for_each_replication(reps, threads, [&](std::size_t i) {
        RandomStream rng = RandomStream::substream(seed, i);
        OccupationAccumulator acc(cfg.run.initial, burn_in);
        std::size_t count = 0;
        const SystemState end = simulate_visit(cfg.run.initial, cfg.field, cfg.policy, horizon, rng,
                                               [&](const Event& ev, const SystemState&) {
                                                   acc.on_event(ev);
                                                   ++count;
                                                   if (i == 0)
                                                       first_events.push_back(ev);
                                               });
        results[i].events = count;
        // an empty window reports the state at the horizon
        results[i].availability = horizon > burn_in
                                      ? 1.0 - acc.finish(horizon)[static_cast<std::size_t>(status_pair_index(0, 0))]
                                      : (availability_indicator(end) ? 1.0 : 0.0);
    });

    const auto dir = detail::output_dir(cfg, opt);
    std::string events = "wall_time,element,transition,clock_at_event\n";
    for (const auto& ev : first_events) {
        events += format_number(ev.wall_time);
        events += ',';
        events += std::to_string(ev.element + 1);
        events += ',';
        events += to_string(ev.from);
        events += "->";
        events += to_string(ev.to);
        events += ',';
        events += format_number(ev.clock_at_event);
        events += '\n';
    }
    detail::write_file(dir / "events.csv", events);

    std::string summary = "replication,longrun_availability,events,seed\n";
    double mean = 0.0;
    for (std::size_t i = 0; i < reps; ++i) {
        summary += std::to_string(i) + "," + format_number(results[i].availability) + "," +
                   std::to_string(results[i].events) + "," + format_number(seed) + "\n";
        mean += results[i].availability / static_cast<double>(reps);
    }
    detail::write_file(dir / "summary.csv", summary);
    out << "replications: " << reps << "\nmean longrun availability: " << format_number(mean) << "\n"
        << "wrote " << (dir / "events.csv").string() << ", " << (dir / "summary.csv").string() << "\n";
    return kExitOk;
}

inline std::string describe_fit(const EnvelopeFit& fit)
{
    const bool poly = fit.form == EnvelopeForm::Polynomial;
    std::string s = "form: " + to_string(fit.form) + "\nstatus: accepted\n";
    s += std::string(poly ? "K: " : "K_tilde: ") + format_number(fit.constant) + "\n";
    s += std::string(poly ? "ell: " : "beta: ") + format_number(fit.rate) + "\n";
    s += "rmse: " + format_number(fit.rmse) + "\n";
    s += "lift: " + format_number(fit.lift) + "\n";
    s += "window: " + format_number(fit.window.from) + " " + format_number(fit.window.to) + "\n";
    s += "points: " + std::to_string(fit.points) + "\n";
    s += std::string("rate_capped: ") + (fit.rate_capped ? "true" : "false") + "\n";
    return s;
}

inline int cmd_couple(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out)
{
    if (!cfg.coupling)
        throw ConfigError("/coupling: required for this command");
    const auto& cc = *cfg.coupling;
    const double horizon = detail::require_horizon(cfg);
    const auto& grid = detail::require_grid(cfg);
    const TVCurve curve =
        estimate_coupling_tail(InitialLaw{cc.initial_a, cc.warm_up_a}, InitialLaw{cc.initial_b, cc.warm_up_b}, cfg.field, cfg.policy, horizon, cfg.run.replications, grid,
                               detail::seed_of(cfg, opt), detail::resolve_threads(opt));

    const auto dir = detail::output_dir(cfg, opt);
    std::string csv = "t,bound,ci_radius,n\n";
    for (std::size_t i = 0; i < curve.times.size(); ++i)
        csv += format_number(curve.times[i]) + "," + format_number(curve.bound[i]) + "," +
               format_number(curve.radius[i]) + "," + std::to_string(curve.samples) + "\n";
    detail::write_file(dir / "tv_curve.csv", csv);

    std::string report;
    int code = kExitOk;
    try {
        std::optional<double> alpha;
        if (cc.form == EnvelopeForm::Exponential) {
            alpha = detail::declared_alpha(cfg.field);
            if (alpha && !(*alpha > 0.0))
                throw FitRejected("exponential form needs E exp(alpha zeta) finite for some alpha > 0, but a declared "
                                  "lower envelope has tail level 0");
            if (alpha && std::isinf(*alpha))
                alpha.reset();
        }
        const EnvelopeFit fit = fit_envelope(curve, cc.form, cc.fit_window, alpha);
        report = describe_fit(fit);
        if (alpha)
            report += "alpha: " + format_number(*alpha) + "\n";
        out << to_string(fit.form) << " fit: constant " << format_number(fit.constant) << ", rate "
            << format_number(fit.rate) << ", rmse " << format_number(fit.rmse) << "\n";
    } catch (const FitRejected& e) {
        report = "form: " + to_string(cc.form) + "\nstatus: rejected\nreason: " + e.what() + "\n";
        out << "fit rejected: " << e.what() << "\n";
        code = kExitFitRejected;
    }
    report += "censored: " + std::to_string(curve.censored) + " of " + std::to_string(curve.samples) + "\n";
    detail::write_file(dir / "fit.txt", report);
    out << "wrote " << (dir / "tv_curve.csv").string() << ", " << (dir / "fit.txt").string() << "\n";
    return code;
}

inline int cmd_availability(const ExperimentConfig& cfg, const RunOptions& opt, std::ostream& out)
{
    const auto& grid = detail::require_grid(cfg);
    const AvailabilityCurve curve =
        transient_availability(cfg.run.initial, cfg.field, cfg.policy, grid, cfg.run.replications,
                               detail::seed_of(cfg, opt), detail::resolve_threads(opt));
    const auto dir = detail::output_dir(cfg, opt);
    std::string csv = "t,estimate,stderr,n\n";
    for (std::size_t i = 0; i < curve.times.size(); ++i)
        csv += format_number(curve.times[i]) + "," + format_number(curve.estimate[i]) + "," +
               format_number(curve.stderr_[i]) + "," + std::to_string(curve.replications) + "\n";
    detail::write_file(dir / "availability.csv", csv);
    out << "wrote " << (dir / "availability.csv").string() << "\n";
    return kExitOk;
}

/// warmsim validate|simulate|couple|availability --config <path> [--seed] [--threads] [--out]
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Two-element warm-standby simulator", "warmsim"};
    app.require_subcommand(1);
    RunOptions opt;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string out_dir;
    for (const char* name : {"validate", "simulate", "couple", "availability"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", opt.config_path, "experiment config (JSON)")->required();
        sub->add_option("--seed", seed, "master seed, overrides run.seed");
        sub->add_option("--threads", threads, "worker threads (default: WARMSIM_THREADS or all cores)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--out", out_dir, "output directory, overrides output.dir");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }
    const CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed"))
        opt.seed = seed;
    if (sub->count("--threads"))
        opt.threads = threads;
    if (sub->count("--out"))
        opt.out_dir = out_dir;

    const std::string command = sub->get_name();
    try {
        const ExperimentConfig cfg = load_config(opt.config_path);
        if (command == "validate")
            return cmd_validate(cfg, out);
        if (command == "simulate")
            return cmd_simulate(cfg, opt, out);
        if (command == "couple")
            return cmd_couple(cfg, opt, out);
        return cmd_availability(cfg, opt, out);
    } catch (const IoError& e) {
        err << "warmsim: I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ConfigError& e) {
        err << "warmsim: config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InvalidSpec& e) {
        err << "warmsim: config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        err << "warmsim: " << command << " failed: " << e.what() << "\n";
        return kExitFailure;
    }
}

} // namespace warmsim
