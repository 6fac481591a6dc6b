#pragma once

#include "warmsim/coupling.hpp"
#include "warmsim/envelope.hpp"
#include "warmsim/errors.hpp"
#include "warmsim/field.hpp"
#include "warmsim/intensity.hpp"
#include "warmsim/state.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace warmsim {

// ---------------------------------------------------------------------------
// Experiment configuration: one JSON document, lower_snake_case fields,
// unknown fields rejected.
//
// {
//   "model": { "both": SLOTS } | { "element1": SLOTS, "element2": SLOTS },
//   "switching": { "bound": B, "to_repair": LAW, "to_work": LAW },
//   "run": { "horizon", "replications", "burn_in", "time_grid", "seed", "initial" },
//   "coupling": { "initial_a", "initial_b", "warm_up_a", "warm_up_b", "form",
//                 "fit_window": { "from", "to" } },
//   "output": { "dir" }
// }
// SLOTS = { "work": SLOT, "repair": SLOT }
// SLOT  = { "intensity": LAW, "modulator": { PHASE: CURVE, ... }, "envelope": ENV }
// LAW   = { "family": "constant" | "hyperbolic" | "weibull" | "piecewise" | "none",
//           family parameters, "atoms": [ { "location", "mass" } ], "support_bound" }
// CURVE = factor | { "breakpoints": [...], "factors": [...] }
// ENV   = { "phi": LAW, "q": LAW, "k", "epsilon", "t_delay" }
// STATE = { "element1": { "phase", "clock", "remaining_delay" }, "element2": ... }
// time_grid = [ t... ] | { "start", "stop", "count", "scale": "linear" | "log" }
// ---------------------------------------------------------------------------

using Json = nlohmann::json;

struct RunConfig
{
    std::optional<double> horizon;
    std::size_t replications = 1;
    double burn_in = 0.0;
    std::optional<std::vector<double>> time_grid;
    std::uint64_t seed = 0;
    SystemState initial = make_state(PhaseTag::Working, 0.0, PhaseTag::Working, 0.0);
};

struct CouplingConfig
{
    SystemState initial_a;
    SystemState initial_b;
    double warm_up_a = 0.0;
    double warm_up_b = 0.0;
    EnvelopeForm form = EnvelopeForm::Exponential;
    FitWindow fit_window;
};

struct ExperimentConfig
{
    IntensityField field;
    SwitchingPolicy policy;
    RunConfig run;
    std::optional<CouplingConfig> coupling;
    std::string output_dir = ".";
};

namespace detail {

/// Object node that remembers which keys were read, so leftovers can be reported.
class ConfigNode
{
  public:
    ConfigNode(const Json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            fail("expected an object");
    }

    const std::string& path() const { return path_; }
    std::string at(const std::string& key) const { return path_ + "/" + key; }

    bool has(const std::string& key) const { return j_.contains(key); }

    const Json& raw(const std::string& key)
    {
        if (!has(key))
            throw ConfigError(at(key) + ": required field is missing");
        used_.insert(key);
        return j_.at(key);
    }

    ConfigNode child(const std::string& key) { return ConfigNode(raw(key), at(key)); }

    double number(const std::string& key)
    {
        const Json& v = raw(key);
        if (!v.is_number())
            throw ConfigError(at(key) + ": expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x))
            throw ConfigError(at(key) + ": expected a finite number");
        return x;
    }

    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

    std::uint64_t unsigned_integer(const std::string& key)
    {
        const Json& v = raw(key);
        if (!v.is_number_unsigned())
            throw ConfigError(at(key) + ": expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    std::string string(const std::string& key)
    {
        const Json& v = raw(key);
        if (!v.is_string())
            throw ConfigError(at(key) + ": expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key)
    {
        const Json& v = raw(key);
        if (!v.is_array())
            throw ConfigError(at(key) + ": expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number() || !std::isfinite(v[i].get<double>()))
                throw ConfigError(at(key) + "/" + std::to_string(i) + ": expected a finite number");
            out.push_back(v[i].get<double>());
        }
        return out;
    }

    /// Every key must have been read by now.
    void finish() const
    {
        for (const auto& item : j_.items())
            if (!used_.count(item.key()))
                throw ConfigError(at(item.key()) + ": unknown field");
    }

    [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path_ + ": " + what); }

  private:
    const Json& j_;
    std::string path_;
    std::set<std::string> used_;
};

/// Runs `build`, turning library validation errors into config errors at `path`.
template <class Fn>
auto guarded(const std::string& path, Fn&& build)
{
    try {
        return build();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline RateMap parse_family(ConfigNode& n)
{
    const std::string family = n.string("family");
    if (family == "constant") {
        const double rate = n.number("rate");
        return guarded(n.path(), [&] { return RateMap(ConstantRate{rate}); });
    }
    if (family == "hyperbolic") {
        const double gamma = n.number("gamma");
        return guarded(n.path(), [&] { return RateMap(HyperbolicRate{gamma}); });
    }
    if (family == "weibull") {
        const double shape = n.number("shape");
        const double scale = n.number("scale");
        return guarded(n.path(), [&] { return RateMap(WeibullRate{shape, scale}); });
    }
    if (family == "piecewise") {
        auto bps = n.numbers("breakpoints");
        auto rates = n.numbers("rates");
        return guarded(n.path(), [&] { return RateMap(PiecewiseRate{std::move(bps), std::move(rates)}); });
    }
    if (family == "none")
        return RateMap::zero();
    throw ConfigError(n.at("family") + ": unknown family '" + family +
                      "' (constant, hyperbolic, weibull, piecewise, none)");
}

inline GeneralizedIntensity parse_law(ConfigNode n)
{
    RateMap rm = parse_family(n);
    std::vector<Jump> jumps;
    if (n.has("atoms")) {
        const Json& arr = n.raw("atoms");
        if (!arr.is_array())
            throw ConfigError(n.at("atoms") + ": expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            ConfigNode a(arr[i], n.at("atoms") + "/" + std::to_string(i));
            jumps.push_back({a.number("location"), a.number("mass")});
            a.finish();
        }
    }
    std::optional<double> bound;
    if (n.has("support_bound"))
        bound = n.number("support_bound");
    n.finish();
    return guarded(n.path(), [&] {
        GeneralizedIntensity gi = atoms_from_jumps(std::move(jumps), std::move(rm));
        if (bound) {
            if (gi.support_bound() && *gi.support_bound() != *bound)
                throw ConfigError(n.at("support_bound") + ": conflicts with an atom carrying all remaining mass");
            gi = GeneralizedIntensity(gi.continuous(), gi.atoms(), *bound);
        }
        return gi;
    });
}

inline ModulatorCurve parse_curve(const Json& v, const std::string& path)
{
    if (v.is_number())
        return guarded(path, [&] { return ModulatorCurve(v.get<double>()); });
    ConfigNode n(v, path);
    auto bps = n.numbers("breakpoints");
    auto fs = n.numbers("factors");
    n.finish();
    return guarded(path, [&] { return ModulatorCurve(std::move(bps), std::move(fs)); });
}

inline EnvelopePair parse_envelope(ConfigNode n)
{
    GeneralizedIntensity phi = parse_law(n.child("phi"));
    GeneralizedIntensity q = parse_law(n.child("q"));
    const Json& kv = n.raw("k");
    if (!kv.is_number_integer())
        throw ConfigError(n.at("k") + ": expected an integer");
    const auto k = kv.get<long long>();
    const double eps = n.number("epsilon");
    const double t = n.number("t_delay", 0.0);
    n.finish();
    if (k < 2 || k > 1000)
        throw ConfigError(n.at("k") + ": moment order must be in [2, 1000]");
    return guarded(n.path(), [&] { return EnvelopePair(std::move(phi), std::move(q), static_cast<int>(k), eps, t); });
}

inline HazardSlot parse_slot(ConfigNode n)
{
    HazardSlot slot;
    slot.base = parse_law(n.child("intensity"));
    if (n.has("modulator")) {
        ConfigNode m = n.child("modulator");
        for (PhaseTag p : kAllPhases) {
            const std::string key(to_string(p));
            if (m.has(key))
                slot.modulator.by_other_phase[static_cast<std::size_t>(p)] = parse_curve(m.raw(key), m.at(key));
        }
        m.finish();
    }
    if (n.has("envelope"))
        slot.envelope = parse_envelope(n.child("envelope"));
    n.finish();
    return slot;
}

inline std::array<HazardSlot, 2> parse_slots(ConfigNode n)
{
    std::array<HazardSlot, 2> out{parse_slot(n.child("repair")), parse_slot(n.child("work"))};
    n.finish();
    return out;
}

inline IntensityField parse_model(ConfigNode n)
{
    IntensityField field;
    const bool both = n.has("both");
    if (both == (n.has("element1") || n.has("element2")))
        n.fail("give either 'both' or 'element1' and 'element2'");
    for (int j = 0; j < 2; ++j) {
        const std::string key = both ? "both" : "element" + std::to_string(j + 1);
        if (!both && !n.has(key))
            throw ConfigError(n.at(key) + ": required field is missing");
        auto slots = parse_slots(n.child(key));
        field.set(j, 0, std::move(slots[0]));
        field.set(j, 1, std::move(slots[1]));
    }
    n.finish();
    return field;
}

inline SwitchingPolicy parse_switching(ConfigNode n)
{
    std::optional<GeneralizedIntensity> to_repair;
    std::optional<GeneralizedIntensity> to_work;
    if (n.has("to_repair"))
        to_repair = parse_law(n.child("to_repair"));
    if (n.has("to_work"))
        to_work = parse_law(n.child("to_work"));
    std::optional<double> bound;
    if (n.has("bound"))
        bound = n.number("bound");
    n.finish();
    if ((to_repair || to_work) && !bound)
        throw ConfigError(n.at("bound") + ": required when a switching delay law is given");
    if (!bound)
        return SwitchingPolicy::instantaneous();
    return guarded(n.path(), [&] { return SwitchingPolicy(*bound, std::move(to_repair), std::move(to_work)); });
}

inline SystemState parse_state(ConfigNode n)
{
    SystemState s;
    for (int j = 0; j < 2; ++j) {
        ConfigNode e = n.child("element" + std::to_string(j + 1));
        const std::string name = e.string("phase");
        const auto tag = parse_phase(name);
        if (!tag)
            throw ConfigError(e.at("phase") + ": unknown phase '" + name +
                              "' (working, under_repair, switching_to_work, switching_to_repair)");
        s.phase[static_cast<std::size_t>(j)].tag = *tag;
        s.clock[static_cast<std::size_t>(j)] = e.number("clock", 0.0);
        s.phase[static_cast<std::size_t>(j)].remaining_delay = e.number("remaining_delay", 0.0);
        e.finish();
    }
    n.finish();
    guarded(n.path(), [&] {
        s.validate();
        return 0;
    });
    return s;
}

inline std::vector<double> parse_time_grid(const Json& v, const std::string& path)
{
    std::vector<double> grid;
    if (v.is_array()) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number())
                throw ConfigError(path + "/" + std::to_string(i) + ": expected a number");
            grid.push_back(v[i].get<double>());
        }
    } else {
        ConfigNode n(v, path);
        const double start = n.number("start");
        const double stop = n.number("stop");
        const std::uint64_t count = n.unsigned_integer("count");
        const std::string scale = n.has("scale") ? n.string("scale") : "linear";
        n.finish();
        if (count < 1 || count > 100000000)
            throw ConfigError(n.at("count") + ": must be in [1, 1e8]");
        if (scale != "linear" && scale != "log")
            throw ConfigError(n.at("scale") + ": expected 'linear' or 'log'");
        if (scale == "log" && !(start > 0.0))
            throw ConfigError(n.at("start") + ": a log grid needs start > 0");
        for (std::uint64_t i = 0; i < count; ++i) {
            const double f = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
            grid.push_back(scale == "log" ? start * std::pow(stop / start, f) : start + (stop - start) * f);
        }
        if (count > 1)
            grid.back() = stop;
    }
    guarded(path, [&] {
        check_time_grid(grid, 0.0);
        return 0;
    });
    return grid;
}

inline RunConfig parse_run(ConfigNode n)
{
    RunConfig run;
    if (n.has("horizon")) {
        run.horizon = n.number("horizon");
        if (!(*run.horizon >= 0.0))
            throw ConfigError(n.at("horizon") + ": must be >= 0");
    }
    if (n.has("replications")) {
        run.replications = n.unsigned_integer("replications");
        if (run.replications < 1)
            throw ConfigError(n.at("replications") + ": must be >= 1");
    }
    run.burn_in = n.number("burn_in", 0.0);
    if (!(run.burn_in >= 0.0))
        throw ConfigError(n.at("burn_in") + ": must be >= 0");
    if (n.has("time_grid"))
        run.time_grid = parse_time_grid(n.raw("time_grid"), n.at("time_grid"));
    if (n.has("seed"))
        run.seed = n.unsigned_integer("seed");
    if (n.has("initial"))
        run.initial = parse_state(n.child("initial"));
    n.finish();
    return run;
}

inline CouplingConfig parse_coupling(ConfigNode n)
{
    CouplingConfig c;
    c.initial_a = parse_state(n.child("initial_a"));
    c.initial_b = parse_state(n.child("initial_b"));
    for (auto [key, target] : {std::pair{"warm_up_a", &c.warm_up_a}, std::pair{"warm_up_b", &c.warm_up_b}}) {
        *target = n.number(key, 0.0);
        if (!(*target >= 0.0) || !std::isfinite(*target))
            throw ConfigError(n.at(key) + ": must be finite and >= 0");
    }
    if (n.has("form")) {
        const std::string form = n.string("form");
        if (form == "exponential")
            c.form = EnvelopeForm::Exponential;
        else if (form == "polynomial")
            c.form = EnvelopeForm::Polynomial;
        else
            throw ConfigError(n.at("form") + ": expected 'exponential' or 'polynomial'");
    }
    if (n.has("fit_window")) {
        ConfigNode w = n.child("fit_window");
        c.fit_window.from = w.number("from", 0.0);
        c.fit_window.to = w.number("to", kInf);
        w.finish();
        if (!(c.fit_window.to > c.fit_window.from))
            throw ConfigError(w.path() + ": 'to' must exceed 'from'");
    }
    n.finish();
    return c;
}

inline std::pair<std::size_t, std::size_t> line_and_column(const std::string& text, std::size_t byte)
{
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

} // namespace detail

/// Parses and validates a configuration document; throws ConfigError with a field path or line.
inline ExperimentConfig parse_config(const std::string& text)
{
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        const auto [line, col] = detail::line_and_column(text, e.byte);
        std::string what = e.what();
        if (const auto pos = what.find("syntax error"); pos != std::string::npos)
            what = what.substr(pos);
        throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + what);
    }
    detail::ConfigNode root(doc, "");
    ExperimentConfig cfg;
    cfg.field = detail::parse_model(root.child("model"));
    if (root.has("switching"))
        cfg.policy = detail::parse_switching(root.child("switching"));
    if (root.has("run"))
        cfg.run = detail::parse_run(root.child("run"));
    if (root.has("coupling"))
        cfg.coupling = detail::parse_coupling(root.child("coupling"));
    if (root.has("output")) {
        detail::ConfigNode out = root.child("output");
        cfg.output_dir = out.string("dir");
        out.finish();
    }
    root.finish();

    auto check_initial = [&cfg](const SystemState& s, const std::string& path) {
        detail::guarded(path, [&] {
            s.validate(cfg.policy.bound());
            return 0;
        });
    };
    check_initial(cfg.run.initial, "/run/initial");
    if (cfg.coupling) {
        check_initial(cfg.coupling->initial_a, "/coupling/initial_a");
        check_initial(cfg.coupling->initial_b, "/coupling/initial_b");
    }
    if (cfg.run.horizon && !(cfg.run.burn_in <= *cfg.run.horizon))
        throw ConfigError("/run/burn_in: must not exceed the horizon");
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open config file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad())
        throw IoError("cannot read config file " + path.string());
    return parse_config(buf.str());
}

} // namespace warmsim
