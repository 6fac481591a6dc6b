// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "warmsim/cli.hpp"
#include "warmsim/config.hpp"
#include "warmsim/warmsim.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using namespace warmsim;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = WARMSIM_CONFIG_DIR;
const fs::path kScratch = fs::current_path() / "acceptance_out";

struct Check
{
    bool pass = true;
    std::ostringstream note;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            note << " [failed: " << what << "]";
        }
    }
};

int cli(const std::vector<std::string>& args)
{
    std::vector<const char*> argv{"warmsim"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0)
        std::cerr << err.str();
    return code;
}

int cli_run(const std::string& cmd, const std::string& config, const fs::path& out, unsigned threads = 1)
{
    return cli({cmd, "--config", (kConfigs / config).string(), "--out", out.string(), "--threads",
                std::to_string(threads)});
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Numeric CSV by column name.
std::map<std::string, std::vector<double>> read_csv(const fs::path& p)
{
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    std::vector<std::string> names;
    std::stringstream hs(line);
    for (std::string f; std::getline(hs, f, ',');)
        names.push_back(f);
    std::map<std::string, std::vector<double>> cols;
    while (std::getline(in, line)) {
        std::stringstream ls(line);
        std::size_t i = 0;
        for (std::string f; std::getline(ls, f, ',') && i < names.size(); ++i)
            cols[names[i]].push_back(std::stod(f));
    }
    return cols;
}

/// key: value lines of fit.txt
std::map<std::string, std::string> read_report(const fs::path& p)
{
    std::map<std::string, std::string> kv;
    std::ifstream in(p);
    for (std::string line; std::getline(in, line);)
        if (const auto c = line.find(": "); c != std::string::npos)
            kv[line.substr(0, c)] = line.substr(c + 2);
    return kv;
}

TVCurve curve_from_csv(const fs::path& p)
{
    auto cols = read_csv(p);
    TVCurve c;
    c.times = cols["t"];
    c.bound = cols["bound"];
    c.radius = cols["ci_radius"];
    c.samples = cols["n"].empty() ? 0 : static_cast<std::size_t>(cols["n"].front());
    return c;
}

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

// 1. long-run availability in the exponential regime
Check exponential_availability()
{
    Check c;
    const auto cfg = load_config(kConfigs / "symmetric_simulate.json");
    const double oracle = 1.0 - ctmc_stationary(to_ctmc(cfg.field, cfg.policy))[3];
    const auto t0 = std::chrono::steady_clock::now();
    const int code = cli_run("simulate", "symmetric_simulate.json", kScratch / "c1");
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.require(code == 0, "exit code");
    const auto rows = read_csv(kScratch / "c1" / "summary.csv")["longrun_availability"];
    double mean = 0.0;
    for (double a : rows)
        mean += a / static_cast<double>(rows.size());
    c.note << "replications " << rows.size() << ", mean " << mean << ", oracle " << oracle << ", " << secs << " s";
    c.require(rows.size() == 16, "16 replications");
    c.require(std::abs(oracle - 0.75) < 1e-12, "oracle value 0.75");
    c.require(std::abs(mean - oracle) <= 0.01, "within 0.01");
    c.require(secs < 120.0, "runtime");
    return c;
}

// 2. transient availability against uniformization
Check transient_agreement()
{
    Check c;
    const auto cfg = load_config(kConfigs / "symmetric_availability.json");
    const auto spec = to_ctmc(cfg.field, cfg.policy);
    c.require(cli_run("availability", "symmetric_availability.json", kScratch / "c2") == 0, "exit code");
    auto cols = read_csv(kScratch / "c2" / "availability.csv");
    c.require(cols["t"].size() == 6, "grid size");
    double worst = 0.0;
    for (std::size_t i = 0; i < cols["t"].size(); ++i) {
        const double t = cols["t"][i];
        const double want = 1.0 - ctmc_transient(spec, {1.0, 0.0, 0.0, 0.0}, t)[3];
        const double got = cols["estimate"][i];
        const double se = cols["stderr"][i];
        c.require(cols["n"][i] == 1e4, "10^4 replications");
        if (t == 0.0) {
            c.require(got == 1.0 && se == 0.0, "exact value at t = 0");
            continue;
        }
        const double z = std::abs(got - want) / se;
        worst = std::max(worst, z);
        c.require(z <= 3.0, "3 stderr at t = " + format_number(t));
    }
    c.note << "largest |z| " << worst;
    return c;
}

// 3. sampling: KS on 3/(1+s) and atom recovery
Check distribution_engine()
{
    Check c;
    const std::size_t n = 100000;
    const GeneralizedIntensity hyp(HyperbolicRate{3.0});
    RandomStream rng = RandomStream::substream(301, 0);
    std::vector<double> xs(n);
    for (auto& x : xs)
        x = sample(hyp, rng);
    const double d = ks_statistic(xs, [](double s) { return 1.0 - std::pow(1.0 + s, -3.0); });
    const double limit = 1.5 * 1.36 / std::sqrt(static_cast<double>(n));
    c.require(d < limit, "KS");

    const auto mix = atoms_from_jumps({{1.0, 0.3}, {2.0, 0.7}}, RateMap::zero());
    RandomStream rng2 = RandomStream::substream(302, 0);
    std::size_t ones = 0;
    std::size_t twos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = sample(mix, rng2);
        ones += x == 1.0;
        twos += x == 2.0;
    }
    const double p1 = static_cast<double>(ones) / static_cast<double>(n);
    const double p2 = static_cast<double>(twos) / static_cast<double>(n);
    c.require(ones + twos == n, "support {1, 2}");
    c.require(std::abs(p1 - 0.3) <= 0.01 && std::abs(p2 - 0.7) <= 0.01, "atom masses");
    c.note << "KS " << d << " < " << limit << ", masses " << p1 << " / " << p2;
    return c;
}

// 4. moments against closed forms
Check moments()
{
    Check c;
    double worst = 0.0;
    for (double lambda : {1.0, 2.5}) {
        const GeneralizedIntensity gi(ConstantRate{lambda});
        for (double ell : {1.0, 2.0, 3.0}) {
            const double e = rel_err(moment(gi, ell), std::tgamma(ell + 1.0) / std::pow(lambda, ell));
            worst = std::max(worst, e);
        }
    }
    worst = std::max(worst, rel_err(moment(GeneralizedIntensity(HyperbolicRate{3.0}), 1.0), 0.5));
    c.require(worst < 1e-6, "relative error");
    c.note << "largest relative error " << worst;
    return c;
}

// 5. condition validators on their three-case suites
Check condition_suites()
{
    Check c;
    auto constant = [](double r) { return GeneralizedIntensity(ConstantRate{r}); };
    auto hyperbolic = [](double g) { return GeneralizedIntensity(HyperbolicRate{g}); };
    auto slot = [](GeneralizedIntensity gi) { return HazardSlot{std::move(gi), {}, std::nullopt}; };
    auto env = [](GeneralizedIntensity phi, GeneralizedIntensity q, double eps = 0.1, double t = 0.0) {
        return EnvelopePair(std::move(phi), std::move(q), 2, eps, t);
    };
    auto cond_a = [](const HazardSlot& s, const EnvelopePair& e) { return check_condition_a(s, e, default_state_grid(s, &e)); };

    c.require(cond_a(slot(constant(1.0)), env(constant(0.5), constant(2.0))).pass, "a: constant inside envelopes");
    c.require(cond_a(slot(hyperbolic(1.0)), env(hyperbolic(1.0), constant(1.0))).pass, "a: gamma = Gamma = 1");
    {
        const auto s = slot(constant(3.0));
        const auto e = env(constant(1.0), constant(2.0));
        const auto grid = default_state_grid(s, &e);
        const auto r = check_condition_a(s, e, grid);
        std::size_t above = 0;
        for (const auto& v : r.violations)
            above += v.what == "lambda above Q";
        c.require(!r.pass && r.points_checked > 0 && above == r.points_checked, "a: lambda 3 above Q 2 everywhere");
    }

    const auto b1 = check_condition_b(env(constant(1.0), constant(2.0)));
    c.require(b1.pass() && std::abs(b1.integral_value - 1.0) < 1e-9, "b: phi = 1");
    const auto b2 = check_condition_b(env(hyperbolic(3.0), constant(3.0)));
    c.require(b2.pass() && std::abs(b2.integral_value - 0.5) < 1e-6, "b: phi = 3/(1+s)");
    const auto b3 = check_condition_b(env(hyperbolic(1.5), constant(1.5)));
    c.require(!b3.pass() && !b3.integral_pass, "b: phi = 1.5/(1+s)");

    const auto c1 = check_condition_c(env(constant(1.0), constant(2.0), 0.1));
    c.require(c1.pass && std::abs(c1.integral - 0.2) < 1e-12, "c: Q = 2, eps = 0.1");
    const auto c2 = check_condition_c(env(constant(1.0), constant(2.0), 0.6));
    c.require(!c2.pass && std::abs(c2.integral - 1.2) < 1e-12 && c2.largest_epsilon < 0.5, "c: Q = 2, eps = 0.6");
    const auto c3 = check_condition_c(env(constant(0.1), GeneralizedIntensity(WeibullRate{0.5, 1.0}), 0.25));
    c.require(c3.pass && std::abs(c3.integral - 0.5) < 1e-9, "c: Q = 1/(2 sqrt s)");

    std::vector<double> grid;
    for (int i = 0; i <= 100; ++i)
        grid.push_back(0.1 * i);
    const auto step = GeneralizedIntensity(PiecewiseRate{{2.0}, {0.0, 1.0}});
    c.require(check_condition_d(env(constant(1.0), constant(2.0)), grid).pass, "d: phi = 1, T = 0");
    c.require(check_condition_d(env(step, constant(2.0), 0.1, 2.0), grid).pass, "d: step at 2, T = 2");
    const auto d3 = check_condition_d(env(step, constant(2.0), 0.1, 1.0), grid);
    bool inside = !d3.violations.empty();
    for (double s : d3.violations)
        inside = inside && s > 1.0 && s < 2.0;
    c.require(!d3.pass && inside, "d: step at 2, T = 1");
    c.note << "12 cases";
    return c;
}

// 6. coupling bound in the exponential regime
Check coupling_bound()
{
    Check c;
    c.require(cli_run("couple", "symmetric_couple.json", kScratch / "c6") == 0, "exit code");
    const TVCurve curve = curve_from_csv(kScratch / "c6" / "tv_curve.csv");
    auto fit = read_report(kScratch / "c6" / "fit.txt");
    c.require(curve.samples == 10000, "10^4 pairs");
    c.require(!curve.times.empty() && curve.times.front() == 0.0 && curve.bound.front() == 1.0, "b(0) = 1");
    bool monotone = true;
    for (std::size_t i = 1; i < curve.bound.size(); ++i)
        monotone = monotone && curve.bound[i] <= curve.bound[i - 1];
    c.require(monotone, "nonincreasing");
    const double beta = std::stod(fit["beta"]);
    const double rmse = std::stod(fit["rmse"]);
    c.require(fit["form"] == "exponential" && fit["status"] == "accepted", "exponential fit accepted");
    c.require(beta > 0.0 && rmse < 0.15, "beta > 0, rmse < 0.15");

    const auto cfg = load_config(kConfigs / "symmetric_couple.json");
    const auto& cc = *cfg.coupling;
    c.note << "beta " << beta << ", rmse " << rmse;
    for (double t : {2.0, 5.0}) {
        std::size_t i = 0;
        while (i < curve.times.size() && curve.times[i] != t)
            ++i;
        if (i == curve.times.size()) {
            c.require(false, "grid holds t = " + format_number(t));
            continue;
        }
        const auto ea = sample_states(cc.initial_a, cfg.field, cfg.policy, t, 10000, 601);
        const auto eb = sample_states(cc.initial_b, cfg.field, cfg.policy, t, 10000, 602);
        const double tv = marginal_tv(ea, eb);
        c.require(tv <= curve.bound[i] + curve.radius[i] + 0.03, "marginal tv at t = " + format_number(t));
        c.note << ", tv(" << t << ") " << tv << " vs b " << curve.bound[i];
    }
    return c;
}

// 7. polynomial regime with k = 3 moments in the work time
Check polynomial_regime()
{
    Check c;
    const auto cfg = load_config(kConfigs / "heavy_tail_couple.json");
    // survival (1+s)^-3.2: moments of order 1, 2, 3 finite, order 4 infinite
    const auto& work = cfg.field.slot(0, 1).base;
    bool three = true;
    for (double ell : {1.0, 2.0, 3.0})
        three = three && std::isfinite(moment(work, ell));
    bool fourth_diverges = false;
    try {
        moment(work, 4.0);
    } catch (const Divergent&) {
        fourth_diverges = true;
    }
    c.require(three && fourth_diverges, "exactly three finite moments");
    c.require(cfg.field.slot(0, 1).envelope && cfg.field.slot(0, 1).envelope->k == 3, "declared k = 3");

    c.require(cli_run("couple", "heavy_tail_couple.json", kScratch / "c7") == 0, "exit code");
    auto fit = read_report(kScratch / "c7" / "fit.txt");
    c.require(fit["form"] == "polynomial" && fit["status"] == "accepted", "polynomial fit accepted");
    const double ell = std::stod(fit["ell"]);
    const TVCurve curve = curve_from_csv(kScratch / "c7" / "tv_curve.csv");
    const EnvelopeFit poly = fit_envelope(curve, EnvelopeForm::Polynomial, cfg.coupling->fit_window);
    const EnvelopeFit expo = fit_envelope(curve, EnvelopeForm::Exponential, cfg.coupling->fit_window);
    c.require(ell <= 2.5, "ell <= 2.5");
    c.require(std::abs(poly.rate - ell) < 1e-9 * ell, "refit reproduces the report");
    c.require(expo.rmse > poly.rmse, "exponential rmse strictly worse");
    c.note << "ell " << ell << ", polynomial rmse " << poly.rmse << ", exponential rmse " << expo.rmse;
    return c;
}

// 8. renewal overshoot against E[xi^2]/E[xi]
Check lorden()
{
    Check c;
    const std::vector<double> levels{5.0, 10.0, 20.0};
    const std::vector<std::pair<std::string, GeneralizedIntensity>> laws{
        {"exponential", GeneralizedIntensity(ConstantRate{1.0})},
        {"deterministic", GeneralizedIntensity::deterministic(1.0)},
        {"hyperbolic", GeneralizedIntensity(HyperbolicRate{3.0})},
    };
    std::uint64_t seed = 801;
    for (const auto& [name, gi] : laws) {
        RandomStream rng = RandomStream::substream(seed++, 0);
        const auto r = lorden_overshoot_check(gi, levels, 100000, rng);
        c.require(r.all_pass(), name);
        c.note << name << " bound " << r.bound << " means";
        for (double m : r.mean_overshoot)
            c.note << " " << m;
        c.note << "; ";
    }
    return c;
}

// 9. ergodicity: both working vs both under repair, with bounded delays
Check ergodicity()
{
    Check c;
    const auto cfg = load_config(kConfigs / "ergodicity.json");
    c.require(cfg.policy.has_delays() && cfg.policy.bound() > 0.0, "nonzero bounded delays");
    double cycle = 0.0;
    for (int j = 0; j < 2; ++j) {
        double one = moment(cfg.field.slot(j, 1).base, 1.0) + moment(cfg.field.slot(j, 0).base, 1.0);
        for (PhaseTag p : {PhaseTag::SwitchingToRepair, PhaseTag::SwitchingToWork})
            if (const auto& law = cfg.policy.law(p))
                one += moment(*law, 1.0);
        cycle = std::max(cycle, one);
    }
    const double t = 50.0 * cycle;
    const std::size_t n = cfg.run.replications;
    const auto ea = sample_states(make_state(PhaseTag::Working, 0.0, PhaseTag::Working, 0.0), cfg.field, cfg.policy, t,
                                  n, cfg.run.seed);
    const auto eb = sample_states(make_state(PhaseTag::UnderRepair, 0.0, PhaseTag::UnderRepair, 0.0), cfg.field,
                                  cfg.policy, t, n, cfg.run.seed + 1);
    // phase pair x {clock < 1, clock >= 1}
    const double tv = marginal_tv(ea, eb, BinningSpec{{1.0}});
    c.require(n == 10000, "10^4 trajectories per ensemble");
    c.require(tv < 0.05, "marginal tv below 0.05");
    c.note << "mean cycle " << cycle << ", t " << t << ", tv " << tv;
    return c;
}

// 10. determinism across repeats and thread counts
Check determinism()
{
    Check c;
    const std::vector<std::pair<std::string, std::vector<std::string>>> runs{
        {"simulate", {"symmetric_simulate.json", "events.csv", "summary.csv"}},
        {"availability", {"symmetric_availability.json", "availability.csv"}},
        {"couple", {"symmetric_couple.json", "tv_curve.csv", "fit.txt"}},
        {"simulate", {"hyperbolic_gamma3.json", "events.csv", "summary.csv"}},
    };
    std::size_t compared = 0;
    int idx = 0;
    for (const auto& [cmd, files] : runs) {
        const fs::path base = kScratch / ("c10_" + std::to_string(idx++));
        std::vector<fs::path> dirs;
        for (unsigned threads : {1u, 1u, 3u}) {
            dirs.push_back(base / std::to_string(dirs.size()));
            c.require(cli_run(cmd, files[0], dirs.back(), threads) == 0, cmd + " exit code");
        }
        for (std::size_t f = 1; f < files.size(); ++f) {
            const std::string ref = slurp(dirs[0] / files[f]);
            c.require(!ref.empty(), files[f] + " written");
            for (std::size_t d = 1; d < dirs.size(); ++d) {
                c.require(slurp(dirs[d] / files[f]) == ref, files[0] + " " + files[f] + " identical");
                ++compared;
            }
        }
    }
    c.note << compared << " file pairs compared";
    return c;
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
        {"exponential-regime availability", exponential_availability},
        {"transient agreement", transient_agreement},
        {"distribution engine", distribution_engine},
        {"moments", moments},
        {"condition validators", condition_suites},
        {"coupling bound validity", coupling_bound},
        {"polynomial regime", polynomial_regime},
        {"Lorden check", lorden},
        {"ergodicity smoke", ergodicity},
        {"determinism", determinism},
    };
    fs::remove_all(kScratch);
    int failures = 0;
    int number = 0;
    for (const auto& [name, run] : criteria) {
        ++number;
        Check c;
        try {
            c = run();
        } catch (const std::exception& e) {
            c.pass = false;
            c.note << "exception: " << e.what();
        }
        failures += !c.pass;
        std::cout << (c.pass ? "PASS" : "FAIL") << " " << number << " " << name << ": " << c.note.str() << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
