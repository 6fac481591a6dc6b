#pragma once

#include "warmsim/errors.hpp"
#include "warmsim/intensity.hpp"
#include "warmsim/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace warmsim {

// ---------------------------------------------------------------------------
// Four-state CTMC over status pairs, the constant-intensity special case.
// ---------------------------------------------------------------------------

/// State order of CTMCSpec: (n1, n2) = (1,1), (1,0), (0,1), (0,0).
inline constexpr std::array<std::array<int, 2>, 4> kStatusPairs{{{1, 1}, {1, 0}, {0, 1}, {0, 0}}};

inline constexpr int status_pair_index(int n1, int n2) noexcept { return (1 - n1) * 2 + (1 - n2); }

using Vector4 = std::array<double, 4>;

class CTMCSpec
{
  public:
    using Matrix = std::array<std::array<double, 4>, 4>;

    /// Off-diagonal entries are taken from `rates`; the diagonal is set to minus the row sum.
    explicit CTMCSpec(const Matrix& rates)
    {
        for (int i = 0; i < 4; ++i) {
            double sum = 0.0;
            for (int j = 0; j < 4; ++j) {
                if (i == j)
                    continue;
                if (!(rates[i][j] >= 0.0) || !std::isfinite(rates[i][j]))
                    throw InvalidSpec("CTMC off-diagonal rates must be finite and >= 0");
                generator_[i][j] = rates[i][j];
                sum += rates[i][j];
            }
            generator_[i][i] = -sum;
        }
    }

    /**
     * Independent elements with per-element failure rates `lambda` and
     * repair rates `mu` (index = element).
     */
    static CTMCSpec independent(std::array<double, 2> lambda, std::array<double, 2> mu)
    {
        Matrix q{};
        for (int s = 0; s < 4; ++s) {
            for (int j = 0; j < 2; ++j) {
                auto pair = kStatusPairs[s];
                const double rate = pair[j] == 1 ? lambda[j] : mu[j];
                pair[j] = 1 - pair[j];
                q[s][status_pair_index(pair[0], pair[1])] += rate;
            }
        }
        return CTMCSpec(q);
    }

    const Matrix& generator() const noexcept { return generator_; }

  private:
    Matrix generator_{};
};

namespace detail {

inline std::array<std::array<bool, 4>, 4> reachability(const CTMCSpec::Matrix& q)
{
    std::array<std::array<bool, 4>, 4> r{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            r[i][j] = i == j || q[i][j] > 0.0;
    for (int k = 0; k < 4; ++k)
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                r[i][j] = r[i][j] || (r[i][k] && r[k][j]);
    return r;
}

/// Solves A x = b in place by Gaussian elimination with partial pivoting.
template <std::size_t N>
std::array<double, N> solve_dense(std::array<std::array<double, N>, N> a, std::array<double, N> b)
{
    for (std::size_t col = 0; col < N; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < N; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col]))
                pivot = r;
        if (std::abs(a[pivot][col]) < 1e-300)
            throw NumericFailure("singular linear system in CTMC solve");
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < N; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < N; ++c)
                a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::array<double, N> x{};
    for (std::size_t i = N; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < N; ++c)
            s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return x;
}

} // namespace detail

/**
 * Stationary vector of the chain. The chain must have exactly one closed
 * communicating class; transient states get probability 0.
 */
inline Vector4 ctmc_stationary(const CTMCSpec& spec)
{
    const auto& q = spec.generator();
    const auto reach = detail::reachability(q);
    // A state is recurrent iff everything it reaches can reach it back.
    std::array<bool, 4> recurrent{};
    for (int i = 0; i < 4; ++i) {
        recurrent[i] = true;
        for (int j = 0; j < 4; ++j)
            if (reach[i][j] && !reach[j][i])
                recurrent[i] = false;
    }
    int root = -1;
    for (int i = 0; i < 4; ++i) {
        if (!recurrent[i])
            continue;
        if (root < 0)
            root = i;
        else if (!reach[root][i])
            throw InvalidSpec("CTMC has more than one closed class; stationary law is not unique");
    }
    if (root < 0)
        throw NumericFailure("CTMC has no recurrent state");

    // pi Q = 0 with sum(pi) = 1, restricted to the closed class.
    std::array<std::array<double, 4>, 4> a{};
    Vector4 b{};
    for (int eq = 0; eq < 4; ++eq) {
        for (int i = 0; i < 4; ++i)
            a[eq][i] = recurrent[i] && recurrent[eq] ? q[i][eq] : (i == eq ? 1.0 : 0.0);
    }
    // Replace the balance equation of the first recurrent state with normalization.
    for (int i = 0; i < 4; ++i)
        a[root][i] = recurrent[i] ? 1.0 : 0.0;
    b[root] = 1.0;
    Vector4 pi = detail::solve_dense<4>(a, b);
    for (auto& p : pi)
        if (std::abs(p) < 1e-300)
            p = 0.0;

    double residual = 0.0;
    for (int j = 0; j < 4; ++j) {
        double s = 0.0;
        for (int i = 0; i < 4; ++i)
            s += pi[i] * q[i][j];
        residual = std::max(residual, std::abs(s));
    }
    double scale = 0.0;
    for (int i = 0; i < 4; ++i)
        scale = std::max(scale, std::abs(q[i][i]));
    if (residual > 1e-12 * std::max(1.0, scale))
        throw NumericFailure("CTMC balance residual " + std::to_string(residual) + " exceeds 1e-12");
    return pi;
}

inline constexpr double kUniformizationTailBound = 1e-10;

/// Transient law at time t by uniformization, Poisson truncation error <= 1e-10.
inline Vector4 ctmc_transient(const CTMCSpec& spec, const Vector4& initial, double t)
{
    if (!(t >= 0.0))
        throw InvalidSpec("transient time must be >= 0");
    const auto& q = spec.generator();
    double rate = 0.0;
    for (int i = 0; i < 4; ++i)
        rate = std::max(rate, -q[i][i]);
    if (t == 0.0 || rate == 0.0)
        return initial;

    std::array<std::array<double, 4>, 4> p{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            p[i][j] = (i == j ? 1.0 : 0.0) + q[i][j] / rate;

    const double m = rate * t;
    const auto right = static_cast<long long>(std::ceil(m + 12.0 * std::sqrt(m) + 30.0));
    const auto left = std::max(0LL, static_cast<long long>(std::floor(m - 12.0 * std::sqrt(m) - 30.0)));

    Vector4 v = initial;
    Vector4 result{};
    double weight_sum = 0.0;
    for (long long k = 0; k <= right; ++k) {
        if (k >= left) {
            const double w = std::exp(-m + static_cast<double>(k) * std::log(m) - std::lgamma(static_cast<double>(k) + 1.0));
            weight_sum += w;
            for (int i = 0; i < 4; ++i)
                result[i] += w * v[i];
        }
        Vector4 next{};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                next[j] += v[i] * p[i][j];
        v = next;
    }
    if (1.0 - weight_sum > kUniformizationTailBound)
        throw NumericFailure("uniformization truncation mass " + std::to_string(1.0 - weight_sum) + " exceeds bound");
    return result;
}

// ---------------------------------------------------------------------------
// Goodness of fit.
// ---------------------------------------------------------------------------

/**
 * Kolmogorov-Smirnov distance between the empirical law of `samples` and a
 * model CDF. Tied samples (atoms) are compared against both one-sided limits:
 * the empirical CDF just before the tie against cdf_left, just after against cdf.
 */
inline double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf,
                           const std::function<double(double)>& cdf_left = {})
{
    if (samples.empty())
        throw InvalidSpec("KS statistic needs at least one sample");
    std::vector<double> xs(samples.begin(), samples.end());
    std::sort(xs.begin(), xs.end());
    const auto n = static_cast<double>(xs.size());
    const auto& left = cdf_left ? cdf_left : cdf;
    double d = 0.0;
    std::size_t i = 0;
    while (i < xs.size()) {
        std::size_t j = i;
        while (j < xs.size() && xs[j] == xs[i])
            ++j;
        const double below = static_cast<double>(i) / n;
        const double above = static_cast<double>(j) / n;
        d = std::max({d, std::abs(above - cdf(xs[i])), std::abs(below - left(xs[i]))});
        i = j;
    }
    return d;
}

inline double ks_statistic(const std::vector<double>& samples, const std::function<double(double)>& cdf,
                           const std::function<double(double)>& cdf_left = {})
{
    return ks_statistic(std::span<const double>(samples), cdf, cdf_left);
}

// ---------------------------------------------------------------------------
// Renewal overshoot against the classical Lorden bound E[xi^2] / E[xi].
// ---------------------------------------------------------------------------

struct OvershootReport
{
    std::vector<double> levels;
    std::vector<double> mean_overshoot;
    std::vector<double> standard_error;
    std::vector<std::size_t> samples;
    std::vector<bool> pass;
    double bound = 0.0;

    bool all_pass() const { return std::all_of(pass.begin(), pass.end(), [](bool b) { return b; }); }
};

/**
 * For each level x, simulates `replications` renewal paths with i.i.d.
 * increments from `gi` and records S_{N(x)} - x, where N(x) is the first
 * index with S_n > x. A level passes when the mean overshoot is at most
 * E[xi^2]/E[xi] + 3 standard errors.
 */
template <class Stream>
OvershootReport lorden_overshoot_check(const GeneralizedIntensity& gi, const std::vector<double>& levels,
                                       std::size_t replications, Stream& rng)
{
    OvershootReport report;
    const double m1 = moment(gi, 1.0);
    double m2 = 0.0;
    try {
        m2 = moment(gi, 2.0);
    } catch (const Divergent& e) {
        throw Divergent(std::string("increment law has an infinite second moment: ") + e.what());
    }
    if (!(m1 > 0.0))
        throw InvalidSpec("renewal increments must have a positive mean");
    report.bound = m2 / m1;
    for (double level : levels) {
        double sum = 0.0;
        double sum_sq = 0.0;
        for (std::size_t r = 0; r < replications; ++r) {
            double s = 0.0;
            while (s <= level)
                s += gi.sample(rng);
            const double o = s - level;
            sum += o;
            sum_sq += o * o;
        }
        const auto n = static_cast<double>(replications);
        const double mean = sum / n;
        const double var = replications > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
        const double se = std::sqrt(var / n);
        report.levels.push_back(level);
        report.mean_overshoot.push_back(mean);
        report.standard_error.push_back(se);
        report.samples.push_back(replications);
        report.pass.push_back(mean <= report.bound + 3.0 * se);
    }
    return report;
}

} // namespace warmsim
