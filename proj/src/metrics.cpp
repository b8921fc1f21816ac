#include "l2sep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "l2sep/common.hpp"

namespace l2sep {

double rel_improvement(double t0, double t_pi) {
    if (!(t0 > 0.0)) throw ValidationError("rel_improvement: reference value must be positive, got " + std::to_string(t0));
    return (t0 - t_pi) / t0;
}

ImprovementSample make_sample(std::string instance, double t0, double t_pi) {
    return {std::move(instance), t0, t_pi, rel_improvement(t0, t_pi)};
}

double clipped_reward(const std::vector<double>& deltas, double r_min) {
    if (deltas.empty()) throw ValidationError("clipped_reward: no samples");
    double s = 0.0;
    for (double d : deltas) s += std::max(d, r_min);
    return s / static_cast<double>(deltas.size());
}

double gap_improvement(double g0, double g_pi, double eps) {
    return (g0 - g_pi) / (std::max(g0, g_pi) + eps);
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw ValidationError("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0) return v[lo];
    return v[lo] + frac * (v[hi] - v[lo]);
}

double interquartile_mean(const std::vector<double>& v) {
    const double q1 = quantile(v, 0.25), q3 = quantile(v, 0.75);
    double s = 0.0;
    std::size_t n = 0;
    for (double x : v)
        if (x >= q1 && x <= q3) {
            s += x;
            ++n;
        }
    // linear interpolation can put both quartiles strictly between two samples
    if (n == 0) return 0.5 * (q1 + q3);
    return s / static_cast<double>(n);
}

Aggregate aggregate(const std::vector<double>& samples) {
    if (samples.empty()) throw ValidationError("aggregate of an empty sample");
    Aggregate a;
    a.count = samples.size();
    a.median = quantile(samples, 0.5);
    a.iqm = interquartile_mean(samples);
    a.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
    double ss = 0.0;
    for (double x : samples) ss += (x - a.mean) * (x - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(samples.size()));
    return a;
}

}  // namespace l2sep
