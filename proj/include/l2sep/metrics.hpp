#pragma once

#include <string>
#include <vector>

namespace l2sep {

inline constexpr double kRewardFloor = -1.5;
inline constexpr double kHardStopFloor = -3.0;

struct ImprovementSample {
    std::string instance;
    double t0 = 0.0;
    double t_pi = 0.0;
    double delta = 0.0;
};

/// (t0 - t_pi) / t0. Throws ValidationError when t0 <= 0.
double rel_improvement(double t0, double t_pi);
ImprovementSample make_sample(std::string instance, double t0, double t_pi);

double clipped_reward(const std::vector<double>& deltas, double r_min = kRewardFloor);
double gap_improvement(double g0, double g_pi, double eps = 1e-9);

struct Aggregate {
    double median = 0.0;
    double iqm = 0.0;
    double mean = 0.0;
    double std = 0.0;  // population standard deviation
    std::size_t count = 0;
};

/// Quantile with linear interpolation between order statistics (q in [0, 1]).
double quantile(std::vector<double> v, double q);
/// Mean of the samples lying in [Q1, Q3], both ends inclusive.
double interquartile_mean(const std::vector<double>& v);
Aggregate aggregate(const std::vector<double>& samples);

}  // namespace l2sep
