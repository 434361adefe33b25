#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stx/field.hpp"

namespace stx {

// Minimum exceedance count for any GPD fit; below this the MLE is unstable
// and likelihood-ratio asymptotics are meaningless.
inline constexpr std::size_t kMinExceedances = 10;

// Shape values closer to zero than this use the exponential limit form.
inline constexpr double kXiZeroEps = 1e-8;

// ---------------------------------------------------------------------------
// Generalized Pareto distribution for threshold excesses.
// ---------------------------------------------------------------------------

struct GpdParams {
    double sigma = 1.0;  // scale > 0
    double xi = 0.0;     // shape
};

double gpd_cdf(double x, const GpdParams& p);
double gpd_quantile(double prob, const GpdParams& p);
double gpd_logpdf(double x, const GpdParams& p);

struct GpdFit {
    GpdParams params;
    double nll = 0.0;
    std::size_t n = 0;
};

// Maximum likelihood on excesses (all > 0), derivative-free simplex over
// (log sigma, xi) with xi box-constrained to (-0.9, 1.0), multi-start.
GpdFit fit_gpd(std::span<const double> excesses, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Non-stationary GPD: log sigma_u(z_t) linear in the trend design, constant
// shape. Trends use gmt for "linear" and one harmonic pair in the day index
// for "seasonal".
// ---------------------------------------------------------------------------

enum class TrendType { none, linear, seasonal, both };

std::string trend_name(TrendType t);
TrendType trend_from_name(const std::string& s);
int trend_dim(TrendType t);  // design columns including intercept

struct NsGpdFit {
    double threshold_q = 0.0;      // empirical level of the threshold
    double threshold_value = 0.0;
    TrendType trend = TrendType::none;
    Eigen::VectorXd beta_sigma;    // coefficients of log sigma_u(z)
    double xi = 0.0;
    double nll = 0.0;
    std::size_t n_exceed = 0;

    double log_sigma_at(double gmt, int day, int season_length) const;
};

NsGpdFit fit_gpd_ns(std::span<const double> residuals, const CovariateTable& cov,
                    double threshold_value, double threshold_q, TrendType trend,
                    std::uint64_t seed = 0);

// Forward likelihood-ratio selection among none / linear / seasonal / both
// on the GPD scale trend, at significance `level`.
struct TrendSelection {
    TrendType chosen = TrendType::none;
    NsGpdFit fit;
    double dev_linear = 0.0, dev_seasonal = 0.0, dev_both = 0.0;
};

TrendSelection select_trend_lrt(std::span<const double> residuals, const CovariateTable& cov,
                                double threshold_value, double threshold_q,
                                double level = 0.05, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Semi-parametric probability integral transform: midranks below the
// threshold, fitted GPD tail above it.
// ---------------------------------------------------------------------------

struct PitResult {
    Eigen::VectorXd u;   // values in (0, 1)
    int n_clamped = 0;   // finite-support overshoots clamped to 1 - 1e-10
};

PitResult semiparametric_pit(std::span<const double> residuals, const NsGpdFit& fit,
                             const CovariateTable& cov);

// Standard Laplace marginal transform and inverse.
double to_laplace(double u);
double from_laplace(double x);
Eigen::VectorXd to_laplace(const Eigen::VectorXd& u);
Eigen::VectorXd from_laplace(const Eigen::VectorXd& x);

// ---------------------------------------------------------------------------
// Automated threshold selection minimizing the expected quantile discrepancy
// between sample quantiles of bootstrap-resampled excesses and fitted GPD
// quantiles, over a candidate grid of quantile levels.
// ---------------------------------------------------------------------------

struct EqdConfig {
    std::vector<double> candidate_grid;  // empty -> 0.50..0.95 step 0.025
    int n_boot = 100;
    int n_prob = 20;          // probe levels, equally spaced inside (0, prob_hi)
    double prob_hi = 0.99;
    std::uint64_t seed = 0;

    std::vector<double> grid() const;
};

struct ThresholdChoice {
    double q_star = 0.0;
    std::vector<std::pair<double, double>> eqd_curve;  // (level, discrepancy)
};

ThresholdChoice select_threshold_eqd(std::span<const double> series, const EqdConfig& cfg = {});

} // namespace stx
