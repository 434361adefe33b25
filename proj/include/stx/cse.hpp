#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stx/field.hpp"

namespace stx {

// ---------------------------------------------------------------------------
// Conditional spatial extremes model on standard Laplace margins:
//   Y(s) | Y(s0) > t*  =  a(Y(s0), h) + b(Y(s0), h) Z0(s),
// a(y, h) = y * alpha(h) with a powered-exponential alpha, b = 1 + a^beta,
// and Z0 a conditioned-Gaussian-dependence process pinned to 0 at s0 with
// delta-Laplace margins.
// ---------------------------------------------------------------------------

struct CseParams {
    double kappa = 1.0;      // alpha decay shape, (0, 2]
    double lambda_a = 1.0;   // alpha decay range, > 0
    double delta_ad = 0.0;   // asymptotic-dependence radius, >= 0
    double beta = 0.5;       // b exponent, > 0
    double phi_z = 1.0;      // residual correlation range, > 0
    double nu_z = 1.0;       // residual correlation shape, (0, 2]
    double sigma_z = 1.0;    // residual scale, > 0
    double mu_z = 0.0;       // residual location
    double delta_dl = 1.0;   // delta-Laplace shape, > 0
};

double alpha_fn(double h, const CseParams& p);
double b_fn(double y, double h, const CseParams& p);

// ---------------------------------------------------------------------------
// Delta-Laplace (exponential power) distribution: Laplace at delta=1,
// Gaussian at delta=2.
// ---------------------------------------------------------------------------

struct DeltaLaplace {
    double mu = 0.0;
    double sigma = 1.0;
    double delta = 1.0;

    double pdf(double z) const;
    double logpdf(double z) const;
    double cdf(double z) const;
    double sf(double z) const;        // upper tail, full relative precision
    double quantile(double p) const;  // p in (0, 1)
    double variance() const;

    // Match location and scale to a target mean/variance at a given shape.
    static DeltaLaplace from_moments(double mean, double var, double delta);
};

// ---------------------------------------------------------------------------
// Residual process law at a conditioning site: conditioned-Gaussian
// dependence (Schur complement of the powered-exponential covariance given
// Z_G(s0) = 0) welded to moment-matched delta-Laplace margins through a
// Gaussian copula.
// ---------------------------------------------------------------------------

struct ResidualLaw {
    std::vector<int> remote;      // 0-based site rows, excludes s0
    Eigen::VectorXd cond_mean;    // mu_Z (1 - rho(h))
    Eigen::VectorXd cond_sd;      // sigma_Z sqrt(1 - rho(h)^2)
    std::vector<DeltaLaplace> margins;
    Eigen::MatrixXd corr;         // conditioned correlation matrix
    Eigen::MatrixXd chol;         // lower Cholesky factor of corr
    double log_det_half = 0.0;    // sum of log diag(chol)
    double jitter_used = 0.0;
};

ResidualLaw residual_law(const SiteSet& sites, int s0_row, std::span<const int> remote_rows,
                         const CseParams& p);
ResidualLaw residual_law(const SiteSet& sites, int s0_row, const CseParams& p);

// ---------------------------------------------------------------------------
// Composite likelihood over conditioning sites.
// ---------------------------------------------------------------------------

struct CseConfig {
    double threshold_q = 0.95;
    std::vector<int> conditioning_sites;  // 1-based site ids; empty = all
    int remote_subsample = 50;            // 0 = all remote sites
    std::uint64_t seed = 0;
    int n_starts = 5;
    int max_evals = 6000;                 // simplex budget per start
    double tol = 1e-8;
    double beta_max = 1.0;
    bool estimate_delta_ad = false;
    double delta_ad = 0.0;                // fixed value when not estimated
    int n_threads = 0;
};

struct CompositeWorkspace {
    struct Contribution {
        int s0_row = 0;
        std::vector<int> remote_rows;
        std::vector<int> times;    // indices with Y(s0, t) > threshold
        Eigen::VectorXd dist;      // per remote site
    };
    const SpatioTemporalField* field = nullptr;
    double threshold = 0.0;        // Laplace scale
    double threshold_q = 0.0;
    std::vector<Contribution> contributions;
    int n_threads = 0;
};

CompositeWorkspace make_workspace(const SpatioTemporalField& laplace_field, const CseConfig& cfg);

double composite_nll(const CseParams& p, const CompositeWorkspace& ws);
double composite_nll(const CseParams& p, const SpatioTemporalField& laplace_field,
                     const CseConfig& cfg);

// ---------------------------------------------------------------------------
// Fitting and simulation.
// ---------------------------------------------------------------------------

struct CseFit {
    CseParams params;
    double threshold_q = 0.95;
    double threshold_t = 0.0;
    std::vector<int> conditioning_sites;  // 1-based ids
    int remote_subsample = 0;
    double nll = 0.0;
    bool converged = false;
    bool identifiability_warning = false;
    std::uint64_t seed = 0;
    double beta_max = 1.0;
};

CseFit fit_cse(const SpatioTemporalField& laplace_field, const CseConfig& cfg = {});

std::string cse_fit_to_json(const CseFit& fit);
CseFit cse_fit_from_json(const std::string& text);

struct SimulatedFields {
    std::vector<int> s0_row;     // conditioning row per field
    Eigen::MatrixXd values;      // D x n_fields, Laplace scale above threshold at s0
};

// Draw conditional fields: Y(s0) = t* + Exp(1) (exact for standard Laplace
// above a positive threshold), Z0 by Gaussian-copula sampling of the
// residual law, then Y = a + b Z0. Per-field counter seeding.
SimulatedFields simulate_cse(const CseFit& fit, const SiteSet& sites,
                             std::optional<int> fixed_s0_id, int n_fields, std::uint64_t seed);

struct ModelChiCurve {
    Eigen::VectorXd bin_lo, bin_hi;
    Eigen::VectorXd chi;       // NaN for empty bins
    std::vector<long> count;
    double u = 0.0;
};

ModelChiCurve model_chi(const CseFit& fit, const SiteSet& sites, double u, int n_fields,
                        int n_bins, std::uint64_t seed);

// Per-field percentage of remote sites exceeding the u-quantile of the
// standard Laplace, conditional on the fixed site s0 being extreme.
std::vector<double> conditional_exceedance_pct(const CseFit& fit, const SiteSet& sites, int s0_id,
                                               double u, int n_fields, std::uint64_t seed);

void write_model_chi_csv(const ModelChiCurve& mc, const std::string& path);
void write_percentages_csv(std::span<const double> pct, const std::string& path);

} // namespace stx
