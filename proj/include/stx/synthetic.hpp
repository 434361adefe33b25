#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "stx/cse.hpp"
#include "stx/field.hpp"

namespace stx {

// ---------------------------------------------------------------------------
// Synthetic field generator: site-wise location-scale trends and common year
// effects on top of a Gaussian-copula spatial noise field,
//   y_{i,t} = base + gmt_slope*gmt_t + seasonal_amp*sin(2 pi d_t / L)
//             + a_k + exp(scale_gmt_log_slope*gmt_t) * noise_sd * eps_{i,t}.
// Everything is a pure function of (spec, seed).
// ---------------------------------------------------------------------------

struct SyntheticSpec {
    int nx = 5, ny = 5;          // grid layout
    double spacing = 1.0;
    double lon0 = 32.0, lat0 = 28.0;

    int n_years = 31;
    int season_length = 92;      // days per season-year, starting July 1
    int start_year = 1985;

    double base_level = 0.0;
    double gmt_slope = 0.0;
    double seasonal_amp = 0.0;
    double year_effect_sd = 0.0;         // common across sites
    double scale_gmt_log_slope = 0.0;    // log-scale trend in gmt
    double noise_sd = 1.0;
    double gmt_range = 0.3;              // gmt ramps linearly 0..gmt_range

    double dep_range = 2.0;              // powered-exponential range; <= 0 -> iid
    double dep_smooth = 1.0;             // powered-exponential shape, (0, 2]

    std::uint64_t seed = 1;
};

struct GeneratedField {
    SpatioTemporalField field;
    CovariateTable cov;
    Eigen::VectorXd year_effects;  // the realized a_k
};

GeneratedField gen_field(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// Analytic / quadrature oracles for Gaussian-copula tail dependence. Two
// independent quadrature routes are kept so they can cross-check each other.
// ---------------------------------------------------------------------------

// P(X > z, Y > z) for a standard bivariate normal, via the conditional 1-D
// reduction integral.
double bvn_upper_orthant(double z, double rho);

// Same probability via Plackett's identity: the derivative of the orthant
// probability in rho is the bivariate density at (z, z).
double bvn_upper_orthant_plackett(double z, double rho);

double oracle_chi_gaussian(double rho, double u);
double oracle_eta_gaussian_u(double rho, double u);
double oracle_eta_gaussian_limit(double rho);  // (1 + rho) / 2

// ---------------------------------------------------------------------------
// Dense brute-force composite likelihood, independent of the cse module's
// numerics: explicit matrix inverse / determinant, delta-Laplace tail
// probabilities by adaptive quadrature of the density, normal quantile by
// bisection. Remote sets are always the full complement of the conditioning
// site. Agreement with composite_nll validates the estimator path.
// ---------------------------------------------------------------------------

double oracle_nll_dense(const CseParams& p, const SpatioTemporalField& laplace_field,
                        double threshold_q, const std::vector<int>& conditioning_site_ids);

} // namespace stx
