#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stx/errors.hpp"

namespace stx {

enum class BasisKind { cubic_regression, thin_plate_1d };

// Natural cubic regression spline with knots at quantiles of the covariate.
// Coefficients are the function values at the knots; the penalty is the exact
// integrated squared second derivative (Green-Silverman band construction).
// thin_plate_1d shares the machinery: the 1-D thin-plate function space is
// the natural cubic smoothing-spline space.
struct SplineBasis {
    BasisKind kind = BasisKind::cubic_regression;
    int dim = 0;
    Eigen::VectorXd knots;
    Eigen::MatrixXd design;    // T x dim, cardinal interpolation weights
    Eigen::MatrixXd penalty;   // dim x dim, symmetric PSD, rank dim-2
    Eigen::MatrixXd curv_map;  // (dim-2) x dim, maps values to interior 2nd derivatives

    Eigen::VectorXd eval_row(double x) const;
};

SplineBasis build_basis(std::span<const double> x, BasisKind kind, int dim);

struct LocationScaleConfig {
    int grid_points = 13;       // smoothing grid, log-spaced
    double lambda_lo = 1e-3;
    double lambda_hi = 1e3;
    double tol = 1e-8;          // relative penalized-NLL change
    int max_alternations = 100;
    double ridge = 1e-8;        // numerical ridge, scaled by mean design energy
};

// Penalized Gaussian location-scale fit: y_t = mu(z_t) + sigma(z_t) R_t with
// mu and log sigma each modeled as intercept + centered gmt spline + centered
// day spline. Smoothing weights are chosen once per model by GCV on a grid,
// then (mu | sigma) blocks alternate to convergence.
struct TrendFit {
    Eigen::VectorXd coef_mu, coef_logsigma;   // constrained-basis coefficients
    double lambda_mu_gmt = 0.0, lambda_mu_day = 0.0;
    double lambda_sig_gmt = 0.0, lambda_sig_day = 0.0;
    Eigen::VectorXd knots_gmt, knots_day;
    Eigen::VectorXd mu, log_sigma;            // fitted values at the data
    double nll = 0.0;                         // Gaussian NLL, incl. constants
    double penalized_nll = 0.0;
    int alternations = 0;
    bool converged = false;
};

TrendFit fit_location_scale(std::span<const double> y, const SplineBasis& basis_gmt,
                            const SplineBasis& basis_day,
                            const LocationScaleConfig& cfg = {});

// R_t = (y_t - mu(z_t)) / sigma(z_t)
Eigen::VectorXd trend_residuals(std::span<const double> y, const TrendFit& fit);

// Penalized NLL of an arbitrary coefficient pair under the fitted smoothing
// weights; exposed for optimality checks.
double penalized_nll_at(std::span<const double> y, const TrendFit& fit,
                        const SplineBasis& basis_gmt, const SplineBasis& basis_day,
                        const Eigen::VectorXd& coef_mu, const Eigen::VectorXd& coef_logsigma,
                        double ridge = 1e-8);

// Model matrix [1 | centered gmt term | centered day term] and the two block
// penalties embedded in full coefficient space. Shared by fit and tests.
struct TermLayout {
    Eigen::MatrixXd X;          // T x p
    Eigen::MatrixXd S_gmt;      // p x p
    Eigen::MatrixXd S_day;      // p x p
    int p = 0;
};
TermLayout build_layout(const SplineBasis& basis_gmt, const SplineBasis& basis_day);

} // namespace stx
