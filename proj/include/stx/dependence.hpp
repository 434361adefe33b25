#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stx/field.hpp"

namespace stx {

// Empirical chi_u for an ordered pair: Pr{ x_j > u-level | x_k > u-level }.
// With rank_uniformize both series are replaced by midrank/(n+1) first, which
// makes the estimate invariant to strictly increasing marginal transforms;
// without it the inputs are taken as already uniform. NaN when the
// conditioning series has no exceedances.
double chi_u_pair(std::span<const double> x_j, std::span<const double> x_k, double u,
                  bool rank_uniformize = true);

// Empirical eta_u: log(1-u) / log(joint exceedance probability), clamped to
// (0, 1]. Throws NoJointExceedances when the joint count is zero.
double eta_u_pair(std::span<const double> x_j, std::span<const double> x_k, double u,
                  bool rank_uniformize = true);

struct TimeWindow {
    Date begin;  // inclusive
    Date end;    // inclusive
};

struct PairRecord {
    int site_j = 0, site_k = 0;  // conditioning site is k
    double h = 0.0;
    double chi = 0.0;
    double eta = 0.0;  // NaN when no joint exceedances
};

struct PairwiseDependence {
    std::vector<PairRecord> pairs;  // all D(D-1) ordered pairs
    double u = 0.0;
    TimeWindow window;
};

struct SiteAverages {
    std::vector<int> site;
    std::vector<double> lon, lat;
    Eigen::VectorXd chi_bar, eta_bar;
    double u = 0.0;
    TimeWindow window;
};

struct PeriodDifference {
    std::vector<int> site;
    std::vector<double> lon, lat;
    Eigen::VectorXd d_chi, d_eta;  // window1 minus window2
    double u = 0.0;
    TimeWindow window1, window2;
};

struct DistanceBlockSummary {
    struct Row {
        double lo = 0.0, hi = 0.0;
        int n = 0;
        double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;  // NaN when empty
    };
    std::vector<Row> rows;
};

// All ordered-pair chi/eta estimates inside the window. The field may be on
// uniform or Laplace scale (Laplace is mapped through F_L); a raw-scale field
// requires reuniformize. With reuniformize each site's series is re-ranked
// within the window before thresholding.
PairwiseDependence pairwise_dependence(const SpatioTemporalField& field, double u,
                                       const TimeWindow& window, bool reuniformize = false);

SiteAverages site_averages(const PairwiseDependence& pw, const SiteSet& sites);
SiteAverages site_averages(const SpatioTemporalField& field, double u, const TimeWindow& window,
                           bool reuniformize = false);

PeriodDifference period_difference(const SpatioTemporalField& field, double u,
                                   const TimeWindow& w1, const TimeWindow& w2,
                                   bool reuniformize = false);

DistanceBlockSummary distance_blocks(const PairwiseDependence& pw, int n_blocks = 10);

// Plot-ready CSV emission.
void write_pairwise_csv(const PairwiseDependence& pw, const std::string& path);
void write_site_averages_csv(const SiteAverages& sa, const std::string& path);
void write_period_difference_csv(const PeriodDifference& pd, const std::string& path);
void write_distance_blocks_csv(const DistanceBlockSummary& db, const std::string& path);

} // namespace stx
