#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stx/field.hpp"
#include "stx/smooth_trend.hpp"
#include "stx/univariate.hpp"

namespace stx {

enum class Pipeline { A, B, C, D };

std::string pipeline_name(Pipeline p);
Pipeline pipeline_from_name(const std::string& s);

struct SiteProvenance {
    int site_id = 0;
    std::optional<TrendFit> trend;
    std::optional<NsGpdFit> gpd;
    std::optional<ThresholdChoice> threshold;
    int pit_clamped = 0;
    std::vector<std::string> warnings;
};

struct YearlyStats {
    std::vector<int> years;
    std::vector<double> m;  // pooled yearly mean over all sites
    std::vector<double> s;  // pooled yearly sd over all sites (denominator N-1)
};

struct DetrendedField {
    SpatioTemporalField uniform;
    SpatioTemporalField laplace;
    Pipeline pipeline = Pipeline::A;
    std::vector<SiteProvenance> per_site;
    std::optional<YearlyStats> yearly;
};

struct DetrendConfig {
    double threshold_q = 0.90;
    double lrt_level = 0.05;
    LocationScaleConfig trend;
    int dim_gmt = 10;
    int dim_day = 92;
    EqdConfig eqd;           // pipeline D threshold search
    std::uint64_t seed = 0;
    int n_threads = 0;
};

// Pipeline A: midrank transform within yearly blocks, site-wise.
DetrendedField margins_a(const SpatioTemporalField& field);

// Pipeline B: penalized-spline location-scale prewhitening, LRT-selected
// non-stationary GPD tail at a constant empirical threshold, semi-parametric
// PIT, Laplace transform. All steps site-wise.
DetrendedField margins_b(const SpatioTemporalField& field, const CovariateTable& cov,
                         const DetrendConfig& cfg = {});

// Pipeline C: margins B with a pooled yearly standardization of the
// prewhitened residuals inserted before the GPD step.
DetrendedField margins_c(const SpatioTemporalField& field, const CovariateTable& cov,
                         const DetrendConfig& cfg = {});

// Pipeline D: margins C with the constant threshold replaced by the
// per-site expected-quantile-discrepancy selection; falls back to the
// constant level with a provenance warning when selection fails.
DetrendedField margins_d(const SpatioTemporalField& field, const CovariateTable& cov,
                         const DetrendConfig& cfg = {});

// Pooled yearly centering/scaling: m_k and s_k are estimated over all sites
// and all times of year k, then applied to every site's block.
struct YearlyStandardized {
    SpatioTemporalField field;
    YearlyStats stats;
};
YearlyStandardized yearly_standardize(const SpatioTemporalField& residual_field);

} // namespace stx
