#include "stx/detrend.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "stx/numerics.hpp"

namespace stx {

std::string pipeline_name(Pipeline p) {
    switch (p) {
        case Pipeline::A: return "A";
        case Pipeline::B: return "B";
        case Pipeline::C: return "C";
        case Pipeline::D: return "D";
    }
    return "A";
}

Pipeline pipeline_from_name(const std::string& s) {
    if (s == "A" || s == "a") return Pipeline::A;
    if (s == "B" || s == "b") return Pipeline::B;
    if (s == "C" || s == "c") return Pipeline::C;
    if (s == "D" || s == "d") return Pipeline::D;
    throw ConfigError("unknown pipeline '" + s + "'");
}

namespace {

DetrendedField make_output(const SpatioTemporalField& field, Pipeline p) {
    DetrendedField out;
    out.pipeline = p;
    out.uniform.sites = field.sites;
    out.uniform.dates = field.dates;
    out.uniform.values.resize(field.n_sites(), field.n_times());
    out.uniform.scale = Scale::uniform;
    out.laplace = out.uniform;
    out.laplace.scale = Scale::laplace;
    out.per_site.resize(field.n_sites());
    return out;
}

void fill_laplace(DetrendedField& out) {
    const auto& u = out.uniform.values;
    auto& l = out.laplace.values;
    for (int i = 0; i < u.rows(); ++i)
        for (int t = 0; t < u.cols(); ++t) l(i, t) = to_laplace(u(i, t));
}

} // namespace

DetrendedField margins_a(const SpatioTemporalField& field) {
    if (field.scale != Scale::raw) throw DataError("margins_a expects a raw-scale field");
    field.validate();
    DetrendedField out = make_output(field, Pipeline::A);
    YearBlocks yb = year_blocks(field.dates);

    for (int i = 0; i < field.n_sites(); ++i) {
        out.per_site[i].site_id = field.sites.sites[i].id;
        for (int b = 0; b < yb.size(); ++b) {
            auto [lo, hi] = yb.ranges[b];
            const int len = hi - lo;
            std::vector<double> block(len);
            for (int t = 0; t < len; ++t) block[t] = field.values(i, lo + t);
            std::vector<double> rank = midranks(block);
            for (int t = 0; t < len; ++t)
                out.uniform.values(i, lo + t) = rank[t] / static_cast<double>(len + 1);
        }
    }
    fill_laplace(out);
    return out;
}

YearlyStandardized yearly_standardize(const SpatioTemporalField& residual_field) {
    YearBlocks yb = year_blocks(residual_field.dates);
    const int D = residual_field.n_sites();

    YearlyStandardized out;
    out.field = residual_field;
    out.stats.years = yb.years;
    out.stats.m.resize(yb.size());
    out.stats.s.resize(yb.size());

    for (int b = 0; b < yb.size(); ++b) {
        auto [lo, hi] = yb.ranges[b];
        const long n = static_cast<long>(D) * (hi - lo);
        double mean = residual_field.values.middleCols(lo, hi - lo).mean();
        double ss = (residual_field.values.middleCols(lo, hi - lo).array() - mean).square().sum();
        double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
        if (!(sd > 0.0))
            throw DegenerateYear("yearly_standardize: zero pooled sd in year " +
                                 std::to_string(yb.years[b]));
        out.stats.m[b] = mean;
        out.stats.s[b] = sd;
        out.field.values.middleCols(lo, hi - lo) =
            (residual_field.values.middleCols(lo, hi - lo).array() - mean) / sd;
    }
    return out;
}

namespace {

// Shared driver for pipelines B, C and D. Stage 1 prewhitens each site,
// stage 2 (C, D) pools the yearly standardization across sites, stage 3
// runs the tail model and the PIT per site.
DetrendedField margins_bcd(const SpatioTemporalField& field, const CovariateTable& cov,
                           const DetrendConfig& cfg, Pipeline pipe) {
    if (field.scale != Scale::raw) throw DataError("margins pipeline expects a raw-scale field");
    field.validate();
    if (cov.size() != field.n_times())
        throw AlignmentError("covariate table does not align with field dates");

    const int D = field.n_sites();
    const int T = field.n_times();

    std::vector<double> gmt(cov.gmt.data(), cov.gmt.data() + cov.gmt.size());
    std::vector<double> day(cov.day_index.begin(), cov.day_index.end());
    int distinct_gmt = static_cast<int>(std::set<double>(gmt.begin(), gmt.end()).size());
    int distinct_day = static_cast<int>(std::set<double>(day.begin(), day.end()).size());
    int dim_gmt = std::min(cfg.dim_gmt, distinct_gmt);
    int dim_day = std::min(cfg.dim_day, distinct_day);
    SplineBasis basis_gmt = build_basis(gmt, BasisKind::thin_plate_1d, dim_gmt);
    SplineBasis basis_day = build_basis(day, BasisKind::cubic_regression, dim_day);

    DetrendedField out = make_output(field, pipe);

    // stage 1: site-wise location-scale prewhitening
    SpatioTemporalField resid = field;
    parallel_for(static_cast<std::size_t>(D), [&](std::size_t i) {
        std::vector<double> y(T);
        for (int t = 0; t < T; ++t) y[t] = field.values(static_cast<int>(i), t);
        TrendFit tf;
        try {
            tf = fit_location_scale(y, basis_gmt, basis_day, cfg.trend);
        } catch (const FitError& e) {
            throw FitFailure("site " + std::to_string(field.sites.sites[i].id) + ": " + e.what());
        }
        Eigen::VectorXd r = trend_residuals(y, tf);
        resid.values.row(static_cast<int>(i)) = r.transpose();
        out.per_site[i].site_id = field.sites.sites[i].id;
        out.per_site[i].trend = std::move(tf);
    }, cfg.n_threads);

    // stage 2: pooled yearly standardization (C and D only)
    if (pipe == Pipeline::C || pipe == Pipeline::D) {
        YearlyStandardized ys = yearly_standardize(resid);
        resid = std::move(ys.field);
        out.yearly = std::move(ys.stats);
    }

    // stage 3: site-wise tail model and PIT
    parallel_for(static_cast<std::size_t>(D), [&](std::size_t i) {
        SiteProvenance& prov = out.per_site[i];
        std::vector<double> r(T);
        for (int t = 0; t < T; ++t) r[t] = resid.values(static_cast<int>(i), t);
        std::vector<double> sorted = r;
        std::sort(sorted.begin(), sorted.end());

        double q = cfg.threshold_q;
        if (pipe == Pipeline::D) {
            // seeds are shared across sites so that per-site results depend
            // only on the site's own series (exact site-separability)
            EqdConfig eqd = cfg.eqd;
            eqd.seed = splitmix64(cfg.seed + 7919);
            try {
                ThresholdChoice tc = select_threshold_eqd(r, eqd);
                q = tc.q_star;
                prov.threshold = std::move(tc);
            } catch (const SelectionFailure& e) {
                q = cfg.threshold_q;
                prov.warnings.push_back(std::string("eqd selection failed, using constant level: ") +
                                        e.what());
            }
        }

        double u = quantile_sorted(sorted, q);
        TrendSelection sel;
        try {
            sel = select_trend_lrt(r, cov, u, q, cfg.lrt_level, splitmix64(cfg.seed + 104729));
        } catch (const FitError& e) {
            throw FitFailure("site " + std::to_string(field.sites.sites[i].id) + ": " + e.what());
        }
        PitResult pit = semiparametric_pit(r, sel.fit, cov);
        if (pit.n_clamped > 0)
            prov.warnings.push_back(std::to_string(pit.n_clamped) +
                                    " PIT values clamped at the upper support bound");
        prov.gpd = std::move(sel.fit);
        prov.pit_clamped = pit.n_clamped;
        out.uniform.values.row(static_cast<int>(i)) = pit.u.transpose();
    }, cfg.n_threads);

    fill_laplace(out);
    return out;
}

} // namespace

DetrendedField margins_b(const SpatioTemporalField& field, const CovariateTable& cov,
                         const DetrendConfig& cfg) {
    return margins_bcd(field, cov, cfg, Pipeline::B);
}

DetrendedField margins_c(const SpatioTemporalField& field, const CovariateTable& cov,
                         const DetrendConfig& cfg) {
    return margins_bcd(field, cov, cfg, Pipeline::C);
}

DetrendedField margins_d(const SpatioTemporalField& field, const CovariateTable& cov,
                         const DetrendConfig& cfg) {
    return margins_bcd(field, cov, cfg, Pipeline::D);
}

} // namespace stx
