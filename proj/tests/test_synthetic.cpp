#include <doctest.h>

#include <cmath>
#include <vector>

#include "stx/numerics.hpp"
#include "stx/synthetic.hpp"
#include "test_util.hpp"

using namespace stx;

TEST_CASE("gen_field: iid baseline moments") {
    SyntheticSpec spec;
    spec.nx = 3;
    spec.ny = 2;
    spec.n_years = 31;
    spec.season_length = 92;
    spec.dep_range = 0.0;
    spec.seed = 201;
    GeneratedField g = gen_field(spec);
    const int T = g.field.n_times();
    for (int i = 0; i < g.field.n_sites(); ++i) {
        double m = g.field.values.row(i).mean();
        CHECK(std::abs(m) < 3.0 / std::sqrt(static_cast<double>(T)));
    }
}

TEST_CASE("gen_field: gmt slope and year effects are recoverable") {
    SyntheticSpec spec;
    spec.nx = 2;
    spec.ny = 1;
    spec.n_years = 31;
    spec.season_length = 92;
    spec.gmt_slope = 2.0;
    spec.gmt_range = 1.0;
    spec.dep_range = 0.0;
    spec.seed = 203;
    GeneratedField g = gen_field(spec);
    const int T = g.field.n_times();
    std::vector<double> gmt(static_cast<std::size_t>(T)), y(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        gmt[static_cast<std::size_t>(t)] = g.cov.gmt(t);
        y[static_cast<std::size_t>(t)] = g.field.values(0, t);
    }
    CHECK(testutil::ols_slope(gmt, y) == doctest::Approx(2.0).epsilon(0.1));

    SyntheticSpec ye = spec;
    ye.gmt_slope = 0.0;
    ye.year_effect_sd = 0.5;
    ye.n_years = 60;
    ye.seed = 205;
    GeneratedField g2 = gen_field(ye);
    YearBlocks yb = year_blocks(g2.field.dates);
    std::vector<double> means;
    for (auto [lo, hi] : yb.ranges)
        means.push_back(g2.field.values.middleCols(lo, hi - lo).mean());
    double v = testutil::variance(means);
    CHECK(v > 0.15);
    CHECK(v < 0.35);
}

TEST_CASE("bvn orthant: two independent quadrature routes agree") {
    for (double rho : {-0.5, 0.0, 0.3, 0.8, 0.95}) {
        for (double u : {0.9, 0.95, 0.99}) {
            double z = norm_quantile(u);
            double a = bvn_upper_orthant(z, rho);
            double b = bvn_upper_orthant_plackett(z, rho);
            CHECK(std::abs(a - b) < 1e-6 * std::max(1e-6, a));
        }
    }
}

TEST_CASE("oracle chi values") {
    CHECK(oracle_chi_gaussian(0.0, 0.95) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(oracle_chi_gaussian(0.999, 0.95) > 0.95);  // comonotone limit
    double chi = oracle_chi_gaussian(0.8, 0.95);
    CHECK(chi > 0.3);
    CHECK(chi < 0.6);
}

TEST_CASE("oracle eta values and monotone approach to the limit") {
    CHECK(oracle_eta_gaussian_limit(0.0) == 0.5);
    CHECK(oracle_eta_gaussian_limit(0.999) == doctest::Approx(0.9995));
    CHECK(oracle_eta_gaussian_u(0.0, 0.99) == doctest::Approx(0.5).epsilon(1e-6));

    double e1 = oracle_eta_gaussian_u(0.5, 0.99);
    double e2 = oracle_eta_gaussian_u(0.5, 0.999);
    double e3 = oracle_eta_gaussian_u(0.5, 0.9999);
    double lim = oracle_eta_gaussian_limit(0.5);
    CHECK(std::abs(e2 - lim) < std::abs(e1 - lim));
    CHECK(std::abs(e3 - lim) < std::abs(e2 - lim));
    CHECK(e3 < lim);
}

TEST_CASE("generators are pure functions of (spec, seed)") {
    SyntheticSpec spec;
    spec.nx = 3;
    spec.ny = 3;
    spec.n_years = 4;
    spec.season_length = 92;
    spec.gmt_slope = 1.0;
    spec.year_effect_sd = 0.4;
    spec.dep_range = 1.5;
    spec.seed = 207;
    GeneratedField a = gen_field(spec);
    GeneratedField b = gen_field(spec);
    CHECK((a.field.values - b.field.values).cwiseAbs().maxCoeff() == 0.0);
    spec.seed = 208;
    GeneratedField c = gen_field(spec);
    CHECK((a.field.values - c.field.values).cwiseAbs().maxCoeff() > 0.0);
}
