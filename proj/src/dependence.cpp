#include "stx/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "stx/numerics.hpp"
#include "stx/univariate.hpp"

namespace stx {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> rank_uniform(std::span<const double> x) {
    std::vector<double> r = midranks(x);
    double denom = static_cast<double>(x.size() + 1);
    for (double& v : r) v /= denom;
    return r;
}

} // namespace

double chi_u_pair(std::span<const double> x_j, std::span<const double> x_k, double u,
                  bool rank_uniformize) {
    if (x_j.size() != x_k.size()) throw AlignmentError("chi_u_pair: series lengths differ");
    if (!(u > 0.0 && u < 1.0)) throw DomainError("chi_u_pair: u outside (0,1)");
    std::vector<double> uj, uk;
    std::span<const double> a = x_j, b = x_k;
    if (rank_uniformize) {
        uj = rank_uniform(x_j);
        uk = rank_uniform(x_k);
        a = uj;
        b = uk;
    }
    long joint = 0, denom = 0;
    for (std::size_t t = 0; t < a.size(); ++t) {
        if (b[t] > u) {
            ++denom;
            if (a[t] > u) ++joint;
        }
    }
    if (denom == 0) return kNaN;
    return static_cast<double>(joint) / static_cast<double>(denom);
}

double eta_u_pair(std::span<const double> x_j, std::span<const double> x_k, double u,
                  bool rank_uniformize) {
    if (x_j.size() != x_k.size()) throw AlignmentError("eta_u_pair: series lengths differ");
    if (!(u > 0.0 && u < 1.0)) throw DomainError("eta_u_pair: u outside (0,1)");
    std::vector<double> uj, uk;
    std::span<const double> a = x_j, b = x_k;
    if (rank_uniformize) {
        uj = rank_uniform(x_j);
        uk = rank_uniform(x_k);
        a = uj;
        b = uk;
    }
    long joint = 0;
    for (std::size_t t = 0; t < a.size(); ++t)
        if (a[t] > u && b[t] > u) ++joint;
    if (joint == 0) throw NoJointExceedances("eta_u_pair: no joint exceedances at u");
    double p_joint = static_cast<double>(joint) / static_cast<double>(a.size());
    double eta = std::log1p(-u) / std::log(p_joint);
    return std::clamp(eta, 1e-12, 1.0);
}

namespace {

std::pair<int, int> window_index_range(const std::vector<Date>& dates, const TimeWindow& w) {
    auto lo = std::lower_bound(dates.begin(), dates.end(), w.begin);
    auto hi = std::upper_bound(dates.begin(), dates.end(), w.end);
    if (lo >= hi) throw WindowTooShort("time window contains no observations");
    return {static_cast<int>(lo - dates.begin()), static_cast<int>(hi - dates.begin())};
}

} // namespace

PairwiseDependence pairwise_dependence(const SpatioTemporalField& field, double u,
                                       const TimeWindow& window, bool reuniformize) {
    if (!(u > 0.0 && u < 1.0)) throw DomainError("pairwise_dependence: u outside (0,1)");
    if (field.scale == Scale::raw && !reuniformize)
        throw DataError("raw-scale field requires reuniformize");
    auto [lo, hi] = window_index_range(field.dates, window);
    const int n = hi - lo;
    const int D = field.n_sites();
    if ((1.0 - u) * n < 5.0)
        throw WindowTooShort("window of length " + std::to_string(n) +
                             " expects fewer than 5 exceedances at u=" + std::to_string(u));

    // per-site uniform-scale slices over the window
    Eigen::MatrixXd U(D, n);
    for (int i = 0; i < D; ++i) {
        std::vector<double> x(n);
        for (int t = 0; t < n; ++t) x[t] = field.values(i, lo + t);
        if (reuniformize) {
            std::vector<double> r = rank_uniform(x);
            for (int t = 0; t < n; ++t) U(i, t) = r[t];
        } else if (field.scale == Scale::laplace) {
            for (int t = 0; t < n; ++t) U(i, t) = from_laplace(x[t]);
        } else {
            for (int t = 0; t < n; ++t) U(i, t) = x[t];
        }
    }

    // bit masks of exceedances; joint counts via word AND
    const int words = (n + 63) / 64;
    std::vector<std::uint64_t> mask(static_cast<std::size_t>(D) * words, 0);
    std::vector<long> count(D, 0);
    for (int i = 0; i < D; ++i) {
        for (int t = 0; t < n; ++t) {
            if (U(i, t) > u) {
                mask[static_cast<std::size_t>(i) * words + t / 64] |= 1ULL << (t % 64);
                ++count[i];
            }
        }
    }

    PairwiseDependence pw;
    pw.u = u;
    pw.window = window;
    pw.pairs.reserve(static_cast<std::size_t>(D) * (D - 1));
    const double log_tail = std::log1p(-u);
    for (int k = 0; k < D; ++k) {
        for (int j = 0; j < D; ++j) {
            if (j == k) continue;
            long joint = 0;
            const std::uint64_t* mj = &mask[static_cast<std::size_t>(j) * words];
            const std::uint64_t* mk = &mask[static_cast<std::size_t>(k) * words];
            for (int w = 0; w < words; ++w) joint += __builtin_popcountll(mj[w] & mk[w]);
            PairRecord rec;
            rec.site_j = field.sites.sites[j].id;
            rec.site_k = field.sites.sites[k].id;
            rec.h = field.sites.distance(j, k);
            rec.chi = count[k] > 0 ? static_cast<double>(joint) / static_cast<double>(count[k])
                                   : kNaN;
            if (joint > 0) {
                double p_joint = static_cast<double>(joint) / static_cast<double>(n);
                rec.eta = std::clamp(log_tail / std::log(p_joint), 1e-12, 1.0);
            } else {
                rec.eta = kNaN;
            }
            pw.pairs.push_back(rec);
        }
    }
    return pw;
}

SiteAverages site_averages(const PairwiseDependence& pw, const SiteSet& sites) {
    const int D = sites.size();
    SiteAverages sa;
    sa.u = pw.u;
    sa.window = pw.window;
    sa.chi_bar = Eigen::VectorXd::Zero(D);
    sa.eta_bar = Eigen::VectorXd::Zero(D);
    std::vector<long> n_chi(D, 0), n_eta(D, 0);
    std::vector<double> sum_chi(D, 0.0), sum_eta(D, 0.0);
    for (const PairRecord& r : pw.pairs) {
        int k = r.site_k - 1;
        if (!std::isnan(r.chi)) {
            sum_chi[k] += r.chi;
            ++n_chi[k];
        }
        if (!std::isnan(r.eta)) {
            sum_eta[k] += r.eta;
            ++n_eta[k];
        }
    }
    for (int k = 0; k < D; ++k) {
        sa.site.push_back(sites.sites[k].id);
        sa.lon.push_back(sites.sites[k].lon);
        sa.lat.push_back(sites.sites[k].lat);
        sa.chi_bar(k) = n_chi[k] > 0 ? sum_chi[k] / static_cast<double>(n_chi[k]) : kNaN;
        sa.eta_bar(k) = n_eta[k] > 0 ? sum_eta[k] / static_cast<double>(n_eta[k]) : kNaN;
    }
    return sa;
}

SiteAverages site_averages(const SpatioTemporalField& field, double u, const TimeWindow& window,
                           bool reuniformize) {
    return site_averages(pairwise_dependence(field, u, window, reuniformize), field.sites);
}

PeriodDifference period_difference(const SpatioTemporalField& field, double u,
                                   const TimeWindow& w1, const TimeWindow& w2,
                                   bool reuniformize) {
    SiteAverages a = site_averages(field, u, w1, reuniformize);
    SiteAverages b = site_averages(field, u, w2, reuniformize);
    PeriodDifference pd;
    pd.site = a.site;
    pd.lon = a.lon;
    pd.lat = a.lat;
    pd.u = u;
    pd.window1 = w1;
    pd.window2 = w2;
    pd.d_chi = a.chi_bar - b.chi_bar;
    pd.d_eta = a.eta_bar - b.eta_bar;
    return pd;
}

DistanceBlockSummary distance_blocks(const PairwiseDependence& pw, int n_blocks) {
    if (n_blocks < 1) throw DomainError("distance_blocks: n_blocks must be >= 1");
    double h_max = 0.0;
    for (const PairRecord& r : pw.pairs) h_max = std::max(h_max, r.h);
    if (h_max <= 0.0) throw DomainError("distance_blocks: all pair distances are zero");

    std::vector<std::vector<double>> bins(n_blocks);
    for (const PairRecord& r : pw.pairs) {
        if (std::isnan(r.chi)) continue;
        int b = std::min(n_blocks - 1, static_cast<int>(r.h / h_max * n_blocks));
        bins[static_cast<std::size_t>(b)].push_back(r.chi);
    }

    DistanceBlockSummary out;
    for (int b = 0; b < n_blocks; ++b) {
        DistanceBlockSummary::Row row;
        row.lo = h_max * b / n_blocks;
        row.hi = h_max * (b + 1) / n_blocks;
        auto& v = bins[static_cast<std::size_t>(b)];
        row.n = static_cast<int>(v.size());
        if (v.empty()) {
            row.min = row.q1 = row.median = row.q3 = row.max = kNaN;
        } else {
            std::sort(v.begin(), v.end());
            row.min = v.front();
            row.max = v.back();
            row.q1 = quantile_sorted(v, 0.25);
            row.median = quantile_sorted(v, 0.50);
            row.q3 = quantile_sorted(v, 0.75);
        }
        out.rows.push_back(row);
    }
    return out;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    return out;
}

void print_num(std::ofstream& out, double v) {
    char buf[40];
    if (std::isnan(v)) {
        out << "nan";
    } else {
        std::snprintf(buf, sizeof(buf), "%.12g", v);
        out << buf;
    }
}

} // namespace

void write_pairwise_csv(const PairwiseDependence& pw, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "site_j,site_k,h,chi,eta\n";
    for (const PairRecord& r : pw.pairs) {
        out << r.site_j << ',' << r.site_k << ',';
        print_num(out, r.h);
        out << ',';
        print_num(out, r.chi);
        out << ',';
        print_num(out, r.eta);
        out << '\n';
    }
}

void write_site_averages_csv(const SiteAverages& sa, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "site,lon,lat,chi_bar,eta_bar\n";
    for (std::size_t i = 0; i < sa.site.size(); ++i) {
        out << sa.site[i] << ',';
        print_num(out, sa.lon[i]);
        out << ',';
        print_num(out, sa.lat[i]);
        out << ',';
        print_num(out, sa.chi_bar(static_cast<int>(i)));
        out << ',';
        print_num(out, sa.eta_bar(static_cast<int>(i)));
        out << '\n';
    }
}

void write_period_difference_csv(const PeriodDifference& pd, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "site,lon,lat,d_chi,d_eta\n";
    for (std::size_t i = 0; i < pd.site.size(); ++i) {
        out << pd.site[i] << ',';
        print_num(out, pd.lon[i]);
        out << ',';
        print_num(out, pd.lat[i]);
        out << ',';
        print_num(out, pd.d_chi(static_cast<int>(i)));
        out << ',';
        print_num(out, pd.d_eta(static_cast<int>(i)));
        out << '\n';
    }
}

void write_distance_blocks_csv(const DistanceBlockSummary& db, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "lo,hi,n,min,q1,median,q3,max\n";
    for (const auto& r : db.rows) {
        print_num(out, r.lo);
        out << ',';
        print_num(out, r.hi);
        out << ',' << r.n << ',';
        print_num(out, r.min);
        out << ',';
        print_num(out, r.q1);
        out << ',';
        print_num(out, r.median);
        out << ',';
        print_num(out, r.q3);
        out << ',';
        print_num(out, r.max);
        out << '\n';
    }
}

} // namespace stx
