#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stx/date.hpp"
#include "stx/errors.hpp"

namespace stx {

struct Site {
    int id = 0;  // 1-based, contiguous
    double lon = 0.0;
    double lat = 0.0;
};

struct SiteSet {
    std::vector<Site> sites;

    int size() const { return static_cast<int>(sites.size()); }

    // Euclidean distance in the coordinate units as given. Callers working in
    // degrees own the degrees-vs-km interpretation.
    double distance(int j, int k) const {
        double dx = sites[j].lon - sites[k].lon;
        double dy = sites[j].lat - sites[k].lat;
        return std::sqrt(dx * dx + dy * dy);
    }

    void validate() const;
};

enum class Scale { raw, uniform, laplace };

std::string scale_name(Scale s);
Scale scale_from_name(const std::string& name);

// Complete D x T panel of one variable over a fixed site set.
struct SpatioTemporalField {
    SiteSet sites;
    std::vector<Date> dates;   // strictly increasing
    Eigen::MatrixXd values;    // D x T
    Scale scale = Scale::raw;

    int n_sites() const { return static_cast<int>(values.rows()); }
    int n_times() const { return static_cast<int>(values.cols()); }

    void validate() const;
};

// Per-date covariates shared by all sites: global mean temperature anomaly
// and the day index within the season-year (resets to 1 at year boundaries).
struct CovariateTable {
    std::vector<Date> dates;
    Eigen::VectorXd gmt;
    std::vector<int> day_index;
    int season_length = 0;  // max day index

    int size() const { return static_cast<int>(dates.size()); }
};

// Consecutive partition of time indices by calendar year.
struct YearBlocks {
    std::vector<int> years;                       // calendar year per block
    std::vector<std::pair<int, int>> ranges;      // [begin, end) time index

    int size() const { return static_cast<int>(ranges.size()); }
    int block_of(int t) const;
};

YearBlocks year_blocks(const std::vector<Date>& dates);
inline YearBlocks year_blocks(const SpatioTemporalField& f) { return year_blocks(f.dates); }

// Day indices (1..L per year) derived from a date sequence.
std::vector<int> day_indices(const std::vector<Date>& dates);

// ---------------------------------------------------------------------------
// CSV ingestion / emission.
//
// Field files are long format with header `site_id,lon,lat,date,value`, one
// row per (site, date) cell, complete grid required. Covariate files carry
// `date,gmt`. Values are written with 17 significant digits so a write->read
// round trip is bit exact.
// ---------------------------------------------------------------------------

SpatioTemporalField load_field(const std::string& path);
void write_field_csv(const SpatioTemporalField& f, const std::string& path);

CovariateTable load_covariates(const std::string& path, const std::vector<Date>& dates);
void write_covariates_csv(const CovariateTable& cov, const std::string& path);

// Covariate table built directly from arrays (synthetic data path).
CovariateTable make_covariates(const std::vector<Date>& dates, const Eigen::VectorXd& gmt);

} // namespace stx
