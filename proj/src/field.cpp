#include "stx/field.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <string_view>
#include <unordered_map>

namespace stx {

void SiteSet::validate() const {
    if (sites.size() < 2) throw DataError("site set needs at least 2 sites");
    for (std::size_t i = 0; i < sites.size(); ++i) {
        const Site& s = sites[i];
        if (s.id != static_cast<int>(i) + 1)
            throw DataError("site ids must be contiguous 1..D; found id " +
                            std::to_string(s.id) + " at position " + std::to_string(i + 1));
        if (!std::isfinite(s.lon) || !std::isfinite(s.lat))
            throw DataError("non-finite coordinates for site " + std::to_string(s.id));
    }
}

std::string scale_name(Scale s) {
    switch (s) {
        case Scale::raw: return "raw";
        case Scale::uniform: return "uniform";
        case Scale::laplace: return "laplace";
    }
    return "raw";
}

Scale scale_from_name(const std::string& name) {
    if (name == "raw") return Scale::raw;
    if (name == "uniform") return Scale::uniform;
    if (name == "laplace") return Scale::laplace;
    throw ConfigError("unknown scale '" + name + "'");
}

void SpatioTemporalField::validate() const {
    sites.validate();
    if (values.rows() != sites.size())
        throw DataError("value matrix rows do not match site count");
    if (values.cols() != static_cast<int>(dates.size()))
        throw DataError("value matrix columns do not match date count");
    for (std::size_t t = 1; t < dates.size(); ++t)
        if (!(dates[t - 1] < dates[t]))
            throw DataError("dates not strictly increasing at position " + std::to_string(t));
    if (!values.allFinite()) throw DataError("field contains non-finite values");
    if (scale == Scale::uniform) {
        if (values.minCoeff() <= 0.0 || values.maxCoeff() >= 1.0)
            throw DataError("uniform-scale field has values outside (0,1)");
    }
}

int YearBlocks::block_of(int t) const {
    for (int b = 0; b < size(); ++b)
        if (t >= ranges[b].first && t < ranges[b].second) return b;
    throw DomainError("time index outside year blocks");
}

YearBlocks year_blocks(const std::vector<Date>& dates) {
    YearBlocks yb;
    if (dates.empty()) return yb;
    int begin = 0;
    for (std::size_t t = 1; t <= dates.size(); ++t) {
        if (t == dates.size() || dates[t].year != dates[begin].year) {
            yb.years.push_back(dates[begin].year);
            yb.ranges.emplace_back(begin, static_cast<int>(t));
            begin = static_cast<int>(t);
        }
    }
    return yb;
}

std::vector<int> day_indices(const std::vector<Date>& dates) {
    std::vector<int> idx(dates.size());
    int d = 0;
    for (std::size_t t = 0; t < dates.size(); ++t) {
        d = (t > 0 && dates[t].year == dates[t - 1].year) ? d + 1 : 1;
        idx[t] = d;
    }
    return idx;
}

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view s, std::size_t line_no) {
    double v;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw ParseError("line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
    return v;
}

int parse_int(std::string_view s, std::size_t line_no) {
    int v;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw ParseError("line " + std::to_string(line_no) + ": bad integer '" + std::string(s) + "'");
    return v;
}

} // namespace

SpatioTemporalField load_field(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open field file '" + path + "'");

    struct Row {
        int site;
        double lon, lat;
        Date date;
        double value;
    };
    std::vector<Row> rows;
    std::map<int, std::pair<double, double>> coords;
    std::map<Date, int> date_ids;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "site_id,lon,lat,date,value")
                throw ParseError("line 1: expected header 'site_id,lon,lat,date,value'");
            continue;
        }
        auto f = split_csv_line(line);
        if (f.size() != 5)
            throw ParseError("line " + std::to_string(line_no) + ": expected 5 fields, got " +
                             std::to_string(f.size()));
        Row r;
        r.site = parse_int(f[0], line_no);
        r.lon = parse_double(f[1], line_no);
        r.lat = parse_double(f[2], line_no);
        r.date = parse_date(f[3]);
        r.value = parse_double(f[4], line_no);
        if (!std::isfinite(r.value))
            throw ParseError("line " + std::to_string(line_no) + ": non-finite value");

        auto it = coords.find(r.site);
        if (it == coords.end()) {
            coords.emplace(r.site, std::make_pair(r.lon, r.lat));
        } else if (it->second.first != r.lon || it->second.second != r.lat) {
            throw ParseError("line " + std::to_string(line_no) + ": inconsistent coordinates for site " +
                             std::to_string(r.site));
        }
        date_ids.emplace(r.date, 0);
        rows.push_back(r);
    }
    if (coords.empty()) throw DataError("field file '" + path + "' has no data rows");

    SpatioTemporalField f;
    f.scale = Scale::raw;
    std::unordered_map<int, int> site_pos;
    for (auto& [id, ll] : coords) {
        site_pos.emplace(id, f.sites.size());
        f.sites.sites.push_back(Site{id, ll.first, ll.second});
    }
    int ti = 0;
    for (auto& [d, pos] : date_ids) {
        pos = ti++;
        f.dates.push_back(d);
    }

    const int D = f.sites.size();
    const int T = static_cast<int>(f.dates.size());
    f.values.setConstant(D, T, std::numeric_limits<double>::quiet_NaN());
    for (const Row& r : rows) {
        int i = site_pos.at(r.site);
        int t = date_ids.at(r.date);
        if (!std::isnan(f.values(i, t)))
            throw ParseError("duplicate row for site " + std::to_string(r.site) + ", date " +
                             r.date.str());
        f.values(i, t) = r.value;
    }
    for (int i = 0; i < D; ++i)
        for (int t = 0; t < T; ++t)
            if (std::isnan(f.values(i, t)))
                throw IncompleteGrid("missing cell: site " + std::to_string(f.sites.sites[i].id) +
                                     ", date " + f.dates[t].str());

    f.validate();
    return f;
}

void write_field_csv(const SpatioTemporalField& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "site_id,lon,lat,date,value\n";
    char buf[160];
    for (int i = 0; i < f.n_sites(); ++i) {
        const Site& s = f.sites.sites[i];
        for (int t = 0; t < f.n_times(); ++t) {
            std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%s,%.17g\n", s.id, s.lon, s.lat,
                          f.dates[t].str().c_str(), f.values(i, t));
            out << buf;
        }
    }
    if (!out) throw DataError("write failed for '" + path + "'");
}

CovariateTable load_covariates(const std::string& path, const std::vector<Date>& dates) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open covariate file '" + path + "'");
    std::map<Date, double> gmt_by_date;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "date,gmt")
                throw ParseError("line 1: expected header 'date,gmt'");
            continue;
        }
        auto f = split_csv_line(line);
        if (f.size() != 2)
            throw ParseError("line " + std::to_string(line_no) + ": expected 2 fields");
        Date d = parse_date(f[0]);
        gmt_by_date[d] = parse_double(f[1], line_no);
    }

    Eigen::VectorXd gmt(dates.size());
    for (std::size_t t = 0; t < dates.size(); ++t) {
        auto it = gmt_by_date.find(dates[t]);
        if (it == gmt_by_date.end())
            throw CovariateGap("no covariate value for date " + dates[t].str());
        gmt(static_cast<int>(t)) = it->second;
    }
    return make_covariates(dates, gmt);
}

void write_covariates_csv(const CovariateTable& cov, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "date,gmt\n";
    char buf[64];
    for (int t = 0; t < cov.size(); ++t) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g\n", cov.dates[t].str().c_str(), cov.gmt(t));
        out << buf;
    }
    if (!out) throw DataError("write failed for '" + path + "'");
}

CovariateTable make_covariates(const std::vector<Date>& dates, const Eigen::VectorXd& gmt) {
    if (static_cast<int>(dates.size()) != gmt.size())
        throw DataError("covariate/date length mismatch");
    CovariateTable cov;
    cov.dates = dates;
    cov.gmt = gmt;
    cov.day_index = day_indices(dates);
    cov.season_length = cov.day_index.empty()
                            ? 0
                            : *std::max_element(cov.day_index.begin(), cov.day_index.end());
    return cov;
}

} // namespace stx
