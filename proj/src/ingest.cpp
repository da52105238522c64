#include "capgame/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace capgame {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, delim)) out.push_back(field);
    if (!line.empty() && line.back() == delim) out.push_back("");
    return out;
}

std::string trimmed(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_number(const std::string& token, double& out) {
    const std::string t = trimmed(token);
    if (t.empty()) return false;
    std::size_t consumed = 0;
    try {
        out = std::stod(t, &consumed);
    } catch (const std::exception&) {
        return false;
    }
    return consumed == t.size() && std::isfinite(out);
}

double population_variance(std::span<const double> v) {
    if (v.empty()) return 0.0;
    const double m = mean(v);
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] - m;
        sq[i] = d * d;
    }
    return pairwise_sum(sq) / static_cast<double>(v.size());
}

}  // namespace

ProfileMatrix load_profiles(const std::string& path, const TextFormat& format) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open profile file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty-file: " + path);
    const auto header = split_line(line, format.delimiter);
    if (header.size() < 2)
        throw DataError("parse-error at line 1: header needs a timestamp "
                        "column and at least one site column");

    ProfileMatrix m;
    m.sites.assign(header.begin() + 1, header.end());
    for (auto& s : m.sites) s = trimmed(s);
    const std::size_t cols = m.sites.size();

    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trimmed(line).empty()) continue;
        const auto fields = split_line(line, format.delimiter);
        bool usable = fields.size() == cols + 1;
        std::vector<double> row(cols, 0.0);
        if (usable) {
            for (std::size_t s = 0; s < cols; ++s) {
                double v = 0.0;
                if (!parse_number(fields[s + 1], v) || v < 0.0) {
                    usable = false;
                    break;
                }
                row[s] = v;
            }
        }
        if (!usable) {
            ++m.dropped_rows;
            continue;
        }
        m.timestamps.push_back(trimmed(fields[0]));
        m.values.insert(m.values.end(), row.begin(), row.end());
    }
    if (m.rows() == 0)
        throw DataError("parse-error: no usable data rows in " + path);
    return m;
}

ProfileMatrix normalize(const ProfileMatrix& p) {
    if (p.rows() == 0 || p.cols() == 0)
        throw DataError("cannot normalize an empty matrix");
    ProfileMatrix out = p;
    const std::size_t cols = p.cols();
    for (std::size_t s = 0; s < cols; ++s) {
        double site_max = 0.0;
        for (std::size_t t = 0; t < p.rows(); ++t)
            site_max = std::max(site_max, p.at(t, s));
        if (!(site_max > 0.0))
            throw DataError("all-zero-site: " + p.sites[s]);
        for (std::size_t t = 0; t < p.rows(); ++t)
            out.values[t * cols + s] = p.at(t, s) / site_max;
    }
    return out;
}

std::vector<double> correlation_matrix(const ProfileMatrix& p) {
    const std::size_t rows = p.rows();
    const std::size_t cols = p.cols();
    if (rows < 2) throw DataError("need at least two timestamps");

    std::vector<double> means(cols, 0.0);
    std::vector<double> sds(cols, 0.0);
    std::vector<double> buf(rows);
    for (std::size_t s = 0; s < cols; ++s) {
        for (std::size_t t = 0; t < rows; ++t) buf[t] = p.at(t, s);
        means[s] = mean(buf);
        const double var = population_variance(buf);
        if (!(var > 0.0)) throw DataError("zero-variance-site: " + p.sites[s]);
        sds[s] = std::sqrt(var);
    }

    std::vector<double> corr(cols * cols, 1.0);
    for (std::size_t a = 0; a < cols; ++a) {
        for (std::size_t b = a + 1; b < cols; ++b) {
            for (std::size_t t = 0; t < rows; ++t)
                buf[t] = (p.at(t, a) - means[a]) * (p.at(t, b) - means[b]);
            const double cov = pairwise_sum(buf) / static_cast<double>(rows);
            const double c = cov / (sds[a] * sds[b]);
            corr[a * cols + b] = c;
            corr[b * cols + a] = c;
        }
    }
    return corr;
}

AdditiveFit fit_additive_model(const ProfileMatrix& p, double night_threshold) {
    const std::size_t cols = p.cols();
    if (cols < 2) throw DataError("insufficient-sites: need at least two");
    if (p.rows() < 2) throw DataError("need at least two timestamps");
    for (double v : p.values)
        if (v < 0.0 || v > 1.0 + 1e-12)
            throw ConfigError("fit needs a normalized matrix in [0,1]");

    // cross-site mean per timestamp, night rows removed
    std::vector<double> site_mean;
    std::vector<std::size_t> kept;
    site_mean.reserve(p.rows());
    double mean_max = 0.0;
    for (std::size_t t = 0; t < p.rows(); ++t) {
        double m = 0.0;
        for (std::size_t s = 0; s < cols; ++s) m += p.at(t, s);
        m /= static_cast<double>(cols);
        site_mean.push_back(m);
        mean_max = std::max(mean_max, m);
    }
    AdditiveFit fit;
    std::vector<double> shared;
    for (std::size_t t = 0; t < p.rows(); ++t) {
        if (site_mean[t] < night_threshold * mean_max) {
            ++fit.night_rows_dropped;
            continue;
        }
        kept.push_back(t);
        shared.push_back(site_mean[t]);
    }
    if (shared.size() < 2)
        throw DataError("daytime filter removed all rows");

    // Shift the mean series down just enough that residuals become
    // non-negative, but never below zero itself. Identical columns then
    // decompose into shared = mean, residuals = 0 with no clipping.
    const double min_mean = *std::min_element(shared.begin(), shared.end());
    double max_gap = 0.0;
    for (std::size_t j = 0; j < kept.size(); ++j) {
        const std::size_t t = kept[j];
        for (std::size_t s = 0; s < cols; ++s)
            max_gap = std::max(max_gap, shared[j] - p.at(t, s));
    }
    const double shift = std::min(min_mean, max_gap);
    for (double& v : shared) v -= shift;
    fit.shared_shift = shift;
    const double shared_max = *std::max_element(shared.begin(), shared.end());
    const double residual_cap = 1.0 - shared_max;

    std::vector<double> residuals;
    residuals.reserve(kept.size() * cols);
    std::size_t clipped = 0;
    for (std::size_t j = 0; j < kept.size(); ++j) {
        const std::size_t t = kept[j];
        for (std::size_t s = 0; s < cols; ++s) {
            double r = p.at(t, s) - shared[j];
            if (r < 0.0 || r > residual_cap) {
                r = std::clamp(r, 0.0, residual_cap);
                ++clipped;
            }
            residuals.push_back(r);
        }
    }
    fit.clipped_fraction =
        static_cast<double>(clipped) / static_cast<double>(residuals.size());
    fit.shared_variance = population_variance(shared);
    fit.individual_variance = population_variance(residuals);
    fit.model = GenerationModel::additive(Empirical{std::move(shared)},
                                          Empirical{std::move(residuals)});
    return fit;
}

}  // namespace capgame
