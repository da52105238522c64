// PV profile ingestion: delimited-text loading, per-site normalization,
// cross-site correlation, and the additive-model fit used by the case study.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "capgame/stochastic.hpp"

namespace capgame {

// T timestamps x S sites of power output. Site-native units on load,
// unitless in [0,1] after normalize().
struct ProfileMatrix {
    std::vector<std::string> timestamps;  // length T
    std::vector<std::string> sites;       // length S
    std::vector<double> values;           // row-major, T x S
    std::size_t dropped_rows = 0;         // unusable rows removed on load

    std::size_t rows() const { return timestamps.size(); }
    std::size_t cols() const { return sites.size(); }
    double at(std::size_t t, std::size_t s) const {
        return values[t * sites.size() + s];
    }
};

struct TextFormat {
    char delimiter = ',';
};

// One timestamp column plus one numeric column per site; header row carries
// the site identifiers. Rows with missing, non-numeric or negative entries
// are dropped and counted.
ProfileMatrix load_profiles(const std::string& path,
                            const TextFormat& format = {});

// Each site divided by its own maximum; idempotent.
ProfileMatrix normalize(const ProfileMatrix& p);

// Pearson correlation across timestamps for every site pair, row-major S x S.
std::vector<double> correlation_matrix(const ProfileMatrix& p);

struct AdditiveFit {
    GenerationModel model;
    double shared_variance = 0.0;
    double individual_variance = 0.0;
    double clipped_fraction = 0.0;  // residuals pushed back into support
    std::size_t night_rows_dropped = 0;
    double shared_shift = 0.0;  // offset removed from the cross-site mean
};

// Decomposes a normalized matrix into a shared per-timestamp component (the
// cross-site mean shifted so its minimum is zero) plus pooled per-site
// residuals, both returned as empirical distributions of an
// additive-correlated model. Rows whose cross-site mean falls below
// night_threshold times the maximum are dropped first; residuals outside the
// valid support are clipped and counted.
AdditiveFit fit_additive_model(const ProfileMatrix& p,
                               double night_threshold = 0.01);

}  // namespace capgame
