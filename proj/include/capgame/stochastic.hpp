// Random production and demand models, and the replicate matrix that every
// expectation in the library is estimated on.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "capgame/common.hpp"

namespace capgame {

struct Uniform {
    double a = 0.0;
    double b = 1.0;
};

struct TruncatedNormal {
    double mean = 0.5;
    double sd = 0.2;
    double lo = 0.0;
    double hi = 1.0;
};

struct PointMass {
    double value = 1.0;
};

struct Empirical {
    std::vector<double> values;
};

using DistSpec = std::variant<Uniform, TruncatedNormal, PointMass, Empirical>;

struct DistMoments {
    double mean = 0.0;
    double variance = 0.0;
    double abs_third_central = 0.0;
};

void validate_dist(const DistSpec& spec);
double support_min(const DistSpec& spec);
double support_max(const DistSpec& spec);
bool is_degenerate(const DistSpec& spec);
double sample_value(const DistSpec& spec, RngStream& rng);
std::string dist_summary(const DistSpec& spec);

// Point-mass and empirical moments are exact sums; uniform and truncated
// normal are integrated on a fine grid (at least 10^4 points).
DistMoments dist_moments(const DistSpec& spec, std::size_t grid_points = 20001);

enum class GenerationKind { IidParametric, AdditiveCorrelated, Empirical };

// Per-producer output scaled to [0,1]. The additive kind draws one shared
// component per replicate plus an independent individual component per
// producer, so columns are positively correlated but exchangeable.
struct GenerationModel {
    GenerationKind kind = GenerationKind::IidParametric;
    DistSpec base = Uniform{0.0, 1.0};
    DistSpec shared = PointMass{0.0};      // additive kind only
    DistSpec individual = PointMass{0.0};  // additive kind only

    static GenerationModel iid(DistSpec base);
    static GenerationModel additive(DistSpec shared, DistSpec individual);

    double output_mean() const;
    bool is_degenerate() const;
    // Every draw must land in [0,1]; for the additive kind the two component
    // supports have to sum into [0,1].
    void validate() const;
};

// Bounded demand with min bounded away from zero. Only point-mass, uniform
// and empirical specs are accepted.
struct DemandModel {
    DistSpec dist = PointMass{1.0};

    double min_value() const;
    double max_value() const;
    double demand_mean() const;
    void validate() const;
};

// Immutable matrix of joint draws: R replicates of (Z_1..Z_N, D). Identical
// (models, n, r, seed) always reproduce the identical set bit-for-bit.
//
// Draw order inside replicate k, stream (seed, k): shared component first
// (additive kind), then producer components in index order, then demand.
class SampleSet {
public:
    SampleSet(std::size_t replicates, std::size_t producers,
              std::uint64_t seed, std::vector<double> z, std::vector<double> d);

    std::size_t replicates() const { return replicates_; }
    std::size_t producers() const { return producers_; }
    std::uint64_t seed() const { return seed_; }

    double z(std::size_t k, std::size_t i) const {
        return z_[k * producers_ + i];
    }
    double d(std::size_t k) const { return d_[k]; }

    std::span<const double> z_row(std::size_t k) const {
        return {z_.data() + k * producers_, producers_};
    }
    std::span<const double> z_flat() const { return z_; }
    std::span<const double> d_all() const { return d_; }

    double demand_sample_mean() const;

private:
    std::size_t replicates_ = 0;
    std::size_t producers_ = 0;
    std::uint64_t seed_ = 0;
    std::vector<double> z_;  // row-major, replicates x producers
    std::vector<double> d_;
};

SampleSet sample(const GenerationModel& generation, const DemandModel& demand,
                 std::size_t producers, std::size_t replicates,
                 std::uint64_t seed);

// (mean, variance, centered third absolute moment) of one producer's output.
// Defined for the iid-parametric and empirical kinds.
DistMoments moments(const GenerationModel& model);

}  // namespace capgame
