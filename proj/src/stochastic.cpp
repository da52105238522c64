#include "capgame/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

namespace capgame {

namespace {

bool finite(double x) { return std::isfinite(x); }

const boost::math::normal_distribution<double>& unit_normal() {
    static const boost::math::normal_distribution<double> n(0.0, 1.0);
    return n;
}

double normal_cdf(double x) { return boost::math::cdf(unit_normal(), x); }

double normal_quantile(double p) {
    p = std::clamp(p, 1e-16, 1.0 - 1e-16);
    return boost::math::quantile(unit_normal(), p);
}

// Truncated-normal density normalizer
double tn_mass(const TruncatedNormal& t) {
    const double alpha = (t.lo - t.mean) / t.sd;
    const double beta = (t.hi - t.mean) / t.sd;
    return normal_cdf(beta) - normal_cdf(alpha);
}

// Simpson integration of f over [lo, hi] on an odd-sized grid.
template <typename F>
double simpson(F f, double lo, double hi, std::size_t points) {
    if (points % 2 == 0) ++points;
    if (points < 3) points = 3;
    const std::size_t n = points - 1;  // even interval count
    const double h = (hi - lo) / static_cast<double>(n);
    double s = f(lo) + f(hi);
    for (std::size_t i = 1; i < n; ++i) {
        const double x = lo + h * static_cast<double>(i);
        s += f(x) * ((i % 2 == 1) ? 4.0 : 2.0);
    }
    return s * h / 3.0;
}

template <typename Density>
DistMoments grid_moments(Density density, double lo, double hi,
                         std::size_t points) {
    DistMoments m;
    m.mean = simpson([&](double x) { return x * density(x); }, lo, hi, points);
    m.variance = simpson(
        [&](double x) {
            const double d = x - m.mean;
            return d * d * density(x);
        },
        lo, hi, points);
    m.abs_third_central = simpson(
        [&](double x) {
            const double d = std::abs(x - m.mean);
            return d * d * d * density(x);
        },
        lo, hi, points);
    return m;
}

DistMoments empirical_moments(const std::vector<double>& v) {
    DistMoments m;
    m.mean = mean(v);
    std::vector<double> buf(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] - m.mean;
        buf[i] = d * d;
    }
    m.variance = pairwise_sum(buf) / static_cast<double>(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = std::abs(v[i] - m.mean);
        buf[i] = d * d * d;
    }
    m.abs_third_central = pairwise_sum(buf) / static_cast<double>(v.size());
    return m;
}

}  // namespace

void validate_dist(const DistSpec& spec) {
    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Uniform>) {
                if (!finite(s.a) || !finite(s.b) || !(s.a < s.b))
                    throw ConfigError("invalid-distribution: uniform needs a < b");
            } else if constexpr (std::is_same_v<T, TruncatedNormal>) {
                if (!finite(s.mean) || !(s.sd > 0.0))
                    throw ConfigError(
                        "invalid-distribution: truncated-normal needs sd > 0");
                if (!finite(s.lo) || !finite(s.hi) || !(s.lo < s.hi))
                    throw ConfigError(
                        "invalid-distribution: truncated-normal needs lo < hi");
            } else if constexpr (std::is_same_v<T, PointMass>) {
                if (!finite(s.value))
                    throw ConfigError("invalid-distribution: point mass not finite");
            } else {
                if (s.values.empty())
                    throw ConfigError("invalid-distribution: empirical needs values");
                for (double v : s.values)
                    if (!finite(v))
                        throw ConfigError(
                            "invalid-distribution: empirical value not finite");
            }
        },
        spec);
}

double support_min(const DistSpec& spec) {
    return std::visit(
        [](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Uniform>) return s.a;
            else if constexpr (std::is_same_v<T, TruncatedNormal>) return s.lo;
            else if constexpr (std::is_same_v<T, PointMass>) return s.value;
            else return *std::min_element(s.values.begin(), s.values.end());
        },
        spec);
}

double support_max(const DistSpec& spec) {
    return std::visit(
        [](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Uniform>) return s.b;
            else if constexpr (std::is_same_v<T, TruncatedNormal>) return s.hi;
            else if constexpr (std::is_same_v<T, PointMass>) return s.value;
            else return *std::max_element(s.values.begin(), s.values.end());
        },
        spec);
}

bool is_degenerate(const DistSpec& spec) {
    if (std::holds_alternative<PointMass>(spec)) return true;
    if (const auto* e = std::get_if<Empirical>(&spec)) {
        return std::all_of(e->values.begin(), e->values.end(),
                           [&](double v) { return v == e->values.front(); });
    }
    return false;
}

double sample_value(const DistSpec& spec, RngStream& rng) {
    return std::visit(
        [&rng](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Uniform>) {
                return s.a + rng.next_unit() * (s.b - s.a);
            } else if constexpr (std::is_same_v<T, TruncatedNormal>) {
                // Inverse CDF restricted to [lo, hi]: exact support control,
                // no rejection loop.
                const double pa = normal_cdf((s.lo - s.mean) / s.sd);
                const double pb = normal_cdf((s.hi - s.mean) / s.sd);
                const double p = pa + rng.next_unit() * (pb - pa);
                const double x = s.mean + s.sd * normal_quantile(p);
                return std::clamp(x, s.lo, s.hi);
            } else if constexpr (std::is_same_v<T, PointMass>) {
                return s.value;
            } else {
                // uniform bootstrap over stored values
                const std::size_t n = s.values.size();
                const auto idx = std::min<std::size_t>(
                    n - 1, static_cast<std::size_t>(rng.next_unit() *
                                                    static_cast<double>(n)));
                return s.values[idx];
            }
        },
        spec);
}

std::string dist_summary(const DistSpec& spec) {
    std::ostringstream os;
    std::visit(
        [&os](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Uniform>)
                os << "uniform(" << s.a << ", " << s.b << ")";
            else if constexpr (std::is_same_v<T, TruncatedNormal>)
                os << "truncated-normal(" << s.mean << ", " << s.sd << ", ["
                   << s.lo << ", " << s.hi << "])";
            else if constexpr (std::is_same_v<T, PointMass>)
                os << "point-mass(" << s.value << ")";
            else
                os << "empirical(" << s.values.size() << " values)";
        },
        spec);
    return os.str();
}

DistMoments dist_moments(const DistSpec& spec, std::size_t grid_points) {
    validate_dist(spec);
    if (grid_points < 10001) grid_points = 10001;
    return std::visit(
        [grid_points](const auto& s) -> DistMoments {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Uniform>) {
                const double density = 1.0 / (s.b - s.a);
                return grid_moments([density](double) { return density; }, s.a,
                                    s.b, grid_points);
            } else if constexpr (std::is_same_v<T, TruncatedNormal>) {
                const double mass = tn_mass(s);
                if (mass <= 0.0)
                    throw ConfigError(
                        "invalid-distribution: truncated-normal has no mass in "
                        "[lo, hi]");
                const double norm = 1.0 / (s.sd * mass * std::sqrt(2.0 * M_PI));
                auto density = [&s, norm](double x) {
                    const double u = (x - s.mean) / s.sd;
                    return norm * std::exp(-0.5 * u * u);
                };
                return grid_moments(density, s.lo, s.hi, grid_points);
            } else if constexpr (std::is_same_v<T, PointMass>) {
                return DistMoments{s.value, 0.0, 0.0};
            } else {
                return empirical_moments(s.values);
            }
        },
        spec);
}

GenerationModel GenerationModel::iid(DistSpec base) {
    GenerationModel m;
    m.kind = std::holds_alternative<Empirical>(base)
                 ? GenerationKind::Empirical
                 : GenerationKind::IidParametric;
    m.base = std::move(base);
    m.validate();
    return m;
}

GenerationModel GenerationModel::additive(DistSpec shared, DistSpec individual) {
    GenerationModel m;
    m.kind = GenerationKind::AdditiveCorrelated;
    m.shared = std::move(shared);
    m.individual = std::move(individual);
    m.validate();
    return m;
}

double GenerationModel::output_mean() const {
    if (kind == GenerationKind::AdditiveCorrelated)
        return dist_moments(shared).mean + dist_moments(individual).mean;
    return dist_moments(base).mean;
}

bool GenerationModel::is_degenerate() const {
    if (kind == GenerationKind::AdditiveCorrelated)
        return capgame::is_degenerate(shared) && capgame::is_degenerate(individual);
    return capgame::is_degenerate(base);
}

void GenerationModel::validate() const {
    if (kind == GenerationKind::AdditiveCorrelated) {
        validate_dist(shared);
        validate_dist(individual);
        if (support_min(shared) < 0.0 || support_min(individual) < 0.0)
            throw ConfigError(
                "invalid-distribution: additive components must be non-negative");
        if (support_max(shared) + support_max(individual) > 1.0 + 1e-12)
            throw ConfigError(
                "invalid-distribution: additive component supports must sum "
                "into [0,1]");
        return;
    }
    validate_dist(base);
    if (support_min(base) < -1e-12 || support_max(base) > 1.0 + 1e-12)
        throw ConfigError("invalid-distribution: output support outside [0,1]");
    if (kind == GenerationKind::Empirical &&
        !std::holds_alternative<Empirical>(base))
        throw ConfigError("empirical generation model needs empirical values");
}

double DemandModel::min_value() const { return support_min(dist); }
double DemandModel::max_value() const { return support_max(dist); }
double DemandModel::demand_mean() const { return dist_moments(dist).mean; }

void DemandModel::validate() const {
    validate_dist(dist);
    if (std::holds_alternative<TruncatedNormal>(dist))
        throw ConfigError(
            "invalid-distribution: demand must be point-mass, uniform or "
            "empirical");
    if (!(support_min(dist) > 0.0))
        throw ConfigError("invalid-distribution: demand minimum must be > 0");
}

SampleSet::SampleSet(std::size_t replicates, std::size_t producers,
                     std::uint64_t seed, std::vector<double> z,
                     std::vector<double> d)
    : replicates_(replicates),
      producers_(producers),
      seed_(seed),
      z_(std::move(z)),
      d_(std::move(d)) {
    if (z_.size() != replicates_ * producers_ || d_.size() != replicates_)
        throw ConfigError("sample set shape mismatch");
}

double SampleSet::demand_sample_mean() const { return mean(d_); }

SampleSet sample(const GenerationModel& generation, const DemandModel& demand,
                 std::size_t producers, std::size_t replicates,
                 std::uint64_t seed) {
    generation.validate();
    demand.validate();
    if (producers < 1) throw ConfigError("need at least one producer");
    if (replicates < 1) throw ConfigError("zero-replicates");

    std::vector<double> z(replicates * producers);
    std::vector<double> d(replicates);
    const bool additive = generation.kind == GenerationKind::AdditiveCorrelated;

    parallel_for(replicates, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            RngStream rng(seed, k);
            double* row = z.data() + k * producers;
            if (additive) {
                const double zbar = sample_value(generation.shared, rng);
                for (std::size_t i = 0; i < producers; ++i)
                    row[i] = zbar + sample_value(generation.individual, rng);
            } else {
                for (std::size_t i = 0; i < producers; ++i)
                    row[i] = sample_value(generation.base, rng);
            }
            d[k] = sample_value(demand.dist, rng);
        }
    });

    return SampleSet(replicates, producers, seed, std::move(z), std::move(d));
}

DistMoments moments(const GenerationModel& model) {
    if (model.kind == GenerationKind::AdditiveCorrelated)
        throw ConfigError(
            "moments: additive-correlated model has no single output "
            "distribution; query the components instead");
    return dist_moments(model.base);
}

}  // namespace capgame
