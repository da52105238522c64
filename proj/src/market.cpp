#include "capgame/market.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace capgame {

namespace {

void check_dims(const CapacityProfile& c, const SampleSet& s) {
    if (c.size() != s.producers())
        throw ConfigError("dimension-mismatch: profile vs sample set");
}

void check_dims(const CapacityProfile& c, const MarketInstance& inst) {
    if (c.size() != inst.producers)
        throw ConfigError("dimension-mismatch: profile vs instance");
}

// sum_j c_j z_{k,j} for every replicate
std::vector<double> weighted_totals(const CapacityProfile& c,
                                    const SampleSet& s) {
    const std::size_t r = s.replicates();
    const std::size_t n = s.producers();
    std::vector<double> totals(r);
    parallel_for(r, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double* row = s.z_row(k).data();
            double t = 0.0;
            for (std::size_t i = 0; i < n; ++i) t += c[i] * row[i];
            totals[k] = t;
        }
    });
    return totals;
}

// E[min(Z_i, D / c_i)] for one producer; c_i must be positive.
double g_factor(std::size_t i, double cap, const SampleSet& s) {
    const std::size_t r = s.replicates();
    std::vector<double> buf(r);
    parallel_for(r, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k)
            buf[k] = std::min(s.z(k, i), s.d(k) / cap);
    });
    return mean(buf);
}

constexpr std::size_t kBatches = 100;

}  // namespace

MarketInstance MarketInstance::symmetric(std::size_t n, double gamma,
                                         GenerationModel generation,
                                         DemandModel demand) {
    MarketInstance inst;
    inst.producers = n;
    inst.costs.assign(n, gamma);
    inst.generation = std::move(generation);
    inst.demand = std::move(demand);
    inst.validate();
    return inst;
}

bool MarketInstance::is_symmetric() const {
    return std::all_of(costs.begin(), costs.end(),
                       [&](double g) { return g == costs.front(); });
}

double MarketInstance::symmetric_cost() const {
    if (!is_symmetric()) throw ConfigError("asymmetric-instance");
    return costs.front();
}

void MarketInstance::validate() const {
    if (producers < 1) throw ConfigError("need at least one producer");
    if (costs.size() != producers)
        throw ConfigError("dimension-mismatch: costs vs producer count");
    for (double g : costs)
        if (!(g > 0.0) || !(g < 1.0))
            throw ConfigError("investment cost must lie in (0,1)");
    generation.validate();
    demand.validate();
}

double CapacityProfile::total() const {
    return values.empty() ? 0.0 : pairwise_sum(values);
}

bool CapacityProfile::is_symmetric() const {
    return std::all_of(values.begin(), values.end(),
                       [&](double v) { return v == values.front(); });
}

void CapacityProfile::validate() const {
    for (double v : values)
        if (!std::isfinite(v) || v < 0.0)
            throw ConfigError("capacities must be finite and non-negative");
}

std::size_t largest_producer(const CapacityProfile& c) {
    if (c.size() == 0) throw ConfigError("empty capacity profile");
    std::size_t idx = 0;
    for (std::size_t i = 1; i < c.size(); ++i)
        if (c[i] >= c[idx]) idx = i;
    return idx;
}

Estimate shortfall_cost_estimate(const CapacityProfile& c, const SampleSet& s) {
    check_dims(c, s);
    const auto totals = weighted_totals(c, s);
    const std::size_t r = s.replicates();
    std::vector<double> buf(r);
    parallel_for(r, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k)
            buf[k] = std::max(s.d(k) - totals[k], 0.0);
    });
    return mean_with_se(buf);
}

double shortfall_cost(const CapacityProfile& c, const SampleSet& s) {
    return shortfall_cost_estimate(c, s).value;
}

double social_cost(const CapacityProfile& c, const MarketInstance& inst,
                   const SampleSet& s) {
    check_dims(c, inst);
    double invest = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) invest += inst.cost(i) * c[i];
    return invest + shortfall_cost(c, s);
}

Estimate payment_largest_estimate(const CapacityProfile& c,
                                  const SampleSet& s) {
    check_dims(c, s);
    const std::size_t idx = largest_producer(c);
    const double cap = c[idx];
    const auto totals = weighted_totals(c, s);
    const std::size_t r = s.replicates();
    std::vector<double> buf(r);
    parallel_for(r, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double rest = totals[k] - cap * s.z(k, idx);
            const double leftover = std::max(s.d(k) - rest, 0.0);
            buf[k] = std::min(leftover, cap * s.z(k, idx));
        }
    });
    return mean_with_se(buf);
}

double payment_largest(const CapacityProfile& c, const SampleSet& s) {
    return payment_largest_estimate(c, s).value;
}

std::vector<double> payments_all(const CapacityProfile& c, const SampleSet& s) {
    check_dims(c, s);
    const std::size_t n = c.size();
    std::vector<double> out(n, 0.0);
    const std::size_t idx = largest_producer(c);
    if (c[idx] <= 0.0) return out;  // nobody installed anything

    const double pi_largest = payment_largest(c, s);
    const double g_largest = g_factor(idx, c[idx], s);
    const double denom = c[idx] * g_largest;
    out[idx] = pi_largest;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == idx) continue;
        if (c[i] <= 0.0) continue;  // limit of C_i * G_i is zero
        if (denom <= 0.0) continue;
        out[i] = pi_largest * (c[i] * g_factor(i, c[i], s)) / denom;
    }
    return out;
}

PaymentsEstimate payments_all_estimate(const CapacityProfile& c,
                                       const SampleSet& s) {
    check_dims(c, s);
    const std::size_t n = c.size();
    const std::size_t r = s.replicates();
    PaymentsEstimate est;
    est.values.assign(n, 0.0);
    est.se.assign(n, 0.0);

    const std::size_t idx = largest_producer(c);
    if (c[idx] <= 0.0) return est;

    const std::size_t batches = std::min<std::size_t>(kBatches, r);
    const std::size_t width = r / batches;

    // per-batch largest payment and G factors, then batch payments
    const auto totals = weighted_totals(c, s);
    std::vector<std::vector<double>> batch_payment(
        n, std::vector<double>(batches, 0.0));

    parallel_for(batches, [&](std::size_t bbegin, std::size_t bend) {
        std::vector<double> pibuf(width + batches);
        std::vector<double> gbuf(width + batches);
        for (std::size_t b = bbegin; b < bend; ++b) {
            const std::size_t k0 = b * width;
            const std::size_t k1 = (b + 1 == batches) ? r : k0 + width;
            const std::size_t len = k1 - k0;
            for (std::size_t k = k0; k < k1; ++k) {
                const double rest = totals[k] - c[idx] * s.z(k, idx);
                const double leftover = std::max(s.d(k) - rest, 0.0);
                pibuf[k - k0] = std::min(leftover, c[idx] * s.z(k, idx));
                gbuf[k - k0] = std::min(s.z(k, idx), s.d(k) / c[idx]);
            }
            const double pi_b =
                pairwise_sum({pibuf.data(), len}) / static_cast<double>(len);
            const double g_largest_b =
                pairwise_sum({gbuf.data(), len}) / static_cast<double>(len);
            batch_payment[idx][b] = pi_b;
            for (std::size_t i = 0; i < n; ++i) {
                if (i == idx || c[i] <= 0.0) continue;
                for (std::size_t k = k0; k < k1; ++k)
                    gbuf[k - k0] = std::min(s.z(k, i), s.d(k) / c[i]);
                const double g_b =
                    pairwise_sum({gbuf.data(), len}) / static_cast<double>(len);
                batch_payment[i][b] =
                    (g_largest_b > 0.0)
                        ? pi_b * (c[i] * g_b) / (c[idx] * g_largest_b)
                        : 0.0;
            }
        }
    });

    const auto full = payments_all(c, s);
    est.values = full;
    est.total = pairwise_sum(full);
    if (batches < 2) return est;

    auto batch_se = [batches](const std::vector<double>& bvals) {
        const double m = mean(bvals);
        double var = 0.0;
        for (double v : bvals) var += (v - m) * (v - m);
        var /= static_cast<double>(batches - 1);
        return std::sqrt(var / static_cast<double>(batches));
    };

    std::vector<double> total_b(batches, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (c[i] <= 0.0) continue;
        est.se[i] = batch_se(batch_payment[i]);
        for (std::size_t b = 0; b < batches; ++b)
            total_b[b] += batch_payment[i][b];
    }
    est.total_se = batch_se(total_b);
    return est;
}

std::vector<double> payments_symmetric(const CapacityProfile& c,
                                       const SampleSet& s) {
    check_dims(c, s);
    if (!c.is_symmetric())
        throw ConfigError("payments_symmetric needs a symmetric profile");
    const std::size_t n = c.size();
    const std::size_t r = s.replicates();
    const double cap = c.size() ? c[0] : 0.0;
    std::vector<double> out(n, 0.0);
    if (cap <= 0.0) return out;

    std::vector<double> base(r);
    parallel_for(r, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double* row = s.z_row(k).data();
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) total += row[i];
            base[k] = s.d(k) - cap * total;
        }
    });
    std::vector<double> buf(r);
    for (std::size_t i = 0; i < n; ++i) {
        parallel_for(r, [&](std::size_t begin, std::size_t end) {
            for (std::size_t k = begin; k < end; ++k) {
                const double own = cap * s.z(k, i);
                buf[k] = std::min(std::max(base[k] + own, 0.0), own);
            }
        });
        out[i] = mean(buf);
    }
    return out;
}

Estimate payment_total_symmetric(const CapacityProfile& c, const SampleSet& s) {
    check_dims(c, s);
    if (!c.is_symmetric())
        throw ConfigError("payment_total_symmetric needs a symmetric profile");
    const std::size_t n = c.size();
    const std::size_t r = s.replicates();
    const double cap = c.size() ? c[0] : 0.0;
    if (cap <= 0.0) return Estimate{0.0, 0.0};
    std::vector<double> buf(r);
    parallel_for(r, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double* row = s.z_row(k).data();
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) total += row[i];
            const double base = s.d(k) - cap * total;
            double t = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double own = cap * row[i];
                t += std::min(std::max(base + own, 0.0), own);
            }
            buf[k] = t;
        }
    });
    return mean_with_se(buf);
}

double producer_profit(std::size_t i, const CapacityProfile& c,
                       const MarketInstance& inst, const SampleSet& s) {
    if (i >= c.size()) throw ConfigError("index-out-of-range");
    check_dims(c, inst);
    return payments_all(c, s)[i] - inst.cost(i) * c[i];
}

double efficiency(const CapacityProfile& c, const MarketInstance& inst,
                  const SampleSet& s) {
    check_dims(c, inst);
    const auto pay = payments_all(c, s);
    const double total_payment = pairwise_sum(pay);
    if (!(total_payment > 0.0))
        throw ConfigError("zero-total-payment: efficiency undefined");
    double invest = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) invest += inst.cost(i) * c[i];
    return invest / total_payment;
}

SymmetricFocEvaluator::SymmetricFocEvaluator(const MarketInstance& inst,
                                             const SampleSet& s)
    : samples_(s) {
    if (!inst.is_symmetric()) throw ConfigError("asymmetric-instance");
    if (inst.producers != s.producers())
        throw ConfigError("dimension-mismatch: instance vs sample set");
    gamma_ = inst.symmetric_cost();
    const std::size_t r = s.replicates();
    const std::size_t n = s.producers();
    z_sum_.assign(r, 0.0);
    parallel_for(r, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double* row = s.z_row(k).data();
            double t = 0.0;
            for (std::size_t i = 0; i < n; ++i) t += row[i];
            z_sum_[k] = t;
        }
    });
    mean_output_ = mean(z_sum_) / static_cast<double>(n);
}

Estimate SymmetricFocEvaluator::game_residual(double cap) const {
    if (cap < 0.0) throw ConfigError("capacity must be non-negative");
    const std::size_t r = samples_.replicates();
    const std::size_t n = samples_.producers();
    std::vector<double> buf(r);
    parallel_for(r, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double* row = samples_.z_row(k).data();
            const double d = samples_.d(k);
            const double total = z_sum_[k];
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double zi = row[i];
                const double leftover = std::max(d - cap * (total - zi), 0.0);
                if (leftover >= cap * zi) acc += zi;
            }
            buf[k] = acc / static_cast<double>(n);
        }
    });
    Estimate e = mean_with_se(buf);
    e.value -= gamma_;
    return e;
}

Estimate SymmetricFocEvaluator::planner_residual(double cap) const {
    if (cap < 0.0) throw ConfigError("capacity must be non-negative");
    const std::size_t r = samples_.replicates();
    const double n = static_cast<double>(samples_.producers());
    std::vector<double> buf(r);
    parallel_for(r, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double total = z_sum_[k];
            buf[k] = (samples_.d(k) >= cap * total) ? total : 0.0;
        }
    });
    Estimate e = mean_with_se(buf);
    e.value -= gamma_ * n;
    return e;
}

Estimate foc_residual_symmetric_estimate(double cap, const MarketInstance& inst,
                                         const SampleSet& s) {
    return SymmetricFocEvaluator(inst, s).game_residual(cap);
}

double foc_residual_symmetric(double cap, const MarketInstance& inst,
                              const SampleSet& s) {
    return foc_residual_symmetric_estimate(cap, inst, s).value;
}

Estimate planner_foc_residual_symmetric_estimate(double cap,
                                                 const MarketInstance& inst,
                                                 const SampleSet& s) {
    return SymmetricFocEvaluator(inst, s).planner_residual(cap);
}

double planner_foc_residual_symmetric(double cap, const MarketInstance& inst,
                                      const SampleSet& s) {
    return planner_foc_residual_symmetric_estimate(cap, inst, s).value;
}

double atom_event_probability(const CapacityProfile& c, const SampleSet& s) {
    check_dims(c, s);
    const std::size_t idx = largest_producer(c);
    const auto totals = weighted_totals(c, s);
    const std::size_t r = s.replicates();
    std::vector<double> buf(r);
    parallel_for(r, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double own = c[idx] * s.z(k, idx);
            const double gap = s.d(k) - (totals[k] - own);
            buf[k] = (gap >= 0.0 && gap <= own) ? 1.0 : 0.0;
        }
    });
    return mean(buf);
}

DeterministicBaseline deterministic_baseline(double gamma, double demand,
                                             std::size_t producers) {
    if (!(gamma > 0.0) || !(gamma < 1.0))
        throw ConfigError("investment cost must lie in (0,1)");
    if (!(demand > 0.0)) throw ConfigError("demand must be positive");
    if (producers < 1) throw ConfigError("need at least one producer");
    DeterministicBaseline b;
    b.capacities =
        CapacityProfile(producers, demand / static_cast<double>(producers));
    b.efficiency = gamma;
    return b;
}

}  // namespace capgame
