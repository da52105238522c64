// Game formulas evaluated as sample averages over a SampleSet: pricing
// sub-game payments, social cost, profits, efficiency, and the first-order
// condition residuals driving the capacity solvers.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "capgame/stochastic.hpp"

namespace capgame {

// N producers with per-unit investment costs in (0,1); the grid price is
// normalized to 1.
struct MarketInstance {
    std::size_t producers = 1;
    std::vector<double> costs;  // gamma_i, one per producer
    GenerationModel generation;
    DemandModel demand;

    static MarketInstance symmetric(std::size_t n, double gamma,
                                    GenerationModel generation,
                                    DemandModel demand);

    bool is_symmetric() const;
    double cost(std::size_t i) const { return costs.at(i); }
    double symmetric_cost() const;  // requires is_symmetric()
    void validate() const;
};

struct CapacityProfile {
    std::vector<double> values;

    CapacityProfile() = default;
    explicit CapacityProfile(std::vector<double> v) : values(std::move(v)) {}
    CapacityProfile(std::initializer_list<double> v) : values(v) {}
    CapacityProfile(std::size_t n, double c) : values(n, c) {}

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    double total() const;
    bool is_symmetric() const;
    void validate() const;  // finite, non-negative
};

// Index of the largest investment; ties resolved to the highest index.
std::size_t largest_producer(const CapacityProfile& c);

// E (D - sum_i Z_i C_i)^+ : expected energy bought back from the grid.
double shortfall_cost(const CapacityProfile& c, const SampleSet& s);
Estimate shortfall_cost_estimate(const CapacityProfile& c, const SampleSet& s);

// sum_i gamma_i C_i + shortfall.
double social_cost(const CapacityProfile& c, const MarketInstance& inst,
                   const SampleSet& s);

// Payment to the largest investor: E min{(D - sum_{j != N} Z_j C_j)^+, Z_N C_N}.
double payment_largest(const CapacityProfile& c, const SampleSet& s);
Estimate payment_largest_estimate(const CapacityProfile& c, const SampleSet& s);

// Payments for every producer, original index order. Producers below the
// largest are scaled by the ratio of C_i E[min(Z_i, D/C_i)] factors; zero
// capacity pays zero.
std::vector<double> payments_all(const CapacityProfile& c, const SampleSet& s);

struct PaymentsEstimate {
    std::vector<double> values;
    std::vector<double> se;  // batch standard errors
    double total = 0.0;
    double total_se = 0.0;
};
PaymentsEstimate payments_all_estimate(const CapacityProfile& c,
                                       const SampleSet& s);

// Payments for a symmetric profile with exchangeable producers, estimated by
// applying the largest-investor form at every index. Lower variance than the
// ratio route; the two agree within Monte Carlo noise.
std::vector<double> payments_symmetric(const CapacityProfile& c,
                                       const SampleSet& s);
Estimate payment_total_symmetric(const CapacityProfile& c, const SampleSet& s);

// payment_i - gamma_i * C_i.
double producer_profit(std::size_t i, const CapacityProfile& c,
                       const MarketInstance& inst, const SampleSet& s);

// gamma-weighted investment over total payments.
double efficiency(const CapacityProfile& c, const MarketInstance& inst,
                  const SampleSet& s);

// E[ 1{(D - C sum_{j != i} Z_j)^+ >= C Z_i} Z_i ] - gamma, averaged over all
// producer indices. Non-increasing in cap replicate-by-replicate, so a fixed
// SampleSet gives an exactly monotone curve.
double foc_residual_symmetric(double cap, const MarketInstance& inst,
                              const SampleSet& s);
Estimate foc_residual_symmetric_estimate(double cap, const MarketInstance& inst,
                                         const SampleSet& s);

// E[ 1{D >= cap * sum_i Z_i} sum_i Z_i ] - gamma * N.
double planner_foc_residual_symmetric(double cap, const MarketInstance& inst,
                                      const SampleSet& s);
Estimate planner_foc_residual_symmetric_estimate(double cap,
                                                 const MarketInstance& inst,
                                                 const SampleSet& s);

// Frequency of 0 <= D - sum_{i != N} C_i Z_i <= C_N Z_N, the event whose
// probability controls the markup decay. N = 1 reduces to Pr(D <= C Z).
double atom_event_probability(const CapacityProfile& c, const SampleSet& s);

// Fixed demand, outputs identical to capacity: capacities D/n each and
// efficiency equal to the investment cost.
struct DeterministicBaseline {
    CapacityProfile capacities;
    double efficiency = 0.0;
};
DeterministicBaseline deterministic_baseline(double gamma, double demand,
                                             std::size_t producers);

struct EquilibriumReport {
    CapacityProfile capacities;
    std::vector<double> payments;
    std::vector<double> profits;
    double social_cost = 0.0;
    std::optional<double> efficiency;  // absent when nobody enters
    std::vector<double> foc_residuals;
    double atom_event_probability = 0.0;
    double markup = 0.0;  // total payments minus total investment cost
    double payment_total = 0.0;
    double payment_total_se = 0.0;
    bool entered = true;
    std::size_t replicates = 0;
    std::size_t report_replicates = 0;
    std::uint64_t seed = 0;
    std::size_t bisection_iterations = 0;
};

// Shares the per-replicate output sums across repeated residual evaluations
// on one SampleSet (the planner residual only needs the sums).
class SymmetricFocEvaluator {
public:
    SymmetricFocEvaluator(const MarketInstance& inst, const SampleSet& s);

    Estimate game_residual(double cap) const;
    Estimate planner_residual(double cap) const;
    double mean_output() const { return mean_output_; }

private:
    const SampleSet& samples_;
    double gamma_ = 0.0;
    double mean_output_ = 0.0;
    std::vector<double> z_sum_;
};

}  // namespace capgame
