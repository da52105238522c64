// Equilibrium and planner solvers: monotone-FOC bisection for the symmetric
// game, coordinate descent for the general planner, best-response sweeps and
// equilibrium verification, plus an exact enumeration oracle for small
// discrete instances.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "capgame/market.hpp"

namespace capgame {

struct SolveSettings {
    double residual_tolerance = 1e-3;
    double capacity_tolerance = 1e-3;  // relative
    std::size_t max_bisection_iterations = 60;
    std::size_t replicates = 200'000;
    std::size_t report_replicates = 1'000'000;  // expectations in the report
    std::uint64_t seed = 1;

    void validate() const;
};

// Unique symmetric Nash equilibrium: bisection on the game FOC residual over
// [0, E D / gamma]. Returns the all-zero report when entering the market is
// already unprofitable at zero capacity (gamma >= E Z).
EquilibriumReport solve_symmetric_equilibrium(const MarketInstance& inst,
                                              const SolveSettings& settings);

// Planner optimum along the symmetric ray: bisection on the planner FOC over
// [0, E D / (gamma N)] per producer.
CapacityProfile solve_social_planner_symmetric(const MarketInstance& inst,
                                               const SolveSettings& settings);

// Coordinate descent on the social cost with per-coordinate bisection on the
// partial-derivative estimate. Works for asymmetric costs as well.
CapacityProfile solve_social_planner_general(const MarketInstance& inst,
                                             const SolveSettings& settings);

struct SweepPoint {
    double capacity = 0.0;
    double profit = 0.0;
};

struct SweepCurve {
    std::vector<SweepPoint> points;
    std::size_t argmax_index = 0;

    const SweepPoint& best() const { return points[argmax_index]; }
};

// Profit of producer i as its capacity walks the grid with everyone else
// frozen at c. Deviations are paid the leftover-demand form
// E min{(D - sum_{j != i} Z_j C_j)^+, Z_i g}, the payoff the equilibrium
// definition maximizes; it coincides with the standing payment at symmetric
// profiles.
SweepCurve best_response_sweep(std::size_t i, const CapacityProfile& c,
                               const MarketInstance& inst,
                               std::span<const double> grid,
                               const SampleSet& s);

// 41 points over [0.5 c_i, 1.5 c_i], or [0, E D / gamma_i] at c_i = 0.
std::vector<double> default_sweep_grid(double center, double fallback_hi);

struct VerificationReport {
    std::vector<double> gains;           // best sweep profit minus profit at c
    std::vector<double> best_capacity;   // argmax of each sweep
    std::vector<double> baseline_profit;
    double epsilon = 0.0;
    double max_gain = 0.0;
    double total_payment = 0.0;
    bool is_equilibrium = false;
};

// Local best-response sweep for every producer; epsilon-equilibrium when no
// unilateral gain exceeds max(3 MC standard errors, 1e-3 * total payment).
VerificationReport verify_equilibrium(const CapacityProfile& c,
                                      const MarketInstance& inst,
                                      const SolveSettings& settings);

// Best-response iteration for asymmetric costs: each pass bisects every
// producer's own-capacity FOC (indicator-weighted output equal to its cost)
// with the others frozen. The result is a candidate only; callers should
// gate it through verify_equilibrium.
CapacityProfile find_candidate_equilibrium(const MarketInstance& inst,
                                           const SolveSettings& settings);

struct DiscreteVariable {
    std::vector<double> support;
    std::vector<double> probability;

    void validate(bool unit_range) const;
};

// Exact small instance: independent finite-support Z_i and D.
struct DiscreteInstance {
    std::vector<DiscreteVariable> z;  // one per producer
    DiscreteVariable demand;
    std::vector<double> costs;

    std::size_t producers() const { return z.size(); }
    std::size_t outcome_count() const;
    void validate() const;
};

struct OracleExpectations {
    double shortfall = 0.0;
    double payment_largest = 0.0;
    std::vector<double> payments;
    double social_cost = 0.0;
};

// Exact weighted sums of the same formulas the sampling estimators use,
// enumerated over the full joint outcome grid (at most 10^6 outcomes).
OracleExpectations oracle_expectations(const DiscreteInstance& inst,
                                       const CapacityProfile& c);

// Monte Carlo draws from a discrete instance, same counter-based stream
// layout as stochastic::sample (producer components in index order, demand
// last).
SampleSet sample_discrete(const DiscreteInstance& inst, std::size_t replicates,
                          std::uint64_t seed);

}  // namespace capgame
