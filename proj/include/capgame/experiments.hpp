// Desk-scale replications: efficiency and over-investment curves against the
// producer count, social-cost sweeps, and the asymmetric-cost payment bound.
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "capgame/solver.hpp"

namespace capgame {

struct CurveRow {
    std::size_t producers = 0;
    double capacity_per_producer = 0.0;
    double total_capacity = 0.0;
    double capacity_demand_ratio = 0.0;  // sum C / E D
    double efficiency = 0.0;
    double efficiency_se = 0.0;
    double markup = 0.0;  // total payment minus total investment
    double payment_total = 0.0;
    double payment_total_se = 0.0;
    std::size_t replicates = 0;
};

struct EfficiencyCurve {
    std::vector<CurveRow> rows;
    double gamma = 0.0;
    GenerationModel generation;
    DemandModel demand;
    std::uint64_t seed = 0;
    std::size_t base_replicates = 0;
    bool deterministic_path = false;
    std::vector<std::string> warnings;
};

// Solves the symmetric equilibrium for each n and records efficiency, markup
// and the capacity/demand ratio. Replicates scale as max(base, 1000 n); a
// point-mass generation and demand pair short-circuits to the closed-form
// deterministic game. Producer counts below the asymptotic-efficiency threshold
// n > 1 / ((D_min / D_max) gamma) are computed anyway, with a warning.
EfficiencyCurve efficiency_vs_n(double gamma, const GenerationModel& generation,
                                const DemandModel& demand,
                                std::span<const std::size_t> ns,
                                const SolveSettings& settings);

// Same sweep, read for the over-investment ratio sum C / E D.
EfficiencyCurve capacity_ratio_vs_n(double gamma,
                                    const GenerationModel& generation,
                                    const DemandModel& demand,
                                    std::span<const std::size_t> ns,
                                    const SolveSettings& settings);

struct CostCurvePoint {
    double total_capacity = 0.0;
    double cost = 0.0;
};

struct CostCurve {
    std::vector<CostCurvePoint> points;
    std::size_t argmin_index = 0;

    const CostCurvePoint& best() const { return points[argmin_index]; }
};

// Social cost along the symmetric ray at each total capacity in the grid.
CostCurve social_cost_curve(const MarketInstance& inst,
                            std::span<const double> totals, const SampleSet& s);

struct PoaResult {
    double payment_cost_ratio = 0.0;  // sum payments / sum gamma_i C_i
    double bound = 0.0;               // gamma_max / gamma_min
    double mc_tolerance = 0.0;
    bool within_bound = false;
    VerificationReport verification;
};

// Payment-to-cost ratio at a verified epsilon-equilibrium of an
// asymmetric-cost instance, against the gamma_max / gamma_min bound.
// Throws when the profile fails verification.
PoaResult poa_asymmetric(const MarketInstance& inst, const CapacityProfile& c,
                         const SolveSettings& settings);

}  // namespace capgame
