#include "capgame/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace capgame {

namespace {

bool fully_deterministic(const GenerationModel& generation,
                         const DemandModel& demand) {
    return std::holds_alternative<PointMass>(demand.dist) &&
           generation.kind != GenerationKind::AdditiveCorrelated &&
           std::holds_alternative<PointMass>(generation.base);
}

// Closed-form deterministic game: every equilibrium installs total capacity
// D / v and sells all of it at the grid price, so efficiency is gamma / v.
CurveRow deterministic_row(std::size_t n, double gamma, double output,
                           double demand) {
    CurveRow row;
    row.producers = n;
    row.capacity_per_producer = demand / (output * static_cast<double>(n));
    row.total_capacity = demand / output;
    row.capacity_demand_ratio = 1.0 / output;
    row.efficiency = gamma / output;
    row.efficiency_se = 0.0;
    row.payment_total = demand;
    row.payment_total_se = 0.0;
    row.markup = demand - gamma * row.total_capacity;
    row.replicates = 0;
    return row;
}

EfficiencyCurve curve_vs_n(double gamma, const GenerationModel& generation,
                           const DemandModel& demand,
                           std::span<const std::size_t> ns,
                           const SolveSettings& settings) {
    if (!(gamma > 0.0) || !(gamma < 1.0))
        throw ConfigError("investment cost must lie in (0,1)");
    generation.validate();
    demand.validate();
    settings.validate();

    EfficiencyCurve curve;
    curve.gamma = gamma;
    curve.generation = generation;
    curve.demand = demand;
    curve.seed = settings.seed;
    curve.base_replicates = settings.replicates;

    // rows come out sorted by producer count
    std::vector<std::size_t> sizes(ns.begin(), ns.end());
    std::sort(sizes.begin(), sizes.end());

    const double threshold =
        1.0 / ((demand.min_value() / demand.max_value()) * gamma);
    for (std::size_t n : sizes) {
        if (static_cast<double>(n) <= threshold) {
            std::ostringstream os;
            os << "n=" << n << " is below the efficiency threshold n > "
               << threshold << "; the asymptotic guarantee does not apply";
            curve.warnings.push_back(os.str());
        }
    }

    if (fully_deterministic(generation, demand)) {
        curve.deterministic_path = true;
        const double output = std::get<PointMass>(generation.base).value;
        const double d = std::get<PointMass>(demand.dist).value;
        if (!(output > 0.0))
            throw ConfigError("deterministic output must be positive");
        for (std::size_t n : sizes)
            curve.rows.push_back(deterministic_row(n, gamma, output, d));
        return curve;
    }

    const double ed = demand.demand_mean();
    for (std::size_t n : sizes) {
        SolveSettings per_n = settings;
        per_n.replicates = std::max<std::size_t>(settings.replicates, 1000 * n);
        per_n.report_replicates = per_n.replicates;  // one sample set per n
        MarketInstance inst =
            MarketInstance::symmetric(n, gamma, generation, demand);
        EquilibriumReport rep;
        try {
            rep = solve_symmetric_equilibrium(inst, per_n);
        } catch (const SolverError& e) {
            throw SolverError("n=" + std::to_string(n) + ": " + e.what());
        }
        CurveRow row;
        row.producers = n;
        row.capacity_per_producer = rep.capacities.size() ? rep.capacities[0] : 0.0;
        row.total_capacity = rep.capacities.total();
        row.capacity_demand_ratio = row.total_capacity / ed;
        row.payment_total = rep.payment_total;
        row.payment_total_se = rep.payment_total_se;
        row.markup = rep.markup;
        row.efficiency = rep.efficiency.value_or(0.0);
        if (rep.payment_total > 0.0)
            row.efficiency_se =
                row.efficiency * rep.payment_total_se / rep.payment_total;
        row.replicates = per_n.replicates;
        curve.rows.push_back(row);
    }
    return curve;
}

}  // namespace

EfficiencyCurve efficiency_vs_n(double gamma, const GenerationModel& generation,
                                const DemandModel& demand,
                                std::span<const std::size_t> ns,
                                const SolveSettings& settings) {
    return curve_vs_n(gamma, generation, demand, ns, settings);
}

EfficiencyCurve capacity_ratio_vs_n(double gamma,
                                    const GenerationModel& generation,
                                    const DemandModel& demand,
                                    std::span<const std::size_t> ns,
                                    const SolveSettings& settings) {
    return curve_vs_n(gamma, generation, demand, ns, settings);
}

CostCurve social_cost_curve(const MarketInstance& inst,
                            std::span<const double> totals,
                            const SampleSet& s) {
    inst.validate();
    if (!inst.is_symmetric()) throw SolverError("non-symmetric-instance");
    if (totals.empty()) throw ConfigError("capacity grid must be non-empty");

    CostCurve curve;
    curve.points.reserve(totals.size());
    const double n = static_cast<double>(inst.producers);
    for (double total : totals) {
        if (!(total >= 0.0))
            throw ConfigError("capacities must be finite and non-negative");
        const CapacityProfile profile(inst.producers, total / n);
        curve.points.push_back({total, social_cost(profile, inst, s)});
    }
    curve.argmin_index = 0;
    for (std::size_t j = 1; j < curve.points.size(); ++j)
        if (curve.points[j].cost < curve.points[curve.argmin_index].cost)
            curve.argmin_index = j;
    return curve;
}

PoaResult poa_asymmetric(const MarketInstance& inst, const CapacityProfile& c,
                         const SolveSettings& settings) {
    inst.validate();
    c.validate();
    if (c.size() != inst.producers) throw ConfigError("dimension-mismatch");

    PoaResult res;
    res.verification = verify_equilibrium(c, inst, settings);
    if (!res.verification.is_equilibrium)
        throw SolverError(
            "not-an-equilibrium: profile failed best-response verification");

    const SampleSet s = sample(inst.generation, inst.demand, inst.producers,
                               settings.replicates, settings.seed);
    const PaymentsEstimate pe = payments_all_estimate(c, s);
    double invest = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) invest += inst.cost(i) * c[i];
    if (!(invest > 0.0))
        throw ConfigError("zero-total-payment: ratio undefined at zero profile");

    const auto [gmin, gmax] =
        std::minmax_element(inst.costs.begin(), inst.costs.end());
    res.payment_cost_ratio = pe.total / invest;
    res.bound = *gmax / *gmin;
    res.mc_tolerance = 3.0 * pe.total_se / invest;
    res.within_bound = res.payment_cost_ratio <= res.bound + res.mc_tolerance;
    return res;
}

}  // namespace capgame
