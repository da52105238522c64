#include "capgame/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace capgame {

namespace {

struct BisectionOutcome {
    double root = 0.0;
    std::size_t iterations = 0;
};

// Root of a monotone non-increasing residual with f(lo) > 0 > f(hi).
template <typename F>
BisectionOutcome bisect_decreasing(F f, double lo, double hi,
                                   const SolveSettings& st) {
    BisectionOutcome out;
    for (std::size_t it = 0; it < st.max_bisection_iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        ++out.iterations;
        if (std::abs(fm) <= st.residual_tolerance) {
            out.root = mid;
            return out;
        }
        if (fm > 0.0)
            lo = mid;
        else
            hi = mid;
        if ((hi - lo) <= st.capacity_tolerance * std::max(mid, 1e-9)) break;
    }
    out.root = 0.5 * (lo + hi);
    return out;
}

std::size_t clamp_report_replicates(std::size_t solve_replicates,
                                    std::size_t report_replicates,
                                    std::size_t producers) {
    // keeps the report matrix under ~3 GB
    constexpr std::size_t kMaxCells = 400'000'000;
    std::size_t r = std::max(solve_replicates, report_replicates);
    if (r * producers > kMaxCells)
        r = std::max(solve_replicates, kMaxCells / std::max<std::size_t>(1, producers));
    return r;
}

// Per-producer game FOC residual values at a symmetric profile.
std::vector<double> per_producer_residuals(const MarketInstance& inst,
                                           double cap, const SampleSet& s) {
    const std::size_t n = s.producers();
    const std::size_t r = s.replicates();
    const double gamma = inst.symmetric_cost();
    std::vector<double> base(r);
    parallel_for(r, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double* row = s.z_row(k).data();
            double t = 0.0;
            for (std::size_t i = 0; i < n; ++i) t += row[i];
            base[k] = t;
        }
    });
    std::vector<double> out(n, 0.0);
    std::vector<double> buf(r);
    for (std::size_t i = 0; i < n; ++i) {
        parallel_for(r, [&](std::size_t begin, std::size_t end) {
            for (std::size_t k = begin; k < end; ++k) {
                const double zi = s.z(k, i);
                const double leftover =
                    std::max(s.d(k) - cap * (base[k] - zi), 0.0);
                buf[k] = (leftover >= cap * zi) ? zi : 0.0;
            }
        });
        out[i] = mean(buf) - gamma;
    }
    return out;
}

EquilibriumReport build_symmetric_report(const MarketInstance& inst,
                                         double cap,
                                         const SolveSettings& settings,
                                         std::size_t iterations) {
    const std::size_t n = inst.producers;
    const std::size_t report_r = clamp_report_replicates(
        settings.replicates, settings.report_replicates, n);
    const SampleSet s =
        sample(inst.generation, inst.demand, n, report_r, settings.seed);

    EquilibriumReport rep;
    rep.capacities = CapacityProfile(n, cap);
    rep.replicates = settings.replicates;
    rep.report_replicates = report_r;
    rep.seed = settings.seed;
    rep.bisection_iterations = iterations;
    rep.entered = cap > 0.0;

    const double gamma = inst.symmetric_cost();
    const double invest = gamma * rep.capacities.total();

    if (cap > 0.0) {
        rep.payments = payments_symmetric(rep.capacities, s);
        const Estimate total = payment_total_symmetric(rep.capacities, s);
        rep.payment_total = total.value;
        rep.payment_total_se = total.se;
        if (total.value > 0.0) rep.efficiency = invest / total.value;
    } else {
        rep.payments.assign(n, 0.0);
    }
    rep.profits.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        rep.profits[i] = rep.payments[i] - gamma * cap;
    rep.markup = rep.payment_total - invest;
    rep.social_cost = social_cost(rep.capacities, inst, s);
    rep.foc_residuals = per_producer_residuals(inst, cap, s);
    rep.atom_event_probability = atom_event_probability(rep.capacities, s);
    return rep;
}

}  // namespace

void SolveSettings::validate() const {
    if (!(residual_tolerance > 0.0) || !(capacity_tolerance > 0.0))
        throw ConfigError("tolerances must be positive");
    if (max_bisection_iterations < 1)
        throw ConfigError("need at least one bisection iteration");
    if (replicates < 1) throw ConfigError("zero-replicates");
}

EquilibriumReport solve_symmetric_equilibrium(const MarketInstance& inst,
                                              const SolveSettings& settings) {
    inst.validate();
    settings.validate();
    if (!inst.is_symmetric()) throw SolverError("non-symmetric-instance");

    const double gamma = inst.symmetric_cost();
    const SampleSet s = sample(inst.generation, inst.demand, inst.producers,
                               settings.replicates, settings.seed);
    const SymmetricFocEvaluator foc(inst, s);

    // gamma >= E Z: entering the market cannot pay for itself.
    const double at_zero = foc.game_residual(0.0).value;
    if (at_zero <= 0.0) return build_symmetric_report(inst, 0.0, settings, 0);

    const double hi = s.demand_sample_mean() / gamma;
    const double at_hi = foc.game_residual(hi).value;
    if (at_hi > settings.residual_tolerance)
        throw SolverError(
            "bracket-failure: game FOC residual does not change sign on [0, "
            "E D / gamma]");
    if (at_hi >= 0.0) return build_symmetric_report(inst, hi, settings, 1);

    const auto res = bisect_decreasing(
        [&](double cap) { return foc.game_residual(cap).value; }, 0.0, hi,
        settings);
    return build_symmetric_report(inst, res.root, settings, res.iterations);
}

CapacityProfile solve_social_planner_symmetric(const MarketInstance& inst,
                                               const SolveSettings& settings) {
    inst.validate();
    settings.validate();
    if (!inst.is_symmetric()) throw SolverError("non-symmetric-instance");

    const double gamma = inst.symmetric_cost();
    const double n = static_cast<double>(inst.producers);
    const SampleSet s = sample(inst.generation, inst.demand, inst.producers,
                               settings.replicates, settings.seed);
    const SymmetricFocEvaluator foc(inst, s);

    const double at_zero = foc.planner_residual(0.0).value;
    if (at_zero <= 0.0) return CapacityProfile(inst.producers, 0.0);

    const double hi = s.demand_sample_mean() / (gamma * n);
    const double at_hi = foc.planner_residual(hi).value;
    if (at_hi > settings.residual_tolerance * n)
        throw SolverError(
            "bracket-failure: planner FOC residual does not change sign on "
            "[0, E D / (gamma N)]");
    if (at_hi >= 0.0) return CapacityProfile(inst.producers, hi);

    SolveSettings scaled = settings;
    scaled.residual_tolerance = settings.residual_tolerance * n;
    const auto res = bisect_decreasing(
        [&](double cap) { return foc.planner_residual(cap).value; }, 0.0, hi,
        scaled);
    return CapacityProfile(inst.producers, res.root);
}

CapacityProfile solve_social_planner_general(const MarketInstance& inst,
                                             const SolveSettings& settings) {
    inst.validate();
    settings.validate();
    const std::size_t n = inst.producers;
    const SampleSet s = sample(inst.generation, inst.demand, n,
                               settings.replicates, settings.seed);
    const std::size_t r = s.replicates();
    const double ed = s.demand_sample_mean();

    CapacityProfile caps(n, 0.0);
    if (inst.is_symmetric()) {
        caps = solve_social_planner_symmetric(inst, settings);
    } else {
        for (std::size_t i = 0; i < n; ++i)
            caps[i] = ed / (inst.cost(i) * static_cast<double>(n));
    }

    // running weighted totals, updated as coordinates move
    std::vector<double> totals(r);
    parallel_for(r, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double* row = s.z_row(k).data();
            double t = 0.0;
            for (std::size_t i = 0; i < n; ++i) t += caps[i] * row[i];
            totals[k] = t;
        }
    });

    std::vector<double> rest(r);
    std::vector<double> buf(r);
    constexpr std::size_t kMaxPasses = 100;
    for (std::size_t pass = 0; pass < kMaxPasses; ++pass) {
        double max_change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double gamma_i = inst.cost(i);
            parallel_for(r, [&](std::size_t begin, std::size_t end) {
                for (std::size_t k = begin; k < end; ++k)
                    rest[k] = totals[k] - caps[i] * s.z(k, i);
            });
            // derivative of the shortfall term wrt coordinate i, plus gamma_i
            auto residual = [&](double x) {
                parallel_for(r, [&](std::size_t begin, std::size_t end) {
                    for (std::size_t k = begin; k < end; ++k) {
                        const double zi = s.z(k, i);
                        buf[k] =
                            (s.d(k) >= rest[k] + x * zi) ? zi : 0.0;
                    }
                });
                return mean(buf) - gamma_i;
            };

            double updated = caps[i];
            const double at_zero = residual(0.0);
            if (at_zero <= 0.0) {
                updated = 0.0;
            } else {
                const double hi = ed / gamma_i;
                const double at_hi = residual(hi);
                if (at_hi >= 0.0) {
                    updated = hi;
                } else {
                    updated = bisect_decreasing(residual, 0.0, hi, settings).root;
                }
            }
            const double delta = updated - caps[i];
            max_change = std::max(
                max_change, std::abs(delta) / std::max(1.0, std::abs(updated)));
            if (delta != 0.0) {
                parallel_for(r, [&](std::size_t begin, std::size_t end) {
                    for (std::size_t k = begin; k < end; ++k)
                        totals[k] += delta * s.z(k, i);
                });
                caps[i] = updated;
            }
        }
        if (max_change <= settings.capacity_tolerance) return caps;
    }
    throw SolverError("iteration-limit-exceeded: general planner descent");
}

std::vector<double> default_sweep_grid(double center, double fallback_hi) {
    constexpr std::size_t kPoints = 41;
    std::vector<double> grid(kPoints);
    if (center > 0.0) {
        const double lo = 0.5 * center;
        const double step = center / static_cast<double>(kPoints - 1);
        for (std::size_t j = 0; j < kPoints; ++j)
            grid[j] = lo + step * static_cast<double>(j);
        grid[kPoints / 2] = center;  // keep the candidate point exact
    } else {
        const double step = fallback_hi / static_cast<double>(kPoints - 1);
        for (std::size_t j = 0; j < kPoints; ++j)
            grid[j] = step * static_cast<double>(j);
    }
    return grid;
}

SweepCurve best_response_sweep(std::size_t i, const CapacityProfile& c,
                               const MarketInstance& inst,
                               std::span<const double> grid,
                               const SampleSet& s) {
    inst.validate();
    c.validate();
    if (i >= c.size()) throw ConfigError("index-out-of-range");
    if (c.size() != inst.producers || c.size() != s.producers())
        throw ConfigError("dimension-mismatch");
    if (grid.empty()) throw ConfigError("sweep grid must be non-empty");
    for (double g : grid)
        if (!(g >= 0.0)) throw ConfigError("sweep grid must be non-negative");

    const std::size_t r = s.replicates();
    const std::size_t n = c.size();
    const double gamma_i = inst.cost(i);

    // (D - sum_{j != i} c_j Z_j)^+, fixed across the sweep
    std::vector<double> leftover(r);
    parallel_for(r, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double* row = s.z_row(k).data();
            double t = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) t += c[j] * row[j];
            leftover[k] = std::max(s.d(k) - t, 0.0);
        }
    });

    std::vector<double> buf(r);
    SweepCurve curve;
    curve.points.reserve(grid.size());
    for (double g : grid) {
        parallel_for(r, [&](std::size_t begin, std::size_t end) {
            for (std::size_t k = begin; k < end; ++k)
                buf[k] = std::min(leftover[k], g * s.z(k, i));
        });
        curve.points.push_back({g, mean(buf) - gamma_i * g});
    }
    curve.argmax_index = 0;
    for (std::size_t j = 1; j < curve.points.size(); ++j)
        if (curve.points[j].profit > curve.points[curve.argmax_index].profit)
            curve.argmax_index = j;
    return curve;
}

VerificationReport verify_equilibrium(const CapacityProfile& c,
                                      const MarketInstance& inst,
                                      const SolveSettings& settings) {
    inst.validate();
    settings.validate();
    c.validate();
    if (c.size() != inst.producers) throw ConfigError("dimension-mismatch");

    const SampleSet s = sample(inst.generation, inst.demand, inst.producers,
                               settings.replicates, settings.seed);
    const double ed = s.demand_sample_mean();
    const std::size_t r = s.replicates();
    const std::size_t n = c.size();

    VerificationReport rep;
    rep.gains.resize(n);
    rep.best_capacity.resize(n);
    rep.baseline_profit.resize(n);

    // standing payoff per producer, leftover-demand form, with its MC error
    std::vector<double> totals(r);
    parallel_for(r, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double* row = s.z_row(k).data();
            double t = 0.0;
            for (std::size_t j = 0; j < n; ++j) t += c[j] * row[j];
            totals[k] = t;
        }
    });
    std::vector<double> buf(r);
    double se_max = 0.0;
    std::vector<double> baseline_payment(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        parallel_for(r, [&](std::size_t begin, std::size_t end) {
            for (std::size_t k = begin; k < end; ++k) {
                const double own = c[i] * s.z(k, i);
                const double leftover =
                    std::max(s.d(k) - (totals[k] - own), 0.0);
                buf[k] = std::min(leftover, own);
            }
        });
        const Estimate est = mean_with_se(buf);
        baseline_payment[i] = est.value;
        se_max = std::max(se_max, est.se);
    }
    rep.total_payment = pairwise_sum(baseline_payment);
    rep.epsilon = std::max(3.0 * se_max, 1e-3 * rep.total_payment);

    for (std::size_t i = 0; i < n; ++i) {
        rep.baseline_profit[i] = baseline_payment[i] - inst.cost(i) * c[i];
        const auto grid = default_sweep_grid(c[i], ed / inst.cost(i));
        const SweepCurve curve = best_response_sweep(i, c, inst, grid, s);
        rep.best_capacity[i] = curve.best().capacity;
        rep.gains[i] = curve.best().profit - rep.baseline_profit[i];
    }
    rep.max_gain = *std::max_element(rep.gains.begin(), rep.gains.end());
    rep.is_equilibrium = rep.max_gain <= rep.epsilon;
    return rep;
}

CapacityProfile find_candidate_equilibrium(const MarketInstance& inst,
                                           const SolveSettings& settings) {
    inst.validate();
    settings.validate();
    if (inst.is_symmetric())
        return solve_symmetric_equilibrium(inst, settings).capacities;

    const std::size_t n = inst.producers;
    const SampleSet s = sample(inst.generation, inst.demand, n,
                               settings.replicates, settings.seed);
    const std::size_t r = s.replicates();
    const double ed = s.demand_sample_mean();

    CapacityProfile caps(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        caps[i] = ed / (inst.cost(i) * static_cast<double>(n));

    std::vector<double> totals(r);
    parallel_for(r, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const double* row = s.z_row(k).data();
            double t = 0.0;
            for (std::size_t j = 0; j < n; ++j) t += caps[j] * row[j];
            totals[k] = t;
        }
    });

    std::vector<double> leftover(r);
    std::vector<double> buf(r);
    constexpr std::size_t kMaxPasses = 200;
    for (std::size_t pass = 0; pass < kMaxPasses; ++pass) {
        double max_change = 0.0;
        const double damping = pass < 10 ? 1.0 : (pass < 40 ? 0.5 : 0.25);
        for (std::size_t i = 0; i < n; ++i) {
            const double gamma_i = inst.cost(i);
            parallel_for(r, [&](std::size_t begin, std::size_t end) {
                for (std::size_t k = begin; k < end; ++k)
                    leftover[k] = std::max(
                        s.d(k) - (totals[k] - caps[i] * s.z(k, i)), 0.0);
            });
            auto residual = [&](double x) {
                parallel_for(r, [&](std::size_t begin, std::size_t end) {
                    for (std::size_t k = begin; k < end; ++k) {
                        const double zi = s.z(k, i);
                        buf[k] = (leftover[k] >= x * zi) ? zi : 0.0;
                    }
                });
                return mean(buf) - gamma_i;
            };

            double updated = caps[i];
            if (residual(0.0) <= 0.0) {
                updated = 0.0;
            } else {
                const double hi = ed / gamma_i;
                if (residual(hi) >= 0.0)
                    updated = hi;
                else
                    updated = bisect_decreasing(residual, 0.0, hi, settings).root;
            }
            updated = caps[i] + damping * (updated - caps[i]);
            const double delta = updated - caps[i];
            max_change = std::max(max_change, std::abs(delta));
            if (delta != 0.0) {
                parallel_for(r, [&](std::size_t begin, std::size_t end) {
                    for (std::size_t k = begin; k < end; ++k)
                        totals[k] += delta * s.z(k, i);
                });
                caps[i] = updated;
            }
        }
        double cap_scale = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            cap_scale = std::max(cap_scale, caps[i]);
        if (max_change <= settings.capacity_tolerance * std::max(cap_scale, 1e-3))
            return caps;
    }
    throw SolverError("iteration-limit-exceeded: best-response iteration");
}

void DiscreteVariable::validate(bool unit_range) const {
    if (support.empty() || support.size() != probability.size())
        throw ConfigError("discrete variable needs matching support/probability");
    double total = 0.0;
    for (double p : probability) {
        if (!(p >= 0.0)) throw ConfigError("negative probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw ConfigError("probabilities must sum to 1");
    for (double v : support) {
        if (!std::isfinite(v)) throw ConfigError("support value not finite");
        if (unit_range && (v < 0.0 || v > 1.0))
            throw ConfigError("output support outside [0,1]");
        if (!unit_range && !(v > 0.0))
            throw ConfigError("demand support must be positive");
    }
}

std::size_t DiscreteInstance::outcome_count() const {
    std::size_t count = demand.support.size();
    for (const auto& v : z) {
        if (count > 2'000'000 / std::max<std::size_t>(1, v.support.size()))
            return std::numeric_limits<std::size_t>::max();
        count *= v.support.size();
    }
    return count;
}

void DiscreteInstance::validate() const {
    if (z.empty()) throw ConfigError("need at least one producer");
    for (const auto& v : z) v.validate(true);
    demand.validate(false);
    if (costs.size() != z.size())
        throw ConfigError("dimension-mismatch: costs vs producers");
    for (double g : costs)
        if (!(g > 0.0) || !(g < 1.0))
            throw ConfigError("investment cost must lie in (0,1)");
}

OracleExpectations oracle_expectations(const DiscreteInstance& inst,
                                       const CapacityProfile& c) {
    inst.validate();
    c.validate();
    const std::size_t n = inst.producers();
    if (c.size() != n) throw ConfigError("dimension-mismatch");
    if (inst.outcome_count() > 1'000'000)
        throw SolverError("outcome-explosion: joint outcome grid too large");

    const std::size_t idx = largest_producer(c);
    OracleExpectations out;
    out.payments.assign(n, 0.0);

    // odometer over (z_1, ..., z_n); demand handled in the innermost loop
    std::vector<std::size_t> state(n, 0);
    bool done = false;
    while (!done) {
        double pz = 1.0;
        double weighted = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            pz *= inst.z[i].probability[state[i]];
            weighted += c[i] * inst.z[i].support[state[i]];
        }
        if (pz > 0.0) {
            const double own = c[idx] * inst.z[idx].support[state[idx]];
            for (std::size_t m = 0; m < inst.demand.support.size(); ++m) {
                const double pd = inst.demand.probability[m];
                if (pd <= 0.0) continue;
                const double d = inst.demand.support[m];
                const double p = pz * pd;
                out.shortfall += p * std::max(d - weighted, 0.0);
                const double leftover = std::max(d - (weighted - own), 0.0);
                out.payment_largest += p * std::min(leftover, own);
            }
        }
        // advance
        done = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (++state[i] < inst.z[i].support.size()) {
                done = false;
                break;
            }
            state[i] = 0;
        }
    }

    // marginal G factors: E[min(Z_i, D / c_i)]
    std::vector<double> g(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (c[i] <= 0.0) continue;
        for (std::size_t a = 0; a < inst.z[i].support.size(); ++a)
            for (std::size_t m = 0; m < inst.demand.support.size(); ++m)
                g[i] += inst.z[i].probability[a] * inst.demand.probability[m] *
                        std::min(inst.z[i].support[a],
                                 inst.demand.support[m] / c[i]);
    }

    if (c[idx] > 0.0) {
        out.payments[idx] = out.payment_largest;
        const double denom = c[idx] * g[idx];
        for (std::size_t i = 0; i < n; ++i) {
            if (i == idx || c[i] <= 0.0 || denom <= 0.0) continue;
            out.payments[i] = out.payment_largest * (c[i] * g[i]) / denom;
        }
    }

    out.social_cost = out.shortfall;
    for (std::size_t i = 0; i < n; ++i)
        out.social_cost += inst.costs[i] * c[i];
    return out;
}

SampleSet sample_discrete(const DiscreteInstance& inst, std::size_t replicates,
                          std::uint64_t seed) {
    inst.validate();
    if (replicates < 1) throw ConfigError("zero-replicates");
    const std::size_t n = inst.producers();

    auto draw = [](const DiscreteVariable& v, RngStream& rng) {
        const double u = rng.next_unit();
        double acc = 0.0;
        for (std::size_t a = 0; a < v.support.size(); ++a) {
            acc += v.probability[a];
            if (u < acc) return v.support[a];
        }
        return v.support.back();
    };

    std::vector<double> z(replicates * n);
    std::vector<double> d(replicates);
    parallel_for(replicates, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            RngStream rng(seed, k);
            double* row = z.data() + k * n;
            for (std::size_t i = 0; i < n; ++i) row[i] = draw(inst.z[i], rng);
            d[k] = draw(inst.demand, rng);
        }
    });
    return SampleSet(replicates, n, seed, std::move(z), std::move(d));
}

}  // namespace capgame
