// JSON serialization for model specs, instances, settings and reports, plus
// the plot-ready CSV writers.
#pragma once

#include <iosfwd>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "capgame/experiments.hpp"
#include "capgame/ingest.hpp"
#include "capgame/solver.hpp"

namespace capgame {

nlohmann::json dist_to_json(const DistSpec& spec);
DistSpec dist_from_json(const nlohmann::json& j);

nlohmann::json generation_to_json(const GenerationModel& model);
GenerationModel generation_from_json(const nlohmann::json& j);

nlohmann::json demand_to_json(const DemandModel& model);
DemandModel demand_from_json(const nlohmann::json& j);

nlohmann::json instance_to_json(const MarketInstance& inst);
MarketInstance instance_from_json(const nlohmann::json& j);

nlohmann::json settings_to_json(const SolveSettings& settings);
SolveSettings settings_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const EquilibriumReport& report);
nlohmann::json verification_to_json(const VerificationReport& report);
nlohmann::json curve_to_json(const EfficiencyCurve& curve);

nlohmann::json discrete_instance_to_json(const DiscreteInstance& inst);
DiscreteInstance discrete_instance_from_json(const nlohmann::json& j);

void write_curve_csv(std::ostream& os, const EfficiencyCurve& curve);
void write_sweep_csv(std::ostream& os, const SweepCurve& curve);
void write_cost_curve_csv(std::ostream& os, const CostCurve& curve);
void write_matrix_delimited(std::ostream& os, const ProfileMatrix& m,
                            char delimiter = ',');
void write_correlation_delimited(std::ostream& os,
                                 const std::vector<std::string>& sites,
                                 const std::vector<double>& corr,
                                 char delimiter = ',');

// Fixed "%.12g" formatting so reruns of a manifest reproduce CSV bytes.
std::string format_number(double v);

}  // namespace capgame
