#include "capgame/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

namespace capgame {

using nlohmann::json;

namespace {

// one numeric value per line; blank lines ignored
std::vector<double> load_value_column(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open value file: " + path);
    std::vector<double> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        std::size_t b = line.find_last_not_of(" \t\r");
        const std::string token = line.substr(a, b - a + 1);
        try {
            std::size_t used = 0;
            const double v = std::stod(token, &used);
            if (used != token.size()) throw std::invalid_argument(token);
            values.push_back(v);
        } catch (const std::exception&) {
            throw DataError("parse-error at line " + std::to_string(lineno) +
                            " of " + path);
        }
    }
    if (values.empty()) throw DataError("empty-file: " + path);
    return values;
}

double require_number(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number())
        throw ConfigError(std::string("config-error: missing numeric field '") +
                          key + "'");
    return j[key].get<double>();
}

std::vector<double> require_array(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_array())
        throw ConfigError(std::string("config-error: missing array field '") +
                          key + "'");
    std::vector<double> out;
    for (const auto& v : j[key]) {
        if (!v.is_number())
            throw ConfigError(std::string("config-error: non-numeric entry in '") +
                              key + "'");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

json dist_to_json(const DistSpec& spec) {
    json j;
    std::visit(
        [&j](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, Uniform>) {
                j = {{"type", "uniform"}, {"a", s.a}, {"b", s.b}};
            } else if constexpr (std::is_same_v<T, TruncatedNormal>) {
                j = {{"type", "truncated-normal"},
                     {"mean", s.mean},
                     {"sd", s.sd},
                     {"lo", s.lo},
                     {"hi", s.hi}};
            } else if constexpr (std::is_same_v<T, PointMass>) {
                j = {{"type", "point-mass"}, {"value", s.value}};
            } else {
                j = {{"type", "empirical"}, {"values", s.values}};
            }
        },
        spec);
    return j;
}

DistSpec dist_from_json(const json& j) {
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        throw ConfigError("config-error: distribution spec needs a 'type'");
    const std::string type = j["type"].get<std::string>();
    if (type == "uniform")
        return Uniform{require_number(j, "a"), require_number(j, "b")};
    if (type == "truncated-normal")
        return TruncatedNormal{require_number(j, "mean"), require_number(j, "sd"),
                               require_number(j, "lo"), require_number(j, "hi")};
    if (type == "point-mass") return PointMass{require_number(j, "value")};
    if (type == "empirical") {
        if (j.contains("path") && j["path"].is_string())
            return Empirical{load_value_column(j["path"].get<std::string>())};
        return Empirical{require_array(j, "values")};
    }
    throw ConfigError("config-error: unknown distribution type '" + type + "'");
}

json generation_to_json(const GenerationModel& model) {
    json j;
    switch (model.kind) {
        case GenerationKind::IidParametric:
            j["kind"] = "iid-parametric";
            j["base"] = dist_to_json(model.base);
            break;
        case GenerationKind::Empirical:
            j["kind"] = "empirical";
            j["base"] = dist_to_json(model.base);
            break;
        case GenerationKind::AdditiveCorrelated:
            j["kind"] = "additive-correlated";
            j["shared"] = dist_to_json(model.shared);
            j["individual"] = dist_to_json(model.individual);
            break;
    }
    return j;
}

GenerationModel generation_from_json(const json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        throw ConfigError("config-error: generation model needs a 'kind'");
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "additive-correlated") {
        if (!j.contains("shared") || !j.contains("individual"))
            throw ConfigError(
                "config-error: additive-correlated model needs 'shared' and "
                "'individual'");
        return GenerationModel::additive(dist_from_json(j["shared"]),
                                         dist_from_json(j["individual"]));
    }
    if (kind == "iid-parametric" || kind == "empirical") {
        if (!j.contains("base"))
            throw ConfigError("config-error: generation model needs 'base'");
        GenerationModel m = GenerationModel::iid(dist_from_json(j["base"]));
        if (kind == "empirical" && m.kind != GenerationKind::Empirical)
            throw ConfigError(
                "config-error: empirical generation needs an empirical base");
        return m;
    }
    throw ConfigError("config-error: unknown generation kind '" + kind + "'");
}

json demand_to_json(const DemandModel& model) { return dist_to_json(model.dist); }

DemandModel demand_from_json(const json& j) {
    DemandModel m{dist_from_json(j)};
    m.validate();
    return m;
}

json instance_to_json(const MarketInstance& inst) {
    json j;
    j["n"] = inst.producers;
    if (inst.is_symmetric())
        j["gamma"] = inst.costs.front();
    else
        j["gammas"] = inst.costs;
    j["generation"] = generation_to_json(inst.generation);
    j["demand"] = demand_to_json(inst.demand);
    return j;
}

MarketInstance instance_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config-error: instance must be an object");
    MarketInstance inst;
    if (!j.contains("n") || !j["n"].is_number_unsigned())
        throw ConfigError("config-error: instance needs a producer count 'n'");
    inst.producers = j["n"].get<std::size_t>();
    if (j.contains("gammas")) {
        inst.costs = require_array(j, "gammas");
    } else if (j.contains("gamma")) {
        inst.costs.assign(inst.producers, require_number(j, "gamma"));
    } else {
        throw ConfigError("config-error: instance needs 'gamma' or 'gammas'");
    }
    if (!j.contains("generation") || !j.contains("demand"))
        throw ConfigError(
            "config-error: instance needs 'generation' and 'demand'");
    inst.generation = generation_from_json(j["generation"]);
    inst.demand = demand_from_json(j["demand"]);
    inst.validate();
    return inst;
}

json settings_to_json(const SolveSettings& s) {
    return json{{"residual_tolerance", s.residual_tolerance},
                {"capacity_tolerance", s.capacity_tolerance},
                {"max_bisection_iterations", s.max_bisection_iterations},
                {"replicates", s.replicates},
                {"report_replicates", s.report_replicates},
                {"seed", s.seed}};
}

SolveSettings settings_from_json(const json& j) {
    SolveSettings s;
    if (j.is_null()) return s;
    if (!j.is_object())
        throw ConfigError("config-error: settings must be an object");
    if (j.contains("residual_tolerance"))
        s.residual_tolerance = require_number(j, "residual_tolerance");
    if (j.contains("capacity_tolerance"))
        s.capacity_tolerance = require_number(j, "capacity_tolerance");
    if (j.contains("max_bisection_iterations"))
        s.max_bisection_iterations =
            j["max_bisection_iterations"].get<std::size_t>();
    if (j.contains("replicates")) s.replicates = j["replicates"].get<std::size_t>();
    if (j.contains("report_replicates"))
        s.report_replicates = j["report_replicates"].get<std::size_t>();
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    s.validate();
    return s;
}

json report_to_json(const EquilibriumReport& r) {
    json j;
    j["capacities"] = r.capacities.values;
    j["total_capacity"] = r.capacities.total();
    j["payments"] = r.payments;
    j["profits"] = r.profits;
    j["social_cost"] = r.social_cost;
    if (r.efficiency)
        j["efficiency"] = *r.efficiency;
    else
        j["efficiency"] = nullptr;
    j["foc_residuals"] = r.foc_residuals;
    j["diagnostics"] = {{"atom_event_probability", r.atom_event_probability},
                        {"markup", r.markup}};
    j["payment_total"] = r.payment_total;
    j["payment_total_se"] = r.payment_total_se;
    j["entered"] = r.entered;
    j["replicates"] = r.replicates;
    j["report_replicates"] = r.report_replicates;
    j["seed"] = r.seed;
    j["bisection_iterations"] = r.bisection_iterations;
    return j;
}

json verification_to_json(const VerificationReport& r) {
    return json{{"gains", r.gains},
                {"best_capacity", r.best_capacity},
                {"baseline_profit", r.baseline_profit},
                {"epsilon", r.epsilon},
                {"max_gain", r.max_gain},
                {"total_payment", r.total_payment},
                {"is_equilibrium", r.is_equilibrium}};
}

json curve_to_json(const EfficiencyCurve& curve) {
    json rows = json::array();
    for (const auto& r : curve.rows) {
        rows.push_back({{"n", r.producers},
                        {"capacity_per_producer", r.capacity_per_producer},
                        {"total_capacity", r.total_capacity},
                        {"capacity_demand_ratio", r.capacity_demand_ratio},
                        {"efficiency", r.efficiency},
                        {"efficiency_se", r.efficiency_se},
                        {"markup", r.markup},
                        {"payment_total", r.payment_total},
                        {"payment_total_se", r.payment_total_se},
                        {"replicates", r.replicates}});
    }
    return json{{"gamma", curve.gamma},
                {"generation", generation_to_json(curve.generation)},
                {"demand", demand_to_json(curve.demand)},
                {"seed", curve.seed},
                {"base_replicates", curve.base_replicates},
                {"deterministic_path", curve.deterministic_path},
                {"warnings", curve.warnings},
                {"rows", rows}};
}

json discrete_instance_to_json(const DiscreteInstance& inst) {
    json zs = json::array();
    for (const auto& v : inst.z)
        zs.push_back({{"support", v.support}, {"probability", v.probability}});
    return json{{"z", zs},
                {"demand",
                 {{"support", inst.demand.support},
                  {"probability", inst.demand.probability}}},
                {"costs", inst.costs}};
}

DiscreteInstance discrete_instance_from_json(const json& j) {
    DiscreteInstance inst;
    if (!j.is_object() || !j.contains("z") || !j["z"].is_array())
        throw ConfigError("config-error: discrete instance needs 'z' array");
    for (const auto& v : j["z"]) {
        DiscreteVariable var;
        var.support = require_array(v, "support");
        var.probability = require_array(v, "probability");
        inst.z.push_back(std::move(var));
    }
    if (!j.contains("demand"))
        throw ConfigError("config-error: discrete instance needs 'demand'");
    inst.demand.support = require_array(j["demand"], "support");
    inst.demand.probability = require_array(j["demand"], "probability");
    inst.costs = require_array(j, "costs");
    inst.validate();
    return inst;
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void write_curve_csv(std::ostream& os, const EfficiencyCurve& curve) {
    os << "n,capacity_per_producer,total_capacity,capacity_demand_ratio,"
          "efficiency,efficiency_se,markup,payment_total,payment_total_se,"
          "replicates\n";
    for (const auto& r : curve.rows) {
        os << r.producers << ',' << format_number(r.capacity_per_producer)
           << ',' << format_number(r.total_capacity) << ','
           << format_number(r.capacity_demand_ratio) << ','
           << format_number(r.efficiency) << ','
           << format_number(r.efficiency_se) << ',' << format_number(r.markup)
           << ',' << format_number(r.payment_total) << ','
           << format_number(r.payment_total_se) << ',' << r.replicates << '\n';
    }
}

void write_sweep_csv(std::ostream& os, const SweepCurve& curve) {
    os << "capacity,profit\n";
    for (const auto& p : curve.points)
        os << format_number(p.capacity) << ',' << format_number(p.profit)
           << '\n';
}

void write_cost_curve_csv(std::ostream& os, const CostCurve& curve) {
    os << "total_capacity,social_cost\n";
    for (const auto& p : curve.points)
        os << format_number(p.total_capacity) << ',' << format_number(p.cost)
           << '\n';
}

void write_matrix_delimited(std::ostream& os, const ProfileMatrix& m,
                            char delimiter) {
    os << "timestamp";
    for (const auto& s : m.sites) os << delimiter << s;
    os << '\n';
    for (std::size_t t = 0; t < m.rows(); ++t) {
        os << m.timestamps[t];
        for (std::size_t s = 0; s < m.cols(); ++s)
            os << delimiter << format_number(m.at(t, s));
        os << '\n';
    }
}

void write_correlation_delimited(std::ostream& os,
                                 const std::vector<std::string>& sites,
                                 const std::vector<double>& corr,
                                 char delimiter) {
    const std::size_t n = sites.size();
    os << "site";
    for (const auto& s : sites) os << delimiter << s;
    os << '\n';
    for (std::size_t a = 0; a < n; ++a) {
        os << sites[a];
        for (std::size_t b = 0; b < n; ++b)
            os << delimiter << format_number(corr[a * n + b]);
        os << '\n';
    }
}

}  // namespace capgame
