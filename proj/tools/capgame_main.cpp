// capgame: solves the renewable capacity-price game, replicates the
// efficiency experiments, and runs the PV case-study pipeline.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "capgame/experiments.hpp"
#include "capgame/ingest.hpp"
#include "capgame/model_io.hpp"
#include "capgame/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace capgame;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitSolver = 4;
constexpr int kExitInternal = 5;

struct GlobalOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicates;
};

json load_config(const std::string& path) {
    if (path.empty()) throw ConfigError("config-error: --config is required");
    std::ifstream in(path);
    if (!in) throw ConfigError("config-error: cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config-error: invalid JSON in " + path + ": " +
                          e.what());
    }
    // manifests re-run as configs
    if (j.is_object() && j.contains("config")) return j["config"];
    return j;
}

SolveSettings resolve_settings(const json& cfg, const GlobalOptions& opts) {
    SolveSettings st = settings_from_json(
        cfg.contains("settings") ? cfg["settings"] : json(nullptr));
    if (opts.seed) st.seed = *opts.seed;
    if (opts.replicates) st.replicates = *opts.replicates;
    st.validate();
    return st;
}

fs::path prepare_out_dir(const GlobalOptions& opts) {
    std::string dir = opts.out_dir;
    if (dir.empty()) {
        if (const char* env = std::getenv("CAPGAME_OUT_DIR")) dir = env;
    }
    if (dir.empty()) dir = ".";
    fs::path p(dir);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw DataError("cannot create output directory " + dir);
    return p;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

void write_json_file(const fs::path& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

void write_manifest(const fs::path& out, const std::string& command,
                    const json& resolved_config,
                    const std::vector<std::string>& outputs) {
    json manifest;
    manifest["command"] = command;
    manifest["config"] = resolved_config;
    manifest["outputs"] = outputs;
    write_json_file(out / "manifest.json", manifest);
}

MarketInstance instance_from_config(const json& cfg) {
    if (!cfg.contains("instance"))
        throw ConfigError("config-error: missing 'instance'");
    return instance_from_json(cfg["instance"]);
}

std::string solve_summary(const MarketInstance& inst,
                          const EquilibriumReport& rep) {
    std::ostringstream os;
    os << "producers:              " << inst.producers << "\n";
    os << "investment cost:        " << inst.costs.front() << "\n";
    os << "capacity per producer:  "
       << (rep.capacities.size() ? rep.capacities[0] : 0.0) << "\n";
    os << "total capacity:         " << rep.capacities.total() << "\n";
    os << "total payment:          " << rep.payment_total << " (se "
       << rep.payment_total_se << ")\n";
    os << "social cost:            " << rep.social_cost << "\n";
    if (rep.efficiency)
        os << "efficiency:             " << *rep.efficiency << "\n";
    else
        os << "efficiency:             n/a (zero capacity)\n";
    os << "markup:                 " << rep.markup << "\n";
    os << "atom event probability: " << rep.atom_event_probability << "\n";
    if (!rep.entered)
        os << "note: zero capacity is optimal; the unit investment cost is at "
              "or above the mean producer output, so entering cannot pay for "
              "itself.\n";
    return os.str();
}

int cmd_solve(const json& cfg, const GlobalOptions& opts) {
    const MarketInstance inst = instance_from_config(cfg);
    const SolveSettings st = resolve_settings(cfg, opts);
    const fs::path out = prepare_out_dir(opts);

    const EquilibriumReport rep = solve_symmetric_equilibrium(inst, st);

    write_json_file(out / "equilibrium.json", report_to_json(rep));
    write_text(out / "summary.txt", solve_summary(inst, rep));
    json resolved{{"instance", instance_to_json(inst)},
                  {"settings", settings_to_json(st)}};
    write_manifest(out, "solve", resolved, {"equilibrium.json", "summary.txt"});
    std::cout << solve_summary(inst, rep);
    return kExitOk;
}

int cmd_planner(const json& cfg, const GlobalOptions& opts) {
    const MarketInstance inst = instance_from_config(cfg);
    const SolveSettings st = resolve_settings(cfg, opts);
    const fs::path out = prepare_out_dir(opts);

    CapacityProfile profile;
    std::string method;
    if (inst.is_symmetric()) {
        profile = solve_social_planner_symmetric(inst, st);
        method = "symmetric-bisection";
    } else {
        profile = solve_social_planner_general(inst, st);
        method = "coordinate-descent";
    }
    const SampleSet s = sample(inst.generation, inst.demand, inst.producers,
                               st.replicates, st.seed);
    json j;
    j["capacities"] = profile.values;
    j["total_capacity"] = profile.total();
    j["social_cost"] = social_cost(profile, inst, s);
    j["method"] = method;
    write_json_file(out / "planner.json", j);
    json resolved{{"instance", instance_to_json(inst)},
                  {"settings", settings_to_json(st)}};
    write_manifest(out, "planner", resolved, {"planner.json"});
    std::cout << "planner total capacity: " << profile.total() << "\n";
    return kExitOk;
}

int cmd_sweep(const json& cfg, const GlobalOptions& opts) {
    const MarketInstance inst = instance_from_config(cfg);
    const SolveSettings st = resolve_settings(cfg, opts);
    const fs::path out = prepare_out_dir(opts);

    if (!cfg.contains("sweep") || !cfg["sweep"].is_object())
        throw ConfigError("config-error: missing 'sweep' section");
    const json& sw = cfg["sweep"];
    if (!sw.contains("player") || !sw["player"].is_number_unsigned())
        throw ConfigError("config-error: sweep needs a 'player' index");
    const std::size_t player = sw["player"].get<std::size_t>();
    if (!sw.contains("profile") || !sw["profile"].is_array())
        throw ConfigError("config-error: sweep needs a base 'profile'");
    CapacityProfile profile;
    for (const auto& v : sw["profile"]) profile.values.push_back(v.get<double>());
    profile.validate();
    if (profile.size() != inst.producers)
        throw ConfigError("config-error: profile length must match n");
    if (player >= inst.producers)
        throw ConfigError("config-error: player index out of range");

    const SampleSet s = sample(inst.generation, inst.demand, inst.producers,
                               st.replicates, st.seed);
    std::vector<double> grid;
    if (sw.contains("grid") && sw["grid"].is_array()) {
        for (const auto& v : sw["grid"]) grid.push_back(v.get<double>());
    } else if (sw.contains("grid") && sw["grid"].is_object()) {
        const double lo = sw["grid"].value("min", 0.0);
        const double hi = sw["grid"].value("max", 1.0);
        const std::size_t points = sw["grid"].value("points", std::size_t{41});
        if (points < 1 || !(hi >= lo))
            throw ConfigError("config-error: invalid sweep grid");
        for (std::size_t j = 0; j < points; ++j)
            grid.push_back(points == 1
                               ? lo
                               : lo + (hi - lo) * static_cast<double>(j) /
                                          static_cast<double>(points - 1));
    } else {
        grid = default_sweep_grid(profile[player],
                                  s.demand_sample_mean() / inst.cost(player));
    }

    const SweepCurve curve = best_response_sweep(player, profile, inst, grid, s);
    std::ostringstream csv;
    write_sweep_csv(csv, curve);
    write_text(out / "sweep.csv", csv.str());
    json j;
    j["player"] = player;
    j["argmax_capacity"] = curve.best().capacity;
    j["argmax_profit"] = curve.best().profit;
    write_json_file(out / "sweep.json", j);

    json resolved{{"instance", instance_to_json(inst)},
                  {"settings", settings_to_json(st)},
                  {"sweep",
                   {{"player", player},
                    {"profile", profile.values},
                    {"grid", grid}}}};
    write_manifest(out, "sweep", resolved, {"sweep.csv", "sweep.json"});
    std::cout << "best response for player " << player << ": capacity "
              << curve.best().capacity << ", profit " << curve.best().profit
              << "\n";
    return kExitOk;
}

struct CurveConfig {
    double gamma = 0.0;
    GenerationModel generation;
    DemandModel demand;
    std::vector<std::size_t> ns;
};

CurveConfig curve_config_from(const json& cfg) {
    CurveConfig c;
    if (!cfg.contains("gamma") || !cfg["gamma"].is_number())
        throw ConfigError("config-error: missing 'gamma'");
    c.gamma = cfg["gamma"].get<double>();
    if (!cfg.contains("generation") || !cfg.contains("demand"))
        throw ConfigError("config-error: need 'generation' and 'demand'");
    c.generation = generation_from_json(cfg["generation"]);
    c.demand = demand_from_json(cfg["demand"]);
    if (!cfg.contains("ns") || !cfg["ns"].is_array() || cfg["ns"].empty())
        throw ConfigError("config-error: need a non-empty 'ns' array");
    for (const auto& v : cfg["ns"]) {
        if (!v.is_number_unsigned() || v.get<std::size_t>() < 1)
            throw ConfigError("config-error: 'ns' entries must be positive");
        c.ns.push_back(v.get<std::size_t>());
    }
    return c;
}

int run_curve(const json& cfg, const GlobalOptions& opts,
              const std::string& command, const std::string& csv_name) {
    const CurveConfig cc = curve_config_from(cfg);
    const SolveSettings st = resolve_settings(cfg, opts);
    const fs::path out = prepare_out_dir(opts);

    const EfficiencyCurve curve =
        command == "capacity-ratio"
            ? capacity_ratio_vs_n(cc.gamma, cc.generation, cc.demand, cc.ns, st)
            : efficiency_vs_n(cc.gamma, cc.generation, cc.demand, cc.ns, st);

    for (const auto& w : curve.warnings) std::cerr << "warning: " << w << "\n";

    std::ostringstream csv;
    write_curve_csv(csv, curve);
    write_text(out / csv_name, csv.str());
    write_json_file(out / "curve.json", curve_to_json(curve));

    json resolved{{"gamma", cc.gamma},
                  {"generation", generation_to_json(cc.generation)},
                  {"demand", demand_to_json(cc.demand)},
                  {"ns", cc.ns},
                  {"settings", settings_to_json(st)}};
    write_manifest(out, command, resolved, {csv_name, "curve.json"});

    for (const auto& r : curve.rows)
        std::cout << "n=" << r.producers
                  << "  capacity=" << r.capacity_per_producer
                  << "  ratio=" << r.capacity_demand_ratio
                  << "  efficiency=" << r.efficiency << "\n";
    return kExitOk;
}

int cmd_casestudy(const json& cfg, const GlobalOptions& opts) {
    if (!cfg.contains("data") || !cfg["data"].is_object() ||
        !cfg["data"].contains("path"))
        throw ConfigError("config-error: casestudy needs data.path");
    const std::string path = cfg["data"]["path"].get<std::string>();
    if (!fs::exists(path))
        throw ConfigError("config-error: data file not found: " + path);
    TextFormat fmt;
    if (cfg["data"].contains("delimiter")) {
        const std::string d = cfg["data"]["delimiter"].get<std::string>();
        if (d.size() != 1)
            throw ConfigError("config-error: delimiter must be one character");
        fmt.delimiter = d[0];
    }
    const double gamma = cfg.value("gamma", 0.15);
    DemandModel demand{PointMass{5.0}};
    if (cfg.contains("demand")) demand = demand_from_json(cfg["demand"]);
    std::vector<std::size_t> ns{5, 30, 120};
    if (cfg.contains("ns")) {
        ns.clear();
        for (const auto& v : cfg["ns"]) ns.push_back(v.get<std::size_t>());
    }
    const double night_threshold = cfg.value("night_threshold", 0.01);
    const SolveSettings st = resolve_settings(cfg, opts);
    const fs::path out = prepare_out_dir(opts);

    const ProfileMatrix raw = load_profiles(path, fmt);
    if (raw.dropped_rows > 0)
        std::cerr << "warning: dropped " << raw.dropped_rows
                  << " unusable rows from " << path << "\n";
    const ProfileMatrix norm = normalize(raw);
    const auto corr = correlation_matrix(norm);
    const AdditiveFit fit = fit_additive_model(norm, night_threshold);

    std::ostringstream normcsv;
    write_matrix_delimited(normcsv, norm, fmt.delimiter);
    write_text(out / "normalized.csv", normcsv.str());
    std::ostringstream corrcsv;
    write_correlation_delimited(corrcsv, norm.sites, corr, fmt.delimiter);
    write_text(out / "correlation.csv", corrcsv.str());
    json fitted;
    fitted["model"] = generation_to_json(fit.model);
    fitted["shared_variance"] = fit.shared_variance;
    fitted["individual_variance"] = fit.individual_variance;
    fitted["clipped_fraction"] = fit.clipped_fraction;
    fitted["night_rows_dropped"] = fit.night_rows_dropped;
    fitted["night_threshold"] = night_threshold;
    write_json_file(out / "fitted_model.json", fitted);

    const EfficiencyCurve curve = efficiency_vs_n(gamma, fit.model, demand, ns, st);
    for (const auto& w : curve.warnings) std::cerr << "warning: " << w << "\n";
    std::ostringstream csv;
    write_curve_csv(csv, curve);
    write_text(out / "efficiency_curve.csv", csv.str());

    json resolved{
        {"data", {{"path", path}, {"delimiter", std::string(1, fmt.delimiter)}}},
        {"gamma", gamma},
        {"demand", demand_to_json(demand)},
        {"ns", ns},
        {"night_threshold", night_threshold},
        {"settings", settings_to_json(st)}};
    write_manifest(out, "casestudy", resolved,
                   {"normalized.csv", "correlation.csv", "fitted_model.json",
                    "efficiency_curve.csv"});

    for (const auto& r : curve.rows)
        std::cout << "n=" << r.producers << "  efficiency=" << r.efficiency
                  << "  ratio=" << r.capacity_demand_ratio << "\n";
    return kExitOk;
}

DiscreteInstance random_discrete_instance(RngStream& rng,
                                          std::size_t max_producers,
                                          std::size_t max_support) {
    DiscreteInstance inst;
    const std::size_t n =
        1 + static_cast<std::size_t>(rng.next_unit() *
                                     static_cast<double>(max_producers));
    auto random_var = [&](bool unit_range) {
        DiscreteVariable v;
        const std::size_t points =
            2 + static_cast<std::size_t>(rng.next_unit() *
                                         static_cast<double>(max_support - 1));
        double total = 0.0;
        for (std::size_t a = 0; a < points; ++a) {
            v.support.push_back(unit_range ? rng.next_unit()
                                           : 0.5 + 1.5 * rng.next_unit());
            const double w = 0.05 + rng.next_unit();
            v.probability.push_back(w);
            total += w;
        }
        for (double& p : v.probability) p /= total;
        double acc = 0.0;
        for (std::size_t a = 0; a + 1 < points; ++a) acc += v.probability[a];
        v.probability.back() = 1.0 - acc;
        return v;
    };
    for (std::size_t i = 0; i < n; ++i) inst.z.push_back(random_var(true));
    inst.demand = random_var(false);
    for (std::size_t i = 0; i < n; ++i)
        inst.costs.push_back(0.1 + 0.8 * rng.next_unit());
    return inst;
}

int cmd_oracle_check(const json& cfg, const GlobalOptions& opts) {
    const SolveSettings st = resolve_settings(cfg, opts);
    const fs::path out = prepare_out_dir(opts);

    std::vector<DiscreteInstance> instances;
    std::vector<CapacityProfile> profiles;
    if (cfg.contains("instances") && cfg["instances"].is_array()) {
        for (const auto& ij : cfg["instances"]) {
            instances.push_back(discrete_instance_from_json(ij));
            CapacityProfile c;
            if (ij.contains("capacities"))
                for (const auto& v : ij["capacities"])
                    c.values.push_back(v.get<double>());
            else
                c.values.assign(instances.back().producers(), 1.0);
            profiles.push_back(std::move(c));
        }
    } else {
        const std::size_t count = cfg.value("count", std::size_t{20});
        const std::size_t max_producers =
            cfg.value("max_producers", std::size_t{3});
        const std::size_t max_support =
            cfg.value("max_support_points", std::size_t{5});
        const double capacity_max = cfg.value("capacity_max", 1.5);
        for (std::size_t i = 0; i < count; ++i) {
            RngStream rng(st.seed, 900000 + i);
            instances.push_back(
                random_discrete_instance(rng, max_producers, max_support));
            CapacityProfile c;
            for (std::size_t p = 0; p < instances.back().producers(); ++p)
                c.values.push_back(capacity_max * rng.next_unit());
            profiles.push_back(std::move(c));
        }
    }

    json results = json::array();
    bool all_ok = true;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        const auto& c = profiles[i];
        const OracleExpectations oracle = oracle_expectations(inst, c);
        const SampleSet s = sample_discrete(inst, st.replicates, st.seed + i);

        const Estimate sf = shortfall_cost_estimate(c, s);
        const Estimate pl = payment_largest_estimate(c, s);
        const PaymentsEstimate pe = payments_all_estimate(c, s);

        bool ok = std::abs(sf.value - oracle.shortfall) <= 3.0 * sf.se + 1e-12;
        ok = ok &&
             std::abs(pl.value - oracle.payment_largest) <= 3.0 * pl.se + 1e-12;
        for (std::size_t p = 0; p < c.size(); ++p)
            ok = ok && std::abs(pe.values[p] - oracle.payments[p]) <=
                           3.0 * pe.se[p] + 1e-12;
        all_ok = all_ok && ok;

        json r;
        r["instance"] = i;
        r["producers"] = inst.producers();
        r["ok"] = ok;
        r["oracle"] = {{"shortfall", oracle.shortfall},
                       {"payment_largest", oracle.payment_largest},
                       {"payments", oracle.payments},
                       {"social_cost", oracle.social_cost}};
        r["estimate"] = {{"shortfall", sf.value},
                         {"shortfall_se", sf.se},
                         {"payment_largest", pl.value},
                         {"payment_largest_se", pl.se},
                         {"payments", pe.values},
                         {"payments_se", pe.se}};
        results.push_back(std::move(r));
        std::cout << (ok ? "[PASS]" : "[FAIL]") << " oracle instance " << i
                  << " (n=" << inst.producers() << ")\n";
    }

    json report{{"all_ok", all_ok}, {"results", results}};
    write_json_file(out / "oracle_report.json", report);
    json resolved = cfg;
    resolved["settings"] = settings_to_json(st);
    write_manifest(out, "oracle-check", resolved, {"oracle_report.json"});
    if (!all_ok) throw SolverError("oracle-check: estimator/oracle mismatch");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "capacity-price game toolkit: equilibria, planner benchmarks, "
        "efficiency experiments and the PV case study"};
    app.require_subcommand(1);

    int threads = 1;
    app.add_option("--threads", threads,
                   "worker threads (affects speed only, never results)");

    struct Sub {
        CLI::App* cli = nullptr;
        GlobalOptions opts;
    };
    std::vector<std::pair<std::string, Sub>> subs;
    for (const std::string name :
         {"solve", "planner", "sweep", "efficiency-curve", "capacity-ratio",
          "casestudy", "oracle-check"}) {
        Sub sub;
        sub.cli = app.add_subcommand(name);
        subs.emplace_back(name, std::move(sub));
    }
    for (auto& [name, sub] : subs) {
        sub.cli->add_option("--config", sub.opts.config_path,
                            "JSON config (or a manifest from a previous run)");
        sub.cli->add_option("--out", sub.opts.out_dir,
                            "output directory (default: $CAPGAME_OUT_DIR or .)");
        sub.cli->add_option("--seed", sub.opts.seed, "override settings.seed");
        sub.cli->add_option("--replicates", sub.opts.replicates,
                            "override settings.replicates");
    }

    CLI11_PARSE(app, argc, argv);
    set_worker_threads(threads);

    try {
        for (auto& [name, sub] : subs) {
            if (!sub.cli->parsed()) continue;
            const json cfg = load_config(sub.opts.config_path);
            if (name == "solve") return cmd_solve(cfg, sub.opts);
            if (name == "planner") return cmd_planner(cfg, sub.opts);
            if (name == "sweep") return cmd_sweep(cfg, sub.opts);
            if (name == "efficiency-curve")
                return run_curve(cfg, sub.opts, "efficiency-curve",
                                 "efficiency_curve.csv");
            if (name == "capacity-ratio")
                return run_curve(cfg, sub.opts, "capacity-ratio",
                                 "capacity_ratio.csv");
            if (name == "casestudy") return cmd_casestudy(cfg, sub.opts);
            if (name == "oracle-check") return cmd_oracle_check(cfg, sub.opts);
        }
        std::cerr
            << R"({"error":{"category":"config-error","message":"no subcommand"}})"
            << "\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << json{{"error",
                           {{"category", "config-error"}, {"message", e.what()}}}}
                         .dump()
                  << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << json{{"error",
                           {{"category", "data-error"}, {"message", e.what()}}}}
                         .dump()
                  << "\n";
        return kExitData;
    } catch (const SolverError& e) {
        std::cerr << json{{"error",
                           {{"category", "solver-error"}, {"message", e.what()}}}}
                         .dump()
                  << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", {{"category", "internal-error"},
                                     {"message", e.what()}}}}
                         .dump()
                  << "\n";
        return kExitInternal;
    }
}
