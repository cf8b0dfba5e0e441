#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "rigsir/common.hpp"
#include "rigsir/weights.hpp"

/* Run configuration: a single JSON document that fixes the model, the
 * experiment to run, and every tunable the drivers read.  Parsing is strict:
 * unknown keys anywhere in the document raise config_error with the offending
 * field path, so typos fail loudly instead of silently running defaults. */

namespace rigsir {

namespace config_detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::string& where,
                                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known)
            throw config_error(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
    }
}

inline const nlohmann::json& require_field(const nlohmann::json& obj, const std::string& where,
                                           const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw config_error(where + "." + key, "missing required field");
    return *it;
}

/* "inf" / "+inf" are accepted where a weight value may be infinite (recovery
 * periods); plain JSON has no literal for infinity. */
inline double parse_real(const nlohmann::json& v, const std::string& where,
                         bool allow_inf = false) {
    if (allow_inf && v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "+inf") return inf;
        throw config_error(where, "expected a number or \"inf\"");
    }
    if (!v.is_number())
        throw config_error(where, allow_inf ? "expected a number or \"inf\"" : "expected a number");
    return v.get<double>();
}

inline std::uint64_t parse_uint(const nlohmann::json& v, const std::string& where) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
        const auto x = v.get<std::int64_t>();
        if (x < 0) throw config_error(where, "must be non-negative");
        return static_cast<std::uint64_t>(x);
    }
    throw config_error(where, "expected a non-negative integer");
}

inline std::vector<double> parse_real_array(const nlohmann::json& v, const std::string& where,
                                            bool allow_inf = false) {
    if (!v.is_array()) throw config_error(where, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(parse_real(v[i], where + "[" + std::to_string(i) + "]", allow_inf));
    return out;
}

inline std::vector<std::size_t> parse_uint_array(const nlohmann::json& v,
                                                 const std::string& where) {
    if (!v.is_array()) throw config_error(where, "expected an array of non-negative integers");
    std::vector<std::size_t> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(static_cast<std::size_t>(
            parse_uint(v[i], where + "[" + std::to_string(i) + "]")));
    return out;
}

}  // namespace config_detail

/* Weight-law schema.  Exactly one of:
 *   {"kind": "constant",       "value": x}            (x may be "inf")
 *   {"kind": "two_point",      "values": [a, b], "p": p}     (P(a) = p)
 *   {"kind": "discrete",       "values": [...], "probs": [...]}
 *   {"kind": "exponential",    "rate": r}
 *   {"kind": "gamma",          "shape": k, "scale": s}
 *   {"kind": "empirical_file", "path": "weights.txt"}
 */
inline weight_law_t law_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object()) throw config_error(where, "expected an object describing a weight law");
    const auto& kind_node = config_detail::require_field(j, where, "kind");
    if (!kind_node.is_string()) throw config_error(where + ".kind", "expected a string");
    const std::string kind = kind_node.get<std::string>();

    using config_detail::parse_real;
    using config_detail::parse_real_array;
    using config_detail::reject_unknown_keys;
    using config_detail::require_field;

    if (kind == "constant") {
        reject_unknown_keys(j, where, {"kind", "value"});
        return weight_law_t::point_mass(
            parse_real(require_field(j, where, "value"), where + ".value", /*allow_inf=*/true));
    }
    if (kind == "two_point") {
        reject_unknown_keys(j, where, {"kind", "values", "p"});
        const auto values = parse_real_array(require_field(j, where, "values"), where + ".values");
        if (values.size() != 2) throw config_error(where + ".values", "expected exactly two values");
        const double p = parse_real(require_field(j, where, "p"), where + ".p");
        if (!(p >= 0.0 && p <= 1.0)) throw config_error(where + ".p", "must lie in [0, 1]");
        return weight_law_t::two_point(values[0], values[1], p);
    }
    if (kind == "discrete") {
        reject_unknown_keys(j, where, {"kind", "values", "probs"});
        const auto values = parse_real_array(require_field(j, where, "values"), where + ".values");
        const auto probs = parse_real_array(require_field(j, where, "probs"), where + ".probs");
        if (values.size() != probs.size())
            throw config_error(where + ".probs", "length must match values");
        return weight_law_t::discrete(values, probs);
    }
    if (kind == "exponential") {
        reject_unknown_keys(j, where, {"kind", "rate"});
        const double rate = parse_real(require_field(j, where, "rate"), where + ".rate");
        if (!(rate > 0.0) || !is_finite(rate))
            throw config_error(where + ".rate", "must be a positive finite number");
        return weight_law_t::exponential(rate);
    }
    if (kind == "gamma") {
        reject_unknown_keys(j, where, {"kind", "shape", "scale"});
        const double shape = parse_real(require_field(j, where, "shape"), where + ".shape");
        const double scale = parse_real(require_field(j, where, "scale"), where + ".scale");
        if (!(shape > 0.0) || !is_finite(shape))
            throw config_error(where + ".shape", "must be a positive finite number");
        if (!(scale > 0.0) || !is_finite(scale))
            throw config_error(where + ".scale", "must be a positive finite number");
        return weight_law_t::gamma(shape, scale);
    }
    if (kind == "empirical_file") {
        reject_unknown_keys(j, where, {"kind", "path"});
        const auto& path_node = require_field(j, where, "path");
        if (!path_node.is_string()) throw config_error(where + ".path", "expected a string");
        return weight_law_t::empirical_file(path_node.get<std::string>());
    }
    throw config_error(where + ".kind", "unknown weight law kind '" + kind + "'");
}

/* Model schema: {"A": law, "B": law, "I": law, "T": law}.  A and B are the
 * vertex and group weights, I the infectious period, T the contact passage
 * time. */
inline model_t model_from_json(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object()) throw config_error(where, "expected an object with laws A, B, I, T");
    config_detail::reject_unknown_keys(j, where, {"A", "B", "I", "T"});
    model_t model;
    model.A = law_from_json(config_detail::require_field(j, where, "A"), where + ".A");
    model.B = law_from_json(config_detail::require_field(j, where, "B"), where + ".B");
    model.I = law_from_json(config_detail::require_field(j, where, "I"), where + ".I");
    model.T = law_from_json(config_detail::require_field(j, where, "T"), where + ".T");
    model.validate();
    return model;
}

struct run_config_t {
    model_t model;
    /* Normalized parse of the "model" section, kept for echoing the resolved
     * configuration (law parameters are not otherwise re-serializable). */
    nlohmann::json model_json;

    std::string experiment = "all";
    std::string out_dir = ".";
    std::size_t n = 10000;
    std::uint64_t seed = 1;
    std::size_t replicas = 1;
    std::size_t workers = 0;  // 0: use hardware concurrency

    double t_max = 10.0;     // simulate / branching time horizon
    std::size_t cap = 1000000;  // branching population cap
    std::uint32_t seed_vertex = 0;
    double count_lo = 50.0;  // growth-rate fit window, lower cumulative count
    double count_hi = -1.0;  // upper count; negative: use n^0.4

    double lotka_tol = 1e-8;
    double tail_tol = 1e-9;
    std::size_t mc_samples = 100000;

    double q = 4.0;        // weight-moment exponent for the coupling horizon
    double epsilon = -1.0;  // horizon slack; negative: use 2/ln n

    std::vector<std::size_t> n_grid;  // tv-rates sizes; empty: {100, 1000, 10000}
    std::size_t n_reps = 100;

    /* Optional direct specification of the growth-equation input: bypasses the
     * model and solves for the given clique-size coefficients gamma_k (index 0
     * holds gamma_1) with exponential passage rate beta. */
    std::vector<double> lotka_gamma;
    double lotka_beta = 0.0;

    run_config_t() { set_reference_model(); }

    static const std::vector<std::string>& experiment_names() {
        static const std::vector<std::string> names = {
            "generate-graph", "simulate", "solve-lotka", "branching",
            "coupling",       "tv-rates", "all"};
        return names;
    }

    /* Default model: constant vertex weight 2, constant group weight 1, no
     * recovery, unit-rate exponential passage times. */
    void set_reference_model() {
        model.A = weight_law_t::point_mass(2.0);
        model.B = weight_law_t::point_mass(1.0);
        model.I = weight_law_t::point_mass(inf);
        model.T = weight_law_t::exponential(1.0);
        model_json = {
            {"A", {{"kind", "constant"}, {"value", 2.0}}},
            {"B", {{"kind", "constant"}, {"value", 1.0}}},
            {"I", {{"kind", "constant"}, {"value", "inf"}}},
            {"T", {{"kind", "exponential"}, {"rate", 1.0}}},
        };
    }

    static run_config_t from_json(const nlohmann::json& j) {
        using namespace config_detail;
        if (!j.is_object()) throw config_error("config", "expected a JSON object");
        reject_unknown_keys(j, "",
                            {"model", "experiment", "out_dir", "n", "seed", "replicas", "workers",
                             "t_max", "cap", "seed_vertex", "count_lo", "count_hi", "lotka_tol",
                             "tail_tol", "mc_samples", "q", "epsilon", "n_grid", "n_reps",
                             "lotka"});
        run_config_t cfg;
        if (j.contains("model")) {
            cfg.model = model_from_json(j.at("model"), "model");
            cfg.model_json = j.at("model");
        }
        if (j.contains("experiment")) {
            const auto& v = j.at("experiment");
            if (!v.is_string()) throw config_error("experiment", "expected a string");
            cfg.experiment = v.get<std::string>();
            bool known = false;
            for (const auto& name : experiment_names()) known = known || name == cfg.experiment;
            if (!known)
                throw config_error("experiment", "unknown experiment '" + cfg.experiment + "'");
        }
        if (j.contains("out_dir")) {
            const auto& v = j.at("out_dir");
            if (!v.is_string()) throw config_error("out_dir", "expected a string");
            cfg.out_dir = v.get<std::string>();
        }
        if (j.contains("n")) {
            cfg.n = static_cast<std::size_t>(parse_uint(j.at("n"), "n"));
            if (cfg.n < 1) throw config_error("n", "must be at least 1");
        }
        if (j.contains("seed")) cfg.seed = parse_uint(j.at("seed"), "seed");
        if (j.contains("replicas")) {
            cfg.replicas = static_cast<std::size_t>(parse_uint(j.at("replicas"), "replicas"));
            if (cfg.replicas < 1) throw config_error("replicas", "must be at least 1");
        }
        if (j.contains("workers"))
            cfg.workers = static_cast<std::size_t>(parse_uint(j.at("workers"), "workers"));
        if (j.contains("t_max")) {
            cfg.t_max = parse_real(j.at("t_max"), "t_max", /*allow_inf=*/true);
            if (!(cfg.t_max > 0.0)) throw config_error("t_max", "must be positive");
        }
        if (j.contains("cap")) {
            cfg.cap = static_cast<std::size_t>(parse_uint(j.at("cap"), "cap"));
            if (cfg.cap < 1) throw config_error("cap", "must be at least 1");
        }
        if (j.contains("seed_vertex"))
            cfg.seed_vertex = static_cast<std::uint32_t>(parse_uint(j.at("seed_vertex"), "seed_vertex"));
        if (j.contains("count_lo")) {
            cfg.count_lo = parse_real(j.at("count_lo"), "count_lo");
            if (!(cfg.count_lo >= 1.0)) throw config_error("count_lo", "must be at least 1");
        }
        if (j.contains("count_hi")) {
            cfg.count_hi = parse_real(j.at("count_hi"), "count_hi");
            if (cfg.count_hi >= 0.0 && cfg.count_hi <= cfg.count_lo)
                throw config_error("count_hi", "must exceed count_lo (or be negative for n^0.4)");
        }
        if (j.contains("lotka_tol")) {
            cfg.lotka_tol = parse_real(j.at("lotka_tol"), "lotka_tol");
            if (!(cfg.lotka_tol > 0.0)) throw config_error("lotka_tol", "must be positive");
        }
        if (j.contains("tail_tol")) {
            cfg.tail_tol = parse_real(j.at("tail_tol"), "tail_tol");
            if (!(cfg.tail_tol > 0.0)) throw config_error("tail_tol", "must be positive");
        }
        if (j.contains("mc_samples")) {
            cfg.mc_samples = static_cast<std::size_t>(parse_uint(j.at("mc_samples"), "mc_samples"));
            if (cfg.mc_samples < 1) throw config_error("mc_samples", "must be at least 1");
        }
        if (j.contains("q")) {
            cfg.q = parse_real(j.at("q"), "q");
            if (!(cfg.q >= 2.0)) throw config_error("q", "must be at least 2");
        }
        if (j.contains("epsilon")) cfg.epsilon = parse_real(j.at("epsilon"), "epsilon");
        if (j.contains("n_grid")) {
            cfg.n_grid = parse_uint_array(j.at("n_grid"), "n_grid");
            for (std::size_t i = 0; i < cfg.n_grid.size(); ++i)
                if (cfg.n_grid[i] < 2)
                    throw config_error("n_grid[" + std::to_string(i) + "]", "must be at least 2");
        }
        if (j.contains("n_reps")) {
            cfg.n_reps = static_cast<std::size_t>(parse_uint(j.at("n_reps"), "n_reps"));
            if (cfg.n_reps < 1) throw config_error("n_reps", "must be at least 1");
        }
        if (j.contains("lotka")) {
            const auto& L = j.at("lotka");
            if (!L.is_object()) throw config_error("lotka", "expected an object");
            reject_unknown_keys(L, "lotka", {"gamma", "beta"});
            cfg.lotka_gamma = parse_real_array(require_field(L, "lotka", "gamma"), "lotka.gamma");
            if (cfg.lotka_gamma.empty()) throw config_error("lotka.gamma", "must be non-empty");
            double total = 0.0;
            for (std::size_t i = 0; i < cfg.lotka_gamma.size(); ++i) {
                const double g = cfg.lotka_gamma[i];
                if (!(g >= 0.0) || !is_finite(g))
                    throw config_error("lotka.gamma[" + std::to_string(i) + "]",
                                       "must be a non-negative finite number");
                total += g;
            }
            if (!(total > 0.0)) throw config_error("lotka.gamma", "must have a positive entry");
            cfg.lotka_beta = parse_real(require_field(L, "lotka", "beta"), "lotka.beta");
            if (!(cfg.lotka_beta > 0.0) || !is_finite(cfg.lotka_beta))
                throw config_error("lotka.beta", "must be a positive finite number");
        }
        return cfg;
    }

    static run_config_t load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw config_error(path, "cannot open config file");
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw config_error(path, std::string("invalid JSON: ") + e.what());
        }
        return from_json(j);
    }

    bool has_direct_lotka() const { return !lotka_gamma.empty(); }

    std::size_t effective_workers() const {
        if (workers > 0) return workers;
        const unsigned hc = std::thread::hardware_concurrency();
        return hc > 0 ? hc : 1;
    }

    std::vector<std::size_t> effective_n_grid() const {
        if (!n_grid.empty()) return n_grid;
        return {100, 1000, 10000};
    }

    double effective_count_hi() const {
        return count_hi >= 0.0 ? count_hi : std::pow(static_cast<double>(n), 0.4);
    }

    /* Deterministic dump of every operative setting.  nlohmann objects keep
     * keys sorted, so byte-identical configs produce byte-identical echoes. */
    nlohmann::json echo() const {
        nlohmann::json j;
        j["model"] = model_json;
        j["experiment"] = experiment;
        j["out_dir"] = out_dir;
        j["n"] = n;
        j["seed"] = seed;
        j["replicas"] = replicas;
        j["workers"] = workers;
        j["t_max"] = is_finite(t_max) ? nlohmann::json(t_max) : nlohmann::json("inf");
        j["cap"] = cap;
        j["seed_vertex"] = seed_vertex;
        j["count_lo"] = count_lo;
        j["count_hi"] = count_hi;
        j["lotka_tol"] = lotka_tol;
        j["tail_tol"] = tail_tol;
        j["mc_samples"] = mc_samples;
        j["q"] = q;
        j["epsilon"] = epsilon;
        j["n_grid"] = effective_n_grid();
        j["n_reps"] = n_reps;
        if (has_direct_lotka())
            j["lotka"] = {{"gamma", lotka_gamma}, {"beta", lotka_beta}};
        return j;
    }
};

}  // namespace rigsir
