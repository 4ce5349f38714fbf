#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "choqlog/constants.hpp"
#include "choqlog/params.hpp"

namespace choqlog {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Full run configuration; strict schema, defaults echoed back for reproducibility.
struct RunConfig {
    ProblemParams problem;

    // nonlinearity
    double nl_q = 4.0;
    double nl_alpha = 1.0;
    double nl_lambda = 0.0;          // 0 means calibrate automatically
    double target_beta_factor = 1.01;

    // grid
    int unit_segments = 240;
    double r_max = 50.0;
    double ratio = 1.1;
    int quad_order = 4;

    // mu schedule
    double mu_max = 1.0;
    double mu_factor = 0.5;
    int mu_count = 7;

    // solver
    int path_points = 41;
    double tol_residual = 1e-4;
    double tol_level = 1e-6;
    int max_iterations = 3000;
    bool polish = true;

    // verification toggles
    bool verify_solve = true;
    bool verify_poisson = true;
    bool verify_mc_oracle = true;
    long mc_samples = 10'000'000;
    bool strict_f3_upper = false;  // the strict overshoot window gates only on request
    double f4_threshold = 0.05;

    // run
    std::uint64_t seed = 12345;
    MuForm mu_form = MuForm::difference;
    std::string out_dir = "run_out";

    std::vector<double> mu_schedule() const {
        std::vector<double> s(static_cast<std::size_t>(mu_count));
        double m = mu_max;
        for (auto& v : s) {
            v = m;
            m *= mu_factor;
        }
        return s;
    }

    void validate() const {
        try {
            problem.validate();
        } catch (const std::exception& ex) {
            throw ConfigError(std::string("validation-error: ") + ex.what());
        }
        if (!(nl_q > problem.p() - 1.0))
            throw ConfigError("validation-error: nonlinearity.q must exceed N/s - 1");
        if (!(nl_alpha > 0.0)) throw ConfigError("validation-error: nonlinearity.alpha > 0");
        if (nl_lambda < 0.0) throw ConfigError("validation-error: nonlinearity.lambda >= 0");
        if (!(target_beta_factor > 1.0))
            throw ConfigError("validation-error: target_beta_factor > 1");
        if (unit_segments < 8 || unit_segments % 24 != 0)
            throw ConfigError(
                "validation-error: grid.unit_segments must be a positive multiple of 24 "
                "(so the plateau radii 1/8, 1/6, 1/4, 1/3 are grid nodes)");
        if (!(r_max > 1.0)) throw ConfigError("validation-error: grid.r_max > 1");
        if (!(ratio > 1.0 && ratio <= 1.2))
            throw ConfigError("validation-error: grid.ratio in (1, 1.2]");
        if (quad_order < 2 || quad_order > 16)
            throw ConfigError("validation-error: grid.quad_order in [2,16]");
        if (!(mu_max > 0.0 && mu_max <= 1.0))
            throw ConfigError("validation-error: mu.mu_max in (0,1]");
        if (!(mu_factor > 0.0 && mu_factor < 1.0))
            throw ConfigError("validation-error: mu.factor in (0,1)");
        if (mu_count < 1) throw ConfigError("validation-error: mu.count >= 1");
        if (path_points < 5) throw ConfigError("validation-error: solver.path_points >= 5");
        if (!(tol_residual > 0.0 && tol_level > 0.0))
            throw ConfigError("validation-error: solver tolerances > 0");
        if (mc_samples < 1000) throw ConfigError("validation-error: verify.mc_samples >= 1000");
    }
};

namespace detail {

struct IniData {
    // section -> key -> (value, line)
    std::map<std::string, std::map<std::string, std::pair<std::string, int>>> kv;
};

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline IniData parse_ini(std::istream& in) {
    IniData data;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("parse-error at line " + std::to_string(lineno) +
                                  ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("parse-error at line " + std::to_string(lineno) +
                                  ": empty section name");
            data.kv[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("parse-error at line " + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("parse-error at line " + std::to_string(lineno) +
                              ": empty key or value");
        if (section.empty())
            throw ConfigError("parse-error at line " + std::to_string(lineno) +
                              ": key outside any [section]");
        if (data.kv[section].count(key))
            throw ConfigError("parse-error at line " + std::to_string(lineno) +
                              ": duplicate key '" + key + "'");
        data.kv[section][key] = {value, lineno};
    }
    return data;
}

class IniReader {
  public:
    explicit IniReader(IniData data) : data_(std::move(data)) {}

    template <class T>
    void get(const std::string& section, const std::string& key, T& out) {
        auto sit = data_.kv.find(section);
        if (sit == data_.kv.end()) return;
        auto kit = sit->second.find(key);
        if (kit == sit->second.end()) return;
        parse_value(kit->second.first, kit->second.second, out);
        consumed_.insert(section + "." + key);
    }

    void reject_unknown() const {
        for (const auto& [section, keys] : data_.kv)
            for (const auto& [key, vp] : keys)
                if (!consumed_.count(section + "." + key))
                    throw ConfigError("parse-error at line " + std::to_string(vp.second) +
                                      ": unknown key '" + section + "." + key + "'");
    }

  private:
    static void parse_value(const std::string& v, int line, double& out) {
        std::size_t pos = 0;
        out = std::stod(v, &pos);
        if (pos != v.size())
            throw ConfigError("parse-error at line " + std::to_string(line) +
                              ": expected a number, got '" + v + "'");
    }
    static void parse_value(const std::string& v, int line, int& out) {
        std::size_t pos = 0;
        out = std::stoi(v, &pos);
        if (pos != v.size())
            throw ConfigError("parse-error at line " + std::to_string(line) +
                              ": expected an integer, got '" + v + "'");
    }
    static void parse_value(const std::string& v, int line, long& out) {
        std::size_t pos = 0;
        out = std::stol(v, &pos);
        if (pos != v.size())
            throw ConfigError("parse-error at line " + std::to_string(line) +
                              ": expected an integer, got '" + v + "'");
    }
    static void parse_value(const std::string& v, int line, std::uint64_t& out) {
        std::size_t pos = 0;
        out = std::stoull(v, &pos);
        if (pos != v.size())
            throw ConfigError("parse-error at line " + std::to_string(line) +
                              ": expected an unsigned integer, got '" + v + "'");
    }
    static void parse_value(const std::string& v, int line, bool& out) {
        if (v == "true") out = true;
        else if (v == "false") out = false;
        else
            throw ConfigError("parse-error at line " + std::to_string(line) +
                              ": expected true/false, got '" + v + "'");
    }
    static void parse_value(const std::string& v, int, std::string& out) { out = v; }

    IniData data_;
    std::set<std::string> consumed_;
};

}  // namespace detail

inline RunConfig parse_config_stream(std::istream& in) {
    detail::IniReader rd(detail::parse_ini(in));
    RunConfig c;
    rd.get("problem", "N", c.problem.N);
    rd.get("problem", "s", c.problem.s);
    rd.get("problem", "tau", c.problem.tau);
    rd.get("problem", "V_lower", c.problem.V_lower);
    rd.get("problem", "V_upper", c.problem.V_upper);
    rd.get("nonlinearity", "q", c.nl_q);
    rd.get("nonlinearity", "alpha", c.nl_alpha);
    rd.get("nonlinearity", "lambda", c.nl_lambda);
    rd.get("nonlinearity", "target_beta_factor", c.target_beta_factor);
    rd.get("grid", "unit_segments", c.unit_segments);
    rd.get("grid", "r_max", c.r_max);
    rd.get("grid", "ratio", c.ratio);
    rd.get("grid", "quad_order", c.quad_order);
    rd.get("mu", "mu_max", c.mu_max);
    rd.get("mu", "factor", c.mu_factor);
    rd.get("mu", "count", c.mu_count);
    rd.get("solver", "path_points", c.path_points);
    rd.get("solver", "tol_residual", c.tol_residual);
    rd.get("solver", "tol_level", c.tol_level);
    rd.get("solver", "max_iterations", c.max_iterations);
    rd.get("solver", "polish", c.polish);
    rd.get("verify", "solve", c.verify_solve);
    rd.get("verify", "poisson", c.verify_poisson);
    rd.get("verify", "mc_oracle", c.verify_mc_oracle);
    rd.get("verify", "mc_samples", c.mc_samples);
    rd.get("verify", "strict_f3_upper", c.strict_f3_upper);
    rd.get("verify", "f4_threshold", c.f4_threshold);
    rd.get("run", "seed", c.seed);
    std::string form = to_string(c.mu_form);
    rd.get("run", "mu_form", form);
    c.mu_form = mu_form_from_string(form);
    rd.get("run", "out_dir", c.out_dir);
    rd.reject_unknown();
    c.validate();
    return c;
}

inline RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("parse-error: cannot open config file '" + path + "'");
    return parse_config_stream(in);
}

/// Serializes the full configuration (defaults included) for the echo file.
inline std::string echo_config(const RunConfig& c) {
    std::ostringstream os;
    os.precision(17);
    os << "[problem]\n"
       << "N = " << c.problem.N << "\n"
       << "s = " << c.problem.s << "\n"
       << "tau = " << c.problem.tau << "\n"
       << "V_lower = " << c.problem.V_lower << "\n"
       << "V_upper = " << c.problem.V_upper << "\n\n";
    os << "[nonlinearity]\n"
       << "q = " << c.nl_q << "\n"
       << "alpha = " << c.nl_alpha << "\n"
       << "lambda = " << c.nl_lambda << "\n"
       << "target_beta_factor = " << c.target_beta_factor << "\n\n";
    os << "[grid]\n"
       << "unit_segments = " << c.unit_segments << "\n"
       << "r_max = " << c.r_max << "\n"
       << "ratio = " << c.ratio << "\n"
       << "quad_order = " << c.quad_order << "\n\n";
    os << "[mu]\n"
       << "mu_max = " << c.mu_max << "\n"
       << "factor = " << c.mu_factor << "\n"
       << "count = " << c.mu_count << "\n\n";
    os << "[solver]\n"
       << "path_points = " << c.path_points << "\n"
       << "tol_residual = " << c.tol_residual << "\n"
       << "tol_level = " << c.tol_level << "\n"
       << "max_iterations = " << c.max_iterations << "\n"
       << "polish = " << (c.polish ? "true" : "false") << "\n\n";
    os << "[verify]\n"
       << "solve = " << (c.verify_solve ? "true" : "false") << "\n"
       << "poisson = " << (c.verify_poisson ? "true" : "false") << "\n"
       << "mc_oracle = " << (c.verify_mc_oracle ? "true" : "false") << "\n"
       << "mc_samples = " << c.mc_samples << "\n"
       << "strict_f3_upper = " << (c.strict_f3_upper ? "true" : "false") << "\n"
       << "f4_threshold = " << c.f4_threshold << "\n\n";
    os << "[run]\n"
       << "seed = " << c.seed << "\n"
       << "mu_form = " << to_string(c.mu_form) << "\n"
       << "out_dir = " << c.out_dir << "\n";
    return os.str();
}

}  // namespace choqlog
