#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace choqlog {

/// Closed vocabulary of check anchors; every report entry must carry one.
inline const std::array<const char*, 43>& anchor_table() {
    static const std::array<const char*, 43> table = {
        "riesz-kernel-prefactor",
        "mt-exponent-series",
        "mt-exponent-closed-form",
        "constants-bundle-identities",
        "growth-window-positivity",
        "decay-exponent-dominance",
        "kernel-log-lower-bound",
        "kernel-power-envelope",
        "kernel-uniform-convergence",
        "phi-power-bound",
        "hls-ratio-stability",
        "assumption-f1-vanishing",
        "assumption-f1-zero-order",
        "assumption-f2-envelope",
        "assumption-f3-lower",
        "assumption-f3-upper",
        "assumption-f4-limit",
        "assumption-f5-beta",
        "assumption-remark-ii",
        "assumption-remark-iii",
        "amplitude-calibration",
        "plateau-norm-bound",
        "seminorm-ambient-oracle",
        "gradient-finite-difference",
        "energy-breakdown-consistency",
        "rim-positivity",
        "endpoint-negative-energy",
        "mp-level-cap",
        "uniform-norm-cap",
        "saddle-residual",
        "warm-start-consistency",
        "transform-pairing-bound",
        "h-transform-norm-bound",
        "limit-log-residual",
        "limit-log-energy-finite",
        "limit-nontrivial",
        "potential-uniform-ball",
        "potential-asymptotics",
        "weighted-space-membership",
        "poisson-five-point-residual",
        "limit-decay-fit",
        "gmu-three-zone-bound",
        "report-determinism",
    };
    return table;
}

inline bool anchor_known(const std::string& a) {
    for (const char* t : anchor_table())
        if (a == t) return true;
    return false;
}

struct CheckEntry {
    std::string id;       // unique within a report
    std::string anchor;   // one of anchor_table()
    double measured = 0.0;
    double bound = 0.0;
    double margin = 0.0;
    bool pass = false;
    bool gating = true;   // non-gating entries are informational data
    std::string witness;
};

class VerificationReport {
  public:
    void add(CheckEntry e) {
        if (!anchor_known(e.anchor))
            throw std::logic_error("VerificationReport: unknown anchor '" + e.anchor + "'");
        entries_.push_back(std::move(e));
    }

    const std::vector<CheckEntry>& entries() const { return entries_; }

    bool all_pass() const {
        for (const auto& e : entries_)
            if (e.gating && !e.pass) return false;
        return true;
    }

    std::size_t fail_count() const {
        std::size_t n = 0;
        for (const auto& e : entries_)
            if (e.gating && !e.pass) ++n;
        return n;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& e : entries_) {
            nlohmann::ordered_json j;
            j["id"] = e.id;
            j["anchor"] = e.anchor;
            j["measured"] = e.measured;
            j["bound"] = e.bound;
            j["margin"] = e.margin;
            j["pass"] = e.pass;
            j["gating"] = e.gating;
            j["witness"] = e.witness;
            arr.push_back(std::move(j));
        }
        nlohmann::ordered_json out;
        out["checks"] = std::move(arr);
        out["all_pass"] = all_pass();
        return out;
    }

    static VerificationReport from_json(const nlohmann::json& j) {
        VerificationReport rep;
        for (const auto& je : j.at("checks")) {
            CheckEntry e;
            e.id = je.at("id").get<std::string>();
            e.anchor = je.at("anchor").get<std::string>();
            e.measured = je.at("measured").get<double>();
            e.bound = je.at("bound").get<double>();
            e.margin = je.at("margin").get<double>();
            e.pass = je.at("pass").get<bool>();
            e.gating = je.at("gating").get<bool>();
            e.witness = je.at("witness").get<std::string>();
            rep.add(std::move(e));
        }
        return rep;
    }

  private:
    std::vector<CheckEntry> entries_;
};

}  // namespace choqlog
