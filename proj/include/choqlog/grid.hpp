#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "choqlog/math.hpp"

namespace choqlog {

/// Graded radial mesh: uniform on [0,1], geometric beyond (ratio <= 1.2), last node
/// is the truncation radius. Fields are zero past r_max.
class RadialGrid {
  public:
    RadialGrid(std::vector<double> nodes, int quad_order) : nodes_(std::move(nodes)),
                                                            quad_order_(quad_order) {
        if (nodes_.size() < 3) throw std::invalid_argument("RadialGrid: too few nodes");
        if (nodes_.front() != 0.0) throw std::invalid_argument("RadialGrid: r0 must be 0");
        for (std::size_t i = 1; i < nodes_.size(); ++i)
            if (!(nodes_[i] > nodes_[i - 1]))
                throw std::invalid_argument("RadialGrid: nodes must strictly increase");
        if (quad_order_ < 2 || quad_order_ > 16)
            throw std::invalid_argument("RadialGrid: quad_order in [2,16]");
    }

    /// units_segments uniform segments on [0,1], then geometric growth to r_max.
    static std::shared_ptr<const RadialGrid> make(int unit_segments, double r_max,
                                                  double ratio, int quad_order = 4) {
        if (unit_segments < 8) throw std::invalid_argument("RadialGrid: unit_segments < 8");
        if (!(r_max > 1.0)) throw std::invalid_argument("RadialGrid: r_max must exceed 1");
        if (!(ratio > 1.0 && ratio <= 1.2))
            throw std::invalid_argument("RadialGrid: geometric ratio in (1, 1.2]");
        std::vector<double> nodes;
        nodes.reserve(static_cast<std::size_t>(unit_segments) + 64);
        for (int i = 0; i <= unit_segments; ++i)
            nodes.push_back(static_cast<double>(i) / unit_segments);
        // geometric segment sizes h_k = ratio^k / unit_segments, rescaled so the last
        // node lands exactly on r_max (the junction ratio only shrinks)
        const double span = r_max - 1.0;
        std::vector<double> sizes;
        double cum = 0.0, h = ratio / unit_segments;
        while (cum < span) {
            sizes.push_back(h);
            cum += h;
            h *= ratio;
        }
        const double scale = span / cum;
        double r = 1.0;
        for (double hk : sizes) {
            r += scale * hk;
            nodes.push_back(r);
        }
        nodes.back() = r_max;
        return std::make_shared<const RadialGrid>(RadialGrid(std::move(nodes), quad_order));
    }

    const std::vector<double>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }
    std::size_t segments() const { return nodes_.size() - 1; }
    double r_max() const { return nodes_.back(); }
    int quad_order() const { return quad_order_; }
    double node(std::size_t i) const { return nodes_[i]; }

    /// Index of the segment containing r (clamped); grid is uniform-then-geometric so a
    /// binary search is fine everywhere.
    std::size_t segment_of(double r) const {
        if (r <= 0.0) return 0;
        if (r >= r_max()) return segments() - 1;
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), r);
        std::size_t i = static_cast<std::size_t>(it - nodes_.begin());
        return std::min(i - 1, segments() - 1);
    }

    /// Nearest node index to r, if within tol; otherwise npos.
    std::size_t find_node(double r, double tol = 1e-12) const {
        std::size_t i = segment_of(r);
        for (std::size_t j : {i, i + 1})
            if (j < size() && std::abs(nodes_[j] - r) <= tol * std::max(1.0, std::abs(r)))
                return j;
        return static_cast<std::size_t>(-1);
    }

  private:
    std::vector<double> nodes_;
    int quad_order_;
};

using GridPtr = std::shared_ptr<const RadialGrid>;

/// Sampled radial function: one value per node, piecewise linear in between, zero
/// beyond the last node.
struct RadialField {
    GridPtr grid;
    std::vector<double> values;

    RadialField() = default;
    explicit RadialField(GridPtr g, double fill = 0.0)
        : grid(std::move(g)), values(grid->size(), fill) {}
    RadialField(GridPtr g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
        if (values.size() != grid->size())
            throw std::invalid_argument("RadialField: value count != node count");
    }

    double operator()(double r) const {
        if (r >= grid->r_max()) return 0.0;
        if (r <= 0.0) return values.front();
        const std::size_t i = grid->segment_of(r);
        const double a = grid->node(i), b = grid->node(i + 1);
        const double t = (r - a) / (b - a);
        return (1.0 - t) * values[i] + t * values[i + 1];
    }

    RadialField& operator*=(double c) {
        for (double& v : values) v *= c;
        return *this;
    }
    RadialField& operator+=(const RadialField& o) {
        for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
        return *this;
    }
};

inline RadialField operator*(double c, RadialField f) {
    f *= c;
    return f;
}

/// CSV field format: header "r,value", 17 significant digits (bit-exact round trip).
inline void write_field_csv(const RadialField& u, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_field_csv: cannot open " + path);
    out << "r,value\n";
    char buf[64];
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", u.grid->node(i), u.values[i]);
        out << buf;
    }
}

inline RadialField read_field_csv(const std::string& path, int quad_order = 4) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_field_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("r,value", 0) != 0)
        throw std::runtime_error("read_field_csv: missing 'r,value' header in " + path);
    std::vector<double> rs, vs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("read_field_csv: malformed row '" + line + "'");
        rs.push_back(std::stod(line.substr(0, comma)));
        vs.push_back(std::stod(line.substr(comma + 1)));
    }
    auto grid = std::make_shared<const RadialGrid>(RadialGrid(std::move(rs), quad_order));
    return RadialField(grid, std::move(vs));
}

}  // namespace choqlog
