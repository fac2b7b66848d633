#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "neurorate/geometry.hpp"

namespace neurorate {

/// C1 piecewise-cubic Clough-Tocher interpolant over the Delaunay
/// triangulation of scattered nodes.
///
/// Each triangle is split at its centroid into three cubic Bezier patches.
/// Nodal gradients are least-squares plane fits over the triangulation
/// neighbours of each node, and the cross-boundary derivative is linear
/// along every edge (the reduced element), which keeps the interpolant C1
/// across triangles and exact for linear data.
///
/// Internally everything runs in lexicographic node order, so results are
/// bit-identical under any permutation of (node, value) pairs.
class CloughTocher {
public:
    /// Throws InvalidArgument for fewer than 3 nodes or a degenerate node set.
    explicit CloughTocher(std::vector<Point2> nodes);

    struct Location {
        std::size_t triangle = 0;
        std::array<double, 3> barycentric{};
    };

    /// Per-node values and gradients plus the Bezier control nets of every
    /// triangle, ready for repeated evaluation.
    struct Surface {
        std::vector<double> values;    // canonical node order
        std::vector<Point2> gradients; // canonical node order
        std::vector<std::array<double, 19>> nets;
    };

    [[nodiscard]] std::size_t node_count() const noexcept { return canonical_.size(); }
    [[nodiscard]] const Triangulation& triangulation() const noexcept { return triangulation_; }

    /// Containing triangle, or nullopt outside the convex hull.
    [[nodiscard]] std::optional<Location> locate(Point2 p) const;

    /// `values` are given in the constructor's node order.
    [[nodiscard]] Surface prepare(std::span<const double> values) const;
    [[nodiscard]] double evaluate(const Surface& surface, const Location& where) const;
    /// Convenience: prepare + locate + evaluate; `outside` beyond the hull.
    [[nodiscard]] double operator()(std::span<const double> values, Point2 p, double outside = 0.0) const;

    /// Gradient estimate at input node i for the given values.
    [[nodiscard]] Point2 gradient(const Surface& surface, std::size_t input_node) const;

private:
    std::vector<std::size_t> canonical_;  // canonical index -> input index
    std::vector<std::size_t> input_to_canonical_;
    Triangulation triangulation_;         // built on canonical nodes
    std::vector<std::vector<std::pair<std::size_t, Point2>>> gradient_weights_;
};

} // namespace neurorate
