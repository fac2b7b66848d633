#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace neurorate {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Sign of the signed area of (a, b, c): +1 counter-clockwise, -1 clockwise,
/// 0 collinear. Exact for all finite inputs.
[[nodiscard]] int orient2d(Point2 a, Point2 b, Point2 c);

/// +1 when d lies strictly inside the circumcircle of the counter-clockwise
/// triangle (a, b, c), -1 outside, 0 on the circle. Exact.
[[nodiscard]] int incircle(Point2 a, Point2 b, Point2 c, Point2 d);

/// Floating-point incircle determinant (positive inside), for diagnostics.
[[nodiscard]] double incircle_value(Point2 a, Point2 b, Point2 c, Point2 d) noexcept;

using Triangle = std::array<std::size_t, 3>;

/// Delaunay triangulation of a planar point set.
///
/// Points are processed in lexicographic (x, y) order, and cocircular ties are
/// broken by simulation of simplicity on the lifted paraboloid weights
/// (lexicographically smaller points carry the dominant perturbation). The
/// result therefore depends only on the point set, not on input order; the
/// triangle list is returned in a canonical order.
class Triangulation {
public:
    /// Throws InvalidArgument for fewer than 3 points, duplicate or
    /// non-finite points, or an all-collinear set.
    explicit Triangulation(std::vector<Point2> points);

    [[nodiscard]] const std::vector<Point2>& points() const noexcept { return points_; }
    /// Counter-clockwise vertex triples indexing points().
    [[nodiscard]] const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
    /// Vertices sharing an edge with `vertex`, in canonical (lexicographic point) order.
    [[nodiscard]] const std::vector<std::size_t>& neighbors(std::size_t vertex) const { return neighbors_[vertex]; }
    /// Rank of each point in lexicographic order.
    [[nodiscard]] const std::vector<std::size_t>& ranks() const noexcept { return rank_; }

private:
    std::vector<Point2> points_;
    std::vector<std::size_t> rank_;
    std::vector<Triangle> triangles_;
    std::vector<std::vector<std::size_t>> neighbors_;
};

} // namespace neurorate
