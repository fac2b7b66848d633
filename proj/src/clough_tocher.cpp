#include "neurorate/clough_tocher.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "neurorate/error.hpp"

namespace neurorate {

namespace {

std::vector<std::size_t> lexicographic_order(const std::vector<Point2>& nodes) {
    std::vector<std::size_t> order(nodes.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        return nodes[l].x < nodes[r].x || (nodes[l].x == nodes[r].x && nodes[l].y < nodes[r].y);
    });
    return order;
}

std::vector<Point2> permuted(const std::vector<Point2>& nodes, const std::vector<std::size_t>& order) {
    if (nodes.size() < 3) throw InvalidArgument("Clough-Tocher interpolation needs at least 3 nodes");
    std::vector<Point2> out;
    out.reserve(order.size());
    for (auto i : order) out.push_back(nodes[i]);
    return out;
}

double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
Point2 sub(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }

// Control-net layout for one macro triangle (vertices V0, V1, V2; centroid C).
enum Net : std::size_t {
    kP0 = 0, kP1, kP2,             // vertex values
    kE01, kE02, kE10, kE12, kE20, kE21,  // edge points, E_ij next to V_i toward V_j
    kI0, kI1, kI2,                 // (2 V_i + C) / 3
    kT0, kT1, kT2,                 // centre of the sub-triangle opposite V_k
    kQ0, kQ1, kQ2,                 // (V_i + 2 C) / 3
    kS                             // centroid
};

std::size_t edge_point(std::size_t i, std::size_t j) {
    static constexpr std::size_t table[3][3] = {{0, kE01, kE02}, {kE10, 0, kE12}, {kE20, kE21, 0}};
    return table[i][j];
}

} // namespace

CloughTocher::CloughTocher(std::vector<Point2> nodes)
    : canonical_(lexicographic_order(nodes)), triangulation_(permuted(nodes, canonical_)) {
    const std::size_t n = canonical_.size();
    input_to_canonical_.assign(n, 0);
    for (std::size_t c = 0; c < n; ++c) input_to_canonical_[canonical_[c]] = c;

    // Least-squares plane through each node and its neighbours:
    // g_i = sum_j A^{-1} d_j (f_j - f_i), A = sum_j d_j d_j^T.
    const auto& pts = triangulation_.points();
    gradient_weights_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double axx = 0.0, axy = 0.0, ayy = 0.0;
        for (std::size_t j : triangulation_.neighbors(i)) {
            const Point2 d = sub(pts[j], pts[i]);
            axx += d.x * d.x;
            axy += d.x * d.y;
            ayy += d.y * d.y;
        }
        const double det = axx * ayy - axy * axy;
        if (!(std::abs(det) > 0.0)) throw InvalidArgument("Clough-Tocher: singular gradient stencil");
        for (std::size_t j : triangulation_.neighbors(i)) {
            const Point2 d = sub(pts[j], pts[i]);
            gradient_weights_[i].push_back({j, {(ayy * d.x - axy * d.y) / det, (axx * d.y - axy * d.x) / det}});
        }
    }
}

std::optional<CloughTocher::Location> CloughTocher::locate(Point2 p) const {
    constexpr double tol = 1e-12;
    const auto& pts = triangulation_.points();
    const auto& tris = triangulation_.triangles();
    for (std::size_t t = 0; t < tris.size(); ++t) {
        const Point2 a = pts[tris[t][0]], b = pts[tris[t][1]], c = pts[tris[t][2]];
        const double det = (b.y - c.y) * (a.x - c.x) + (c.x - b.x) * (a.y - c.y);
        const double l0 = ((b.y - c.y) * (p.x - c.x) + (c.x - b.x) * (p.y - c.y)) / det;
        const double l1 = ((c.y - a.y) * (p.x - c.x) + (a.x - c.x) * (p.y - c.y)) / det;
        const double l2 = 1.0 - l0 - l1;
        if (l0 >= -tol && l1 >= -tol && l2 >= -tol) return Location{t, {l0, l1, l2}};
    }
    return std::nullopt;
}

CloughTocher::Surface CloughTocher::prepare(std::span<const double> values) const {
    const std::size_t n = canonical_.size();
    if (values.size() != n) throw InvalidArgument("Clough-Tocher: expected one value per node");
    Surface s;
    s.values.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
        s.values[c] = values[canonical_[c]];
        if (!std::isfinite(s.values[c])) throw InvalidArgument("Clough-Tocher: non-finite nodal value");
    }
    s.gradients.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Point2 g{};
        for (const auto& [j, w] : gradient_weights_[i]) {
            const double df = s.values[j] - s.values[i];
            g.x += w.x * df;
            g.y += w.y * df;
        }
        s.gradients[i] = g;
    }

    const auto& pts = triangulation_.points();
    s.nets.reserve(triangulation_.triangles().size());
    for (const auto& tri : triangulation_.triangles()) {
        std::array<double, 19> b{};
        const std::array<Point2, 3> v{pts[tri[0]], pts[tri[1]], pts[tri[2]]};
        const Point2 centroid{(v[0].x + v[1].x + v[2].x) / 3.0, (v[0].y + v[1].y + v[2].y) / 3.0};
        for (std::size_t i = 0; i < 3; ++i) {
            const double f = s.values[tri[i]];
            const Point2 g = s.gradients[tri[i]];
            b[kP0 + i] = f;
            for (std::size_t j = 0; j < 3; ++j) {
                if (j != i) b[edge_point(i, j)] = f + dot(g, sub(v[j], v[i])) / 3.0;
            }
            b[kI0 + i] = f + dot(g, sub(centroid, v[i])) / 3.0;
        }
        // Sub-triangle (V_i, V_j, C) opposite V_k: choose its centre point so
        // the derivative normal to edge V_iV_j is linear along the edge.
        for (std::size_t k = 0; k < 3; ++k) {
            const std::size_t i = (k + 1) % 3, j = (k + 2) % 3;
            const Point2 e = sub(v[j], v[i]);
            const Point2 mid{0.5 * (v[i].x + v[j].x), 0.5 * (v[i].y + v[j].y)};
            const double tau = dot(sub(centroid, mid), e) / dot(e, e);
            const double alpha = -0.5 + tau, beta = -0.5 - tau;
            const double eij = b[edge_point(i, j)], eji = b[edge_point(j, i)];
            const double k0 = alpha * b[kP0 + i] + beta * eij + b[kI0 + i];
            const double k2 = alpha * eji + beta * b[kP0 + j] + b[kI0 + j];
            b[kT0 + k] = 0.5 * (k0 + k2) - alpha * eij - beta * eji;
        }
        // C1 across the interior edges V_i C and at the split point.
        for (std::size_t i = 0; i < 3; ++i) {
            const std::size_t j = (i + 1) % 3, k = (i + 2) % 3;
            // Sub-triangles touching V_i are the ones opposite V_j and V_k.
            b[kQ0 + i] = (b[kI0 + i] + b[kT0 + j] + b[kT0 + k]) / 3.0;
        }
        b[kS] = (b[kQ0] + b[kQ1] + b[kQ2]) / 3.0;
        s.nets.push_back(b);
    }
    return s;
}

double CloughTocher::evaluate(const Surface& surface, const Location& where) const {
    const auto& b = surface.nets.at(where.triangle);
    const auto& l = where.barycentric;
    std::size_t k = 0;
    if (l[1] < l[k]) k = 1;
    if (l[2] < l[k]) k = 2;
    const std::size_t i = (k + 1) % 3, j = (k + 2) % 3;
    // Barycentric coordinates in the sub-triangle (V_i, V_j, C).
    const double u = l[i] - l[k], v = l[j] - l[k], w = 3.0 * l[k];
    return b[kP0 + i] * u * u * u + b[kP0 + j] * v * v * v + b[kS] * w * w * w +
           3.0 * (b[edge_point(i, j)] * u * u * v + b[edge_point(j, i)] * u * v * v + b[kI0 + i] * u * u * w +
                  b[kI0 + j] * v * v * w + b[kQ0 + i] * u * w * w + b[kQ0 + j] * v * w * w) +
           6.0 * b[kT0 + k] * u * v * w;
}

double CloughTocher::operator()(std::span<const double> values, Point2 p, double outside) const {
    const auto where = locate(p);
    if (!where) return outside;
    return evaluate(prepare(values), *where);
}

Point2 CloughTocher::gradient(const Surface& surface, std::size_t input_node) const {
    return surface.gradients.at(input_to_canonical_.at(input_node));
}

} // namespace neurorate
