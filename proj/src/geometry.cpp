#include "neurorate/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <boost/multiprecision/cpp_int.hpp>

#include "neurorate/error.hpp"

namespace neurorate {

namespace {

using boost::multiprecision::cpp_rational;
using boost::multiprecision::cpp_int;

constexpr double kEps = std::numeric_limits<double>::epsilon() / 2.0;  // 2^-53
constexpr double kOrientBound = (3.0 + 16.0 * kEps) * kEps;
constexpr double kIncircleBound = (10.0 + 96.0 * kEps) * kEps;

cpp_rational exact(double v) {
    int exponent = 0;
    const double mantissa = std::frexp(v, &exponent);
    const auto scaled = static_cast<long long>(std::ldexp(mantissa, 53));
    cpp_rational r{cpp_int(scaled)};
    const int shift = exponent - 53;
    if (shift >= 0) {
        r *= cpp_rational(cpp_int(1) << shift);
    } else {
        r /= cpp_rational(cpp_int(1) << -shift);
    }
    return r;
}

int sign_of(const cpp_rational& r) { return r > 0 ? 1 : (r < 0 ? -1 : 0); }

int orient_exact(Point2 a, Point2 b, Point2 c) {
    const cpp_rational acx = exact(a.x) - exact(c.x), bcx = exact(b.x) - exact(c.x);
    const cpp_rational acy = exact(a.y) - exact(c.y), bcy = exact(b.y) - exact(c.y);
    return sign_of(acx * bcy - acy * bcx);
}

int incircle_exact(Point2 a, Point2 b, Point2 c, Point2 d) {
    const cpp_rational dx = exact(d.x), dy = exact(d.y);
    const cpp_rational adx = exact(a.x) - dx, ady = exact(a.y) - dy;
    const cpp_rational bdx = exact(b.x) - dx, bdy = exact(b.y) - dy;
    const cpp_rational cdx = exact(c.x) - dx, cdy = exact(c.y) - dy;
    const cpp_rational alift = adx * adx + ady * ady;
    const cpp_rational blift = bdx * bdx + bdy * bdy;
    const cpp_rational clift = cdx * cdx + cdy * cdy;
    const cpp_rational det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                             clift * (adx * bdy - bdx * ady);
    return sign_of(det);
}

bool lex_less(Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); }

} // namespace

int orient2d(Point2 a, Point2 b, Point2 c) {
    const double detleft = (a.x - c.x) * (b.y - c.y);
    const double detright = (a.y - c.y) * (b.x - c.x);
    const double det = detleft - detright;
    const double bound = kOrientBound * (std::abs(detleft) + std::abs(detright));
    if (det > bound) return 1;
    if (-det > bound) return -1;
    return orient_exact(a, b, c);
}

double incircle_value(Point2 a, Point2 b, Point2 c, Point2 d) noexcept {
    const double adx = a.x - d.x, ady = a.y - d.y;
    const double bdx = b.x - d.x, bdy = b.y - d.y;
    const double cdx = c.x - d.x, cdy = c.y - d.y;
    return (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy) + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy) +
           (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
}

int incircle(Point2 a, Point2 b, Point2 c, Point2 d) {
    const double adx = a.x - d.x, ady = a.y - d.y;
    const double bdx = b.x - d.x, bdy = b.y - d.y;
    const double cdx = c.x - d.x, cdy = c.y - d.y;
    const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
    const double cdxady = cdx * ady, adxcdy = adx * cdy;
    const double adxbdy = adx * bdy, bdxady = bdx * ady;
    const double alift = adx * adx + ady * ady;
    const double blift = bdx * bdx + bdy * bdy;
    const double clift = cdx * cdx + cdy * cdy;
    const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
    const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                             (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                             (std::abs(adxbdy) + std::abs(bdxady)) * clift;
    const double bound = kIncircleBound * permanent;
    if (det > bound) return 1;
    if (-det > bound) return -1;
    return incircle_exact(a, b, c, d);
}

namespace {

// Simulation of simplicity: lift weight of point p is |p|^2 + eps^(2^rank(p)).
// The derivative of the incircle determinant with respect to each lift is an
// orientation determinant; the lowest-ranked point with a nonzero derivative
// decides the sign.
int incircle_sos(const std::vector<Point2>& pts, const std::vector<std::size_t>& rank, std::size_t a,
                 std::size_t b, std::size_t c, std::size_t d) {
    const int s = incircle(pts[a], pts[b], pts[c], pts[d]);
    if (s != 0) return s;
    std::array<std::size_t, 4> order{a, b, c, d};
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return rank[l] < rank[r]; });
    for (std::size_t p : order) {
        int coefficient = 0;
        if (p == a) coefficient = orient2d(pts[b], pts[c], pts[d]);
        else if (p == b) coefficient = orient2d(pts[c], pts[a], pts[d]);
        else if (p == c) coefficient = orient2d(pts[a], pts[b], pts[d]);
        else coefficient = -orient2d(pts[a], pts[b], pts[c]);
        if (coefficient != 0) return coefficient;
    }
    return 0;
}

struct EdgeKey {
    std::size_t lo;
    std::size_t hi;
    auto operator<=>(const EdgeKey&) const = default;
};

EdgeKey key(std::size_t u, std::size_t v) { return u < v ? EdgeKey{u, v} : EdgeKey{v, u}; }

} // namespace

Triangulation::Triangulation(std::vector<Point2> points) : points_(std::move(points)) {
    const std::size_t n = points_.size();
    if (n < 3) throw InvalidArgument("triangulation needs at least 3 points");
    for (const auto& p : points_) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InvalidArgument("triangulation: non-finite point");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t l, std::size_t r) { return lex_less(points_[l], points_[r]); });
    rank_.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) rank_[order[i]] = i;
    for (std::size_t i = 1; i < n; ++i) {
        if (points_[order[i]] == points_[order[i - 1]]) throw InvalidArgument("triangulation: duplicate points");
    }

    const auto& P = points_;
    auto orient = [&](std::size_t a, std::size_t b, std::size_t c) { return orient2d(P[a], P[b], P[c]); };

    // Sweep: the first k points may be collinear.
    std::size_t k = 2;
    while (k < n && orient(order[0], order[1], order[k]) == 0) ++k;
    if (k == n) throw InvalidArgument("triangulation: all points are collinear");

    std::vector<Triangle> tris;
    std::vector<std::size_t> hull;  // counter-clockwise
    const std::size_t apex = order[k];
    const bool left = orient(order[0], order[1], apex) > 0;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        if (left) tris.push_back({order[i], order[i + 1], apex});
        else tris.push_back({order[i + 1], order[i], apex});
    }
    if (left) {
        for (std::size_t i = 0; i < k; ++i) hull.push_back(order[i]);
        hull.push_back(apex);
    } else {
        for (std::size_t i = k; i-- > 0;) hull.push_back(order[i]);
        hull.push_back(apex);
    }

    for (std::size_t idx = k + 1; idx < n; ++idx) {
        const std::size_t q = order[idx];
        const std::size_t h = hull.size();
        std::vector<bool> visible(h);
        for (std::size_t e = 0; e < h; ++e) visible[e] = orient(hull[e], hull[(e + 1) % h], q) < 0;
        std::size_t start = h;
        for (std::size_t e = 0; e < h; ++e) {
            if (visible[e] && !visible[(e + h - 1) % h]) {
                start = e;
                break;
            }
        }
        if (start == h) throw Error("triangulation: sweep found no visible hull edge");
        std::size_t e = start;
        std::size_t visible_count = 0;
        while (visible[e]) {
            tris.push_back({hull[(e + 1) % h], hull[e], q});
            ++visible_count;
            e = (e + 1) % h;
        }
        // Hull vertices strictly inside the visible chain are removed.
        std::vector<std::size_t> next;
        next.reserve(h + 1);
        const std::size_t chain_end = (start + visible_count) % h;
        for (std::size_t i = 0; i + visible_count <= h; ++i) {
            const std::size_t v = (chain_end + i) % h;
            next.push_back(hull[v]);
            if (v == start) break;
        }
        next.push_back(q);
        hull = std::move(next);
    }

    // Lawson flips to the (perturbed) Delaunay triangulation.
    bool flipped = true;
    while (flipped) {
        flipped = false;
        std::map<EdgeKey, std::vector<std::pair<std::size_t, int>>> edges;
        for (std::size_t t = 0; t < tris.size(); ++t) {
            for (int j = 0; j < 3; ++j) edges[key(tris[t][(j + 1) % 3], tris[t][(j + 2) % 3])].push_back({t, j});
        }
        for (const auto& [edge, owners] : edges) {
            if (owners.size() != 2) continue;
            const auto [t0, j0] = owners[0];
            const auto [t1, j1] = owners[1];
            const std::size_t a = tris[t0][static_cast<std::size_t>(j0)];
            const std::size_t b = tris[t0][static_cast<std::size_t>((j0 + 1) % 3)];
            const std::size_t c = tris[t0][static_cast<std::size_t>((j0 + 2) % 3)];
            const std::size_t d = tris[t1][static_cast<std::size_t>(j1)];
            if (incircle_sos(P, rank_, a, b, c, d) <= 0) continue;
            if (orient(a, b, d) <= 0 || orient(a, d, c) <= 0) continue;
            tris[t0] = {a, b, d};
            tris[t1] = {a, d, c};
            flipped = true;
            break;
        }
    }

    // Canonical form: rotate each triangle so its lowest-ranked vertex comes
    // first, then sort triangles by rank tuple.
    for (auto& t : tris) {
        while (rank_[t[0]] > rank_[t[1]] || rank_[t[0]] > rank_[t[2]]) t = {t[1], t[2], t[0]};
    }
    std::sort(tris.begin(), tris.end(), [&](const Triangle& l, const Triangle& r) {
        return std::tie(rank_[l[0]], rank_[l[1]], rank_[l[2]]) < std::tie(rank_[r[0]], rank_[r[1]], rank_[r[2]]);
    });
    triangles_ = std::move(tris);

    neighbors_.assign(n, {});
    for (const auto& t : triangles_) {
        for (int j = 0; j < 3; ++j) {
            const std::size_t u = t[static_cast<std::size_t>(j)];
            const std::size_t v = t[static_cast<std::size_t>((j + 1) % 3)];
            neighbors_[u].push_back(v);
            neighbors_[v].push_back(u);
        }
    }
    for (auto& nb : neighbors_) {
        std::sort(nb.begin(), nb.end(), [&](std::size_t l, std::size_t r) { return rank_[l] < rank_[r]; });
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
}

} // namespace neurorate
