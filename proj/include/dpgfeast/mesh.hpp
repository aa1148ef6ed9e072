#pragma once

// Conforming triangular meshes with region tags: structured generators for
// the unit square, the L-shape and a graded disc, uniform quadrisection and
// a plain ASCII file format.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"

namespace dpgfeast {

struct point
{
    double x = 0.0;
    double y = 0.0;
};

inline point operator+(point a, point b) { return {a.x + b.x, a.y + b.y}; }
inline point operator-(point a, point b) { return {a.x - b.x, a.y - b.y}; }
inline point operator*(double s, point a) { return {s * a.x, s * a.y}; }
inline double norm(point a) { return std::hypot(a.x, a.y); }

using triangle = std::array<int, 3>;
using edge = std::array<int, 2>; // {low vertex, high vertex}

/// Immutable conforming triangulation.
///
/// Triangles are stored counterclockwise. Local edge i of a triangle is the
/// edge opposite local vertex i, traversed from vertex (i+1)%3 to (i+2)%3.
/// Edges are stored with the lower vertex index first; that orientation is
/// the global orientation used by edge-based degrees of freedom.
class mesh
{
public:
    /// Builds the edge structure and validates the triangulation. Clockwise
    /// triangles are reoriented; degenerate or non-conforming input throws.
    /// `snap_radii` lists origin-centred circles onto which refinement
    /// projects midpoints of boundary and region-interface edges.
    mesh(std::vector<point> vertices,
         std::vector<triangle> triangles,
         std::vector<int> region_tags,
         std::vector<double> snap_radii = {})
        : vertices_(std::move(vertices))
        , triangles_(std::move(triangles))
        , tags_(std::move(region_tags))
        , snap_radii_(std::move(snap_radii))
    {
        if (tags_.empty())
            tags_.assign(triangles_.size(), 0);
        if (tags_.size() != triangles_.size())
            throw mesh_error("region tag count does not match triangle count");
        build();
    }

    const std::vector<point>& vertices() const noexcept { return vertices_; }
    const std::vector<triangle>& triangles() const noexcept { return triangles_; }
    const std::vector<edge>& edges() const noexcept { return edges_; }
    const std::vector<int>& region_tags() const noexcept { return tags_; }
    const std::vector<double>& snap_radii() const noexcept { return snap_radii_; }

    std::size_t num_vertices() const noexcept { return vertices_.size(); }
    std::size_t num_triangles() const noexcept { return triangles_.size(); }
    std::size_t num_edges() const noexcept { return edges_.size(); }

    /// Global edge index of local edge i of triangle t.
    int triangle_edge(std::size_t t, int i) const { return triangle_edges_[t][i]; }
    const std::array<int, 3>& triangle_edges(std::size_t t) const { return triangle_edges_[t]; }

    /// Owning triangles of an edge; the second entry is -1 on the boundary.
    const std::array<int, 2>& edge_owners(std::size_t e) const { return edge_owners_[e]; }
    bool is_boundary_edge(std::size_t e) const { return edge_owners_[e][1] < 0; }
    bool is_boundary_vertex(std::size_t v) const { return boundary_vertex_[v]; }

    std::size_t num_boundary_edges() const
    {
        return static_cast<std::size_t>(
            std::count_if(edge_owners_.begin(), edge_owners_.end(), [](const auto& o) { return o[1] < 0; }));
    }

    /// Edges between triangles with different region tags.
    bool is_interface_edge(std::size_t e) const
    {
        const auto& o = edge_owners_[e];
        return o[1] >= 0 && tags_[o[0]] != tags_[o[1]];
    }

    double signed_area(std::size_t t) const
    {
        const auto& tri = triangles_[t];
        return signed_area(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
    }

    double total_area() const
    {
        double a = 0.0;
        for (std::size_t t = 0; t < triangles_.size(); ++t)
            a += signed_area(t);
        return a;
    }

    /// Element diameter (longest edge).
    double diameter(std::size_t t) const
    {
        const auto& tri = triangles_[t];
        double d = 0.0;
        for (int i = 0; i < 3; ++i)
            d = std::max(d, norm(vertices_[tri[(i + 1) % 3]] - vertices_[tri[i]]));
        return d;
    }

    double h_max() const noexcept { return h_max_; }

    /// Largest diameter over triangles carrying `tag`.
    double h_max(int tag) const
    {
        double h = 0.0;
        for (std::size_t t = 0; t < triangles_.size(); ++t)
            if (tags_[t] == tag)
                h = std::max(h, diameter(t));
        return h;
    }

    static double signed_area(point a, point b, point c)
    {
        return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
    }

private:
    void build()
    {
        const auto nv = static_cast<std::int64_t>(vertices_.size());
        for (auto& tri : triangles_) {
            for (int v : tri)
                if (v < 0 || v >= nv)
                    throw mesh_error("triangle references vertex " + std::to_string(v) + " out of range");
            double a = signed_area(vertices_[tri[0]], vertices_[tri[1]], vertices_[tri[2]]);
            if (a < 0.0) {
                std::swap(tri[1], tri[2]);
                a = -a;
            }
            if (!(a > 0.0))
                throw mesh_error("degenerate triangle");
        }

        std::unordered_map<std::int64_t, int> lookup;
        lookup.reserve(triangles_.size() * 2);
        triangle_edges_.resize(triangles_.size());
        for (std::size_t t = 0; t < triangles_.size(); ++t) {
            const auto& tri = triangles_[t];
            for (int i = 0; i < 3; ++i) {
                int a = tri[(i + 1) % 3], b = tri[(i + 2) % 3];
                int lo = std::min(a, b), hi = std::max(a, b);
                auto key = static_cast<std::int64_t>(lo) * nv + hi;
                auto [it, inserted] = lookup.try_emplace(key, static_cast<int>(edges_.size()));
                if (inserted) {
                    edges_.push_back({lo, hi});
                    edge_owners_.push_back({static_cast<int>(t), -1});
                } else {
                    auto& owners = edge_owners_[it->second];
                    if (owners[1] >= 0)
                        throw mesh_error("edge shared by more than two triangles");
                    owners[1] = static_cast<int>(t);
                }
                triangle_edges_[t][i] = it->second;
            }
        }

        boundary_vertex_.assign(vertices_.size(), false);
        for (std::size_t e = 0; e < edges_.size(); ++e)
            if (edge_owners_[e][1] < 0) {
                boundary_vertex_[edges_[e][0]] = true;
                boundary_vertex_[edges_[e][1]] = true;
            }

        h_max_ = 0.0;
        for (std::size_t t = 0; t < triangles_.size(); ++t)
            h_max_ = std::max(h_max_, diameter(t));
    }

    std::vector<point> vertices_;
    std::vector<triangle> triangles_;
    std::vector<int> tags_;
    std::vector<double> snap_radii_;
    std::vector<edge> edges_;
    std::vector<std::array<int, 2>> edge_owners_;
    std::vector<std::array<int, 3>> triangle_edges_;
    std::vector<bool> boundary_vertex_;
    double h_max_ = 0.0;
};

namespace detail {

// n x n squares per unit length on the cells listed by `keep(i, j)`, each
// split along the (i,j)-(i+1,j+1) diagonal.
template <typename Keep>
mesh structured_grid(int nx, int ny, double cell, Keep keep)
{
    std::vector<int> index((nx + 1) * (ny + 1), -1);
    std::vector<point> verts;
    auto vid = [&](int i, int j) -> int {
        int& id = index[j * (nx + 1) + i];
        if (id < 0) {
            id = static_cast<int>(verts.size());
            verts.push_back({i * cell, j * cell});
        }
        return id;
    };
    std::vector<triangle> tris;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            if (!keep(i, j))
                continue;
            int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
            tris.push_back({a, b, c});
            tris.push_back({a, c, d});
        }
    std::vector<int> tags(tris.size(), 0);
    return mesh(std::move(verts), std::move(tris), std::move(tags));
}

} // namespace detail

/// (0,1)^2 split into n x n squares, two triangles each.
inline mesh make_unit_square(int n)
{
    if (n < 1)
        throw mesh_error("make_unit_square: n must be >= 1");
    return detail::structured_grid(n, n, 1.0 / n, [](int, int) { return true; });
}

/// (0,2)^2 \ [1,2]^2 with n squares per unit length.
inline mesh make_lshape(int n)
{
    if (n < 1)
        throw mesh_error("make_lshape: n must be >= 1");
    return detail::structured_grid(2 * n, 2 * n, 1.0 / n, [n](int i, int j) { return i < n || j < n; });
}

/// Region tags used by the fiber mesh.
inline constexpr int core_tag = 1;
inline constexpr int cladding_tag = 2;

/// Straight-edged triangulation of the unit disc built from concentric rings.
///
/// The circle r = r_interface is a ring of the mesh, triangles inside it are
/// tagged `core_tag`, the rest `cladding_tag`. Target element size is
/// 2*pi/n_boundary on the outer circle and `grading` times smaller at the
/// interface, growing linearly in r in between. Every ring carries a multiple
/// of 8 points and each of the 8 sectors is triangulated identically, so the
/// mesh is invariant under rotation by pi/4 (n_boundary is rounded up to a
/// multiple of 8).
inline mesh make_disc_fiber(int n_boundary, double r_interface, double grading)
{
    constexpr int sectors = 8;
    if (!(r_interface > 0.0 && r_interface < 1.0))
        throw mesh_error("make_disc_fiber: interface radius must lie in (0,1)");
    if (n_boundary < 16)
        throw mesh_error("make_disc_fiber: need at least 16 boundary segments");
    if (!(grading >= 1.0))
        throw mesh_error("make_disc_fiber: grading factor must be >= 1");

    const int per_sector_outer = (n_boundary + sectors - 1) / sectors;
    const double two_pi = 2.0 * std::numbers::pi;
    const double h_outer = two_pi / (sectors * per_sector_outer);
    const double h_core = h_outer / grading;

    // ring radii and per-sector segment counts; ring 0 is the centre point
    std::vector<double> radii{0.0};
    std::vector<int> per_sector{0};
    auto count_for = [&](double r, double h) {
        return std::max(1, static_cast<int>(std::lround(two_pi * r / (sectors * h))));
    };

    const int core_rings = std::max(1, static_cast<int>(std::lround(r_interface / h_core)));
    for (int j = 1; j <= core_rings; ++j) {
        double r = r_interface * j / core_rings;
        radii.push_back(r);
        per_sector.push_back(count_for(r, h_core));
    }
    const std::size_t interface_ring = radii.size() - 1;

    auto size_at = [&](double r) {
        return h_core + (h_outer - h_core) * (r - r_interface) / (1.0 - r_interface);
    };
    std::vector<double> clad;
    for (double r = r_interface; r < 1.0;) {
        r += size_at(r);
        clad.push_back(r);
    }
    // the last ring overshoots; pull the cladding rings in so it lands on r = 1
    // and drop a final ring that would be much thinner than its neighbour
    if (clad.size() >= 2) {
        double last = clad.back(), prev = clad[clad.size() - 2];
        if ((1.0 - prev) < 0.5 * (last - prev))
            clad.pop_back();
    }
    const double stretch = (1.0 - r_interface) / (clad.back() - r_interface);
    for (std::size_t j = 0; j < clad.size(); ++j) {
        double r = (j + 1 == clad.size()) ? 1.0 : r_interface + (clad[j] - r_interface) * stretch;
        radii.push_back(r);
        per_sector.push_back(j + 1 == clad.size() ? per_sector_outer : count_for(r, size_at(r)));
    }

    std::vector<point> verts{{0.0, 0.0}};
    std::vector<int> ring_start{0};
    for (std::size_t j = 1; j < radii.size(); ++j) {
        ring_start.push_back(static_cast<int>(verts.size()));
        const int n = sectors * per_sector[j];
        for (int t = 0; t < n; ++t) {
            double theta = two_pi * t / n;
            verts.push_back({radii[j] * std::cos(theta), radii[j] * std::sin(theta)});
        }
    }

    std::vector<triangle> tris;
    std::vector<int> tags;
    auto ring_vertex = [&](std::size_t j, int t) {
        if (j == 0)
            return 0;
        const int n = sectors * per_sector[j];
        return ring_start[j] + ((t % n) + n) % n;
    };
    for (std::size_t j = 0; j + 1 < radii.size(); ++j) {
        const int tag = (j + 1 <= interface_ring) ? core_tag : cladding_tag;
        const int a = per_sector[j], b = per_sector[j + 1];
        for (int s = 0; s < sectors; ++s) {
            if (j == 0) {
                for (int u = 0; u < b; ++u) {
                    tris.push_back({0, ring_vertex(1, s * b + u), ring_vertex(1, s * b + u + 1)});
                    tags.push_back(tag);
                }
                continue;
            }
            // merge the two polylines by angle; comparisons are done on the
            // per-sector fractions u/a and v/b so every sector is identical
            int u = 0, v = 0;
            while (u < a || v < b) {
                bool advance_inner = v == b || (u < a && static_cast<long>(u + 1) * b <= static_cast<long>(v + 1) * a);
                int p0 = ring_vertex(j, s * a + u), q0 = ring_vertex(j + 1, s * b + v);
                if (advance_inner) {
                    tris.push_back({p0, ring_vertex(j, s * a + u + 1), q0});
                    ++u;
                } else {
                    tris.push_back({p0, ring_vertex(j + 1, s * b + v + 1), q0});
                    ++v;
                }
                tags.push_back(tag);
            }
        }
    }
    return mesh(std::move(verts), std::move(tris), std::move(tags), {r_interface, 1.0});
}

/// Quadrisection through edge midpoints. Midpoints of boundary and interface
/// edges whose endpoints lie on one of the mesh's snap circles are projected
/// onto that circle.
inline mesh refine_uniform(const mesh& m)
{
    const auto& verts = m.vertices();
    std::vector<point> out(verts);
    out.reserve(verts.size() + m.num_edges());
    for (std::size_t e = 0; e < m.num_edges(); ++e) {
        point a = verts[m.edges()[e][0]], b = verts[m.edges()[e][1]];
        point mid = 0.5 * (a + b);
        if (m.is_boundary_edge(e) || m.is_interface_edge(e)) {
            for (double r : m.snap_radii()) {
                double tol = 1e-10 * std::max(1.0, r);
                if (std::abs(norm(a) - r) <= tol && std::abs(norm(b) - r) <= tol) {
                    double len = norm(mid);
                    if (len > 0.0)
                        mid = (r / len) * mid;
                    break;
                }
            }
        }
        out.push_back(mid);
    }

    const int nv = static_cast<int>(verts.size());
    std::vector<triangle> tris;
    std::vector<int> tags;
    tris.reserve(4 * m.num_triangles());
    tags.reserve(4 * m.num_triangles());
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        const auto& tri = m.triangles()[t];
        // midpoint opposite local vertex i
        int m0 = nv + m.triangle_edge(t, 0), m1 = nv + m.triangle_edge(t, 1), m2 = nv + m.triangle_edge(t, 2);
        tris.push_back({tri[0], m2, m1});
        tris.push_back({m2, tri[1], m0});
        tris.push_back({m1, m0, tri[2]});
        tris.push_back({m0, m1, m2});
        for (int k = 0; k < 4; ++k)
            tags.push_back(m.region_tags()[t]);
    }
    return mesh(std::move(out), std::move(tris), std::move(tags), m.snap_radii());
}

inline mesh refine_uniform(const mesh& m, int times)
{
    mesh r = m;
    for (int i = 0; i < times; ++i)
        r = refine_uniform(r);
    return r;
}

/// ASCII format: `V T B`, then V lines `x y`, T lines `i j k tag`, B lines
/// `i j` listing the boundary edges. The boundary list must match the edges
/// with a single owning triangle.
inline mesh read_mesh(std::istream& in)
{
    std::size_t nv = 0, nt = 0, nb = 0;
    if (!(in >> nv >> nt >> nb))
        throw mesh_error("mesh file: bad header");
    std::vector<point> verts(nv);
    for (auto& p : verts)
        if (!(in >> p.x >> p.y))
            throw mesh_error("mesh file: truncated vertex list");
    std::vector<triangle> tris(nt);
    std::vector<int> tags(nt);
    for (std::size_t t = 0; t < nt; ++t)
        if (!(in >> tris[t][0] >> tris[t][1] >> tris[t][2] >> tags[t]))
            throw mesh_error("mesh file: truncated triangle list");
    std::vector<edge> bnd(nb);
    for (auto& e : bnd) {
        if (!(in >> e[0] >> e[1]))
            throw mesh_error("mesh file: truncated boundary list");
        if (e[0] > e[1])
            std::swap(e[0], e[1]);
    }
    mesh m(std::move(verts), std::move(tris), std::move(tags));

    std::vector<edge> derived;
    for (std::size_t e = 0; e < m.num_edges(); ++e)
        if (m.is_boundary_edge(e))
            derived.push_back(m.edges()[e]);
    std::sort(derived.begin(), derived.end());
    std::sort(bnd.begin(), bnd.end());
    if (derived != bnd)
        throw mesh_error("mesh file: boundary edge list does not match the triangulation");
    return m;
}

inline mesh read_mesh(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw mesh_error("cannot open mesh file " + path);
    return read_mesh(in);
}

inline void write_mesh(std::ostream& out, const mesh& m)
{
    out.precision(17);
    out << m.num_vertices() << ' ' << m.num_triangles() << ' ' << m.num_boundary_edges() << '\n';
    for (const auto& p : m.vertices())
        out << p.x << ' ' << p.y << '\n';
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        const auto& tri = m.triangles()[t];
        out << tri[0] << ' ' << tri[1] << ' ' << tri[2] << ' ' << m.region_tags()[t] << '\n';
    }
    for (std::size_t e = 0; e < m.num_edges(); ++e)
        if (m.is_boundary_edge(e))
            out << m.edges()[e][0] << ' ' << m.edges()[e][1] << '\n';
}

} // namespace dpgfeast
