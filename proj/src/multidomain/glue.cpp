#include <fervor/multidomain.hpp>

#include <algorithm>
#include <cmath>
#include <tuple>

namespace fervor {

Vec Intersection::center() const
{
    Vec c = Vec::Zero();
    for (const auto& p : corners)
        c += p;
    return c/static_cast<double>(corners.size());
}

std::optional<std::array<double, 2>> clipSegment(const Vec& a, const Vec& b, std::span<const Vec> polygon)
{
    // Cyrus-Beck against the inward half planes of a ccw convex polygon (xy-plane)
    const Vec d = b - a;
    const double len = d.head<2>().norm();
    if (len == 0.0 || polygon.size() < 3)
        return std::nullopt;

    double tEnter = 0.0, tLeave = 1.0;
    const std::size_t n = polygon.size();
    for (std::size_t i = 0; i < n; ++i)
    {
        const Vec& p = polygon[i];
        const Vec e = polygon[(i + 1) % n] - p;
        const double elen = e.head<2>().norm();
        const Eigen::Vector2d normal(-e.y(), e.x());
        const double num = normal.dot((a - p).head<2>());
        const double den = normal.dot(d.head<2>());
        if (std::abs(den) <= 1e-14*elen*len)
        {
            // parallel: outside if strictly on the outer side of the edge line
            if (num < -1e-12*elen*std::max(elen, len))
                return std::nullopt;
            continue;
        }
        const double t = -num/den;
        if (den > 0.0)
            tEnter = std::max(tEnter, t);
        else
            tLeave = std::min(tLeave, t);
        if (tEnter >= tLeave)
            return std::nullopt;
    }
    if (tLeave - tEnter <= 1e-12)
        return std::nullopt;
    return std::array<double, 2>{tEnter, tLeave};
}

namespace {

struct Piece
{
    double t0, t1;
    int target;
};

bool inPlane(const Vec& p, double scale)
{
    return std::abs(p.z()) <= 1e-12*scale;
}

template<class Candidates>
Glue computeGlueImpl(const Mesh& network, const Mesh& bulk, Candidates&& candidates)
{
    if (network.dimGrid() != 1)
        throw GeometryError("glue expects a segment network as lower-dimensional domain");
    if (bulk.dimGrid() != 2)
        throw GeometryError("glue expects a two-dimensional bulk grid");

    Glue glue;
    std::vector<Vec> polygon;
    for (int s = 0; s < network.numElements(); ++s)
    {
        const auto verts = network.element(s);
        const Vec& a = network.vertex(verts[0]);
        const Vec& b = network.vertex(verts[1]);
        const double len = (b - a).norm();
        if (!inPlane(a, len) || !inPlane(b, len))
            continue;

        std::vector<Piece> pieces;
        for (int e : candidates(a, b))
        {
            polygon.clear();
            for (int v : bulk.element(e))
                polygon.push_back(bulk.vertex(v));
            if (auto t = clipSegment(a, b, polygon))
                pieces.push_back({(*t)[0], (*t)[1], e});
        }
        std::sort(pieces.begin(), pieces.end(), [](const Piece& x, const Piece& y) {
            return std::tie(x.t0, x.t1, x.target) < std::tie(y.t0, y.t1, y.target);
        });

        // coincident pieces (segment on a shared facet) become one intersection
        constexpr double mergeTol = 1e-9;
        std::vector<char> used(pieces.size(), 0);
        std::vector<Intersection> local;
        for (std::size_t i = 0; i < pieces.size(); ++i)
        {
            if (used[i])
                continue;
            Intersection is;
            is.domainElement = s;
            is.targetElements.push_back(pieces[i].target);
            for (std::size_t j = i + 1; j < pieces.size(); ++j)
                if (!used[j] && std::abs(pieces[j].t0 - pieces[i].t0) <= mergeTol
                    && std::abs(pieces[j].t1 - pieces[i].t1) <= mergeTol)
                {
                    used[j] = 1;
                    is.targetElements.push_back(pieces[j].target);
                }
            std::sort(is.targetElements.begin(), is.targetElements.end());
            is.corners = {a + pieces[i].t0*(b - a), a + pieces[i].t1*(b - a)};
            is.measure = (pieces[i].t1 - pieces[i].t0)*len;
            local.push_back(std::move(is));
        }
        for (auto& is : local)
            glue.intersections.push_back(std::move(is));
    }
    return glue;
}

} // end anonymous namespace

Glue computeGlue(const Mesh& network, const Mesh& bulk, const BoundingBoxTree& bulkTree)
{
    return computeGlueImpl(network, bulk, [&](const Vec& a, const Vec& b) {
        Aabb box;
        box.expand(a);
        box.expand(b);
        return bulkTree.query(box.inflated(1e-10*std::max((b - a).norm(), 1e-300)));
    });
}

Glue computeGlue(const Mesh& network, const Mesh& bulk)
{
    const BoundingBoxTree tree(bulk);
    return computeGlue(network, bulk, tree);
}

Glue computeGlueBruteForce(const Mesh& network, const Mesh& bulk)
{
    std::vector<int> all(bulk.numElements());
    for (int e = 0; e < bulk.numElements(); ++e)
        all[e] = e;
    return computeGlueImpl(network, bulk, [&](const Vec&, const Vec&) { return all; });
}

CouplingStencils couplingStencilsFromGlue(const Glue& glue, const GridGeometry& network, const GridGeometry& bulk)
{
    if (network.scheme() != Scheme::tpfa)
        throw ParameterError("embedded networks use the tpfa scheme");
    CouplingStencils st;
    st.networkToBulk.resize(network.mesh().numElements());
    st.bulkToNetwork.resize(bulk.mesh().numElements());
    for (const auto& is : glue.intersections)
    {
        const int s = is.domainElement;
        for (int e : is.targetElements)
        {
            for (const auto& scv : bulk.elementScvs(e))
                st.networkToBulk[s].push_back(scv.dofIndex);
            st.bulkToNetwork[e].push_back(network.elementScvs(s)[0].dofIndex);
        }
    }
    for (auto* table : {&st.networkToBulk, &st.bulkToNetwork})
        for (auto& v : *table)
        {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
    return st;
}

} // namespace fervor
