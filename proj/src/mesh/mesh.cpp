#include <fervor/mesh.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace fervor {

namespace {

double signedArea(const std::vector<Vec>& vertices, std::span<const int> corners)
{
    double area = 0.0;
    const auto n = corners.size();
    for (std::size_t k = 0; k < n; ++k)
    {
        const Vec& a = vertices[corners[k]];
        const Vec& b = vertices[corners[(k + 1) % n]];
        area += a.x()*b.y() - b.x()*a.y();
    }
    return 0.5*area;
}

std::vector<int> sortedKey(std::span<const int> vertices)
{
    std::vector<int> key(vertices.begin(), vertices.end());
    std::sort(key.begin(), key.end());
    return key;
}

} // end anonymous namespace

Mesh::Mesh(int dimWorld, int dimGrid,
           std::vector<Vec> vertices,
           std::vector<std::vector<int>> elements,
           std::vector<int> elementMarkers,
           const BoundaryMarkerFunction& boundaryMarker)
: dimWorld_(dimWorld)
, dimGrid_(dimGrid)
, vertices_(std::move(vertices))
, elements_(std::move(elements))
, elementMarkers_(std::move(elementMarkers))
{
    if (dimGrid_ != 1 && dimGrid_ != 2)
        throw GeometryError("grid dimension must be 1 or 2");
    if (dimWorld_ != 2 && dimWorld_ != 3)
        throw GeometryError("world dimension must be 2 or 3");
    if (dimGrid_ == 2 && dimWorld_ != 2)
        throw GeometryError("2D grids must live in a 2D world");

    if (elementMarkers_.empty())
        elementMarkers_.assign(elements_.size(), 0);
    if (elementMarkers_.size() != elements_.size())
        throw GeometryError("element marker count does not match element count");

    const int nv = numVertices();
    measures_.resize(elements_.size());
    for (std::size_t e = 0; e < elements_.size(); ++e)
    {
        auto& corners = elements_[e];
        for (int v : corners)
            if (v < 0 || v >= nv)
                throw GeometryError("element " + std::to_string(e) + " references missing vertex " + std::to_string(v));

        if (dimGrid_ == 1)
        {
            if (corners.size() != 2)
                throw GeometryError("segment " + std::to_string(e) + " needs 2 vertices");
            measures_[e] = (vertices_[corners[1]] - vertices_[corners[0]]).norm();
        }
        else
        {
            if (corners.size() != 3 && corners.size() != 4)
                throw GeometryError("element " + std::to_string(e) + ": only triangles and quadrilaterals are supported");
            double area = signedArea(vertices_, corners);
            if (area < 0.0)
            {
                std::reverse(corners.begin(), corners.end());
                area = -area;
            }
            measures_[e] = area;
        }

        if (!(measures_[e] > 0.0))
            throw GeometryError("element " + std::to_string(e) + " has zero measure");
    }

    // enumerate facets in element / local facet order
    std::map<std::vector<int>, int> facetIndex;
    elementFacets_.resize(elements_.size());
    for (int e = 0; e < numElements(); ++e)
    {
        const auto& corners = elements_[e];
        const int numLocalFacets = dimGrid_ == 1 ? 2 : static_cast<int>(corners.size());
        for (int k = 0; k < numLocalFacets; ++k)
        {
            std::vector<int> fv;
            if (dimGrid_ == 1)
                fv = {corners[k]};
            else
                fv = {corners[k], corners[(k + 1) % corners.size()]};

            auto [it, inserted] = facetIndex.try_emplace(sortedKey(fv), numFacets());
            if (inserted)
                facets_.push_back(Facet{fv, {e}, 0});
            else
                facets_[it->second].elements.push_back(e);
            elementFacets_[e].push_back(it->second);
        }
    }

    for (int f = 0; f < numFacets(); ++f)
    {
        auto& facet = facets_[f];
        std::sort(facet.elements.begin(), facet.elements.end());
        if (dimGrid_ == 2 && facet.elements.size() > 2)
            throw GeometryError("non-manifold edge shared by more than two elements");
        if (std::adjacent_find(facet.elements.begin(), facet.elements.end()) != facet.elements.end())
            throw GeometryError("element with repeated facet");
        if (facet.boundary() && boundaryMarker)
            facet.marker = boundaryMarker(facetCenter(f), facet.vertices);
    }

    vertexElements_.resize(vertices_.size());
    for (int e = 0; e < numElements(); ++e)
        for (int v : elements_[e])
            vertexElements_[v].push_back(e);
}

Vec Mesh::elementCenter(int e) const
{
    Vec c = Vec::Zero();
    for (int v : elements_[e])
        c += vertices_[v];
    return c/static_cast<double>(elements_[e].size());
}

Vec Mesh::facetCenter(int f) const
{
    Vec c = Vec::Zero();
    for (int v : facets_[f].vertices)
        c += vertices_[v];
    return c/static_cast<double>(facets_[f].vertices.size());
}

double Mesh::facetMeasure(int f) const
{
    const auto& fv = facets_[f].vertices;
    if (fv.size() == 1)
        return 1.0;
    return (vertices_[fv[1]] - vertices_[fv[0]]).norm();
}

std::optional<int> Mesh::findFacet(std::span<const int> vertices) const
{
    if (vertices.empty())
        return std::nullopt;
    const auto key = sortedKey(vertices);
    for (int e : vertexElements_[key.front()])
        for (int f : elementFacets_[e])
            if (sortedKey(facets_[f].vertices) == key)
                return f;
    return std::nullopt;
}

double SegmentNetwork::totalLength() const
{
    double length = 0.0;
    for (int s = 0; s < numSegments(); ++s)
        length += mesh.elementMeasure(s);
    return length;
}

namespace {

void checkStructuredInput(int nx, int ny, const Vec& lower, const Vec& upper)
{
    if (nx < 1 || ny < 1)
        throw GeometryError("structured grid needs at least one cell per direction");
    if (!(upper.x() > lower.x()) || !(upper.y() > lower.y()))
        throw GeometryError("structured grid has degenerate extent");
}

std::vector<Vec> structuredVertices(int nx, int ny, const Vec& lower, const Vec& upper)
{
    std::vector<Vec> vertices;
    vertices.reserve((nx + 1)*(ny + 1));
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
        {
            // pin the last row/column to the exact upper corner
            const double x = i == nx ? upper.x() : lower.x() + (upper.x() - lower.x())*i/nx;
            const double y = j == ny ? upper.y() : lower.y() + (upper.y() - lower.y())*j/ny;
            vertices.emplace_back(x, y, 0.0);
        }
    return vertices;
}

Mesh::BoundaryMarkerFunction boxSideMarker(const Vec& lower, const Vec& upper)
{
    const double eps = 1e-10*(upper - lower).norm();
    return [=](const Vec& x, std::span<const int>) {
        if (x.x() < lower.x() + eps) return 0;
        if (x.x() > upper.x() - eps) return 1;
        if (x.y() < lower.y() + eps) return 2;
        return 3;
    };
}

} // end anonymous namespace

Mesh buildStructuredQuad(int nx, int ny, const Vec& lower, const Vec& upper)
{
    checkStructuredInput(nx, ny, lower, upper);
    std::vector<std::vector<int>> elements;
    elements.reserve(nx*ny);
    const auto vid = [nx](int i, int j) { return j*(nx + 1) + i; };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            elements.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});

    return Mesh(2, 2, structuredVertices(nx, ny, lower, upper), std::move(elements), {},
                boxSideMarker(lower, upper));
}

Mesh buildStructuredTriangles(int nx, int ny, const Vec& lower, const Vec& upper)
{
    checkStructuredInput(nx, ny, lower, upper);
    std::vector<std::vector<int>> elements;
    elements.reserve(2*nx*ny);
    const auto vid = [nx](int i, int j) { return j*(nx + 1) + i; };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
        {
            elements.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
            elements.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
        }

    return Mesh(2, 2, structuredVertices(nx, ny, lower, upper), std::move(elements), {},
                boxSideMarker(lower, upper));
}

Mesh perturbInteriorVertices(const Mesh& mesh, double amplitude, unsigned seed)
{
    std::vector<bool> onBoundary(mesh.numVertices(), false);
    for (int f = 0; f < mesh.numFacets(); ++f)
        if (mesh.facet(f).boundary())
            for (int v : mesh.facet(f).vertices)
                onBoundary[v] = true;

    // local spacing: shortest incident facet
    std::vector<double> spacing(mesh.numVertices(), std::numeric_limits<double>::max());
    for (int f = 0; f < mesh.numFacets(); ++f)
    {
        const double h = mesh.facetMeasure(f);
        for (int v : mesh.facet(f).vertices)
            spacing[v] = std::min(spacing[v], h);
    }

    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<Vec> vertices = mesh.vertices();
    for (int v = 0; v < mesh.numVertices(); ++v)
    {
        const double dx = dist(gen), dy = dist(gen);
        if (onBoundary[v])
            continue;
        vertices[v].x() += amplitude*spacing[v]*dx;
        vertices[v].y() += amplitude*spacing[v]*dy;
    }

    std::vector<std::vector<int>> elements;
    std::vector<int> markers;
    for (int e = 0; e < mesh.numElements(); ++e)
    {
        const auto el = mesh.element(e);
        elements.emplace_back(el.begin(), el.end());
        markers.push_back(mesh.elementMarker(e));
    }

    // boundary facets keep their markers since boundary vertices do not move
    std::map<std::vector<int>, int> boundaryMarkers;
    for (int f = 0; f < mesh.numFacets(); ++f)
        if (mesh.facet(f).boundary())
            boundaryMarkers[sortedKey(mesh.facet(f).vertices)] = mesh.facet(f).marker;

    return Mesh(mesh.dimWorld(), mesh.dimGrid(), std::move(vertices), std::move(elements), std::move(markers),
                [&](const Vec&, std::span<const int> fv) { return boundaryMarkers.at(sortedKey(fv)); });
}

SegmentNetwork buildSegmentNetwork(std::vector<Vec> points,
                                   const std::vector<std::array<int, 2>>& segments,
                                   std::vector<double> radii,
                                   int dimWorld,
                                   std::vector<int> segmentMarkers)
{
    if (radii.size() != segments.size())
        throw GeometryError("one radius per segment required");
    for (double r : radii)
        if (!(r > 0.0))
            throw GeometryError("segment radius must be positive");

    std::vector<std::vector<int>> elements;
    elements.reserve(segments.size());
    for (std::size_t s = 0; s < segments.size(); ++s)
    {
        const auto [a, b] = segments[s];
        if (a < 0 || b < 0 || a >= static_cast<int>(points.size()) || b >= static_cast<int>(points.size()))
            throw GeometryError("segment " + std::to_string(s) + " references missing point");
        if ((points[a] - points[b]).norm() == 0.0)
            throw GeometryError("segment " + std::to_string(s) + " has zero length");
        elements.push_back({a, b});
    }

    SegmentNetwork network;
    network.mesh = Mesh(dimWorld, 1, std::move(points), std::move(elements), std::move(segmentMarkers));
    network.aperture.assign(segments.size(), 1.0);
    network.radius = std::move(radii);
    return network;
}

std::string dumpMesh(const Mesh& mesh)
{
    std::ostringstream out;
    out.precision(17);
    out << "mesh dimGrid=" << mesh.dimGrid() << " dimWorld=" << mesh.dimWorld() << "\n";
    out << "vertices " << mesh.numVertices() << "\n";
    for (int v = 0; v < mesh.numVertices(); ++v)
    {
        const auto& x = mesh.vertex(v);
        out << v << " " << x.x() << " " << x.y() << " " << x.z() << "\n";
    }
    out << "elements " << mesh.numElements() << "\n";
    for (int e = 0; e < mesh.numElements(); ++e)
    {
        out << e << " marker=" << mesh.elementMarker(e) << " :";
        for (int v : mesh.element(e))
            out << " " << v;
        out << "\n";
    }
    out << "facets " << mesh.numFacets() << "\n";
    for (int f = 0; f < mesh.numFacets(); ++f)
    {
        const auto& facet = mesh.facet(f);
        out << f << " :";
        for (int v : facet.vertices)
            out << " " << v;
        out << " elements";
        for (int e : facet.elements)
            out << " " << e;
        if (facet.boundary())
            out << " boundary marker=" << facet.marker;
        out << "\n";
    }
    return out.str();
}

} // namespace fervor
