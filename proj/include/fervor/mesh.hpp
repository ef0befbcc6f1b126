#pragma once

#include <fervor/common.hpp>

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fervor {

/*!
 * \brief A codim-1 entity of a mesh: an edge of a 2D grid or a vertex of a 1D grid.
 *
 * For 2D grids a facet has one (boundary) or two (interior) adjacent elements.
 * For 1D networks a facet is a network vertex and branching points may have
 * more than two adjacent segments. Adjacent elements are sorted ascending,
 * so the inside element is always the lowest element index.
 */
struct Facet
{
    std::vector<int> vertices;
    std::vector<int> elements;
    int marker = 0;

    bool boundary() const { return elements.size() == 1; }
    int inside() const { return elements.front(); }
    std::optional<int> outside() const
    {
        if (elements.size() == 2)
            return elements[1];
        return std::nullopt;
    }
};

/*!
 * \brief Unstructured mesh of polygons (2D) or line segments (1D).
 *
 * Indices are dense and zero-based in creation order. The mesh is immutable
 * once constructed. 2D elements are reoriented counter-clockwise so all
 * element measures are positive; local facet k of a polygon joins local
 * vertices k and k+1, local facet k of a segment is its vertex k.
 */
class Mesh
{
public:
    //! Boundary marker callback: facet center and facet vertex indices -> tag
    using BoundaryMarkerFunction = std::function<int(const Vec&, std::span<const int>)>;

    Mesh() = default;
    Mesh(int dimWorld, int dimGrid,
         std::vector<Vec> vertices,
         std::vector<std::vector<int>> elements,
         std::vector<int> elementMarkers = {},
         const BoundaryMarkerFunction& boundaryMarker = {});

    int dimWorld() const { return dimWorld_; }
    int dimGrid() const { return dimGrid_; }

    int numVertices() const { return static_cast<int>(vertices_.size()); }
    int numElements() const { return static_cast<int>(elements_.size()); }
    int numFacets() const { return static_cast<int>(facets_.size()); }

    const Vec& vertex(int v) const { return vertices_[v]; }
    const std::vector<Vec>& vertices() const { return vertices_; }
    std::span<const int> element(int e) const { return elements_[e]; }
    int elementMarker(int e) const { return elementMarkers_[e]; }
    const Facet& facet(int f) const { return facets_[f]; }
    std::span<const int> elementFacets(int e) const { return elementFacets_[e]; }
    std::span<const int> vertexElements(int v) const { return vertexElements_[v]; }

    //! area of a polygon or length of a segment
    double elementMeasure(int e) const { return measures_[e]; }
    //! vertex average of the element corners
    Vec elementCenter(int e) const;
    Vec facetCenter(int f) const;
    double facetMeasure(int f) const;

    //! look up the facet spanned by the given vertices (any order)
    std::optional<int> findFacet(std::span<const int> vertices) const;

private:
    int dimWorld_ = 2;
    int dimGrid_ = 2;
    std::vector<Vec> vertices_;
    std::vector<std::vector<int>> elements_;
    std::vector<int> elementMarkers_;
    std::vector<Facet> facets_;
    std::vector<std::vector<int>> elementFacets_;
    std::vector<std::vector<int>> vertexElements_;
    std::vector<double> measures_;
};

/*!
 * \brief A 1D segment network (fractures, root systems) embedded in 2D or 3D.
 *
 * Radii and apertures are per segment and strictly positive.
 */
struct SegmentNetwork
{
    Mesh mesh;
    std::vector<double> radius;
    std::vector<double> aperture;

    int numSegments() const { return mesh.numElements(); }
    double length(int s) const { return mesh.elementMeasure(s); }
    //! number of segments touching a network vertex
    int degree(int v) const { return static_cast<int>(mesh.vertexElements(v).size()); }
    double totalLength() const;
};

//! Structured quadrilateral grid with boundary markers 0=left, 1=right, 2=bottom, 3=top.
Mesh buildStructuredQuad(int nx, int ny, const Vec& lower, const Vec& upper);

//! Same vertex layout as buildStructuredQuad, each quad split into two triangles.
Mesh buildStructuredTriangles(int nx, int ny, const Vec& lower, const Vec& upper);

/*!
 * \brief Randomly displace interior vertices by up to `amplitude` times the local
 *        spacing in each coordinate direction. Boundary vertices stay in place.
 */
Mesh perturbInteriorVertices(const Mesh& mesh, double amplitude, unsigned seed);

SegmentNetwork buildSegmentNetwork(std::vector<Vec> points,
                                   const std::vector<std::array<int, 2>>& segments,
                                   std::vector<double> radii,
                                   int dimWorld = 3,
                                   std::vector<int> segmentMarkers = {});

//! Result of reading a (possibly mixed-dimensional) Gmsh file.
struct MshData
{
    Mesh bulk;
    //! line elements not lying on the bulk boundary
    std::optional<SegmentNetwork> network;
    //! network vertex -> coinciding bulk vertex (-1 if none)
    std::vector<int> networkToBulkVertex;
    //! network segment -> coinciding bulk facet (-1 if none)
    std::vector<int> networkToBulkFacet;
};

/*!
 * \brief Read the ASCII MSH 2.2 subset: nodes, lines (1), triangles (2), quads (3).
 *
 * The first element tag (physical group) is used as element marker. Line
 * elements lying on bulk boundary facets set that facet's boundary marker,
 * all other line elements form the lower-dimensional network.
 */
MshData readMsh(std::istream& in);
MshData readMsh(const std::string& fileName);

//! Write the same subset; boundary facets with nonzero marker are written as line elements.
void writeMsh(std::ostream& out, const Mesh& bulk, const SegmentNetwork* network = nullptr,
              std::span<const int> networkToBulkVertex = {});

//! Human-readable dump used for golden tests.
std::string dumpMesh(const Mesh& mesh);

} // namespace fervor
