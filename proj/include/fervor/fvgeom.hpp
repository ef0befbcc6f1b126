#pragma once

#include <fervor/common.hpp>
#include <fervor/mesh.hpp>

#include <memory>
#include <span>
#include <vector>

namespace fervor {

enum class Scheme { tpfa, box };

const char* toString(Scheme scheme);

struct SubControlVolume
{
    int index;
    int dofIndex;
    int elementIndex;
    //! index within the element (local vertex for box, always 0 for tpfa)
    int localIndex;
    double volume;
    Vec center;
    //! location of the degree of freedom: cell center (tpfa) or vertex (box)
    Vec dofPosition;
};

struct SubControlVolumeFace
{
    int index;
    int elementIndex;
    double area;
    Vec center;
    Vec unitOuterNormal;
    int insideScv;
    //! empty on the boundary; more than one entry at network branching points
    std::vector<int> outsideScvs;
    bool boundary;
    int boundaryMarker;
    //! mesh facet this face lies on, -1 for box faces inside an element
    int facetIndex;

    //! box only: basis values/gradients of the element's vertices at the face center
    std::vector<double> shapeValues;
    std::vector<Vec> shapeGradients;
};

class LocalView;

/*!
 * \brief Scheme-specific finite volume geometry built around a mesh.
 *
 * All sub-control-volumes and faces are computed once and cached. TPFA uses
 * the elements as control volumes (one scv per element, dof = element).
 * The box scheme builds control volumes around the vertices by joining edge
 * midpoints and element centers (one scv per element corner, dof = vertex).
 */
class GridGeometry
{
public:
    GridGeometry(std::shared_ptr<const Mesh> mesh, Scheme scheme);

    Scheme scheme() const { return scheme_; }
    const Mesh& mesh() const { return *mesh_; }
    std::shared_ptr<const Mesh> meshPtr() const { return mesh_; }

    int numDofs() const { return numDofs_; }
    int numScv() const { return static_cast<int>(scvs_.size()); }
    int numScvf() const { return static_cast<int>(scvfs_.size()); }

    const SubControlVolume& scv(int i) const { return scvs_[i]; }
    const SubControlVolumeFace& scvf(int i) const { return scvfs_[i]; }

    std::span<const SubControlVolume> elementScvs(int e) const
    { return {scvs_.data() + scvOffset_[e], scvs_.data() + scvOffset_[e + 1]}; }
    std::span<const SubControlVolumeFace> elementScvfs(int e) const
    { return {scvfs_.data() + scvfOffset_[e], scvfs_.data() + scvfOffset_[e + 1]}; }

    //! dofs whose values enter the residual of element e
    std::span<const int> elementStencil(int e) const { return stencils_[e]; }

    const Vec& dofPosition(int dof) const { return dofPositions_[dof]; }

    LocalView localView() const;

private:
    void buildTpfa();
    void buildBox();

    std::shared_ptr<const Mesh> mesh_;
    Scheme scheme_;
    int numDofs_ = 0;
    std::vector<SubControlVolume> scvs_;
    std::vector<SubControlVolumeFace> scvfs_;
    std::vector<int> scvOffset_;
    std::vector<int> scvfOffset_;
    std::vector<std::vector<int>> stencils_;
    std::vector<Vec> dofPositions_;
};

GridGeometry buildTpfaGeometry(const Mesh& mesh);
GridGeometry buildBoxGeometry(const Mesh& mesh);
GridGeometry buildGridGeometry(std::shared_ptr<const Mesh> mesh, Scheme scheme);

//! Element-local view on a grid geometry. Binding is a lookup since geometry is cached.
class LocalView
{
public:
    explicit LocalView(const GridGeometry& gg) : gg_(&gg) {}

    void bind(int element);
    int element() const { return element_; }
    const GridGeometry& gridGeometry() const { return *gg_; }

    std::span<const SubControlVolume> scvs() const { return gg_->elementScvs(element_); }
    std::span<const SubControlVolumeFace> scvfs() const { return gg_->elementScvfs(element_); }
    int numScv() const { return static_cast<int>(scvs().size()); }
    const SubControlVolume& scv(int globalIndex) const { return gg_->scv(globalIndex); }

private:
    const GridGeometry* gg_;
    int element_ = -1;
};

//! Sum of field[dof(scv)] * weight * |scv| over all elements
double integrateDofField(const GridGeometry& gg, std::span<const double> field, double weight);

/*!
 * \brief Bilinear/linear basis of a triangle or quadrilateral.
 *
 * Values and global gradients of the corner basis functions at a global point.
 */
struct ElementBasis
{
    std::vector<double> values;
    std::vector<Vec> gradients;
};

ElementBasis evaluateBasis(const Mesh& mesh, int element, const Vec& globalPos);

} // namespace fervor
