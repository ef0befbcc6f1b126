#pragma once

#include <fervor/couplingmanager.hpp>
#include <fervor/fvgeom.hpp>
#include <fervor/material.hpp>
#include <fervor/mesh.hpp>
#include <fervor/models.hpp>
#include <fervor/solvers.hpp>

#include <array>
#include <map>
#include <memory>
#include <span>
#include <vector>

namespace fervor {

// ---------------------------------------------------------------------------
// bounding box volume hierarchy

struct Aabb
{
    Vec lower = Vec::Constant(std::numeric_limits<double>::infinity());
    Vec upper = Vec::Constant(-std::numeric_limits<double>::infinity());

    void expand(const Vec& p) { lower = lower.cwiseMin(p); upper = upper.cwiseMax(p); }
    void expand(const Aabb& b) { lower = lower.cwiseMin(b.lower); upper = upper.cwiseMax(b.upper); }
    bool empty() const { return (lower.array() > upper.array()).any(); }
    //! closed-interval overlap
    bool overlaps(const Aabb& b) const
    { return !empty() && !b.empty() && (lower.array() <= b.upper.array()).all() && (b.lower.array() <= upper.array()).all(); }
    bool contains(const Aabb& b) const
    { return (lower.array() <= b.lower.array()).all() && (b.upper.array() <= upper.array()).all(); }
    Vec center() const { return 0.5*(lower + upper); }
    Aabb inflated(double delta) const
    { return {(lower.array() - delta).matrix(), (upper.array() + delta).matrix()}; }
};

Aabb elementBoundingBox(const Mesh& mesh, int element);

/*!
 * \brief Axis-aligned bounding box tree over the elements of a mesh.
 *
 * Top-down construction: a node's elements are split at the median of their
 * box centers along the longest axis of the node box (ties broken by axis
 * order x, y, z, then element index). Leaves hold at most four elements.
 */
class BoundingBoxTree
{
public:
    struct Node
    {
        Aabb box;
        int left = -1;
        int right = -1;
        int begin = 0; //!< range into elementOrder() for leaves
        int end = 0;
        bool leaf() const { return left < 0; }
    };

    static constexpr int maxLeafSize = 4;

    explicit BoundingBoxTree(const Mesh& mesh);

    //! sorted indices of all elements whose box overlaps the query box
    std::vector<int> query(const Aabb& box) const;

    int numNodes() const { return static_cast<int>(nodes_.size()); }
    const Node& node(int i) const { return nodes_[i]; }
    std::span<const int> elementOrder() const { return order_; }
    const Aabb& elementBox(int e) const { return boxes_[e]; }

private:
    int build(int begin, int end);

    std::vector<Aabb> boxes_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// glue

struct Intersection
{
    std::vector<Vec> corners; //!< one point or two segment end points
    double measure = 0.0;
    int domainElement = -1;   //!< element of the lower-dimensional domain
    std::vector<int> targetElements; //!< sorted bulk elements sharing this intersection

    Vec center() const;
    int numTargetNeighbors() const { return static_cast<int>(targetElements.size()); }
};

struct Glue
{
    std::vector<Intersection> intersections;
    std::size_t size() const { return intersections.size(); }
    bool empty() const { return intersections.empty(); }
};

/*!
 * \brief Intersect the segments of a network mesh with the polygons of a bulk mesh.
 *
 * Segments are clipped against each candidate (convex) polygon; candidates
 * come from the bounding box tree. Pieces of a segment that coincide for
 * several polygons (segment on a shared facet) form one intersection with all
 * of them as targets. Intersections are ordered by segment, then position
 * along the segment.
 */
Glue computeGlue(const Mesh& network, const Mesh& bulk, const BoundingBoxTree& bulkTree);
Glue computeGlue(const Mesh& network, const Mesh& bulk);
//! same result without the tree: every segment is tested against every polygon
Glue computeGlueBruteForce(const Mesh& network, const Mesh& bulk);

//! parameter interval [t0, t1] of segment a-b inside a convex polygon; nullopt if empty
std::optional<std::array<double, 2>> clipSegment(const Vec& a, const Vec& b, std::span<const Vec> polygon);

struct CouplingStencils
{
    //! per network element: sorted bulk dofs
    std::vector<std::vector<int>> networkToBulk;
    //! per bulk element: sorted network dofs
    std::vector<std::vector<int>> bulkToNetwork;
};

CouplingStencils couplingStencilsFromGlue(const Glue& glue, const GridGeometry& network, const GridGeometry& bulk);

// ---------------------------------------------------------------------------
// coupling managers

//! coupling manager of independent domains
class UncoupledManager : public CouplingManager
{
public:
    explicit UncoupledManager(int numDomains) : numDomains_(numDomains) {}
    int numDomains() const override { return numDomains_; }
    std::span<const int> couplingStencil(int, int, int) const override { return {}; }

private:
    int numDomains_;
};

/*!
 * \brief Two domains exchanging q = c (p_0 - p_1) between one element of each.
 *
 * Residual of domain 0 gains c V (p_0 - p_1), domain 1 the negative.
 */
class PointExchangeManager : public CouplingManager
{
public:
    PointExchangeManager(int element0, int element1, double coefficient, double volume);

    int numDomains() const override { return 2; }
    std::span<const int> couplingStencil(int i, int element, int j) const override;
    void addCouplingResidual(int domain, int element, const Vector& u, std::vector<EqVector>& residual,
                             const TimeContext& tc) const override;

    double exchange() const;

private:
    std::array<int, 2> elements_;
    std::array<std::vector<int>, 2> stencils_;
    double coefficient_;
    double volume_;
};

enum class FractureMode { conductive, blocking };

/*!
 * \brief Conforming facet coupling of a TPFA bulk domain (0) with a TPFA fracture network (1).
 *
 * Fracture element f coincides with bulk facet facetOfFracture[f]. The flux
 * across a bulk scvf on such a facet is a two-point flux between the bulk cell
 * and the fracture dof with the bulk half transmissibility in series with an
 * interface transmissibility: A ext (n.K_f.n)/(a/2) for blocking fractures,
 * a penalty of penaltyFactor times the bulk half transmissibility for
 * conductive ones. The fracture receives the sum of these fluxes as source.
 */
class FacetCouplingManager : public CouplingManager
{
public:
    FacetCouplingManager(const GridGeometry& bulk, const SpatialParams& bulkParams,
                         const GridGeometry& fracture, const SpatialParams& fractureParams,
                         const Model& model, std::vector<int> facetOfFracture, std::vector<FractureMode> modes,
                         Vec gravity, double penaltyFactor = 1e4);

    int numDomains() const override { return 2; }
    std::span<const int> couplingStencil(int i, int element, int j) const override;
    void addCouplingResidual(int domain, int element, const Vector& u, std::vector<EqVector>& residual,
                             const TimeContext& tc) const override;
    std::optional<EqVector> couplingFlux(int domain, const SubControlVolumeFace& scvf, const Vector& u,
                                         const TimeContext& tc) const override;

    //! fracture element on the facet of a bulk scvf, -1 if none
    int fractureOfFacet(int facet) const;
    //! interface transmissibility (extruded area times conductance) for a bulk scvf
    double interfaceTransmissibility(const SubControlVolumeFace& scvf) const;
    //! the flux out of the bulk cell into the fracture, given both states
    EqVector interfaceFlux(const SubControlVolumeFace& scvf, const Vector& bulkU, const Vector& fractureU) const;

private:
    const GridGeometry* bulk_;
    const SpatialParams* bulkParams_;
    const GridGeometry* fracture_;
    const SpatialParams* fractureParams_;
    const Model* model_;
    std::vector<int> facetOfFracture_;
    std::vector<FractureMode> modes_;
    Vec gravity_;
    double penaltyFactor_;

    std::map<int, int> fractureOfFacet_;
    std::vector<std::vector<int>> bulkStencil_;     //!< bulk element -> fracture dofs
    std::vector<std::vector<int>> fractureStencil_; //!< fracture element -> bulk dofs
    std::vector<std::vector<int>> fractureScvfs_;   //!< fracture element -> coupled bulk scvfs
};

/*!
 * \brief Embedded coupling of a Richards soil domain (0) with a xylem root network (1).
 *
 * For every (intersection, target element) pair the soil pressure at the
 * intersection midpoint is taken from the target element (cell value for
 * TPFA, basis interpolation for box) and
 * q = -2 pi R krw(soil) K_rad (p_s - p_r) rho_m * length / numTargets
 * is added to the soil (distributed to the vertices with the basis values for
 * box) and subtracted from the root segment. No solute is exchanged.
 */
class EmbeddedCouplingManager : public CouplingManager
{
public:
    EmbeddedCouplingManager(const GridGeometry& soil, const SpatialParams& soilParams, const RichardsModel& soilModel,
                            const GridGeometry& root, const SpatialParams& rootParams, double radialConductivity,
                            Glue glue);

    int numDomains() const override { return 2; }
    std::span<const int> couplingStencil(int i, int element, int j) const override;
    void addCouplingResidual(int domain, int element, const Vector& u, std::vector<EqVector>& residual,
                             const TimeContext& tc) const override;

    const Glue& glue() const { return glue_; }
    //! root segments not fully covered by the glue; their uncovered part exchanges nothing
    const std::vector<int>& segmentsOutsideBulk() const { return outsideSegments_; }
    double droppedLength() const { return droppedLength_; }
    //! exchange of every (intersection, target) pair in mol/s, positive into the soil
    std::vector<double> pairExchanges(const Vector& soilU, const Vector& rootU) const;
    //! total exchange into the soil in mol/s
    double totalExchange(const Vector& soilU, const Vector& rootU) const;
    //! per root segment, exchange into the soil in mol/s
    std::vector<double> segmentExchanges(const Vector& soilU, const Vector& rootU) const;

private:
    struct Pair
    {
        int intersection;
        int target;
        double length;      //!< intersection measure / numTargets
        Vec position;
        std::vector<double> shapeValues; //!< box only
    };

    double pairExchange(const Pair& pair, const Vector& soilU, const Vector& rootU) const;

    const GridGeometry* soil_;
    const SpatialParams* soilParams_;
    const RichardsModel* soilModel_;
    const GridGeometry* root_;
    const SpatialParams* rootParams_;
    double radialConductivity_;
    Glue glue_;
    CouplingStencils stencils_;
    std::vector<Pair> pairs_;
    std::vector<std::vector<int>> pairsOfSoilElement_;
    std::vector<std::vector<int>> pairsOfRootElement_;
    std::vector<int> outsideSegments_;
    double droppedLength_ = 0.0;
};

// ---------------------------------------------------------------------------
// block system

struct BlockSystem
{
    std::vector<std::vector<SparseMatrix>> blocks; //!< blocks[i][j]: A_i on the diagonal, C_ij off it
    std::vector<Vector> residuals;

    int numDomains() const { return static_cast<int>(residuals.size()); }
    SparseMatrix monolithicMatrix() const;
    Vector monolithicResidual() const;
};

/*!
 * \brief Assembles the coupled block Jacobian of several domains.
 *
 * Owns the block solution vectors the coupling manager reads. A_i come from
 * each domain's element-wise assembly with coupling terms at the current
 * state of the other domains; C_ij by numeric differentiation of domain-i
 * element residuals w.r.t. the domain-j dofs of the coupling stencil.
 */
class MultiDomainAssembler
{
public:
    MultiDomainAssembler(std::vector<Assembler*> assemblers, CouplingManager& manager);

    int numDomains() const { return static_cast<int>(assemblers_.size()); }
    int totalSize() const { return offsets_.back(); }
    int offset(int domain) const { return offsets_[domain]; }
    const Assembler& assembler(int domain) const { return *assemblers_[domain]; }
    CouplingManager& couplingManager() const { return *manager_; }

    std::vector<Vector> split(const Vector& u) const;
    Vector join(const std::vector<Vector>& blocks) const;

    //! make `u` the current state seen by the coupling manager
    void setState(const Vector& u);
    const std::vector<Vector>& state() const { return blocks_; }

    Vector residual(const Vector& u, const std::vector<Vector>& oldBlocks, const TimeContext& tc);
    BlockSystem assemble(const Vector& u, const std::vector<Vector>& oldBlocks, const TimeContext& tc);

private:
    std::vector<Assembler*> assemblers_;
    CouplingManager* manager_;
    std::vector<int> offsets_;
    std::vector<Vector> blocks_;
};

//! monolithic nonlinear system over the concatenated block unknowns
class MultiDomainSystem : public NonlinearSystem
{
public:
    MultiDomainSystem(MultiDomainAssembler& assembler, const Vector& uOld, TimeContext tc);

    int size() const override { return assembler_->totalSize(); }
    Vector residual(const Vector& u) override;
    void linearize(const Vector& u, SparseMatrix& jac, Vector& res) override;

private:
    MultiDomainAssembler* assembler_;
    std::vector<Vector> oldBlocks_;
    TimeContext tc_;
};

//! transient run of the coupled system, u holds the concatenated blocks
void runTransientCoupled(MultiDomainAssembler& assembler, Vector& u, const TimeLoopOptions& timeOptions,
                         const NewtonOptions& newtonOptions = {}, const TimeLoop::StepCallback& callback = {},
                         std::ostream* log = nullptr);

} // namespace fervor
