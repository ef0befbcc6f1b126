#include <fervor/multidomain.hpp>

#include <algorithm>
#include <cmath>

namespace fervor {

namespace {

void sortUnique(std::vector<int>& v)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

std::span<const int> stencilOf(const std::vector<std::vector<int>>& table, int element)
{
    if (element < 0 || element >= static_cast<int>(table.size()))
        return {};
    return table[element];
}

} // end anonymous namespace

// ---------------------------------------------------------------------------
// point exchange

PointExchangeManager::PointExchangeManager(int element0, int element1, double coefficient, double volume)
: elements_{element0, element1}, stencils_{std::vector<int>{element1}, std::vector<int>{element0}}
, coefficient_(coefficient), volume_(volume)
{}

std::span<const int> PointExchangeManager::couplingStencil(int i, int element, int j) const
{
    if (i == j || element != elements_[i])
        return {};
    return stencils_[i];
}

double PointExchangeManager::exchange() const
{
    return coefficient_*volume_*(solution(0)[elements_[0]] - solution(1)[elements_[1]]);
}

void PointExchangeManager::addCouplingResidual(int domain, int element, const Vector& u,
                                               std::vector<EqVector>& residual, const TimeContext&) const
{
    if (element != elements_[domain])
        return;
    const double p0 = domain == 0 ? u[elements_[0]] : solution(0)[elements_[0]];
    const double p1 = domain == 1 ? u[elements_[1]] : solution(1)[elements_[1]];
    const double q = coefficient_*volume_*(p0 - p1);
    residual[0][0] += domain == 0 ? q : -q;
}

// ---------------------------------------------------------------------------
// facet coupling

FacetCouplingManager::FacetCouplingManager(const GridGeometry& bulk, const SpatialParams& bulkParams,
                                           const GridGeometry& fracture, const SpatialParams& fractureParams,
                                           const Model& model, std::vector<int> facetOfFracture,
                                           std::vector<FractureMode> modes, Vec gravity, double penaltyFactor)
: bulk_(&bulk), bulkParams_(&bulkParams), fracture_(&fracture), fractureParams_(&fractureParams), model_(&model)
, facetOfFracture_(std::move(facetOfFracture)), modes_(std::move(modes)), gravity_(gravity)
, penaltyFactor_(penaltyFactor)
{
    if (bulk.scheme() != Scheme::tpfa || fracture.scheme() != Scheme::tpfa)
        throw ParameterError("facet coupling is implemented for the tpfa scheme only");
    const int nf = fracture.mesh().numElements();
    if (static_cast<int>(facetOfFracture_.size()) != nf)
        throw ParameterError("facet coupling: one bulk facet per fracture element required");
    if (modes_.empty())
        modes_.assign(nf, FractureMode::conductive);
    if (static_cast<int>(modes_.size()) != nf)
        throw ParameterError("facet coupling: one mode per fracture element required");

    for (int f = 0; f < nf; ++f)
    {
        const int facet = facetOfFracture_[f];
        if (facet < 0 || facet >= bulk.mesh().numFacets())
            throw GeometryError("fracture element " + std::to_string(f) + " does not coincide with a bulk facet");
        if (!fractureOfFacet_.emplace(facet, f).second)
            throw GeometryError("two fracture elements on bulk facet " + std::to_string(facet));
    }

    bulkStencil_.resize(bulk.mesh().numElements());
    fractureStencil_.resize(nf);
    fractureScvfs_.resize(nf);
    for (int i = 0; i < bulk.numScvf(); ++i)
    {
        const auto& scvf = bulk.scvf(i);
        const int f = fractureOfFacet(scvf.facetIndex);
        if (f < 0)
            continue;
        const int fdof = fracture.elementScvs(f)[0].dofIndex;
        const int bdof = bulk.scv(scvf.insideScv).dofIndex;
        bulkStencil_[scvf.elementIndex].push_back(fdof);
        fractureStencil_[f].push_back(bdof);
        fractureScvfs_[f].push_back(i);
    }
    for (auto& v : bulkStencil_)
        sortUnique(v);
    for (auto& v : fractureStencil_)
        sortUnique(v);
}

int FacetCouplingManager::fractureOfFacet(int facet) const
{
    const auto it = fractureOfFacet_.find(facet);
    return it == fractureOfFacet_.end() ? -1 : it->second;
}

std::span<const int> FacetCouplingManager::couplingStencil(int i, int element, int j) const
{
    if (i == j)
        return {};
    return stencilOf(i == 0 ? bulkStencil_ : fractureStencil_, element);
}

double FacetCouplingManager::interfaceTransmissibility(const SubControlVolumeFace& scvf) const
{
    const int f = fractureOfFacet(scvf.facetIndex);
    if (f < 0)
        throw Error("scvf is not on a fracture facet");
    const auto& scv = bulk_->scv(scvf.insideScv);
    const auto& pb = (*bulkParams_)[scv.elementIndex];
    const auto& pf = (*fractureParams_)[f];
    const Vec& n = scvf.unitOuterNormal;
    if (modes_[f] == FractureMode::blocking)
        return scvf.area*pb.extrusion*normalPermeability(pf.permeability, n)/(0.5*pf.extrusion);
    return penaltyFactor_*tpfaGeometricFactor(scvf, scv.center, pb.extrusion)*normalPermeability(pb.permeability, n);
}

EqVector FacetCouplingManager::interfaceFlux(const SubControlVolumeFace& scvf, const Vector& bulkU,
                                             const Vector& fractureU) const
{
    const int f = fractureOfFacet(scvf.facetIndex);
    const int numEq = model_->numEq();
    const auto& scv = bulk_->scv(scvf.insideScv);
    const auto& pb = (*bulkParams_)[scv.elementIndex];
    const auto& pf = (*fractureParams_)[f];
    const auto& fscv = fracture_->elementScvs(f)[0];

    FluxContext ctx;
    ctx.scvf = &scvf;
    ctx.gravity = gravity_;
    ctx.scheme = Scheme::tpfa;
    ctx.extrusion = pb.extrusion;
    ctx.elementParams = &pb;
    ctx.inside = {bulkU.segment(scv.dofIndex*numEq, numEq), &pb, scv.center,
                  tpfaGeometricFactor(scvf, scv.center, pb.extrusion)};
    // the fracture state carries a geometric factor reproducing the interface transmissibility
    const double kn = normalPermeability(pf.permeability, scvf.unitOuterNormal);
    ctx.outside.push_back({fractureU.segment(fscv.dofIndex*numEq, numEq), &pf, fscv.center,
                           interfaceTransmissibility(scvf)/kn});
    return model_->flux(ctx);
}

std::optional<EqVector> FacetCouplingManager::couplingFlux(int domain, const SubControlVolumeFace& scvf,
                                                           const Vector& u, const TimeContext&) const
{
    if (domain != 0 || scvf.boundary || fractureOfFacet(scvf.facetIndex) < 0)
        return std::nullopt;
    return interfaceFlux(scvf, u, solution(1));
}

void FacetCouplingManager::addCouplingResidual(int domain, int element, const Vector& u,
                                               std::vector<EqVector>& residual, const TimeContext&) const
{
    if (domain != 1)
        return;
    // what leaves the bulk cells enters the fracture
    for (int i : fractureScvfs_[element])
        residual[0] -= interfaceFlux(bulk_->scvf(i), solution(0), u);
}

// ---------------------------------------------------------------------------
// embedded root-soil coupling

EmbeddedCouplingManager::EmbeddedCouplingManager(const GridGeometry& soil, const SpatialParams& soilParams,
                                                 const RichardsModel& soilModel, const GridGeometry& root,
                                                 const SpatialParams& rootParams, double radialConductivity,
                                                 Glue glue)
: soil_(&soil), soilParams_(&soilParams), soilModel_(&soilModel), root_(&root), rootParams_(&rootParams)
, radialConductivity_(radialConductivity), glue_(std::move(glue))
{
    stencils_ = couplingStencilsFromGlue(glue_, root, soil);
    pairsOfSoilElement_.resize(soil.mesh().numElements());
    pairsOfRootElement_.resize(root.mesh().numElements());
    for (int i = 0; i < static_cast<int>(glue_.size()); ++i)
    {
        const auto& is = glue_.intersections[i];
        const Vec x = is.center();
        for (int e : is.targetElements)
        {
            Pair pair{i, e, is.measure/is.numTargetNeighbors(), x, {}};
            if (soil.scheme() == Scheme::box)
            {
                // basis values in scv order of the target element
                const auto basis = evaluateBasis(soil.mesh(), e, x);
                const auto verts = soil.mesh().element(e);
                for (const auto& scv : soil.elementScvs(e))
                {
                    const auto it = std::find(verts.begin(), verts.end(), scv.dofIndex);
                    pair.shapeValues.push_back(basis.values[it - verts.begin()]);
                }
            }
            pairsOfSoilElement_[e].push_back(static_cast<int>(pairs_.size()));
            pairsOfRootElement_[is.domainElement].push_back(static_cast<int>(pairs_.size()));
            pairs_.push_back(std::move(pair));
        }
    }

    std::vector<double> covered(root.mesh().numElements(), 0.0);
    for (const auto& is : glue_.intersections)
        covered[is.domainElement] += is.measure;
    for (int s = 0; s < root.mesh().numElements(); ++s)
    {
        const double missing = root.mesh().elementMeasure(s) - covered[s];
        if (missing > 1e-10*root.mesh().elementMeasure(s))
        {
            outsideSegments_.push_back(s);
            droppedLength_ += missing;
        }
    }
}

std::span<const int> EmbeddedCouplingManager::couplingStencil(int i, int element, int j) const
{
    if (i == j)
        return {};
    return stencilOf(i == 0 ? stencils_.bulkToNetwork : stencils_.networkToBulk, element);
}

double EmbeddedCouplingManager::pairExchange(const Pair& pair, const Vector& soilU, const Vector& rootU) const
{
    double ps = 0.0;
    if (soil_->scheme() == Scheme::tpfa)
        ps = soilU[soil_->elementScvs(pair.target)[0].dofIndex*2];
    else
    {
        const auto scvs = soil_->elementScvs(pair.target);
        for (std::size_t k = 0; k < scvs.size(); ++k)
            ps += pair.shapeValues[k]*soilU[scvs[k].dofIndex*2];
    }
    const int s = glue_.intersections[pair.intersection].domainElement;
    const double pr = rootU[root_->elementScvs(s)[0].dofIndex*2];
    const auto& sp = (*soilParams_)[pair.target];
    const double kr = soilModel_->relativePermeability(sp, ps);
    return rootUptake(ps, pr, (*rootParams_)[s].radius, kr, radialConductivity_, soilModel_->fluid().molarDensity)
           *pair.length;
}

void EmbeddedCouplingManager::addCouplingResidual(int domain, int element, const Vector& u,
                                                  std::vector<EqVector>& residual, const TimeContext&) const
{
    if (domain == 0)
    {
        for (int k : pairsOfSoilElement_[element])
        {
            const auto& pair = pairs_[k];
            const double q = pairExchange(pair, u, solution(1));
            if (soil_->scheme() == Scheme::tpfa)
                residual[0][0] -= q;
            else
                for (std::size_t i = 0; i < residual.size(); ++i)
                    residual[i][0] -= q*pair.shapeValues[i];
        }
        return;
    }
    for (int k : pairsOfRootElement_[element])
        residual[0][0] += pairExchange(pairs_[k], solution(0), u);
}

std::vector<double> EmbeddedCouplingManager::pairExchanges(const Vector& soilU, const Vector& rootU) const
{
    std::vector<double> q;
    q.reserve(pairs_.size());
    for (const auto& pair : pairs_)
        q.push_back(pairExchange(pair, soilU, rootU));
    return q;
}

double EmbeddedCouplingManager::totalExchange(const Vector& soilU, const Vector& rootU) const
{
    double sum = 0.0;
    for (double q : pairExchanges(soilU, rootU))
        sum += q;
    return sum;
}

std::vector<double> EmbeddedCouplingManager::segmentExchanges(const Vector& soilU, const Vector& rootU) const
{
    std::vector<double> q(root_->mesh().numElements(), 0.0);
    for (const auto& pair : pairs_)
        q[glue_.intersections[pair.intersection].domainElement] += pairExchange(pair, soilU, rootU);
    return q;
}

} // namespace fervor
