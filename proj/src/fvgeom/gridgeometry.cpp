#include <fervor/fvgeom.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace fervor {

const char* toString(Scheme scheme)
{
    return scheme == Scheme::tpfa ? "tpfa" : "box";
}

namespace {

double polygonArea(std::span<const Vec> corners)
{
    double area = 0.0;
    for (std::size_t k = 0; k < corners.size(); ++k)
    {
        const Vec& a = corners[k];
        const Vec& b = corners[(k + 1) % corners.size()];
        area += a.x()*b.y() - b.x()*a.y();
    }
    return 0.5*area;
}

Vec polygonCentroid(std::span<const Vec> corners)
{
    Vec c = Vec::Zero();
    double area = 0.0;
    for (std::size_t k = 0; k < corners.size(); ++k)
    {
        const Vec& a = corners[k];
        const Vec& b = corners[(k + 1) % corners.size()];
        const double cross = a.x()*b.y() - b.x()*a.y();
        area += cross;
        c += (a + b)*cross;
    }
    return c/(3.0*area);
}

//! unit normal of the 2D edge a->b pointing to the right (outward for CCW polygons)
Vec rightNormal(const Vec& a, const Vec& b)
{
    const Vec t = b - a;
    return Vec(t.y(), -t.x(), 0.0).normalized();
}

} // end anonymous namespace

ElementBasis evaluateBasis(const Mesh& mesh, int element, const Vec& globalPos)
{
    const auto corners = mesh.element(element);
    ElementBasis basis;
    if (mesh.dimGrid() != 2)
        throw GeometryError("basis functions are only available for 2D elements");

    if (corners.size() == 3)
    {
        const Vec& x0 = mesh.vertex(corners[0]);
        Eigen::Matrix2d jac;
        jac.col(0) = (mesh.vertex(corners[1]) - x0).head<2>();
        jac.col(1) = (mesh.vertex(corners[2]) - x0).head<2>();
        const double det = jac.determinant();
        if (!(std::abs(det) > 0.0))
            throw GeometryError("degenerate triangle " + std::to_string(element));
        const Eigen::Matrix2d inv = jac.inverse();
        const Eigen::Vector2d local = inv*(globalPos - x0).head<2>();
        basis.values = {1.0 - local.x() - local.y(), local.x(), local.y()};
        const Eigen::Vector2d g1 = inv.row(0).transpose();
        const Eigen::Vector2d g2 = inv.row(1).transpose();
        basis.gradients = {Vec(-g1.x() - g2.x(), -g1.y() - g2.y(), 0.0),
                           Vec(g1.x(), g1.y(), 0.0),
                           Vec(g2.x(), g2.y(), 0.0)};
        return basis;
    }

    // bilinear quadrilateral on the reference square [0,1]^2, CCW corners
    std::array<Eigen::Vector2d, 4> x;
    for (int i = 0; i < 4; ++i)
        x[i] = mesh.vertex(corners[i]).head<2>();

    const auto refValues = [](double s, double t) {
        return std::array<double, 4>{(1 - s)*(1 - t), s*(1 - t), s*t, (1 - s)*t};
    };
    const auto refGradients = [](double s, double t) {
        return std::array<Eigen::Vector2d, 4>{Eigen::Vector2d(-(1 - t), -(1 - s)),
                                              Eigen::Vector2d(1 - t, -s),
                                              Eigen::Vector2d(t, s),
                                              Eigen::Vector2d(-t, 1 - s)};
    };
    const auto jacobian = [&](double s, double t) {
        Eigen::Matrix2d jac = Eigen::Matrix2d::Zero();
        const auto g = refGradients(s, t);
        for (int i = 0; i < 4; ++i)
            jac += x[i]*g[i].transpose();
        return jac;
    };

    // Newton iteration for the local coordinates
    Eigen::Vector2d local(0.5, 0.5);
    const Eigen::Vector2d target = globalPos.head<2>();
    const double scale = (x[2] - x[0]).norm() + (x[3] - x[1]).norm();
    for (int it = 0; it < 50; ++it)
    {
        const auto v = refValues(local.x(), local.y());
        Eigen::Vector2d mapped = Eigen::Vector2d::Zero();
        for (int i = 0; i < 4; ++i)
            mapped += v[i]*x[i];
        const Eigen::Vector2d defect = mapped - target;
        if (defect.norm() < 1e-15*scale)
            break;
        const Eigen::Matrix2d jac = jacobian(local.x(), local.y());
        if (!(std::abs(jac.determinant()) > 0.0))
            throw GeometryError("degenerate element Jacobian in element " + std::to_string(element));
        local -= jac.lu().solve(defect);
    }

    const Eigen::Matrix2d jac = jacobian(local.x(), local.y());
    if (!(jac.determinant() > 0.0))
        throw GeometryError("degenerate element Jacobian in element " + std::to_string(element));
    const Eigen::Matrix2d jacInvT = jac.inverse().transpose();
    const auto v = refValues(local.x(), local.y());
    const auto g = refGradients(local.x(), local.y());
    basis.values.assign(v.begin(), v.end());
    for (int i = 0; i < 4; ++i)
    {
        const Eigen::Vector2d grad = jacInvT*g[i];
        basis.gradients.emplace_back(grad.x(), grad.y(), 0.0);
    }
    return basis;
}

GridGeometry::GridGeometry(std::shared_ptr<const Mesh> mesh, Scheme scheme)
: mesh_(std::move(mesh))
, scheme_(scheme)
{
    if (!mesh_ || mesh_->numElements() == 0)
        throw GeometryError("grid geometry needs a nonempty mesh");

    scvOffset_.push_back(0);
    scvfOffset_.push_back(0);
    if (scheme_ == Scheme::tpfa)
        buildTpfa();
    else
        buildBox();
}

void GridGeometry::buildTpfa()
{
    const Mesh& mesh = *mesh_;
    numDofs_ = mesh.numElements();
    dofPositions_.resize(numDofs_);
    stencils_.resize(numDofs_);

    for (int e = 0; e < mesh.numElements(); ++e)
    {
        const Vec center = mesh.dimGrid() == 2 ? polygonCentroid([&] {
            std::vector<Vec> c;
            for (int v : mesh.element(e))
                c.push_back(mesh.vertex(v));
            return c;
        }()) : mesh.elementCenter(e);
        dofPositions_[e] = center;
        scvs_.push_back(SubControlVolume{e, e, e, 0, mesh.elementMeasure(e), center, center});
        scvOffset_.push_back(static_cast<int>(scvs_.size()));
    }

    for (int e = 0; e < mesh.numElements(); ++e)
    {
        const auto corners = mesh.element(e);
        const auto facets = mesh.elementFacets(e);
        auto& stencil = stencils_[e];
        stencil.push_back(e);
        for (std::size_t k = 0; k < facets.size(); ++k)
        {
            const int f = facets[k];
            const Facet& facet = mesh.facet(f);

            SubControlVolumeFace scvf;
            scvf.index = numScvf();
            scvf.elementIndex = e;
            scvf.center = mesh.facetCenter(f);
            scvf.area = mesh.facetMeasure(f);
            if (mesh.dimGrid() == 2)
                scvf.unitOuterNormal = rightNormal(mesh.vertex(corners[k]), mesh.vertex(corners[(k + 1) % corners.size()]));
            else
                scvf.unitOuterNormal = (mesh.vertex(corners[k]) - mesh.vertex(corners[1 - k])).normalized();
            scvf.insideScv = e;
            for (int n : facet.elements)
                if (n != e)
                {
                    scvf.outsideScvs.push_back(n);
                    stencil.push_back(n);
                }
            scvf.boundary = facet.boundary();
            scvf.boundaryMarker = facet.boundary() ? facet.marker : -1;
            scvf.facetIndex = f;
            scvfs_.push_back(std::move(scvf));
        }
        std::sort(stencil.begin(), stencil.end());
        stencil.erase(std::unique(stencil.begin(), stencil.end()), stencil.end());
        scvfOffset_.push_back(numScvf());
    }
}

void GridGeometry::buildBox()
{
    const Mesh& mesh = *mesh_;
    if (mesh.dimGrid() != 2)
        throw GeometryError("the box scheme is only implemented for 2D triangle/quadrilateral grids");

    numDofs_ = mesh.numVertices();
    dofPositions_ = mesh.vertices();
    stencils_.resize(mesh.numElements());

    for (int e = 0; e < mesh.numElements(); ++e)
    {
        const auto corners = mesh.element(e);
        const auto facets = mesh.elementFacets(e);
        const int n = static_cast<int>(corners.size());
        const int scvBegin = numScv();
        stencils_[e].assign(corners.begin(), corners.end());

        std::vector<Vec> x(n), mid(n);
        for (int k = 0; k < n; ++k)
            x[k] = mesh.vertex(corners[k]);
        for (int k = 0; k < n; ++k)
            mid[k] = 0.5*(x[k] + x[(k + 1) % n]);
        const Vec center = mesh.elementCenter(e);

        for (int k = 0; k < n; ++k)
        {
            const std::array<Vec, 4> poly{x[k], mid[k], center, mid[(k + n - 1) % n]};
            const double volume = polygonArea(poly);
            if (!(volume > 0.0))
                throw GeometryError("non-convex element " + std::to_string(e) + " yields empty box sub-control-volume");
            scvs_.push_back(SubControlVolume{scvBegin + k, corners[k], e, k, volume, polygonCentroid(poly), x[k]});
        }
        scvOffset_.push_back(numScv());

        const auto addFace = [&](const Vec& a, const Vec& b, const Vec& normal, int inside, std::vector<int> outside,
                                 bool boundary, int marker, int facetIdx) {
            SubControlVolumeFace scvf;
            scvf.index = numScvf();
            scvf.elementIndex = e;
            scvf.area = (b - a).norm();
            scvf.center = 0.5*(a + b);
            scvf.unitOuterNormal = normal;
            scvf.insideScv = inside;
            scvf.outsideScvs = std::move(outside);
            scvf.boundary = boundary;
            scvf.boundaryMarker = marker;
            scvf.facetIndex = facetIdx;
            auto basis = evaluateBasis(mesh, e, scvf.center);
            scvf.shapeValues = std::move(basis.values);
            scvf.shapeGradients = std::move(basis.gradients);
            scvfs_.push_back(std::move(scvf));
        };

        // interior faces: one per edge, from the edge midpoint to the element center,
        // separating the scvs of the edge's two corners
        for (int k = 0; k < n; ++k)
        {
            Vec normal = rightNormal(mid[k], center);
            if (normal.dot(x[(k + 1) % n] - x[k]) < 0.0)
                normal = -normal;
            addFace(mid[k], center, normal, scvBegin + k, {scvBegin + (k + 1) % n}, false, -1, -1);
        }

        // boundary faces: each boundary edge split at its midpoint
        for (int k = 0; k < n; ++k)
        {
            const Facet& facet = mesh.facet(facets[k]);
            if (!facet.boundary())
                continue;
            const Vec normal = rightNormal(x[k], x[(k + 1) % n]);
            addFace(x[k], mid[k], normal, scvBegin + k, {}, true, facet.marker, facets[k]);
            addFace(mid[k], x[(k + 1) % n], normal, scvBegin + (k + 1) % n, {}, true, facet.marker, facets[k]);
        }
        scvfOffset_.push_back(numScvf());
    }
}

LocalView GridGeometry::localView() const
{
    return LocalView(*this);
}

GridGeometry buildGridGeometry(std::shared_ptr<const Mesh> mesh, Scheme scheme)
{
    return GridGeometry(std::move(mesh), scheme);
}

GridGeometry buildTpfaGeometry(const Mesh& mesh)
{
    return GridGeometry(std::make_shared<const Mesh>(mesh), Scheme::tpfa);
}

GridGeometry buildBoxGeometry(const Mesh& mesh)
{
    return GridGeometry(std::make_shared<const Mesh>(mesh), Scheme::box);
}

void LocalView::bind(int element)
{
    if (element < 0 || element >= gg_->mesh().numElements())
        throw GeometryError("cannot bind local view to element " + std::to_string(element));
    element_ = element;
}

double integrateDofField(const GridGeometry& gg, std::span<const double> field, double weight)
{
    if (static_cast<int>(field.size()) != gg.numDofs())
        throw Error("field length " + std::to_string(field.size()) + " does not match dof count "
                    + std::to_string(gg.numDofs()));

    double total = 0.0;
    auto fvGeometry = gg.localView();
    for (int e = 0; e < gg.mesh().numElements(); ++e)
    {
        fvGeometry.bind(e);
        for (const auto& scv : fvGeometry.scvs())
            total += field[scv.dofIndex]*weight*scv.volume;
    }
    return total;
}

} // namespace fervor
