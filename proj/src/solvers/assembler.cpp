#include <fervor/solvers.hpp>
#include <fervor/couplingmanager.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace fervor {

double DifferencingOptions::epsilon(double u) const
{
    return relativeEpsilon*std::max(std::abs(u), 1.0);
}

Assembler::Assembler(const GridGeometry& gg, const Model& model, const ProblemDefinition& problem,
                     const SpatialParams& params, Vec gravity)
: gg_(&gg), model_(&model), problem_(&problem), params_(&params), gravity_(gravity), numEq_(model.numEq())
{
    if (params.size() != gg.mesh().numElements())
        throw ParameterError("spatial parameters do not match the number of elements");
}

void Assembler::setCouplingManager(const CouplingManager* manager, int domainIndex)
{
    coupling_ = manager;
    domainIndex_ = domainIndex;
}

Vector Assembler::initialSolution() const
{
    Vector u(size());
    for (int dof = 0; dof < numDofs(); ++dof)
    {
        const EqVector v = problem_->initial(gg_->dofPosition(dof));
        u.segment(dof*numEq_, numEq_) = v.head(numEq_);
    }
    return u;
}

std::vector<int> Assembler::elementDofs(int e) const
{
    std::vector<int> dofs;
    for (const auto& scv : gg_->elementScvs(e))
        dofs.push_back(scv.dofIndex);
    return dofs;
}

void Assembler::buildDirichletRows() const
{
    if (dirichletReady_)
        return;
    dirichletRows_.assign(gg_->scheme() == Scheme::box ? size() : 0, 0);
    if (gg_->scheme() == Scheme::box)
    {
        for (int f = 0; f < gg_->numScvf(); ++f)
        {
            const auto& scvf = gg_->scvf(f);
            if (!scvf.boundary)
                continue;
            const auto bt = problem_->boundaryTypesAt(scvf.boundaryMarker, scvf.center);
            const int dof = gg_->scv(scvf.insideScv).dofIndex;
            for (int eq = 0; eq < numEq_; ++eq)
                if (bt.isDirichlet(eq))
                    dirichletRows_[dof*numEq_ + eq] = 1;
        }
    }
    dirichletReady_ = true;
}

bool Assembler::isDirichletRow(int row) const
{
    buildDirichletRows();
    return !dirichletRows_.empty() && dirichletRows_[row];
}

DofState Assembler::tpfaState(const Vector& u, int scvIndex, const SubControlVolumeFace& scvf) const
{
    const auto& scv = gg_->scv(scvIndex);
    const auto& p = (*params_)[scv.elementIndex];
    const bool alongNormal = gg_->mesh().dimGrid() > 1;
    return {dofValues(u, scv.dofIndex), &p, scv.center,
            tpfaGeometricFactor(scvf, scv.center, p.extrusion, alongNormal)};
}

EqVector Assembler::tpfaFlux(const SubControlVolumeFace& scvf, const Vector& u, double time) const
{
    TimeContext tc{time, std::nullopt};
    if (coupling_)
        if (auto f = coupling_->couplingFlux(domainIndex_, scvf, u, tc))
            return *f;

    const int e = scvf.elementIndex;
    FluxContext ctx;
    ctx.scvf = &scvf;
    ctx.gravity = gravity_;
    ctx.scheme = Scheme::tpfa;
    ctx.inside = tpfaState(u, scvf.insideScv, scvf);
    ctx.extrusion = (*params_)[e].extrusion;
    ctx.elementParams = &(*params_)[e];

    if (!scvf.boundary)
    {
        for (int o : scvf.outsideScvs)
            ctx.outside.push_back(tpfaState(u, o, scvf));
        return model_->flux(ctx);
    }

    const auto bt = problem_->boundaryTypesAt(scvf.boundaryMarker, scvf.center);
    EqVector f = zeroEq(numEq_);
    if (bt.hasDirichlet(numEq_))
    {
        ctx.outside.push_back({problem_->dirichlet(scvf.center, time).head(numEq_), &(*params_)[e], scvf.center,
                               std::numeric_limits<double>::infinity()});
        f = model_->flux(ctx);
    }
    if (!std::all_of(bt.kind.begin(), bt.kind.begin() + numEq_, [](BcKind k) { return k == BcKind::dirichlet; }))
    {
        const EqVector g = problem_->neumann(scvf.boundaryMarker, scvf.center, time, ctx.inside.values);
        for (int eq = 0; eq < numEq_; ++eq)
            if (!bt.isDirichlet(eq))
                f[eq] = g[eq]*scvf.area*ctx.extrusion;
    }
    return f;
}

std::vector<EqVector> Assembler::elementResidual(int e, const Vector& u, const Vector& uOld,
                                                 const TimeContext& tc) const
{
    const auto scvs = gg_->elementScvs(e);
    const auto& p = (*params_)[e];
    const double ext = p.extrusion;
    std::vector<EqVector> res(scvs.size(), zeroEq(numEq_));

    for (std::size_t k = 0; k < scvs.size(); ++k)
    {
        const auto& scv = scvs[k];
        const EqVector values = dofValues(u, scv.dofIndex);
        if (tc.dt)
            res[k] += (model_->storage(p, values) - model_->storage(p, dofValues(uOld, scv.dofIndex)))
                      *scv.volume*ext/(*tc.dt);
        res[k] -= problem_->source(scv.center, tc.time, values).head(numEq_)*scv.volume*ext;
    }

    if (gg_->scheme() == Scheme::tpfa)
    {
        for (const auto& scvf : gg_->elementScvfs(e))
            res[0] += tpfaFlux(scvf, u, tc.time);
    }
    else
    {
        std::vector<EqVector> corner;
        corner.reserve(scvs.size());
        for (const auto& scv : scvs)
            corner.push_back(dofValues(u, scv.dofIndex));

        FluxContext ctx;
        ctx.gravity = gravity_;
        ctx.scheme = Scheme::box;
        ctx.elementValues = corner;
        ctx.elementParams = &p;
        ctx.extrusion = ext;

        for (const auto& scvf : gg_->elementScvfs(e))
        {
            const int in = gg_->scv(scvf.insideScv).localIndex;
            if (coupling_)
                if (auto f = coupling_->couplingFlux(domainIndex_, scvf, u, tc))
                {
                    res[in] += *f;
                    continue;
                }
            if (scvf.boundary)
            {
                const auto bt = problem_->boundaryTypesAt(scvf.boundaryMarker, scvf.center);
                if (bt.hasDirichlet(numEq_) && std::all_of(bt.kind.begin(), bt.kind.begin() + numEq_,
                                                           [](BcKind k) { return k == BcKind::dirichlet; }))
                    continue;
                const EqVector g = problem_->neumann(scvf.boundaryMarker, scvf.center, tc.time, corner[in]);
                for (int eq = 0; eq < numEq_; ++eq)
                    if (!bt.isDirichlet(eq))
                        res[in][eq] += g[eq]*scvf.area*ext;
                continue;
            }
            ctx.scvf = &scvf;
            ctx.insideLocal = in;
            ctx.outsideLocal = gg_->scv(scvf.outsideScvs.front()).localIndex;
            const EqVector f = model_->flux(ctx);
            res[in] += f;
            res[ctx.outsideLocal] -= f;
        }
    }

    if (coupling_)
        coupling_->addCouplingResidual(domainIndex_, e, u, res, tc);
    return res;
}

void Assembler::applyDirichletRows(const Vector& u, double time, Vector& res) const
{
    buildDirichletRows();
    if (dirichletRows_.empty())
        return;
    for (int dof = 0; dof < numDofs(); ++dof)
    {
        bool any = false;
        for (int eq = 0; eq < numEq_; ++eq)
            any = any || dirichletRows_[dof*numEq_ + eq];
        if (!any)
            continue;
        const EqVector ud = problem_->dirichlet(gg_->dofPosition(dof), time);
        for (int eq = 0; eq < numEq_; ++eq)
            if (dirichletRows_[dof*numEq_ + eq])
                res[dof*numEq_ + eq] = u[dof*numEq_ + eq] - ud[eq];
    }
}

Vector Assembler::residual(const Vector& u, const Vector& uOld, const TimeContext& tc) const
{
    if (u.size() != size() || uOld.size() != size())
        throw Error("solution vector size does not match the grid geometry");
    buildDirichletRows();

    Vector res = Vector::Zero(size());
    for (int e = 0; e < gg_->mesh().numElements(); ++e)
    {
        const auto local = elementResidual(e, u, uOld, tc);
        const auto scvs = gg_->elementScvs(e);
        for (std::size_t k = 0; k < scvs.size(); ++k)
            res.segment(scvs[k].dofIndex*numEq_, numEq_) += local[k];
    }
    applyDirichletRows(u, tc.time, res);
    return res;
}

void differentiateElement(Vector& u, std::span<const int> dofs, int numEqCols,
                          const std::vector<EqVector>& r0, std::span<const int> rowDofs, int numEqRows,
                          const DifferencingOptions& options,
                          const std::function<std::vector<EqVector>()>& evaluate,
                          const std::function<bool(int)>& skipRow,
                          std::vector<Triplet>& triplets)
{
    for (int dof : dofs)
    {
        for (int k = 0; k < numEqCols; ++k)
        {
            const int col = dof*numEqCols + k;
            const double orig = u[col];
            const double h = options.epsilon(orig);

            std::vector<EqVector> deriv;
            if (options.type == Differencing::forward)
            {
                u[col] = orig + h;
                const double step = u[col] - orig;
                auto r1 = evaluate();
                u[col] = orig;
                for (std::size_t i = 0; i < r1.size(); ++i)
                    r1[i] = (r1[i] - r0[i])/step;
                deriv = std::move(r1);
            }
            else
            {
                u[col] = orig + h;
                const double up = u[col];
                auto rp = evaluate();
                u[col] = orig - h;
                const double down = u[col];
                auto rm = evaluate();
                u[col] = orig;
                for (std::size_t i = 0; i < rp.size(); ++i)
                    rp[i] = (rp[i] - rm[i])/(up - down);
                deriv = std::move(rp);
            }

            for (std::size_t i = 0; i < rowDofs.size(); ++i)
                for (int eq = 0; eq < numEqRows; ++eq)
                {
                    const int row = rowDofs[i]*numEqRows + eq;
                    if (skipRow && skipRow(row))
                        continue;
                    triplets.emplace_back(row, col, deriv[i][eq]);
                }
        }
    }
}

void Assembler::assemble(Vector& u, const Vector& uOld, const TimeContext& tc, SparseMatrix& jac, Vector& res) const
{
    if (u.size() != size() || uOld.size() != size())
        throw Error("solution vector size does not match the grid geometry");
    buildDirichletRows();

    res = Vector::Zero(size());
    std::vector<Triplet> triplets;
    const auto skip = [this](int row) { return isDirichletRow(row); };

    for (int e = 0; e < gg_->mesh().numElements(); ++e)
    {
        const auto r0 = elementResidual(e, u, uOld, tc);
        const auto rows = elementDofs(e);
        for (std::size_t k = 0; k < rows.size(); ++k)
            res.segment(rows[k]*numEq_, numEq_) += r0[k];

        differentiateElement(u, gg_->elementStencil(e), numEq_, r0, rows, numEq_, differencing_,
                             [&] { return elementResidual(e, u, uOld, tc); }, skip, triplets);
    }

    for (int row = 0; row < size(); ++row)
        if (isDirichletRow(row))
            triplets.emplace_back(row, row, 1.0);
    applyDirichletRows(u, tc.time, res);

    jac.resize(size(), size());
    jac.setFromTriplets(triplets.begin(), triplets.end());
    jac.makeCompressed();
}

SparseMatrix Assembler::jacobian(Vector& u, const Vector& uOld, const TimeContext& tc) const
{
    SparseMatrix jac;
    Vector res;
    assemble(u, uOld, tc, jac, res);
    return jac;
}

EqVector Assembler::totalStorage(const Vector& u) const
{
    EqVector total = zeroEq(numEq_);
    for (int e = 0; e < gg_->mesh().numElements(); ++e)
    {
        const auto& p = (*params_)[e];
        for (const auto& scv : gg_->elementScvs(e))
            total += model_->storage(p, dofValues(u, scv.dofIndex))*scv.volume*p.extrusion;
    }
    return total;
}

EqVector Assembler::totalSource(const Vector& u, double time) const
{
    EqVector total = zeroEq(numEq_);
    for (int e = 0; e < gg_->mesh().numElements(); ++e)
    {
        const auto& p = (*params_)[e];
        for (const auto& scv : gg_->elementScvs(e))
            total += problem_->source(scv.center, time, dofValues(u, scv.dofIndex)).head(numEq_)
                     *scv.volume*p.extrusion;
    }
    return total;
}

EqVector Assembler::boundaryOutflow(const Vector& u, double time) const
{
    EqVector total = zeroEq(numEq_);
    for (int f = 0; f < gg_->numScvf(); ++f)
    {
        const auto& scvf = gg_->scvf(f);
        if (!scvf.boundary)
            continue;
        if (gg_->scheme() == Scheme::tpfa)
        {
            total += tpfaFlux(scvf, u, time);
            continue;
        }
        const auto bt = problem_->boundaryTypesAt(scvf.boundaryMarker, scvf.center);
        const EqVector values = dofValues(u, gg_->scv(scvf.insideScv).dofIndex);
        const EqVector g = problem_->neumann(scvf.boundaryMarker, scvf.center, time, values);
        for (int eq = 0; eq < numEq_; ++eq)
            if (!bt.isDirichlet(eq))
                total[eq] += g[eq]*scvf.area*(*params_)[scvf.elementIndex].extrusion;
    }
    return total;
}

} // namespace fervor
