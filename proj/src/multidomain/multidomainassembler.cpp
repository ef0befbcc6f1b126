#include <fervor/multidomain.hpp>

#include <algorithm>

namespace fervor {

SparseMatrix BlockSystem::monolithicMatrix() const
{
    std::vector<int> offsets{0};
    for (const auto& r : residuals)
        offsets.push_back(offsets.back() + static_cast<int>(r.size()));
    std::vector<Triplet> triplets;
    for (int i = 0; i < numDomains(); ++i)
        for (int j = 0; j < numDomains(); ++j)
        {
            const auto& b = blocks[i][j];
            for (int row = 0; row < b.outerSize(); ++row)
                for (SparseMatrix::InnerIterator it(b, row); it; ++it)
                    triplets.emplace_back(offsets[i] + row, offsets[j] + it.col(), it.value());
        }
    SparseMatrix m(offsets.back(), offsets.back());
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

Vector BlockSystem::monolithicResidual() const
{
    int n = 0;
    for (const auto& r : residuals)
        n += static_cast<int>(r.size());
    Vector res(n);
    int offset = 0;
    for (const auto& r : residuals)
    {
        res.segment(offset, r.size()) = r;
        offset += static_cast<int>(r.size());
    }
    return res;
}

MultiDomainAssembler::MultiDomainAssembler(std::vector<Assembler*> assemblers, CouplingManager& manager)
: assemblers_(std::move(assemblers)), manager_(&manager)
{
    if (manager.numDomains() != numDomains())
        throw ParameterError("coupling manager and assemblers disagree on the number of domains");
    offsets_.push_back(0);
    for (auto* a : assemblers_)
        offsets_.push_back(offsets_.back() + a->size());

    blocks_.resize(assemblers_.size());
    std::vector<Vector*> pointers;
    for (int i = 0; i < numDomains(); ++i)
    {
        blocks_[i] = Vector::Zero(assemblers_[i]->size());
        pointers.push_back(&blocks_[i]);
        assemblers_[i]->setCouplingManager(&manager, i);
    }
    manager.setSolution(std::move(pointers));

    // every coupling stencil must address existing dofs in ascending order
    for (int i = 0; i < numDomains(); ++i)
        for (int e = 0; e < assemblers_[i]->gridGeometry().mesh().numElements(); ++e)
            for (int j = 0; j < numDomains(); ++j)
            {
                const auto st = manager.couplingStencil(i, e, j);
                if (st.empty())
                    continue;
                if (i == j)
                    throw Error("coupling stencil of a domain with itself");
                if (!std::is_sorted(st.begin(), st.end()) || st.front() < 0
                    || st.back() >= assemblers_[j]->numDofs())
                    throw Error("coupling stencil of domain " + std::to_string(i) + " element "
                                + std::to_string(e) + " does not match the dofs of domain " + std::to_string(j));
            }
}

std::vector<Vector> MultiDomainAssembler::split(const Vector& u) const
{
    if (u.size() != totalSize())
        throw Error("multi-domain solution vector has the wrong size");
    std::vector<Vector> blocks;
    for (int i = 0; i < numDomains(); ++i)
        blocks.push_back(u.segment(offsets_[i], offsets_[i + 1] - offsets_[i]));
    return blocks;
}

Vector MultiDomainAssembler::join(const std::vector<Vector>& blocks) const
{
    Vector u(totalSize());
    for (int i = 0; i < numDomains(); ++i)
    {
        if (blocks[i].size() != offsets_[i + 1] - offsets_[i])
            throw Error("block " + std::to_string(i) + " has the wrong size");
        u.segment(offsets_[i], blocks[i].size()) = blocks[i];
    }
    return u;
}

void MultiDomainAssembler::setState(const Vector& u)
{
    if (u.size() != totalSize())
        throw Error("multi-domain solution vector has the wrong size");
    for (int i = 0; i < numDomains(); ++i)
        blocks_[i] = u.segment(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

Vector MultiDomainAssembler::residual(const Vector& u, const std::vector<Vector>& oldBlocks, const TimeContext& tc)
{
    setState(u);
    Vector res(totalSize());
    for (int i = 0; i < numDomains(); ++i)
        res.segment(offsets_[i], assemblers_[i]->size()) = assemblers_[i]->residual(blocks_[i], oldBlocks[i], tc);
    return res;
}

BlockSystem MultiDomainAssembler::assemble(const Vector& u, const std::vector<Vector>& oldBlocks,
                                           const TimeContext& tc)
{
    setState(u);
    const int n = numDomains();
    BlockSystem sys;
    sys.blocks.assign(n, std::vector<SparseMatrix>(n));
    sys.residuals.resize(n);

    for (int i = 0; i < n; ++i)
        assemblers_[i]->assemble(blocks_[i], oldBlocks[i], tc, sys.blocks[i][i], sys.residuals[i]);

    for (int i = 0; i < n; ++i)
    {
        const auto& ai = *assemblers_[i];
        std::vector<std::vector<Triplet>> triplets(n);
        const auto skip = [&ai](int row) { return ai.isDirichletRow(row); };
        for (int e = 0; e < ai.gridGeometry().mesh().numElements(); ++e)
        {
            std::optional<std::vector<EqVector>> r0;
            std::vector<int> rows;
            for (int j = 0; j < n; ++j)
            {
                const auto st = manager_->couplingStencil(i, e, j);
                if (j == i || st.empty())
                    continue;
                if (!r0)
                {
                    r0 = ai.elementResidual(e, blocks_[i], oldBlocks[i], tc);
                    rows = ai.elementDofs(e);
                }
                differentiateElement(blocks_[j], st, assemblers_[j]->numEq(), *r0, rows, ai.numEq(),
                                     ai.differencing(),
                                     [&] { return ai.elementResidual(e, blocks_[i], oldBlocks[i], tc); },
                                     skip, triplets[j]);
            }
        }
        for (int j = 0; j < n; ++j)
        {
            if (j == i)
                continue;
            auto& c = sys.blocks[i][j];
            c.resize(ai.size(), assemblers_[j]->size());
            c.setFromTriplets(triplets[j].begin(), triplets[j].end());
            c.makeCompressed();
        }
    }
    return sys;
}

MultiDomainSystem::MultiDomainSystem(MultiDomainAssembler& assembler, const Vector& uOld, TimeContext tc)
: assembler_(&assembler), oldBlocks_(assembler.split(uOld)), tc_(tc)
{}

Vector MultiDomainSystem::residual(const Vector& u)
{
    return assembler_->residual(u, oldBlocks_, tc_);
}

void MultiDomainSystem::linearize(const Vector& u, SparseMatrix& jac, Vector& res)
{
    const auto sys = assembler_->assemble(u, oldBlocks_, tc_);
    jac = sys.monolithicMatrix();
    res = sys.monolithicResidual();
}

} // namespace fervor

namespace fervor {

void runTransientCoupled(MultiDomainAssembler& assembler, Vector& u, const TimeLoopOptions& timeOptions,
                         const NewtonOptions& newtonOptions, const TimeLoop::StepCallback& callback,
                         std::ostream* log)
{
    TimeLoop loop(timeOptions);
    loop.run(u, [&](double timeNew, double dt, Vector& x) {
        MultiDomainSystem system(assembler, x, TimeContext{timeNew, dt});
        auto report = newtonSolve(system, x, newtonOptions);
        assembler.setState(x);
        return report;
    }, callback, log);
}

} // namespace fervor
