#pragma once

#include <fervor/solvers.hpp>

#include <optional>
#include <span>
#include <vector>

namespace fervor {

/*!
 * \brief Interface between the sub-domains of a coupled problem.
 *
 * Holds pointers to the current block solution vectors; the multi-domain
 * assembler perturbs these in place, so coupling terms always see the state
 * used for the derivative being computed.
 */
class CouplingManager
{
public:
    virtual ~CouplingManager() = default;

    virtual int numDomains() const = 0;

    //! sorted dofs of domain j entering the residual of element e of domain i; empty if uncoupled
    virtual std::span<const int> couplingStencil(int i, int element, int j) const = 0;

    //! coupling sources added to the local residual rows of an element
    virtual void addCouplingResidual(int domain, int element, const Vector& u,
                                     std::vector<EqVector>& residual, const TimeContext& tc) const
    {
        (void)domain; (void)element; (void)u; (void)residual; (void)tc;
    }

    //! flux across a coupled scvf replacing the regular flux; nullopt for uncoupled faces
    virtual std::optional<EqVector> couplingFlux(int domain, const SubControlVolumeFace& scvf, const Vector& u,
                                                 const TimeContext& tc) const
    {
        (void)domain; (void)scvf; (void)u; (void)tc;
        return std::nullopt;
    }

    void setSolution(std::vector<Vector*> blocks) { blocks_ = std::move(blocks); }
    const Vector& solution(int domain) const { return *blocks_.at(domain); }

protected:
    std::vector<Vector*> blocks_;
};

} // namespace fervor
