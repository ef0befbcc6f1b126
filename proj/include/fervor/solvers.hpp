#pragma once

#include <fervor/common.hpp>
#include <fervor/fvgeom.hpp>
#include <fervor/material.hpp>
#include <fervor/models.hpp>

#include <Eigen/Sparse>

#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace fervor {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

//! time level of an assembly; no dt means steady state (no storage term)
struct TimeContext
{
    double time = 0.0;
    std::optional<double> dt;
};

enum class Differencing { forward, central };

struct DifferencingOptions
{
    Differencing type = Differencing::forward;
    double relativeEpsilon = 1e-8;
    //! perturbation of entry value u: relativeEpsilon * max(|u|, 1)
    double epsilon(double u) const;
};

class CouplingManager;

/*!
 * \brief Element-wise residual and numeric Jacobian assembly for one domain.
 *
 * The solution vector is flat with dof-major layout: entry dof*numEq + eq.
 * Jacobian assembly perturbs the passed solution in place and restores every
 * entry exactly afterwards; coupling managers that hold a pointer to the same
 * vector therefore see the perturbation.
 */
class Assembler
{
public:
    Assembler(const GridGeometry& gg, const Model& model, const ProblemDefinition& problem,
              const SpatialParams& params, Vec gravity = Vec::Zero());

    const GridGeometry& gridGeometry() const { return *gg_; }
    const Model& model() const { return *model_; }
    const ProblemDefinition& problem() const { return *problem_; }
    const SpatialParams& spatialParams() const { return *params_; }
    const Vec& gravity() const { return gravity_; }

    int numEq() const { return numEq_; }
    int numDofs() const { return gg_->numDofs(); }
    int size() const { return numDofs()*numEq_; }

    void setCouplingManager(const CouplingManager* manager, int domainIndex);
    void setDifferencing(DifferencingOptions options) { differencing_ = options; }
    const DifferencingOptions& differencing() const { return differencing_; }

    Vector initialSolution() const;
    EqVector dofValues(const Vector& u, int dof) const { return u.segment(dof*numEq_, numEq_); }

    //! global residual (box Dirichlet rows replaced by u - u_D)
    Vector residual(const Vector& u, const Vector& uOld, const TimeContext& tc) const;
    SparseMatrix jacobian(Vector& u, const Vector& uOld, const TimeContext& tc) const;
    void assemble(Vector& u, const Vector& uOld, const TimeContext& tc, SparseMatrix& jac, Vector& res) const;

    //! contributions of element e to the residual of its local dofs, in scv order
    std::vector<EqVector> elementResidual(int e, const Vector& u, const Vector& uOld, const TimeContext& tc) const;
    //! dof index of each local residual row of element e
    std::vector<int> elementDofs(int e) const;

    //! box: row whose equation is replaced by u - u_D
    bool isDirichletRow(int row) const;
    //! box: Dirichlet row replacement in the residual vector
    void applyDirichletRows(const Vector& u, double time, Vector& res) const;

    //! flux across one scvf (tpfa), as used in the residual; Neumann and Dirichlet faces included
    EqVector tpfaFlux(const SubControlVolumeFace& scvf, const Vector& u, double time) const;

    // audits
    //! sum of storage * |scv| * extrusion
    EqVector totalStorage(const Vector& u) const;
    //! sum of fluxes leaving through boundary faces (Neumann faces; all faces for tpfa)
    EqVector boundaryOutflow(const Vector& u, double time) const;
    //! sum of source * |scv| * extrusion
    EqVector totalSource(const Vector& u, double time) const;

private:
    void buildDirichletRows() const;
    DofState tpfaState(const Vector& u, int scvIndex, const SubControlVolumeFace& scvf) const;

    const GridGeometry* gg_;
    const Model* model_;
    const ProblemDefinition* problem_;
    const SpatialParams* params_;
    Vec gravity_;
    int numEq_;
    const CouplingManager* coupling_ = nullptr;
    int domainIndex_ = 0;
    DifferencingOptions differencing_;
    mutable std::vector<char> dirichletRows_;
    mutable bool dirichletReady_ = false;
};

/*!
 * \brief Numeric derivative of element residual rows w.r.t. a set of solution entries.
 *
 * Shared by domain Jacobians and coupling blocks: `evaluate` re-evaluates the
 * residual rows after `u[col]` was perturbed in place.
 */
void differentiateElement(Vector& u, std::span<const int> dofs, int numEqCols,
                          const std::vector<EqVector>& r0, std::span<const int> rowDofs, int numEqRows,
                          const DifferencingOptions& options,
                          const std::function<std::vector<EqVector>()>& evaluate,
                          const std::function<bool(int)>& skipRow,
                          std::vector<Triplet>& triplets);

// ---------------------------------------------------------------------------
// linear algebra

enum class LinearSolverType { lu, bicgstab };

struct LinearSolverOptions
{
    LinearSolverType type = LinearSolverType::lu;
    int blockSize = 1;
    int maxIterations = 2000;
    double tolerance = 1e-10;
};

struct LinearSolverReport
{
    int iterations = 0;
    double relativeResidual = 0.0;
};

Vector linearSolve(const SparseMatrix& a, const Vector& b, const LinearSolverOptions& options = {},
                   LinearSolverReport* report = nullptr);

// ---------------------------------------------------------------------------
// Newton

class NonlinearSystem
{
public:
    virtual ~NonlinearSystem() = default;
    virtual int size() const = 0;
    virtual Vector residual(const Vector& u) = 0;
    virtual void linearize(const Vector& u, SparseMatrix& jac, Vector& res) = 0;
};

//! one domain at a fixed time level
class DomainSystem : public NonlinearSystem
{
public:
    DomainSystem(const Assembler& assembler, const Vector& uOld, TimeContext tc)
    : assembler_(&assembler), uOld_(&uOld), tc_(tc) {}

    int size() const override { return assembler_->size(); }
    Vector residual(const Vector& u) override { return assembler_->residual(u, *uOld_, tc_); }
    void linearize(const Vector& u, SparseMatrix& jac, Vector& res) override;

private:
    const Assembler* assembler_;
    const Vector* uOld_;
    TimeContext tc_;
    Vector work_;
};

struct NewtonOptions
{
    int maxIterations = 18;
    double maxRelativeShift = 1e-8;
    double residualReduction = 1e-11;
    bool lineSearch = false;
    int maxLineSearchHalvings = 4;
    double divergenceFactor = 10.0;
    LinearSolverOptions linear;
};

struct NewtonReport
{
    bool converged = false;
    int iterations = 0;
    double initialResidual = 0.0;
    double finalResidual = 0.0;
    double shift = 0.0;
};

/*!
 * \brief Newton's method u <- u - du with A du = r.
 *
 * Works on a copy: u is only overwritten on convergence. Non-convergence
 * within the iteration cap is reported, divergence and linear solver failure
 * throw NumericalProblem.
 */
NewtonReport newtonSolve(NonlinearSystem& system, Vector& u, const NewtonOptions& options = {});

//! relative shift max_i |du_i| / max(1, |u_i + u_i'|/2)
double relativeShift(const Vector& uOld, const Vector& uNew);

// ---------------------------------------------------------------------------
// time loop

struct TimeLoopOptions
{
    double tStart = 0.0;
    double tEnd = 1.0;
    double dtInitial = 0.1;
    double dtMax = 1.0;
    double dtMin = 1e-10;
    int maxSteps = 1000000;
};

struct StepReport
{
    int step = 0;
    double time = 0.0;
    double dt = 0.0;
    int newtonIterations = 0;
    int retries = 0;
};

std::string formatStepReport(const StepReport& r);

/*!
 * \brief Backward Euler time stepping with step control.
 *
 * `solveStep(t_new, dt, u)` solves for the new level in place (u holds the
 * old level on entry) and returns the Newton report; it may throw
 * NumericalProblem. On failure the step is retried with dt/2.
 */
class TimeLoop
{
public:
    using StepSolver = std::function<NewtonReport(double timeNew, double dt, Vector& u)>;
    using StepCallback = std::function<void(const StepReport&, const Vector& uOld, const Vector& uNew)>;

    explicit TimeLoop(TimeLoopOptions options);

    double time() const { return time_; }
    double dt() const { return dt_; }
    int step() const { return step_; }
    bool finished() const { return time_ >= options_.tEnd; }

    //! next dt after a successful step with the given Newton iteration count
    double suggestTimeStep(int newtonIterations) const;

    void run(Vector& u, const StepSolver& solve, const StepCallback& callback = {}, std::ostream* log = nullptr);

private:
    TimeLoopOptions options_;
    double time_;
    double dt_;
    int step_ = 0;
};

//! convenience: transient run of a single domain with Newton
void runTransient(const Assembler& assembler, Vector& u, const TimeLoopOptions& timeOptions,
                  const NewtonOptions& newtonOptions = {}, const TimeLoop::StepCallback& callback = {},
                  std::ostream* log = nullptr);

} // namespace fervor
