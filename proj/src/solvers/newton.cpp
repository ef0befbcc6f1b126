#include <fervor/solvers.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace fervor {

void DomainSystem::linearize(const Vector& u, SparseMatrix& jac, Vector& res)
{
    work_ = u;
    assembler_->assemble(work_, *uOld_, tc_, jac, res);
}

double relativeShift(const Vector& uOld, const Vector& uNew)
{
    double shift = 0.0;
    for (Eigen::Index i = 0; i < uOld.size(); ++i)
    {
        const double scale = std::max(1.0, 0.5*std::abs(uOld[i] + uNew[i]));
        shift = std::max(shift, std::abs(uOld[i] - uNew[i])/scale);
    }
    return shift;
}

NewtonReport newtonSolve(NonlinearSystem& system, Vector& u, const NewtonOptions& options)
{
    if (u.size() != system.size())
        throw Error("solution vector size does not match the nonlinear system");

    NewtonReport report;
    Vector current = u;
    SparseMatrix jac;
    Vector res;
    system.linearize(current, jac, res);
    report.initialResidual = res.lpNorm<Eigen::Infinity>();
    report.finalResidual = report.initialResidual;
    if (!std::isfinite(report.initialResidual))
        throw NumericalProblem("non-finite initial residual");

    if (report.initialResidual == 0.0)
    {
        report.converged = true;
        return report;
    }

    for (int it = 1; it <= options.maxIterations; ++it)
    {
        const Vector du = linearSolve(jac, res, options.linear);
        Vector next = current - du;
        Vector nextRes = system.residual(next);
        double norm = nextRes.lpNorm<Eigen::Infinity>();

        if (options.lineSearch)
        {
            const double currentNorm = res.lpNorm<Eigen::Infinity>();
            double lambda = 1.0;
            for (int h = 0; h < options.maxLineSearchHalvings && !(norm <= currentNorm); ++h)
            {
                lambda *= 0.5;
                next = current - lambda*du;
                nextRes = system.residual(next);
                norm = nextRes.lpNorm<Eigen::Infinity>();
            }
        }

        report.iterations = it;
        report.shift = relativeShift(current, next);
        report.finalResidual = norm;
        current = std::move(next);

        if (!std::isfinite(norm) || !current.allFinite())
            throw NumericalProblem("Newton produced a non-finite state in iteration " + std::to_string(it));
        if (norm > options.divergenceFactor*report.initialResidual)
        {
            std::ostringstream msg;
            msg << "Newton diverged: residual " << norm << " exceeds " << options.divergenceFactor
                << " times the initial residual " << report.initialResidual;
            throw NumericalProblem(msg.str());
        }

        if (report.shift < options.maxRelativeShift || norm < options.residualReduction*report.initialResidual)
        {
            report.converged = true;
            u = current;
            return report;
        }

        if (it < options.maxIterations)
            system.linearize(current, jac, res);
    }
    return report;
}

// ---------------------------------------------------------------------------

std::string formatStepReport(const StepReport& r)
{
    std::ostringstream s;
    s << "step " << r.step << " t=" << std::setprecision(10) << r.time << " dt=" << r.dt
      << " newton=" << r.newtonIterations;
    return s.str();
}

TimeLoop::TimeLoop(TimeLoopOptions options)
: options_(options), time_(options.tStart), dt_(options.dtInitial)
{
    if (!(options_.dtMin > 0.0) || !(options_.dtMin <= options_.dtMax))
        throw ParameterError("time step bounds must satisfy 0 < dtMin <= dtMax");
    if (!(options_.dtInitial > 0.0))
        throw ParameterError("initial time step must be positive");
    if (!(options_.tEnd >= options_.tStart))
        throw ParameterError("end time must not precede the start time");
    dt_ = std::clamp(dt_, options_.dtMin, options_.dtMax);
}

double TimeLoop::suggestTimeStep(int newtonIterations) const
{
    const double factor = std::min(1.25, 10.0/(newtonIterations + 1));
    return std::min(dt_*factor, options_.dtMax);
}

void TimeLoop::run(Vector& u, const StepSolver& solve, const StepCallback& callback, std::ostream* log)
{
    while (time_ < options_.tEnd)
    {
        if (step_ >= options_.maxSteps)
            throw NumericalProblem("maximum number of time steps reached");

        StepReport report;
        double dt = dt_;
        for (;;)
        {
            // land exactly on the end time
            const bool last = options_.tEnd - (time_ + dt) <= 1e-12*dt;
            if (last)
                dt = options_.tEnd - time_;
            const double timeNew = last ? options_.tEnd : time_ + dt;

            Vector trial = u;
            bool ok = false;
            try
            {
                const auto newton = solve(timeNew, dt, trial);
                ok = newton.converged;
                report.newtonIterations = newton.iterations;
            }
            catch (const NumericalProblem& e)
            {
                if (log)
                    *log << "step " << step_ + 1 << " retry: " << e.what() << "\n";
            }

            if (ok)
            {
                const Vector old = u;
                u = std::move(trial);
                ++step_;
                time_ = timeNew;
                dt_ = dt;
                report.step = step_;
                report.time = time_;
                report.dt = dt;
                if (log)
                    *log << formatStepReport(report) << "\n";
                if (callback)
                    callback(report, old, u);
                dt_ = suggestTimeStep(report.newtonIterations);
                break;
            }

            ++report.retries;
            dt *= 0.5;
            if (dt < options_.dtMin)
            {
                std::ostringstream msg;
                msg << "time step underflow: dt = " << dt << " below dtMin = " << options_.dtMin << " at t = " << time_;
                throw NumericalProblem(msg.str());
            }
        }
    }
}

void runTransient(const Assembler& assembler, Vector& u, const TimeLoopOptions& timeOptions,
                  const NewtonOptions& newtonOptions, const TimeLoop::StepCallback& callback, std::ostream* log)
{
    TimeLoop loop(timeOptions);
    loop.run(u, [&](double timeNew, double dt, Vector& x) {
        const Vector old = x;
        DomainSystem system(assembler, old, TimeContext{timeNew, dt});
        return newtonSolve(system, x, newtonOptions);
    }, callback, log);
}

} // namespace fervor
