#pragma once

// =============================================================================
// Second-order-cone programs
// =============================================================================
//
//   minimize    c' x
//   subject to  lower <= x <= upper
//               a_k' x <= b_k              (inequalities)
//               a_k' x  = b_k              (equalities)
//               sqrt(u_j(x)^2 + v_j(x)^2) <= bound_j   (u_j, v_j affine)
//
// solve_conic() runs a homogeneous self-dual interior-point method with
// Nesterov-Todd scaling and Mehrotra predictor-corrector steps. Fixed
// variables and constant rows are presolved away; the search direction comes
// from the normal equations G' W^-2 G with iterative refinement against the
// full KKT system.

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace phaseopt {

/// Sparse coefficient row: (variable index, coefficient) pairs.
using SparseRow = std::vector<std::pair<int, double>>;

struct AffineForm {
    SparseRow terms;
    double constant = 0.0;

    double eval(const Eigen::VectorXd& x) const;
};

struct LinearConstraint {
    SparseRow terms;
    double rhs = 0.0;

    double eval(const Eigen::VectorXd& x) const;
};

struct SocConstraint {
    AffineForm u;
    AffineForm v;
    double bound = 0.0;
};

struct ConicProgram {
    ConicProgram() = default;
    explicit ConicProgram(int num_variables);

    Eigen::VectorXd objective;
    Eigen::VectorXd lower;  ///< may hold -inf
    Eigen::VectorXd upper;  ///< may hold +inf
    std::vector<LinearConstraint> inequalities;
    std::vector<LinearConstraint> equalities;
    std::vector<SocConstraint> cones;

    int num_variables() const { return static_cast<int>(objective.size()); }

    /// Throws DimensionError / InvalidParameter for inconsistent data.
    void validate() const;
    /// Largest violation of any bound, row, or cone at x (0 when feasible).
    double max_violation(const Eigen::VectorXd& x) const;
    double evaluate(const Eigen::VectorXd& x) const { return objective.dot(x); }
};

struct ToleranceConfig {
    double feasibility = 1e-7;  ///< scaled primal / dual residual
    double gap = 1e-7;          ///< relative duality gap
    int max_iterations = 100;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit, NumericalFailure };

std::string_view to_string(SolveStatus s);

struct SolveResult {
    SolveStatus status = SolveStatus::NumericalFailure;
    double objective = 0.0;
    Eigen::VectorXd primal;
    double residual = 0.0;  ///< max primal violation of the original program
    int iterations = 0;

    bool optimal() const { return status == SolveStatus::Optimal; }
};

SolveResult solve_conic(const ConicProgram& program, const ToleranceConfig& tol = {});

/// Debug dump of a program; the schema is documented in the README.
std::string to_json(const ConicProgram& program);

}  // namespace phaseopt
