//! Interior-point backend for [`ConvexProgram`] relaxations.

use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::program::{ConvexProgram, Relaxation, SolverAdapter, SolverCapabilities, VarId};
use crate::sparse::TripletMatrix;
use crate::{Error, Result};

/// QP/LP backend; binaries are handled by the branch-and-bound layer, not
/// here.
#[derive(Debug, Clone)]
pub struct ClarabelAdapter {
    /// Primal/dual feasibility tolerance.
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for ClarabelAdapter {
    fn default() -> Self {
        // Stiff contact dynamics put O(1e2) coefficients into constraint
        // rows, so residuals must be driven well below the audit tolerance.
        // Such problems grind for over a thousand iterations before the
        // insufficient-progress check fires; the cap only exists to stop
        // true divergence.
        Self {
            tol: 1e-10,
            max_iter: 3000,
        }
    }
}

impl SolverAdapter for ClarabelAdapter {
    fn capabilities(&self) -> SolverCapabilities {
        SolverCapabilities {
            quadratic_cost: true,
            second_order_cone: true,
            binaries: false,
        }
    }

    fn solve(&self, program: &ConvexProgram, fixings: &[(VarId, f64)]) -> Result<Relaxation> {
        let nv = program.num_vars();
        let n_eq = program.num_equalities() + fixings.len();
        let n_ineq = program.num_inequalities();

        // Cost: Clarabel minimizes (1/2)xᵀPx + qᵀx, so P = 2·(symmetrized
        // quadratic terms); the full symmetric matrix is passed and the
        // solver keeps its upper triangle.
        let mut p = TripletMatrix::new(nv, nv);
        for &(i, j, c) in program.quad_cost_terms() {
            if i == j {
                p.push(i, i, 2.0 * c);
            } else {
                p.push(i, j, c);
                p.push(j, i, c);
            }
        }
        let q = program.lin_cost().to_vec();

        let mut a = TripletMatrix::new(n_eq + n_ineq, nv);
        let mut b = vec![0.0; n_eq + n_ineq];
        for (row, expr) in program.equalities().iter().enumerate() {
            for &(id, c) in &expr.terms {
                a.push(row, id.0, c);
            }
            b[row] = -expr.constant;
        }
        for (i, &(id, value)) in fixings.iter().enumerate() {
            let row = program.num_equalities() + i;
            a.push(row, id.0, 1.0);
            b[row] = value;
        }
        for (i, expr) in program.inequalities().iter().enumerate() {
            let row = n_eq + i;
            for &(id, c) in &expr.terms {
                a.push(row, id.0, c);
            }
            b[row] = -expr.constant;
        }

        let cones = [
            SupportedConeT::ZeroConeT(n_eq),
            SupportedConeT::NonnegativeConeT(n_ineq),
        ];
        let trace = std::env::var_os("ZONOTUBE_SOLVER_TRACE");
        let settings = DefaultSettingsBuilder::default()
            .verbose(trace.as_deref().is_some_and(|v| v == "verbose"))
            .tol_feas(self.tol)
            .tol_gap_abs(self.tol)
            .tol_gap_rel(self.tol)
            .max_iter(self.max_iter)
            .dynamic_regularization_delta(1e-11)
            .iterative_refinement_max_iter(50)
            .min_terminate_step_length(1e-9)
            .direct_solve_method("faer".into())
            .build()
            .map_err(|e| Error::Solver(format!("solver settings: {e}")))?;
        let mut solver = DefaultSolver::new(&p.to_csc(), &q, &a.to_csc(), &b, &cones, settings)
            .map_err(|e| Error::Solver(format!("solver setup: {e}")))?;
        solver.solve();
        if trace.is_some() {
            eprintln!(
                "clarabel: status {:?}, iters {}, r_prim {:.3e}, r_dual {:.3e}, gap {:.3e}",
                solver.solution.status,
                solver.solution.iterations,
                solver.solution.r_prim,
                solver.solution.r_dual,
                (solver.solution.obj_val - solver.solution.obj_val_dual).abs()
            );
        }
        match solver.solution.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => {
                let x = solver.solution.x.clone();
                let objective = program.objective_value(&x);
                Ok(Relaxation::Optimal { x, objective })
            }
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                Ok(Relaxation::Infeasible)
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Err(
                Error::Solver("relaxation is unbounded (dual infeasible)".into()),
            ),
            status => Err(Error::Solver(format!(
                "relaxation terminated with status {status:?}"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::program::{LinExpr, VarTag};

    #[test]
    fn solves_box_constrained_qp() {
        // min (x − 1)² subject to x ≤ 0.5
        let mut prog = ConvexProgram::new();
        let x = prog.add_var(VarTag::Aux);
        let mut dev = LinExpr::var(x);
        dev.constant = -1.0;
        prog.add_quadratic_form(&[dev], &nalgebra::DMatrix::identity(1, 1))
            .unwrap();
        let mut le = LinExpr::var(x);
        le.constant = -0.5;
        prog.le(le);
        let adapter = ClarabelAdapter::default();
        match adapter.solve(&prog, &[]).unwrap() {
            Relaxation::Optimal { x: sol, objective } => {
                assert!((sol[0] - 0.5).abs() < 1e-6);
                assert!((objective - 0.25).abs() < 1e-6);
            }
            Relaxation::Infeasible => panic!("expected optimal"),
        }
    }

    #[test]
    fn detects_infeasible_bounds() {
        // x ≤ 0 and x ≥ 1
        let mut prog = ConvexProgram::new();
        let x = prog.add_var(VarTag::Aux);
        prog.le(LinExpr::var(x));
        let mut ge = LinExpr::term(x, -1.0);
        ge.constant = 1.0;
        prog.le(ge);
        let adapter = ClarabelAdapter::default();
        assert!(matches!(
            adapter.solve(&prog, &[]).unwrap(),
            Relaxation::Infeasible
        ));
    }

    #[test]
    fn fixings_pin_variables() {
        // min x² + y² with y fixed to 3 and x = y − 1
        let mut prog = ConvexProgram::new();
        let x = prog.add_var(VarTag::Aux);
        let y = prog.add_var(VarTag::Aux);
        prog.add_quad_cost(x, x, 1.0);
        prog.add_quad_cost(y, y, 1.0);
        let mut eq = LinExpr::var(x);
        eq.add_scaled(&LinExpr::var(y), -1.0);
        eq.constant = 1.0;
        prog.eq(eq); // x − y + 1 = 0
        let adapter = ClarabelAdapter::default();
        match adapter.solve(&prog, &[(y, 3.0)]).unwrap() {
            Relaxation::Optimal { x: sol, .. } => {
                assert!((sol[1] - 3.0).abs() < 1e-7);
                assert!((sol[0] - 2.0).abs() < 1e-7);
            }
            Relaxation::Infeasible => panic!("expected optimal"),
        }
    }

    #[test]
    fn abs_epigraph_minimum_at_kink() {
        // min t subject to t ≥ |x − 3|
        let mut prog = ConvexProgram::new();
        let x = prog.add_var(VarTag::Aux);
        let mut dev = LinExpr::var(x);
        dev.constant = -3.0;
        let t = prog.add_abs_epigraph(&dev);
        prog.add_lin_cost(t, 1.0);
        let adapter = ClarabelAdapter::default();
        match adapter.solve(&prog, &[]).unwrap() {
            Relaxation::Optimal { x: sol, objective } => {
                assert!((sol[0] - 3.0).abs() < 1e-5);
                assert!(objective.abs() < 1e-6);
            }
            Relaxation::Infeasible => panic!("expected optimal"),
        }
    }
}
