//! Best-first branch and bound over SOS1 mode groups.
//!
//! Each node fixes a subset of the SOS1 groups to a single active member
//! and solves the continuous relaxation. Branching always targets the
//! lowest-index group with a fractional member; children are enqueued in
//! member order, and ties in the bound are broken by insertion order, so
//! the search is deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use super::program::{ConvexProgram, Relaxation, SolverAdapter, VarId};
use crate::Result;

#[derive(Debug, Clone)]
pub struct BnbConfig {
    /// Maximum number of relaxation solves (root and heuristic included).
    pub max_nodes: usize,
    pub time_budget: Duration,
    /// A binary value within this distance of 0 or 1 counts as integral.
    pub integrality_tol: f64,
    /// Nodes whose bound is within this of the incumbent are pruned.
    pub gap_tol: f64,
    /// Round the root relaxation into an initial incumbent.
    pub rounding_heuristic: bool,
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self {
            max_nodes: 2000,
            time_budget: Duration::from_secs(480),
            integrality_tol: 1e-6,
            gap_tol: 1e-9,
            rounding_heuristic: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnbStatus {
    Optimal,
    Infeasible,
    /// Node or time budget ran out; the incumbent (if any) is returned.
    BudgetExceeded,
}

#[derive(Debug, Clone)]
pub struct BnbOutcome {
    pub status: BnbStatus,
    pub x: Option<Vec<f64>>,
    pub objective: f64,
    pub nodes_explored: usize,
}

struct Node {
    bound: f64,
    seq: u64,
    fixings: Vec<(VarId, f64)>,
    x: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap; invert so the lowest (bound, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then(other.seq.cmp(&self.seq))
    }
}

/// Solves `program`; pure relaxation when no binaries are present,
/// otherwise branch and bound over its SOS1 groups.
pub fn solve_mixed<A: SolverAdapter>(
    program: &ConvexProgram,
    adapter: &A,
    config: &BnbConfig,
) -> Result<BnbOutcome> {
    let start = Instant::now();
    let mut nodes = 0usize;

    if !program.is_mixed_integer() {
        nodes += 1;
        return Ok(match adapter.solve(program, &[])? {
            Relaxation::Optimal { x, objective } => BnbOutcome {
                status: BnbStatus::Optimal,
                x: Some(x),
                objective,
                nodes_explored: nodes,
            },
            Relaxation::Infeasible => BnbOutcome {
                status: BnbStatus::Infeasible,
                x: None,
                objective: f64::NAN,
                nodes_explored: nodes,
            },
        });
    }

    let budget_hit = |nodes: usize, start: &Instant| {
        nodes >= config.max_nodes || start.elapsed() >= config.time_budget
    };

    nodes += 1;
    let (root_x, root_obj) = match adapter.solve(program, &[])? {
        Relaxation::Optimal { x, objective } => (x, objective),
        Relaxation::Infeasible => {
            return Ok(BnbOutcome {
                status: BnbStatus::Infeasible,
                x: None,
                objective: f64::NAN,
                nodes_explored: nodes,
            })
        }
    };

    let mut incumbent: Option<(Vec<f64>, f64)> = None;

    // Root rounding heuristic: activate the largest member of every group.
    if config.rounding_heuristic && !budget_hit(nodes, &start) {
        let fixings = round_all_groups(program, &root_x);
        nodes += 1;
        if let Relaxation::Optimal { x, objective } = adapter.solve(program, &fixings)? {
            incumbent = Some((x, objective));
        }
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        bound: root_obj,
        seq,
        fixings: Vec::new(),
        x: root_x,
    });

    let mut exhausted = false;
    while let Some(node) = heap.pop() {
        if let Some((_, inc_obj)) = &incumbent {
            // Best-first: once the lowest bound cannot improve, we are done.
            if node.bound >= inc_obj - config.gap_tol {
                break;
            }
        }
        let Some(group_idx) = first_fractional_group(program, &node.x, config.integrality_tol)
        else {
            // All binaries integral: feasible for the mixed-integer problem.
            let better = incumbent
                .as_ref()
                .map(|(_, obj)| node.bound < obj - 1e-12)
                .unwrap_or(true);
            if better {
                incumbent = Some((node.x, node.bound));
            }
            continue;
        };
        let group = &program.sos1_groups()[group_idx];
        for active in 0..group.len() {
            if budget_hit(nodes, &start) {
                exhausted = true;
                break;
            }
            let mut fixings = node.fixings.clone();
            for (j, &id) in group.iter().enumerate() {
                fixings.push((id, if j == active { 1.0 } else { 0.0 }));
            }
            nodes += 1;
            if let Relaxation::Optimal { x, objective } = adapter.solve(program, &fixings)? {
                let worse_than_incumbent = incumbent
                    .as_ref()
                    .map(|(_, obj)| objective >= obj - config.gap_tol)
                    .unwrap_or(false);
                if !worse_than_incumbent {
                    seq += 1;
                    heap.push(Node {
                        bound: objective,
                        seq,
                        fixings,
                        x,
                    });
                }
            }
        }
        if exhausted {
            break;
        }
    }

    Ok(match incumbent {
        Some((x, objective)) => BnbOutcome {
            status: if exhausted {
                BnbStatus::BudgetExceeded
            } else {
                BnbStatus::Optimal
            },
            x: Some(x),
            objective,
            nodes_explored: nodes,
        },
        None => BnbOutcome {
            status: if exhausted {
                BnbStatus::BudgetExceeded
            } else {
                BnbStatus::Infeasible
            },
            x: None,
            objective: f64::NAN,
            nodes_explored: nodes,
        },
    })
}

/// Index of the lowest SOS1 group containing a fractional member.
fn first_fractional_group(program: &ConvexProgram, x: &[f64], tol: f64) -> Option<usize> {
    program.sos1_groups().iter().position(|group| {
        group.iter().any(|&id| {
            let v = x[id.0];
            (v - v.round()).abs() > tol
        })
    })
}

/// Fixes every group to its largest member (ties to the lowest index).
fn round_all_groups(program: &ConvexProgram, x: &[f64]) -> Vec<(VarId, f64)> {
    let mut fixings = Vec::new();
    for group in program.sos1_groups() {
        let mut best = 0usize;
        for (j, &id) in group.iter().enumerate() {
            if x[id.0] > x[group[best].0] {
                best = j;
            }
        }
        for (j, &id) in group.iter().enumerate() {
            fixings.push((id, if j == best { 1.0 } else { 0.0 }));
        }
    }
    fixings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::clarabel_adapter::ClarabelAdapter;
    use crate::synth::program::{LinExpr, VarTag};
    use nalgebra::DMatrix;

    /// min (x − target)² with x = c01 + 0.4·c11 over two SOS1 pairs.
    fn two_group_program(target: f64) -> ConvexProgram {
        let mut prog = ConvexProgram::new();
        let x = prog.add_var(VarTag::Aux);
        let c00 = prog.add_binary(VarTag::ModeBinary { k: 0, j: 0 });
        let c01 = prog.add_binary(VarTag::ModeBinary { k: 0, j: 1 });
        let c10 = prog.add_binary(VarTag::ModeBinary { k: 1, j: 0 });
        let c11 = prog.add_binary(VarTag::ModeBinary { k: 1, j: 1 });
        prog.add_sos1(vec![c00, c01]);
        prog.add_sos1(vec![c10, c11]);
        let mut link = LinExpr::var(x);
        link.push(c01, -1.0);
        link.push(c11, -0.4);
        prog.eq(link); // x = c01 + 0.4 c11
        let mut dev = LinExpr::var(x);
        dev.constant = -target;
        prog.add_quadratic_form(&[dev], &DMatrix::identity(1, 1))
            .unwrap();
        prog
    }

    #[test]
    fn pure_relaxation_when_no_binaries() {
        let mut prog = ConvexProgram::new();
        let x = prog.add_var(VarTag::Aux);
        let mut dev = LinExpr::var(x);
        dev.constant = -2.0;
        prog.add_quadratic_form(&[dev], &DMatrix::identity(1, 1))
            .unwrap();
        let out = solve_mixed(&prog, &ClarabelAdapter::default(), &BnbConfig::default()).unwrap();
        assert_eq!(out.status, BnbStatus::Optimal);
        assert_eq!(out.nodes_explored, 1);
        assert!((out.x.unwrap()[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        let target = 0.7;
        let prog = two_group_program(target);
        let adapter = ClarabelAdapter::default();
        let out = solve_mixed(&prog, &adapter, &BnbConfig::default()).unwrap();
        assert_eq!(out.status, BnbStatus::Optimal);

        // Oracle: try all four group assignments by explicit fixing.
        let groups: Vec<Vec<VarId>> = prog.sos1_groups().to_vec();
        let mut best = f64::INFINITY;
        for i in 0..2 {
            for j in 0..2 {
                let mut fixings = Vec::new();
                for (g, pick) in groups.iter().zip([i, j]) {
                    for (m, &id) in g.iter().enumerate() {
                        fixings.push((id, if m == pick { 1.0 } else { 0.0 }));
                    }
                }
                if let Relaxation::Optimal { objective, .. } =
                    adapter.solve(&prog, &fixings).unwrap()
                {
                    best = best.min(objective);
                }
            }
        }
        assert!((out.objective - best).abs() < 1e-6);
        assert!((out.objective - 0.09).abs() < 1e-4);
    }

    #[test]
    fn reports_infeasible_when_all_leaves_fail() {
        let mut prog = ConvexProgram::new();
        let c0 = prog.add_binary(VarTag::ModeBinary { k: 0, j: 0 });
        let c1 = prog.add_binary(VarTag::ModeBinary { k: 0, j: 1 });
        prog.add_sos1(vec![c0, c1]);
        let mut eq = LinExpr::var(c0);
        eq.push(c1, -1.0);
        prog.eq(eq); // c0 = c1, incompatible with one active member
        let out = solve_mixed(&prog, &ClarabelAdapter::default(), &BnbConfig::default()).unwrap();
        assert_eq!(out.status, BnbStatus::Infeasible);
        assert!(out.x.is_none());
    }

    #[test]
    fn budget_returns_incumbent_with_flag() {
        let prog = two_group_program(0.7);
        let config = BnbConfig {
            max_nodes: 2, // root + rounding heuristic only
            ..BnbConfig::default()
        };
        let out = solve_mixed(&prog, &ClarabelAdapter::default(), &config).unwrap();
        assert_eq!(out.status, BnbStatus::BudgetExceeded);
        assert!(out.x.is_some());
    }
}
