//! Runtime execution of a synthesized tube policy.
//!
//! Each tube step carries a linear feedback u = ū_k − θ_k G_k†(x − x̄_k).
//! The controller is quasi-time-free: instead of tracking wall-clock step
//! indices it selects the entry whose set the current state occupies,
//! with priority on the successor of the previously applied entry to
//! avoid chattering. Membership queries use per-entry parallelotope
//! bounds (cheap inverse application) rather than the exact membership
//! program; a k-d tree over the entry centers restricts the candidate
//! set.

use nalgebra::{DMatrix, DVector};

use crate::reduction::parallelotope_bound;
use crate::synth::SynthesisResult;
use crate::zonoset::{ContainmentCertificate, Parallelotope, Zonotope};
use crate::{Error, Result};

/// Required accuracy of the precomputed pseudoinverse: ‖G G† G − G‖.
pub const PINV_RESIDUAL_TOL: f64 = 1e-8;

/// Default number of nearest centers considered per query.
pub const DEFAULT_KNN: usize = 8;

/// One executable tube step.
#[derive(Debug, Clone)]
pub struct PolicyEntry {
    pub state_center: DVector<f64>,
    pub state_generator: DMatrix<f64>,
    /// Moore-Penrose pseudoinverse of the state generator.
    pub pseudo_inverse: DMatrix<f64>,
    pub input_center: DVector<f64>,
    pub input_generator: DMatrix<f64>,
    /// Cheap outer bound of the state set, used for membership queries.
    pub bound: Parallelotope,
    /// Proof that the bound contains the state set.
    pub certificate: ContainmentCertificate,
}

/// Ordered tube steps k = 0..N−1 plus a spatial index over their centers.
#[derive(Debug, Clone)]
pub struct PolicyLibrary {
    entries: Vec<PolicyEntry>,
    tree: KdTree,
    nn: usize,
}

/// Sequence number of the last applied entry, if any.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ControllerState {
    last: Option<usize>,
}

impl ControllerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn last(&self) -> Option<usize> {
        self.last
    }
}

impl PolicyLibrary {
    /// Builds the library from a synthesis result: one entry per input
    /// step, with the pseudoinverse and the parallelotope bound
    /// precomputed and certified.
    pub fn from_result(result: &SynthesisResult) -> Result<Self> {
        if result.inputs.is_empty() {
            return Err(Error::InvalidArgument("result has no input steps".into()));
        }
        let mut entries = Vec::with_capacity(result.inputs.len());
        for (state, input) in result.states.iter().zip(&result.inputs) {
            entries.push(PolicyEntry::from_sets(state, input)?);
        }
        let tree = KdTree::build(entries.iter().map(|e| e.state_center.clone()).collect());
        Ok(Self {
            entries,
            tree,
            nn: DEFAULT_KNN,
        })
    }

    /// Replaces the candidate-set size (clamped to at least 1).
    pub fn with_nn(mut self, nn: usize) -> Self {
        self.nn = nn.max(1);
        self
    }

    pub fn nn(&self) -> usize {
        self.nn
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PolicyEntry] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries[0].state_center.len()
    }

    /// Indices of the `nn` entry centers nearest to `x` (Euclidean),
    /// exact with ties broken toward lower indices; sorted by index.
    pub fn knn_candidates(&self, x: &DVector<f64>, nn: usize) -> Vec<usize> {
        let mut found = self.tree.nearest(x, nn.max(1));
        found.sort_unstable();
        found
    }

    /// Time-free entry selection: prefer the successor of the last
    /// applied entry when the state lies in its bound; otherwise take the
    /// occupied entry with the nearest center; otherwise the entry with
    /// the smallest distance. Ties fall to the lower index. Returns the
    /// control and the chosen index, and records the index in `state`.
    pub fn choose_policy(
        &self,
        x: &DVector<f64>,
        state: &mut ControllerState,
    ) -> (DVector<f64>, usize) {
        let successor = state
            .last
            .map(|k| k + 1)
            .filter(|&s| s < self.entries.len());
        if let Some(s) = successor {
            if distance(x, &self.entries[s].bound) == 0.0 {
                state.last = Some(s);
                return (feedback(&self.entries[s], x), s);
            }
        }
        let mut candidates = self.knn_candidates(x, self.nn);
        if let Some(s) = successor {
            if !candidates.contains(&s) {
                candidates.push(s);
                candidates.sort_unstable();
            }
        }
        let ranked = candidates.iter().map(|&j| {
            let d = distance(x, &self.entries[j].bound);
            let center_dist = (x - &self.entries[j].state_center).norm();
            (j, d, center_dist)
        });
        let mut inside: Option<(usize, f64)> = None;
        let mut outside: Option<(usize, f64)> = None;
        for (j, d, center_dist) in ranked {
            if d == 0.0 {
                if inside.is_none_or(|(_, best)| center_dist < best) {
                    inside = Some((j, center_dist));
                }
            } else if outside.is_none_or(|(_, best)| d < best) {
                outside = Some((j, d));
            }
        }
        let chosen = inside.or(outside).map(|(j, _)| j).unwrap_or(0);
        state.last = Some(chosen);
        (feedback(&self.entries[chosen], x), chosen)
    }
}

impl PolicyEntry {
    fn from_sets(state: &Zonotope, input: &Zonotope) -> Result<Self> {
        let g = state.generator();
        let n = state.dim();
        let p = state.num_generators();
        if input.num_generators() != p {
            return Err(Error::ShapeMismatch(format!(
                "input width {} does not match state width {p}",
                input.num_generators()
            )));
        }
        let pseudo_inverse = if p == 0 {
            DMatrix::zeros(0, n)
        } else {
            g.clone()
                .pseudo_inverse(1e-12)
                .map_err(|e| Error::Singular(format!("pseudoinverse failed: {e}")))?
        };
        let residual = (g * &pseudo_inverse * g - g).norm();
        if residual > PINV_RESIDUAL_TOL {
            return Err(Error::Singular(format!(
                "pseudoinverse residual {residual:.3e} exceeds {PINV_RESIDUAL_TOL:.0e}"
            )));
        }
        let bound = parallelotope_bound(state)?;
        // The bound shares the set's center, so β = 0 and Γ = P⁻¹ G; the
        // bound's radii make every row sum at most one.
        let certificate = ContainmentCertificate {
            gamma: bound.inverse() * g,
            beta: DVector::zeros(n),
        };
        if !certificate.verify(state, &bound.as_zonotope(), 1e-7) {
            return Err(Error::Solver(
                "parallelotope bound certificate failed verification".into(),
            ));
        }
        Ok(Self {
            state_center: state.center().clone(),
            state_generator: g.clone(),
            pseudo_inverse,
            input_center: input.center().clone(),
            input_generator: input.generator().clone(),
            bound,
            certificate,
        })
    }
}

/// Linear tube feedback u = ū − θ G†(x − x̄).
pub fn feedback(entry: &PolicyEntry, x: &DVector<f64>) -> DVector<f64> {
    let coeff = &entry.pseudo_inverse * (x - &entry.state_center);
    &entry.input_center - &entry.input_generator * coeff
}

/// Distance from a point to a parallelotope ⟨x_c, P⟩: zero inside,
/// otherwise ν (‖P⁻¹(x−x_c)‖_∞ − 1) with the scale factor
/// ν = ‖x−x_c‖₂ / ‖P⁻¹(x−x_c)‖₂. The center is inside by definition,
/// so ν is never evaluated at Δ = 0.
pub fn distance(x: &DVector<f64>, bound: &Parallelotope) -> f64 {
    let delta = x - bound.center();
    if delta.amax() == 0.0 {
        return 0.0;
    }
    let pre = bound.inverse() * &delta;
    let inf = pre.amax();
    if inf <= 1.0 {
        return 0.0;
    }
    let nu = delta.norm() / pre.norm();
    nu * (inf - 1.0)
}

/// Static k-d tree over entry centers, exact nearest-neighbor queries
/// with (distance², index) ordering.
#[derive(Debug, Clone)]
struct KdTree {
    points: Vec<DVector<f64>>,
    nodes: Vec<KdNode>,
    root: Option<usize>,
}

#[derive(Debug, Clone)]
struct KdNode {
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

impl KdTree {
    fn build(points: Vec<DVector<f64>>) -> Self {
        let mut tree = Self {
            points,
            nodes: Vec::new(),
            root: None,
        };
        let mut order: Vec<usize> = (0..tree.points.len()).collect();
        tree.root = tree.split(&mut order, 0);
        tree
    }

    fn split(&mut self, order: &mut [usize], depth: usize) -> Option<usize> {
        if order.is_empty() {
            return None;
        }
        let dim = self.points[0].len();
        let axis = depth % dim;
        order.sort_unstable_by(|&a, &b| {
            self.points[a][axis]
                .partial_cmp(&self.points[b][axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mid = order.len() / 2;
        let point = order[mid];
        let node = self.nodes.len();
        self.nodes.push(KdNode {
            point,
            axis,
            left: None,
            right: None,
        });
        let (lo, hi) = order.split_at_mut(mid);
        let left = self.split(lo, depth + 1);
        let right = self.split(&mut hi[1..], depth + 1);
        self.nodes[node].left = left;
        self.nodes[node].right = right;
        Some(node)
    }

    /// The k nearest points by (distance², index); returned unordered.
    fn nearest(&self, x: &DVector<f64>, k: usize) -> Vec<usize> {
        // Kept sorted ascending by (distance², index); worst at the back.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if let Some(root) = self.root {
            self.search(root, x, k, &mut best);
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    fn search(&self, node: usize, x: &DVector<f64>, k: usize, best: &mut Vec<(f64, usize)>) {
        let n = &self.nodes[node];
        let d2 = (x - &self.points[n.point]).norm_squared();
        let key = (d2, n.point);
        let pos = best.partition_point(|&(bd, bi)| (bd, bi) < key);
        best.insert(pos, key);
        if best.len() > k {
            best.pop();
        }
        let gap = x[n.axis] - self.points[n.point][n.axis];
        let (near, far) = if gap < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        if let Some(child) = near {
            self.search(child, x, k, best);
        }
        // The far half-space can still hold ties or closer points unless
        // the splitting plane is strictly beyond the current worst.
        let prune = best.len() == k && gap * gap > best.last().unwrap().0;
        if !prune {
            if let Some(child) = far {
                self.search(child, x, k, best);
            }
        }
    }
}
