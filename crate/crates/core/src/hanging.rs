//! Hanging-node constraints for 2-level adaptive Q2/Q1 meshes.
//!
//! Along a coarse edge `A - C - B` (corners `A`, `B`, mid node `C`) that is
//! split on the fine side, the fine mid-edge velocity node `D` between `A`
//! and `C` is slaved as
//!
//! ```text
//! u_D = 3/8 u_A - 1/8 u_B + 3/4 u_C
//! ```
//!
//! and the pressure vertex `C` as `p_C = (p_A + p_B) / 2`. The fine element
//! that owns `D` never sees `B`; its local slot for `D` is handed `B`'s
//! global equation and the element matrix is transformed with
//! `blockdiag(Dv, Dv, Dp)^T K blockdiag(Dv, Dv, Dp)`.

use serde::{Deserialize, Serialize};

use crate::basis::Q2_EDGES;
use crate::dense::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldKind {
    Velocity,
    Pressure,
}

/// Velocity constraint weights in the `(A, B, C)` roles.
pub fn velocity_weights<T: Scalar>() -> [T; 3] {
    [T::ratio(3, 8), T::ratio(-1, 8), T::ratio(3, 4)]
}

/// Pressure constraint weights in the `(A, B)` roles.
pub fn pressure_weights<T: Scalar>() -> [T; 2] {
    [T::ratio(1, 2), T::ratio(1, 2)]
}

/// One slaved node. `masters` are `[A, B, C]` for velocity and `[A, B]`
/// for pressure, indexed in the numbering of the respective field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HangingConstraint {
    pub slave: usize,
    pub masters: Vec<usize>,
    pub weights: Vec<f64>,
    pub kind: FieldKind,
}

impl HangingConstraint {
    pub fn velocity(slave: usize, a: usize, b: usize, c: usize) -> Self {
        Self { slave, masters: vec![a, b, c], weights: velocity_weights::<f64>().to_vec(), kind: FieldKind::Velocity }
    }

    pub fn pressure(slave: usize, a: usize, b: usize) -> Self {
        Self { slave, masters: vec![a, b], weights: pressure_weights::<f64>().to_vec(), kind: FieldKind::Pressure }
    }

    /// Value the slave must take given master values.
    pub fn evaluate(&self, value_of: impl Fn(usize) -> f64) -> f64 {
        self.masters.iter().zip(&self.weights).map(|(&m, &w)| w * value_of(m)).sum()
    }
}

/// A hanging velocity node as seen from the fine element that owns it.
/// The slave's local slot carries the out-of-element master `B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocalVelocityHanging {
    pub slave: usize,
    /// local index of the coarse corner `A` (weight 3/8)
    pub a: usize,
    /// local index of the coarse mid node `C` (weight 3/4)
    pub c: usize,
}

/// A hanging pressure vertex as seen from one fine element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocalPressureHanging {
    pub slave: usize,
    /// local index of the in-element master (weight 1/2)
    pub a: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementConstraints {
    pub velocity: Vec<LocalVelocityHanging>,
    pub pressure: Vec<LocalPressureHanging>,
}

/// Per-element `Dv` (9x9) and `Dp` (4x4).
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintMatrices<T> {
    pub dv: DenseMatrix<T>,
    pub dp: DenseMatrix<T>,
}

/// Positions of the velocity component blocks and the optional pressure
/// block inside an element matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    pub velocity: [Option<usize>; 2],
    pub pressure: Option<usize>,
}

impl BlockLayout {
    /// `(u1^1..u1^9, u2^1..u2^9, p^1..p^4)`, 22 entries.
    pub const TAYLOR_HOOD: BlockLayout = BlockLayout { velocity: [Some(0), Some(9)], pressure: Some(18) };
    /// `(u1^1..u1^9, u2^1..u2^9)`, 18 entries.
    pub const VELOCITY: BlockLayout = BlockLayout { velocity: [Some(0), Some(9)], pressure: None };
    /// A single Q2 scalar field, 9 entries.
    pub const SCALAR_Q2: BlockLayout = BlockLayout { velocity: [Some(0), None], pressure: None };
    /// A single Q1 scalar field, 4 entries.
    pub const SCALAR_Q1: BlockLayout = BlockLayout { velocity: [None, None], pressure: Some(0) };

    pub fn size(&self) -> usize {
        self.velocity.iter().flatten().count() * 9 + if self.pressure.is_some() { 4 } else { 0 }
    }
}

/// `(slave, [(master, weight)], slave-slot weight)` in layout indices.
type Rule<T> = (usize, Vec<(usize, T)>, T);

impl ElementConstraints {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.velocity.is_empty() && self.pressure.is_empty()
    }

    /// The configuration of element II in the reference picture of the
    /// hanging-node construction: hanging velocity node on the right edge
    /// between corner 1 (coarse mid node) and corner 2 (coarse corner).
    pub fn right_edge_example() -> Self {
        Self {
            velocity: vec![LocalVelocityHanging { slave: 5, a: 2, c: 1 }],
            pressure: vec![LocalPressureHanging { slave: 1, a: 2 }],
        }
    }

    /// Hanging configuration on one edge. `edge` indexes [`Q2_EDGES`];
    /// `mid_at_start` selects which end of the fine edge is the coarse
    /// mid node `C`.
    pub fn single_edge(edge: usize, mid_at_start: bool) -> Self {
        let [s, m, e] = Q2_EDGES[edge];
        let (c, a) = if mid_at_start { (s, e) } else { (e, s) };
        Self {
            velocity: vec![LocalVelocityHanging { slave: m, a, c }],
            pressure: vec![LocalPressureHanging { slave: c, a }],
        }
    }

    /// Every admissible 2-level configuration of a Q2 element: one hanging
    /// edge (8 cases) or two hanging edges meeting at a coarse corner
    /// (4 cases). Opposite edges cannot both hang under the 2:1 rule.
    pub fn all_configurations() -> Vec<Self> {
        let mut out = Vec::new();
        for edge in 0..4 {
            for mid_at_start in [true, false] {
                out.push(Self::single_edge(edge, mid_at_start));
            }
        }
        for corner in 0..4 {
            // edge ending at `corner` and edge starting at it; the shared
            // corner is the coarse corner A for both
            let incoming = (corner + 3) % 4;
            let outgoing = corner;
            let a = Self::single_edge(incoming, true);
            let b = Self::single_edge(outgoing, false);
            out.push(Self {
                velocity: [a.velocity, b.velocity].concat(),
                pressure: [a.pressure, b.pressure].concat(),
            });
        }
        out
    }

    pub fn matrices<T: Scalar>(&self) -> ConstraintMatrices<T> {
        let mut dv = DenseMatrix::identity(9);
        let [wa, wb, wc] = velocity_weights::<T>();
        for h in &self.velocity {
            dv[(h.slave, h.slave)] = wb;
            dv[(h.slave, h.a)] = wa;
            dv[(h.slave, h.c)] = wc;
        }
        let mut dp = DenseMatrix::identity(4);
        let [pa, pb] = pressure_weights::<T>();
        for h in &self.pressure {
            dp[(h.slave, h.slave)] = pb;
            dp[(h.slave, h.a)] = pa;
        }
        ConstraintMatrices { dv, dp }
    }

    fn rules<T: Scalar>(&self, layout: &BlockLayout) -> Vec<Rule<T>> {
        let [wa, wb, wc] = velocity_weights::<T>();
        let [pa, pb] = pressure_weights::<T>();
        let mut rules = Vec::new();
        for off in layout.velocity.iter().flatten() {
            for h in &self.velocity {
                rules.push((off + h.slave, vec![(off + h.a, wa), (off + h.c, wc)], wb));
            }
        }
        if let Some(off) = layout.pressure {
            for h in &self.pressure {
                rules.push((off + h.slave, vec![(off + h.a, pa)], pb));
            }
        }
        rules
    }
}

/// Applies the constraints of `cons` to a 22x22 Taylor-Hood element matrix
/// ordered `(u1^1..u1^9, u2^1..u2^9, p^1..p^4)` with the in-place row and
/// column loops. The result equals `Dᵀ K D` with
/// `D = blockdiag(Dv, Dv, Dp)`.
pub fn modify_element_matrix<T: Scalar>(k: &mut DenseMatrix<T>, cons: &ElementConstraints) {
    assert_eq!((k.nrows(), k.ncols()), (22, 22), "Taylor-Hood element matrix must be 22x22");
    modify_square(k, cons, &BlockLayout::TAYLOR_HOOD);
}

/// Symmetric constraint transform `Dᵀ K D` for any square layout.
pub fn modify_square<T: Scalar>(k: &mut DenseMatrix<T>, cons: &ElementConstraints, layout: &BlockLayout) {
    let n = k.nrows();
    debug_assert_eq!(n, layout.size());
    for (i0, masters, w0) in cons.rules::<T>(layout) {
        for j in 0..n {
            let v = k[(i0, j)];
            for &(i, w) in &masters {
                k[(i, j)] += v * w;
            }
        }
        for j in 0..n {
            let v = k[(j, i0)];
            for &(i, w) in &masters {
                k[(j, i)] += v * w;
            }
        }
        for j in 0..n {
            k[(i0, j)] *= w0;
        }
        for j in 0..n {
            k[(j, i0)] *= w0;
        }
    }
}

/// Left transform `Dᵀ K` on the rows of a (possibly rectangular) matrix.
pub fn modify_rows<T: Scalar>(k: &mut DenseMatrix<T>, cons: &ElementConstraints, layout: &BlockLayout) {
    let n = k.ncols();
    for (i0, masters, w0) in cons.rules::<T>(layout) {
        for j in 0..n {
            let v = k[(i0, j)];
            for &(i, w) in &masters {
                k[(i, j)] += v * w;
            }
            k[(i0, j)] = v * w0;
        }
    }
}

/// Right transform `K D` on the columns of a (possibly rectangular) matrix.
pub fn modify_cols<T: Scalar>(k: &mut DenseMatrix<T>, cons: &ElementConstraints, layout: &BlockLayout) {
    let n = k.nrows();
    for (i0, masters, w0) in cons.rules::<T>(layout) {
        for j in 0..n {
            let v = k[(j, i0)];
            for &(i, w) in &masters {
                k[(j, i)] += v * w;
            }
            k[(j, i0)] = v * w0;
        }
    }
}

/// `Dᵀ f` for an element load vector.
pub fn modify_vector<T: Scalar>(f: &mut [T], cons: &ElementConstraints, layout: &BlockLayout) {
    for (i0, masters, w0) in cons.rules::<T>(layout) {
        let v = f[i0];
        for &(i, w) in &masters {
            f[i] += v * w;
        }
        f[i0] = v * w0;
    }
}
