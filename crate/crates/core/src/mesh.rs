//! Quadtree fluid mesh with 2-level hanging nodes.
//!
//! The box `origin + [0, extent]` is split into `root_cells` equal
//! rectangles which are refined by quadrisection. All node positions live
//! on an integer lattice with `2^(max_level + 1)` units per root cell, so
//! node identity is exact and independent of floating point.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::basis::{q1_values, q2_values, CellGeometry, Q2_EDGES, Q2_NODES};
use crate::error::{Error, Result};
use crate::hanging::{ElementConstraints, HangingConstraint, LocalPressureHanging, LocalVelocityHanging};
use crate::solid::SolidMesh;
use crate::types::{BoundaryConditions, Side};

/// Accepted range of the fluid-to-solid element area ratio near the solid.
pub const AREA_RATIO_RANGE: (f64, f64) = (1.5, 5.0);

/// Largest supported refinement depth.
pub const MAX_LEVEL_LIMIT: u32 = 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 2],
    pub extent: [f64; 2],
    pub root_cells: [usize; 2],
    pub max_level: u32,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.extent[0] > 0.0 && self.extent[1] > 0.0) {
            return Err(Error::Config(format!("domain extent must be positive, got {:?}", self.extent)));
        }
        if self.root_cells[0] == 0 || self.root_cells[1] == 0 {
            return Err(Error::Config("root_cells must be at least 1 in each direction".into()));
        }
        if self.max_level > MAX_LEVEL_LIMIT {
            return Err(Error::Config(format!("max_level {} exceeds {MAX_LEVEL_LIMIT}", self.max_level)));
        }
        Ok(())
    }

    /// Lattice units per root cell side.
    fn units(&self) -> i64 {
        1 << (self.max_level + 1)
    }

    /// Cell size at `level`.
    pub fn cell_size(&self, level: u32) -> [f64; 2] {
        let n = (1u64 << level) as f64;
        [self.extent[0] / (self.root_cells[0] as f64 * n), self.extent[1] / (self.root_cells[1] as f64 * n)]
    }

    fn cells_at(&self, level: u32) -> [u64; 2] {
        [(self.root_cells[0] as u64) << level, (self.root_cells[1] as u64) << level]
    }

    fn lattice_extent(&self) -> [i64; 2] {
        [self.root_cells[0] as i64 * self.units(), self.root_cells[1] as i64 * self.units()]
    }

    fn lattice_to_point(&self, l: [i64; 2]) -> [f64; 2] {
        let e = self.lattice_extent();
        [
            self.origin[0] + self.extent[0] * (l[0] as f64 / e[0] as f64),
            self.origin[1] + self.extent[1] * (l[1] as f64 / e[1] as f64),
        ]
    }

    fn point_to_lattice(&self, x: [f64; 2]) -> [f64; 2] {
        let e = self.lattice_extent();
        [
            (x[0] - self.origin[0]) / self.extent[0] * e[0] as f64,
            (x[1] - self.origin[1]) / self.extent[1] * e[1] as f64,
        ]
    }

    /// Keys at `level` whose cells overlap the open box `(min, max)`.
    fn keys_overlapping(&self, min: [f64; 2], max: [f64; 2], level: u32) -> Vec<CellKey> {
        let h = self.cell_size(level);
        let n = self.cells_at(level);
        let mut range = [(0u64, 0u64); 2];
        for d in 0..2 {
            let lo = ((min[d] - self.origin[d]) / h[d]).floor().max(0.0);
            let hi = ((max[d] - self.origin[d]) / h[d]).ceil().min(n[d] as f64);
            if hi <= lo {
                return Vec::new();
            }
            range[d] = (lo as u64, hi as u64);
        }
        let mut out = Vec::new();
        for iy in range[1].0..range[1].1 {
            for ix in range[0].0..range[0].1 {
                out.push(CellKey { level, ix, iy });
            }
        }
        out
    }
}

/// Position of a cell in the quadtree: index `(ix, iy)` in the uniform
/// grid of its level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub level: u32,
    pub ix: u64,
    pub iy: u64,
}

impl CellKey {
    pub fn parent(&self) -> Option<CellKey> {
        (self.level > 0).then(|| CellKey { level: self.level - 1, ix: self.ix / 2, iy: self.iy / 2 })
    }

    pub fn ancestor(&self, level: u32) -> CellKey {
        let s = self.level - level;
        CellKey { level, ix: self.ix >> s, iy: self.iy >> s }
    }

    pub fn children(&self) -> [CellKey; 4] {
        let (l, x, y) = (self.level + 1, self.ix * 2, self.iy * 2);
        [
            CellKey { level: l, ix: x, iy: y },
            CellKey { level: l, ix: x + 1, iy: y },
            CellKey { level: l, ix: x, iy: y + 1 },
            CellKey { level: l, ix: x + 1, iy: y + 1 },
        ]
    }

    fn offset(&self, dx: i64, dy: i64, grid: &GridSpec) -> Option<CellKey> {
        let n = grid.cells_at(self.level);
        let x = self.ix as i64 + dx;
        let y = self.iy as i64 + dy;
        (x >= 0 && y >= 0 && (x as u64) < n[0] && (y as u64) < n[1]).then(|| CellKey {
            level: self.level,
            ix: x as u64,
            iy: y as u64,
        })
    }
}

/// A box refined to a fixed level regardless of the solid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementRegion {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub level: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VelocityBc {
    /// Index into the Dirichlet list of the boundary conditions.
    Spec(usize),
    /// Inside or on a fixed obstacle.
    Obstacle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub key: CellKey,
    /// Velocity nodes in local Q2 order.
    pub nodes: [usize; 9],
    /// Pressure nodes at the corners.
    pub pnodes: [usize; 4],
    pub constraints: ElementConstraints,
    /// Global velocity node carried by each local slot. Equal to `nodes`
    /// except at hanging slots, which carry the out-of-element master.
    pub vslots: [usize; 9],
    pub pslots: [usize; 4],
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Cell {
    pub fn size(&self) -> [f64; 2] {
        [self.max[0] - self.min[0], self.max[1] - self.min[1]]
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.min[0] + self.max[0]), 0.5 * (self.min[1] + self.max[1])]
    }

    pub fn geometry(&self) -> CellGeometry<f64> {
        CellGeometry::Quad([
            [self.min[0], self.min[1]],
            [self.max[0], self.min[1]],
            [self.max[0], self.max[1]],
            [self.min[0], self.max[1]],
        ])
    }

    /// Reference coordinates of `x` in this axis-aligned cell.
    pub fn reference(&self, x: [f64; 2]) -> [f64; 2] {
        let c = self.center();
        let h = self.size();
        [2.0 * (x[0] - c[0]) / h[0], 2.0 * (x[1] - c[1]) / h[1]]
    }

    pub fn contains(&self, x: [f64; 2], tol: f64) -> bool {
        x[0] >= self.min[0] - tol && x[0] <= self.max[0] + tol && x[1] >= self.min[1] - tol && x[1] <= self.max[1] + tol
    }

    pub fn has_constraints(&self) -> bool {
        !self.constraints.is_empty()
    }
}

/// A boundary facet: local edge `edge` (bottom, right, top, left) of `cell`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub cell: usize,
    pub edge: usize,
    pub side: Side,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluidMesh {
    pub grid: GridSpec,
    pub boundary: BoundaryConditions,
    pub regions: Vec<RefinementRegion>,
    /// Level of the refinement around the solid, if any.
    pub solid_level: Option<u32>,
    pub cells: Vec<Cell>,
    /// Velocity node coordinates.
    pub vnodes: Vec<[f64; 2]>,
    /// Pressure node coordinates.
    pub pnodes: Vec<[f64; 2]>,
    pub constraints: Vec<HangingConstraint>,
    pub vel_bc: Vec<[Option<VelocityBc>; 2]>,
    /// Pressure nodes with a prescribed zero value (obstacle interiors).
    pub pres_fixed: Vec<bool>,
    pub pinned: Option<usize>,
    split: BTreeSet<CellKey>,
    #[serde(skip)]
    leaf: HashMap<CellKey, usize>,
    vslave: Vec<Option<usize>>,
    pslave: Vec<Option<usize>>,
}

impl FluidMesh {
    pub fn uniform(grid: GridSpec, boundary: BoundaryConditions) -> Result<Self> {
        Self::with_regions(grid, boundary, Vec::new())
    }

    pub fn with_regions(grid: GridSpec, boundary: BoundaryConditions, regions: Vec<RefinementRegion>) -> Result<Self> {
        Self::build(grid, boundary, regions, None, &[])
    }

    fn build(
        grid: GridSpec,
        boundary: BoundaryConditions,
        regions: Vec<RefinementRegion>,
        solid_level: Option<u32>,
        solid_boxes: &[([f64; 2], [f64; 2])],
    ) -> Result<Self> {
        grid.validate()?;
        boundary.validate()?;
        let mut split: HashSet<CellKey> = HashSet::new();
        let mark = |key: CellKey, split: &mut HashSet<CellKey>| {
            let mut k = key;
            while let Some(p) = k.parent() {
                if !split.insert(p) {
                    break;
                }
                k = p;
            }
        };
        for r in &regions {
            if r.level > grid.max_level {
                return Err(Error::Config(format!(
                    "refinement region level {} exceeds max_level {}",
                    r.level, grid.max_level
                )));
            }
            for k in grid.keys_overlapping(r.min, r.max, r.level) {
                mark(k, &mut split);
            }
        }
        if let Some(level) = solid_level {
            for (min, max) in solid_boxes {
                for k in grid.keys_overlapping(*min, *max, level) {
                    mark(k, &mut split);
                }
            }
        }
        balance(&grid, &mut split);
        let split: BTreeSet<CellKey> = split.into_iter().collect();
        let mut mesh = Self {
            grid,
            boundary,
            regions,
            solid_level,
            cells: Vec::new(),
            vnodes: Vec::new(),
            pnodes: Vec::new(),
            constraints: Vec::new(),
            vel_bc: Vec::new(),
            pres_fixed: Vec::new(),
            pinned: None,
            split,
            leaf: HashMap::new(),
            vslave: Vec::new(),
            pslave: Vec::new(),
        };
        mesh.populate()?;
        Ok(mesh)
    }

    fn populate(&mut self) -> Result<()> {
        let grid = self.grid.clone();
        let split: HashSet<CellKey> = self.split.iter().copied().collect();
        let mut leaves = Vec::new();
        for iy in 0..grid.root_cells[1] as u64 {
            for ix in 0..grid.root_cells[0] as u64 {
                collect_leaves(CellKey { level: 0, ix, iy }, &split, &mut leaves);
            }
        }
        let units = grid.units();
        let mut vmap: HashMap<[i64; 2], usize> = HashMap::new();
        let mut pmap: HashMap<[i64; 2], usize> = HashMap::new();
        let mut vlat: Vec<[i64; 2]> = Vec::new();
        let mut plat: Vec<[i64; 2]> = Vec::new();
        let mut cells = Vec::with_capacity(leaves.len());
        for key in leaves {
            let s = units >> key.level;
            let o = [key.ix as i64 * s, key.iy as i64 * s];
            let mut nodes = [0usize; 9];
            for (k, r) in Q2_NODES.iter().enumerate() {
                let l = [o[0] + (r[0] as i64 + 1) * s / 2, o[1] + (r[1] as i64 + 1) * s / 2];
                nodes[k] = *vmap.entry(l).or_insert_with(|| {
                    vlat.push(l);
                    vlat.len() - 1
                });
            }
            let mut pnodes = [0usize; 4];
            for (k, r) in Q2_NODES[..4].iter().enumerate() {
                let l = [o[0] + (r[0] as i64 + 1) * s / 2, o[1] + (r[1] as i64 + 1) * s / 2];
                pnodes[k] = *pmap.entry(l).or_insert_with(|| {
                    plat.push(l);
                    plat.len() - 1
                });
            }
            let min = grid.lattice_to_point(o);
            let max = grid.lattice_to_point([o[0] + s, o[1] + s]);
            cells.push(Cell {
                key,
                nodes,
                pnodes,
                constraints: ElementConstraints::none(),
                vslots: nodes,
                pslots: pnodes,
                min,
                max,
            });
        }
        self.leaf = cells.iter().enumerate().map(|(i, c)| (c.key, i)).collect();
        self.vnodes = vlat.iter().map(|l| grid.lattice_to_point(*l)).collect();
        self.pnodes = plat.iter().map(|l| grid.lattice_to_point(*l)).collect();
        self.cells = cells;

        self.tag_boundary(&vlat, &plat);
        self.build_hanging(&vmap, &pmap)?;
        self.choose_pin();
        Ok(())
    }

    fn tag_boundary(&mut self, vlat: &[[i64; 2]], plat: &[[i64; 2]]) {
        let ext = self.grid.lattice_extent();
        let on_side = |l: [i64; 2], s: Side| match s {
            Side::Left => l[0] == 0,
            Side::Right => l[0] == ext[0],
            Side::Bottom => l[1] == 0,
            Side::Top => l[1] == ext[1],
        };
        let tol = 1e-9 * self.grid.cell_size(self.grid.max_level + 1)[0].min(self.grid.cell_size(self.grid.max_level + 1)[1]);
        self.vel_bc = vec![[None, None]; vlat.len()];
        for (n, l) in vlat.iter().enumerate() {
            for (i, d) in self.boundary.dirichlet.iter().enumerate() {
                if on_side(*l, d.side) {
                    self.vel_bc[n][d.component] = Some(VelocityBc::Spec(i));
                }
            }
            let x = self.vnodes[n];
            if self.boundary.obstacles.iter().any(|o| o.contains(x, tol)) {
                self.vel_bc[n] = [Some(VelocityBc::Obstacle); 2];
            }
        }
        self.pres_fixed = plat
            .iter()
            .enumerate()
            .map(|(n, _)| self.boundary.obstacles.iter().any(|o| o.contains_strictly(self.pnodes[n], tol)))
            .collect();
    }

    /// Finds the leaf equal to or containing `key`, or `None` when `key`
    /// is covered by finer leaves.
    fn leaf_covering(&self, key: CellKey) -> Option<usize> {
        (0..=key.level).rev().find_map(|l| self.leaf.get(&key.ancestor(l)).copied())
    }

    fn build_hanging(&mut self, vmap: &HashMap<[i64; 2], usize>, pmap: &HashMap<[i64; 2], usize>) -> Result<()> {
        let units = self.grid.units();
        self.vslave = vec![None; self.vnodes.len()];
        self.pslave = vec![None; self.pnodes.len()];
        self.constraints.clear();
        // neighbor offset across each local edge
        const ACROSS: [(i64, i64); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];
        for ci in 0..self.cells.len() {
            let key = self.cells[ci].key;
            for (e, (dx, dy)) in ACROSS.iter().enumerate() {
                let Some(nk) = key.offset(*dx, *dy, &self.grid) else { continue };
                let Some(nb) = self.leaf_covering(nk) else { continue };
                let nl = self.cells[nb].key.level;
                if nl >= key.level {
                    continue;
                }
                if nl + 1 < key.level {
                    return Err(Error::Mesh(format!(
                        "cell {ci} at level {} borders cell {nb} at level {nl}: more than one level difference",
                        key.level
                    )));
                }
                let [s_loc, m_loc, e_loc] = Q2_EDGES[e];
                let sc = units >> key.level;
                let lat = |loc: usize| -> [i64; 2] {
                    let r = Q2_NODES[loc];
                    [key.ix as i64 * sc + (r[0] as i64 + 1) * sc / 2, key.iy as i64 * sc + (r[1] as i64 + 1) * sc / 2]
                };
                // the fine corner at the coarse edge midpoint is C
                let coarse = self.cells[nb].key;
                let cs = units >> coarse.level;
                let along = if *dx == 0 { 0 } else { 1 };
                let mid_along = [coarse.ix as i64 * cs, coarse.iy as i64 * cs][along] + cs / 2;
                let (c_loc, a_loc) = if lat(s_loc)[along] == mid_along { (s_loc, e_loc) } else { (e_loc, s_loc) };
                let la = lat(a_loc);
                let lc = lat(c_loc);
                let lb = [2 * lc[0] - la[0], 2 * lc[1] - la[1]];
                let (a, b, c) = (vmap[&la], vmap[&lb], vmap[&lc]);
                let d = self.cells[ci].nodes[m_loc];
                let cell = &self.cells[ci];
                let (pa, pb, pc) = (pmap[&la], pmap[&lb], cell.pnodes[c_loc]);
                let d_fixed = self.vel_bc[d].iter().any(Option::is_some);
                let c_fixed = self.pres_fixed[pc];
                let cell = &mut self.cells[ci];
                if !d_fixed {
                    cell.constraints.velocity.push(LocalVelocityHanging { slave: m_loc, a: a_loc, c: c_loc });
                    cell.vslots[m_loc] = b;
                    if self.vslave[d].is_none() {
                        self.vslave[d] = Some(self.constraints.len());
                        self.constraints.push(HangingConstraint::velocity(d, a, b, c));
                    }
                }
                if !c_fixed {
                    cell.constraints.pressure.push(LocalPressureHanging { slave: c_loc, a: a_loc });
                    cell.pslots[c_loc] = pb;
                    if self.pslave[pc].is_none() {
                        self.pslave[pc] = Some(self.constraints.len());
                        self.constraints.push(HangingConstraint::pressure(pc, pa, pb));
                    }
                }
            }
        }
        Ok(())
    }

    fn choose_pin(&mut self) {
        let target = match self.boundary.pressure_pin {
            Some(p) => Some(p),
            None if self.boundary.encloses() => Some(self.grid.origin),
            None => None,
        };
        self.pinned = target.and_then(|t| {
            (0..self.pnodes.len())
                .filter(|&n| self.pslave[n].is_none() && !self.pres_fixed[n])
                .min_by(|&a, &b| dist2(self.pnodes[a], t).total_cmp(&dist2(self.pnodes[b], t)).then(a.cmp(&b)))
        });
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_velocity_nodes(&self) -> usize {
        self.vnodes.len()
    }

    pub fn num_pressure_nodes(&self) -> usize {
        self.pnodes.len()
    }

    pub fn velocity_slave(&self, node: usize) -> Option<&HangingConstraint> {
        self.vslave[node].map(|i| &self.constraints[i])
    }

    pub fn pressure_slave(&self, node: usize) -> Option<&HangingConstraint> {
        self.pslave[node].map(|i| &self.constraints[i])
    }

    pub fn is_velocity_slave(&self, node: usize) -> bool {
        self.vslave[node].is_some()
    }

    pub fn is_pressure_slave(&self, node: usize) -> bool {
        self.pslave[node].is_some()
    }

    /// The hanging-node constraints of the mesh, velocity and pressure.
    pub fn build_constraints(&self) -> Vec<HangingConstraint> {
        self.constraints.clone()
    }

    pub fn max_level(&self) -> u32 {
        self.cells.iter().map(|c| c.key.level).max().unwrap_or(0)
    }

    pub fn min_cell_size(&self) -> f64 {
        self.grid.cell_size(self.max_level()).iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest level difference between leaves sharing an edge or a vertex.
    pub fn max_neighbor_level_gap(&self) -> u32 {
        let mut gap = 0;
        for c in &self.cells {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let Some(nk) = c.key.offset(dx, dy, &self.grid) else { continue };
                    if let Some(nb) = self.leaf_covering(nk) {
                        gap = gap.max(c.key.level - self.cells[nb].key.level);
                    }
                }
            }
        }
        gap
    }

    pub fn boundary_edges(&self) -> Vec<BoundaryEdge> {
        const ACROSS: [(i64, i64, Side); 4] =
            [(0, -1, Side::Bottom), (1, 0, Side::Right), (0, 1, Side::Top), (-1, 0, Side::Left)];
        let mut out = Vec::new();
        for (i, c) in self.cells.iter().enumerate() {
            for (e, (dx, dy, side)) in ACROSS.iter().enumerate() {
                if c.key.offset(*dx, *dy, &self.grid).is_none() {
                    out.push(BoundaryEdge { cell: i, edge: e, side: *side });
                }
            }
        }
        out
    }

    /// Leaf cell containing `x` and the reference coordinates of `x` in it.
    /// Points on shared edges go to the lowest cell id.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 2])> {
        let tol = 1e-10 * self.grid.extent[0].max(self.grid.extent[1]);
        let g = &self.grid;
        if x[0] < g.origin[0] - tol
            || x[1] < g.origin[1] - tol
            || x[0] > g.origin[0] + g.extent[0] + tol
            || x[1] > g.origin[1] + g.extent[1] + tol
            || !x[0].is_finite()
            || !x[1].is_finite()
        {
            return None;
        }
        let u = g.point_to_lattice(x);
        let eps = 1e-7;
        let mut best: Option<usize> = None;
        for sy in [-eps, eps] {
            for sx in [-eps, eps] {
                if let Some(c) = self.leaf_at_lattice([u[0] + sx, u[1] + sy]) {
                    if self.cells[c].contains(x, tol) && best.is_none_or(|b| c < b) {
                        best = Some(c);
                    }
                }
            }
        }
        best.map(|c| {
            let r = self.cells[c].reference(x);
            (c, [r[0].clamp(-1.0, 1.0), r[1].clamp(-1.0, 1.0)])
        })
    }

    fn leaf_at_lattice(&self, u: [f64; 2]) -> Option<usize> {
        let units = self.grid.units() as f64;
        for level in 0..=self.grid.max_level {
            let n = self.grid.cells_at(level);
            let s = units / (1u64 << level) as f64;
            let ix = (u[0] / s).floor().clamp(0.0, (n[0] - 1) as f64) as u64;
            let iy = (u[1] / s).floor().clamp(0.0, (n[1] - 1) as f64) as u64;
            if let Some(&c) = self.leaf.get(&CellKey { level, ix, iy }) {
                return Some(c);
            }
        }
        None
    }

    /// Velocity at `x` from nodal values.
    pub fn interpolate_velocity(&self, velocity: &[[f64; 2]], x: [f64; 2]) -> Option<[f64; 2]> {
        let (c, r) = self.locate(x)?;
        let phi = q2_values(r[0], r[1]);
        let mut u = [0.0; 2];
        for (k, &n) in self.cells[c].nodes.iter().enumerate() {
            u[0] += phi[k] * velocity[n][0];
            u[1] += phi[k] * velocity[n][1];
        }
        Some(u)
    }

    pub fn interpolate_pressure(&self, pressure: &[f64], x: [f64; 2]) -> Option<f64> {
        let (c, r) = self.locate(x)?;
        let psi = q1_values(r[0], r[1]);
        Some(self.cells[c].pnodes.iter().zip(psi).map(|(&n, w)| w * pressure[n]).sum())
    }

    /// Overwrites hanging slave values with their constrained values.
    pub fn apply_constraints(&self, velocity: &mut [[f64; 2]], pressure: &mut [f64]) {
        for h in &self.constraints {
            match h.kind {
                crate::hanging::FieldKind::Velocity => {
                    for comp in 0..2 {
                        velocity[h.slave][comp] = h.evaluate(|m| velocity[m][comp]);
                    }
                }
                crate::hanging::FieldKind::Pressure => {
                    pressure[h.slave] = h.evaluate(|m| pressure[m]);
                }
            }
        }
    }

    /// Prescribed value of velocity component `comp` at node `n` at time
    /// `t`, or `None` if the component is free.
    pub fn dirichlet_value(&self, n: usize, comp: usize, t: f64) -> Option<f64> {
        self.vel_bc[n][comp].map(|bc| match bc {
            VelocityBc::Spec(i) => self.boundary.dirichlet[i].value(self.vnodes[n], t),
            VelocityBc::Obstacle => 0.0,
        })
    }

    pub fn apply_dirichlet(&self, velocity: &mut [[f64; 2]], t: f64) {
        for (n, u) in velocity.iter_mut().enumerate() {
            for (comp, v) in u.iter_mut().enumerate() {
                if let Some(g) = self.dirichlet_value(n, comp, t) {
                    *v = g;
                }
            }
        }
    }

    /// Zeroes fixed pressure nodes.
    pub fn apply_pressure_fixes(&self, pressure: &mut [f64]) {
        for (n, p) in pressure.iter_mut().enumerate() {
            if self.pres_fixed[n] || Some(n) == self.pinned {
                *p = 0.0;
            }
        }
    }

    /// Interpolates fields given on `old` onto this mesh, then restores
    /// Dirichlet data and hanging constraints.
    pub fn transfer_fields(
        &self,
        old: &FluidMesh,
        velocity: &[[f64; 2]],
        pressure: &[f64],
        t: f64,
    ) -> Result<(Vec<[f64; 2]>, Vec<f64>)> {
        let mut v = Vec::with_capacity(self.vnodes.len());
        for (n, x) in self.vnodes.iter().enumerate() {
            v.push(old.interpolate_velocity(velocity, *x).ok_or_else(|| {
                Error::Mesh(format!("velocity node {n} at {x:?} not found on previous mesh"))
            })?);
        }
        let mut p = Vec::with_capacity(self.pnodes.len());
        for (n, x) in self.pnodes.iter().enumerate() {
            p.push(old.interpolate_pressure(pressure, *x).ok_or_else(|| {
                Error::Mesh(format!("pressure node {n} at {x:?} not found on previous mesh"))
            })?);
        }
        self.apply_dirichlet(&mut v, t);
        self.apply_constraints(&mut v, &mut p);
        Ok((v, p))
    }

    /// Level at which fluid cells reach the requested area ratio to the
    /// mean solid element area.
    pub fn level_for_ratio(&self, solid_area: f64, target_ratio: f64) -> u32 {
        let h0 = self.grid.cell_size(0);
        let a0 = h0[0] * h0[1];
        let exact = (a0 / (target_ratio * solid_area)).ln() / 4f64.ln();
        exact.round().max(0.0) as u32
    }

    /// Refines cells overlapping the solid (with a one-cell halo) until the
    /// local fluid/solid element area ratio is near `target_ratio`.
    pub fn refine_near_solid(&self, sm: &SolidMesh, target_ratio: f64) -> Result<FluidMesh> {
        let (lo, hi) = AREA_RATIO_RANGE;
        if !(lo..=hi).contains(&target_ratio) {
            return Err(Error::Config(format!(
                "area ratio {target_ratio} outside the stable range [{lo}, {hi}]"
            )));
        }
        if sm.num_triangles() == 0 {
            return Ok(self.clone());
        }
        let level = self.level_for_ratio(sm.mean_area(), target_ratio);
        if level > self.grid.max_level {
            let (c, _) = self
                .locate(sm.coords[sm.triangles[0][0]])
                .ok_or_else(|| Error::Mesh("solid lies outside the fluid domain".into()))?;
            return Err(Error::Mesh(format!(
                "cell {c} would need level {level} to reach area ratio {target_ratio}, above max_level {}",
                self.grid.max_level
            )));
        }
        self.refine_solid_to_level(sm, level)
    }

    /// Rebuilds the mesh with cells around the solid at `level`.
    pub fn refine_solid_to_level(&self, sm: &SolidMesh, level: u32) -> Result<FluidMesh> {
        let h = self.grid.cell_size(level);
        let boxes: Vec<_> = sm
            .triangle_bounds()
            .into_iter()
            .map(|(min, max)| ([min[0] - h[0], min[1] - h[1]], [max[0] + h[0], max[1] + h[1]]))
            .collect();
        Self::build(self.grid.clone(), self.boundary.clone(), self.regions.clone(), Some(level), &boxes)
    }

    /// True when some solid triangle touches a leaf coarser than the solid
    /// refinement level.
    pub fn solid_left_refined_region(&self, sm: &SolidMesh) -> bool {
        let Some(level) = self.solid_level else { return false };
        sm.triangle_bounds().into_iter().any(|(min, max)| {
            self.grid.keys_overlapping(min, max, level).into_iter().any(|k| match self.leaf_covering(k) {
                Some(c) => self.cells[c].key.level < level,
                None => false,
            })
        })
    }

    /// Fraction of the cell sizes.
    pub fn cell_area_at(&self, level: u32) -> f64 {
        let h = self.grid.cell_size(level);
        h[0] * h[1]
    }

    /// Rebuilds lookup tables after deserialization.
    pub fn reindex(&mut self) {
        self.leaf = self.cells.iter().enumerate().map(|(i, c)| (c.key, i)).collect();
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn collect_leaves(key: CellKey, split: &HashSet<CellKey>, out: &mut Vec<CellKey>) {
    if split.contains(&key) {
        for c in key.children() {
            collect_leaves(c, split, out);
        }
    } else {
        out.push(key);
    }
}

/// Splits cells until leaves sharing an edge or a vertex differ by at most
/// one level.
fn balance(grid: &GridSpec, split: &mut HashSet<CellKey>) {
    loop {
        let mut leaves = Vec::new();
        for iy in 0..grid.root_cells[1] as u64 {
            for ix in 0..grid.root_cells[0] as u64 {
                collect_leaves(CellKey { level: 0, ix, iy }, split, &mut leaves);
            }
        }
        let mut added = Vec::new();
        for key in leaves.iter().filter(|k| k.level >= 2) {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let Some(n) = key.offset(dx, dy, grid) else { continue };
                    let need = n.ancestor(key.level - 2);
                    if !split.contains(&need) {
                        added.push(need);
                    }
                }
            }
        }
        if added.is_empty() {
            return;
        }
        for k in added {
            let mut k = k;
            while split.insert(k) {
                match k.parent() {
                    Some(p) => k = p,
                    None => break,
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hanging::FieldKind;

    fn unit_grid(n: usize, max_level: u32) -> GridSpec {
        GridSpec { origin: [0.0, 0.0], extent: [1.0, 1.0], root_cells: [n, n], max_level }
    }

    #[test]
    fn uniform_counts() {
        let m = FluidMesh::uniform(unit_grid(4, 2), BoundaryConditions::default()).unwrap();
        assert_eq!(m.num_cells(), 16);
        assert_eq!(m.num_velocity_nodes(), 81);
        assert_eq!(m.num_pressure_nodes(), 25);
        assert!(m.build_constraints().is_empty());
        assert_eq!(m.max_neighbor_level_gap(), 0);
    }

    #[test]
    fn one_refined_cell_slaves_the_shared_edge() {
        // two root cells side by side, the left one refined
        let grid = GridSpec { origin: [0.0, 0.0], extent: [2.0, 1.0], root_cells: [2, 1], max_level: 1 };
        let region = RefinementRegion { min: [0.1, 0.1], max: [0.9, 0.9], level: 1 };
        let m = FluidMesh::with_regions(grid, BoundaryConditions::default(), vec![region]).unwrap();
        assert_eq!(m.num_cells(), 5);
        let vel: Vec<_> = m.constraints.iter().filter(|h| h.kind == FieldKind::Velocity).collect();
        let pre: Vec<_> = m.constraints.iter().filter(|h| h.kind == FieldKind::Pressure).collect();
        assert_eq!(vel.len(), 2);
        assert_eq!(pre.len(), 1);
        let mut slaves: Vec<[f64; 2]> = vel.iter().map(|h| m.vnodes[h.slave]).collect();
        slaves.sort_by(|a, b| a[1].total_cmp(&b[1]));
        assert_eq!(slaves, vec![[1.0, 0.25], [1.0, 0.75]]);
        assert_eq!(m.pnodes[pre[0].slave], [1.0, 0.5]);
        // roles: A is the coarse corner on the slave's half, C the midpoint
        let low = vel.iter().find(|h| m.vnodes[h.slave][1] == 0.25).unwrap();
        assert_eq!(m.vnodes[low.masters[0]], [1.0, 0.0]);
        assert_eq!(m.vnodes[low.masters[1]], [1.0, 1.0]);
        assert_eq!(m.vnodes[low.masters[2]], [1.0, 0.5]);
    }

    #[test]
    fn constrained_linear_field_is_exact() {
        let grid = GridSpec { origin: [0.0, 0.0], extent: [2.0, 1.0], root_cells: [2, 1], max_level: 1 };
        let region = RefinementRegion { min: [0.1, 0.1], max: [0.9, 0.9], level: 1 };
        let m = FluidMesh::with_regions(grid, BoundaryConditions::default(), vec![region]).unwrap();
        let f = |x: [f64; 2]| 0.3 + 1.7 * x[0] - 2.1 * x[1];
        let mut v: Vec<[f64; 2]> = m.vnodes.iter().map(|x| [f(*x), -f(*x)]).collect();
        let mut p: Vec<f64> = m.pnodes.iter().map(|x| f(*x)).collect();
        for h in &m.constraints {
            match h.kind {
                FieldKind::Velocity => v[h.slave] = [99.0, 99.0],
                FieldKind::Pressure => p[h.slave] = 99.0,
            }
        }
        m.apply_constraints(&mut v, &mut p);
        for (n, x) in m.vnodes.iter().enumerate() {
            assert!((v[n][0] - f(*x)).abs() < 1e-13);
        }
        for (n, x) in m.pnodes.iter().enumerate() {
            assert!((p[n] - f(*x)).abs() < 1e-13);
        }
    }

    #[test]
    fn deep_region_is_balanced() {
        let region = RefinementRegion { min: [0.49, 0.49], max: [0.51, 0.51], level: 5 };
        let m = FluidMesh::with_regions(unit_grid(2, 5), BoundaryConditions::default(), vec![region]).unwrap();
        assert_eq!(m.max_level(), 5);
        assert_eq!(m.max_neighbor_level_gap(), 1);
        // every master is a free node, never another slave
        for h in &m.constraints {
            for &mm in &h.masters {
                match h.kind {
                    FieldKind::Velocity => assert!(!m.is_velocity_slave(mm)),
                    FieldKind::Pressure => assert!(!m.is_pressure_slave(mm)),
                }
            }
        }
    }

    #[test]
    fn locate_centroid_and_edges() {
        let m = FluidMesh::uniform(unit_grid(4, 1), BoundaryConditions::default()).unwrap();
        let (c, r) = m.locate([0.375, 0.625]).unwrap();
        assert_eq!(r, [0.0, 0.0]);
        assert!(m.cells[c].contains([0.375, 0.625], 0.0));
        // shared edge x = 0.5 between cells; lowest id wins
        let (c, _) = m.locate([0.5, 0.1]).unwrap();
        let ids: Vec<usize> =
            (0..m.num_cells()).filter(|&i| m.cells[i].contains([0.5, 0.1], 1e-14)).collect();
        assert_eq!(c, *ids.iter().min().unwrap());
        assert!(m.locate([1.5, 0.5]).is_none());
    }

    #[test]
    fn obstacle_tags_and_pressure_fix() {
        let bc = BoundaryConditions {
            obstacles: vec![crate::types::Obstacle { min: [0.25, 0.25], max: [0.75, 0.75] }],
            ..Default::default()
        };
        let m = FluidMesh::uniform(unit_grid(4, 1), bc).unwrap();
        let inside = m.vnodes.iter().position(|x| *x == [0.5, 0.5]).unwrap();
        assert_eq!(m.vel_bc[inside], [Some(VelocityBc::Obstacle); 2]);
        let p = m.pnodes.iter().position(|x| *x == [0.5, 0.5]).unwrap();
        assert!(m.pres_fixed[p]);
        let edge = m.pnodes.iter().position(|x| *x == [0.25, 0.5]).unwrap();
        assert!(!m.pres_fixed[edge]);
    }

    #[test]
    fn pin_only_when_enclosed() {
        let mut bc = BoundaryConditions::default();
        for s in Side::ALL {
            bc.dirichlet.extend(crate::types::DirichletSpec::no_slip(s));
        }
        let m = FluidMesh::uniform(unit_grid(2, 1), bc.clone()).unwrap();
        assert_eq!(m.pnodes[m.pinned.unwrap()], [0.0, 0.0]);
        bc.dirichlet.retain(|d| d.side != Side::Right);
        let m = FluidMesh::uniform(unit_grid(2, 1), bc).unwrap();
        assert!(m.pinned.is_none());
    }

    #[test]
    fn serde_round_trip_with_reindex() {
        let region = RefinementRegion { min: [0.1, 0.1], max: [0.3, 0.3], level: 2 };
        let m = FluidMesh::with_regions(unit_grid(2, 2), BoundaryConditions::default(), vec![region]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let mut back: FluidMesh = serde_json::from_str(&s).unwrap();
        back.reindex();
        assert_eq!(back, m);
    }
}
