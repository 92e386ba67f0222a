//! Global equation numbering and element scatter with Dirichlet
//! elimination.
//!
//! Velocity unknowns come first (node-major, two components per node),
//! pressure unknowns after them. Hanging slaves never own an equation: the
//! element slots that would reference them carry their out-of-element
//! master instead.

use crate::dense::DenseMatrix;
use crate::mesh::{Cell, FluidMesh};
use crate::sparse::Triplets;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Dof {
    Free(usize),
    Fixed(f64),
    Slave,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub vel: Vec<[Dof; 2]>,
    pub pres: Vec<Dof>,
    pub n_vel: usize,
    pub n_pres: usize,
}

impl DofMap {
    /// Velocity and pressure numbering with Dirichlet data at time `t`,
    /// fixed obstacle pressures and the pressure pin.
    pub fn new(fm: &FluidMesh, t: f64) -> Self {
        Self::build(fm, |n, c| fm.dirichlet_value(n, c, t), true)
    }

    /// Velocity-only numbering with Dirichlet nodes fixed to `values`.
    pub fn velocity_only(fm: &FluidMesh, values: &[[f64; 2]]) -> Self {
        let mut m = Self::build(fm, |n, c| fm.vel_bc[n][c].map(|_| values[n][c]), false);
        m.pres = vec![Dof::Slave; fm.num_pressure_nodes()];
        m.n_pres = 0;
        m
    }

    /// Every non-slave node free; no boundary data.
    pub fn unconstrained(fm: &FluidMesh) -> Self {
        let mut n_vel = 0;
        let vel = (0..fm.num_velocity_nodes())
            .map(|n| {
                if fm.is_velocity_slave(n) {
                    [Dof::Slave; 2]
                } else {
                    let d = [Dof::Free(n_vel), Dof::Free(n_vel + 1)];
                    n_vel += 2;
                    d
                }
            })
            .collect();
        let mut n_pres = 0;
        let pres = (0..fm.num_pressure_nodes())
            .map(|n| {
                if fm.is_pressure_slave(n) {
                    Dof::Slave
                } else {
                    n_pres += 1;
                    Dof::Free(n_vel + n_pres - 1)
                }
            })
            .collect();
        Self { vel, pres, n_vel, n_pres }
    }

    fn build(fm: &FluidMesh, fixed: impl Fn(usize, usize) -> Option<f64>, with_pressure: bool) -> Self {
        let mut n_vel = 0;
        let mut vel = Vec::with_capacity(fm.num_velocity_nodes());
        for n in 0..fm.num_velocity_nodes() {
            let mut d = [Dof::Slave; 2];
            for (c, dc) in d.iter_mut().enumerate() {
                *dc = match fixed(n, c) {
                    Some(g) => Dof::Fixed(g),
                    None if fm.is_velocity_slave(n) => Dof::Slave,
                    None => {
                        n_vel += 1;
                        Dof::Free(n_vel - 1)
                    }
                };
            }
            vel.push(d);
        }
        let mut n_pres = 0;
        let mut pres = Vec::with_capacity(fm.num_pressure_nodes());
        if with_pressure {
            for n in 0..fm.num_pressure_nodes() {
                pres.push(if fm.pres_fixed[n] || fm.pinned == Some(n) {
                    Dof::Fixed(0.0)
                } else if fm.is_pressure_slave(n) {
                    Dof::Slave
                } else {
                    n_pres += 1;
                    Dof::Free(n_vel + n_pres - 1)
                });
            }
        }
        Self { vel, pres, n_vel, n_pres }
    }

    pub fn len(&self) -> usize {
        self.n_vel + self.n_pres
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Element DOFs in the order `(u1 slots, u2 slots, p slots)`.
    pub fn cell_dofs(&self, cell: &Cell, with_pressure: bool) -> Vec<Dof> {
        let mut d = Vec::with_capacity(22);
        for c in 0..2 {
            d.extend(cell.vslots.iter().map(|&n| self.vel[n][c]));
        }
        if with_pressure {
            d.extend(cell.pslots.iter().map(|&n| self.pres[n]));
        }
        d
    }

    /// Expands a solution vector into nodal fields, filling fixed values
    /// and hanging slaves.
    pub fn expand(&self, fm: &FluidMesh, x: &[f64]) -> (Vec<[f64; 2]>, Vec<f64>) {
        let val = |d: Dof| match d {
            Dof::Free(i) => x[i],
            Dof::Fixed(g) => g,
            Dof::Slave => 0.0,
        };
        let mut v: Vec<[f64; 2]> = self.vel.iter().map(|d| [val(d[0]), val(d[1])]).collect();
        let mut p: Vec<f64> = self.pres.iter().map(|&d| val(d)).collect();
        fm.apply_constraints(&mut v, &mut p);
        (v, p)
    }

    /// Restricts nodal fields to the free unknowns.
    pub fn restrict(&self, velocity: &[[f64; 2]], pressure: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.len()];
        for (n, d) in self.vel.iter().enumerate() {
            for c in 0..2 {
                if let Dof::Free(i) = d[c] {
                    x[i] = velocity[n][c];
                }
            }
        }
        for (n, d) in self.pres.iter().enumerate() {
            if let Dof::Free(i) = d {
                x[*i] = pressure[n];
            }
        }
        x
    }
}

/// Adds an element vector into a reduced global vector.
pub fn scatter_vector(dofs: &[Dof], fe: &[f64], out: &mut [f64]) {
    for (d, v) in dofs.iter().zip(fe) {
        if let Dof::Free(r) = *d {
            out[r] += v;
        }
    }
}

/// Scatters element contributions into a reduced system.
#[derive(Clone, Debug)]
pub struct Assembler {
    pub matrix: Triplets,
    pub rhs: Vec<f64>,
}

impl Assembler {
    pub fn new(n: usize) -> Self {
        Self { matrix: Triplets::new(n, n), rhs: vec![0.0; n] }
    }

    /// Adds `k` (rows = test, columns = trial) and `f`. Columns at fixed
    /// DOFs move to the right-hand side.
    pub fn add(&mut self, dofs: &[Dof], k: Option<&DenseMatrix<f64>>, f: Option<&[f64]>) {
        for (i, di) in dofs.iter().enumerate() {
            let Dof::Free(r) = *di else { continue };
            if let Some(f) = f {
                self.rhs[r] += f[i];
            }
            if let Some(k) = k {
                for (j, dj) in dofs.iter().enumerate() {
                    let v = k[(i, j)];
                    if v == 0.0 {
                        continue;
                    }
                    match *dj {
                        Dof::Free(c) => self.matrix.push(r, c, v),
                        Dof::Fixed(g) => self.rhs[r] -= v * g,
                        Dof::Slave => debug_assert!(false, "slave DOF reached the scatter"),
                    }
                }
            }
        }
    }

    /// Adds a single weighted entry `w * v` in row `ri`, column `cj`.
    #[inline]
    pub fn add_entry(&mut self, ri: Dof, cj: Dof, v: f64) {
        let Dof::Free(r) = ri else { return };
        match cj {
            Dof::Free(c) => self.matrix.push(r, c, v),
            Dof::Fixed(g) => self.rhs[r] -= v * g,
            Dof::Slave => debug_assert!(false, "slave DOF reached the scatter"),
        }
    }

    #[inline]
    pub fn add_rhs(&mut self, ri: Dof, v: f64) {
        if let Dof::Free(r) = ri {
            self.rhs[r] += v;
        }
    }
}
