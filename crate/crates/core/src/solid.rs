//! Updated-Lagrangian P1 solid: geometry, stress state and element
//! operators of the incompressible neo-Hookean model.
//!
//! Stresses are stored per triangle (one-point rule). With linear
//! triangles every gradient is constant per element, so the stiffness and
//! load integrals are exact with that rule; the mass matrix is integrated
//! exactly in closed form.

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

pub type Mat2 = [[f64; 2]; 2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolidMaterial {
    pub density: f64,
    pub shear_modulus: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolidMesh {
    pub reference: Vec<[f64; 2]>,
    pub coords: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    /// Deviatoric stress per triangle.
    pub stress: Vec<Mat2>,
    pub reference_area: Vec<f64>,
    /// Body index per triangle.
    pub body: Vec<usize>,
    pub materials: Vec<SolidMaterial>,
}

pub fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Constant P1 gradients of the three vertex functions.
pub fn p1_gradients(x: [[f64; 2]; 3]) -> Result<([[f64; 2]; 3], f64), f64> {
    let area = signed_area(x[0], x[1], x[2]);
    if !(area > 0.0) {
        return Err(area);
    }
    let s = 0.5 / area;
    Ok((
        [
            [(x[1][1] - x[2][1]) * s, (x[2][0] - x[1][0]) * s],
            [(x[2][1] - x[0][1]) * s, (x[0][0] - x[2][0]) * s],
            [(x[0][1] - x[1][1]) * s, (x[1][0] - x[0][0]) * s],
        ],
        area,
    ))
}

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// Stress after one step given the velocity gradient `g[i][k] = du_i/dx_k`
/// of the new velocity on the current configuration:
///
/// ```text
/// tau' = mu dt (G + Gᵀ + dt G Gᵀ) + tau + dt² G tau Gᵀ + dt (G tau + tau Gᵀ)
/// ```
pub fn update_stress(tau: &Mat2, g: &Mat2, dt: f64, mu: f64) -> Mat2 {
    let ggt = mul(g, &transpose(g));
    let gt = mul(g, tau);
    let gtgt = mul(&gt, &transpose(g));
    let entry = |i: usize, j: usize| {
        mu * dt * (g[i][j] + g[j][i] + dt * ggt[i][j])
            + tau[i][j]
            + dt * dt * gtgt[i][j]
            + dt * (gt[i][j] + gt[j][i])
    };
    let off = entry(0, 1);
    [[entry(0, 0), off], [off, entry(1, 1)]]
}

/// Linear part of the stress update in the new gradient `g`, linearized
/// about the old gradient `gn`.
pub fn linearized_stress(tau: &Mat2, g: &Mat2, gn: &Mat2, dt: f64, mu: f64) -> Mat2 {
    let a = mul(g, &transpose(gn));
    let b = mul(gn, &transpose(g));
    let c = mul(&mul(g, tau), &transpose(gn));
    let d = mul(&mul(gn, tau), &transpose(g));
    let e = mul(g, tau);
    let f = mul(tau, &transpose(g));
    let mut t = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            t[i][j] = mu * dt * (g[i][j] + g[j][i])
                + mu * dt * dt * (a[i][j] + b[i][j])
                + dt * dt * (c[i][j] + d[i][j])
                + dt * (e[i][j] + f[i][j]);
        }
    }
    t
}

/// Stress-independent remainder of the linearization:
/// `tau - mu dt² Gn Gnᵀ - dt² Gn tau Gnᵀ`.
pub fn stress_remainder(tau: &Mat2, gn: &Mat2, dt: f64, mu: f64) -> Mat2 {
    let a = mul(gn, &transpose(gn));
    let b = mul(&mul(gn, tau), &transpose(gn));
    let mut r = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = tau[i][j] - mu * dt * dt * a[i][j] - dt * dt * b[i][j];
        }
    }
    r
}

/// Element stiffness, 6x6 with local index `component * 3 + vertex`; rows
/// are test functions and columns trial functions.
pub fn element_stiffness(grads: &[[f64; 2]; 3], area: f64, tau: &Mat2, gn: &Mat2, dt: f64, mu: f64) -> DenseMatrix<f64> {
    let mut k = DenseMatrix::zeros(6, 6);
    for c in 0..2 {
        for b in 0..3 {
            let mut g = [[0.0; 2]; 2];
            g[c] = grads[b];
            let t = linearized_stress(tau, &g, gn, dt, mu);
            for d in 0..2 {
                for m in 0..3 {
                    k[(d * 3 + m, c * 3 + b)] = area * (t[d][0] * grads[m][0] + t[d][1] * grads[m][1]);
                }
            }
        }
    }
    k
}

/// Consistent P1 mass scaled by the density deficit `rho_s - rho_f`.
pub fn element_mass(area: f64, density_deficit: f64) -> DenseMatrix<f64> {
    let mut m = DenseMatrix::zeros(6, 6);
    for c in 0..2 {
        for a in 0..3 {
            for b in 0..3 {
                let w = if a == b { 2.0 } else { 1.0 };
                m[(c * 3 + a, c * 3 + b)] = density_deficit * area * w / 12.0;
            }
        }
    }
    m
}

/// Element load: buoyancy-corrected gravity plus the explicit stress
/// remainder.
pub fn element_load(
    grads: &[[f64; 2]; 3],
    area: f64,
    tau: &Mat2,
    gn: &Mat2,
    dt: f64,
    mu: f64,
    density_deficit: f64,
    gravity: [f64; 2],
) -> [f64; 6] {
    let r = stress_remainder(tau, gn, dt, mu);
    let mut f = [0.0; 6];
    for d in 0..2 {
        for m in 0..3 {
            f[d * 3 + m] = density_deficit * gravity[d] * area / 3.0
                - area * (r[d][0] * grads[m][0] + r[d][1] * grads[m][1]);
        }
    }
    f
}

impl SolidMesh {
    pub fn empty() -> Self {
        Self {
            reference: Vec::new(),
            coords: Vec::new(),
            triangles: Vec::new(),
            stress: Vec::new(),
            reference_area: Vec::new(),
            body: Vec::new(),
            materials: Vec::new(),
        }
    }

    /// Builds a mesh from nodes and triangles, reorienting triangles
    /// counter-clockwise.
    pub fn from_parts(nodes: Vec<[f64; 2]>, mut triangles: Vec<[usize; 3]>, material: SolidMaterial) -> Result<Self> {
        let mut areas = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&n| n >= nodes.len()) {
                return Err(Error::Mesh(format!("triangle {t} references a missing node")));
            }
            let mut a = signed_area(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if a < 0.0 {
                tri.swap(1, 2);
                a = -a;
            }
            if a <= 0.0 {
                return Err(Error::Mesh(format!("triangle {t} is degenerate")));
            }
            areas.push(a);
        }
        let n = triangles.len();
        Ok(Self {
            reference: nodes.clone(),
            coords: nodes,
            triangles,
            stress: vec![[[0.0; 2]; 2]; n],
            reference_area: areas,
            body: vec![0; n],
            materials: vec![material],
        })
    }

    /// Appends another body, keeping its material.
    pub fn merge(&mut self, other: SolidMesh) {
        let off = self.coords.len();
        let boff = self.materials.len();
        self.reference.extend(other.reference);
        self.coords.extend(other.coords);
        self.triangles.extend(other.triangles.iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
        self.stress.extend(other.stress);
        self.reference_area.extend(other.reference_area);
        self.body.extend(other.body.iter().map(|b| b + boff));
        self.materials.extend(other.materials);
    }

    /// Structured rectangle with `nx * ny` quads split along alternating
    /// diagonals.
    pub fn rectangle(min: [f64; 2], max: [f64; 2], nx: usize, ny: usize, material: SolidMaterial) -> Result<Self> {
        if nx == 0 || ny == 0 || !(max[0] > min[0] && max[1] > min[1]) {
            return Err(Error::Config("rectangle solid needs positive size and divisions".into()));
        }
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([
                    min[0] + (max[0] - min[0]) * i as f64 / nx as f64,
                    min[1] + (max[1] - min[1]) * j as f64 / ny as f64,
                ]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut tris = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                if (i + j) % 2 == 0 {
                    tris.push([a, b, c]);
                    tris.push([a, c, d]);
                } else {
                    tris.push([a, b, d]);
                    tris.push([b, c, d]);
                }
            }
        }
        Self::from_parts(nodes, tris, material)
    }

    /// Disc meshed by concentric rings; ring `k` carries `6k` nodes.
    pub fn disc(center: [f64; 2], radius: f64, rings: usize, material: SolidMaterial) -> Result<Self> {
        if rings == 0 || !(radius > 0.0) {
            return Err(Error::Config("disc solid needs a positive radius and at least one ring".into()));
        }
        let mut layers: Vec<Vec<[f64; 2]>> = vec![vec![center]];
        for k in 1..=rings {
            let r = radius * k as f64 / rings as f64;
            let n = 6 * k;
            layers.push(
                (0..n)
                    .map(|j| {
                        let a = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                        [center[0] + r * a.cos(), center[1] + r * a.sin()]
                    })
                    .collect(),
            );
        }
        Self::from_layers(center, layers, material)
    }

    /// Convex polygon meshed by scaled copies of its boundary; layer `k`
    /// subdivides every edge into `k` segments.
    pub fn polygon(vertices: &[[f64; 2]], layers: usize, material: SolidMaterial) -> Result<Self> {
        if vertices.len() < 3 || layers == 0 {
            return Err(Error::Config("polygon solid needs at least 3 vertices and one layer".into()));
        }
        let n = vertices.len() as f64;
        let c = [
            vertices.iter().map(|v| v[0]).sum::<f64>() / n,
            vertices.iter().map(|v| v[1]).sum::<f64>() / n,
        ];
        let mut rings: Vec<Vec<[f64; 2]>> = vec![vec![c]];
        for k in 1..=layers {
            let s = k as f64 / layers as f64;
            let scaled: Vec<[f64; 2]> =
                vertices.iter().map(|v| [c[0] + s * (v[0] - c[0]), c[1] + s * (v[1] - c[1])]).collect();
            let mut ring = Vec::new();
            for e in 0..scaled.len() {
                let p = scaled[e];
                let q = scaled[(e + 1) % scaled.len()];
                for j in 0..k {
                    let t = j as f64 / k as f64;
                    ring.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
                }
            }
            rings.push(ring);
        }
        Self::from_layers(c, rings, material)
    }

    /// Regular `n`-gon inscribed in a circle.
    pub fn regular_polygon(center: [f64; 2], radius: f64, sides: usize, layers: usize, material: SolidMaterial) -> Result<Self> {
        let v: Vec<[f64; 2]> = (0..sides)
            .map(|j| {
                let a = 2.0 * std::f64::consts::PI * j as f64 / sides as f64;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            })
            .collect();
        Self::polygon(&v, layers, material)
    }

    /// Stitches star-shaped rings around `center` by sweeping in angle.
    fn from_layers(center: [f64; 2], layers: Vec<Vec<[f64; 2]>>, material: SolidMaterial) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut ids: Vec<Vec<usize>> = Vec::new();
        for layer in &layers {
            ids.push((nodes.len()..nodes.len() + layer.len()).collect());
            nodes.extend(layer.iter().copied());
        }
        let angle = |p: [f64; 2], start: f64| {
            let mut a = (p[1] - center[1]).atan2(p[0] - center[0]) - start;
            while a < -1e-12 {
                a += 2.0 * std::f64::consts::PI;
            }
            a
        };
        let mut tris = Vec::new();
        for w in 1..layers.len() {
            let inner = &ids[w - 1];
            let outer = &ids[w];
            if inner.len() == 1 {
                for j in 0..outer.len() {
                    tris.push([inner[0], outer[j], outer[(j + 1) % outer.len()]]);
                }
                continue;
            }
            let start = {
                let p = nodes[outer[0]];
                (p[1] - center[1]).atan2(p[0] - center[0])
            };
            let full = 2.0 * std::f64::consts::PI;
            let ang_in = |i: usize| if i == inner.len() { full } else { angle(nodes[inner[i]], start) };
            let ang_out = |j: usize| if j == outer.len() { full } else { angle(nodes[outer[j]], start) };
            // rotate inner so it starts at the first node not behind outer[0]
            let (mut i, mut j) = (0usize, 0usize);
            let ni = inner.len();
            let no = outer.len();
            let inner_at = |i: usize| inner[i % ni];
            let outer_at = |j: usize| outer[j % no];
            while i < ni || j < no {
                let advance_inner = if i == ni {
                    false
                } else if j == no {
                    true
                } else {
                    ang_in(i + 1) <= ang_out(j + 1)
                };
                if advance_inner {
                    tris.push([inner_at(i), outer_at(j), inner_at(i + 1)]);
                    i += 1;
                } else {
                    tris.push([inner_at(i), outer_at(j), outer_at(j + 1)]);
                    j += 1;
                }
            }
        }
        Self::from_parts(nodes, tris, material)
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn material(&self, t: usize) -> &SolidMaterial {
        &self.materials[self.body[t]]
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.coords[a], self.coords[b], self.coords[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let x = self.triangle_coords(t);
        signed_area(x[0], x[1], x[2])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn mean_area(&self) -> f64 {
        self.total_area() / self.num_triangles().max(1) as f64
    }

    pub fn triangle_bounds(&self) -> Vec<([f64; 2], [f64; 2])> {
        (0..self.num_triangles())
            .map(|t| {
                let x = self.triangle_coords(t);
                let mut lo = x[0];
                let mut hi = x[0];
                for p in &x[1..] {
                    for d in 0..2 {
                        lo[d] = lo[d].min(p[d]);
                        hi[d] = hi[d].max(p[d]);
                    }
                }
                (lo, hi)
            })
            .collect()
    }

    /// Gradients and area on the current configuration.
    pub fn gradients(&self, t: usize) -> Result<([[f64; 2]; 3], f64)> {
        p1_gradients(self.triangle_coords(t)).map_err(|area| Error::InvertedTriangle { triangle: t, area })
    }

    /// Per-triangle velocity gradient `g[i][k] = du_i/dx_k`.
    pub fn velocity_gradients(&self, velocity: &[[f64; 2]]) -> Result<Vec<Mat2>> {
        if velocity.len() != self.num_nodes() {
            return Err(Error::Dimension { what: "solid velocity".into(), expected: self.num_nodes(), got: velocity.len() });
        }
        (0..self.num_triangles())
            .map(|t| {
                let (grads, _) = self.gradients(t)?;
                let mut g = [[0.0; 2]; 2];
                for (a, &n) in self.triangles[t].iter().enumerate() {
                    for i in 0..2 {
                        for k in 0..2 {
                            g[i][k] += velocity[n][i] * grads[a][k];
                        }
                    }
                }
                Ok(g)
            })
            .collect()
    }

    /// Element stiffness matrices on the current configuration.
    pub fn assemble_stiffness(&self, grad_un: &[Mat2], dt: f64) -> Result<Vec<DenseMatrix<f64>>> {
        (0..self.num_triangles())
            .map(|t| {
                let (grads, area) = self.gradients(t)?;
                Ok(element_stiffness(&grads, area, &self.stress[t], &grad_un[t], dt, self.material(t).shear_modulus))
            })
            .collect()
    }

    pub fn assemble_mass(&self, fluid_density: f64) -> Result<Vec<DenseMatrix<f64>>> {
        (0..self.num_triangles())
            .map(|t| {
                let (_, area) = self.gradients(t)?;
                Ok(element_mass(area, self.material(t).density - fluid_density))
            })
            .collect()
    }

    pub fn assemble_load(&self, grad_un: &[Mat2], dt: f64, fluid_density: f64, gravity: [f64; 2]) -> Result<Vec<[f64; 6]>> {
        (0..self.num_triangles())
            .map(|t| {
                let (grads, area) = self.gradients(t)?;
                let m = self.material(t);
                Ok(element_load(
                    &grads,
                    area,
                    &self.stress[t],
                    &grad_un[t],
                    dt,
                    m.shear_modulus,
                    m.density - fluid_density,
                    gravity,
                ))
            })
            .collect()
    }

    /// Advances the stress of every triangle with the new velocity
    /// gradients computed on the current configuration.
    pub fn update_stresses(&mut self, grad_new: &[Mat2], dt: f64) {
        for t in 0..self.num_triangles() {
            let mu = self.material(t).shear_modulus;
            self.stress[t] = update_stress(&self.stress[t], &grad_new[t], dt, mu);
        }
    }

    /// `x += dt * u`, failing on inverted triangles.
    pub fn move_nodes(&mut self, velocity: &[[f64; 2]], dt: f64) -> Result<()> {
        for (x, u) in self.coords.iter_mut().zip(velocity) {
            x[0] += dt * u[0];
            x[1] += dt * u[1];
        }
        for t in 0..self.num_triangles() {
            let a = self.area(t);
            if !(a > 0.0) {
                return Err(Error::InvertedTriangle { triangle: t, area: a });
            }
        }
        Ok(())
    }

    /// Largest `|det F - 1|` over triangles.
    pub fn det_f_drift(&self) -> f64 {
        (0..self.num_triangles()).map(|t| (self.area(t) / self.reference_area[t] - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Smallest triangle quality `4 sqrt(3) A / sum(l²)`, 1 for equilateral.
    pub fn min_quality(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| {
                let x = self.triangle_coords(t);
                let l2: f64 = (0..3)
                    .map(|i| {
                        let a = x[i];
                        let b = x[(i + 1) % 3];
                        (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
                    })
                    .sum();
                4.0 * 3f64.sqrt() * self.area(t) / l2
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Area-weighted centroid of body `b`.
    pub fn body_centroid(&self, b: usize) -> [f64; 2] {
        let mut c = [0.0; 2];
        let mut a = 0.0;
        for t in (0..self.num_triangles()).filter(|&t| self.body[t] == b) {
            let x = self.triangle_coords(t);
            let at = self.area(t);
            for d in 0..2 {
                c[d] += at * (x[0][d] + x[1][d] + x[2][d]) / 3.0;
            }
            a += at;
        }
        [c[0] / a, c[1] / a]
    }

    /// Area-weighted mean nodal velocity of body `b`.
    pub fn body_velocity(&self, b: usize, velocity: &[[f64; 2]]) -> [f64; 2] {
        let mut v = [0.0; 2];
        let mut a = 0.0;
        for t in (0..self.num_triangles()).filter(|&t| self.body[t] == b) {
            let at = self.area(t);
            for &n in &self.triangles[t] {
                for d in 0..2 {
                    v[d] += at * velocity[n][d] / 3.0;
                }
            }
            a += at;
        }
        [v[0] / a, v[1] / a]
    }

    pub fn num_bodies(&self) -> usize {
        self.materials.len()
    }
}
