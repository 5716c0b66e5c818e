//! Broken polynomial spaces (P1 on tets, P1/P2 on intervals), reference
//! bases, and quadrature rules with build-time exactness checks.

use crate::geometry::Vec3;
use crate::mesh3d::Mesh3;
use crate::network1d::EdgeMesh;
use crate::{Error, Result};

/// Quadrature on the reference tetrahedron, stored as barycentric points
/// with weights summing to one (scale by the cell volume).
#[derive(Debug, Clone)]
pub struct TetRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

/// Quadrature on the reference triangle (barycentric, weights sum to one).
#[derive(Debug, Clone)]
pub struct TriRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

/// Gauss rule on [0, 1], weights sum to one.
#[derive(Debug, Clone)]
pub struct IntervalRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

fn tet_rule_degree2() -> TetRule {
    let a = (5.0 + 3.0 * 5.0f64.sqrt()) / 20.0;
    let b = (5.0 - 5.0f64.sqrt()) / 20.0;
    let mut points = Vec::new();
    for i in 0..4 {
        let mut p = [b; 4];
        p[i] = a;
        points.push(p);
    }
    TetRule {
        points,
        weights: vec![0.25; 4],
        exactness: 2,
    }
}

fn tet_rule_degree5() -> TetRule {
    // 15-point symmetric rule, exact to degree 5.
    let s15 = 15.0f64.sqrt();
    let mut points = vec![[0.25; 4]];
    let mut weights = vec![16.0 / 135.0];
    for (b, w) in [
        ((7.0 - s15) / 34.0, (2665.0 + 14.0 * s15) / 37800.0),
        ((7.0 + s15) / 34.0, (2665.0 - 14.0 * s15) / 37800.0),
    ] {
        let a = 1.0 - 3.0 * b;
        for i in 0..4 {
            let mut p = [b; 4];
            p[i] = a;
            points.push(p);
            weights.push(w);
        }
    }
    let c = (5.0 - s15) / 20.0;
    let d = (5.0 + s15) / 20.0;
    for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
        let mut p = [d; 4];
        p[i] = c;
        p[j] = c;
        points.push(p);
        weights.push(10.0 / 189.0);
    }
    TetRule {
        points,
        weights,
        exactness: 5,
    }
}

fn tri_rule_degree2() -> TriRule {
    TriRule {
        points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
        weights: vec![1.0 / 3.0; 3],
        exactness: 2,
    }
}

fn tri_rule_degree4() -> TriRule {
    // 6-point Dunavant rule.
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (a, w) in [
        (0.108103018168070, 0.223381589678011),
        (0.816847572980459, 0.109951743655322),
    ] {
        let b = (1.0 - a) / 2.0;
        for i in 0..3 {
            let mut p = [b; 3];
            p[i] = a;
            points.push(p);
            weights.push(w);
        }
    }
    TriRule {
        points,
        weights,
        exactness: 4,
    }
}

/// n-point Gauss-Legendre on [0, 1], n in 1..=5.
pub fn gauss_interval(n: usize) -> Result<IntervalRule> {
    // Nodes/weights on [-1, 1], mapped to [0, 1].
    let (xs, ws): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3.0f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let t = (6.0f64 / 5.0).sqrt();
            let a = ((3.0 - 2.0 * t) / 7.0).sqrt();
            let b = ((3.0 + 2.0 * t) / 7.0).sqrt();
            let wa = (18.0 + 30.0f64.sqrt()) / 36.0;
            let wb = (18.0 - 30.0f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let t = (10.0f64 / 7.0).sqrt();
            let a = (5.0 - 2.0 * t).sqrt() / 3.0;
            let b = (5.0 + 2.0 * t).sqrt() / 3.0;
            let wa = (322.0 + 13.0 * 70.0f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70.0f64.sqrt()) / 900.0;
            (
                vec![-b, -a, 0.0, a, b],
                vec![wb, wa, 128.0 / 225.0, wa, wb],
            )
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "gauss rule with {n} points not available"
            )))
        }
    };
    Ok(IntervalRule {
        points: xs.iter().map(|x| (x + 1.0) / 2.0).collect(),
        weights: ws.iter().map(|w| w / 2.0).collect(),
        exactness: 2 * n - 1,
    })
}

/// The rule set used by assembly and error integration.
#[derive(Debug, Clone)]
pub struct QuadSet {
    pub tet: TetRule,
    /// Elevated rule for error integration and non-polynomial loads.
    pub tet_elevated: TetRule,
    pub tri: TriRule,
    pub tri_elevated: TriRule,
}

impl QuadSet {
    pub fn new() -> Result<QuadSet> {
        let set = QuadSet {
            tet: tet_rule_degree2(),
            tet_elevated: tet_rule_degree5(),
            tri: tri_rule_degree2(),
            tri_elevated: tri_rule_degree4(),
        };
        set.self_test()?;
        Ok(set)
    }

    /// Verify monomial exactness up to the stated degree of each rule.
    fn self_test(&self) -> Result<()> {
        let factorial = |n: usize| (1..=n).fold(1.0f64, |p, k| p * k as f64);
        for (name, rule) in [("tet", &self.tet), ("tet_elevated", &self.tet_elevated)] {
            if rule.weights.iter().any(|&w| w <= 0.0) {
                return Err(Error::Internal(format!("{name} rule has bad weights")));
            }
            for a in 0..=rule.exactness {
                for b in 0..=(rule.exactness - a) {
                    for c in 0..=(rule.exactness - a - b) {
                        // reference tet x,y,z >= 0, x+y+z <= 1; barycentric
                        // coordinates 1..=3 are (x, y, z)
                        let exact = factorial(a) * factorial(b) * factorial(c)
                            / factorial(a + b + c + 3);
                        let approx: f64 = rule
                            .points
                            .iter()
                            .zip(&rule.weights)
                            .map(|(p, w)| {
                                w / 6.0 * p[1].powi(a as i32) * p[2].powi(b as i32)
                                    * p[3].powi(c as i32)
                            })
                            .sum();
                        if (approx - exact).abs() > 1e-13 * exact.max(1.0) {
                            return Err(Error::Internal(format!(
                                "{name} rule fails on x^{a} y^{b} z^{c}: {approx} vs {exact}"
                            )));
                        }
                    }
                }
            }
        }
        for (name, rule) in [("tri", &self.tri), ("tri_elevated", &self.tri_elevated)] {
            if rule.weights.iter().any(|&w| w <= 0.0) {
                return Err(Error::Internal(format!("{name} rule has bad weights")));
            }
            for a in 0..=rule.exactness {
                for b in 0..=(rule.exactness - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let approx: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w / 2.0 * p[1].powi(a as i32) * p[2].powi(b as i32))
                        .sum();
                    if (approx - exact).abs() > 1e-13 * exact.max(1.0) {
                        return Err(Error::Internal(format!(
                            "{name} rule fails on x^{a} y^{b}: {approx} vs {exact}"
                        )));
                    }
                }
            }
        }
        for n in 1..=5 {
            let rule = gauss_interval(n)?;
            for a in 0..=rule.exactness {
                let exact = 1.0 / (a as f64 + 1.0);
                let approx: f64 = rule
                    .points
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(a as i32))
                    .sum();
                if (approx - exact).abs() > 1e-13 {
                    return Err(Error::Internal(format!(
                        "gauss {n} fails on x^{a}: {approx} vs {exact}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Broken P1 space over a tetrahedral mesh: 4 DOFs per cell, contiguous
/// blocks, Lagrange basis tied to the cell's vertex order.
#[derive(Debug)]
pub struct DgSpace3<'m> {
    pub mesh: &'m Mesh3,
    /// Constant basis gradients per cell.
    pub gradients: Vec<[Vec3; 4]>,
}

pub const DOFS_PER_CELL_3D: usize = 4;

impl<'m> DgSpace3<'m> {
    pub fn new(mesh: &'m Mesh3) -> DgSpace3<'m> {
        let gradients = mesh
            .cells
            .iter()
            .map(|c| {
                let a = mesh.vertices[c[0]];
                let e1 = mesh.vertices[c[1]] - a;
                let e2 = mesh.vertices[c[2]] - a;
                let e3 = mesh.vertices[c[3]] - a;
                let det = e1.cross(e2).dot(e3);
                let g1 = e2.cross(e3) / det;
                let g2 = e3.cross(e1) / det;
                let g3 = e1.cross(e2) / det;
                [-(g1 + g2 + g3), g1, g2, g3]
            })
            .collect();
        DgSpace3 { mesh, gradients }
    }

    pub fn num_dofs(&self) -> usize {
        DOFS_PER_CELL_3D * self.mesh.cells.len()
    }

    pub fn global_dof(&self, cell: usize, local: usize) -> usize {
        DOFS_PER_CELL_3D * cell + local
    }

    /// Basis values at a physical point of `cell` (the barycentric
    /// coordinates) together with the constant gradients.
    pub fn eval_basis(&self, cell: usize, p: Vec3) -> ([f64; 4], [Vec3; 4]) {
        (self.mesh.barycentric(cell, p), self.gradients[cell])
    }

    /// Evaluate a coefficient field at a located point.
    pub fn eval_field(&self, coeffs: &[f64], cell: usize, bary: [f64; 4]) -> f64 {
        (0..4)
            .map(|i| coeffs[self.global_dof(cell, i)] * bary[i])
            .sum()
    }

    pub fn eval_field_gradient(&self, coeffs: &[f64], cell: usize) -> Vec3 {
        let mut g = Vec3::default();
        for i in 0..4 {
            g = g + self.gradients[cell][i] * coeffs[self.global_dof(cell, i)];
        }
        g
    }

    /// Nodal interpolant of a scalar function.
    pub fn interpolate<F: Fn(Vec3) -> f64>(&self, f: F) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.num_dofs()];
        for (ci, cell) in self.mesh.cells.iter().enumerate() {
            for (li, &v) in cell.iter().enumerate() {
                coeffs[self.global_dof(ci, li)] = f(self.mesh.vertices[v]);
            }
        }
        coeffs
    }
}

/// Broken Lagrange space over the per-edge interval meshes; degree 1 or 2.
#[derive(Debug, Clone)]
pub struct DgSpace1 {
    pub degree: usize,
    pub meshes: Vec<EdgeMesh>,
    /// First global DOF of each edge block.
    pub edge_offsets: Vec<usize>,
    total_dofs: usize,
}

impl DgSpace1 {
    pub fn new(meshes: Vec<EdgeMesh>, degree: usize) -> Result<DgSpace1> {
        if !(1..=2).contains(&degree) {
            return Err(Error::InvalidArgument(format!(
                "1D degree must be 1 or 2, got {degree}"
            )));
        }
        let per_cell = degree + 1;
        let mut edge_offsets = Vec::with_capacity(meshes.len());
        let mut total = 0;
        for m in &meshes {
            edge_offsets.push(total);
            total += per_cell * m.n_cells;
        }
        Ok(DgSpace1 {
            degree,
            meshes,
            edge_offsets,
            total_dofs: total,
        })
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.degree + 1
    }

    pub fn num_dofs(&self) -> usize {
        self.total_dofs
    }

    pub fn global_dof(&self, edge: usize, interval: usize, local: usize) -> usize {
        self.edge_offsets[edge] + self.dofs_per_cell() * interval + local
    }

    /// Reference basis values at x in [0, 1]. Lagrange nodes in order:
    /// {0, 1} for degree 1, {0, 1/2, 1} for degree 2.
    pub fn ref_basis(&self, x: f64) -> Vec<f64> {
        match self.degree {
            1 => vec![1.0 - x, x],
            _ => vec![
                2.0 * (x - 0.5) * (x - 1.0),
                -4.0 * x * (x - 1.0),
                2.0 * x * (x - 0.5),
            ],
        }
    }

    /// Reference basis derivatives at x (divide by h for physical).
    pub fn ref_basis_deriv(&self, x: f64) -> Vec<f64> {
        match self.degree {
            1 => vec![-1.0, 1.0],
            _ => vec![4.0 * x - 3.0, -8.0 * x + 4.0, 4.0 * x - 1.0],
        }
    }

    /// Arclength of a Lagrange node of (edge, interval, local).
    pub fn node_position(&self, edge: usize, interval: usize, local: usize) -> f64 {
        let m = &self.meshes[edge];
        let xref = match self.degree {
            1 => local as f64,
            _ => local as f64 / 2.0,
        };
        m.h * (interval as f64 + xref)
    }

    /// Evaluate a coefficient field at arclength position x in [0,1] of the
    /// given interval.
    pub fn eval_local(&self, coeffs: &[f64], edge: usize, interval: usize, x: f64) -> f64 {
        self.ref_basis(x)
            .iter()
            .enumerate()
            .map(|(l, phi)| phi * coeffs[self.global_dof(edge, interval, l)])
            .sum()
    }

    pub fn eval_local_deriv(&self, coeffs: &[f64], edge: usize, interval: usize, x: f64) -> f64 {
        let h = self.meshes[edge].h;
        self.ref_basis_deriv(x)
            .iter()
            .enumerate()
            .map(|(l, dphi)| dphi * coeffs[self.global_dof(edge, interval, l)])
            .sum::<f64>()
            / h
    }

    /// Nodal interpolant of a per-edge function of arclength.
    pub fn interpolate<F: Fn(usize, f64) -> f64>(&self, f: F) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.num_dofs()];
        for (ei, m) in self.meshes.iter().enumerate() {
            for iv in 0..m.n_cells {
                for l in 0..self.dofs_per_cell() {
                    coeffs[self.global_dof(ei, iv, l)] = f(ei, self.node_position(ei, iv, l));
                }
            }
        }
        coeffs
    }

    /// Value and one-sided derivative of the solution on `edge` at a graph
    /// vertex (the edge end adjacent to that vertex).
    pub fn vertex_trace(&self, coeffs: &[f64], edge: usize, at_inflow: bool) -> (f64, f64) {
        let m = &self.meshes[edge];
        let (interval, x) = if at_inflow {
            (0, 0.0)
        } else {
            (m.n_cells - 1, 1.0)
        };
        (
            self.eval_local(coeffs, edge, interval, x),
            self.eval_local_deriv(coeffs, edge, interval, x),
        )
    }
}
