//! Vessel centerlines: a single segment or a directed graph with per-edge
//! cross-section geometry, vertex classification, and interval meshes.

use crate::geometry::Vec3;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Edge {
    pub v_in: usize,
    pub v_out: usize,
    pub radius: f64,
    /// Membrane permeability; zero disables the 3D coupling on this edge.
    pub xi: f64,
    /// Cross-section area A_e. Defaults to pi R^2.
    pub area: f64,
    /// Cross-section perimeter P_e. Defaults to 2 pi R.
    pub perimeter: f64,
    pub length: f64,
    /// Optional per-edge cell count from the input file.
    pub cells_hint: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct VesselGraph {
    pub vertices: Vec<Vec3>,
    pub edges: Vec<Edge>,
    /// Edge ids adjacent to each vertex.
    pub adjacency: Vec<Vec<usize>>,
}

/// Specification of one edge before derived geometry is filled in.
#[derive(Debug, Clone)]
pub struct EdgeSpec {
    pub v_in: usize,
    pub v_out: usize,
    pub radius: f64,
    pub xi: f64,
    pub cells: Option<usize>,
    /// Override A_e and P_e (the standalone network problem uses a unit
    /// section rather than one derived from the radius).
    pub section: Option<(f64, f64)>,
}

impl EdgeSpec {
    pub fn from_radius(v_in: usize, v_out: usize, radius: f64, xi: f64) -> Self {
        EdgeSpec {
            v_in,
            v_out,
            radius,
            xi,
            cells: None,
            section: None,
        }
    }

    pub fn unit_section(v_in: usize, v_out: usize) -> Self {
        EdgeSpec {
            v_in,
            v_out,
            radius: 1.0,
            xi: 0.0,
            cells: None,
            section: Some((1.0, 1.0)),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct VertexClasses {
    /// Degree-1 vertices.
    pub boundary: Vec<usize>,
    /// Degree >= 3 vertices.
    pub bifurcation: Vec<usize>,
    /// Degree-2 vertices.
    pub pass_through: Vec<usize>,
}

impl VesselGraph {
    pub fn new(vertices: Vec<Vec3>, specs: Vec<EdgeSpec>) -> Result<VesselGraph> {
        if vertices.is_empty() || specs.is_empty() {
            return Err(Error::InvalidArgument(
                "graph needs at least one vertex and one edge".into(),
            ));
        }
        let nv = vertices.len();
        let mut adjacency = vec![Vec::new(); nv];
        let mut edges = Vec::with_capacity(specs.len());
        for (ei, s) in specs.into_iter().enumerate() {
            if s.v_in >= nv || s.v_out >= nv {
                return Err(Error::InvalidArgument(format!(
                    "edge {ei} references vertex out of range"
                )));
            }
            if s.radius <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "edge {ei} has non-positive radius"
                )));
            }
            if s.xi < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "edge {ei} has negative permeability"
                )));
            }
            let length = (vertices[s.v_out] - vertices[s.v_in]).norm();
            if length <= 0.0 {
                return Err(Error::InvalidArgument(format!("edge {ei} has zero length")));
            }
            let (area, perimeter) = s.section.unwrap_or((
                std::f64::consts::PI * s.radius * s.radius,
                2.0 * std::f64::consts::PI * s.radius,
            ));
            adjacency[s.v_in].push(ei);
            adjacency[s.v_out].push(ei);
            edges.push(Edge {
                v_in: s.v_in,
                v_out: s.v_out,
                radius: s.radius,
                xi: s.xi,
                area,
                perimeter,
                length,
                cells_hint: s.cells,
            });
        }
        let graph = VesselGraph {
            vertices,
            edges,
            adjacency,
        };
        graph.check_connected()?;
        Ok(graph)
    }

    /// Single straight vessel between two points.
    pub fn single_vessel(a: Vec3, b: Vec3, radius: f64, xi: f64) -> Result<VesselGraph> {
        VesselGraph::new(vec![a, b], vec![EdgeSpec::from_radius(0, 1, radius, xi)])
    }

    fn check_connected(&self) -> Result<()> {
        let nv = self.vertices.len();
        let mut seen = vec![false; nv];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &ei in &self.adjacency[v] {
                let e = &self.edges[ei];
                for w in [e.v_in, e.v_out] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        let orphans: Vec<usize> = (0..nv).filter(|&v| !seen[v]).collect();
        if orphans.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "graph is disconnected; unreachable vertices: {orphans:?}"
            )))
        }
    }

    /// Edge orientation sign at a vertex: +1 at the inflow end, -1 at the
    /// outflow end, 0 elsewhere.
    pub fn orientation_sign(&self, edge: usize, vertex: usize) -> i32 {
        let e = &self.edges[edge];
        if vertex == e.v_in {
            1
        } else if vertex == e.v_out {
            -1
        } else {
            0
        }
    }

    pub fn classify_vertices(&self) -> VertexClasses {
        let mut classes = VertexClasses::default();
        for (v, adj) in self.adjacency.iter().enumerate() {
            match adj.len() {
                1 => classes.boundary.push(v),
                2 => classes.pass_through.push(v),
                _ => classes.bifurcation.push(v),
            }
        }
        classes
    }

    /// Warn if A_e + P_e leaves the user-supplied bounds.
    pub fn section_bound_warnings(&self, a0: f64, a1: f64) -> Vec<String> {
        let mut warnings = Vec::new();
        for (ei, e) in self.edges.iter().enumerate() {
            let s = e.area + e.perimeter;
            if s < a0 || s > a1 {
                warnings.push(format!(
                    "edge {ei}: A_e + P_e = {s:.6e} outside [{a0:.3e}, {a1:.3e}]"
                ));
            }
        }
        warnings
    }

    pub fn frame(&self, edge: usize) -> EdgeFrame {
        let e = &self.edges[edge];
        let tangent = (self.vertices[e.v_out] - self.vertices[e.v_in]) / e.length;
        let e1 = tangent.any_orthogonal();
        let e2 = tangent.cross(e1);
        EdgeFrame { tangent, e1, e2 }
    }

    /// Point on the centerline of `edge` at arclength `s` from the inflow end.
    pub fn point_at(&self, edge: usize, s: f64) -> Vec3 {
        let e = &self.edges[edge];
        self.vertices[e.v_in] + self.frame(edge).tangent * s
    }
}

/// Uniform interval mesh of one edge.
#[derive(Debug, Clone)]
pub struct EdgeMesh {
    pub edge: usize,
    pub n_cells: usize,
    pub h: f64,
    pub length: f64,
}

impl EdgeMesh {
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.length
        } else {
            self.h * i as f64
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum MeshSpec {
    CellsPerEdge(usize),
    /// Uniform per-edge mesh with h <= target (cell count by ceiling rule).
    TargetH(f64),
}

pub fn build_edge_meshes(graph: &VesselGraph, spec: MeshSpec) -> Result<Vec<EdgeMesh>> {
    match spec {
        MeshSpec::CellsPerEdge(n) if n == 0 => {
            Err(Error::InvalidArgument("cells per edge must be >= 1".into()))
        }
        MeshSpec::TargetH(h) if h <= 0.0 => {
            Err(Error::InvalidArgument("target h must be positive".into()))
        }
        _ => Ok(graph
            .edges
            .iter()
            .enumerate()
            .map(|(ei, e)| {
                let n = match spec {
                    MeshSpec::CellsPerEdge(n) => e.cells_hint.unwrap_or(n),
                    MeshSpec::TargetH(h) => ((e.length / h).ceil() as usize).max(1),
                };
                EdgeMesh {
                    edge: ei,
                    n_cells: n,
                    h: e.length / n as f64,
                    length: e.length,
                }
            })
            .collect()),
    }
}

/// Orthonormal frame of a straight edge: tangent plus a basis of the
/// cross-section plane.
#[derive(Debug, Clone, Copy)]
pub struct EdgeFrame {
    pub tangent: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
}

/// Trapezoid points on the circle of radius `radius` around `center` in the
/// plane orthogonal to the frame tangent. Each point carries weight P/M so
/// the weights sum to the perimeter.
pub fn circle_points(
    frame: &EdgeFrame,
    center: Vec3,
    radius: f64,
    m: usize,
) -> Result<Vec<(Vec3, f64)>> {
    if m < 4 || m % 2 != 0 {
        return Err(Error::InvalidArgument(
            "circle quadrature needs an even count >= 4".into(),
        ));
    }
    let w = 2.0 * std::f64::consts::PI * radius / m as f64;
    Ok((0..m)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
            let p = center + (frame.e1 * theta.cos() + frame.e2 * theta.sin()) * radius;
            (p, w)
        })
        .collect())
}

/// The MMS network used for the standalone graph study: 8 vertices, 7 edges,
/// 3 bifurcations, unit cross-sections.
pub fn mms_network_graph() -> VesselGraph {
    let vertices = vec![
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(-1.0, 2.0, 0.0),
        Vec3::new(1.0, 2.0, 0.0),
        Vec3::new(-1.5, 3.0, 0.0),
        Vec3::new(-0.5, 3.0, 0.0),
        Vec3::new(0.5, 3.0, 0.0),
        Vec3::new(1.5, 3.0, 0.0),
    ];
    let specs = vec![
        EdgeSpec::unit_section(0, 1),
        EdgeSpec::unit_section(1, 2),
        EdgeSpec::unit_section(1, 3),
        EdgeSpec::unit_section(2, 4),
        EdgeSpec::unit_section(2, 5),
        EdgeSpec::unit_section(3, 6),
        EdgeSpec::unit_section(3, 7),
    ];
    VesselGraph::new(vertices, specs).expect("static graph is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_mms_network() {
        let g = mms_network_graph();
        let classes = g.classify_vertices();
        assert_eq!(classes.bifurcation, vec![1, 2, 3]);
        assert_eq!(classes.boundary.len(), 5);
        assert!(classes.pass_through.is_empty());
    }

    #[test]
    fn classify_single_edge() {
        let g = VesselGraph::single_vessel(
            Vec3::new(0.0, 0.0, -0.5),
            Vec3::new(0.0, 0.0, 0.5),
            0.05,
            1.0,
        )
        .unwrap();
        let classes = g.classify_vertices();
        assert_eq!(classes.boundary, vec![0, 1]);
        assert!(classes.bifurcation.is_empty());
    }

    #[test]
    fn classify_collinear_path() {
        let vertices = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(3.0, 0.0, 0.0),
        ];
        let specs = vec![
            EdgeSpec::from_radius(0, 1, 0.1, 1.0),
            EdgeSpec::from_radius(1, 2, 0.1, 1.0),
            EdgeSpec::from_radius(2, 3, 0.1, 1.0),
        ];
        let g = VesselGraph::new(vertices, specs).unwrap();
        let classes = g.classify_vertices();
        assert_eq!(classes.pass_through, vec![1, 2]);
        assert_eq!(classes.boundary, vec![0, 3]);
    }

    #[test]
    fn orientation_signs_sum_per_edge() {
        let g = mms_network_graph();
        for ei in 0..g.edges.len() {
            let total: i32 = (0..g.vertices.len())
                .map(|v| g.orientation_sign(ei, v).abs())
                .sum();
            assert_eq!(total, 2);
            assert_eq!(g.orientation_sign(ei, g.edges[ei].v_in), 1);
            assert_eq!(g.orientation_sign(ei, g.edges[ei].v_out), -1);
        }
    }

    #[test]
    fn edge_mesh_target_h() {
        let g = VesselGraph::single_vessel(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            0.1,
            1.0,
        )
        .unwrap();
        let meshes = build_edge_meshes(&g, MeshSpec::TargetH(0.25)).unwrap();
        assert_eq!(meshes[0].n_cells, 4);
        for (i, s) in [0.0, 0.25, 0.5, 0.75, 1.0].iter().enumerate() {
            assert!((meshes[0].node(i) - s).abs() < 1e-15);
        }
        // Ceiling rule.
        let meshes = build_edge_meshes(&g, MeshSpec::TargetH(0.3)).unwrap();
        assert_eq!(meshes[0].n_cells, 4);
    }

    #[test]
    fn edge_mesh_counts_follow_ceiling_rule() {
        let g = mms_network_graph();
        for target in [0.5, 0.25, 0.125] {
            let meshes = build_edge_meshes(&g, MeshSpec::TargetH(target)).unwrap();
            for m in &meshes {
                assert_eq!(m.n_cells, (m.length / target).ceil() as usize);
                assert!(m.h <= target + 1e-15);
            }
        }
        // The unit-length trunk edge doubles exactly.
        let coarse = build_edge_meshes(&g, MeshSpec::TargetH(0.5)).unwrap();
        let fine = build_edge_meshes(&g, MeshSpec::TargetH(0.25)).unwrap();
        assert_eq!(fine[0].n_cells, 2 * coarse[0].n_cells);
    }

    #[test]
    fn disconnected_graph_rejected() {
        let vertices = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(5.0, 0.0, 0.0),
            Vec3::new(6.0, 0.0, 0.0),
        ];
        let specs = vec![
            EdgeSpec::from_radius(0, 1, 0.1, 1.0),
            EdgeSpec::from_radius(2, 3, 0.1, 1.0),
        ];
        assert!(VesselGraph::new(vertices, specs).is_err());
    }

    #[test]
    fn frame_is_orthonormal() {
        let g = mms_network_graph();
        for ei in 0..g.edges.len() {
            let f = g.frame(ei);
            for v in [f.tangent, f.e1, f.e2] {
                assert!((v.norm() - 1.0).abs() < 1e-14);
            }
            assert!(f.tangent.dot(f.e1).abs() < 1e-14);
            assert!(f.tangent.dot(f.e2).abs() < 1e-14);
            assert!(f.e1.dot(f.e2).abs() < 1e-14);
        }
    }

    fn circle_average<F: Fn(Vec3) -> f64>(
        frame: &EdgeFrame,
        center: Vec3,
        radius: f64,
        m: usize,
        g: F,
    ) -> f64 {
        let pts = circle_points(frame, center, radius, m).unwrap();
        let total_w: f64 = pts.iter().map(|(_, w)| w).sum();
        pts.iter().map(|(p, w)| g(*p) * w).sum::<f64>() / total_w
    }

    #[test]
    fn circle_average_symmetries() {
        let frame = EdgeFrame {
            tangent: Vec3::new(0.0, 0.0, 1.0),
            e1: Vec3::new(1.0, 0.0, 0.0),
            e2: Vec3::new(0.0, 1.0, 0.0),
        };
        let center = Vec3::new(0.0, 0.0, 0.7);
        for m in [4, 8, 16] {
            // g = z averages to z0 by symmetry
            let avg_z = circle_average(&frame, center, 0.3, m, |p| p.z);
            assert!((avg_z - 0.7).abs() < 1e-14);
            // g = x averages to 0 by antisymmetry
            let avg_x = circle_average(&frame, center, 0.3, m, |p| p.x);
            assert!(avg_x.abs() < 1e-14);
            // every circle point satisfies x^2 + y^2 = R^2
            let avg_r2 = circle_average(&frame, center, 0.3, m, |p| p.x * p.x + p.y * p.y);
            assert!((avg_r2 - 0.09).abs() < 1e-14);
        }
    }

    #[test]
    fn circle_weights_sum_to_perimeter() {
        let g = mms_network_graph();
        let frame = g.frame(1);
        let pts = circle_points(&frame, g.point_at(1, 0.3), 0.05, 16).unwrap();
        let total: f64 = pts.iter().map(|(_, w)| w).sum();
        assert!((total - 2.0 * std::f64::consts::PI * 0.05).abs() < 1e-14);
        for (p, _) in &pts {
            let d = *p - g.point_at(1, 0.3);
            assert!((d.norm() - 0.05).abs() < 1e-13);
            assert!(d.dot(frame.tangent).abs() < 1e-13);
        }
    }

    #[test]
    fn circle_points_rejects_bad_count() {
        let g = mms_network_graph();
        let frame = g.frame(0);
        assert!(circle_points(&frame, Vec3::default(), 0.1, 3).is_err());
        assert!(circle_points(&frame, Vec3::default(), 0.1, 5).is_err());
    }

    #[test]
    fn rotation_invariance_of_circle_average() {
        // Trapezoid rule on a circle is exact under frame rotation for
        // low-degree polynomials.
        let tangent = Vec3::new(1.0, 2.0, -0.5).normalized();
        let e1 = tangent.any_orthogonal();
        let e2 = tangent.cross(e1);
        let poly = |p: Vec3| 1.0 + p.x - 2.0 * p.y * p.z + p.x * p.x * p.y;
        let center = Vec3::new(0.2, -0.1, 0.4);
        let base = circle_average(
            &EdgeFrame { tangent, e1, e2 },
            center,
            0.25,
            16,
            poly,
        );
        for angle in [0.3, 1.1, 2.9] {
            let (s, c) = (f64::sin(angle), f64::cos(angle));
            let r1 = e1 * c + e2 * s;
            let r2 = e2 * c - e1 * s;
            let rotated = circle_average(
                &EdgeFrame {
                    tangent,
                    e1: r1,
                    e2: r2,
                },
                center,
                0.25,
                16,
                poly,
            );
            assert!((base - rotated).abs() < 1e-12);
        }
    }
}
