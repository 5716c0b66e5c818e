//! Structured tetrahedral meshes of an axis-aligned box: construction,
//! oriented face connectivity, and point location.

use crate::geometry::Vec3;
use crate::{Error, Result};
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct InteriorFace {
    pub vertices: [usize; 3],
    /// Lower-indexed cell; the normal points away from it.
    pub left: usize,
    pub right: usize,
    pub normal: Vec3,
    pub area: f64,
}

#[derive(Debug, Clone)]
pub struct BoundaryFace {
    pub vertices: [usize; 3],
    pub owner: usize,
    /// Outward unit normal.
    pub normal: Vec3,
    pub area: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh3 {
    pub vertices: Vec<Vec3>,
    /// Vertex indices per cell, ordered for positive signed volume.
    pub cells: Vec<[usize; 4]>,
    pub interior_faces: Vec<InteriorFace>,
    pub boundary_faces: Vec<BoundaryFace>,
    pub cell_diameters: Vec<f64>,
    pub cell_volumes: Vec<f64>,
    pub bbox_lo: Vec3,
    pub bbox_hi: Vec3,
}

/// Result of point location: owning cell and barycentric coordinates with
/// respect to that cell's vertex order.
#[derive(Debug, Clone, Copy)]
pub struct PointLocation {
    pub cell: usize,
    pub bary: [f64; 4],
}

fn signed_volume(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> f64 {
    (b - a).cross(c - a).dot(d - a) / 6.0
}

fn centroid(vertices: &[Vec3], ids: &[usize]) -> Vec3 {
    let mut c = Vec3::default();
    for &i in ids {
        c = c + vertices[i];
    }
    c / ids.len() as f64
}

impl Mesh3 {
    /// Build a mesh from raw cells, fixing vertex order for positive volume
    /// and populating face connectivity and per-cell metrics.
    pub fn from_cells(vertices: Vec<Vec3>, mut cells: Vec<[usize; 4]>) -> Result<Mesh3> {
        for cell in &mut cells {
            let v = signed_volume(
                vertices[cell[0]],
                vertices[cell[1]],
                vertices[cell[2]],
                vertices[cell[3]],
            );
            if v == 0.0 {
                return Err(Error::MeshInvalid("degenerate cell (zero volume)".into()));
            }
            if v < 0.0 {
                cell.swap(2, 3);
            }
        }
        let cell_volumes: Vec<f64> = cells
            .iter()
            .map(|c| {
                signed_volume(
                    vertices[c[0]],
                    vertices[c[1]],
                    vertices[c[2]],
                    vertices[c[3]],
                )
            })
            .collect();
        let cell_diameters: Vec<f64> = cells
            .iter()
            .map(|c| {
                let mut d: f64 = 0.0;
                for i in 0..4 {
                    for j in i + 1..4 {
                        d = d.max((vertices[c[i]] - vertices[c[j]]).norm());
                    }
                }
                d
            })
            .collect();
        let mut lo = vertices[0];
        let mut hi = vertices[0];
        for v in &vertices {
            lo = Vec3::new(lo.x.min(v.x), lo.y.min(v.y), lo.z.min(v.z));
            hi = Vec3::new(hi.x.max(v.x), hi.y.max(v.y), hi.z.max(v.z));
        }
        let mut mesh = Mesh3 {
            vertices,
            cells,
            interior_faces: Vec::new(),
            boundary_faces: Vec::new(),
            cell_diameters,
            cell_volumes,
            bbox_lo: lo,
            bbox_hi: hi,
        };
        mesh.build_face_connectivity()?;
        Ok(mesh)
    }

    /// Structured box mesh: each of `n^3` sub-cubes is split into 6
    /// tetrahedra sharing the main diagonal, giving `6 n^3` cells.
    pub fn build_box(n: usize, lo: Vec3, hi: Vec3) -> Result<Mesh3> {
        if n == 0 {
            return Err(Error::InvalidArgument("box mesh needs n >= 1".into()));
        }
        if hi.x <= lo.x || hi.y <= lo.y || hi.z <= lo.z {
            return Err(Error::InvalidArgument(
                "degenerate box: hi must exceed lo componentwise".into(),
            ));
        }
        let np = n + 1;
        let d = (hi - lo) / n as f64;
        let mut vertices = Vec::with_capacity(np * np * np);
        for k in 0..np {
            for j in 0..np {
                for i in 0..np {
                    vertices.push(Vec3::new(
                        lo.x + d.x * i as f64,
                        lo.y + d.y * j as f64,
                        lo.z + d.z * k as f64,
                    ));
                }
            }
        }
        let vid = |i: usize, j: usize, k: usize| i + np * (j + np * k);
        // Kuhn split: one tet per permutation of the axis traversal order.
        const PERMS: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut cells = Vec::with_capacity(6 * n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for perm in PERMS {
                        let mut corner = [i, j, k];
                        let mut tet = [vid(corner[0], corner[1], corner[2]), 0, 0, 0];
                        for (step, &axis) in perm.iter().enumerate() {
                            corner[axis] += 1;
                            tet[step + 1] = vid(corner[0], corner[1], corner[2]);
                        }
                        cells.push(tet);
                    }
                }
            }
        }
        Mesh3::from_cells(vertices, cells)
    }

    fn build_face_connectivity(&mut self) -> Result<()> {
        let mut shared: HashMap<[usize; 3], Vec<usize>> = HashMap::new();
        for (ci, cell) in self.cells.iter().enumerate() {
            for skip in 0..4 {
                let mut tri = [0usize; 3];
                let mut t = 0;
                for (li, &v) in cell.iter().enumerate() {
                    if li != skip {
                        tri[t] = v;
                        t += 1;
                    }
                }
                tri.sort_unstable();
                shared.entry(tri).or_default().push(ci);
            }
        }
        let mut keys: Vec<[usize; 3]> = shared.keys().copied().collect();
        keys.sort_unstable();
        self.interior_faces.clear();
        self.boundary_faces.clear();
        for tri in keys {
            let mut owners = shared[&tri].clone();
            owners.sort_unstable();
            let p = self.vertices[tri[0]];
            let q = self.vertices[tri[1]];
            let r = self.vertices[tri[2]];
            let cross = (q - p).cross(r - p);
            let area = cross.norm() / 2.0;
            let face_centroid = (p + q + r) / 3.0;
            match owners.len() {
                1 => {
                    let owner = owners[0];
                    let outward = face_centroid - centroid(&self.vertices, &self.cells[owner]);
                    let normal = if cross.dot(outward) >= 0.0 {
                        cross.normalized()
                    } else {
                        -cross.normalized()
                    };
                    self.boundary_faces.push(BoundaryFace {
                        vertices: tri,
                        owner,
                        normal,
                        area,
                    });
                }
                2 => {
                    let (left, right) = (owners[0], owners[1]);
                    let toward_right = centroid(&self.vertices, &self.cells[right])
                        - centroid(&self.vertices, &self.cells[left]);
                    let normal = if cross.dot(toward_right) >= 0.0 {
                        cross.normalized()
                    } else {
                        -cross.normalized()
                    };
                    self.interior_faces.push(InteriorFace {
                        vertices: tri,
                        left,
                        right,
                        normal,
                        area,
                    });
                }
                k => {
                    return Err(Error::MeshInvalid(format!(
                        "non-manifold face {tri:?} shared by {k} cells"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn max_diameter(&self) -> f64 {
        self.cell_diameters.iter().fold(0.0f64, |m, d| m.max(*d))
    }

    pub fn total_volume(&self) -> f64 {
        self.cell_volumes.iter().sum()
    }

    /// Barycentric coordinates of `p` in cell `cell`.
    pub fn barycentric(&self, cell: usize, p: Vec3) -> [f64; 4] {
        let c = self.cells[cell];
        let a = self.vertices[c[0]];
        let e1 = self.vertices[c[1]] - a;
        let e2 = self.vertices[c[2]] - a;
        let e3 = self.vertices[c[3]] - a;
        let rhs = p - a;
        let det = e1.cross(e2).dot(e3);
        let l1 = rhs.cross(e2).dot(e3) / det;
        let l2 = e1.cross(rhs).dot(e3) / det;
        let l3 = e1.cross(e2).dot(rhs) / det;
        [1.0 - l1 - l2 - l3, l1, l2, l3]
    }

    pub fn cell_contains(&self, cell: usize, p: Vec3, tol: f64) -> Option<[f64; 4]> {
        let b = self.barycentric(cell, p);
        if b.iter().all(|&x| x >= -tol) {
            Some(b)
        } else {
            None
        }
    }

    /// Exhaustive scan over all cells; lowest containing index wins.
    /// Slow path, used directly only as an oracle.
    pub fn locate_point_scan(&self, p: Vec3) -> Result<PointLocation> {
        for tol in [1e-12, 1e-9] {
            for cell in 0..self.cells.len() {
                if let Some(bary) = self.cell_contains(cell, p, tol) {
                    return Ok(PointLocation { cell, bary });
                }
            }
        }
        Err(Error::OutOfDomain(p.x, p.y, p.z))
    }
}

/// Uniform-bin spatial index over cell bounding boxes.
#[derive(Debug, Clone)]
pub struct GridIndex {
    lo: Vec3,
    inv_bin: Vec3,
    nbins: [usize; 3],
    /// Cell ids per bin, sorted ascending.
    bins: Vec<Vec<usize>>,
}

impl GridIndex {
    pub fn build(mesh: &Mesh3) -> GridIndex {
        // Bin size on the order of the cell diameter.
        let extent = mesh.bbox_hi - mesh.bbox_lo;
        let h = mesh.max_diameter();
        let nb = |len: f64| ((len / h).ceil() as usize).max(1);
        let nbins = [nb(extent.x), nb(extent.y), nb(extent.z)];
        let inv_bin = Vec3::new(
            nbins[0] as f64 / extent.x,
            nbins[1] as f64 / extent.y,
            nbins[2] as f64 / extent.z,
        );
        let mut bins = vec![Vec::new(); nbins[0] * nbins[1] * nbins[2]];
        let clampi = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        for (ci, cell) in mesh.cells.iter().enumerate() {
            let mut clo = mesh.vertices[cell[0]];
            let mut chi = clo;
            for &v in &cell[1..] {
                let p = mesh.vertices[v];
                clo = Vec3::new(clo.x.min(p.x), clo.y.min(p.y), clo.z.min(p.z));
                chi = Vec3::new(chi.x.max(p.x), chi.y.max(p.y), chi.z.max(p.z));
            }
            let i0 = clampi((clo.x - mesh.bbox_lo.x) * inv_bin.x, nbins[0]);
            let i1 = clampi((chi.x - mesh.bbox_lo.x) * inv_bin.x, nbins[0]);
            let j0 = clampi((clo.y - mesh.bbox_lo.y) * inv_bin.y, nbins[1]);
            let j1 = clampi((chi.y - mesh.bbox_lo.y) * inv_bin.y, nbins[1]);
            let k0 = clampi((clo.z - mesh.bbox_lo.z) * inv_bin.z, nbins[2]);
            let k1 = clampi((chi.z - mesh.bbox_lo.z) * inv_bin.z, nbins[2]);
            for k in k0..=k1 {
                for j in j0..=j1 {
                    for i in i0..=i1 {
                        bins[i + nbins[0] * (j + nbins[1] * k)].push(ci);
                    }
                }
            }
        }
        GridIndex {
            lo: mesh.bbox_lo,
            inv_bin,
            nbins,
            bins,
        }
    }

    fn candidates(&self, p: Vec3) -> &[usize] {
        let clampi = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        let i = clampi((p.x - self.lo.x) * self.inv_bin.x, self.nbins[0]);
        let j = clampi((p.y - self.lo.y) * self.inv_bin.y, self.nbins[1]);
        let k = clampi((p.z - self.lo.z) * self.inv_bin.z, self.nbins[2]);
        &self.bins[i + self.nbins[0] * (j + self.nbins[1] * k)]
    }
}

/// Locate `p` in the mesh. Points within roundoff of a shared face are
/// assigned to the lowest candidate cell index.
pub fn locate_point(mesh: &Mesh3, p: Vec3, index: &GridIndex) -> Result<PointLocation> {
    let outside = p.x < mesh.bbox_lo.x - 1e-12
        || p.y < mesh.bbox_lo.y - 1e-12
        || p.z < mesh.bbox_lo.z - 1e-12
        || p.x > mesh.bbox_hi.x + 1e-12
        || p.y > mesh.bbox_hi.y + 1e-12
        || p.z > mesh.bbox_hi.z + 1e-12;
    if outside {
        return Err(Error::OutOfDomain(p.x, p.y, p.z));
    }
    // Candidates are stored sorted, so the first hit is the lowest index.
    for tol in [1e-12, 1e-9] {
        for &cell in index.candidates(p) {
            if let Some(bary) = mesh.cell_contains(cell, p, tol) {
                return Ok(PointLocation { cell, bary });
            }
        }
    }
    // Bin boundary roundoff can leave the owner in a neighboring bin.
    mesh.locate_point_scan(p)
}
