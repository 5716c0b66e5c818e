//! Configuration, network-file ingestion, and result export (VTK, CSV,
//! JSON report, Matrix Market).

use crate::geometry::Vec3;
use crate::linalg::SparseMatrix;
use crate::mesh3d::Mesh3;
use crate::network1d::{EdgeSpec, VesselGraph};
use crate::spaces::{DgSpace1, DgSpace3};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Effective run configuration; every field mirrors a CLI flag and a
/// config-file key.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// 3D box refinement (cells per axis).
    pub n: usize,
    /// Target 1D mesh size; when absent, vessels get `n` cells each.
    pub h_lambda: Option<f64>,
    /// Points per section circle in the average operator.
    pub circle_points: usize,
    pub epsilon1: i32,
    pub epsilon2: i32,
    pub sigma_omega: f64,
    pub sigma_lambda: f64,
    pub sigma_v: f64,
    /// Default exchange coefficient for networks that do not carry one.
    pub xi: f64,
    /// 1D polynomial degree (1 or 2).
    pub k2: usize,
    pub tau: f64,
    pub t_end: f64,
    pub tol: f64,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Also write the assembled system in Matrix Market format.
    pub dump_system: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 5,
            h_lambda: None,
            circle_points: 16,
            epsilon1: -1,
            epsilon2: -1,
            sigma_omega: 30.0,
            sigma_lambda: 30.0,
            sigma_v: 10.0,
            xi: 1.0,
            k2: 1,
            tau: 0.1,
            t_end: 1.0,
            tol: 1e-10,
            out_dir: PathBuf::from("."),
            seed: 0,
            dump_system: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if self.sigma_omega <= 0.0 || self.sigma_lambda <= 0.0 || self.sigma_v <= 0.0 {
            return Err(Error::InvalidArgument("penalties must be positive".into()));
        }
        if !(1..=2).contains(&self.k2) {
            return Err(Error::InvalidArgument("k2 must be 1 or 2".into()));
        }
        if self.circle_points < 4 || self.circle_points % 2 != 0 {
            return Err(Error::InvalidArgument(
                "circle_points must be even and at least 4".into(),
            ));
        }
        if self.tol <= 0.0 || self.tau <= 0.0 || self.t_end <= 0.0 {
            return Err(Error::InvalidArgument(
                "tol, tau, and t_end must be positive".into(),
            ));
        }
        if let Some(h) = self.h_lambda {
            if h <= 0.0 {
                return Err(Error::InvalidArgument("h_lambda must be positive".into()));
            }
        }
        Ok(())
    }

    /// Overlay flat `key=value` lines from a config file. Unknown keys are
    /// rejected; blank lines and `#` comments are ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::InvalidArgument(
                format!("{}:{}: expected key=value", path.display(), ln + 1),
            ))?;
            self.set_key(key.trim(), value.trim()).map_err(|e| {
                Error::InvalidArgument(format!("{}:{}: {e}", path.display(), ln + 1))
            })?;
        }
        Ok(())
    }

    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| {
                Error::InvalidArgument(format!("invalid value {value:?} for key {key}"))
            })
        }
        match key {
            "n" => self.n = parse(key, value)?,
            "h_lambda" => self.h_lambda = Some(parse(key, value)?),
            "circle_points" => self.circle_points = parse(key, value)?,
            "epsilon1" => self.epsilon1 = parse(key, value)?,
            "epsilon2" => self.epsilon2 = parse(key, value)?,
            "sigma_omega" => self.sigma_omega = parse(key, value)?,
            "sigma_lambda" => self.sigma_lambda = parse(key, value)?,
            "sigma_v" => self.sigma_v = parse(key, value)?,
            "xi" => self.xi = parse(key, value)?,
            "k2" => self.k2 = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "t_end" => self.t_end = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,
            "dump_system" => self.dump_system = parse(key, value)?,
            _ => {
                return Err(Error::InvalidArgument(format!("unknown config key {key}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct VertexJson {
    id: usize,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Debug, Deserialize)]
struct EdgeJson {
    v0: usize,
    v1: usize,
    radius: f64,
    xi: f64,
    #[serde(default)]
    cells: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct NetworkJson {
    vertices: Vec<VertexJson>,
    edges: Vec<EdgeJson>,
}

/// Read a vessel network from JSON:
/// {"vertices":[{"id","x","y","z"}], "edges":[{"v0","v1","radius","xi","cells"?}]}.
/// Vertex ids must be dense 0..V-1.
pub fn read_network(path: &Path) -> Result<VesselGraph> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let doc: NetworkJson = serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let nv = doc.vertices.len();
    let mut vertices = vec![None; nv];
    for (i, v) in doc.vertices.iter().enumerate() {
        if v.id >= nv {
            return Err(Error::Schema {
                path: format!("vertices[{i}].id"),
                message: format!("id {} out of dense range 0..{nv}", v.id),
            });
        }
        if vertices[v.id].replace(Vec3::new(v.x, v.y, v.z)).is_some() {
            return Err(Error::Schema {
                path: format!("vertices[{i}].id"),
                message: format!("duplicate id {}", v.id),
            });
        }
    }
    let vertices: Vec<Vec3> = vertices.into_iter().map(|v| v.unwrap()).collect();
    let mut specs = Vec::with_capacity(doc.edges.len());
    for (i, e) in doc.edges.iter().enumerate() {
        for (field, id) in [("v0", e.v0), ("v1", e.v1)] {
            if id >= nv {
                return Err(Error::Schema {
                    path: format!("edges[{i}].{field}"),
                    message: format!("vertex id {id} out of range 0..{nv}"),
                });
            }
        }
        if e.radius <= 0.0 {
            return Err(Error::Schema {
                path: format!("edges[{i}].radius"),
                message: "radius must be positive".into(),
            });
        }
        if e.xi < 0.0 {
            return Err(Error::Schema {
                path: format!("edges[{i}].xi"),
                message: "xi must be nonnegative".into(),
            });
        }
        let mut spec = EdgeSpec::from_radius(e.v0, e.v1, e.radius, e.xi);
        spec.cells = e.cells;
        specs.push(spec);
    }
    VesselGraph::new(vertices, specs)
}

fn open_out(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(std::io::BufWriter::new(file))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Legacy ASCII VTK of a DG field on a tet mesh: points are duplicated
/// per cell (4 per tet, cell type 10) so discontinuities survive.
pub fn write_vtk_3d(path: &Path, mesh: &Mesh3, space: &DgSpace3, field: &[f64]) -> Result<()> {
    if field.len() != space.num_dofs() {
        return Err(Error::InvalidArgument(format!(
            "field length {} does not match space dimension {}",
            field.len(),
            space.num_dofs()
        )));
    }
    let mut w = open_out(path)?;
    let e = io_err(path);
    let nc = mesh.cells.len();
    writeln!(w, "# vtk DataFile Version 3.0").map_err(&e)?;
    writeln!(w, "dg field").map_err(&e)?;
    writeln!(w, "ASCII").map_err(&e)?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID").map_err(&e)?;
    writeln!(w, "POINTS {} double", 4 * nc).map_err(&e)?;
    for cell in &mesh.cells {
        for &v in cell {
            let p = mesh.vertices[v];
            writeln!(w, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z).map_err(&e)?;
        }
    }
    writeln!(w, "CELLS {} {}", nc, 5 * nc).map_err(&e)?;
    for ci in 0..nc {
        writeln!(w, "4 {} {} {} {}", 4 * ci, 4 * ci + 1, 4 * ci + 2, 4 * ci + 3).map_err(&e)?;
    }
    writeln!(w, "CELL_TYPES {nc}").map_err(&e)?;
    for _ in 0..nc {
        writeln!(w, "10").map_err(&e)?;
    }
    writeln!(w, "POINT_DATA {}", 4 * nc).map_err(&e)?;
    writeln!(w, "SCALARS u double 1").map_err(&e)?;
    writeln!(w, "LOOKUP_TABLE default").map_err(&e)?;
    for ci in 0..nc {
        for l in 0..4 {
            writeln!(w, "{:.17e}", field[space.global_dof(ci, l)]).map_err(&e)?;
        }
    }
    w.flush().map_err(&e)?;
    Ok(())
}

/// Legacy ASCII VTK of a 1D DG field: one line cell (type 3) per mesh
/// interval with duplicated endpoints carrying the one-sided values.
pub fn write_vtk_1d(
    path: &Path,
    graph: &VesselGraph,
    space: &DgSpace1,
    field: &[f64],
) -> Result<()> {
    if field.len() != space.num_dofs() {
        return Err(Error::InvalidArgument(format!(
            "field length {} does not match space dimension {}",
            field.len(),
            space.num_dofs()
        )));
    }
    let mut w = open_out(path)?;
    let e = io_err(path);
    let n_intervals: usize = space.meshes.iter().map(|m| m.n_cells).sum();
    writeln!(w, "# vtk DataFile Version 3.0").map_err(&e)?;
    writeln!(w, "vessel field").map_err(&e)?;
    writeln!(w, "ASCII").map_err(&e)?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID").map_err(&e)?;
    writeln!(w, "POINTS {} double", 2 * n_intervals).map_err(&e)?;
    for (ei, m) in space.meshes.iter().enumerate() {
        for iv in 0..m.n_cells {
            for x in [0.0, 1.0] {
                let p = graph.point_at(ei, m.h * (iv as f64 + x));
                writeln!(w, "{:.17e} {:.17e} {:.17e}", p.x, p.y, p.z).map_err(&e)?;
            }
        }
    }
    writeln!(w, "CELLS {} {}", n_intervals, 3 * n_intervals).map_err(&e)?;
    for i in 0..n_intervals {
        writeln!(w, "2 {} {}", 2 * i, 2 * i + 1).map_err(&e)?;
    }
    writeln!(w, "CELL_TYPES {n_intervals}").map_err(&e)?;
    for _ in 0..n_intervals {
        writeln!(w, "3").map_err(&e)?;
    }
    writeln!(w, "POINT_DATA {}", 2 * n_intervals).map_err(&e)?;
    writeln!(w, "SCALARS u_hat double 1").map_err(&e)?;
    writeln!(w, "LOOKUP_TABLE default").map_err(&e)?;
    for (ei, m) in space.meshes.iter().enumerate() {
        for iv in 0..m.n_cells {
            for x in [0.0, 1.0] {
                writeln!(w, "{:.17e}", space.eval_local(field, ei, iv, x)).map_err(&e)?;
            }
        }
    }
    w.flush().map_err(&e)?;
    Ok(())
}

/// Minimal parsed form of the legacy VTK files written above.
#[derive(Debug, Clone)]
pub struct VtkData {
    pub points: Vec<Vec3>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub values: Vec<f64>,
}

/// Parse a legacy ASCII VTK unstructured grid with one scalar point field
/// (the subset this crate writes); used for round-trip checks.
pub fn read_vtk(path: &Path) -> Result<VtkData> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let bad = |msg: &str| Error::Schema {
        path: path.display().to_string(),
        message: msg.to_string(),
    };
    let mut tokens = text.split_whitespace().peekable();
    let mut points = Vec::new();
    let mut cells = Vec::new();
    let mut cell_types = Vec::new();
    let mut values = Vec::new();
    while let Some(tok) = tokens.next() {
        match tok {
            "POINTS" => {
                let n: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad("bad POINTS count"))?;
                tokens.next(); // dtype
                for _ in 0..n {
                    let mut c = [0.0; 3];
                    for v in &mut c {
                        *v = tokens
                            .next()
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| bad("bad point coordinate"))?;
                    }
                    points.push(Vec3::new(c[0], c[1], c[2]));
                }
            }
            "CELLS" => {
                let n: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad("bad CELLS count"))?;
                tokens.next(); // total ints
                for _ in 0..n {
                    let k: usize = tokens
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| bad("bad cell size"))?;
                    let mut cell = Vec::with_capacity(k);
                    for _ in 0..k {
                        cell.push(
                            tokens
                                .next()
                                .and_then(|t| t.parse().ok())
                                .ok_or_else(|| bad("bad cell index"))?,
                        );
                    }
                    cells.push(cell);
                }
            }
            "CELL_TYPES" => {
                let n: usize = tokens
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| bad("bad CELL_TYPES count"))?;
                for _ in 0..n {
                    cell_types.push(
                        tokens
                            .next()
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| bad("bad cell type"))?,
                    );
                }
            }
            "LOOKUP_TABLE" => {
                tokens.next(); // table name
                while let Some(t) = tokens.peek() {
                    match t.parse::<f64>() {
                        Ok(v) => {
                            values.push(v);
                            tokens.next();
                        }
                        Err(_) => break,
                    }
                }
            }
            _ => {}
        }
    }
    if points.is_empty() || cells.is_empty() {
        return Err(bad("missing POINTS or CELLS section"));
    }
    Ok(VtkData {
        points,
        cells,
        cell_types,
        values,
    })
}

/// Convergence-table CSV: one row per level with (value, rate) pairs; the
/// first row's rates are "-". Fixed formatting keeps output byte-stable.
pub fn write_rates_csv(
    path: &Path,
    first_col: &str,
    labels: &[String],
    rows: &[(f64, Vec<f64>)],
) -> Result<()> {
    let mut w = open_out(path)?;
    let e = io_err(path);
    let mut header = vec![first_col.to_string()];
    for l in labels {
        header.push(l.clone());
        header.push(format!("{l}_rate"));
    }
    writeln!(w, "{}", header.join(",")).map_err(&e)?;
    for (i, (h, values)) in rows.iter().enumerate() {
        let mut cols = vec![format!("{h:.6e}")];
        for (k, v) in values.iter().enumerate() {
            cols.push(format!("{v:.6e}"));
            if i == 0 {
                cols.push("-".to_string());
            } else {
                let (hp, vp) = (&rows[i - 1].0, rows[i - 1].1[k]);
                let rate = (vp / v).ln() / (hp / h).ln();
                cols.push(format!("{rate:.3}"));
            }
        }
        writeln!(w, "{}", cols.join(",")).map_err(&e)?;
    }
    w.flush().map_err(&e)?;
    Ok(())
}

/// Run report: the full effective configuration plus solver statistics
/// and any norms the run produced. A run is reconstructible from this.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: RunConfig,
    pub solver: Vec<SolverStats>,
    pub norms: Vec<NamedValue>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverStats {
    pub label: String,
    pub unknowns: usize,
    pub iterations: usize,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

pub fn write_report(path: &Path, report: &RunReport) -> Result<()> {
    let mut w = open_out(path)?;
    let e = io_err(path);
    let text = serde_json::to_string_pretty(report).map_err(|err| Error::Internal(
        format!("report serialization: {err}"),
    ))?;
    writeln!(w, "{text}").map_err(&e)?;
    w.flush().map_err(&e)?;
    Ok(())
}

/// Matrix Market coordinate export (debug aid for external solvers).
pub fn write_matrix_market(path: &Path, m: &SparseMatrix) -> Result<()> {
    let mut w = open_out(path)?;
    let e = io_err(path);
    writeln!(w, "%%MatrixMarket matrix coordinate real general").map_err(&e)?;
    writeln!(w, "{} {} {}", m.nrows, m.ncols, m.nnz()).map_err(&e)?;
    for r in 0..m.nrows {
        let (cols, vals) = m.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v).map_err(&e)?;
        }
    }
    w.flush().map_err(&e)?;
    Ok(())
}
