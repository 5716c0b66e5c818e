//! Command-line driver: convergence studies, time stepping, and direct
//! solves on user-supplied vessel networks.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use vesseldg::assembly1d::Ipdg1Params;
use vesseldg::assembly3d::IpdgParams;
use vesseldg::coupling::{assemble_coupled, solve_coupled, CoupledData, CoupledSystem};
use vesseldg::geometry::Vec3;
use vesseldg::io::{
    read_network, write_matrix_market, write_rates_csv, write_report, write_vtk_1d, write_vtk_3d,
    NamedValue, RunConfig, RunReport, SolverStats,
};
use vesseldg::mesh3d::{GridIndex, Mesh3};
use vesseldg::network1d::{build_edge_meshes, MeshSpec, VesselGraph};
use vesseldg::spaces::{DgSpace1, DgSpace3, QuadSet};
use vesseldg::timestepping::{
    compose_mass, decaying_rhs, heat_temporal_study, l2_project_1d, l2_project_3d, BackwardEuler,
};
use vesseldg::verify::{
    conservation_residual, mms3d1d_study, network_study, ConvergenceTable, Mms3d1d, MmsNetwork,
    StudyConfig,
};
use vesseldg::{Error, Result};

#[derive(Parser)]
#[command(name = "vesseldg", about = "DG solver for coupled 3D-1D diffusion")]
struct Cli {
    /// Flat key=value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// 3D refinement level (cells per axis).
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Target 1D mesh size.
    #[arg(long, global = true)]
    h_lambda: Option<f64>,
    /// Points per section circle in the lateral average.
    #[arg(long, global = true)]
    circle_points: Option<usize>,
    /// 3D symmetry variant: -1 symmetric, 0 incomplete, 1 nonsymmetric.
    #[arg(long, global = true)]
    epsilon1: Option<i32>,
    /// 1D symmetry variant.
    #[arg(long, global = true)]
    epsilon2: Option<i32>,
    /// 3D face penalty.
    #[arg(long, global = true)]
    sigma_omega: Option<f64>,
    /// 1D interior-node penalty.
    #[arg(long, global = true)]
    sigma_lambda: Option<f64>,
    /// Junction penalty.
    #[arg(long, global = true)]
    sigma_v: Option<f64>,
    /// Default exchange coefficient.
    #[arg(long, global = true)]
    xi: Option<f64>,
    /// 1D polynomial degree (1 or 2).
    #[arg(long, global = true)]
    k2: Option<usize>,
    #[arg(long, global = true)]
    tau: Option<f64>,
    #[arg(long, global = true)]
    t_end: Option<f64>,
    /// Relative solver tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also export the assembled system in Matrix Market format.
    #[arg(long, global = true)]
    dump_system: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence study for the coupled 3D-1D manufactured solution.
    Mms3d {
        /// Comma-separated 3D refinement levels.
        #[arg(long, value_delimiter = ',', default_value = "5,9,17")]
        levels: Vec<usize>,
    },
    /// Convergence study for the bifurcating-network manufactured solution.
    MmsNetwork {
        /// Number of halvings of the initial target mesh size 0.5.
        #[arg(long, default_value_t = 5)]
        levels: usize,
    },
    /// Temporal convergence of backward Euler on the decaying solution.
    Heat {
        /// Comma-separated time steps.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.025")]
        taus: Vec<f64>,
        /// Reference time step for the error comparison.
        #[arg(long, default_value_t = 1.0 / 640.0)]
        tau_ref: f64,
    },
    /// Steady coupled solve on a vessel network from a JSON file.
    Solve {
        #[arg(long)]
        network: PathBuf,
        /// 3D refinement level (cells per axis).
        #[arg(long)]
        mesh_n: Option<usize>,
        /// Constant 1D source.
        #[arg(long, default_value_t = 1.0)]
        f_hat: f64,
        /// Constant 3D source.
        #[arg(long, default_value_t = 0.0)]
        f: f64,
        /// Box margin around the network bounding box.
        #[arg(long)]
        padding: Option<f64>,
    },
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    macro_rules! overlay {
        ($($field:ident),*) => {
            $(if let Some(v) = cli.$field.clone() { cfg.$field = Some(v).map(Into::into).unwrap(); })*
        };
    }
    overlay!(
        n,
        circle_points,
        epsilon1,
        epsilon2,
        sigma_omega,
        sigma_lambda,
        sigma_v,
        xi,
        k2,
        tau,
        t_end,
        tol,
        seed,
        out_dir
    );
    if let Some(h) = cli.h_lambda {
        cfg.h_lambda = Some(h);
    }
    if cli.dump_system {
        cfg.dump_system = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn study_config(cfg: &RunConfig, max_iterations: usize) -> Result<StudyConfig> {
    Ok(StudyConfig {
        params3: IpdgParams::new(cfg.epsilon1, cfg.sigma_omega)?,
        params1: Ipdg1Params::new(cfg.epsilon2, cfg.sigma_lambda, cfg.sigma_v)?,
        circle_points: cfg.circle_points,
        degree1: cfg.k2,
        tol: cfg.tol,
        max_iterations,
    })
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|source| Error::Io {
        path: cfg.out_dir.display().to_string(),
        source,
    })
}

fn table_stats(table: &ConvergenceTable, label: &str) -> Vec<SolverStats> {
    table
        .rows
        .iter()
        .map(|r| SolverStats {
            label: format!("{label} h={:.6e}", r.h),
            unknowns: 0,
            iterations: r.iterations,
            relative_residual: f64::NAN,
        })
        .collect()
}

fn table_norms(table: &ConvergenceTable) -> Vec<NamedValue> {
    let last = match table.rows.last() {
        Some(r) => r,
        None => return Vec::new(),
    };
    table
        .labels
        .iter()
        .zip(&last.values)
        .map(|(l, &v)| NamedValue {
            name: format!("finest_{l}"),
            value: v,
        })
        .collect()
}

/// Assemble and solve one steady coupled problem; shared by the artifact
/// writers of `mms3d`, `heat`, and `solve`.
struct SteadyRun<'m> {
    space3: DgSpace3<'m>,
    space1: DgSpace1,
    sys: CoupledSystem,
}

fn assemble_steady<'m>(
    mesh: &'m Mesh3,
    graph: &VesselGraph,
    mesh_spec: MeshSpec,
    cfg: &RunConfig,
    study: &StudyConfig,
    data: &CoupledData,
) -> Result<SteadyRun<'m>> {
    let space3 = DgSpace3::new(mesh);
    let index = GridIndex::build(mesh);
    let meshes = build_edge_meshes(graph, mesh_spec)?;
    let space1 = DgSpace1::new(meshes, cfg.k2)?;
    let quad = QuadSet::new()?;
    let sys = assemble_coupled(
        &space3,
        &index,
        graph,
        &space1,
        study.params3,
        study.params1,
        cfg.circle_points,
        &quad,
        data,
    )?;
    Ok(SteadyRun { space3, space1, sys })
}

fn write_fields(
    cfg: &RunConfig,
    mesh: &Mesh3,
    graph: &VesselGraph,
    run: &SteadyRun,
    u: &[f64],
) -> Result<()> {
    write_vtk_3d(
        &cfg.out_dir.join("u3d.vtk"),
        mesh,
        &run.space3,
        &u[..run.sys.n3],
    )?;
    write_vtk_1d(
        &cfg.out_dir.join("u1d.vtk"),
        graph,
        &run.space1,
        &u[run.sys.n3..run.sys.n3 + run.sys.n1],
    )?;
    if cfg.dump_system {
        write_matrix_market(&cfg.out_dir.join("system.mtx"), &run.sys.matrix)?;
    }
    Ok(())
}

fn run_mms3d(cfg: &RunConfig, levels: &[usize]) -> Result<RunReport> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument("at least one level required".into()));
    }
    let study = study_config(cfg, 50_000)?;
    let mms = Mms3d1d {
        xi: cfg.xi,
        ..Mms3d1d::default()
    };
    let table = mms3d1d_study(&mms, levels, &study)?;

    // Re-solve the finest level to export the fields.
    let n = *levels.last().unwrap();
    let (lo, hi) = mms.box_corners();
    let mesh = Mesh3::build_box(n, lo, hi)?;
    let graph = mms.graph()?;
    let f3 = |p: Vec3| mms.f3(p);
    let g3 = |p: Vec3| mms.exact_u(p);
    let f1 = |_e: usize, s: f64| mms.f1(s);
    let g1 = |_v: usize| 0.0;
    let data = CoupledData {
        f3: &f3,
        g3: &g3,
        f1: &f1,
        dirichlet_vertices: &[],
        g1: &g1,
    };
    let run = assemble_steady(&mesh, &graph, MeshSpec::CellsPerEdge(n), cfg, &study, &data)?;
    let (u, report) = solve_coupled(&run.sys, study.params3, study.params1, cfg.tol, 50_000)?;

    ensure_out_dir(cfg)?;
    let rows: Vec<(f64, Vec<f64>)> = table.rows.iter().map(|r| (r.h, r.values.clone())).collect();
    write_rates_csv(&cfg.out_dir.join("rates.csv"), "h", &table.labels, &rows)?;
    write_fields(cfg, &mesh, &graph, &run, &u)?;
    let mut solver = table_stats(&table, "mms3d");
    solver.push(SolverStats {
        label: format!("mms3d field export n={n}"),
        unknowns: run.sys.matrix.nrows,
        iterations: report.iterations,
        relative_residual: report.relative_residual,
    });
    Ok(RunReport {
        command: "mms3d".into(),
        config: cfg.clone(),
        solver,
        norms: table_norms(&table),
        warnings: Vec::new(),
    })
}

fn run_mms_network(cfg: &RunConfig, levels: usize) -> Result<RunReport> {
    if levels == 0 {
        return Err(Error::InvalidArgument("at least one level required".into()));
    }
    let mut study = study_config(cfg, 200_000)?;
    // The standalone network solve tolerates (and benefits from) a tight
    // tolerance; the conservation check below depends on it.
    study.tol = study.tol.min(1e-12);
    let mms = MmsNetwork;
    let hs: Vec<f64> = (0..levels).map(|i| 0.5 / (1u64 << i) as f64).collect();
    let table = network_study(&mms, &hs, &study)?;

    // Re-solve the finest level for the field export and conservation check.
    let graph = mms.graph();
    let meshes = build_edge_meshes(&graph, MeshSpec::TargetH(*hs.last().unwrap()))?;
    let space1 = DgSpace1::new(meshes, cfg.k2)?;
    let mult = vesseldg::assembly1d::MultiplierSpace::new(&graph);
    let n1 = space1.num_dofs();
    let total = n1 + mult.num_dofs();
    let a1 = vesseldg::assembly1d::assemble_a_lambda(&space1, &graph, study.params1);
    let bv = vesseldg::assembly1d::assemble_b_v(&space1, &graph, &mult, study.params1);
    let boundary = graph.classify_vertices().boundary;
    let (d1, rhs_d) = vesseldg::assembly1d::vertex_dirichlet(
        &space1,
        &graph,
        study.params1,
        &boundary,
        |v| mms.g1(&graph, v),
    )?;
    let matrix = vesseldg::linalg::block_compose(
        total,
        total,
        &[(0, 0, &a1, 1.0), (0, 0, &bv, 1.0), (0, 0, &d1, 1.0)],
    )?;
    let load = vesseldg::assembly1d::assemble_load_1d(&space1, &graph, |e, s| mms.f1(e, s));
    let mut rhs = vec![0.0; total];
    for i in 0..n1 {
        rhs[i] = load[i] + rhs_d[i];
    }
    let (u, report) =
        vesseldg::linalg::cg_solve(&matrix, &rhs, study.tol, study.max_iterations, true)?;
    let cons = conservation_residual(&space1, &graph, &mult, study.params1, &u[..n1], &u[n1..]);
    if cons > 1e-8 {
        return Err(Error::NoConvergence {
            iterations: report.iterations,
            residual: cons,
        });
    }

    ensure_out_dir(cfg)?;
    let rows: Vec<(f64, Vec<f64>)> = table.rows.iter().map(|r| (r.h, r.values.clone())).collect();
    write_rates_csv(&cfg.out_dir.join("rates.csv"), "h", &table.labels, &rows)?;
    write_vtk_1d(&cfg.out_dir.join("u1d.vtk"), &graph, &space1, &u[..n1])?;
    if cfg.dump_system {
        write_matrix_market(&cfg.out_dir.join("system.mtx"), &matrix)?;
    }
    let mut solver = table_stats(&table, "mms-network");
    solver.push(SolverStats {
        label: "mms-network field export".into(),
        unknowns: total,
        iterations: report.iterations,
        relative_residual: report.relative_residual,
    });
    let mut norms = table_norms(&table);
    norms.push(NamedValue {
        name: "conservation_residual".into(),
        value: cons,
    });
    Ok(RunReport {
        command: "mms-network".into(),
        config: cfg.clone(),
        solver,
        norms,
        warnings: Vec::new(),
    })
}

fn run_heat(cfg: &RunConfig, taus: &[f64], tau_ref: f64) -> Result<RunReport> {
    if taus.is_empty() || tau_ref <= 0.0 || taus.iter().any(|&t| t <= tau_ref) {
        return Err(Error::InvalidArgument(
            "taus must be positive and larger than tau_ref".into(),
        ));
    }
    let study = study_config(cfg, 50_000)?;
    let mms = Mms3d1d {
        xi: cfg.xi,
        ..Mms3d1d::default()
    };
    let (lo, hi) = mms.box_corners();
    let mesh = Mesh3::build_box(cfg.n, lo, hi)?;
    let graph = mms.graph()?;
    let f3 = |p: Vec3| mms.f3(p);
    let g3 = |p: Vec3| mms.exact_u(p);
    let f1 = |_e: usize, s: f64| mms.f1(s);
    let g1 = |_v: usize| 0.0;
    let data = CoupledData {
        f3: &f3,
        g3: &g3,
        f1: &f1,
        dirichlet_vertices: &[],
        g1: &g1,
    };
    let run = assemble_steady(
        &mesh,
        &graph,
        MeshSpec::CellsPerEdge(cfg.n),
        cfg,
        &study,
        &data,
    )?;
    let quad = QuadSet::new()?;
    let mass = compose_mass(&run.space3, &run.space1, &graph, run.sys.mult.num_dofs())?;
    let rhs0 = decaying_rhs(
        &run.sys,
        &run.space3,
        &run.space1,
        &graph,
        &quad,
        &run.sys.rhs,
        |p| mms.exact_u(p),
        |_, s| mms.u_hat(s),
    );
    let mut u0 = l2_project_3d(&run.space3, &quad, |p| mms.exact_u(p));
    u0.extend(l2_project_1d(&run.space1, |_, s| mms.u_hat(s)));
    u0.resize(run.sys.matrix.nrows, 0.0);
    let heat = heat_temporal_study(
        &run.sys,
        &mass,
        &rhs0,
        &u0,
        cfg.t_end,
        taus,
        tau_ref,
        cfg.tol.min(1e-11),
        100_000,
    )?;

    // One extra pass at the coarsest step to export the final-time fields.
    let stepper = BackwardEuler::new(
        &run.sys.matrix,
        mass,
        taus[0],
        cfg.tol.min(1e-11),
        100_000,
    )?;
    let n_steps = (cfg.t_end / taus[0]).round().max(1.0) as usize;
    let mut u = u0.clone();
    let mut last_iters = 0;
    for k in 1..=n_steps {
        let t = taus[0] * k as f64;
        let rhs: Vec<f64> = rhs0.iter().map(|r| r * (-t).exp()).collect();
        let (next, rep) = stepper.step(&u, &rhs)?;
        u = next;
        last_iters = rep.iterations;
    }

    ensure_out_dir(cfg)?;
    let rows: Vec<(f64, Vec<f64>)> = heat
        .taus
        .iter()
        .zip(&heat.errors)
        .map(|(&t, &e)| (t, vec![e]))
        .collect();
    write_rates_csv(
        &cfg.out_dir.join("rates.csv"),
        "tau",
        &["l2_final".to_string()],
        &rows,
    )?;
    write_fields(cfg, &mesh, &graph, &run, &u)?;
    let solver = vec![SolverStats {
        label: format!("heat final step tau={}", taus[0]),
        unknowns: run.sys.matrix.nrows,
        iterations: last_iters,
        relative_residual: f64::NAN,
    }];
    let norms = heat
        .rates
        .iter()
        .enumerate()
        .map(|(i, &r)| NamedValue {
            name: format!("temporal_rate_{i}"),
            value: r,
        })
        .collect();
    Ok(RunReport {
        command: "heat".into(),
        config: cfg.clone(),
        solver,
        norms,
        warnings: Vec::new(),
    })
}

fn run_solve(
    cfg: &RunConfig,
    network: &Path,
    mesh_n: Option<usize>,
    f_hat: f64,
    f: f64,
    padding: Option<f64>,
) -> Result<RunReport> {
    let graph = read_network(network)?;
    let n = mesh_n.unwrap_or(cfg.n);
    if n == 0 {
        return Err(Error::InvalidArgument("mesh-n must be positive".into()));
    }

    // Box: bounding box of the network, padded so the vessel surfaces stay
    // strictly inside (section circles of boundary vertices included).
    let mut lo = graph.vertices[0];
    let mut hi = graph.vertices[0];
    for v in &graph.vertices {
        lo = Vec3::new(lo.x.min(v.x), lo.y.min(v.y), lo.z.min(v.z));
        hi = Vec3::new(hi.x.max(v.x), hi.y.max(v.y), hi.z.max(v.z));
    }
    let r_max = graph
        .edges
        .iter()
        .map(|e| e.radius)
        .fold(0.0_f64, f64::max);
    let extent = (hi - lo).norm().max(1.0);
    let pad = padding.unwrap_or((2.0 * r_max).max(0.05 * extent));
    let lo = lo - Vec3::new(pad, pad, pad);
    let hi = hi + Vec3::new(pad, pad, pad);
    let mesh = Mesh3::build_box(n, lo, hi)?;

    let study = study_config(cfg, 200_000)?;
    let f3 = move |_p: Vec3| f;
    let g3 = |_p: Vec3| 0.0;
    let f1 = move |_e: usize, _s: f64| f_hat;
    let g1 = |_v: usize| 0.0;
    let data = CoupledData {
        f3: &f3,
        g3: &g3,
        f1: &f1,
        dirichlet_vertices: &[],
        g1: &g1,
    };
    let mesh_spec = match cfg.h_lambda {
        Some(h) => MeshSpec::TargetH(h),
        None => MeshSpec::CellsPerEdge(n),
    };
    let run = assemble_steady(&mesh, &graph, mesh_spec, cfg, &study, &data)?;
    let (u, report) = solve_coupled(&run.sys, study.params3, study.params1, cfg.tol, 200_000)?;
    let cons = conservation_residual(
        &run.space1,
        &graph,
        &run.sys.mult,
        study.params1,
        &u[run.sys.n3..run.sys.n3 + run.sys.n1],
        &u[run.sys.n3 + run.sys.n1..],
    );

    ensure_out_dir(cfg)?;
    write_fields(cfg, &mesh, &graph, &run, &u)?;
    let min3 = u[..run.sys.n3].iter().cloned().fold(f64::INFINITY, f64::min);
    let max3 = u[..run.sys.n3]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let u1 = &u[run.sys.n3..run.sys.n3 + run.sys.n1];
    let min1 = u1.iter().cloned().fold(f64::INFINITY, f64::min);
    let max1 = u1.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(RunReport {
        command: "solve".into(),
        config: cfg.clone(),
        solver: vec![SolverStats {
            label: format!("solve n={n}"),
            unknowns: run.sys.matrix.nrows,
            iterations: report.iterations,
            relative_residual: report.relative_residual,
        }],
        norms: vec![
            NamedValue {
                name: "u3d_min".into(),
                value: min3,
            },
            NamedValue {
                name: "u3d_max".into(),
                value: max3,
            },
            NamedValue {
                name: "u1d_min".into(),
                value: min1,
            },
            NamedValue {
                name: "u1d_max".into(),
                value: max1,
            },
            NamedValue {
                name: "conservation_residual".into(),
                value: cons,
            },
        ],
        warnings: Vec::new(),
    })
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = effective_config(cli)?;
    let report = match &cli.command {
        Command::Mms3d { levels } => run_mms3d(&cfg, levels)?,
        Command::MmsNetwork { levels } => run_mms_network(&cfg, *levels)?,
        Command::Heat { taus, tau_ref } => run_heat(&cfg, taus, *tau_ref)?,
        Command::Solve {
            network,
            mesh_n,
            f_hat,
            f,
            padding,
        } => run_solve(&cfg, network, *mesh_n, *f_hat, *f, *padding)?,
    };
    write_report(&cfg.out_dir.join("report.json"), &report)?;
    Ok(())
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) | Error::Schema { .. } | Error::Io { .. } => 2,
        Error::MeshInvalid(_) | Error::OutOfDomain(..) | Error::Geometry(_) => 3,
        Error::NotSpd(_) | Error::NoConvergence { .. } | Error::NonsymmetricVariant => 4,
        Error::Internal(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_for(&err))
        }
    }
}
