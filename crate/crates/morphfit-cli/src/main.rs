//! Command line driver for the morphfit library.
//!
//! Five subcommands cover the workflow: `optimize` improves mesh quality
//! without any interface term, `fit` aligns marked faces with the zero set
//! of a level-set field, `sweep` compares penalization weights, `mark`
//! previews element labeling, and `distance` builds a signed-distance
//! background field from a primitive description.
//!
//! Exit codes: 0 success, 2 input error, 3 solver failure, 4 empty fit set.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use morphfit::error::Error;
use morphfit::fitting::{
    interface_face_counts, mark_integral, mark_sign_at_max, relabel, select_fit_nodes,
    split_quads, trim, CounterMode, FitMode, WeightState,
};
use morphfit::geometry::{
    build_background, builtin_shape, distance_field, eval_levelset, load_background, load_tree,
    save_background, LevelSetField,
};
use morphfit::mesh::{
    load as load_mesh, make_cartesian, make_cartesian_tri, save as save_mesh, save_vtk,
    HighOrderMesh, TriSplit,
};
use morphfit::refelem::Geom;
use morphfit::solver::{newton_fit, newton_quality, SolverConfig, SolverReport, Termination};
use morphfit::tmop::{MetricId, TargetSpec};

#[derive(Parser)]
#[command(name = "morphfit", version, about = "High-order mesh morphing to implicit interfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize mesh quality with a Newton iteration on the TMOP objective
    Optimize(OptimizeArgs),
    /// Morph the mesh so selected faces track a level-set zero contour
    Fit(FitArgs),
    /// Run fixed-weight fits plus one adaptive fit and tabulate the errors
    Sweep(SweepArgs),
    /// Label elements against a level-set field and report interface faces
    Mark(MarkArgs),
    /// Build a background tree and signed-distance field from primitives
    Distance(DistanceArgs),
}

/// Where the working mesh comes from: a file, or a generated Cartesian
/// mesh of the unit domain.
#[derive(Args)]
struct MeshArgs {
    /// Input mesh file
    #[arg(long, value_name = "PATH", conflicts_with = "make")]
    mesh: Option<PathBuf>,
    /// Generate a mesh instead of reading one: quad, tri, hex or tet
    #[arg(long, value_name = "GEOM")]
    make: Option<String>,
    /// Cells along x for --make
    #[arg(long, default_value_t = 4)]
    nx: usize,
    /// Cells along y for --make (defaults to --nx)
    #[arg(long)]
    ny: Option<usize>,
    /// Cells along z for --make (defaults to --nx; 3D geometries only)
    #[arg(long)]
    nz: Option<usize>,
    /// Polynomial order for --make
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Triangle split pattern for --make tri: two or four per cell
    #[arg(long, default_value = "two")]
    tri_split: String,
}

impl MeshArgs {
    /// Companion hex mesh for a generated 24-tets-per-hex mesh. Marking a
    /// tet mesh element by element can leave tets with two interface faces,
    /// and tets admit no conforming split to repair that, so fitting runs
    /// mark the parent hexes instead and let each block of 24 tets inherit
    /// the hex label. Every tet has exactly one face on its parent hex
    /// boundary, so the inherited interface has one fitted face per element.
    fn parent_hex(&self) -> Result<Option<HighOrderMesh>, Error> {
        match &self.make {
            Some(geom) if geom == "tet" => {
                let nx = self.nx;
                let counts = [nx, self.ny.unwrap_or(nx), self.nz.unwrap_or(nx)];
                Ok(Some(make_cartesian(Geom::Hex, counts, self.order)?))
            }
            _ => Ok(None),
        }
    }

    fn load(&self) -> Result<HighOrderMesh, Error> {
        match (&self.mesh, &self.make) {
            (Some(path), None) => load_mesh(path),
            (None, Some(geom)) => {
                let nx = self.nx;
                let ny = self.ny.unwrap_or(nx);
                let nz = self.nz.unwrap_or(nx);
                let counts = [nx, ny, nz];
                match geom.as_str() {
                    "quad" => make_cartesian(Geom::Quad, counts, self.order),
                    "hex" => make_cartesian(Geom::Hex, counts, self.order),
                    "tet" => make_cartesian(Geom::Tet, counts, self.order),
                    "tri" => {
                        let split = match self.tri_split.as_str() {
                            "two" => TriSplit::Two,
                            "four" => TriSplit::Four,
                            other => {
                                return Err(Error::InvalidArgument(format!(
                                    "unknown --tri-split '{other}' (expected two or four)"
                                )))
                            }
                        };
                        make_cartesian_tri(counts, self.order, split)
                    }
                    other => Err(Error::InvalidArgument(format!(
                        "unknown --make geometry '{other}' (expected quad, tri, hex or tet)"
                    ))),
                }
            }
            _ => Err(Error::InvalidArgument(
                "exactly one of --mesh and --make is required".into(),
            )),
        }
    }

    fn describe(&self) -> String {
        match (&self.mesh, &self.make) {
            (Some(path), _) => path.display().to_string(),
            (_, Some(geom)) => {
                let nx = self.nx;
                let ny = self.ny.unwrap_or(nx);
                let nz = self.nz.unwrap_or(nx);
                if matches!(geom.as_str(), "quad" | "tri") {
                    format!("{geom} {nx}x{ny} order {}", self.order)
                } else {
                    format!("{geom} {nx}x{ny}x{nz} order {}", self.order)
                }
            }
            _ => "unspecified".into(),
        }
    }
}

/// Level-set source; exactly one variant must be given.
#[derive(Args)]
struct LevelArgs {
    /// Builtin shape: circle, sphere, csg2d or csg3d
    #[arg(long)]
    shape: Option<String>,
    /// Primitive tree description file
    #[arg(long, value_name = "PATH")]
    primitives: Option<PathBuf>,
    /// Discrete background field file
    #[arg(long, value_name = "PATH")]
    background: Option<PathBuf>,
    /// Spatial dimension for --primitives (other sources carry their own)
    #[arg(long, default_value_t = 2)]
    dim: usize,
}

impl LevelArgs {
    fn load(&self) -> Result<LevelSetField, Error> {
        match (&self.shape, &self.primitives, &self.background) {
            (Some(name), None, None) => builtin_shape(name),
            (None, Some(path), None) => {
                Ok(LevelSetField::analytic(load_tree(path)?, self.dim))
            }
            (None, None, Some(path)) => Ok(LevelSetField::Discrete(load_background(path)?)),
            _ => Err(Error::InvalidArgument(
                "exactly one of --shape, --primitives and --background is required".into(),
            )),
        }
    }

    fn describe(&self) -> String {
        match (&self.shape, &self.primitives, &self.background) {
            (Some(name), _, _) => format!("builtin {name}"),
            (_, Some(path), _) => format!("primitives {}", path.display()),
            (_, _, Some(path)) => format!("background {}", path.display()),
            _ => "unspecified".into(),
        }
    }
}

#[derive(Args)]
struct MetricArgs {
    /// Quality metric number: 2, 77, 80 or 303
    #[arg(long, default_value_t = 2)]
    metric: u32,
    /// Shape/size blend γ for metric 80
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    /// Target construction: ideal (unit square/cube for tensor elements,
    /// equilateral for simplices) or identity (W = I everywhere)
    #[arg(long, default_value = "ideal")]
    target: String,
}

impl MetricArgs {
    fn metric(&self) -> Result<MetricId, Error> {
        MetricId::from_number(self.metric, self.gamma)
    }

    fn target(&self, mesh: &HighOrderMesh) -> Result<TargetSpec, Error> {
        match self.target.as_str() {
            "identity" => Ok(TargetSpec::identity()),
            "ideal" => Ok(match mesh.geom() {
                Geom::Tri | Geom::Tet => TargetSpec::ideal_simplex(),
                _ => TargetSpec::identity(),
            }),
            other => Err(Error::InvalidArgument(format!(
                "unknown --target '{other}' (expected identity or ideal)"
            ))),
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Newton iteration budget N_opt
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Relative gradient tolerance ε
    #[arg(long, default_value_t = 1e-10)]
    grad_tol: f64,
    /// Interface error tolerance ε_σ
    #[arg(long, default_value_t = 1e-5)]
    eps_sigma: f64,
    /// Weight adaptation budget N_σ
    #[arg(long, default_value_t = 10)]
    n_sigma: usize,
    /// Line search halving budget
    #[arg(long, default_value_t = 30)]
    max_halvings: usize,
    /// MINRES relative residual tolerance
    #[arg(long, default_value_t = 1e-8)]
    minres_tol: f64,
    /// MINRES iteration cap; 0 picks twice the system size
    #[arg(long, default_value_t = 0)]
    minres_max_iter: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            grad_tol: self.grad_tol,
            fit_tol: self.eps_sigma,
            max_iter: self.max_iter,
            n_sigma: self.n_sigma,
            max_halvings: self.max_halvings,
            minres_tol: self.minres_tol,
            minres_max_iter: self.minres_max_iter,
        }
    }
}

#[derive(Args)]
struct WeightArgs {
    /// Initial penalization weight w_σ
    #[arg(long, default_value_t = 1.0)]
    w_sigma: f64,
    /// Adapt w_σ whenever the interface error stalls (the default)
    #[arg(long, conflicts_with = "fixed_weight")]
    adaptive: bool,
    /// Keep w_σ fixed for the whole run
    #[arg(long)]
    fixed_weight: bool,
    /// Weight growth factor α_σ
    #[arg(long, default_value_t = 10.0)]
    alpha_sigma: f64,
    /// Stagnation threshold ε_Δσ on the relative error drop
    #[arg(long, default_value_t = 1e-3)]
    eps_dsigma: f64,
    /// What n_σ counts: count (consecutive weight adaptations) or
    /// reset (iterations since the last weight change)
    #[arg(long, default_value = "count")]
    nsigma_mode: String,
}

impl WeightArgs {
    fn state(&self, n_limit: usize) -> Result<WeightState, Error> {
        if self.w_sigma <= 0.0 {
            return Err(Error::InvalidArgument("--w-sigma must be positive".into()));
        }
        let mode = match self.nsigma_mode.as_str() {
            "reset" => CounterMode::ResetOnAdapt,
            "count" => CounterMode::CountAdaptations,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown --nsigma-mode '{other}' (expected reset or count)"
                )))
            }
        };
        let mut w = if self.fixed_weight {
            WeightState::fixed(self.w_sigma)
        } else {
            WeightState::adaptive(self.w_sigma)
        };
        w.alpha_sigma = self.alpha_sigma;
        w.eps_delta_sigma = self.eps_dsigma;
        w.n_limit = n_limit;
        Ok(w.with_mode(mode))
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write the final mesh here
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write the final mesh as a VTK unstructured grid
    #[arg(long, value_name = "PATH")]
    vtk_out: Option<PathBuf>,
    /// Write the per-iteration report as CSV
    #[arg(long, value_name = "PATH")]
    csv_out: Option<PathBuf>,
}

impl OutputArgs {
    fn write(
        &self,
        mesh: &HighOrderMesh,
        header: &str,
        report: Option<&SolverReport>,
    ) -> Result<(), Error> {
        if let Some(path) = &self.out {
            save_mesh(mesh, path)?;
        }
        if let Some(path) = &self.vtk_out {
            save_vtk(mesh, path)?;
        }
        if let (Some(path), Some(report)) = (&self.csv_out, report) {
            let mut text = String::from(header);
            text.push_str(&report.to_csv());
            text.push_str(&format!("# termination = {}\n", report.termination.label()));
            std::fs::write(path, text)?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[command(flatten)]
    level: LevelArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    weight: WeightArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Which nodes to fit: interface (between material labels) or boundary
    #[arg(long, default_value = "interface")]
    mode: String,
    /// Boundary attributes to fit in boundary mode (defaults to the
    /// largest attribute present)
    #[arg(long, value_delimiter = ',')]
    attrs: Vec<i32>,
    /// Split marked elements so each keeps at most one interface face
    #[arg(long, conflicts_with = "no_split")]
    split: bool,
    /// Keep the element topology as marked, without splitting
    #[arg(long)]
    no_split: bool,
    /// Drop elements labeled other than this value after marking
    #[arg(long, value_name = "0|1|none", default_value = "none")]
    trim: String,
    /// Write the final element labels η̃ as CSV
    #[arg(long, value_name = "PATH")]
    eta_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    fit: FitArgs,
    /// Fixed weights to test, comma separated
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1,10,100,1000,10000,100000,1000000"
    )]
    weights: Vec<f64>,
    /// Write the sweep summary table as CSV
    #[arg(long, value_name = "PATH")]
    sweep_out: Option<PathBuf>,
}

#[derive(Args)]
struct MarkArgs {
    #[command(flatten)]
    mesh: MeshArgs,
    #[command(flatten)]
    level: LevelArgs,
    /// Marking rule: integral (Eq.-style averaged sign) or sign (sign at
    /// the strongest sample)
    #[arg(long, default_value = "integral")]
    rule: String,
    #[command(flatten)]
    output: OutputArgs,
    /// Write raw and relabeled element labels as CSV
    #[arg(long, value_name = "PATH")]
    eta_out: Option<PathBuf>,
}

#[derive(Args)]
struct DistanceArgs {
    #[command(flatten)]
    level: LevelArgs,
    /// Polynomial order of the background field
    #[arg(long, default_value_t = 2)]
    bg_order: usize,
    /// Maximum refinement depth of the background tree
    #[arg(long, default_value_t = 5)]
    bg_depth: usize,
    /// Lower corner of the background domain
    #[arg(long, value_delimiter = ',', default_value = "0,0,0")]
    lo: Vec<f64>,
    /// Upper corner of the background domain
    #[arg(long, value_delimiter = ',', default_value = "1,1,1")]
    hi: Vec<f64>,
    /// Write the signed-distance background field here
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

/// Exit code for a hard error: bad inputs are 2, an unusable fit set is 4
/// and everything that dies inside the solver is 3.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::EmptyFitSet(_) => 4,
        Error::Io(_)
        | Error::Parse { .. }
        | Error::UnsupportedVersion(_)
        | Error::InvalidArgument(_)
        | Error::InvalidOrder { .. }
        | Error::UnsupportedGeometry(_)
        | Error::OutOfDomain(..) => 2,
        _ => 3,
    }
}

fn header_from(pairs: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    s
}

fn print_header(header: &str) {
    print!("{header}");
}

fn solver_pairs(cfg: &SolverConfig) -> Vec<(&'static str, String)> {
    vec![
        ("max_iter", cfg.max_iter.to_string()),
        ("grad_tol", format!("{:e}", cfg.grad_tol)),
        ("eps_sigma", format!("{:e}", cfg.fit_tol)),
        ("n_sigma", cfg.n_sigma.to_string()),
        ("max_halvings", cfg.max_halvings.to_string()),
        ("minres_tol", format!("{:e}", cfg.minres_tol)),
        ("minres_max_iter", cfg.minres_max_iter.to_string()),
    ]
}

fn weight_pairs(w: &WeightState, args: &WeightArgs) -> Vec<(&'static str, String)> {
    vec![
        ("w_sigma", format!("{:e}", w.w_sigma)),
        ("weight_mode", if w.is_adaptive() { "adaptive".into() } else { "fixed".into() }),
        ("alpha_sigma", format!("{:e}", w.alpha_sigma)),
        ("eps_dsigma", format!("{:e}", w.eps_delta_sigma)),
        ("nsigma_mode", args.nsigma_mode.clone()),
    ]
}

fn cmd_optimize(args: &OptimizeArgs) -> Result<u8, Error> {
    let mut mesh = args.mesh.load()?;
    let metric = args.metric.metric()?;
    let target = args.metric.target(&mesh)?;
    let cfg = args.solver.config();
    let mut pairs = vec![
        ("subcommand", "optimize".to_string()),
        ("mesh", args.mesh.describe()),
        ("metric", metric.name()),
        ("target", args.metric.target.clone()),
    ];
    pairs.extend(solver_pairs(&cfg));
    let header = header_from(&pairs);
    print_header(&header);

    let fixed = mesh.boundary_node_set();
    let report = newton_quality(&mut mesh, &target, metric, &fixed, &cfg)?;
    args.output.write(&mesh, &header, Some(&report))?;
    let last = report.rows.last().expect("report has rows");
    println!(
        "optimize: {} iterations, termination {}, F_mu {:.6e}, min det A {:.6e}",
        report.iterations(),
        report.termination.label(),
        last.f_mu,
        last.min_det
    );
    Ok(if report.termination == Termination::GradientTolerance { 0 } else { 3 })
}

/// Marking, relabeling and topology adjustment shared by fit and sweep.
/// Returns the prepared mesh together with the fit-node selector.
fn prepare_fit_mesh(args: &FitArgs, ls: &LevelSetField) -> Result<(HighOrderMesh, FitMode), Error> {
    let mut mesh = args.mesh.load()?;
    if ls.dim() != mesh.dim() {
        return Err(Error::InvalidArgument(format!(
            "level set dimension {} does not match mesh dimension {}",
            ls.dim(),
            mesh.dim()
        )));
    }
    let interface = args.mode.as_str() == "interface";
    if !interface && args.mode.as_str() != "boundary" {
        return Err(Error::InvalidArgument(format!(
            "unknown --mode '{}' (expected interface or boundary)",
            args.mode
        )));
    }

    let wants_split = !args.no_split;
    let eta = match args.mesh.parent_hex()? {
        Some(hexes) => {
            let coarse = mark_integral(&hexes, ls)?;
            (0..mesh.num_elems()).map(|e| coarse[e / 24]).collect()
        }
        None => mark_integral(&mesh, ls)?,
    };
    let (labels, requests) = relabel(&mesh, &eta);
    let splittable = matches!(mesh.geom(), Geom::Quad | Geom::Tri);
    if wants_split && splittable {
        mesh = split_quads(&mesh, &labels, &requests)?;
    } else {
        mesh.set_material(Some(labels.clone()))?;
    }

    match args.trim.as_str() {
        "none" => {}
        "0" | "1" => {
            let keep: i32 = args.trim.parse().expect("validated literal");
            let current = mesh.material().expect("labels were just set").to_vec();
            mesh = trim(&mesh, &current, keep)?;
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown --trim '{other}' (expected 0, 1 or none)"
            )))
        }
    }

    let mode = if interface {
        FitMode::Interface
    } else {
        let attrs = if args.attrs.is_empty() {
            let max = mesh
                .boundary_faces()
                .iter()
                .map(|f| f.attr)
                .max()
                .ok_or_else(|| Error::EmptyFitSet("mesh has no boundary faces".into()))?;
            vec![max]
        } else {
            args.attrs.clone()
        };
        FitMode::Boundary(attrs)
    };
    Ok((mesh, mode))
}

fn fit_pairs(args: &FitArgs, cfg: &SolverConfig, weight: &WeightState) -> Vec<(&'static str, String)> {
    let mut pairs = vec![
        ("mesh", args.mesh.describe()),
        ("levelset", args.level.describe()),
        ("metric", args.metric.metric().map(|m| m.name()).unwrap_or_default()),
        ("target", args.metric.target.clone()),
        ("mode", args.mode.clone()),
        ("marking", marking_label(&args.mesh)),
        ("split", (!args.no_split).to_string()),
        ("trim", args.trim.clone()),
    ];
    pairs.extend(solver_pairs(cfg));
    pairs.extend(weight_pairs(weight, &args.weight));
    pairs
}

fn marking_label(mesh: &MeshArgs) -> String {
    if matches!(&mesh.make, Some(geom) if geom == "tet") {
        "parent-hex".into()
    } else {
        "element".into()
    }
}

fn write_eta(mesh: &HighOrderMesh, path: &PathBuf) -> Result<(), Error> {
    let mut text = String::from("elem,eta\n");
    if let Some(labels) = mesh.material() {
        for (e, label) in labels.iter().enumerate() {
            text.push_str(&format!("{e},{label}\n"));
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> Result<u8, Error> {
    let ls = args.level.load()?;
    let metric = args.metric.metric()?;
    let cfg = args.solver.config();
    let mut weight = args.weight.state(cfg.n_sigma)?;

    let mut pairs = vec![("subcommand", "fit".to_string())];
    pairs.extend(fit_pairs(args, &cfg, &weight));
    let header = header_from(&pairs);
    print_header(&header);

    let (mut mesh, mode) = prepare_fit_mesh(args, &ls)?;
    let target = args.metric.target(&mesh)?;
    let set = select_fit_nodes(&mesh, &mode)?;
    let fixed = mesh.boundary_node_set().without(&set);
    println!("fit: {} elements, {} fitted nodes", mesh.num_elems(), set.len());

    let report = newton_fit(&mut mesh, &target, metric, &ls, &set, &fixed, &mut weight, &cfg)?;
    args.output.write(&mesh, &header, Some(&report))?;
    if let Some(path) = &args.eta_out {
        write_eta(&mesh, path)?;
    }
    let last = report.rows.last().expect("report has rows");
    println!(
        "fit: {} iterations, termination {}, max|sigma| {:.6e}, min det A {:.6e}, final w_sigma {:.3e}",
        report.iterations(),
        report.termination.label(),
        report.final_fit_error().unwrap_or(f64::NAN),
        last.min_det,
        weight.w_sigma
    );
    Ok(if report.termination == Termination::FitTolerance { 0 } else { 3 })
}

fn cmd_sweep(args: &SweepArgs) -> Result<u8, Error> {
    let ls = args.fit.level.load()?;
    let metric = args.fit.metric.metric()?;
    let cfg = args.fit.solver.config();
    let adaptive_template = args.fit.weight.state(cfg.n_sigma)?;

    let mut pairs = vec![
        ("subcommand", "sweep".to_string()),
        ("weights", args.weights.iter().map(|w| format!("{w:e}")).collect::<Vec<_>>().join(" ")),
    ];
    pairs.extend(fit_pairs(&args.fit, &cfg, &adaptive_template));
    let header = header_from(&pairs);
    print_header(&header);

    let (mesh, mode) = prepare_fit_mesh(&args.fit, &ls)?;
    let target = args.fit.metric.target(&mesh)?;
    let set = select_fit_nodes(&mesh, &mode)?;
    let fixed = mesh.boundary_node_set().without(&set);

    let mut table = String::from(header.clone());
    table.push_str("kind,w_sigma,final_error,iterations,termination\n");
    let mut runs: Vec<(String, f64, WeightState)> = args
        .weights
        .iter()
        .map(|&w| ("fixed".to_string(), w, WeightState::fixed(w)))
        .collect();
    runs.push(("adaptive".to_string(), args.fit.weight.w_sigma, adaptive_template.clone()));

    for (kind, w0, mut weight) in runs {
        let mut trial = mesh.clone();
        match newton_fit(&mut trial, &target, metric, &ls, &set, &fixed, &mut weight, &cfg) {
            Ok(report) => {
                let err = report.final_fit_error().unwrap_or(f64::NAN);
                table.push_str(&format!(
                    "{kind},{w0:.10e},{err:.10e},{},{}\n",
                    report.iterations(),
                    report.termination.label()
                ));
                println!(
                    "sweep: {kind} w_sigma {w0:.3e} -> error {err:.6e} in {} iterations ({})",
                    report.iterations(),
                    report.termination.label()
                );
            }
            Err(e) => {
                table.push_str(&format!("{kind},{w0:.10e},,,error\n"));
                println!("sweep: {kind} w_sigma {w0:.3e} -> failed: {e}");
            }
        }
    }
    if let Some(path) = &args.sweep_out {
        std::fs::write(path, &table)?;
    }
    Ok(0)
}

fn cmd_mark(args: &MarkArgs) -> Result<u8, Error> {
    let mut mesh = args.mesh.load()?;
    let ls = args.level.load()?;
    if ls.dim() != mesh.dim() {
        return Err(Error::InvalidArgument(format!(
            "level set dimension {} does not match mesh dimension {}",
            ls.dim(),
            mesh.dim()
        )));
    }
    let pairs = vec![
        ("subcommand", "mark".to_string()),
        ("mesh", args.mesh.describe()),
        ("levelset", args.level.describe()),
        ("rule", args.rule.clone()),
    ];
    let header = header_from(&pairs);
    print_header(&header);

    let eta = match args.rule.as_str() {
        "integral" => mark_integral(&mesh, &ls)?,
        "sign" => mark_sign_at_max(&mesh, &ls)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown --rule '{other}' (expected integral or sign)"
            )))
        }
    };
    let (labels, requests) = relabel(&mesh, &eta);
    let counts = interface_face_counts(&mesh, &labels);
    let inside = labels.iter().filter(|&&l| l == 0).count();
    let flips = labels.iter().zip(&eta).filter(|(a, b)| a != b).count();
    let max_faces = counts.iter().copied().max().unwrap_or(0);
    println!(
        "mark: {} elements, {} labeled 0, {} relabel flips, {} split requests, max {} interface faces per element",
        mesh.num_elems(),
        inside,
        flips,
        requests.len(),
        max_faces
    );

    if let Some(path) = &args.eta_out {
        let mut text = String::from("elem,eta,eta_relabeled\n");
        for e in 0..mesh.num_elems() {
            text.push_str(&format!("{e},{},{}\n", eta[e], labels[e]));
        }
        std::fs::write(path, text)?;
    }
    mesh.set_material(Some(labels))?;
    args.output.write(&mesh, &header, None)?;
    Ok(0)
}

fn cmd_distance(args: &DistanceArgs) -> Result<u8, Error> {
    let ls = args.level.load()?;
    if matches!(ls, LevelSetField::Discrete(_)) {
        return Err(Error::InvalidArgument(
            "distance expects an analytic source (--shape or --primitives)".into(),
        ));
    }
    if args.lo.len() < ls.dim() || args.hi.len() < ls.dim() {
        return Err(Error::InvalidArgument(
            "--lo and --hi need one coordinate per dimension".into(),
        ));
    }
    let pairs = vec![
        ("subcommand", "distance".to_string()),
        ("levelset", args.level.describe()),
        ("bg_order", args.bg_order.to_string()),
        ("bg_depth", args.bg_depth.to_string()),
    ];
    let header = header_from(&pairs);
    print_header(&header);

    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for a in 0..ls.dim() {
        lo[a] = args.lo[a];
        hi[a] = args.hi[a];
    }
    let source = |x: [f64; 3]| eval_levelset(&ls, x).map(|e| e.sigma).unwrap_or(f64::NAN);
    let bg = build_background(source, ls.dim(), lo, hi, args.bg_order, args.bg_depth)?;
    let dist = distance_field(&bg, args.bg_order)?;
    save_background(&dist, &args.out)?;
    println!(
        "distance: {} leaves, finest cell diameter {:.6e}, written to {}",
        dist.num_leaves(),
        dist.finest_cell_diameter(),
        args.out.display()
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Optimize(args) => cmd_optimize(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Mark(args) => cmd_mark(args),
        Command::Distance(args) => cmd_distance(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
