//! The `rigidlab` command line: argument parsing, check suites that turn
//! module results into report entries, and CSV emission.

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rigidlab_core::boundary::{
    boundary_energy_inequality, dong_conditions, dong_conditions_on_chart, lemma_hh_check,
    reference_curve, solve_boundary_ode, uv_functions, AdmissibleProjector, BoundaryError,
    BoundaryProfile,
};
use rigidlab_core::darboux::{darboux_residual, support_residuals, verify_shape_identity};
use rigidlab_core::expr::parse_expression;
use rigidlab_core::flex::{
    assemble_flex_operator, first_order_residual, kernel_dimension, phi_relation_residual,
    rotation_data, w_tensor, DeformationField, KernelVerdict, Stencil,
};
use rigidlab_core::geometry::{
    brioschi_curvature, catalog_entries, codazzi_residual, frame_at, geodesic_boundary_chart,
    second_form_derivatives, BoundaryEdge, EdgeSide, Immersion,
};
use rigidlab_core::highdim::{dr_rigidity_test, DrVerdict};
use rigidlab_core::pairs::{
    check_isometric, difference_tensors, energy_inner_product, load_pair, resolve_surface,
    verify_gauss_trace_and_codazzi, verify_w_formula, IsometricPair, PairError, SurfaceRef,
};
use rigidlab_core::report::{CheckEntry, CheckKind, Report, Verdict};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_USAGE: i32 = 64;

/// Relative tolerance for pointwise identities.
pub const IDENTITY_TOL: f64 = 1e-8;

#[derive(Parser, Debug)]
#[command(name = "rigidlab", version, about = "Numerical checks of rigidity identities for hypersurfaces")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Directory for CSV plot data.
    #[arg(long, global = true)]
    pub csv_dir: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Pointwise identities of one immersion (file or catalog name).
    CheckSurface {
        surface: String,
        #[arg(long, default_value = "16x16", value_parser = parse_grid)]
        grid: Grid,
        /// Extra uniformly random interior points.
        #[arg(long, default_value_t = 0)]
        random_points: usize,
    },
    /// Difference-tensor identities of an isometric pair file.
    PairCheck {
        pair: PathBuf,
        #[arg(long, default_value = "12x12", value_parser = parse_grid)]
        grid: Grid,
        /// Quadrature counts for the energy inner product.
        #[arg(long, default_value = "32x16", value_parser = parse_grid)]
        energy_grid: Grid,
    },
    /// Kernel of the discretized linearized isometry operator.
    FlexKernel {
        surface: String,
        #[arg(long, default_value = "32x16", value_parser = parse_grid)]
        grid: Grid,
        #[arg(long, default_value_t = 1e-8)]
        svd_tol: f64,
        #[arg(long, value_enum, default_value_t = StencilArg::Forward)]
        stencil: StencilArg,
        /// Deformation field JSON whose flex identities are checked on the grid.
        #[arg(long)]
        field: Option<PathBuf>,
    },
    /// Algebraic rigidity test for a symmetric matrix `h`.
    PointwiseGauss {
        /// Comma-separated diagonal (`dim` entries) or full row-major matrix.
        #[arg(long, conflicts_with = "h_file", required_unless_present = "h_file")]
        h: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        /// JSON array of rows.
        #[arg(long)]
        h_file: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-10)]
        rank_tol: f64,
    },
    /// Boundary conditions, reference curve and energy inequality.
    Boundary {
        /// `k_g` as an expression in the angle `x1`.
        #[arg(long, group = "profile")]
        kg: Option<String>,
        /// `k_g` as an expression in arc length `x1`; needs `--length`.
        #[arg(long, group = "profile", requires = "length")]
        kg_arc: Option<String>,
        #[arg(long)]
        length: Option<f64>,
        /// CSV samples with header `theta,kg` or `s,kg`.
        #[arg(long, group = "profile")]
        kg_csv: Option<PathBuf>,
        /// Embedded boundary of a surface; needs `--edge`.
        #[arg(long, group = "profile", requires = "edge")]
        surface: Option<String>,
        /// Edge such as `x1-lo` or `x2-hi`.
        #[arg(long, value_parser = parse_edge)]
        edge: Option<BoundaryEdge>,
        #[arg(long, default_value_t = 0.1)]
        depth: f64,
        #[arg(long, default_value_t = 32)]
        samples: usize,
        #[arg(long, default_value_t = 64)]
        steps: usize,
        /// Boundary datum `f` as an expression in the angle `x1`.
        #[arg(long)]
        f: Option<String>,
        /// Random admissible trigonometric `f` to test.
        #[arg(long, default_value_t = 0)]
        random_f: usize,
        #[arg(long, default_value_t = 8)]
        degree: usize,
    },
    /// List the built-in surfaces.
    Catalog,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StencilArg {
    Forward,
    Centered4,
}

/// Grid counts such as `64x32`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid(pub Vec<usize>);

pub fn parse_grid(s: &str) -> Result<Grid, String> {
    let v = s
        .split('x')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| format!("grid must look like 64x32, got '{s}'"))?;
    if v.iter().any(|&c| c == 0) {
        return Err("grid counts must be positive".into());
    }
    Ok(Grid(v))
}

pub fn parse_edge(s: &str) -> Result<BoundaryEdge, String> {
    let bad = || format!("edge must look like x1-lo, got '{s}'");
    let (var, side) = s.split_once('-').ok_or_else(bad)?;
    let axis = var
        .strip_prefix('x')
        .and_then(|d| d.parse::<usize>().ok())
        .filter(|&d| d >= 1)
        .ok_or_else(bad)?
        - 1;
    let side = match side {
        "lo" => EdgeSide::Lo,
        "hi" => EdgeSide::Hi,
        _ => return Err(bad()),
    };
    Ok(BoundaryEdge { axis, side })
}

/// A failure that is reported as a usage error.
#[derive(Debug)]
pub struct CliError(pub String);

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CliError {}

fn err(e: impl fmt::Display) -> CliError {
    CliError(e.to_string())
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let c = &cli.common;
    if let Some(dir) = &c.csv_dir {
        std::fs::create_dir_all(dir).map_err(|e| err(format!("{}: {e}", dir.display())))?;
    }
    let report = match &cli.command {
        Command::Catalog => {
            let mut r = Report::new("catalog", c.seed);
            for e in catalog_entries() {
                writeln!(stdout, "{:<18} {}", e.syntax, e.description).map_err(err)?;
                r.input(e.name, e.syntax);
            }
            if let Some(path) = &c.report {
                std::fs::write(path, r.to_json()).map_err(err)?;
            }
            return Ok(0);
        }
        Command::CheckSurface {
            surface,
            grid,
            random_points,
        } => check_surface_command(surface, &grid.0, *random_points, c.seed)?,
        Command::PairCheck {
            pair,
            grid,
            energy_grid,
        } => pair_check_command(pair, &grid.0, &energy_grid.0, c.seed)?,
        Command::FlexKernel {
            surface,
            grid,
            svd_tol,
            stencil,
            field,
        } => flex_kernel_command(surface, &grid.0, *svd_tol, *stencil, field.as_deref(), c)?,
        Command::PointwiseGauss {
            h,
            dim,
            h_file,
            rank_tol,
        } => pointwise_gauss_command(h.as_deref(), *dim, h_file.as_deref(), *rank_tol, c.seed)?,
        Command::Boundary {
            kg,
            kg_arc,
            length,
            kg_csv,
            surface,
            edge,
            depth,
            samples,
            steps,
            f,
            random_f,
            degree,
        } => {
            let source = match (kg, kg_arc, kg_csv, surface) {
                (Some(e), _, _, _) => ProfileSource::Theta(e.clone()),
                (_, Some(e), _, _) => ProfileSource::Arc(e.clone(), length.unwrap_or(0.0)),
                (_, _, Some(p), _) => ProfileSource::Csv(p.clone()),
                (_, _, _, Some(s)) => ProfileSource::Surface {
                    surface: s.clone(),
                    edge: edge.ok_or_else(|| err("--surface needs --edge"))?,
                    depth: *depth,
                    samples: *samples,
                    steps: *steps,
                },
                _ => return Err(err("one of --kg, --kg-arc, --kg-csv, --surface is required")),
            };
            let opts = BoundaryOptions {
                f: f.clone(),
                random_f: *random_f,
                degree: *degree,
            };
            boundary_command(&source, &opts, c)?
        }
    };
    let json = report.to_json();
    match &c.report {
        Some(path) => std::fs::write(path, &json).map_err(|e| err(format!("{}: {e}", path.display())))?,
        None => stdout.write_all(json.as_bytes()).map_err(err)?,
    }
    Ok(report.exit_code())
}

/// Catalog spec or path to a surface JSON file.
pub fn load_surface(spec: &str) -> Result<Immersion, CliError> {
    resolve_surface(&SurfaceRef::Name(spec.to_string()), None).map_err(err)
}

fn check_surface_command(
    spec: &str,
    grid: &[usize],
    random_points: usize,
    seed: u64,
) -> Result<Report, CliError> {
    let im = load_surface(spec)?;
    let counts = expand_grid(grid, im.dim())?;
    let mut points = im.interior_grid(&counts);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random_points {
        points.push(im.sample_interior(&mut rng, 0.02));
    }
    let mut r = Report::new("check-surface", seed);
    r.input("surface", spec);
    r.input("grid", &counts);
    r.input("random_points", random_points);
    for e in surface_checks(&im, &points).map_err(err)? {
        r.push(e);
    }
    Ok(r)
}

fn expand_grid(grid: &[usize], dim: usize) -> Result<Vec<usize>, CliError> {
    match grid.len() {
        1 => Ok(vec![grid[0]; dim]),
        n if n == dim => Ok(grid.to_vec()),
        n => Err(err(format!("grid has {n} counts, surface has dimension {dim}"))),
    }
}

fn max_abs(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
}

/// Running maximum of a residual with the point where it occurred.
#[derive(Default)]
struct Worst {
    value: f64,
    at: Option<Vec<f64>>,
    count: usize,
    skipped: usize,
}

impl Worst {
    fn add(&mut self, v: f64, x: &[f64]) {
        self.count += 1;
        // NaN is sticky so that a broken point cannot be hidden.
        if !self.value.is_nan() && (v.is_nan() || v > self.value || self.at.is_none()) {
            self.value = v;
            self.at = Some(x.to_vec());
        }
    }

    fn entry(&self, name: &str, module: &str, anchor: &str, tol: f64) -> CheckEntry {
        if self.count == 0 {
            return CheckEntry::skip(name, CheckKind::Identity, module, anchor, "no eligible points")
                .with("skipped_points", self.skipped);
        }
        CheckEntry::residual(name, module, anchor, self.value, tol)
            .with("points", self.count)
            .with("skipped_points", self.skipped)
            .with("worst_point", &self.at)
    }
}

/// Metric, normal, Gauss, Codazzi, support, Darboux and shape identities at
/// each point, as relative residuals.
pub fn surface_checks(
    im: &Immersion,
    points: &[Vec<f64>],
) -> Result<Vec<CheckEntry>, rigidlab_core::geometry::GeometryError> {
    let n = im.dim();
    let mut normal = Worst::default();
    let mut gauss = Worst::default();
    let mut codazzi = Worst::default();
    let mut support_mu = Worst::default();
    let mut support_r = Worst::default();
    let mut darboux = Worst::default();
    let mut shape = Worst::default();
    for x in points {
        let fr = frame_at(im, x)?;
        let mut nres = (fr.normal.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs();
        for t in &fr.tangents {
            let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            let d: f64 = t.iter().zip(&fr.normal).map(|(a, b)| a * b).sum();
            nres = nres.max(d.abs() / tn);
            let vol = (fr.volume_sign.abs() - fr.det_g.sqrt()).abs() / fr.det_g.sqrt();
            nres = nres.max(vol);
        }
        normal.add(nres, x);
        if n == 2 {
            let k = brioschi_curvature(im, x)?;
            gauss.add((k - fr.curvature).abs() / fr.curvature.abs().max(1.0), x);
        }
        let dh = second_form_derivatives(im, x)?;
        let dh_scale = dh.iter().flatten().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        codazzi.add(codazzi_residual(&dh) / dh_scale, x);
        let (e1, e2) = support_residuals(im, x)?;
        support_mu.add(e1, x);
        support_r.add(e2, x);
        let sc = verify_shape_identity(im, x)?;
        match sc.residual {
            Some(res) => {
                let scale = (max_abs(&fr.second_form) * sc.mu.abs()).max(max_abs(&fr.metric)).max(1.0);
                shape.add(res / scale, x);
            }
            None => shape.skipped += 1,
        }
        if n == 2 {
            let res = darboux_residual(im, x)?;
            let ks = (fr.curvature * fr.det_g * sc.mu * sc.mu).abs();
            let gs = max_abs(&fr.metric).powi(2);
            darboux.add(res.abs() / ks.max(gs).max(1.0), x);
        }
    }
    let m = "geometry";
    let mut out = vec![
        normal.entry("normal-frame", m, "|n| = 1, n.r_i = 0, (r_1^...^r_n).n = sqrt(det g)", IDENTITY_TOL),
    ];
    if n == 2 {
        out.push(gauss.entry("gauss-equation", m, "det h / det g = K(g)", IDENTITY_TOL));
    } else {
        out.push(CheckEntry::skip("gauss-equation", CheckKind::Identity, m, "det h / det g = K(g)", "surfaces only"));
    }
    out.push(codazzi.entry("codazzi", m, "h_ij,k = h_ik,j", IDENTITY_TOL));
    let d = "darboux";
    out.push(support_mu.entry("support-norm", d, "mu^2 = 2 rho - |grad rho|^2", IDENTITY_TOL));
    out.push(support_r.entry("support-decomposition", d, "r = grad rho + mu n", IDENTITY_TOL));
    if n == 2 {
        out.push(darboux.entry("darboux-equation", d, "det(rho_;ij - g_ij) = K det(g) mu^2", IDENTITY_TOL));
    } else {
        out.push(CheckEntry::skip(
            "darboux-equation",
            CheckKind::Identity,
            d,
            "det(rho_;ij - g_ij) = K det(g) mu^2",
            "surfaces only",
        ));
    }
    out.push(shape.entry("shape-identity", d, "h_ij mu = rho_;ij - g_ij", IDENTITY_TOL));
    Ok(out)
}

fn pair_check_command(path: &Path, grid: &[usize], energy_grid: &[usize], seed: u64) -> Result<Report, CliError> {
    let pair = load_pair(path).map_err(err)?;
    let counts = expand_grid(grid, pair.first.dim())?;
    let ecounts = expand_grid(energy_grid, pair.first.dim())?;
    let mut r = Report::new("pair-check", seed);
    r.input("pair", path.display().to_string());
    r.input("grid", &counts);
    for e in pair_checks(&pair, &counts, &ecounts).map_err(err)? {
        r.push(e);
    }
    Ok(r)
}

/// Isometry, the `W` formula, the trace (or cofactor) form of the Gauss
/// equation, Codazzi for `W`, and the energy of `(g, g)`.
pub fn pair_checks(pair: &IsometricPair, counts: &[usize], energy_counts: &[usize]) -> Result<Vec<CheckEntry>, PairError> {
    let m = "pairs";
    let mut out = Vec::new();
    let dev = check_isometric(pair, counts)?;
    out.push(
        CheckEntry::residual("metric-deviation", m, "g~_ij = g_ij", dev, pair.tolerance)
            .with("grid", counts),
    );
    let mut wf = Worst::default();
    let mut trace = Worst::default();
    let mut codazzi = Worst::default();
    let mut cofactor = false;
    let mut w_max: f64 = 0.0;
    for x in pair.first.interior_grid(counts) {
        let d = difference_tensors(pair, &x)?;
        w_max = w_max.max(max_abs(&d.w));
        let scale = (max_abs(&d.h_bar) * (d.mu.abs() + d.mu_tilde.abs()))
            .max(max_abs(&d.phi_hess))
            .max(1.0);
        wf.add(verify_w_formula(pair, &x)? / scale, &x);
        let tc = verify_gauss_trace_and_codazzi(pair, &x)?;
        cofactor |= tc.used_cofactor_form;
        trace.add(tc.trace_residual, &x);
        codazzi.add(tc.codazzi_residual, &x);
    }
    out.push(
        wf.entry("w-formula", m, "W_ij (mu + mu~) = 2 Phi_;ij + h-bar_ij (mu - mu~)", IDENTITY_TOL)
            .with("max_abs_w", w_max),
    );
    out.push(
        trace
            .entry("gauss-trace", m, "h-bar^ij W_ij = 0 (cofactor form when h-bar is singular)", 1e-10)
            .with("cofactor_form", cofactor),
    );
    out.push(codazzi.entry("w-codazzi", m, "W_ij,k = W_ik,j", 1e-10));
    if pair.first.dim() == 2 {
        let g = |_: &[f64], fr: &rigidlab_core::geometry::PointFrame| fr.metric.clone();
        let anchor = "(g, g) = integral of (det h-bar/det g) h-bar^ij h-bar^kl g_ik g_jl (mu + mu~) dV";
        match energy_inner_product(pair, &g, &g, energy_counts) {
            Ok(v) => out.push(
                CheckEntry::upper_bound("energy-positivity", m, anchor, -v, 0.0)
                    .with("inner_product", v)
                    .with("quadrature", energy_counts),
            ),
            Err(PairError::Positivity { point, what }) => out.push(
                CheckEntry::skip("energy-positivity", CheckKind::Inequality, m, anchor, &what)
                    .with("point", point),
            ),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn flex_kernel_command(
    spec: &str,
    grid: &[usize],
    svd_tol: f64,
    stencil: StencilArg,
    field: Option<&Path>,
    common: &Common,
) -> Result<Report, CliError> {
    let im = load_surface(spec)?;
    let counts = expand_grid(grid, 2)?;
    let mut r = Report::new("flex-kernel", common.seed);
    r.input("surface", spec);
    r.input("grid", &counts);
    r.input("svd_tol", svd_tol);
    r.input("stencil", format!("{stencil:?}").to_lowercase());
    let st = match stencil {
        StencilArg::Forward => Stencil::Forward,
        StencilArg::Centered4 => Stencil::Centered4,
    };
    let op = assemble_flex_operator(&im, [counts[0], counts[1]], st).map_err(err)?;
    let kr = kernel_dimension(&op, svd_tol).map_err(err)?;
    if let Some(dir) = &common.csv_dir {
        let mut w = csv_writer(&dir.join("singular_values.csv"))?;
        w.write_record(["index", "sigma"]).map_err(err)?;
        for (i, s) in kr.singular_values.iter().enumerate() {
            w.write_record([i.to_string(), s.to_string()]).map_err(err)?;
        }
        w.flush().map_err(err)?;
    }
    r.push(kernel_entry(&kr, op.nodes()));
    if let Some(path) = field {
        let text = std::fs::read_to_string(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
        let f = DeformationField::from_json(&text, im.dim()).map_err(err)?;
        let points = im.interior_grid(&counts);
        for e in field_checks(&im, &f, &points).map_err(err)? {
            r.push(e);
        }
    }
    Ok(r)
}

/// Kernel verdicts map to pass, fail and indeterminate.
pub fn kernel_entry(kr: &rigidlab_core::flex::KernelReport, nodes: usize) -> CheckEntry {
    let verdict = match kr.verdict {
        KernelVerdict::Rigid => Verdict::Pass,
        KernelVerdict::Flexible => Verdict::Fail,
        KernelVerdict::Indeterminate => Verdict::Indeterminate,
    };
    CheckEntry::kernel("flex-kernel", "flex", "dim ker(dr . d tau) = dim of Euclidean motions", verdict, kr.dim as f64)
        .with("rows", kr.rows)
        .with("cols", kr.cols)
        .with("nodes", nodes)
        .with("trivial_dim", kr.trivial_dim)
        .with("sigma_max", kr.sigma_max)
        .with("sigma_kernel", kr.sigma_kernel)
        .with("sigma_next", kr.sigma_next)
        .with("gap_ratio", if kr.gap_ratio.is_finite() { Some(kr.gap_ratio) } else { None })
        .with("rel_tol", kr.rel_tol)
        .with("method", kr.method)
        .with("kernel_verdict", kr.verdict)
}

/// Flex identities of a deformation field at the given points: the
/// linearized metric, the rotation vector, the `w` tensor and the relation
/// between `w` and `φ = r·τ`.
pub fn field_checks(
    im: &Immersion,
    f: &DeformationField,
    points: &[Vec<f64>],
) -> Result<Vec<CheckEntry>, rigidlab_core::flex::FlexError> {
    let mut first = Worst::default();
    let mut rot = Worst::default();
    let mut wsym = Worst::default();
    let mut wcod = Worst::default();
    let mut phi = Worst::default();
    let mut dy_max: f64 = 0.0;
    let mut w_max: f64 = 0.0;
    for x in points {
        let fr = frame_at(im, x)?;
        let s = fr.tangent_scale().max(1.0);
        first.add(max_abs(&first_order_residual(im, f, x)?) / (s * s), x);
        let rd = rotation_data(im, f, x)?;
        rot.add(rd.residual / s, x);
        dy_max = dy_max.max(rd.dy.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())));
        let wt = w_tensor(im, f, x)?;
        w_max = w_max.max(wt.w.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())));
        wsym.add(wt.symmetry_residual.max(wt.trace_residual), x);
        wcod.add(wt.codazzi_residual, x);
        let pc = phi_relation_residual(im, f, x)?;
        match pc.residual {
            Some(v) => phi.add(v / max_abs(&fr.second_form).max(1.0), x),
            None => phi.skipped += 1,
        }
    }
    let m = "flex";
    Ok(vec![
        first.entry("first-order-isometry", m, "dr . d tau = 0", IDENTITY_TOL),
        rot.entry("rotation-vector", m, "d tau = Y x dr", IDENTITY_TOL)
            .with("max_abs_dy", dy_max),
        wsym.entry("w-symmetric-trace-free", m, "w_12 = w_21, h^ij w_ij = 0", IDENTITY_TOL)
            .with("max_abs_w", w_max),
        wcod.entry("w-codazzi", m, "w_ij,k = w_ik,j", IDENTITY_TOL),
        phi.entry("phi-relation", m, "w_ij = -phi_;ij / mu + h_ij nu / (2 mu^2)", IDENTITY_TOL),
    ])
}

/// Diagonal shorthand (`dim` entries) or a full row-major matrix.
pub fn parse_h(text: &str, dim: Option<usize>) -> Result<Vec<Vec<f64>>, CliError> {
    let v = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| err(format!("cannot parse --h '{text}'")))?;
    let n = dim.unwrap_or(v.len());
    if v.len() == n {
        Ok((0..n).map(|i| (0..n).map(|j| if i == j { v[i] } else { 0.0 }).collect()).collect())
    } else if v.len() == n * n {
        Ok(v.chunks(n).map(|r| r.to_vec()).collect())
    } else {
        Err(err(format!("--h has {} entries; expected {n} or {}", v.len(), n * n)))
    }
}

fn pointwise_gauss_command(
    h: Option<&str>,
    dim: Option<usize>,
    h_file: Option<&Path>,
    rank_tol: f64,
    seed: u64,
) -> Result<Report, CliError> {
    let mut r = Report::new("pointwise-gauss", seed);
    let hm = match (h, h_file) {
        (Some(t), _) => {
            r.input("h", t);
            parse_h(t, dim)?
        }
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p).map_err(|e| err(format!("{}: {e}", p.display())))?;
            r.input("h_file", p.display().to_string());
            serde_json::from_str::<Vec<Vec<f64>>>(&text).map_err(err)?
        }
        (None, None) => return Err(err("--h or --h-file is required")),
    };
    if let Some(d) = dim {
        if hm.len() != d {
            return Err(err(format!("matrix has size {}, --dim is {d}", hm.len())));
        }
    }
    r.input("rank_tol", rank_tol);
    for e in pointwise_gauss_checks(&hm, rank_tol).map_err(err)? {
        r.push(e);
    }
    Ok(r)
}

pub fn pointwise_gauss_checks(
    h: &[Vec<f64>],
    rank_tol: f64,
) -> Result<Vec<CheckEntry>, rigidlab_core::highdim::HighDimError> {
    let dr = dr_rigidity_test(h, rank_tol)?;
    let m = "highdim";
    let verdict = match dr.verdict {
        DrVerdict::Rigid => Verdict::Pass,
        DrVerdict::NotCertified => Verdict::Fail,
    };
    Ok(vec![
        CheckEntry::kernel(
            "linearized-gauss-nullspace",
            m,
            "w with w_ik h_jl + h_ik w_jl - w_il h_jk - h_il w_jk = 0 is zero iff rank h >= 3",
            verdict,
            dr.null_dim as f64,
        )
        .with("n", dr.n)
        .with("rank", dr.rank)
        .with("null_dim", dr.null_dim)
        .with("null_dim_diagonal", dr.null_dim_diagonal)
        .with("eigenvalues", &dr.eigenvalues)
        .with("dr_verdict", dr.verdict),
    ])
}

pub enum ProfileSource {
    Theta(String),
    Arc(String, f64),
    Csv(PathBuf),
    Surface {
        surface: String,
        edge: BoundaryEdge,
        depth: f64,
        samples: usize,
        steps: usize,
    },
}

pub struct BoundaryOptions {
    pub f: Option<String>,
    pub random_f: usize,
    pub degree: usize,
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| err(format!("{}: {e}", path.display())))
}

fn boundary_command(source: &ProfileSource, opts: &BoundaryOptions, common: &Common) -> Result<Report, CliError> {
    let mut r = Report::new("boundary", common.seed);
    let m = "boundary";
    let profile = match source {
        ProfileSource::Theta(e) => {
            r.input("kg", e);
            BoundaryProfile::from_theta_expression(e)
        }
        ProfileSource::Arc(e, l) => {
            r.input("kg_arc", e);
            r.input("length", l);
            BoundaryProfile::from_arc_expression(e, *l)
        }
        ProfileSource::Csv(p) => {
            r.input("kg_csv", p.display().to_string());
            let file = std::fs::File::open(p).map_err(|e| err(format!("{}: {e}", p.display())))?;
            BoundaryProfile::from_csv(file)
        }
        ProfileSource::Surface {
            surface,
            edge,
            depth,
            samples,
            steps,
        } => {
            r.input("surface", surface);
            r.input("edge", format!("x{}-{}", edge.axis + 1, if edge.side == EdgeSide::Lo { "lo" } else { "hi" }));
            r.input("depth", depth);
            r.input("samples", samples);
            r.input("steps", steps);
            for e in embedded_boundary_checks(&load_surface(surface)?, *edge, *depth, *samples, *steps)? {
                r.push(e);
            }
            return Ok(r);
        }
    };
    let profile = match profile {
        Ok(p) => p,
        Err(e @ BoundaryError::NonPositive { .. }) => {
            r.push(CheckEntry::condition("kg-positive", m, "k_g > 0", false, None).with("error", e.to_string()));
            return Ok(r);
        }
        Err(e) => return Err(err(e)),
    };
    let d = dong_conditions(&profile);
    r.push(CheckEntry::residual("turning", m, "integral of k_g ds = 2 pi", d.turning_residual, 1e-6).as_kind(CheckKind::Condition).with("turning", d.turning));
    r.push(CheckEntry::residual("closure", m, "integral of exp(i theta(s)) ds = 0", d.closure_residual, 1e-6).as_kind(CheckKind::Condition));
    r.push(CheckEntry::condition("kg-positive", m, "k_g > 0", d.positivity_ok, Some(d.min_kg)));
    if !profile.has_angle_parametrization() {
        return Ok(r);
    }
    let rc = reference_curve(&profile, 256).map_err(err)?;
    r.push(CheckEntry::residual("reference-curve-closure", m, "x(2 pi) = x(0)", rc.closure_gap, 1e-6).as_kind(CheckKind::Condition).with("area", rc.area).with("length", profile.length));
    r.push(CheckEntry::residual("reference-curve-curvature", m, "curvature of x(theta) = k_g(theta)", rc.curvature_residual, 1e-6));
    if let Some(dir) = &common.csv_dir {
        let mut w = csv_writer(&dir.join("gamma.csv"))?;
        w.write_record(["theta", "x1", "x2"]).map_err(err)?;
        for k in 0..rc.theta.len() {
            w.write_record([rc.theta[k].to_string(), rc.x1[k].to_string(), rc.x2[k].to_string()]).map_err(err)?;
        }
        w.flush().map_err(err)?;
    }
    if let Some(text) = &opts.f {
        r.input("f", text);
        let fe = parse_expression(text, 1).map_err(err)?;
        let f = |t: f64| fe.eval(&[t]);
        let ode = solve_boundary_ode(&profile, &f, 0.0, 0.0, 4096).map_err(err)?;
        r.push(CheckEntry::residual("boundary-ode", m, "phi_s'' + phi_s = f in theta", ode.closed_form_deviation, 1e-8));
        match boundary_energy_inequality(&profile, &f) {
            Ok(e) => {
                push_energy(&mut r, "energy", &e);
                let uv = uv_functions(&profile, &f, 256).map_err(err)?;
                r.push(CheckEntry::residual("uv-endpoints", m, "U(0) = U(pi) = 0", uv.endpoint_residual, 1e-8).with("c", uv.c));
                r.push(CheckEntry::residual("uv-relation", m, "U' cot theta = V'", uv.cot_residual, 1e-8));
                if let Some(dir) = &common.csv_dir {
                    let mut w = csv_writer(&dir.join("uv.csv"))?;
                    w.write_record(["theta", "U", "V"]).map_err(err)?;
                    for k in 0..uv.theta.len() {
                        w.write_record([uv.theta[k].to_string(), uv.u_big[k].to_string(), uv.v_big[k].to_string()]).map_err(err)?;
                    }
                    w.flush().map_err(err)?;
                }
            }
            Err(BoundaryError::Inadmissible { constraint, value }) => {
                r.push(
                    CheckEntry::condition("f-admissible", m, "u(2 pi) = v(2 pi) = integral of phi_s ds = 0", false, Some(value))
                        .with("constraint", constraint),
                );
            }
            Err(e) => return Err(err(e)),
        }
    }
    if opts.random_f > 0 {
        let proj = AdmissibleProjector::new(&profile, opts.degree).map_err(err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
        let mut worst = f64::NEG_INFINITY;
        let mut agree: f64 = 0.0;
        for _ in 0..opts.random_f {
            let t = proj.random(&mut rng);
            let f = |th: f64| t.eval(th);
            let e = boundary_energy_inequality(&profile, &f).map_err(err)?;
            worst = worst.max(e.value());
            agree = agree.max(e.agreement());
        }
        r.push(
            CheckEntry::upper_bound("energy-random-f", m, "integral of phi_s F ds <= 0", worst, 1e-10)
                .with("draws", opts.random_f)
                .with("degree", opts.degree),
        );
        r.push(CheckEntry::residual("energy-routes-random-f", m, "2 integral of -f cos u = -integral of (U/sin)^2 - 2 C^2 S", agree, 1e-6));
    }
    Ok(r)
}

fn push_energy(r: &mut Report, name: &str, e: &rigidlab_core::boundary::EnergyInequality) {
    let m = "boundary";
    r.push(
        CheckEntry::upper_bound(name, m, "integral of phi_s F ds <= 0", e.value(), 1e-10)
            .with("via_uv", e.via_uv)
            .with("c", e.c)
            .with("area", e.area),
    );
    r.push(CheckEntry::residual(
        &format!("{name}-routes"),
        m,
        "2 integral of -f cos u = -integral of (U/sin)^2 - 2 C^2 S",
        e.agreement(),
        1e-6,
    ));
}

fn embedded_boundary_checks(
    im: &Immersion,
    edge: BoundaryEdge,
    depth: f64,
    samples: usize,
    steps: usize,
) -> Result<Vec<CheckEntry>, CliError> {
    let m = "boundary";
    let chart = geodesic_boundary_chart(im, edge, depth, samples, steps).map_err(err)?;
    let d = dong_conditions_on_chart(&chart).map_err(err)?;
    let mut out = vec![
        CheckEntry::residual("turning", m, "integral of k_g ds = 2 pi", d.turning_residual, 1e-6).as_kind(CheckKind::Condition),
        CheckEntry::residual("closure", m, "integral of exp(i theta(s)) ds = 0", d.closure_residual, 1e-6).as_kind(CheckKind::Condition),
        CheckEntry::condition("kt-kg-positive", m, "K_t k_g > 0", d.positivity_ok, d.min_kt_kg),
    ];
    match lemma_hh_check(im, edge, depth, samples, steps) {
        Ok(rep) => {
            out.push(CheckEntry::residual("boundary-l-m", m, "L = M = 0 on the boundary", rep.max_abs_l.max(rep.max_abs_m), 1e-6));
            out.push(CheckEntry::residual("boundary-n", m, "N = sqrt(K_t / B_t)", rep.n_residual, 1e-4));
            out.push(CheckEntry::residual("boundary-l-t", m, "L_t = sqrt(K_t B_t)", rep.lt_residual, 1e-4));
        }
        Err(BoundaryError::Precondition(why)) => {
            out.push(CheckEntry::skip("boundary-second-form", CheckKind::Identity, m, "L = M = 0, N = sqrt(K_t/B_t), L_t = sqrt(K_t B_t)", &why));
        }
        Err(e) => return Err(err(e)),
    }
    Ok(out)
}
