use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use twingraph::{
    angle_function, angle_integrability_probe, cheeger_constant, cheng_yau_check, coarea_identity, dualize_with,
    existence_classifier, generalized_gradient, generate, heinz_flux_check, hessian_from_minimal,
    max_diff_mod_constant, mean_curvature, nil_growth_check, roundtrip_error, solve_dirichlet, timelike_circle_range,
    twin_gradient, write_obj, Causal, DirichletProblem, DomainSpec, DualizeOptions, Error, ErrorClass, EstimateReport,
    Example, FrameField, FundamentalForm, GridFile, ScalarField, SolverControls, SpaceParams, TwinDirection,
};

#[derive(Parser)]
#[command(name = "twingraph", version, about = "Twin CMC graphs in E(κ,τ) and L(κ,τ)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean curvature field of a graph: JSON summary line, then CSV rows.
    Curvature {
        input: PathBuf,
        /// Also write the field as a grid file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Twin graph of a CMC graph.
    Dualize {
        input: PathBuf,
        /// Gauge point `cx,cy`; the twin vanishes at the nearest usable node.
        #[arg(long, value_parser = parse_point)]
        anchor: Option<(f64, f64)>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Skip the constant mean curvature test.
        #[arg(long)]
        no_cmc_check: bool,
    },
    /// Residuals of a candidate twin pair.
    Verify { u: PathBuf, v: PathBuf },
    /// Dirichlet problem for prescribed mean curvature.
    Solve {
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        kappa: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        tau: f64,
        #[arg(long = "H", default_value_t = 0.0, allow_negative_numbers = true)]
        mean_curvature: f64,
        /// Solve in L(κ,τ) instead of E(κ,τ).
        #[arg(long)]
        lorentzian: bool,
        #[command(flatten)]
        grid: GridArgs,
        /// Boundary data, `const:c`.
        #[arg(long, default_value = "const:0", value_parser = parse_bc)]
        bc: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Solver report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sample a catalog surface.
    Example {
        name: String,
        #[arg(long = "H", default_value_t = 1.0, allow_negative_numbers = true)]
        mean_curvature: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hessian-one potential of a minimal graph in R³.
    Hessian {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Existence classification of L(κ,τ).
    Feasibility {
        #[arg(long, allow_negative_numbers = true)]
        kappa: f64,
        #[arg(long, allow_negative_numbers = true)]
        tau: f64,
    },
    /// Numerical estimate checks.
    Estimate {
        #[command(subcommand)]
        which: Estimate,
    },
    /// Triangulated graph as Wavefront OBJ.
    Mesh {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GridArgs {
    /// `disk:R` or `rect:a,b` (half-widths).
    #[arg(long, default_value = "disk:0.8", value_parser = parse_shape)]
    shape: Shape,
    /// Grid spacing.
    #[arg(long = "h", default_value_t = 0.02)]
    spacing: f64,
}

#[derive(Subcommand)]
enum Estimate {
    /// Flux and isoperimetric checks on disks of the given radii.
    Heinz {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
    },
    /// Gradient bound for spacelike CMC graphs in L(0,τ).
    Chengyau {
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        radii: Vec<f64>,
    },
    /// Growth constants of a minimal graph in Nil₃.
    Nilgrowth {
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        radii: Vec<f64>,
    },
    /// Coarea identity on one disk.
    Coarea {
        input: PathBuf,
        #[arg(long)]
        radius: f64,
        /// Test function grid; defaults to 1.
        #[arg(long)]
        f: Option<PathBuf>,
    },
    /// Growth of the integrated angle function.
    Angle {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        radii: Vec<f64>,
    },
}

#[derive(Clone, Copy)]
enum Shape {
    Disk(f64),
    Rect(f64, f64),
}

impl Shape {
    fn domain(self, h: f64) -> twingraph::Result<DomainSpec> {
        match self {
            Shape::Disk(r) => DomainSpec::disk(r, h),
            Shape::Rect(a, b) => DomainSpec::rect(a, b, h),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim().parse().map_err(|_| format!("'{s}' is not a number"))
}

fn parse_point(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected cx,cy")?;
    Ok((parse_f64(a)?, parse_f64(b)?))
}

fn parse_shape(s: &str) -> Result<Shape, String> {
    match s.split_once(':') {
        Some(("disk", r)) => Ok(Shape::Disk(parse_f64(r)?)),
        Some(("rect", ab)) => {
            let (a, b) = parse_point(ab).map_err(|_| "expected rect:a,b".to_string())?;
            Ok(Shape::Rect(a, b))
        }
        _ => Err("expected disk:R or rect:a,b".into()),
    }
}

fn parse_bc(s: &str) -> Result<f64, String> {
    match s.split_once(':') {
        Some(("const", c)) => parse_f64(c),
        _ => Err("expected const:c".into()),
    }
}

fn emit(path: Option<&Path>, text: &str) -> twingraph::Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn params_json(p: &SpaceParams) -> Value {
    json!({ "kappa": p.kappa, "bundle": p.bundle, "causal": p.causal })
}

fn curvature(input: &Path, out: Option<&Path>) -> twingraph::Result<()> {
    let g = GridFile::read(input)?;
    let hf = mean_curvature(&g.field, &g.params)?;
    let d = hf.domain();
    let summary = json!({ "min": hf.min(), "max": hf.max(), "mean": hf.mean(), "nx": d.nx, "ny": d.ny });
    let text = GridFile::new(hf.clone(), g.params, None).to_text();
    let csv = text.split_once('\n').map_or("", |(_, rest)| rest);
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{summary}")?;
    stdout.write_all(csv.as_bytes())?;
    if let Some(p) = out {
        GridFile::new(hf, g.params, None).write(p)?;
    }
    Ok(())
}

fn dualize(
    input: &Path,
    anchor: Option<(f64, f64)>,
    out: Option<&Path>,
    report: Option<&Path>,
    no_cmc_check: bool,
) -> twingraph::Result<()> {
    let g = GridFile::read(input)?;
    let anchor = match anchor {
        Some((x, y)) => Some(
            g.field
                .domain()
                .core()
                .nearest_active(x, y)
                .ok_or_else(|| Error::InvalidDomain("no node with four active neighbours for the anchor".into()))?,
        ),
        None => None,
    };
    let mut opts = DualizeOptions {
        anchor,
        mean_curvature: g.h_expected,
        ..DualizeOptions::default()
    };
    if no_cmc_check {
        opts.cmc_check = None;
    }
    let pair = dualize_with(&g.field, &g.params, &opts)?;
    let (ai, aj) = pair.anchor;
    let mut rep = Map::new();
    rep.insert("source_params".into(), params_json(&pair.source_params));
    rep.insert("target_params".into(), params_json(&pair.target_params));
    rep.insert("mean_curvature".into(), json!(pair.target_params.bundle));
    rep.insert("anchor".into(), json!([ai, aj]));
    rep.insert("anchor_point".into(), json!(pair.source.domain().coords(ai, aj)));
    if let Value::Object(m) = serde_json::to_value(pair.residuals).expect("residuals serialize") {
        rep.extend(m);
    }
    rep.insert("roundtrip_residual".into(), json!(roundtrip_error(&pair)?));
    let target = GridFile::new(pair.target, pair.target_params, Some(pair.source_params.bundle));
    emit(out, &target.to_text())?;
    if let Some(p) = report {
        fs::write(p, to_json(&rep))?;
    }
    Ok(())
}

/// Restricts both frames to the nodes where both use central differences.
fn common_frames(u: &GridFile, v: &GridFile) -> twingraph::Result<(FrameField, FrameField)> {
    let (du, dv) = (u.field.domain(), v.field.domain());
    if !du.same_lattice(dv) {
        return Err(Error::InvalidDomain("grids live on different lattices".into()));
    }
    let (cu, cv) = (du.core(), dv.core());
    let mask: Vec<bool> = cu.mask().iter().zip(cv.mask()).map(|(a, b)| *a && *b).collect();
    if !mask.iter().any(|&m| m) {
        return Err(Error::InvalidDomain("grids share no interior node".into()));
    }
    let common = DomainSpec::new(du.x0, du.y0, du.h, du.nx, du.ny)?.with_mask(mask)?;
    let fu = generalized_gradient(&u.field, &u.params)?.restrict(&common)?;
    let fv = generalized_gradient(&v.field, &v.params)?.restrict(&common)?;
    Ok((fu, fv))
}

fn verify(u_path: &Path, v_path: &Path) -> twingraph::Result<()> {
    let u = GridFile::read(u_path)?;
    let v = GridFile::read(v_path)?;
    if u.params.causal == v.params.causal || u.params.kappa != v.params.kappa {
        return Err(Error::Format(
            "second grid must live in the twin space (same kappa, opposite causal type)".into(),
        ));
    }
    let (fu, fv) = common_frames(&u, &v)?;
    let dir = TwinDirection::from_source(u.params.causal);
    let twinned = twin_gradient(&fu, dir, v.params.bundle)?;
    let d = fu.domain();
    let (nu_u, nu_v) = (angle_function(&fu), angle_function(&fv));
    let (iu, iv) = (FundamentalForm::from_frame(&fu), FundamentalForm::from_frame(&fv));
    let (mut omega, mut angle, mut twin, mut conf) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (i, j) in d.active_nodes() {
        let k = d.idx(i, j);
        let w = fu.omega()[k];
        omega = omega.max((w * fv.omega()[k] - 1.0).abs());
        angle = angle.max((nu_u.at(i, j) * nu_v.at(i, j) - 1.0).abs());
        twin = twin
            .max((twinned.alpha()[k] - fv.alpha()[k]).abs())
            .max((twinned.beta()[k] - fv.beta()[k]).abs());
        // The Lorentzian side is the conformal one: Ĩ = ω⁻² I.
        let (src, tw, wsrc) = match u.params.causal {
            Causal::Riemannian => (iu.frame_entries(i, j), iv.frame_entries(i, j), w),
            Causal::Lorentzian => (iv.frame_entries(i, j), iu.frame_entries(i, j), fv.omega()[k]),
        };
        for (a, b) in src.iter().zip(&tw) {
            conf = conf.max((b - a / (wsrc * wsrc)).abs());
        }
    }
    let back = dualize_with(
        &v.field,
        &v.params,
        &DualizeOptions {
            cmc_check: None,
            mean_curvature: Some(u.params.bundle),
            ..DualizeOptions::default()
        },
    )?;
    let (roundtrip, _) = max_diff_mod_constant(&back.target, &u.field)?;
    let rep = json!({
        "nodes": d.active_count(),
        "omega_product_residual": omega,
        "angle_product_residual": angle,
        "twin_residual": twin,
        "conformality_residual": conf,
        "roundtrip_residual": roundtrip,
    });
    print!("{}", to_json(&rep));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn solve(
    params: SpaceParams,
    hh: f64,
    grid: &GridArgs,
    bc: f64,
    tol: f64,
    max_iter: usize,
    out: Option<&Path>,
    report: Option<&Path>,
) -> twingraph::Result<()> {
    let dom = grid.shape.domain(grid.spacing)?;
    let problem = DirichletProblem::new(params, hh, dom, |_, _| bc)?.with_controls(SolverControls {
        tolerance: tol,
        max_iterations: max_iter,
        ..SolverControls::default()
    });
    let (u, rep) = solve_dirichlet(&problem)?;
    emit(out, &GridFile::new(u, params, Some(hh)).to_text())?;
    if let Some(p) = report {
        fs::write(p, to_json(&rep))?;
    }
    Ok(())
}

fn example(name: &str, hh: f64, grid: &GridArgs, out: Option<&Path>) -> twingraph::Result<()> {
    let e: Example = name.parse()?;
    let s = generate(e, hh, &grid.shape.domain(grid.spacing)?)?;
    emit(out, &GridFile::new(s.field, s.params, Some(s.mean_curvature)).to_text())
}

fn hessian(input: &Path, out: Option<&Path>) -> twingraph::Result<()> {
    let g = GridFile::read(input)?;
    let r3 = SpaceParams::riemannian(0.0, 0.0);
    if g.params != r3 {
        return Err(Error::Precondition(
            "the Hessian-one construction needs a graph in R^3".into(),
        ));
    }
    let sol = hessian_from_minimal(&g.field, None)?;
    if let Some(p) = out {
        GridFile::new(sol.f.clone(), r3, None).write(p)?;
    }
    let (ai, aj) = sol.anchor;
    let rep = json!({
        "anchor": [ai, aj],
        "max_det_error": sol.diagnostics.max_det_error,
        "integrability_residual": sol.diagnostics.integrability,
        "mixed_residual": sol.diagnostics.mixed,
        "convex": sol.diagnostics.convex,
        "det_nodes": sol.det_residual.domain().active_count(),
    });
    print!("{}", to_json(&rep));
    Ok(())
}

fn feasibility(kappa: f64, tau: f64) -> twingraph::Result<()> {
    if !kappa.is_finite() || !tau.is_finite() {
        return Err(Error::InvalidDomain("kappa and tau must be finite".into()));
    }
    let p = SpaceParams::lorentzian(kappa, tau);
    let radii = timelike_circle_range(&p)?.map(|r| format!("({},{})", r.lower, r.upper));
    let rep = json!({
        "kappa": kappa,
        "tau": tau,
        "discriminant": p.discriminant(),
        "verdict": existence_classifier(&p)?,
        "timelike_circle_radii": radii,
        "cheeger_constant": cheeger_constant(kappa),
    });
    print!("{}", to_json(&rep));
    Ok(())
}

fn estimate(which: &Estimate) -> twingraph::Result<()> {
    let rep: EstimateReport = match which {
        Estimate::Heinz { input, radii } => {
            let g = GridFile::read(input)?;
            heinz_flux_check(&g.field, &g.params, radii, g.h_expected)?
        }
        Estimate::Chengyau { input, radii } => {
            let g = GridFile::read(input)?;
            cheng_yau_check(&g.field, &g.params, radii, g.h_expected)?
        }
        Estimate::Nilgrowth { input, radii } => {
            let g = GridFile::read(input)?;
            nil_growth_check(&g.field, &g.params, radii)?
        }
        Estimate::Coarea { input, radius, f } => {
            let g = GridFile::read(input)?;
            let test = match f {
                Some(p) => GridFile::read(p)?.field,
                None => ScalarField::constant(g.field.domain().clone(), 1.0)?,
            };
            coarea_identity(&g.field, &g.params, &test, *radius)?
        }
        Estimate::Angle { input, radii } => {
            let g = GridFile::read(input)?;
            angle_integrability_probe(&g.field, &g.params, radii)?
        }
    };
    print!("{}", to_json(&rep));
    Ok(())
}

fn mesh(input: &Path, out: &Path) -> twingraph::Result<()> {
    let g = GridFile::read(input)?;
    let mut buf = Vec::new();
    write_obj(&g.field, &mut buf)?;
    fs::write(out, buf)?;
    Ok(())
}

fn run(cli: Cli) -> twingraph::Result<()> {
    match cli.command {
        Command::Curvature { input, out } => curvature(&input, out.as_deref()),
        Command::Dualize {
            input,
            anchor,
            out,
            report,
            no_cmc_check,
        } => dualize(&input, anchor, out.as_deref(), report.as_deref(), no_cmc_check),
        Command::Verify { u, v } => verify(&u, &v),
        Command::Solve {
            kappa,
            tau,
            mean_curvature,
            lorentzian,
            grid,
            bc,
            tol,
            max_iter,
            out,
            report,
        } => {
            let causal = if lorentzian {
                Causal::Lorentzian
            } else {
                Causal::Riemannian
            };
            let params = SpaceParams::new(kappa, tau, causal);
            solve(
                params,
                mean_curvature,
                &grid,
                bc,
                tol,
                max_iter,
                out.as_deref(),
                report.as_deref(),
            )
        }
        Command::Example {
            name,
            mean_curvature,
            grid,
            out,
        } => example(&name, mean_curvature, &grid, out.as_deref()),
        Command::Hessian { input, out } => hessian(&input, out.as_deref()),
        Command::Feasibility { kappa, tau } => feasibility(kappa, tau),
        Command::Estimate { which } => estimate(&which),
        Command::Mesh { input, out } => mesh(&input, &out),
    }
}

/// One-line JSON diagnostic on standard error.
fn diagnose(kind: &str, code: u8, message: &str) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "exit": code, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let summary: Vec<&str> = msg
                .lines()
                .take_while(|l| !l.trim().is_empty())
                .map(str::trim)
                .collect();
            let _ = e.print();
            return diagnose("usage", 1, summary.join(" ").trim_start_matches("error: "));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe (e.g. `| head`) is not a failure.
        Err(Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e.class() {
                ErrorClass::Domain => 2,
                ErrorClass::Numeric => 3,
            };
            diagnose(e.kind(), code, &e.to_string())
        }
    }
}
