//! `bicombing-lab` command-line front end.
//!
//! Exit codes: 0 on success or pass, 1 on a failed check or a runtime error,
//! 2 on a usage error (bad arguments, unknown family, malformed space document).

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use bicombing_lab::boundary::{
    asymptotic_verdict, coverage_radius, d_o_metric, d_oc_metric, CoverageOptions, TruncatedRay,
};
use bicombing_lab::engine::{
    distance, geodesic, grid_oracle_distance, reversibilize, Bicombing, EngineBicombing, EngineOptions,
};
use bicombing_lab::export::fmt_sig12;
use bicombing_lab::helly::{build_grid_graph, certificate, helly_check, HellyOptions};
use bicombing_lab::space_spec::{build_space, SpaceSpec, SpecError};
use bicombing_lab::suite::{run_suite, Status, SUITES};
use bicombing_lab::verify::{check_axioms, nudged, Axiom, Sampler};
use bicombing_lab::{AtlasError, ChartAtlas, ChartKind, PExponent, SpacePoint};

#[derive(Parser)]
#[command(name = "bicombing-lab", version, about = "Geodesic bicombings on piecewise l^p spaces")]
struct Cli {
    /// Numerical tolerance for certificates and checks.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Seed for every sampled quantity.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Write the result here (atomically) instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Build, validate or describe a space.
    Space {
        #[command(subcommand)]
        action: SpaceAction,
    },
    /// Canonical geodesic between two points, with its length certificate.
    Geodesic(PairArgs),
    /// Distance between two points.
    Distance {
        #[command(flatten)]
        pair: PairArgs,
        /// Also run the grid oracle at this resolution.
        #[arg(long)]
        oracle_h: Option<f64>,
    },
    /// Axiom checks and the reversibilized bicombing.
    Bicombing {
        #[command(subcommand)]
        action: BicombingAction,
    },
    /// Rays, boundary metrics and the coverage probe.
    Boundary {
        #[command(subcommand)]
        action: BoundaryAction,
    },
    /// Brute-force Helly check of a grid patch; exits 1 on a counterexample.
    Helly {
        /// gamma45, gamma90, plane, or any space of plane charts.
        #[arg(long)]
        patch: String,
        #[arg(long)]
        max_radius: u32,
        /// Least graph distance of centres from the window boundary [default: max radius].
        #[arg(long)]
        margin: Option<u32>,
        /// Half-width of the lattice window [default: margin + 2 max radius + 1].
        #[arg(long)]
        window: Option<i64>,
        #[arg(long, default_value_t = 3)]
        family_size: usize,
        /// Certify this family instead of reporting the first failing one:
        /// vertices CHART:x,y separated by ';'.
        #[arg(long, allow_hyphen_values = true)]
        centers: Option<String>,
        /// Radii of the --centers family, comma-separated [default: all max radius].
        #[arg(long)]
        radii: Option<String>,
    },
    /// Property suites.
    Suite {
        #[command(subcommand)]
        action: SuiteAction,
    },
}

#[derive(Subcommand)]
enum SpaceAction {
    /// Build and write the canonical space document.
    Build(SpaceArg),
    /// Build and report the checked gluing invariants.
    Validate(SpaceArg),
    /// Charts, gluings and declared exponents.
    Describe(SpaceArg),
}

#[derive(Args)]
struct SpaceArg {
    /// Family name, ck_patch(ANGLE,DEPTH), inline JSON, or @FILE.
    #[arg(long)]
    space: String,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    space: String,
    /// 1, 2, inf or any p > 1.
    #[arg(long)]
    p: PExponent,
    /// Start point as CHART:coord,coord.
    #[arg(long, allow_hyphen_values = true)]
    from: String,
    #[arg(long, allow_hyphen_values = true)]
    to: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HandleKind {
    /// Canonical trajectories at constant d_p speed.
    Canonical,
    /// Direct l^p optimization.
    Direct,
    /// Canonical trajectories with a position-dependent speed distortion.
    Nudged,
}

#[derive(Args)]
struct HandleArgs {
    #[arg(long)]
    space: String,
    #[arg(long)]
    p: PExponent,
    #[arg(long, value_enum, default_value_t = HandleKind::Canonical)]
    handle: HandleKind,
}

#[derive(Subcommand)]
enum BicombingAction {
    /// Sampled axiom reports; exits 1 when a violation exceeds the threshold.
    Check {
        #[command(flatten)]
        handle: HandleArgs,
        /// Comma-separated subset of conical,consistent,convex,reversible,projection.
        #[arg(long, default_value = "conical,consistent,convex,reversible")]
        axioms: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1e-7)]
        threshold: f64,
        /// Check the reversibilized handle instead.
        #[arg(long)]
        reversibilize: bool,
    },
    /// Points of the reversibilized bicombing.
    Reversibilize {
        #[command(flatten)]
        handle: HandleArgs,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        to: String,
        /// Comma-separated parameters in [0, 1].
        #[arg(long, default_value = "0.5")]
        t: String,
    },
}

#[derive(Args)]
struct RayPair {
    #[command(flatten)]
    handle: HandleArgs,
    /// Base point o.
    #[arg(long, allow_hyphen_values = true)]
    base: String,
    /// Direction dx,dy in the base chart, or a far target CHART:coords.
    #[arg(long, allow_hyphen_values = true)]
    ray1: String,
    #[arg(long, allow_hyphen_values = true)]
    ray2: String,
    #[arg(long, default_value_t = 1000.0)]
    horizon: f64,
}

#[derive(Subcommand)]
enum BoundaryAction {
    /// Truncated series metric d_o.
    Do {
        #[command(flatten)]
        rays: RayPair,
        #[arg(long, default_value_t = 40)]
        n: u32,
    },
    /// The metric d_{o,C}.
    Doc {
        #[command(flatten)]
        rays: RayPair,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
    },
    /// Asymptotic, divergent or inconclusive.
    Asymptotic {
        #[command(flatten)]
        rays: RayPair,
        /// Largest separation accepted as bounded.
        #[arg(long, default_value_t = 1e-6)]
        bound: f64,
    },
    /// Almost geodesic completeness probe around a base point.
    Coverage {
        #[command(flatten)]
        handle: HandleArgs,
        #[arg(long, allow_hyphen_values = true)]
        base: String,
        #[arg(long, default_value_t = 8.0)]
        radius: f64,
        #[arg(long, default_value_t = 32)]
        directions: usize,
        #[arg(long, default_value_t = 128)]
        samples: usize,
    },
}

#[derive(Subcommand)]
enum SuiteAction {
    /// Run one suite, or every suite with --name all; exits 1 on failure.
    Run {
        #[arg(long)]
        name: String,
    },
    /// List suite names.
    List,
}

/// Failure of a command, with its exit code.
enum Failure {
    Usage(String),
    Runtime(String),
    /// The command ran and reported a failed check; the output is already written.
    Check,
}

fn usage(e: impl Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl Display) -> Failure {
    Failure::Runtime(e.to_string())
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(f) = configure_threads() {
        return report(f);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    match f {
        Failure::Usage(m) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Failure::Runtime(m) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Failure::Check => ExitCode::from(1),
    }
}

fn configure_threads() -> Outcome {
    let Ok(v) = std::env::var("BICOMBING_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| usage(format!("BICOMBING_LAB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(runtime)
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Space { action } => space(cli, action),
        Command::Geodesic(pair) => geodesic_cmd(cli, pair),
        Command::Distance { pair, oracle_h } => distance_cmd(cli, pair, *oracle_h),
        Command::Bicombing { action } => bicombing(cli, action),
        Command::Boundary { action } => boundary(cli, action),
        Command::Helly {
            patch,
            max_radius,
            margin,
            window,
            family_size,
            centers,
            radii,
        } => {
            let family = centers.as_deref().map(|c| (c, radii.as_deref()));
            helly(cli, patch, *max_radius, *margin, *window, *family_size, family)
        }
        Command::Suite { action } => suite(cli, action),
    }
}

// ---------------------------------------------------------------------------
// helpers

fn load_spec(arg: &str) -> Result<SpaceSpec, Failure> {
    let parsed = match arg.strip_prefix('@') {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| runtime(format!("I/O failure reading {path}: {e}")))?;
            SpaceSpec::parse(&text)
        }
        None => SpaceSpec::from_arg(arg),
    };
    parsed.map_err(spec_error)
}

fn spec_error(e: SpecError) -> Failure {
    match e {
        SpecError::Json(e) => usage(format!("malformed space document: {e}")),
        SpecError::Atlas(e) => atlas_error(e),
    }
}

fn atlas_error(e: AtlasError) -> Failure {
    match e {
        AtlasError::UnknownFamily(name) => usage(format!("unknown space family {name:?}")),
        AtlasError::InvalidGluing { .. } | AtlasError::InvalidChart(..) => runtime(format!("invalid space: {e}")),
        other => usage(other),
    }
}

fn load_space(arg: &str) -> Result<ChartAtlas, Failure> {
    build_space(&load_spec(arg)?).map_err(atlas_error)
}

fn point(atlas: &ChartAtlas, s: &str) -> Result<SpacePoint, Failure> {
    atlas.parse_point(s).map_err(|e| usage(format!("bad point {s:?}: {e}")))
}

fn handle(args: &HandleArgs) -> Result<Arc<dyn Bicombing>, Failure> {
    let atlas = Arc::new(load_space(&args.space)?);
    Ok(match args.handle {
        HandleKind::Canonical => Arc::new(EngineBicombing::new(atlas, args.p)),
        HandleKind::Direct => Arc::new(EngineBicombing::direct(atlas, args.p)),
        HandleKind::Nudged => Arc::new(nudged(EngineBicombing::new(atlas, args.p))),
    })
}

/// Writes `text` to `--out` through a temporary file in the same directory,
/// or to standard output.
fn emit(cli: &Cli, text: &str) -> Outcome {
    match &cli.out {
        Some(path) => write_atomic(path, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| if text.ends_with('\n') { Ok(()) } else { out.write_all(b"\n") })
                .map_err(|e| runtime(format!("I/O failure writing standard output: {e}")))
        }
    }
}

fn write_atomic(path: &Path, text: &str) -> Outcome {
    let io = |e: std::io::Error| runtime(format!("I/O failure writing {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit_json(cli: &Cli, v: &Value) -> Outcome {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    emit(cli, &s)
}

fn require_json(cli: &Cli, what: &str) -> Outcome {
    if cli.format == Format::Csv {
        return Err(usage(format!("{what} has no CSV form; use --format json")));
    }
    Ok(())
}

fn to_value(v: impl serde::Serialize) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn bound_json(b: f64) -> Value {
    if b.is_finite() {
        json!(b)
    } else if b > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

// ---------------------------------------------------------------------------
// space

fn space(cli: &Cli, action: &SpaceAction) -> Outcome {
    require_json(cli, "space")?;
    match action {
        SpaceAction::Build(a) => {
            let spec = load_spec(&a.space)?;
            build_space(&spec).map_err(atlas_error)?;
            emit(cli, &spec.to_json())
        }
        SpaceAction::Validate(a) => {
            let atlas = load_space(&a.space)?;
            let declared: Vec<String> = atlas.declared_p().iter().map(|p| p.to_string()).collect();
            emit_json(
                cli,
                &json!({
                    "space": atlas.name,
                    "valid": true,
                    "charts": atlas.charts().len(),
                    "gluings": atlas.gluings().len(),
                    "checkedP": declared,
                }),
            )
        }
        SpaceAction::Describe(a) => {
            let atlas = load_space(&a.space)?;
            emit_json(cli, &describe(&atlas))
        }
    }
}

fn describe(atlas: &ChartAtlas) -> Value {
    let kind = |k: ChartKind| to_value(k);
    let charts: Vec<Value> = atlas
        .charts()
        .iter()
        .map(|c| {
            json!({
                "name": c.name,
                "kind": kind(c.kind),
                "dim": c.dim(),
                "bounds": c.bounds.iter().map(|(l, u)| json!([bound_json(*l), bound_json(*u)])).collect::<Vec<_>>(),
                "neighbours": atlas.neighbours(c.id).iter().map(|n| atlas.chart(*n).name.clone()).collect::<Vec<_>>(),
            })
        })
        .collect();
    let gluings: Vec<Value> = atlas
        .gluings()
        .iter()
        .map(|g| {
            json!({
                "a": atlas.chart(g.a).name,
                "b": atlas.chart(g.b).name,
                "baseA": g.face_a.base.as_slice(),
                "dirsA": g.face_a.dirs.iter().map(|d| d.as_slice().to_vec()).collect::<Vec<_>>(),
                "baseB": g.face_b.base.as_slice(),
                "dirsB": g.face_b.dirs.iter().map(|d| d.as_slice().to_vec()).collect::<Vec<_>>(),
                "paramBounds": g.param_bounds.iter().map(|(l, u)| json!([bound_json(*l), bound_json(*u)])).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "space": atlas.name,
        "declaredP": atlas.declared_p().iter().map(|p| p.to_string()).collect::<Vec<_>>(),
        "product": atlas.product().is_some(),
        "charts": charts,
        "gluings": gluings,
    })
}

// ---------------------------------------------------------------------------
// geodesics and distances

fn opts(cli: &Cli) -> EngineOptions {
    EngineOptions {
        tol: cli.tol,
        ..EngineOptions::default()
    }
}

fn geodesic_cmd(cli: &Cli, a: &PairArgs) -> Outcome {
    let atlas = load_space(&a.space)?;
    let (x, y) = (point(&atlas, &a.from)?, point(&atlas, &a.to)?);
    let path = geodesic(&atlas, &x, &y, a.p, &opts(cli)).map_err(runtime)?;
    let length = path.length(&atlas, a.p);
    match cli.format {
        Format::Csv => emit(cli, &path.to_csv(&atlas, a.p))?,
        Format::Json => emit_json(
            cli,
            &json!({
                "space": atlas.name,
                "p": a.p.to_string(),
                "from": atlas.format_point(&x),
                "to": atlas.format_point(&y),
                "length": length,
                "path": path.to_json(&atlas, a.p),
            }),
        )?,
    }
    if cli.out.is_some() {
        println!("length {}", fmt_sig12(length));
    } else {
        eprintln!("length {}", fmt_sig12(length));
    }
    Ok(())
}

fn distance_cmd(cli: &Cli, a: &PairArgs, oracle_h: Option<f64>) -> Outcome {
    let atlas = load_space(&a.space)?;
    let (x, y) = (point(&atlas, &a.from)?, point(&atlas, &a.to)?);
    let d = distance(&atlas, &x, &y, a.p, &opts(cli)).map_err(runtime)?;
    let oracle = match oracle_h {
        Some(h) if !(h > 0.0 && h.is_finite()) => return Err(usage("--oracle-h must be positive")),
        Some(h) => Some(grid_oracle_distance(&atlas, &x, &y, a.p, h).map_err(runtime)?),
        None => None,
    };
    match cli.format {
        Format::Csv => {
            let o = oracle.map_or(String::new(), fmt_sig12);
            emit(cli, &format!("distance,oracle\n{},{}\n", fmt_sig12(d), o))
        }
        Format::Json => emit_json(
            cli,
            &json!({
                "space": atlas.name,
                "p": a.p.to_string(),
                "from": atlas.format_point(&x),
                "to": atlas.format_point(&y),
                "distance": d,
                "oracle": oracle,
                "oracleH": oracle_h,
            }),
        ),
    }
}

// ---------------------------------------------------------------------------
// bicombings

fn parse_axiom(s: &str) -> Result<Axiom, Failure> {
    Ok(match s.trim() {
        "conical" => Axiom::Conical,
        "consistent" => Axiom::Consistent,
        "convex" => Axiom::Convex,
        "reversible" => Axiom::Reversible,
        "projection" => Axiom::Projection,
        "equivariant" => return Err(usage("equivariance needs an isometry; it is checked by the axioms suite")),
        other => return Err(usage(format!("unknown axiom {other:?}"))),
    })
}

fn bicombing(cli: &Cli, action: &BicombingAction) -> Outcome {
    match action {
        BicombingAction::Check {
            handle: h,
            axioms,
            samples,
            threshold,
            reversibilize: rev,
        } => {
            let axioms: Vec<Axiom> = axioms.split(',').map(parse_axiom).collect::<Result<_, _>>()?;
            let inner = handle(h)?;
            let reports = if *rev {
                let r = reversibilize(ArcHandle(inner), cli.tol);
                check_axioms(&r, &axioms, &Sampler::new(cli.seed), *samples, None)
            } else {
                check_axioms(inner.as_ref(), &axioms, &Sampler::new(cli.seed), *samples, None)
            }
            .map_err(runtime)?;
            match cli.format {
                Format::Csv => {
                    let mut s = String::from("axiom,samples,seed,max_violation\n");
                    for r in &reports {
                        s.push_str(&format!("{},{},{},{}\n", r.axiom.name(), r.samples, r.seed, fmt_sig12(r.max_violation)));
                    }
                    emit(cli, &s)?;
                }
                Format::Json => emit_json(cli, &to_value(&reports))?,
            }
            if reports.iter().any(|r| !(r.max_violation <= *threshold)) {
                return Err(Failure::Check);
            }
            Ok(())
        }
        BicombingAction::Reversibilize { handle: h, from, to, t } => {
            require_json(cli, "bicombing reversibilize")?;
            let inner = handle(h)?;
            let atlas = inner.atlas();
            let (x, y) = (point(atlas, from)?, point(atlas, to)?);
            let ts: Vec<f64> = t
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| usage(format!("bad parameter {v:?}"))))
                .collect::<Result<_, _>>()?;
            let r = reversibilize(ArcHandle(inner.clone()), cli.tol);
            let pts = r.eval_many(&x, &y, &ts).map_err(runtime)?;
            let rows: Vec<Value> = ts
                .iter()
                .zip(&pts)
                .map(|(t, p)| json!({"t": t, "point": atlas.format_point(p)}))
                .collect();
            emit_json(cli, &json!({"space": atlas.name, "p": h.p.to_string(), "points": rows}))
        }
    }
}

/// Shared handle usable where an owned bicombing is expected.
struct ArcHandle(Arc<dyn Bicombing>);

impl Bicombing for ArcHandle {
    fn atlas(&self) -> &ChartAtlas {
        self.0.atlas()
    }

    fn exponent(&self) -> PExponent {
        self.0.exponent()
    }

    fn method(&self) -> bicombing_lab::engine::Method {
        self.0.method()
    }

    fn eval_many(&self, x: &SpacePoint, y: &SpacePoint, ts: &[f64]) -> Result<Vec<SpacePoint>, bicombing_lab::engine::EngineError> {
        self.0.eval_many(x, y, ts)
    }

    fn distance(&self, x: &SpacePoint, y: &SpacePoint) -> Result<f64, bicombing_lab::engine::EngineError> {
        self.0.distance(x, y)
    }

    fn trajectory(
        &self,
        x: &SpacePoint,
        y: &SpacePoint,
    ) -> Result<Option<bicombing_lab::engine::PolyPath>, bicombing_lab::engine::EngineError> {
        self.0.trajectory(x, y)
    }
}

// ---------------------------------------------------------------------------
// boundary

/// A ray from `base`: along a direction `dx,dy` of the base chart, or towards
/// a target point `CHART:coords`. Truncated at the horizon or at the target.
fn ray(h: &Arc<dyn Bicombing>, base: &SpacePoint, spec: &str, horizon: f64) -> Result<TruncatedRay, Failure> {
    let atlas = h.atlas();
    if spec.contains(':') {
        let target = point(atlas, spec)?;
        let probe = TruncatedRay::new(h.clone(), base.clone(), target.clone(), horizon).map_err(runtime)?;
        let horizon = horizon.min(probe.reach);
        return TruncatedRay::new(h.clone(), base.clone(), target, horizon).map_err(runtime);
    }
    let dir: Vec<f64> = spec
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| usage(format!("bad direction {spec:?}"))))
        .collect::<Result<_, _>>()?;
    TruncatedRay::along(h.clone(), base.clone(), &dir, horizon, horizon).map_err(usage)
}

fn ray_pair(r: &RayPair) -> Result<(Arc<dyn Bicombing>, SpacePoint, TruncatedRay, TruncatedRay), Failure> {
    if !(r.horizon > 0.0 && r.horizon.is_finite()) {
        return Err(usage("--horizon must be positive"));
    }
    let h = handle(&r.handle)?;
    let o = point(h.atlas(), &r.base)?;
    let r1 = ray(&h, &o, &r.ray1, r.horizon)?;
    let r2 = ray(&h, &o, &r.ray2, r.horizon)?;
    Ok((h, o, r1, r2))
}

fn boundary(cli: &Cli, action: &BoundaryAction) -> Outcome {
    require_json(cli, "boundary")?;
    match action {
        BoundaryAction::Do { rays, n } => {
            let (_, o, r1, r2) = ray_pair(rays)?;
            let v = d_o_metric(&o, &r1, &r2, *n).map_err(runtime)?;
            emit_json(cli, &json!({"n": n, "metric": to_value(v)}))
        }
        BoundaryAction::Doc { rays, c } => {
            let (_, o, r1, r2) = ray_pair(rays)?;
            let v = d_oc_metric(&o, *c, &r1, &r2, cli.tol).map_err(runtime)?;
            emit_json(cli, &json!({"c": c, "value": v}))
        }
        BoundaryAction::Asymptotic { rays, bound } => {
            let (_, _, r1, r2) = ray_pair(rays)?;
            let v = asymptotic_verdict(&r1, &r2, *bound, cli.tol.max(1e-9)).map_err(runtime)?;
            emit_json(cli, &to_value(v))
        }
        BoundaryAction::Coverage {
            handle: h,
            base,
            radius,
            directions,
            samples,
        } => {
            let h = handle(h)?;
            let o = point(h.atlas(), base)?;
            let opts = CoverageOptions {
                directions: *directions,
                samples: *samples,
            };
            let r = coverage_radius(h.as_ref(), &o, *radius, &Sampler::new(cli.seed), &opts).map_err(runtime)?;
            emit_json(cli, &to_value(r))
        }
    }
}

// ---------------------------------------------------------------------------
// Helly

fn helly(
    cli: &Cli,
    patch: &str,
    max_radius: u32,
    margin: Option<u32>,
    window: Option<i64>,
    family_size: usize,
    family: Option<(&str, Option<&str>)>,
) -> Outcome {
    require_json(cli, "helly")?;
    let atlas = load_space(patch)?;
    let margin = margin.unwrap_or(max_radius);
    let window = window.unwrap_or((margin + 2 * max_radius + 1) as i64);
    let g = build_grid_graph(&atlas, window).map_err(usage)?;
    let opts = HellyOptions {
        family_size,
        ..HellyOptions::new(max_radius, margin)
    };
    let r = helly_check(&g, &opts).map_err(usage)?;
    if let Some((centers, radii)) = family {
        let centers: Vec<usize> = centers
            .split(';')
            .map(|c| g.parse_vertex(c.trim()).map_err(usage))
            .collect::<Result<_, _>>()?;
        let radii: Vec<u32> = match radii {
            Some(r) => r
                .split(',')
                .map(|v| v.trim().parse::<u32>().map_err(|_| usage(format!("bad radius {v:?}"))))
                .collect::<Result<_, _>>()?,
            None => vec![max_radius; centers.len()],
        };
        if radii.len() != centers.len() {
            return Err(usage("--radii needs one radius per centre"));
        }
        let cert = certificate(&g, &centers, &radii);
        let pairwise = cert.pairwise.iter().all(|w| w.common != "-");
        let empty = cert.exclusions.len() == g.ball(centers[0], radii[0]).len();
        let v = json!({
            "patch": atlas.name,
            "window": window,
            "pairwiseIntersect": pairwise,
            "emptyIntersection": empty,
            "foundBySearch": r.contains(&centers, &radii),
            "family": to_value(&cert),
        });
        emit_json(cli, &v)?;
        return if pairwise && empty { Err(Failure::Check) } else { Ok(()) };
    }
    let mut v = to_value(&r);
    v["patch"] = json!(atlas.name);
    v["window"] = json!(window);
    v["maxRadius"] = json!(max_radius);
    v["margin"] = json!(margin);
    emit_json(cli, &v)?;
    if r.pass {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

// ---------------------------------------------------------------------------
// suites

fn suite(cli: &Cli, action: &SuiteAction) -> Outcome {
    match action {
        SuiteAction::List => {
            let mut s = String::new();
            for (name, about) in SUITES {
                s.push_str(&format!("{name:<22} {about}\n"));
            }
            s.push_str(&format!("{:<22} every suite above\n", "all"));
            emit(cli, &s)
        }
        SuiteAction::Run { name } => {
            let r = run_suite(name, cli.seed).map_err(usage)?;
            match cli.format {
                Format::Csv => {
                    let mut s = String::from("id,status,value,bound,tolerance,provenance\n");
                    for c in &r.cases {
                        let status = to_value(c.status);
                        let bound = to_value(c.bound);
                        s.push_str(&format!(
                            "{},{},{},{},{},{}\n",
                            csv_field(&c.id),
                            status.as_str().unwrap_or(""),
                            fmt_sig12(c.value),
                            bound.as_str().unwrap_or(""),
                            fmt_sig12(c.tolerance),
                            c.provenance
                        ));
                    }
                    emit(cli, &s)?;
                }
                Format::Json => emit_json(cli, &to_value(&r))?,
            }
            for (suite, passed, total) in r.summary() {
                eprintln!("{} {suite}: {passed}/{total}", if passed == total { "PASS" } else { "FAIL" });
            }
            if r.cases.iter().any(|c| c.status != Status::Pass) {
                return Err(Failure::Check);
            }
            Ok(())
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
