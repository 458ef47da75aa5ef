use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use warpembed::embed::EmbeddingModel;
use warpembed::specfile::{self, PresetArgs};
use warpembed::verify::{verify, VerifyConfig};
use warpembed::warped::{MetricSpec, Target, Variant};
use warpembed::Error;

/// Isometric immersions and embeddings of warped-product metrics.
#[derive(Parser)]
#[command(name = "warpembed", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the model and print its ambient space, step values and margins.
    Build { spec: PathBuf },
    /// Run the verification battery; exit 1 if any check fails.
    Verify {
        spec: PathBuf,
        /// t-samples per breakpoint gap (default: the spec's grid_density).
        #[arg(long)]
        grid_density: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Half-width of the box the x samples are drawn from.
        #[arg(long, default_value_t = 3.0)]
        x_box: f64,
        /// Random pairs for the separation check.
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
    },
    /// Evaluate the map on a list of points or a grid.
    Eval {
        spec: PathBuf,
        /// File with one `t x1 … x_{n−1}` row per line (spaces or commas).
        #[arg(long, conflicts_with = "grid")]
        points: Option<PathBuf>,
        /// `t0:t1:nt`
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        /// `lo:hi:nx`, used for every x coordinate with `--grid`.
        #[arg(long, default_value = "0:0:1", allow_hyphen_values = true)]
        x: String,
    },
    /// Export a two-parameter slice of the image as CSV or OBJ.
    Mesh {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = MeshFormat::Csv)]
        format: MeshFormat,
        /// Fixed domain coordinates, e.g. `t=0.5,x2=1`; the two others vary.
        #[arg(long, allow_hyphen_values = true)]
        slice: Option<String>,
        /// `lo:hi:count` of the first free coordinate.
        #[arg(long, allow_hyphen_values = true)]
        range1: Option<String>,
        /// `lo:hi:count` of the second free coordinate.
        #[arg(long, allow_hyphen_values = true)]
        range2: Option<String>,
        /// Three ambient indices for OBJ vertices, e.g. `0,3,4`.
        #[arg(long)]
        project: Option<String>,
    },
    /// Print the spec file of a named example metric.
    Preset {
        #[arg(value_parser = specfile::PRESETS)]
        name: String,
        /// The free function of rozendorn, azov-t and azov-conformal.
        #[arg(long)]
        function: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        a: Option<usize>,
        #[arg(long, value_enum)]
        target: Option<TargetArg>,
        #[arg(long, value_enum)]
        variant: Option<VariantArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshFormat {
    Csv,
    Obj,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Flat,
    Sphere,
    Hyperbolic,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Immersion,
    Embedding,
}

/// Exit codes: 1 verification failure, 2 input error, 3 synthesis failure.
enum Failure {
    Verification,
    Input(anyhow::Error),
    Synthesis(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::StepSynthesis { .. }
            | Error::Radicand { .. }
            | Error::NegativeIntegrand { .. }
            | Error::Quadrature { .. } => Failure::Synthesis(e.into()),
            other => Failure::Input(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<Error>() {
            Ok(inner) => inner.into(),
            Err(e) => Failure::Input(e),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Synthesis(e)) => {
            eprintln!("synthesis failed: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn run(cmd: Command) -> Outcome<()> {
    match cmd {
        Command::Build { spec } => cmd_build(&spec),
        Command::Verify {
            spec,
            grid_density,
            seed,
            x_box,
            pairs,
        } => cmd_verify(&spec, grid_density, seed, x_box, pairs),
        Command::Eval { spec, points, grid, x } => cmd_eval(&spec, points.as_deref(), grid.as_deref(), &x),
        Command::Mesh {
            spec,
            out,
            format,
            slice,
            range1,
            range2,
            project,
        } => cmd_mesh(
            &spec,
            &out,
            format,
            slice.as_deref(),
            [range1.as_deref(), range2.as_deref()],
            project.as_deref(),
        ),
        Command::Preset {
            name,
            function,
            n,
            a,
            target,
            variant,
        } => cmd_preset(&name, function, n, a, target, variant),
    }
}

fn read_spec(path: &Path) -> Outcome<MetricSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(specfile::parse(&text)?)
}

fn load(path: &Path) -> Outcome<EmbeddingModel> {
    let spec = read_spec(path)?;
    let metric = Arc::new(spec.validate()?);
    Ok(EmbeddingModel::build(metric)?)
}

fn cmd_build(path: &Path) -> Outcome<()> {
    let model = load(path)?;
    let metric = model.metric();
    let mut s = String::new();
    let _ = writeln!(s, "kind: {}", model.kind());
    let _ = writeln!(s, "n: {}", metric.n());
    let _ = writeln!(s, "a: {}", metric.a());
    let _ = writeln!(s, "b: {}", metric.b());
    let _ = writeln!(s, "ambient {}", model.ambient());
    let _ = writeln!(
        s,
        "quadric: {}",
        model.quadric().map_or("none".to_string(), |q| q.to_string())
    );
    let blocks: Vec<String> = model
        .layout()
        .iter()
        .map(|b| format!("{}[{}]", b.name, b.width()))
        .collect();
    let _ = writeln!(s, "layout: {}", blocks.join(" "));
    let _ = writeln!(s, "t0: {}", fmt17(metric.t0()));
    let steps = model.steps();
    match steps.covered_range() {
        None => {
            let [s1, s2] = steps.on_gap(0)?;
            let _ = writeln!(s, "steps: constant S1 = {s1:.6e}, S2 = {s2:.6e}");
        }
        Some((lo, hi)) => {
            for j in 1..=2 {
                for l in lo..=hi {
                    let _ = writeln!(s, "S{j}[{l}]: {:.6e}", steps.value(j, l)?);
                }
            }
        }
    }
    let h = warpembed::warped::HALF_GAPS;
    let cert = steps.certificate(-h, h, 4 * metric.spec().grid_density)?;
    for g in &cert.gaps {
        let _ = writeln!(s, "margin gap {}: {:.6e}", g.k, g.min());
    }
    let _ = writeln!(
        s,
        "certificate: {} {:.6e} {:.6e}",
        if cert.passes() { "PASS" } else { "FAIL" },
        cert.min_margin(),
        cert.safety / 2.0
    );
    print!("{s}");
    if !cert.passes() {
        return Err(Failure::Synthesis(anyhow!(
            "step margins below safety/2 ({:.3e} < {:.3e})",
            cert.min_margin(),
            cert.safety / 2.0
        )));
    }
    Ok(())
}

fn cmd_verify(path: &Path, grid_density: Option<usize>, seed: u64, x_box: f64, pairs: usize) -> Outcome<()> {
    let model = load(path)?;
    let mut cfg = VerifyConfig::for_metric(model.metric());
    if let Some(d) = grid_density {
        if d < 2 {
            return Err(Failure::Input(anyhow!("--grid-density must be at least 2")));
        }
        cfg.grid_density = d;
    }
    if !(x_box.is_finite() && x_box >= 0.0) {
        return Err(Failure::Input(anyhow!("--x-box must be finite and non-negative")));
    }
    cfg.seed = seed;
    cfg.x_box = x_box;
    cfg.pair_samples = pairs;
    let report = verify(&model, &cfg)?;
    print!("{}", report.render());
    if report.all_pass() {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

/// `lo:hi:count` into `count` evenly spaced values.
fn parse_range(s: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        bail!("range `{s}` must be lo:hi:count");
    };
    let lo: f64 = lo.trim().parse().with_context(|| format!("range start `{lo}`"))?;
    let hi: f64 = hi.trim().parse().with_context(|| format!("range end `{hi}`"))?;
    let n: usize = n.trim().parse().with_context(|| format!("range count `{n}`"))?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() {
        bail!("range `{s}` needs finite ends and a positive count");
    }
    Ok(if n == 1 {
        vec![lo]
    } else {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    })
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn cmd_eval(path: &Path, points: Option<&Path>, grid: Option<&str>, x: &str) -> Outcome<()> {
    let model = load(path)?;
    let m = model.metric().n() - 1;
    let pts: Vec<(f64, Vec<f64>)> = match (points, grid) {
        (Some(file), _) => {
            let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
            let mut out = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let body = line.split('#').next().unwrap_or("").trim();
                if body.is_empty() {
                    continue;
                }
                let vals = body
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|v| !v.is_empty())
                    .map(|v| v.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .with_context(|| format!("{} line {}", file.display(), i + 1))?;
                if vals.len() != m + 1 {
                    return Err(Failure::Input(anyhow!(
                        "{} line {}: expected {} values, found {}",
                        file.display(),
                        i + 1,
                        m + 1,
                        vals.len()
                    )));
                }
                out.push((vals[0], vals[1..].to_vec()));
            }
            out
        }
        (None, Some(g)) => {
            let ts = parse_range(g)?;
            let xs = parse_range(x)?;
            let mut combos: Vec<Vec<f64>> = vec![Vec::new()];
            for _ in 0..m {
                combos = combos
                    .into_iter()
                    .flat_map(|c| {
                        xs.iter().map(move |v| {
                            let mut c = c.clone();
                            c.push(*v);
                            c
                        })
                    })
                    .collect();
            }
            ts.iter()
                .flat_map(|t| combos.iter().map(move |c| (*t, c.clone())))
                .collect()
        }
        (None, None) => return Err(Failure::Input(anyhow!("eval needs --points or --grid"))),
    };
    let mut s = String::new();
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|i| format!("x{i}")));
    header.extend((0..model.ambient().dim()).map(|i| format!("y{i}")));
    let _ = writeln!(s, "{}", header.join(","));
    for (t, x) in &pts {
        let y = model.eval(*t, x)?;
        let row: Vec<String> = std::iter::once(*t).chain(x.iter().copied()).chain(y).map(fmt17).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    print!("{s}");
    Ok(())
}

fn coord_index(name: &str, m: usize) -> anyhow::Result<usize> {
    if name == "t" {
        return Ok(0);
    }
    name.strip_prefix('x')
        .and_then(|i| i.parse::<usize>().ok())
        .filter(|i| (1..=m).contains(i))
        .ok_or_else(|| anyhow!("unknown domain coordinate `{name}` (use t or x1..x{m})"))
}

fn cmd_mesh(
    path: &Path,
    out: &Path,
    format: MeshFormat,
    slice: Option<&str>,
    ranges: [Option<&str>; 2],
    project: Option<&str>,
) -> Outcome<()> {
    let model = load(path)?;
    let metric = model.metric();
    let m = metric.n() - 1;
    let dim = model.ambient().dim();

    let axes: [usize; 3] = match project {
        None => [0, 1, 2],
        Some(p) => {
            let v = p
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| anyhow!("--project `{p}` must be three integers"))?;
            v.try_into()
                .map_err(|_| anyhow!("--project `{p}` must name exactly three axes"))?
        }
    };
    if let Some(bad) = axes.iter().find(|&&i| i >= dim) {
        return Err(Failure::Input(anyhow!(
            "projection index {bad} out of range for {}",
            model.ambient()
        )));
    }

    // domain point template: t = t₀, x = 0
    let mut base = vec![0.0; m + 1];
    base[0] = metric.t0();
    let mut fixed = vec![false; m + 1];
    if let Some(sl) = slice {
        for item in sl.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("slice entry `{item}` must be name=value"))?;
            let i = coord_index(k.trim(), m)?;
            base[i] = v.trim().parse().with_context(|| format!("slice value `{v}`"))?;
            fixed[i] = true;
        }
    }
    let free: Vec<usize> = (0..=m).filter(|&i| !fixed[i]).take(2).collect();
    if free.len() < 2 {
        return Err(Failure::Input(anyhow!("--slice must leave two coordinates free")));
    }
    // remaining unfixed coordinates stay at the template value
    let default_range = |i: usize| -> anyhow::Result<Vec<f64>> {
        if i == 0 {
            let g = metric.gamma();
            Ok(parse_range(&format!("{}:{}:41", g.inverse(-2.0)?, g.inverse(2.0)?))?)
        } else {
            parse_range("-3:3:41")
        }
    };
    let axis_vals: Vec<Vec<f64>> = free
        .iter()
        .zip(ranges)
        .map(|(&i, r)| r.map_or_else(|| default_range(i), parse_range))
        .collect::<anyhow::Result<_>>()?;
    let (nu, nv) = (axis_vals[0].len(), axis_vals[1].len());

    let mut verts = Vec::with_capacity(nu * nv);
    for &u in &axis_vals[0] {
        for &v in &axis_vals[1] {
            let mut p = base.clone();
            p[free[0]] = u;
            p[free[1]] = v;
            verts.push(model.eval(p[0], &p[1..])?);
        }
    }

    let mut s = String::new();
    match format {
        MeshFormat::Csv => {
            let header: Vec<String> = (0..dim).map(|i| format!("y{i}")).collect();
            let _ = writeln!(s, "{}", header.join(","));
            for y in &verts {
                let row: Vec<String> = y.iter().copied().map(fmt17).collect();
                let _ = writeln!(s, "{}", row.join(","));
            }
        }
        MeshFormat::Obj => {
            let _ = writeln!(s, "# {} slice, axes {},{},{}", model.kind(), axes[0], axes[1], axes[2]);
            for y in &verts {
                let _ = writeln!(s, "v {} {} {}", fmt17(y[axes[0]]), fmt17(y[axes[1]]), fmt17(y[axes[2]]));
            }
            for i in 0..nu.saturating_sub(1) {
                for j in 0..nv.saturating_sub(1) {
                    let id = |a: usize, b: usize| a * nv + b + 1;
                    let _ = writeln!(s, "f {} {} {} {}", id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                }
            }
        }
    }
    fs::write(out, s).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn cmd_preset(
    name: &str,
    function: Option<String>,
    n: Option<usize>,
    a: Option<usize>,
    target: Option<TargetArg>,
    variant: Option<VariantArg>,
) -> Outcome<()> {
    let mut spec = specfile::preset(name, &PresetArgs { function, n, a })?;
    if let Some(t) = target {
        spec.target = match t {
            TargetArg::Flat => Target::Flat,
            TargetArg::Sphere => Target::Sphere,
            TargetArg::Hyperbolic => Target::Hyperbolic,
        };
    }
    if let Some(v) = variant {
        spec.variant = match v {
            VariantArg::Immersion => Variant::Immersion,
            VariantArg::Embedding => Variant::Embedding,
        };
    }
    spec.validate()?;
    print!("# preset {name}\n{}", specfile::print(&spec));
    Ok(())
}
