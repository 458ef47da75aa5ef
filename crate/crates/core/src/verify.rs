//! Numerical verification battery and its line-based report.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::atlas::PointBase;
use crate::embed::{EmbedKind, EmbeddingModel, Frame};
use crate::error::Result;
use crate::semispace::Sign;
use crate::steps::StepPair;
use crate::warped::{Metric, HALF_GAPS};

pub const ISOMETRY_TOL: f64 = 1e-6;
pub const ISOMETRY_FD_TOL: f64 = 1e-4;
pub const QUADRIC_TOL: f64 = 1e-8;
pub const JACOBIAN_TOL: f64 = 1e-5;
pub const SMOOTHNESS_TOL: f64 = 1e-6;
pub const COLLIDE_TOL: f64 = 1e-10;
pub const SEPARATE_TOL: f64 = 1e-12;

// RNG streams, one per check, so adding samples to one check leaves the others alone.
const STREAM_QUADRIC: u64 = 1 << 32;
const STREAM_PAIRS: u64 = 2 << 32;
const STREAM_JACOBIAN: u64 = 3 << 32;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    /// t-samples per breakpoint gap.
    pub grid_density: usize,
    pub seed: u64,
    /// x is sampled in `[−x_box, x_box]^{n−1}`.
    pub x_box: f64,
    pub x_per_t: usize,
    /// Gaps `−half_gaps..half_gaps` around `t₀`.
    pub half_gaps: i64,
    pub quadric_samples: usize,
    pub pair_samples: usize,
    pub jacobian_samples: usize,
    pub monotone_samples: usize,
    /// Breakpoints `t_k` probed by the smoothness check.
    pub smooth_breakpoints: (i64, i64),
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            grid_density: 64,
            seed: 0,
            x_box: 3.0,
            x_per_t: 8,
            half_gaps: HALF_GAPS,
            quadric_samples: 1000,
            pair_samples: 10_000,
            jacobian_samples: 50,
            monotone_samples: 1000,
            smooth_breakpoints: (-5, 4),
        }
    }
}

impl VerifyConfig {
    /// Defaults with the metric's own grid density.
    pub fn for_metric(metric: &Metric) -> Self {
        VerifyConfig {
            grid_density: metric.spec().grid_density,
            ..VerifyConfig::default()
        }
    }

    /// `t` on `γ⁻¹(k + i/density)` for every gap, plus the closing breakpoint.
    pub fn t_grid(&self, metric: &Metric) -> Result<Vec<f64>> {
        let d = self.grid_density as i64;
        (-self.half_gaps * d..=self.half_gaps * d)
            .map(|i| metric.gamma().inverse(i as f64 / d as f64))
            .collect()
    }

    /// The `x` samples attached to grid index `i`.
    pub fn x_samples(&self, i: usize, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = self.rng(i as u64);
        (0..self.x_per_t)
            .map(|_| (0..dim).map(|_| rng.gen_range(-self.x_box..=self.x_box)).collect())
            .collect()
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// `count` points with `γ(t)` uniform over the verified gaps.
    pub fn random_points(&self, metric: &Metric, stream: u64, count: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let mut rng = self.rng(stream);
        let h = self.half_gaps as f64;
        let dim = metric.n() - 1;
        let raw: Vec<(f64, Vec<f64>)> = (0..count)
            .map(|_| {
                let u = rng.gen_range(-h..h);
                let x = (0..dim).map(|_| rng.gen_range(-self.x_box..=self.x_box)).collect();
                (u, x)
            })
            .collect();
        raw.into_iter()
            .map(|(u, x)| Ok((metric.gamma().inverse(u)?, x)))
            .collect()
    }

    pub fn describe(&self, metric: &Metric) -> Result<String> {
        let g = metric.gamma();
        Ok(format!(
            "t in [{:.6e}, {:.6e}], {} gaps, density {}, x-box [-{},{}]^{}, {} x per t, seed {}",
            g.inverse(-self.half_gaps as f64)?,
            g.inverse(self.half_gaps as f64)?,
            2 * self.half_gaps,
            self.grid_density,
            self.x_box,
            self.x_box,
            metric.n() - 1,
            self.x_per_t,
            self.seed
        ))
    }
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |m, v| if v > m || v.is_nan() { v } else { m })
}

/// `‖JᵀSJ − D‖∞ / (1 + ‖D‖∞)` with entrywise max norms.
pub fn metric_error(jac: &DMatrix<f64>, signs: &[Sign], target: &[f64]) -> f64 {
    let n = jac.ncols();
    let mut err: f64 = 0.0;
    for r in 0..n {
        for c in r..n {
            let v: f64 = (0..jac.nrows())
                .map(|i| signs[i].value() * jac[(i, r)] * jac[(i, c)])
                .sum();
            let want = if r == c { target[r] } else { 0.0 };
            err = max_of([err, (v - want).abs()]);
        }
    }
    err / (1.0 + max_of(target.iter().map(|v| v.abs())))
}

/// Offsets and weights of the 6th-order central stencil (divide by `60h`).
const T_STENCIL: [(f64, f64); 6] = [(-3.0, -1.0), (-2.0, 9.0), (-1.0, -45.0), (1.0, 45.0), (2.0, -9.0), (3.0, 1.0)];

/// Frames on the `t` stencil around `t`.
///
/// The Lorentz blocks of the hyperbolic kinds carry `cosh²θ` amplification
/// (about 1e8 at the edge of the default grid), so the `t` column needs a
/// relative accuracy near 1e−12: a 6th-order stencil with
/// `h_t = 5e−3 / max(γ′, |θ′|)`.
fn t_stencil(model: &EmbeddingModel, fr: &Frame) -> Result<Vec<Frame>> {
    let gd = model.metric().gamma().deriv(fr.t)?;
    let ht = 5e-3 / gd.max(fr.theta_rate.abs());
    T_STENCIL.iter().map(|(o, _)| model.frame(fr.t + o * ht)).collect()
}

/// Central-difference Jacobian. The `x` steps are `1e−6` in the `h` columns
/// and `1e−3/max(1, S₁, S₂)` in the φ columns, where `S·x` can reach 1e5 and
/// a smaller step drowns in the rounding of the angle.
pub fn fd_jacobian(model: &EmbeddingModel, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
    let fr = model.frame(t)?;
    let side = t_stencil(model, &fr)?;
    Ok(fd_jacobian_frames(model, &fr, &side, x))
}

fn fd_jacobian_frames(model: &EmbeddingModel, fr: &Frame, side: &[Frame], x: &[f64]) -> DMatrix<f64> {
    let a = model.metric().a();
    let n = x.len() + 1;
    let dim = model.ambient().dim();
    let mut jac = DMatrix::zeros(dim, n);
    // the realised step, not the requested one
    let ht = (side[3].t - side[2].t) / 2.0;
    for ((_, w), f) in T_STENCIL.iter().zip(side) {
        let p = model.eval_frame(f, x);
        for i in 0..dim {
            jac[(i, 0)] += w * p[i];
        }
    }
    for i in 0..dim {
        jac[(i, 0)] /= 60.0 * ht;
    }
    let smax = fr.s[0].max(fr.s[1]).max(1.0);
    for c in 0..x.len() {
        let h = if c < a { 1e-6 } else { 1e-3 / smax };
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[c] += h;
        xm[c] -= h;
        let (p, m) = (model.eval_frame(fr, &xp), model.eval_frame(fr, &xm));
        for i in 0..dim {
            jac[(i, c + 1)] = (p[i] - m[i]) / (xp[c] - xm[c]);
        }
    }
    jac
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianSource {
    Analytic,
    FiniteDifference,
}

/// Max relative pullback error over the default grid.
pub fn check_isometry(model: &EmbeddingModel, cfg: &VerifyConfig, source: JacobianSource) -> Result<f64> {
    let metric = model.metric();
    let ts = cfg.t_grid(metric)?;
    let signs = model.ambient().signs();
    let per_t: Vec<f64> = ts
        .par_iter()
        .enumerate()
        .map(|(i, &t)| -> Result<f64> {
            let fr = model.frame(t)?;
            let target = model.target_metric(&fr);
            let side = match source {
                JacobianSource::Analytic => None,
                JacobianSource::FiniteDifference => Some(t_stencil(model, &fr)?),
            };
            let mut worst: f64 = 0.0;
            for x in cfg.x_samples(i, metric.n() - 1) {
                let jac = match &side {
                    None => model.jacobian_frame(&fr, &x),
                    Some(side) => fd_jacobian_frames(model, &fr, side, &x),
                };
                worst = max_of([worst, metric_error(&jac, signs, &target)]);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(max_of(per_t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadricFindings {
    /// `|⟨F,F⟩ − level| / max(1/c, ‖F‖²)`.
    pub relative: f64,
    pub absolute: f64,
}

/// `None` for the flat kinds.
pub fn check_quadric(model: &EmbeddingModel, cfg: &VerifyConfig) -> Result<Option<QuadricFindings>> {
    let Some(q) = model.quadric() else {
        return Ok(None);
    };
    let pts = cfg.random_points(model.metric(), STREAM_QUADRIC, cfg.quadric_samples)?;
    let found: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|(t, x)| -> Result<(f64, f64)> {
            let p = model.eval(*t, x)?;
            let res = q.residual(&p)?.abs();
            let norm2: f64 = p.iter().map(|v| v * v).sum();
            Ok((res / norm2.max(1.0 / q.c), res))
        })
        .collect::<Result<_>>()?;
    Ok(Some(QuadricFindings {
        relative: max_of(found.iter().map(|f| f.0)),
        absolute: max_of(found.iter().map(|f| f.1)),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessStatus {
    Collided,
    Separated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessFinding {
    pub k: i64,
    pub l: Vec<i64>,
    pub status: WitnessStatus,
    /// Euclidean image distance over the pair's max coordinate magnitude.
    pub distance: f64,
    /// Whether the status is the one the kind predicts.
    pub expected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectivityFindings {
    pub witnesses: Vec<WitnessFinding>,
    pub pairs: usize,
    /// Smallest relative separation over the random pairs.
    pub min_pair_separation: f64,
}

/// Euclidean distance over `max(1, max |coordinate|)` of the pair.
pub fn relative_distance(p: &[f64], q: &[f64]) -> f64 {
    let scale = max_of(p.iter().chain(q).map(|v| v.abs()));
    let d: f64 = p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

/// The witness set: `k ∈ −2..=2`, `l = (1,…,1)` and `l = 2e₁`.
pub fn witness_set(b: usize) -> Vec<(i64, Vec<i64>)> {
    if b == 0 {
        return Vec::new();
    }
    let ones = vec![1; b];
    let mut two = vec![0; b];
    two[0] = 2;
    (-2..=2)
        .flat_map(|k| [(k, ones.clone()), (k, two.clone())])
        .collect()
}

pub fn check_injectivity(model: &EmbeddingModel, cfg: &VerifyConfig) -> Result<InjectivityFindings> {
    let embedding = model.kind().is_embedding();
    let mut witnesses = Vec::new();
    for (k, l) in witness_set(model.metric().b()) {
        let ((t1, x1), (t2, x2)) = model.witness_points(k, &l)?;
        let d = relative_distance(&model.eval(t1, &x1)?, &model.eval(t2, &x2)?);
        let status = if d < COLLIDE_TOL {
            WitnessStatus::Collided
        } else {
            WitnessStatus::Separated
        };
        let expected = if embedding {
            d > SEPARATE_TOL
        } else {
            status == WitnessStatus::Collided
        };
        witnesses.push(WitnessFinding {
            k,
            l,
            status,
            distance: d,
            expected,
        });
    }
    let pts = cfg.random_points(model.metric(), STREAM_PAIRS, 2 * cfg.pair_samples)?;
    let seps: Vec<f64> = pts
        .par_chunks(2)
        .map(|pair| -> Result<f64> {
            let (p, q) = (&pair[0], &pair[1]);
            Ok(relative_distance(&model.eval(p.0, &p.1)?, &model.eval(q.0, &q.1)?))
        })
        .collect::<Result<_>>()?;
    let min_pair_separation = seps.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(InjectivityFindings {
        witnesses,
        pairs: seps.len(),
        min_pair_separation,
    })
}

/// Max one-sided derivative jump of `t ↦ η_r ψⱼ / Sⱼ` at `t_k`, `k ∈ ks`.
///
/// The left limit uses the step values of gap `k − 1`, the right limit
/// those of gap `k`, with 4th-order one-sided stencils.
pub fn check_smoothness(metric: &Metric, steps: &StepPair, ks: (i64, i64)) -> Result<f64> {
    if metric.b() == 0 {
        return Ok(0.0);
    }
    const W: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
    let pair = metric.pair();
    let mut worst: f64 = 0.0;
    for k in ks.0..=ks.1 {
        let tk = pair.breakpoint(k)?;
        let gap = (pair.breakpoint(k + 1)? - tk).min(tk - pair.breakpoint(k - 1)?);
        let h = 1e-3 * gap;
        let (sl, sr) = (steps.on_gap(k - 1)?, steps.on_gap(k)?);
        let plus: Vec<PointBase> = (0..5).map(|i| PointBase::at(metric, tk + i as f64 * h)).collect::<Result<_>>()?;
        let minus: Vec<PointBase> = (0..5).map(|i| PointBase::at(metric, tk - i as f64 * h)).collect::<Result<_>>()?;
        for r in 0..metric.b() {
            for j in 0..2 {
                let dp: f64 = (0..5).map(|i| W[i] * plus[i].prod[r][j] / sr[j]).sum::<f64>() / (12.0 * h);
                let dm: f64 = -(0..5).map(|i| W[i] * minus[i].prod[r][j] / sl[j]).sum::<f64>() / (12.0 * h);
                worst = max_of([worst, (dp - dm).abs()]);
            }
        }
    }
    Ok(worst)
}

/// Max column-wise `‖J − J_fd‖∞ / ‖J‖∞` over random points.
pub fn jacobian_agreement(model: &EmbeddingModel, cfg: &VerifyConfig) -> Result<f64> {
    let pts = cfg.random_points(model.metric(), STREAM_JACOBIAN, cfg.jacobian_samples)?;
    let per: Vec<f64> = pts
        .par_iter()
        .map(|(t, x)| -> Result<f64> {
            let ja = model.jacobian(*t, x)?;
            let jf = fd_jacobian(model, *t, x)?;
            let mut worst: f64 = 0.0;
            for c in 0..ja.ncols() {
                let norm = max_of(ja.column(c).iter().map(|v| v.abs()));
                let diff = max_of(ja.column(c).iter().zip(jf.column(c).iter()).map(|(a, b)| (a - b).abs()));
                worst = max_of([worst, if norm > 0.0 { diff / norm } else { diff }]);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    Ok(max_of(per))
}

/// The quantity that must increase along the t-line, if the kind has one.
///
/// For `fhat_s` this is `sin T₁(θ)` through `−ln(π/2 − T₁(θ)) =
/// ln(1 + e^{2θ}) − ln(π/2)`, which stays resolvable long after `sin T₁`
/// rounds to 1.
pub fn monotone_quantity(kind: EmbedKind, theta: f64) -> Option<f64> {
    match kind {
        EmbedKind::F | EmbedKind::FHat => Some(theta),
        EmbedKind::FHatH => Some(theta.sinh()),
        EmbedKind::FHatS => {
            let x = 2.0 * theta;
            let softplus = x.max(0.0) + (-x.abs()).exp().ln_1p();
            Some(softplus - std::f64::consts::FRAC_PI_2.ln())
        }
        EmbedKind::Fh | EmbedKind::Fs => None,
    }
}

/// Number of non-increasing steps over ordered samples, `None` if inapplicable.
pub fn check_t_monotone(model: &EmbeddingModel, cfg: &VerifyConfig) -> Result<Option<usize>> {
    let kind = model.kind();
    if monotone_quantity(kind, 0.0).is_none() {
        return Ok(None);
    }
    let m = cfg.monotone_samples.max(2);
    let h = cfg.half_gaps as f64;
    let qs: Vec<f64> = (0..m)
        .map(|i| {
            let u = -h + 2.0 * h * (i as f64 + 0.5) / m as f64;
            let t = model.metric().gamma().inverse(u)?;
            let theta = model.scalars().theta(kind.theta_kind(), t)?;
            Ok(monotone_quantity(kind, theta).expect("checked above"))
        })
        .collect::<Result<_>>()?;
    Ok(Some(qs.windows(2).filter(|w| !(w[1] > w[0])).count()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub kind: EmbedKind,
    pub ambient: String,
    pub quadric: Option<String>,
    pub n: usize,
    pub a: usize,
    pub grid: String,
    pub max_metric_error: f64,
    pub max_metric_error_fd: f64,
    pub max_quadric_residual: Option<QuadricFindings>,
    pub collision_checks: Vec<WitnessFinding>,
    pub pair_count: usize,
    pub min_pair_separation: f64,
    pub smoothness_max_jump: f64,
    pub jacobian_agreement: f64,
    pub monotone_violations: Option<usize>,
    pub steps_margin: f64,
    pub safety: f64,
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let e = |v: f64| format!("{v:.6e}");
        let _ = writeln!(s, "kind: {}", self.kind);
        let _ = writeln!(s, "n: {}", self.n);
        let _ = writeln!(s, "a: {}", self.a);
        let _ = writeln!(s, "ambient: {}", self.ambient);
        let _ = writeln!(s, "quadric: {}", self.quadric.as_deref().unwrap_or("none"));
        let _ = writeln!(s, "grid: {}", self.grid);
        let _ = writeln!(s, "max_metric_error: {}", e(self.max_metric_error));
        let _ = writeln!(s, "max_metric_error_fd: {}", e(self.max_metric_error_fd));
        match &self.max_quadric_residual {
            Some(q) => {
                let _ = writeln!(s, "max_quadric_residual: {}", e(q.relative));
                let _ = writeln!(s, "max_quadric_residual_abs: {}", e(q.absolute));
            }
            None => {
                let _ = writeln!(s, "max_quadric_residual: skipped");
            }
        }
        for w in &self.collision_checks {
            let l: Vec<String> = w.l.iter().map(|v| v.to_string()).collect();
            let status = match w.status {
                WitnessStatus::Collided => "collided",
                WitnessStatus::Separated => "separated",
            };
            let _ = writeln!(s, "witness k={} l=({}): {} {}", w.k, l.join(","), status, e(w.distance));
        }
        let _ = writeln!(s, "random_pairs: {}", self.pair_count);
        let _ = writeln!(s, "min_pair_separation: {}", e(self.min_pair_separation));
        let _ = writeln!(s, "smoothness_max_jump: {}", e(self.smoothness_max_jump));
        let _ = writeln!(s, "jacobian_agreement: {}", e(self.jacobian_agreement));
        match self.monotone_violations {
            Some(v) => {
                let _ = writeln!(s, "t_line_violations: {v}");
            }
            None => {
                let _ = writeln!(s, "t_line_violations: skipped");
            }
        }
        let _ = writeln!(s, "steps_margin: {}", e(self.steps_margin));
        for c in &self.checks {
            let _ = writeln!(
                s,
                "CHECK {} {} {} {}",
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                e(c.value),
                e(c.threshold)
            );
        }
        s
    }
}

/// Runs the whole battery.
pub fn verify(model: &EmbeddingModel, cfg: &VerifyConfig) -> Result<VerificationReport> {
    let metric = model.metric();
    let kind = model.kind();
    let mut checks = Vec::new();
    let mut below = |name: &str, value: f64, threshold: f64| {
        checks.push(Check {
            name: name.into(),
            pass: value < threshold,
            value,
            threshold,
        })
    };

    let iso = check_isometry(model, cfg, JacobianSource::Analytic)?;
    below("isometry", iso, ISOMETRY_TOL);
    let iso_fd = check_isometry(model, cfg, JacobianSource::FiniteDifference)?;
    below("isometry_fd", iso_fd, ISOMETRY_FD_TOL);
    let quad = check_quadric(model, cfg)?;
    if let Some(q) = quad {
        below("quadric", q.relative, QUADRIC_TOL);
    }
    let jac = jacobian_agreement(model, cfg)?;
    below("jacobian", jac, JACOBIAN_TOL);
    let smooth = check_smoothness(metric, model.steps(), cfg.smooth_breakpoints)?;
    below("smoothness", smooth, SMOOTHNESS_TOL);
    let monotone = check_t_monotone(model, cfg)?;
    if let Some(v) = monotone {
        below("t_line", v as f64, 0.5);
    }

    let inj = check_injectivity(model, cfg)?;
    for w in &inj.witnesses {
        let l: Vec<String> = w.l.iter().map(|v| v.to_string()).collect();
        let (threshold, name) = if kind.is_embedding() {
            (SEPARATE_TOL, "separated")
        } else {
            (COLLIDE_TOL, "collided")
        };
        checks.push(Check {
            name: format!("witness_{name}[k={},l=({})]", w.k, l.join(",")),
            pass: w.expected,
            value: w.distance,
            threshold,
        });
    }
    if kind.is_embedding() || metric.b() == 0 {
        checks.push(Check {
            name: "pairs_separated".into(),
            pass: inj.min_pair_separation > SEPARATE_TOL,
            value: inj.min_pair_separation,
            threshold: SEPARATE_TOL,
        });
    }

    let cert = model
        .steps()
        .certificate(-cfg.half_gaps, cfg.half_gaps, 4 * cfg.grid_density)?;
    let margin = cert.min_margin();
    checks.push(Check {
        name: "steps_margin".into(),
        pass: cert.passes(),
        value: margin,
        threshold: cert.safety / 2.0,
    });

    Ok(VerificationReport {
        kind,
        ambient: model.ambient().to_string(),
        quadric: model.quadric().map(|q| q.to_string()),
        n: metric.n(),
        a: metric.a(),
        grid: cfg.describe(metric)?,
        max_metric_error: iso,
        max_metric_error_fd: iso_fd,
        max_quadric_residual: quad,
        collision_checks: inj.witnesses,
        pair_count: inj.pairs,
        min_pair_separation: inj.min_pair_separation,
        smoothness_max_jump: smooth,
        jacobian_agreement: jac,
        monotone_violations: monotone,
        steps_margin: margin,
        safety: cert.safety,
        checks,
    })
}
