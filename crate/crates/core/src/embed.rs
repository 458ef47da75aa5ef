//! The six maps `f, f_h, f_s, f̂, f̂_h, f̂_s` as evaluable models.
//!
//! Coordinate layout (construction order, signs in brackets):
//!
//! | kind     | blocks                                               |
//! |----------|------------------------------------------------------|
//! | `f`      | `s(t)` [+], `(ℝ²₁)^a`, `ℝ^{4b}`                       |
//! | `f_h`    | `R·h(θ)` [−+], `η̃` [+]^a, `(ℝ²₁)^a`, `ℝ^{4b}`        |
//! | `f_s`    | `R·g(θ)` [++], `(ℝ²₁)^a`, `ℝ^{4b}`                    |
//! | `fhat`   | `s(t)` [+], `(ℝ²₁)^a`, `ℝ^{8b}`                       |
//! | `fhat_h` | `R·h(θ)` [−+], `η̃` [+]^a, `(ℝ²₁)^a`, `ℝ^{8b}`        |
//! | `fhat_s` | `R·𝒞(θ)` [++++], `(ℝ²₁)^a`, `ℝ^{8b}`                  |
//!
//! Jacobian columns are ordered `(∂t, ∂x₁, …, ∂x_{n−1})`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::atlas::{
    cal_c, cal_c_deriv, g, g_deriv, h, h_deriv, rate_from, t_fn, DerivedScalars, PointBase,
    Scalars, ThetaKind,
};
use crate::error::{Error, Result};
use crate::semispace::{AmbientSpace, Quadric, QuadricKind, Sign};
use crate::steps::StepPair;
use crate::warped::{Metric, MetricSpec, Target, Variant};

/// Radicands at or below this are treated as a synthesis failure.
pub const RADICAND_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmbedKind {
    F,
    Fh,
    Fs,
    FHat,
    FHatH,
    FHatS,
}

impl EmbedKind {
    pub const ALL: [EmbedKind; 6] = [
        EmbedKind::F,
        EmbedKind::Fh,
        EmbedKind::Fs,
        EmbedKind::FHat,
        EmbedKind::FHatH,
        EmbedKind::FHatS,
    ];

    pub fn from_target(target: Target, variant: Variant) -> Self {
        match (target, variant) {
            (Target::Flat, Variant::Immersion) => EmbedKind::F,
            (Target::Hyperbolic, Variant::Immersion) => EmbedKind::Fh,
            (Target::Sphere, Variant::Immersion) => EmbedKind::Fs,
            (Target::Flat, Variant::Embedding) => EmbedKind::FHat,
            (Target::Hyperbolic, Variant::Embedding) => EmbedKind::FHatH,
            (Target::Sphere, Variant::Embedding) => EmbedKind::FHatS,
        }
    }

    pub fn target(self) -> Target {
        match self {
            EmbedKind::F | EmbedKind::FHat => Target::Flat,
            EmbedKind::Fh | EmbedKind::FHatH => Target::Hyperbolic,
            EmbedKind::Fs | EmbedKind::FHatS => Target::Sphere,
        }
    }

    pub fn variant(self) -> Variant {
        if self.is_embedding() {
            Variant::Embedding
        } else {
            Variant::Immersion
        }
    }

    pub fn is_embedding(self) -> bool {
        matches!(self, EmbedKind::FHat | EmbedKind::FHatH | EmbedKind::FHatS)
    }

    pub fn theta_kind(self) -> ThetaKind {
        match self {
            EmbedKind::F => ThetaKind::Flat,
            EmbedKind::FHat => ThetaKind::FlatHat,
            EmbedKind::Fh => ThetaKind::H,
            EmbedKind::Fs => ThetaKind::S,
            EmbedKind::FHatH => ThetaKind::HatH,
            EmbedKind::FHatS => ThetaKind::HatS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EmbedKind::F => "f",
            EmbedKind::Fh => "f_h",
            EmbedKind::Fs => "f_s",
            EmbedKind::FHat => "fhat",
            EmbedKind::FHatH => "fhat_h",
            EmbedKind::FHatS => "fhat_s",
        }
    }

    fn lead_width(self) -> usize {
        match self {
            EmbedKind::F | EmbedKind::FHat => 1,
            EmbedKind::Fh | EmbedKind::FHatH | EmbedKind::Fs => 2,
            EmbedKind::FHatS => 4,
        }
    }

    fn bar_width(self) -> usize {
        if self.is_embedding() {
            8
        } else {
            4
        }
    }

    /// `(dim, index)` of the ambient space for `n`, `a`.
    pub fn ambient_signature(self, n: usize, a: usize) -> (usize, usize) {
        let b = n - 1 - a;
        let hyper = self.target() == Target::Hyperbolic;
        let dim = self.lead_width() + if hyper { a } else { 0 } + 2 * a + self.bar_width() * b;
        (dim, a + usize::from(hyper))
    }
}

impl fmt::Display for EmbedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmbedKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        EmbedKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown map kind `{s}`")))
    }
}

/// A named run of ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub offset: usize,
    pub signs: Vec<Sign>,
}

impl Block {
    pub fn width(&self) -> usize {
        self.signs.len()
    }
}

/// Everything that depends on `t` alone, shared by all `x` at that `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub base: PointBase,
    pub s: [f64; 2],
    pub scalars: Scalars,
    pub theta: f64,
    pub theta_rate: f64,
    /// `(R, R′)` for the quadric kinds.
    pub radius: Option<(f64, f64)>,
}

/// A fully instantiated map into its signed ambient space.
#[derive(Debug)]
pub struct EmbeddingModel {
    kind: EmbedKind,
    metric: Arc<Metric>,
    scalars: DerivedScalars,
    ambient: AmbientSpace,
    quadric: Option<Quadric>,
    layout: Vec<Block>,
}

impl EmbeddingModel {
    /// Validate, synthesize steps for the spec's target and variant, and build.
    pub fn from_spec(spec: &MetricSpec) -> Result<Self> {
        EmbeddingModel::build(Arc::new(spec.validate()?))
    }

    pub fn build(metric: Arc<Metric>) -> Result<Self> {
        let steps = Arc::new(StepPair::synthesize(metric.clone())?);
        Ok(EmbeddingModel::with_steps(metric, steps))
    }

    /// Build around existing steps (which must belong to `metric`).
    pub fn with_steps(metric: Arc<Metric>, steps: Arc<StepPair>) -> Self {
        let spec = metric.spec();
        let kind = EmbedKind::from_target(spec.target, spec.variant);
        let (a, b) = (metric.a(), metric.b());
        let mut layout = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, signs: Vec<Sign>| {
            let w = signs.len();
            layout.push(Block { name, offset, signs });
            offset += w;
        };
        use Sign::{Minus, Plus};
        match kind {
            EmbedKind::F | EmbedKind::FHat => push("s".into(), vec![Plus]),
            EmbedKind::Fh | EmbedKind::FHatH => {
                push("radius".into(), vec![Minus, Plus]);
                if a > 0 {
                    push("eta_tilde".into(), vec![Plus; a]);
                }
            }
            EmbedKind::Fs => push("radius".into(), vec![Plus; 2]),
            EmbedKind::FHatS => push("radius".into(), vec![Plus; 4]),
        }
        for k in 0..a {
            push(format!("h{}", k + 1), vec![Minus, Plus]);
        }
        let bar = if kind.is_embedding() { "phihat" } else { "phi" };
        for r in 0..b {
            push(format!("{bar}{}", a + r + 1), vec![Plus; kind.bar_width()]);
        }
        let ambient = AmbientSpace::new(layout.iter().flat_map(|b| b.signs.clone()).collect());
        let quadric = match kind.target() {
            Target::Flat => None,
            Target::Hyperbolic => Some(QuadricKind::Hyperbolic),
            Target::Sphere => Some(QuadricKind::Sphere),
        }
        .map(|q| Quadric::new(q, metric.c(), ambient.clone()).expect("c validated positive"));
        EmbeddingModel {
            kind,
            scalars: DerivedScalars::new(metric.clone(), steps),
            metric,
            ambient,
            quadric,
            layout,
        }
    }

    pub fn kind(&self) -> EmbedKind {
        self.kind
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn metric_arc(&self) -> Arc<Metric> {
        self.metric.clone()
    }

    pub fn scalars(&self) -> &DerivedScalars {
        &self.scalars
    }

    pub fn steps(&self) -> &StepPair {
        self.scalars.steps()
    }

    pub fn ambient(&self) -> &AmbientSpace {
        &self.ambient
    }

    pub fn quadric(&self) -> Option<&Quadric> {
        self.quadric.as_ref()
    }

    pub fn layout(&self) -> &[Block] {
        &self.layout
    }

    /// `diag(ρ², η₁², …)` at `t`.
    pub fn target_metric(&self, frame: &Frame) -> Vec<f64> {
        let c = &frame.base.coef;
        std::iter::once(c.rho * c.rho)
            .chain(c.eta.iter().map(|e| e * e))
            .collect()
    }

    pub fn frame(&self, t: f64) -> Result<Frame> {
        let base = self.scalars.base(t)?;
        let s = self.scalars.steps_at(t)?;
        let scalars = Scalars::new(&base, s, self.metric.c());
        let tk = self.kind.theta_kind();
        let theta = self.scalars.theta(tk, t)?;
        let theta_rate = rate_from(tk, &scalars, t)?;
        let radius = match tk.radius2(&scalars) {
            None => None,
            Some((r2, r2d)) => {
                if !(r2 > RADICAND_FLOOR) {
                    return Err(Error::Radicand { t, value: r2 });
                }
                let r = r2.sqrt();
                Some((r, r2d / (2.0 * r)))
            }
        };
        Ok(Frame {
            t,
            base,
            s,
            scalars,
            theta,
            theta_rate,
            radius,
        })
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        let want = self.metric.n() - 1;
        if x.len() != want {
            return Err(Error::DimensionMismatch {
                expected: want,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        Ok(self.eval_frame(&self.frame(t)?, x))
    }

    pub fn jacobian(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_x(x)?;
        Ok(self.jacobian_frame(&self.frame(t)?, x))
    }

    /// Point at `x` for a precomputed frame; `x` must have `n − 1` entries.
    pub fn eval_frame(&self, fr: &Frame, x: &[f64]) -> Vec<f64> {
        let a = self.metric.a();
        let coef = &fr.base.coef;
        let mut out = Vec::with_capacity(self.ambient.dim());
        match (self.kind, fr.radius) {
            (EmbedKind::F | EmbedKind::FHat, _) => out.push(fr.theta),
            (EmbedKind::Fh | EmbedKind::FHatH, Some((r, _))) => {
                out.extend(h(fr.theta).map(|v| r * v));
                out.extend_from_slice(&coef.eta[..a]);
            }
            (EmbedKind::Fs, Some((r, _))) => out.extend(g(fr.theta).map(|v| r * v)),
            (EmbedKind::FHatS, Some((r, _))) => out.extend(cal_c(fr.theta).map(|v| r * v)),
            _ => unreachable!("quadric kinds always carry a radius"),
        }
        for k in 0..a {
            out.extend(h(x[k]).map(|v| coef.eta[k] * v));
        }
        for (r, p) in fr.base.prod.iter().enumerate() {
            let xr = x[a + r];
            if self.kind.is_embedding() {
                for i in 1..=2 {
                    for j in 0..2 {
                        let ang = t_fn(i, fr.s[j] * xr).0;
                        let w = p[j] / fr.s[j];
                        out.extend_from_slice(&[w * ang.cos(), w * ang.sin()]);
                    }
                }
            } else {
                for j in 0..2 {
                    let ang = fr.s[j] * xr;
                    let w = p[j] / fr.s[j];
                    out.extend_from_slice(&[w * ang.cos(), w * ang.sin()]);
                }
            }
        }
        out
    }

    /// Analytic Jacobian (ambient × n) for a precomputed frame.
    pub fn jacobian_frame(&self, fr: &Frame, x: &[f64]) -> DMatrix<f64> {
        let a = self.metric.a();
        let n = self.metric.n();
        let coef = &fr.base.coef;
        let mut jac = DMatrix::zeros(self.ambient.dim(), n);
        let mut row = 0;
        let th = fr.theta;
        let w = fr.theta_rate;
        match (self.kind, fr.radius) {
            (EmbedKind::F | EmbedKind::FHat, _) => {
                jac[(0, 0)] = w;
                row = 1;
            }
            (kind, Some((r, rd))) => {
                let (v, dv): (Vec<f64>, Vec<f64>) = match kind {
                    EmbedKind::Fh | EmbedKind::FHatH => (h(th).to_vec(), h_deriv(th).to_vec()),
                    EmbedKind::Fs => (g(th).to_vec(), g_deriv(th).to_vec()),
                    _ => (cal_c(th).to_vec(), cal_c_deriv(th).to_vec()),
                };
                for (vi, dvi) in v.iter().zip(&dv) {
                    jac[(row, 0)] = rd * vi + r * w * dvi;
                    row += 1;
                }
                if matches!(kind, EmbedKind::Fh | EmbedKind::FHatH) {
                    for k in 0..a {
                        jac[(row, 0)] = coef.eta_deriv[k];
                        row += 1;
                    }
                }
            }
            _ => unreachable!("quadric kinds always carry a radius"),
        }
        for k in 0..a {
            let (hv, dh) = (h(x[k]), h_deriv(x[k]));
            for c in 0..2 {
                jac[(row + c, 0)] = coef.eta_deriv[k] * hv[c];
                jac[(row + c, 1 + k)] = coef.eta[k] * dh[c];
            }
            row += 2;
        }
        for (r, (p, dp)) in fr.base.prod.iter().zip(&fr.base.prod_deriv).enumerate() {
            let col = 1 + a + r;
            let xr = x[a + r];
            let mut put = |row: &mut usize, ang: f64, speed: f64, j: usize| {
                let (cs, sn) = (ang.cos(), ang.sin());
                let dt = dp[j] / fr.s[j];
                jac[(*row, 0)] = dt * cs;
                jac[(*row + 1, 0)] = dt * sn;
                jac[(*row, col)] = -p[j] * speed * sn;
                jac[(*row + 1, col)] = p[j] * speed * cs;
                *row += 2;
            };
            if self.kind.is_embedding() {
                for i in 1..=2 {
                    for j in 0..2 {
                        let (ang, speed) = t_fn(i, fr.s[j] * xr);
                        put(&mut row, ang, speed, j);
                    }
                }
            } else {
                for j in 0..2 {
                    put(&mut row, fr.s[j] * xr, 1.0, j);
                }
            }
        }
        debug_assert_eq!(row, self.ambient.dim());
        jac
    }

    /// The domain pair of the collision construction at `t_{2k}`: equal in the
    /// first `a` slots (zero), `±π l_r / S₁` in slot `a + r`.
    ///
    /// Available for every kind so that embedding kinds can be probed with
    /// the same points; see [`EmbeddingModel::collision_witness`].
    pub fn witness_points(&self, k: i64, l: &[i64]) -> Result<((f64, Vec<f64>), (f64, Vec<f64>))> {
        let (a, b) = (self.metric.a(), self.metric.b());
        if b == 0 {
            return Err(Error::WitnessPrecondition("b > 0".into()));
        }
        if l.len() != b {
            return Err(Error::DimensionMismatch {
                expected: b,
                found: l.len(),
            });
        }
        if l.iter().all(|&v| v == 0) {
            return Err(Error::WitnessPrecondition("some l_r != 0".into()));
        }
        let t = self.metric.pair().breakpoint(2 * k)?;
        let s1 = self.steps().at(t)?[0];
        let mut x1 = vec![0.0; a + b];
        let mut x2 = vec![0.0; a + b];
        for (r, &lr) in l.iter().enumerate() {
            x1[a + r] = PI * lr as f64 / s1;
            x2[a + r] = -PI * lr as f64 / s1;
        }
        Ok(((t, x1), (t, x2)))
    }

    /// Two distinct domain points with one image, for `f`, `f_h`, `f_s`.
    pub fn collision_witness(&self, k: i64, l: &[i64]) -> Result<((f64, Vec<f64>), (f64, Vec<f64>))> {
        if self.kind.is_embedding() {
            return Err(Error::WitnessPrecondition(format!(
                "an immersion kind (f, f_h or f_s), not {}",
                self.kind
            )));
        }
        self.witness_points(k, l)
    }
}
