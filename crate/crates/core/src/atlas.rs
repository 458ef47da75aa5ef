//! Building blocks shared by the six constructions.
//!
//! Pure maps: `h(u) = (cosh u, sinh u)`, `g(u) = (cos u, sin u)`,
//! `T₁(u) = π/4·(1 + tanh u)`, `T₂(u) = ∫₀ᵘ √(1 − T₁′²)` and
//! `𝒞(u) = (cos T₁, sin T₁, cos T₂, sin T₂)`.
//!
//! With the steps fixed, every `t`-dependent scalar (`ε, α, α′, β, δ, Γ, G, Δ`)
//! is a finite sum over `r ∈ η̄` and `j ∈ {1, 2}`; [`PointBase`] holds the parts
//! that do not depend on `S₁, S₂` and [`Scalars`] finishes them for a given
//! pair of step values. The `θ` functions are integrals from `t₀` of the
//! square roots of [`ThetaKind::rate2`].

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock, RwLock};

use crate::blanusa::PsiSample;
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_smooth, QuadConfig, QuadError};
use crate::steps::StepPair;
use crate::warped::{Coefficients, Metric};

/// `θ` knots are placed at `γ(t) = m / KNOTS_PER_UNIT`.
const KNOTS_PER_UNIT: f64 = 8.0;

pub fn h(u: f64) -> [f64; 2] {
    [u.cosh(), u.sinh()]
}

pub fn h_deriv(u: f64) -> [f64; 2] {
    [u.sinh(), u.cosh()]
}

pub fn g(u: f64) -> [f64; 2] {
    [u.cos(), u.sin()]
}

pub fn g_deriv(u: f64) -> [f64; 2] {
    [-u.sin(), u.cos()]
}

pub fn t1(u: f64) -> f64 {
    FRAC_PI_4 * (1.0 + u.tanh())
}

pub fn t1_deriv(u: f64) -> f64 {
    let s = 1.0 / u.cosh();
    FRAC_PI_4 * s * s
}

pub fn t2_deriv(u: f64) -> f64 {
    let d = t1_deriv(u);
    (1.0 - d * d).sqrt()
}

const T2_STEP: f64 = 0.125;
const T2_LINEAR_FROM: f64 = 20.0;

fn t2_cfg() -> QuadConfig {
    QuadConfig {
        abs_tol: 1e-15,
        rel_tol: 1e-14,
        max_panels: 200,
    }
}

fn smooth_integral(f: impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    match integrate_smooth(f, a, b, &t2_cfg()) {
        Ok(r) => r.value,
        Err(QuadError::NoConvergence { value, .. }) => value,
        Err(QuadError::Integrand(never)) => match never {},
    }
}

fn t2_nodes() -> &'static [f64] {
    static NODES: OnceLock<Vec<f64>> = OnceLock::new();
    NODES.get_or_init(|| {
        let count = (T2_LINEAR_FROM / T2_STEP) as usize;
        let mut out = Vec::with_capacity(count + 1);
        out.push(0.0);
        for i in 1..=count {
            let a = (i - 1) as f64 * T2_STEP;
            let piece = smooth_integral(t2_deriv, a, a + T2_STEP);
            let prev = out[i - 1];
            out.push(prev + piece);
        }
        out
    })
}

/// `T₂`, odd, from a node table plus one short quadrature; linear past 20
/// where `1 − T₂′` is below `1e−34`.
pub fn t2(u: f64) -> f64 {
    let x = u.abs();
    let nodes = t2_nodes();
    let v = if x >= T2_LINEAR_FROM {
        nodes[nodes.len() - 1] + (x - T2_LINEAR_FROM)
    } else {
        let idx = (x / T2_STEP).round() as usize;
        let node = idx as f64 * T2_STEP;
        nodes[idx] + smooth_integral(t2_deriv, node, x)
    };
    v.copysign(u)
}

/// `𝒞(u)`.
pub fn cal_c(u: f64) -> [f64; 4] {
    let (a, b) = (t1(u), t2(u));
    [a.cos(), a.sin(), b.cos(), b.sin()]
}

pub fn cal_c_deriv(u: f64) -> [f64; 4] {
    let (a, b) = (t1(u), t2(u));
    let (da, db) = (t1_deriv(u), t2_deriv(u));
    [-a.sin() * da, a.cos() * da, -b.sin() * db, b.cos() * db]
}

/// `T₁` or `T₂` with its derivative, selected by `i ∈ {1, 2}`.
pub fn t_fn(i: usize, u: f64) -> (f64, f64) {
    match i {
        1 => (t1(u), t1_deriv(u)),
        2 => (t2(u), t2_deriv(u)),
        _ => panic!("T index must be 1 or 2, got {i}"),
    }
}

/// `(ψ/S)·(cos Su, sin Su)`.
pub fn phi_block(psi: f64, s: f64, u: f64) -> [f64; 2] {
    let w = psi / s;
    [w * (s * u).cos(), w * (s * u).sin()]
}

/// `(ψ/S)·(cos Tᵢ(Su), sin Tᵢ(Su))`.
pub fn phihat_block(i: usize, psi: f64, s: f64, u: f64) -> [f64; 2] {
    let w = psi / s;
    let (a, _) = t_fn(i, s * u);
    [w * a.cos(), w * a.sin()]
}

/// The `S`-independent ingredients at one `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointBase {
    pub t: f64,
    pub coef: Coefficients,
    pub psi: PsiSample,
    /// `η_r ψⱼ` for every `r ∈ η̄`.
    pub prod: Vec<[f64; 2]>,
    /// `(η_r ψⱼ)′`.
    pub prod_deriv: Vec<[f64; 2]>,
    /// `|η̃|²`
    pub nt2: f64,
    /// `|η̃′|²`
    pub ntp2: f64,
    /// `⟨η̃, η̃′⟩`
    pub ntd: f64,
}

impl PointBase {
    pub fn at(metric: &Metric, t: f64) -> Result<PointBase> {
        let psi = metric.pair().sample(t)?;
        let coef = metric.coefficients(t)?;
        let a = metric.a();
        let mut prod = Vec::with_capacity(metric.b());
        let mut prod_deriv = Vec::with_capacity(metric.b());
        for r in a..coef.eta.len() {
            let (e, de) = (coef.eta[r], coef.eta_deriv[r]);
            prod.push([e * psi.psi[0], e * psi.psi[1]]);
            prod_deriv.push([
                de * psi.psi[0] + e * psi.dpsi[0],
                de * psi.psi[1] + e * psi.dpsi[1],
            ]);
        }
        let (mut nt2, mut ntp2, mut ntd) = (0.0, 0.0, 0.0);
        for k in 0..a {
            let (e, de) = (coef.eta[k], coef.eta_deriv[k]);
            nt2 += e * e;
            ntp2 += de * de;
            ntd += e * de;
        }
        Ok(PointBase {
            t,
            coef,
            psi,
            prod,
            prod_deriv,
            nt2,
            ntp2,
            ntd,
        })
    }

    pub fn rho2(&self) -> f64 {
        self.coef.rho * self.coef.rho
    }

    /// `Σ_r ((η_r ψⱼ)′)²`, with `j` zero-based.
    pub fn eps_sum(&self, j: usize) -> f64 {
        self.prod_deriv.iter().map(|p| p[j] * p[j]).sum()
    }

    /// `Σ_r η_r² ψⱼ²`.
    pub fn alpha_sum(&self, j: usize) -> f64 {
        self.prod.iter().map(|p| p[j] * p[j]).sum()
    }

    /// `Σ_r (η_r² ψⱼ²)′`.
    pub fn alpha_deriv_sum(&self, j: usize) -> f64 {
        self.prod
            .iter()
            .zip(&self.prod_deriv)
            .map(|(p, d)| 2.0 * p[j] * d[j])
            .sum()
    }

    /// `max_r ((η_r ψⱼ)′)²`.
    pub fn max_prod_deriv2(&self, j: usize) -> f64 {
        self.prod_deriv.iter().map(|p| p[j] * p[j]).fold(0.0, f64::max)
    }

    /// `max_r η_r² ψⱼ²`.
    pub fn max_prod2(&self, j: usize) -> f64 {
        self.prod.iter().map(|p| p[j] * p[j]).fold(0.0, f64::max)
    }
}

/// Every derived scalar at one `t` for given step values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalars {
    pub c: f64,
    pub rho2: f64,
    pub nt2: f64,
    pub ntp2: f64,
    pub ntd: f64,
    /// `ε²`
    pub eps2: f64,
    pub alpha: f64,
    pub alpha_deriv: f64,
    pub beta: f64,
    pub beta_deriv: f64,
    /// `δ`
    pub delta_small: f64,
    /// `Γ`
    pub gamma_big: f64,
    /// `G`
    pub g_fun: f64,
    /// `Δ`
    pub delta_big: f64,
}

impl Scalars {
    pub fn new(base: &PointBase, s: [f64; 2], c: f64) -> Scalars {
        let inv = [1.0 / (s[0] * s[0]), 1.0 / (s[1] * s[1])];
        let eps2 = base.eps_sum(0) * inv[0] + base.eps_sum(1) * inv[1];
        let alpha = base.alpha_sum(0) * inv[0] + base.alpha_sum(1) * inv[1];
        let ad = base.alpha_deriv_sum(0) * inv[0] + base.alpha_deriv_sum(1) * inv[1];
        let rho2 = base.rho2();
        let (nt2, ntp2, ntd) = (base.nt2, base.ntp2, base.ntd);

        let beta = alpha - nt2;
        let beta_deriv = ad - 2.0 * ntd;
        let delta_small = (ad * ad / 4.0 - ad * ntd).abs();
        let half = 1.0 / (2.0 * c) + nt2;
        let gamma_big = half * (rho2 - eps2 + ntp2 * (1.0 - nt2 / half));
        let r2 = 1.0 / (2.0 * c) + nt2 / 2.0 - alpha;
        let dr2 = -ad + ntd;
        let g_fun = rho2 + ntp2 - 2.0 * eps2 - 2.0 * dr2 * dr2 / (4.0 * r2);
        let delta_big = 2.0 * eps2 + (ad * ad - 2.0 * ad * ntd) / (1.0 / c + nt2 - 2.0 * alpha);
        Scalars {
            c,
            rho2,
            nt2,
            ntp2,
            ntd,
            eps2,
            alpha,
            alpha_deriv: ad,
            beta,
            beta_deriv,
            delta_small,
            gamma_big,
            g_fun,
            delta_big,
        }
    }
}

/// Which `θ` integral: the flat first coordinates of `f` and `f̂`, and the
/// angles of `f_h`, `f_s`, `f̂_h`, `f̂_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ThetaKind {
    Flat,
    FlatHat,
    H,
    S,
    HatH,
    HatS,
}

impl ThetaKind {
    pub const ALL: [ThetaKind; 6] = [
        ThetaKind::Flat,
        ThetaKind::FlatHat,
        ThetaKind::H,
        ThetaKind::S,
        ThetaKind::HatH,
        ThetaKind::HatS,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ThetaKind::Flat => "flat",
            ThetaKind::FlatHat => "flat_hat",
            ThetaKind::H => "h",
            ThetaKind::S => "s",
            ThetaKind::HatH => "hat_h",
            ThetaKind::HatS => "hat_s",
        }
    }

    /// `(R², (R²)′)` of the radius factor, `None` for the flat kinds.
    pub fn radius2(self, sc: &Scalars) -> Option<(f64, f64)> {
        let c = sc.c;
        match self {
            ThetaKind::Flat | ThetaKind::FlatHat => None,
            ThetaKind::H => Some((1.0 / c + sc.alpha, sc.alpha_deriv)),
            ThetaKind::S => Some((1.0 / c - sc.beta, -sc.beta_deriv)),
            ThetaKind::HatH => Some((1.0 / c + 2.0 * sc.alpha, 2.0 * sc.alpha_deriv)),
            ThetaKind::HatS => Some((
                1.0 / (2.0 * c) + sc.nt2 / 2.0 - sc.alpha,
                -sc.alpha_deriv + sc.ntd,
            )),
        }
    }

    /// `θ′²`, the radicand of the integrand.
    pub fn rate2(self, sc: &Scalars) -> f64 {
        let r2 = self.radius2(sc).map_or(1.0, |(r2, _)| r2);
        match self {
            ThetaKind::Flat => sc.rho2 + sc.ntp2 - sc.eps2,
            ThetaKind::FlatHat => sc.rho2 + sc.ntp2 - 2.0 * sc.eps2,
            ThetaKind::H => {
                (sc.rho2 - sc.eps2 + sc.alpha_deriv * sc.alpha_deriv / (4.0 * r2)) / r2
            }
            ThetaKind::S => {
                (sc.rho2 + sc.ntp2 - sc.eps2 - sc.beta_deriv * sc.beta_deriv / (4.0 * r2)) / r2
            }
            ThetaKind::HatH => (sc.rho2 - 2.0 * sc.eps2 + sc.alpha_deriv * sc.alpha_deriv / r2) / r2,
            ThetaKind::HatS => sc.g_fun / r2,
        }
    }
}

impl fmt::Display for ThetaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ThetaKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ThetaKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown theta kind `{s}`")))
    }
}

/// Knots `(t_m, θ(t_m))` for `m ≥ 0` (`pos`) and `m < 0` (`neg`, `neg[i]` is `m = −i−1`).
#[derive(Debug, Default)]
struct Knots {
    pos: Vec<(f64, f64)>,
    neg: Vec<(f64, f64)>,
}

fn theta_cfg() -> QuadConfig {
    QuadConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-12,
        max_panels: 500,
    }
}

/// Spec, Blanuša pair and steps bundled, with one knot cache per `θ` kind.
#[derive(Debug)]
pub struct DerivedScalars {
    metric: Arc<Metric>,
    steps: Arc<StepPair>,
    knots: [RwLock<Knots>; 6],
}

impl DerivedScalars {
    pub fn new(metric: Arc<Metric>, steps: Arc<StepPair>) -> Self {
        let t0 = metric.t0();
        let knots = std::array::from_fn(|_| {
            RwLock::new(Knots {
                pos: vec![(t0, 0.0)],
                neg: Vec::new(),
            })
        });
        DerivedScalars { metric, steps, knots }
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn steps(&self) -> &StepPair {
        &self.steps
    }

    pub fn base(&self, t: f64) -> Result<PointBase> {
        PointBase::at(&self.metric, t)
    }

    /// `(S₁(t), S₂(t))`.
    pub fn steps_at(&self, t: f64) -> Result<[f64; 2]> {
        self.steps.at(t)
    }

    pub fn scalars(&self, t: f64) -> Result<Scalars> {
        let base = self.base(t)?;
        Ok(Scalars::new(&base, self.steps_at(t)?, self.metric.c()))
    }

    pub fn epsilon(&self, t: f64) -> Result<f64> {
        Ok(self.scalars(t)?.eps2.sqrt())
    }

    pub fn alpha(&self, t: f64) -> Result<f64> {
        Ok(self.scalars(t)?.alpha)
    }

    pub fn alpha_deriv(&self, t: f64) -> Result<f64> {
        Ok(self.scalars(t)?.alpha_deriv)
    }

    pub fn beta(&self, t: f64) -> Result<f64> {
        Ok(self.scalars(t)?.beta)
    }

    pub fn delta_small(&self, t: f64) -> Result<f64> {
        Ok(self.scalars(t)?.delta_small)
    }

    pub fn gamma_big(&self, t: f64) -> Result<f64> {
        Ok(self.scalars(t)?.gamma_big)
    }

    pub fn g_fun(&self, t: f64) -> Result<f64> {
        Ok(self.scalars(t)?.g_fun)
    }

    pub fn delta_big(&self, t: f64) -> Result<f64> {
        Ok(self.scalars(t)?.delta_big)
    }

    /// `θ′(t)`; a negative radicand is an error naming `t`.
    pub fn theta_rate(&self, kind: ThetaKind, t: f64) -> Result<f64> {
        rate_from(kind, &self.scalars(t)?, t)
    }

    fn knot_t(&self, m: i64) -> Result<f64> {
        self.metric.gamma().inverse(m as f64 / KNOTS_PER_UNIT)
    }

    fn integral(&self, kind: ThetaKind, a: f64, b: f64) -> Result<f64> {
        match integrate(|t| self.theta_rate(kind, t), a, b, &theta_cfg()) {
            Ok(r) => Ok(r.value),
            Err(QuadError::Integrand(e)) => Err(e),
            Err(QuadError::NoConvergence { value, error }) if error <= 1e-10 * value.abs().max(1.0) => {
                Ok(value)
            }
            Err(QuadError::NoConvergence { .. }) => Err(Error::Quadrature { a, b }),
        }
    }

    /// Knot `m`, extending the chain from `t₀` outward as needed.
    fn knot(&self, kind: ThetaKind, m: i64) -> Result<(f64, f64)> {
        let lock = &self.knots[kind.index()];
        {
            let k = lock.read().expect("theta cache poisoned");
            let hit = if m >= 0 {
                k.pos.get(m as usize)
            } else {
                k.neg.get((-m - 1) as usize)
            };
            if let Some(&v) = hit {
                return Ok(v);
            }
        }
        let mut k = lock.write().expect("theta cache poisoned");
        if m >= 0 {
            while k.pos.len() <= m as usize {
                let i = k.pos.len() as i64;
                let (tp, thp) = *k.pos.last().expect("t0 knot present");
                let tn = self.knot_t(i)?;
                let th = thp + self.integral(kind, tp, tn)?;
                k.pos.push((tn, th));
            }
            Ok(k.pos[m as usize])
        } else {
            while k.neg.len() < (-m) as usize {
                let i = -(k.neg.len() as i64) - 1;
                let (tp, thp) = k.neg.last().copied().unwrap_or(k.pos[0]);
                let tn = self.knot_t(i)?;
                let th = thp + self.integral(kind, tp, tn)?;
                k.neg.push((tn, th));
            }
            Ok(k.neg[(-m - 1) as usize])
        }
    }

    /// `θ(t) = ∫_{t₀}^t θ′`, from the nearest knot.
    pub fn theta(&self, kind: ThetaKind, t: f64) -> Result<f64> {
        self.metric.pair().interval().check(t)?;
        let u = self.metric.gamma().eval(t)?;
        let m = (u * KNOTS_PER_UNIT).round().clamp(-1e7, 1e7) as i64;
        let (tm, thm) = self.knot(kind, m)?;
        Ok(thm + self.integral(kind, tm, t)?)
    }

    /// `φⱼ(t, u)`.
    pub fn phi(&self, j: usize, t: f64, u: f64) -> Result<[f64; 2]> {
        let psi = self.metric.pair().psi(j, t)?;
        let s = self.steps_at(t)?[j - 1];
        Ok(phi_block(psi, s, u))
    }

    /// `φ̂ⱼᵢ(t, u)`.
    pub fn phihat(&self, j: usize, i: usize, t: f64, u: f64) -> Result<[f64; 2]> {
        let psi = self.metric.pair().psi(j, t)?;
        let s = self.steps_at(t)?[j - 1];
        Ok(phihat_block(i, psi, s, u))
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

    /// `η̃⋆h`, `2a` coordinates.
    pub fn star_h(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let coef = self.metric.coefficients(t)?;
        let mut out = Vec::with_capacity(2 * self.metric.a());
        for k in 0..self.metric.a() {
            let v = h(x[k]);
            out.extend_from_slice(&[coef.eta[k] * v[0], coef.eta[k] * v[1]]);
        }
        Ok(out)
    }

    /// `η̄⋆φ`, `4b` coordinates.
    pub fn star_phi(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let base = self.base(t)?;
        let s = self.steps_at(t)?;
        let a = self.metric.a();
        let mut out = Vec::with_capacity(4 * self.metric.b());
        for (r, p) in base.prod.iter().enumerate() {
            for j in 0..2 {
                out.extend_from_slice(&phi_block(p[j], s[j], x[a + r]));
            }
        }
        Ok(out)
    }

    /// `η̄⋆φ̂`, `8b` coordinates in the order `φ₁₁, φ₂₁, φ₁₂, φ₂₂` per factor.
    pub fn star_phihat(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let base = self.base(t)?;
        let s = self.steps_at(t)?;
        let a = self.metric.a();
        let mut out = Vec::with_capacity(8 * self.metric.b());
        for (r, p) in base.prod.iter().enumerate() {
            for i in 1..=2 {
                for j in 0..2 {
                    out.extend_from_slice(&phihat_block(i, p[j], s[j], x[a + r]));
                }
            }
        }
        Ok(out)
    }
}

/// `√(θ′²)` for already computed scalars.
pub fn rate_from(kind: ThetaKind, sc: &Scalars, t: f64) -> Result<f64> {
    let r2 = kind.rate2(sc);
    if r2 >= 0.0 {
        Ok(r2.sqrt())
    } else {
        Err(Error::NegativeIntegrand {
            which: kind.name(),
            t,
            value: r2,
        })
    }
}
