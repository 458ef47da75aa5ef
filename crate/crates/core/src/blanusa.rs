//! Blanuša's smooth partition `ψ̂₁² + ψ̂₂² = 1` and its pullback by `γ`.
//!
//! With `ξ(u) = sin(πu)·exp(−1/sin²(πu))` (and `ξ = 0` on the integers),
//! `F(u) = ∫₀ᵘ ξ` and `A = F(1)`:
//!
//! ```text
//! ψ̂₁(u) = sqrt(F(u + 1) / A)      ψ̂₂(u) = sqrt(F(u) / A)
//! ```
//!
//! Both are 2-periodic, non-negative, and vanish to infinite order on the odd
//! (resp. even) integers. `ψⱼ = ψ̂ⱼ ∘ γ` moves that lattice to the breakpoints
//! `t_k = γ⁻¹(k)` of an interval `I`.
//!
//! `F` is evaluated as a cached node value on a 0.001 grid of `[0, 1]` plus
//! one short Gauss–Kronrod panel, after reducing `u` with `F(u + 2) = F(u)`
//! and `F(−u) = F(u)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::expr::FnExpr;
use crate::interval::Interval;
use crate::quad::{integrate_smooth, QuadConfig};

/// Below this `ψⱼ` the derivative is reported as exactly zero.
pub const FLAT_THRESHOLD: f64 = 1e-9;

const TABLE_STEP: f64 = 1e-3;
const TABLE_NODES: usize = 1001;

/// The bump `ξ`. Zero once `|sin(πu)| < 1e−8`.
pub fn xi(u: f64) -> f64 {
    let k = u.round();
    let s = (PI * (u - k)).sin();
    if s.abs() < 1e-8 {
        return 0.0;
    }
    let s = if k.rem_euclid(2.0) == 0.0 { s } else { -s };
    s * (-1.0 / (s * s)).exp()
}

fn panel_cfg() -> QuadConfig {
    QuadConfig {
        abs_tol: 1e-300,
        rel_tol: 1e-13,
        max_panels: 200,
    }
}

/// `A = ∫₀¹ ξ`, the last node of the cached table so that `F(1) = A` exactly.
pub fn normalization() -> f64 {
    node_table()[TABLE_NODES - 1]
}

fn node_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let cfg = panel_cfg();
        let mut out = Vec::with_capacity(TABLE_NODES);
        out.push(0.0);
        // Neumaier-compensated running sum
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for i in 1..TABLE_NODES {
            let a = (i - 1) as f64 * TABLE_STEP;
            let b = i as f64 * TABLE_STEP;
            let piece = integrate_smooth(xi, a, b, &cfg)
                .map(|r| r.value)
                .unwrap_or_else(|e| match e {
                    crate::quad::QuadError::NoConvergence { value, .. } => value,
                    crate::quad::QuadError::Integrand(never) => match never {},
                });
            let s = sum + piece;
            comp += if sum.abs() >= piece.abs() {
                (sum - s) + piece
            } else {
                (piece - s) + sum
            };
            sum = s;
            out.push(sum + comp);
        }
        out
    })
}

/// `F(u) = ∫₀ᵘ ξ`, using periodicity and evenness to reduce to `[0, 1]`.
pub fn xi_integral(u: f64) -> f64 {
    let mut r = u.rem_euclid(2.0);
    if r > 1.0 {
        r = 2.0 - r;
    }
    let table = node_table();
    let idx = ((r / TABLE_STEP).round() as usize).min(TABLE_NODES - 1);
    let node = idx as f64 * TABLE_STEP;
    if node == r {
        return table[idx];
    }
    let tail = match integrate_smooth(xi, node, r, &panel_cfg()) {
        Ok(res) => res.value,
        Err(crate::quad::QuadError::NoConvergence { value, .. }) => value,
        Err(crate::quad::QuadError::Integrand(never)) => match never {},
    };
    table[idx] + tail
}

/// `ψ̂ⱼ(u)` for `j ∈ {1, 2}`.
pub fn psi_hat(j: usize, u: f64) -> f64 {
    let shift = match j {
        1 => 1.0,
        2 => 0.0,
        _ => panic!("Blanuša index must be 1 or 2, got {j}"),
    };
    let ratio = xi_integral(u + shift) / normalization();
    ratio.clamp(0.0, 1.0).sqrt()
}

/// `ψ̂ⱼ′(u)`, with the flat-threshold convention at the zeros.
pub fn psi_hat_deriv(j: usize, u: f64) -> f64 {
    let value = psi_hat(j, u);
    if value <= FLAT_THRESHOLD {
        return 0.0;
    }
    let shift = if j == 1 { 1.0 } else { 0.0 };
    xi(u + shift) / (2.0 * normalization() * value)
}

/// Increasing diffeomorphism `γ: I → ℝ` with a numerical inverse.
#[derive(Debug, Clone)]
pub struct Gamma {
    forward: FnExpr,
    derivative: FnExpr,
    interval: Interval,
}

impl Gamma {
    pub fn new(forward: FnExpr, interval: Interval) -> Self {
        let derivative = forward.deriv();
        Gamma {
            forward,
            derivative,
            interval,
        }
    }

    /// The default map for the shape of `interval`.
    pub fn default_for(interval: Interval) -> Self {
        Gamma::new(interval.default_gamma(), interval)
    }

    pub fn forward(&self) -> &FnExpr {
        &self.forward
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(self.forward.eval(t)?)
    }

    pub fn deriv(&self, t: f64) -> Result<f64> {
        Ok(self.derivative.eval(t)?)
    }

    /// Sampled check that `γ′ > 0` and `γ` increases over `samples`.
    pub fn check_monotone(&self, samples: &[f64]) -> Result<()> {
        let mut prev: Option<f64> = None;
        for &t in samples {
            let d = self.deriv(t)?;
            let v = self.eval(t)?;
            if !(d > 0.0) || prev.is_some_and(|p| v <= p) {
                return Err(Error::NonMonotoneGamma { t });
            }
            prev = Some(v);
        }
        Ok(())
    }

    /// Step outward from the anchor until `γ` crosses `u`; returns a bracket.
    fn bracket(&self, u: f64) -> Result<(f64, f64)> {
        let anchor = self.interval.anchor();
        let g0 = self.eval(anchor)?;
        if g0 == u {
            return Ok((anchor, anchor));
        }
        let upward = u > g0;
        let end = if upward { self.interval.hi } else { self.interval.lo };
        let mut inner = anchor;
        for k in 0..1100 {
            let outer = if end.is_finite() {
                end - (end - anchor) * 0.5f64.powi(k + 1)
            } else {
                let step = 2f64.powi(k);
                if upward {
                    anchor + step
                } else {
                    anchor - step
                }
            };
            if !self.interval.contains(outer) || !outer.is_finite() {
                break;
            }
            let g = self.eval(outer)?;
            if (upward && g >= u) || (!upward && g <= u) {
                return Ok(if upward { (inner, outer) } else { (outer, inner) });
            }
            inner = outer;
        }
        Err(Error::InverseOutOfRange { u })
    }

    /// `γ⁻¹(u)` by safeguarded Newton iteration inside a bisection bracket.
    pub fn inverse(&self, u: f64) -> Result<f64> {
        let (mut lo, mut hi) = self.bracket(u)?;
        if lo == hi {
            return Ok(lo);
        }
        let tol = 1e-14 * u.abs().max(1.0);
        let mut t = 0.5 * (lo + hi);
        for _ in 0..300 {
            let r = self.eval(t)? - u;
            if r.abs() <= tol {
                return Ok(t);
            }
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let d = self.deriv(t)?;
            let newton = t - r / d;
            let next = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let mid = 0.5 * (lo + hi);
            if next == t || mid == lo || mid == hi {
                return Ok(t);
            }
            t = next;
        }
        Ok(t)
    }
}

/// `ψ₁, ψ₂` and their first derivatives at one `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiSample {
    /// `γ(t)`
    pub u: f64,
    pub gamma_deriv: f64,
    pub psi: [f64; 2],
    pub dpsi: [f64; 2],
}

/// The pair `ψⱼ = ψ̂ⱼ ∘ γ` on an interval.
#[derive(Debug, Clone)]
pub struct BlanusaPair {
    gamma: Gamma,
}

impl BlanusaPair {
    pub fn new(gamma: Gamma) -> Self {
        // build the shared tables eagerly so the first evaluation is not slow
        let _ = normalization();
        let _ = node_table();
        BlanusaPair { gamma }
    }

    pub fn gamma(&self) -> &Gamma {
        &self.gamma
    }

    pub fn interval(&self) -> Interval {
        self.gamma.interval
    }

    /// `A`.
    pub fn normalization(&self) -> f64 {
        normalization()
    }

    /// `F` at integer arguments: `0` at even, `A` at odd integers.
    pub fn period_value(&self, k: i64) -> f64 {
        if k.rem_euclid(2) == 0 {
            0.0
        } else {
            normalization()
        }
    }

    pub fn sample(&self, t: f64) -> Result<PsiSample> {
        self.gamma.interval.check(t)?;
        let u = self.gamma.eval(t)?;
        let gd = self.gamma.deriv(t)?;
        let psi = [psi_hat(1, u), psi_hat(2, u)];
        let a = normalization();
        let mut dpsi = [0.0; 2];
        for j in 0..2 {
            if psi[j] > FLAT_THRESHOLD {
                let shift = if j == 0 { 1.0 } else { 0.0 };
                dpsi[j] = xi(u + shift) * gd / (2.0 * a * psi[j]);
            }
        }
        Ok(PsiSample {
            u,
            gamma_deriv: gd,
            psi,
            dpsi,
        })
    }

    pub fn psi(&self, j: usize, t: f64) -> Result<f64> {
        assert!(j == 1 || j == 2, "Blanuša index must be 1 or 2");
        Ok(self.sample(t)?.psi[j - 1])
    }

    pub fn psi_deriv(&self, j: usize, t: f64) -> Result<f64> {
        assert!(j == 1 || j == 2, "Blanuša index must be 1 or 2");
        Ok(self.sample(t)?.dpsi[j - 1])
    }

    /// `t_k = γ⁻¹(k)`.
    pub fn breakpoint(&self, k: i64) -> Result<f64> {
        self.gamma.inverse(k as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_pair() -> BlanusaPair {
        BlanusaPair::new(Gamma::default_for(Interval::real_line()))
    }

    /// Composite Simpson on a uniform grid, independent of the Kronrod path.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn xi_examples() {
        assert!((xi(0.5) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(xi(3.0), 0.0);
        assert!((xi(1.5) + (-1.0f64).exp()).abs() < 1e-15);
        assert!((xi(1.3) + xi(0.3)).abs() < 1e-15);
    }

    #[test]
    fn normalization_matches_simpson_oracle() {
        let a = normalization();
        assert!(a > 0.0);
        let oracle = simpson(xi, 0.0, 1.0, 1_000_000);
        assert!((a - oracle).abs() < 1e-10, "{a} vs {oracle}");
        assert!(xi_integral(2.0).abs() < 1e-15);
        assert!((xi_integral(1.0) - a).abs() < 1e-14);
    }

    #[test]
    fn xi_integral_matches_direct_quadrature() {
        for u in [0.013, 0.2, 0.4999, 0.73, 0.9996, 1.41, -0.37, 7.25] {
            let direct = simpson(xi, 0.0, u, 200_000);
            assert!((xi_integral(u) - direct).abs() < 1e-12, "u={u}");
        }
    }

    #[test]
    fn psi_hat_examples() {
        assert!((psi_hat(1, 0.0) - 1.0).abs() < 1e-14);
        assert_eq!(psi_hat(2, 0.0), 0.0);
        for j in [1, 2] {
            assert!((psi_hat(j, 2.37) - psi_hat(j, 0.37)).abs() < 1e-14);
        }
    }

    #[test]
    fn psi_on_identity_gamma() {
        let pair = identity_pair();
        for u in [-3.3, 0.41, 1.9] {
            assert_eq!(pair.psi(1, u).unwrap(), psi_hat(1, u));
            assert_eq!(pair.psi(2, u).unwrap(), psi_hat(2, u));
        }
        let t0 = pair.breakpoint(0).unwrap();
        assert_eq!(pair.psi(2, t0).unwrap(), 0.0);
        let t = pair.gamma().inverse(0.41).unwrap();
        let s = pair.sample(t).unwrap();
        assert!((s.psi[0].powi(2) + s.psi[1].powi(2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psi_deriv_matches_finite_difference() {
        let pair = identity_pair();
        let t = pair.gamma().inverse(0.3).unwrap();
        let h = 1e-5;
        for j in [1, 2] {
            let fd = (pair.psi(j, t + h).unwrap() - pair.psi(j, t - h).unwrap()) / (2.0 * h);
            assert!((pair.psi_deriv(j, t).unwrap() - fd).abs() < 1e-6, "j={j}");
        }
        // at an even breakpoint ψ₂ and ψ₂′ vanish
        let t2 = pair.breakpoint(2).unwrap();
        assert_eq!(pair.psi_deriv(2, t2).unwrap(), 0.0);
    }

    #[test]
    fn derivative_of_unit_sum_vanishes() {
        let pair = BlanusaPair::new(Gamma::default_for("0,1".parse().unwrap()));
        for t in [0.13, 0.5, 0.61, 0.77, 0.93] {
            let s = pair.sample(t).unwrap();
            let d = 2.0 * (s.psi[0] * s.dpsi[0] + s.psi[1] * s.dpsi[1]);
            assert!(d.abs() < 1e-8, "t={t}: {d}");
        }
    }

    #[test]
    fn breakpoints() {
        assert_eq!(identity_pair().breakpoint(5).unwrap(), 5.0);
        let unit = BlanusaPair::new(Gamma::default_for("0,1".parse().unwrap()));
        assert!((unit.breakpoint(0).unwrap() - 0.5).abs() < 1e-15);
        for shape in ["-inf,inf", "0,1", "0,inf", "-inf,2"] {
            let pair = BlanusaPair::new(Gamma::default_for(shape.parse().unwrap()));
            for k in -10..=10 {
                let t = pair.breakpoint(k).unwrap();
                assert!((pair.gamma().eval(t).unwrap() - k as f64).abs() < 1e-10, "{shape} k={k}");
            }
        }
    }

    #[test]
    fn gamma_inverse_round_trip_wide() {
        for shape in ["0,1", "0,inf", "-inf,2", "-3,5"] {
            let g = Gamma::default_for(shape.parse().unwrap());
            for i in 0..=100 {
                let u = -50.0 + i as f64;
                let t = match g.inverse(u) {
                    Ok(t) => t,
                    Err(Error::InverseOutOfRange { .. }) => {
                        // only acceptable when u lies beyond γ of the last float before `hi`
                        let last = g.interval().hi.next_down();
                        assert!(g.eval(last).unwrap() < u, "{shape} u={u}");
                        continue;
                    }
                    Err(e) => panic!("{e}"),
                };
                // near a finite endpoint the float grid of t limits what is reachable
                let ulp = f64::EPSILON * t.abs().max(f64::MIN_POSITIVE);
                let reach = 1e-10 + 2.0 * g.deriv(t).unwrap() * ulp;
                assert!((g.eval(t).unwrap() - u).abs() < reach, "{shape} u={u}");
            }
        }
    }

    #[test]
    fn non_monotone_gamma_is_rejected() {
        let g = Gamma::new("t^3 - 3*t".parse().unwrap(), Interval::real_line());
        assert!(g.check_monotone(&Interval::real_line().spread_samples(1000)).is_err());
        let ok = Gamma::default_for(Interval::real_line());
        assert!(ok.check_monotone(&Interval::real_line().spread_samples(1000)).is_ok());
    }

    #[test]
    fn outside_interval_is_an_error() {
        let pair = BlanusaPair::new(Gamma::default_for("0,1".parse().unwrap()));
        assert!(matches!(pair.psi(1, 1.5), Err(Error::OutsideInterval { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn partition_of_unity(u in -50.0f64..50.0) {
                let s = psi_hat(1, u).powi(2) + psi_hat(2, u).powi(2);
                prop_assert!((s - 1.0).abs() < 1e-12, "u={} sum={}", u, s);
            }

            #[test]
            fn periodic_and_bounded(u in -50.0f64..50.0) {
                for j in [1, 2] {
                    let v = psi_hat(j, u);
                    prop_assert!((0.0..=1.0).contains(&v));
                    prop_assert!((psi_hat(j, u + 2.0) - v).abs() < 1e-13);
                }
            }

            #[test]
            fn integral_symmetries(u in -20.0f64..20.0) {
                let a = normalization();
                prop_assert!((xi_integral(-u) - xi_integral(u)).abs() < 1e-15);
                prop_assert!((xi_integral(u + 1.0) - (a - xi_integral(u))).abs() < 1e-14);
            }
        }
    }
}
