//! The input metric `dσ² = ρ(t)²dt² + Σ ηⱼ(t)²dxⱼ²` on `I × ℝ^{n−1}`.
//!
//! The warping vector is split at `a`: the first `a` factors (`η̃`) are paired
//! with Lorentzian planes, the remaining `b = n − 1 − a` (`η̄`) are handled
//! with the Blanuša construction.

use std::fmt;
use std::str::FromStr;

use crate::blanusa::{BlanusaPair, Gamma};
use crate::error::{Error, Result};
use crate::expr::FnExpr;
use crate::interval::Interval;

/// Number of breakpoint gaps sampled on each side of `t₀` by the default grids.
pub const HALF_GAPS: i64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Flat,
    Sphere,
    Hyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Immersion,
    Embedding,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Target::Flat => "flat",
            Target::Sphere => "sphere",
            Target::Hyperbolic => "hyperbolic",
        })
    }
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "flat" => Ok(Target::Flat),
            "sphere" => Ok(Target::Sphere),
            "hyperbolic" => Ok(Target::Hyperbolic),
            other => Err(Error::InvalidSpec(format!("unknown target `{other}`"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Immersion => "immersion",
            Variant::Embedding => "embedding",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "immersion" => Ok(Variant::Immersion),
            "embedding" => Ok(Variant::Embedding),
            other => Err(Error::InvalidSpec(format!("unknown variant `{other}`"))),
        }
    }
}

/// Raw, unchecked metric data.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub n: usize,
    pub a: usize,
    pub interval: Interval,
    pub rho: FnExpr,
    pub eta: Vec<FnExpr>,
    pub c: f64,
    pub target: Target,
    pub variant: Variant,
    /// `None` selects the default map for the interval shape.
    pub gamma: Option<FnExpr>,
    pub safety: f64,
    pub grid_density: usize,
}

impl MetricSpec {
    /// A flat immersion spec with `c = 1`, safety 2 and grid density 64.
    pub fn new(a: usize, interval: Interval, rho: FnExpr, eta: Vec<FnExpr>) -> Self {
        MetricSpec {
            n: eta.len() + 1,
            a,
            interval,
            rho,
            eta,
            c: 1.0,
            target: Target::Flat,
            variant: Variant::Immersion,
            gamma: None,
            safety: 2.0,
            grid_density: 64,
        }
    }

    pub fn with_target(mut self, target: Target, variant: Variant) -> Self {
        self.target = target;
        self.variant = variant;
        self
    }

    /// `b = n − 1 − a` (saturating, the checked value lives on [`Metric`]).
    pub fn b(&self) -> usize {
        (self.n - 1).saturating_sub(self.a)
    }

    pub fn validate(&self) -> Result<Metric> {
        Metric::new(self.clone())
    }
}

/// Sampled extremes of the coefficients over one breakpoint gap `[t_k, t_{k+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapStats {
    pub k: i64,
    pub rho: (f64, f64),
    pub eta: Vec<(f64, f64)>,
}

/// `η̃` and `η̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpSplit {
    pub eta_tilde: Vec<FnExpr>,
    pub eta_bar: Vec<FnExpr>,
}

/// Coefficients and their first derivatives at one `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub rho: f64,
    pub eta: Vec<f64>,
    pub eta_deriv: Vec<f64>,
}

/// A validated spec with its `γ`, Blanuša pair and derivative expressions.
#[derive(Debug, Clone)]
pub struct Metric {
    spec: MetricSpec,
    pair: BlanusaPair,
    t0: f64,
    eta_deriv: Vec<FnExpr>,
    gap_stats: Vec<GapStats>,
}

impl Metric {
    fn new(spec: MetricSpec) -> Result<Metric> {
        if spec.n < 2 {
            return Err(Error::InvalidSpec(format!("n must be at least 2, got {}", spec.n)));
        }
        if spec.eta.len() != spec.n - 1 {
            return Err(Error::DimensionMismatch {
                expected: spec.n - 1,
                found: spec.eta.len(),
            });
        }
        if spec.a > spec.n - 1 {
            return Err(Error::InvalidSpec(format!(
                "a must lie in [0, {}], got {}",
                spec.n - 1,
                spec.a
            )));
        }
        if !(spec.c > 0.0 && spec.c.is_finite()) {
            return Err(Error::InvalidSpec(format!("c must be positive, got {}", spec.c)));
        }
        if !(spec.safety >= 1.0 && spec.safety.is_finite()) {
            return Err(Error::InvalidSpec(format!("safety must be at least 1, got {}", spec.safety)));
        }
        if spec.grid_density < 2 {
            return Err(Error::InvalidSpec(format!(
                "grid_density must be at least 2, got {}",
                spec.grid_density
            )));
        }
        let gamma = match &spec.gamma {
            Some(g) => Gamma::new(g.clone(), spec.interval),
            None => Gamma::default_for(spec.interval),
        };
        let spread = spec.interval.spread_samples(1000);
        gamma.check_monotone(&spread)?;
        let t0 = gamma.inverse(0.0)?;

        // gap samples at uniform γ-spacing, plus the shape-aware spread
        let d = spec.grid_density;
        let mut gaps = Vec::with_capacity(2 * HALF_GAPS as usize);
        let mut samples = spread;
        for k in -HALF_GAPS..HALF_GAPS {
            let mut ts = Vec::with_capacity(d + 1);
            for i in 0..=d {
                ts.push(gamma.inverse(k as f64 + i as f64 / d as f64)?);
            }
            gamma.check_monotone(&ts)?;
            samples.extend_from_slice(&ts);
            gaps.push((k, ts));
        }
        samples.sort_by(f64::total_cmp);
        for &t in &samples {
            check_positive("rho", &spec.rho, t)?;
            for (j, e) in spec.eta.iter().enumerate() {
                check_positive(&format!("eta{}", j + 1), e, t)?;
            }
        }

        let mut gap_stats = Vec::with_capacity(gaps.len());
        for (k, ts) in &gaps {
            let mut rho = (f64::INFINITY, f64::NEG_INFINITY);
            let mut eta = vec![(f64::INFINITY, f64::NEG_INFINITY); spec.eta.len()];
            for &t in ts {
                let r = spec.rho.eval(t)?;
                rho = (rho.0.min(r), rho.1.max(r));
                for (slot, e) in eta.iter_mut().zip(&spec.eta) {
                    let v = e.eval(t)?;
                    *slot = (slot.0.min(v), slot.1.max(v));
                }
            }
            gap_stats.push(GapStats { k: *k, rho, eta });
        }

        let eta_deriv = spec.eta.iter().map(FnExpr::deriv).collect();
        Ok(Metric {
            pair: BlanusaPair::new(gamma),
            t0,
            eta_deriv,
            gap_stats,
            spec,
        })
    }

    pub fn spec(&self) -> &MetricSpec {
        &self.spec
    }

    pub fn pair(&self) -> &BlanusaPair {
        &self.pair
    }

    pub fn gamma(&self) -> &Gamma {
        self.pair.gamma()
    }

    /// `t₀ = γ⁻¹(0)`, the base point of every `θ` integral.
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn a(&self) -> usize {
        self.spec.a
    }

    pub fn b(&self) -> usize {
        self.spec.n - 1 - self.spec.a
    }

    pub fn c(&self) -> f64 {
        self.spec.c
    }

    pub fn gap_stats(&self) -> &[GapStats] {
        &self.gap_stats
    }

    pub fn split(&self) -> WarpSplit {
        split(&self.spec)
    }

    pub fn coefficients(&self, t: f64) -> Result<Coefficients> {
        let rho = self.spec.rho.eval(t)?;
        let mut eta = Vec::with_capacity(self.spec.eta.len());
        let mut eta_deriv = Vec::with_capacity(self.spec.eta.len());
        for (e, d) in self.spec.eta.iter().zip(&self.eta_deriv) {
            eta.push(e.eval(t)?);
            eta_deriv.push(d.eval(t)?);
        }
        Ok(Coefficients { rho, eta, eta_deriv })
    }
}

fn check_positive(name: &str, f: &FnExpr, t: f64) -> Result<()> {
    let v = f.eval(t)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositive {
            name: name.to_string(),
            t,
            value: v,
        })
    }
}

/// First `a` warping functions to `η̃`, the rest to `η̄`.
pub fn split(spec: &MetricSpec) -> WarpSplit {
    let a = spec.a.min(spec.eta.len());
    WarpSplit {
        eta_tilde: spec.eta[..a].to_vec(),
        eta_bar: spec.eta[a..].to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(s: &str) -> FnExpr {
        s.parse().unwrap()
    }

    fn sol3(a: usize) -> MetricSpec {
        MetricSpec::new(a, Interval::real_line(), ex("1"), vec![ex("exp(t)"), ex("exp(-t)")])
    }

    #[test]
    fn hyperbolic_plane_is_valid() {
        let spec = MetricSpec::new(0, Interval::real_line(), ex("1"), vec![ex("exp(t)")]);
        let m = spec.validate().unwrap();
        assert_eq!((m.n(), m.a(), m.b()), (2, 0, 1));
        assert_eq!(m.t0(), 0.0);
        assert_eq!(m.gap_stats().len(), 20);
        let g = &m.gap_stats()[10];
        assert_eq!(g.k, 0);
        assert!((g.eta[0].0 - 1.0).abs() < 1e-12 && (g.eta[0].1 - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_eta_is_reported() {
        let spec = MetricSpec::new(0, Interval::real_line(), ex("1"), vec![ex("t")]);
        match spec.validate() {
            Err(Error::NonPositive { name, t, value }) => {
                assert_eq!(name, "eta1");
                assert!(t <= 0.0 && value <= 0.0);
            }
            other => panic!("expected positivity error, got {other:?}"),
        }
    }

    #[test]
    fn sol3_is_valid_for_every_a() {
        for a in 0..=2 {
            assert!(sol3(a).validate().is_ok());
        }
        assert!(sol3(3).validate().is_err());
    }

    #[test]
    fn bad_shapes_are_rejected() {
        let mut s = sol3(0);
        s.eta.pop();
        assert!(matches!(s.validate(), Err(Error::DimensionMismatch { .. })));
        let mut s = sol3(0);
        s.c = 0.0;
        assert!(s.validate().is_err());
        let mut s = sol3(0);
        s.gamma = Some(ex("-t"));
        assert!(matches!(s.validate(), Err(Error::NonMonotoneGamma { .. })));
    }

    #[test]
    fn split_examples() {
        let s = split(&sol3(0));
        assert!(s.eta_tilde.is_empty());
        assert_eq!(s.eta_bar.len(), 2);
        let s = split(&sol3(2));
        assert!(s.eta_bar.is_empty());
        let s = split(&sol3(1));
        assert_eq!(s.eta_tilde, vec![ex("exp(t)")]);
        assert_eq!(s.eta_bar, vec![ex("exp(-t)")]);
    }

    #[test]
    fn split_preserves_squared_norm() {
        let m = sol3(1).validate().unwrap();
        let sp = m.split();
        for t in [-3.0, -0.2, 0.0, 1.7, 4.0] {
            let whole: f64 = m.coefficients(t).unwrap().eta.iter().map(|e| e * e).sum();
            let parts: f64 = sp
                .eta_tilde
                .iter()
                .chain(&sp.eta_bar)
                .map(|e| e.eval(t).unwrap().powi(2))
                .sum();
            assert!((whole - parts).abs() <= 1e-12 * whole);
        }
    }
}
