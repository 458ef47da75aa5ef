//! Positive step functions `S₁, S₂` with the smallness conditions the
//! constructions need.
//!
//! `S₂` is constant on `[t_{2l}, t_{2l+2})` and `S₁` on `[t_{2l+1}, t_{2l+3})`,
//! so each breakpoint gap `[t_k, t_{k+1}]` sees exactly one value of each.
//! Values are synthesized lazily per interval and depend only on samples in
//! nearby gaps, so extending the covered range never changes earlier values.
//!
//! Synthesis per interval:
//! 1. `Sⱼ² = safety · sup(4b((η_rψⱼ)′)²/ρ², 8bc·η_r²ψⱼ²)` over the samples of
//!    its two gaps (the second term only for sphere targets);
//! 2. for sphere targets each gap `k` gets the least `d_k` such that scaling
//!    both of its steps by `2^{d_k}` satisfies `safety·δ⁺ < Γ` (immersion) or
//!    `safety·Δ⁺ < ρ²` (embedding), where `δ⁺, Δ⁺` replace `α′` by
//!    `Σⱼ|Σ_r(η_r²ψⱼ²)′|/Sⱼ²` and so decrease in each `Sⱼ` separately;
//! 3. an interval is scaled by `2^max(d_k)` over its two gaps.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;

use crate::atlas::{PointBase, Scalars};
use crate::error::{Error, Result};
use crate::warped::{Metric, Target, Variant, HALF_GAPS};

pub const MAX_DOUBLINGS: u32 = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Synthesized,
    Constant([f64; 2]),
}

#[derive(Debug, Default)]
struct Cache {
    gaps: BTreeMap<i64, Arc<Vec<PointBase>>>,
    init: [BTreeMap<i64, f64>; 2],
    doublings: BTreeMap<i64, u32>,
    values: [BTreeMap<i64, f64>; 2],
}

/// `S₁, S₂` over the breakpoint lattice of a validated metric.
#[derive(Debug)]
pub struct StepPair {
    metric: Arc<Metric>,
    mode: Mode,
    cache: RwLock<Cache>,
}

/// Attained margins on one gap; each is `required / actual` style so that
/// a value `≥ 1` means the strict inequality holds.
#[derive(Debug, Clone, PartialEq)]
pub struct GapMargin {
    pub k: i64,
    pub s: [f64; 2],
    /// `min Sⱼ²ρ² / (4b((η_rψⱼ)′)²)`
    pub cond_ep: f64,
    /// `min Sⱼ² / (8bc·η_r²ψⱼ²)`, sphere targets only.
    pub gransphere: Option<f64>,
    /// `min Γ/δ`, sphere immersions only.
    pub delta_gamma: Option<f64>,
    /// `min ρ²/Δ`, sphere embeddings only.
    pub delta_rho: Option<f64>,
}

impl GapMargin {
    pub fn min(&self) -> f64 {
        [Some(self.cond_ep), self.gransphere, self.delta_gamma, self.delta_rho]
            .into_iter()
            .flatten()
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub safety: f64,
    /// Samples per gap used for the check.
    pub density: usize,
    pub gaps: Vec<GapMargin>,
}

impl Certificate {
    pub fn min_margin(&self) -> f64 {
        self.gaps.iter().map(GapMargin::min).fold(f64::INFINITY, f64::min)
    }

    /// Every margin at least `safety / 2`.
    pub fn passes(&self) -> bool {
        self.min_margin() >= self.safety / 2.0
    }
}

/// Interval index of `Sⱼ` (`j ∈ {1, 2}`) containing gap `k`.
pub fn interval_of_gap(j: usize, k: i64) -> i64 {
    match j {
        1 => (k - 1).div_euclid(2),
        2 => k.div_euclid(2),
        _ => panic!("step index must be 1 or 2, got {j}"),
    }
}

/// The two gaps covered by interval `l` of `Sⱼ`.
pub fn gaps_of_interval(j: usize, l: i64) -> [i64; 2] {
    match j {
        1 => [2 * l + 1, 2 * l + 2],
        2 => [2 * l, 2 * l + 1],
        _ => panic!("step index must be 1 or 2, got {j}"),
    }
}

impl StepPair {
    /// Synthesize and materialize the default window of `2·HALF_GAPS` gaps
    /// around `t₀`, so that failures surface here rather than mid-evaluation.
    pub fn synthesize(metric: Arc<Metric>) -> Result<StepPair> {
        if metric.b() == 0 {
            return Ok(StepPair::constant(metric, [1.0, 1.0]));
        }
        let sp = StepPair {
            metric,
            mode: Mode::Synthesized,
            cache: RwLock::new(Cache::default()),
        };
        for k in -HALF_GAPS..HALF_GAPS {
            sp.value(1, interval_of_gap(1, k))?;
            sp.value(2, interval_of_gap(2, k))?;
        }
        Ok(sp)
    }

    /// Globally constant steps; meets no condition by itself.
    pub fn constant(metric: Arc<Metric>, s: [f64; 2]) -> StepPair {
        StepPair {
            metric,
            mode: Mode::Constant(s),
            cache: RwLock::new(Cache::default()),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.mode, Mode::Constant(_))
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    /// Range of materialized `S₂` interval indices.
    pub fn covered_range(&self) -> Option<(i64, i64)> {
        let c = self.cache.read().expect("step cache poisoned");
        let m = &c.values[1];
        Some((*m.keys().next()?, *m.keys().next_back()?))
    }

    /// `Sⱼ` on its interval `l`.
    pub fn value(&self, j: usize, l: i64) -> Result<f64> {
        if let Mode::Constant(s) = self.mode {
            return Ok(s[j - 1]);
        }
        if let Some(v) = self.cache.read().expect("step cache poisoned").values[j - 1].get(&l) {
            return Ok(*v);
        }
        let mut cache = self.cache.write().expect("step cache poisoned");
        self.value_locked(&mut cache, j, l)
    }

    /// `(S₁(t), S₂(t))`.
    pub fn at(&self, t: f64) -> Result<[f64; 2]> {
        if let Mode::Constant(s) = self.mode {
            return Ok(s);
        }
        let u = self.metric.gamma().eval(t)?;
        let k = u.floor().clamp(-1e9, 1e9) as i64;
        Ok([
            self.value(1, interval_of_gap(1, k))?,
            self.value(2, interval_of_gap(2, k))?,
        ])
    }

    /// `(S₁, S₂)` on gap `k`.
    pub fn on_gap(&self, k: i64) -> Result<[f64; 2]> {
        Ok([
            self.value(1, interval_of_gap(1, k))?,
            self.value(2, interval_of_gap(2, k))?,
        ])
    }

    fn sphere(&self) -> bool {
        self.metric.spec().target == Target::Sphere
    }

    fn samples_locked(&self, cache: &mut Cache, k: i64) -> Result<Arc<Vec<PointBase>>> {
        if let Some(s) = cache.gaps.get(&k) {
            return Ok(s.clone());
        }
        let d = self.metric.spec().grid_density;
        let gamma = self.metric.gamma();
        // serial on purpose: a rayon job here could be stolen by a thread
        // that then blocks on this same lock
        let pts = (0..=d)
            .map(|i| {
                let t = gamma.inverse(k as f64 + i as f64 / d as f64)?;
                PointBase::at(&self.metric, t)
            })
            .collect::<Result<Vec<_>>>()?;
        let pts = Arc::new(pts);
        cache.gaps.insert(k, pts.clone());
        Ok(pts)
    }

    /// `sup` of the per-point requirement on `Sⱼ²` from the closed-form conditions.
    fn need(&self, base: &PointBase, j0: usize) -> f64 {
        let b = self.metric.b() as f64;
        let mut need = 4.0 * b * base.max_prod_deriv2(j0) / base.rho2();
        if self.sphere() {
            need = need.max(8.0 * b * self.metric.c() * base.max_prod2(j0));
        }
        need
    }

    fn init_locked(&self, cache: &mut Cache, j: usize, l: i64) -> Result<f64> {
        if let Some(v) = cache.init[j - 1].get(&l) {
            return Ok(*v);
        }
        let mut sup: f64 = 0.0;
        for k in gaps_of_interval(j, l) {
            for base in self.samples_locked(cache, k)?.iter() {
                sup = sup.max(self.need(base, j - 1));
            }
        }
        let v = if sup > 0.0 {
            (self.metric.spec().safety * sup).sqrt()
        } else {
            1.0
        };
        cache.init[j - 1].insert(l, v);
        Ok(v)
    }

    /// Monotone upper-bound test of the coupled sphere condition on one sample.
    fn coupled_ok(&self, base: &PointBase, s: [f64; 2]) -> bool {
        let safety = self.metric.spec().safety;
        let c = self.metric.c();
        let inv = [1.0 / (s[0] * s[0]), 1.0 / (s[1] * s[1])];
        let eps2 = base.eps_sum(0) * inv[0] + base.eps_sum(1) * inv[1];
        let alpha = base.alpha_sum(0) * inv[0] + base.alpha_sum(1) * inv[1];
        let aabs = base.alpha_deriv_sum(0).abs() * inv[0] + base.alpha_deriv_sum(1).abs() * inv[1];
        let (nt2, ntp2, ntd) = (base.nt2, base.ntp2, base.ntd.abs());
        let rho2 = base.rho2();
        match self.metric.spec().variant {
            Variant::Immersion => {
                let half = 1.0 / (2.0 * c) + nt2;
                let gamma = half * (rho2 - eps2 + ntp2 * (1.0 - nt2 / half));
                let delta = aabs * aabs / 4.0 + aabs * ntd;
                gamma > 0.0 && safety * delta < gamma
            }
            Variant::Embedding => {
                let den = 1.0 / c + nt2 - 2.0 * alpha;
                if den <= 0.0 {
                    return false;
                }
                let big = 2.0 * eps2 + (aabs * aabs + 2.0 * aabs * ntd) / den;
                safety * big < rho2
            }
        }
    }

    fn doublings_locked(&self, cache: &mut Cache, k: i64) -> Result<u32> {
        if !self.sphere() {
            return Ok(0);
        }
        if let Some(d) = cache.doublings.get(&k) {
            return Ok(*d);
        }
        let s1 = self.init_locked(cache, 1, interval_of_gap(1, k))?;
        let s2 = self.init_locked(cache, 2, interval_of_gap(2, k))?;
        let samples = self.samples_locked(cache, k)?;
        let mut d = 0;
        loop {
            let f = 2f64.powi(d as i32);
            if samples.iter().all(|b| self.coupled_ok(b, [s1 * f, s2 * f])) {
                break;
            }
            if d == MAX_DOUBLINGS {
                return Err(Error::StepSynthesis {
                    gap: k,
                    doublings: MAX_DOUBLINGS,
                });
            }
            d += 1;
        }
        cache.doublings.insert(k, d);
        Ok(d)
    }

    fn value_locked(&self, cache: &mut Cache, j: usize, l: i64) -> Result<f64> {
        if let Some(v) = cache.values[j - 1].get(&l) {
            return Ok(*v);
        }
        let init = self.init_locked(cache, j, l)?;
        let mut d = 0;
        for k in gaps_of_interval(j, l) {
            d = d.max(self.doublings_locked(cache, k)?);
        }
        let v = init * 2f64.powi(d as i32);
        cache.values[j - 1].insert(l, v);
        Ok(v)
    }

    /// Margins of every applicable condition on gaps `k_lo..k_hi`, sampled at
    /// `density` cell midpoints per gap (disjoint from the synthesis grid).
    pub fn certificate(&self, k_lo: i64, k_hi: i64, density: usize) -> Result<Certificate> {
        let safety = self.metric.spec().safety;
        if self.metric.b() == 0 {
            return Ok(Certificate {
                safety,
                density,
                gaps: Vec::new(),
            });
        }
        // materialize serially so the lock is not contended below
        let mut steps = Vec::new();
        for k in k_lo..k_hi {
            steps.push((k, self.on_gap(k)?));
        }
        let gaps = steps
            .into_par_iter()
            .map(|(k, s)| self.gap_margin(k, s, density))
            .collect::<Result<Vec<_>>>()?;
        Ok(Certificate {
            safety,
            density,
            gaps,
        })
    }

    fn gap_margin(&self, k: i64, s: [f64; 2], density: usize) -> Result<GapMargin> {
        let spec = self.metric.spec();
        let sphere = self.sphere();
        let b = self.metric.b() as f64;
        let c = self.metric.c();
        let mut m = GapMargin {
            k,
            s,
            cond_ep: f64::INFINITY,
            gransphere: sphere.then_some(f64::INFINITY),
            delta_gamma: (sphere && spec.variant == Variant::Immersion).then_some(f64::INFINITY),
            delta_rho: (sphere && spec.variant == Variant::Embedding).then_some(f64::INFINITY),
        };
        for i in 0..density {
            let u = k as f64 + (i as f64 + 0.5) / density as f64;
            let t = self.metric.gamma().inverse(u)?;
            let base = PointBase::at(&self.metric, t)?;
            for j in 0..2 {
                let s2 = s[j] * s[j];
                let d2 = base.max_prod_deriv2(j);
                m.cond_ep = m.cond_ep.min(ratio(s2 * base.rho2(), 4.0 * b * d2));
                if let Some(g) = m.gransphere.as_mut() {
                    *g = g.min(ratio(s2, 8.0 * b * c * base.max_prod2(j)));
                }
            }
            let sc = Scalars::new(&base, s, c);
            if let Some(g) = m.delta_gamma.as_mut() {
                *g = g.min(if sc.gamma_big <= 0.0 {
                    0.0
                } else {
                    ratio(sc.gamma_big, sc.delta_small)
                });
            }
            if let Some(g) = m.delta_rho.as_mut() {
                *g = g.min(ratio(sc.rho2, sc.delta_big.max(0.0)));
            }
        }
        Ok(m)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::FnExpr;
    use crate::interval::Interval;
    use crate::warped::MetricSpec;

    fn ex(s: &str) -> FnExpr {
        s.parse().unwrap()
    }

    fn hyperbolic_plane(target: Target, variant: Variant) -> Arc<Metric> {
        Arc::new(
            MetricSpec::new(0, Interval::real_line(), ex("1"), vec![ex("exp(t)")])
                .with_target(target, variant)
                .validate()
                .unwrap(),
        )
    }

    #[test]
    fn interval_bookkeeping() {
        for k in -7..7 {
            assert!(gaps_of_interval(1, interval_of_gap(1, k)).contains(&k));
            assert!(gaps_of_interval(2, interval_of_gap(2, k)).contains(&k));
        }
        assert_eq!(gaps_of_interval(2, 0), [0, 1]);
        assert_eq!(gaps_of_interval(1, -1), [-1, 0]);
    }

    #[test]
    fn empty_bar_part_gives_unit_steps() {
        let m = Arc::new(
            MetricSpec::new(1, Interval::real_line(), ex("1"), vec![ex("exp(t)")])
                .validate()
                .unwrap(),
        );
        let sp = StepPair::synthesize(m).unwrap();
        assert_eq!(sp.at(3.3).unwrap(), [1.0, 1.0]);
        let cert = sp.certificate(-10, 10, 256).unwrap();
        assert!(cert.gaps.is_empty() && cert.passes());
    }

    #[test]
    fn steps_are_positive_and_piecewise_constant() {
        let sp = StepPair::synthesize(hyperbolic_plane(Target::Flat, Variant::Immersion)).unwrap();
        assert_eq!(sp.covered_range(), Some((-5, 4)));
        // S₂ constant on [t₀, t₂), S₁ constant on [t₁, t₃)
        let a = sp.at(0.0).unwrap();
        let b = sp.at(1.999).unwrap();
        assert_eq!(a[1], b[1]);
        let c = sp.at(1.0).unwrap();
        let d = sp.at(2.999).unwrap();
        assert_eq!(c[0], d[0]);
        for k in -10..10 {
            let s = sp.on_gap(k).unwrap();
            assert!(s[0] > 0.0 && s[1] > 0.0);
        }
    }

    #[test]
    fn flat_certificate_on_denser_grid() {
        let sp = StepPair::synthesize(hyperbolic_plane(Target::Flat, Variant::Immersion)).unwrap();
        let cert = sp.certificate(-10, 10, 256).unwrap();
        assert_eq!(cert.gaps.len(), 20);
        assert!(cert.passes(), "min margin {}", cert.min_margin());
        assert!(cert.gaps.iter().all(|g| g.gransphere.is_none()));
    }

    #[test]
    fn sphere_certificates() {
        for variant in [Variant::Immersion, Variant::Embedding] {
            let sp = StepPair::synthesize(hyperbolic_plane(Target::Sphere, variant)).unwrap();
            let cert = sp.certificate(-10, 10, 256).unwrap();
            assert!(cert.passes(), "{variant}: {}", cert.min_margin());
            let g = &cert.gaps[0];
            assert!(g.gransphere.is_some());
            assert_eq!(g.delta_gamma.is_some(), variant == Variant::Immersion);
            assert_eq!(g.delta_rho.is_some(), variant == Variant::Embedding);
        }
    }

    #[test]
    fn lazy_extension_is_deterministic() {
        let m = hyperbolic_plane(Target::Sphere, Variant::Embedding);
        let a = StepPair::synthesize(m.clone()).unwrap();
        let b = StepPair::synthesize(m).unwrap();
        // reach far gaps in opposite orders
        let fa: Vec<f64> = (12..16).map(|l| a.value(2, l).unwrap()).collect();
        let mut fb: Vec<f64> = (12..16).rev().map(|l| b.value(2, l).unwrap()).collect();
        fb.reverse();
        assert_eq!(fa, fb);
        assert_eq!(a.covered_range(), Some((-5, 15)));
    }

    #[test]
    fn doubling_steps_shrinks_error_terms() {
        let m = hyperbolic_plane(Target::Sphere, Variant::Embedding);
        let sp = StepPair::synthesize(m.clone()).unwrap();
        let mut seen = 0;
        for i in 0..100 {
            let t = -9.5 + 0.19 * i as f64;
            let base = PointBase::at(&m, t).unwrap();
            let s = sp.at(t).unwrap();
            let one = Scalars::new(&base, s, 1.0);
            let two = Scalars::new(&base, [2.0 * s[0], 2.0 * s[1]], 1.0);
            if one.eps2 > 0.0 {
                seen += 1;
                assert!(two.eps2 < one.eps2 && two.alpha < one.alpha && two.delta_big < one.delta_big);
            }
        }
        assert!(seen > 90);
    }
}
