//! Globally adaptive Gauss–Kronrod (10/21-point) quadrature.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

// Kronrod abscissae on [-1, 1] (non-negative half, the last one is the centre).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ...
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_panels: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Failure of the adaptive scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum QuadError<E> {
    NoConvergence { value: f64, error: f64 },
    Integrand(E),
}

/// One Gauss–Kronrod 21 panel: returns (kronrod estimate, error estimate).
fn gk21<E>(f: &mut impl FnMut(f64) -> Result<f64, E>, a: f64, b: f64) -> Result<(f64, f64), E> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv = [0.0; 21];
    fv[20] = f(centre)?;
    for i in 0..10 {
        let dx = half * XGK[i];
        fv[2 * i] = f(centre - dx)?;
        fv[2 * i + 1] = f(centre + dx)?;
    }
    let mut kronrod = fv[20] * WGK[10];
    let mut gauss = 0.0;
    let mut res_abs = fv[20].abs() * WGK[10];
    for i in 0..10 {
        let pair = fv[2 * i] + fv[2 * i + 1];
        kronrod += WGK[i] * pair;
        res_abs += WGK[i] * (fv[2 * i].abs() + fv[2 * i + 1].abs());
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[10] * (fv[20] - mean).abs();
    for i in 0..10 {
        res_asc += WGK[i] * ((fv[2 * i] - mean).abs() + (fv[2 * i + 1] - mean).abs());
    }
    let h = half.abs();
    let value = kronrod * half;
    res_abs *= h;
    res_asc *= h;
    let mut err = ((kronrod - gauss) * half).abs();
    // QUADPACK rescaling of the Gauss/Kronrod difference
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((value, err))
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrate a fallible integrand over `[a, b]` (either orientation).
///
/// The largest-error panel is bisected until the summed error estimate
/// drops below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult, QuadError<E>> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            panels: 0,
        });
    }
    let (v, e) = gk21(&mut f, a, b).map_err(QuadError::Integrand)?;
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        value: v,
        error: e,
    });
    let mut total = v;
    let mut total_err = e;
    let mut panels = 1;
    loop {
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if panels >= cfg.max_panels {
            return Err(QuadError::NoConvergence {
                value: total,
                error: total_err,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid == worst.a || mid == worst.b {
            // panel cannot be split further at double precision
            return Err(QuadError::NoConvergence {
                value: total,
                error: total_err,
            });
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid).map_err(QuadError::Integrand)?;
        let (v2, e2) = gk21(&mut f, mid, worst.b).map_err(QuadError::Integrand)?;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        panels += 1;
    }
    // re-sum from the panels to shed the running-update rounding
    let mut panels_vec: Vec<Panel> = heap.into_vec();
    panels_vec.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels_vec.iter().map(|p| p.value).sum();
    let error = panels_vec.iter().map(|p| p.error).sum();
    Ok(QuadResult {
        value,
        error,
        panels,
    })
}

/// Infallible convenience wrapper around [`integrate`].
pub fn integrate_smooth(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    cfg: &QuadConfig,
) -> Result<QuadResult, QuadError<std::convert::Infallible>> {
    integrate(|x| Ok(f(x)), a, b, cfg)
}
