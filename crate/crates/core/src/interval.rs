//! Open intervals `I ⊂ ℝ` with possibly infinite endpoints.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::expr::FnExpr;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidSpec(format!("empty or malformed interval ({lo}, {hi})")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn real_line() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo < t && t < self.hi
    }

    pub fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutsideInterval {
                t,
                interval: self.to_string(),
            })
        }
    }

    /// A point well inside the interval, used to seed root brackets.
    pub fn anchor(&self) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => 0.5 * (self.lo + self.hi),
            (true, false) => self.lo + 1.0,
            (false, true) => self.hi - 1.0,
            (false, false) => 0.0,
        }
    }

    /// Default increasing diffeomorphism `γ: I → ℝ` for this interval shape.
    pub fn default_gamma(&self) -> FnExpr {
        let (p, q) = (self.lo, self.hi);
        let src = match (p.is_finite(), q.is_finite()) {
            (false, false) => "t".to_string(),
            (true, true) => format!("tan(pi*((t - {p:?})/{:?} - 0.5))", q - p),
            (true, false) => format!("log(t - {p:?})"),
            (false, true) => format!("-log({q:?} - t)"),
        };
        FnExpr::parse(&src).expect("default gamma source is well formed")
    }

    /// `n` interior points spread over the interval, used for sampled
    /// positivity and monotonicity checks that cannot rely on `γ`.
    pub fn spread_samples(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let s = (i as f64 + 0.5) / n as f64; // in (0, 1)
                match (self.lo.is_finite(), self.hi.is_finite()) {
                    (true, true) => self.lo + s * (self.hi - self.lo),
                    (true, false) => self.lo + (20.0 * (s - 0.5)).exp(),
                    (false, true) => self.hi - (20.0 * (0.5 - s)).exp(),
                    (false, false) => 60.0 * (s - 0.5),
                }
            })
            .filter(|t| self.contains(*t))
            .collect()
    }
}

fn fmt_end(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", fmt_end(self.lo), fmt_end(self.hi))
    }
}

fn parse_end(s: &str) -> Result<f64> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        other => other
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::InvalidSpec(format!("bad interval endpoint `{other}`"))),
    }
}

impl FromStr for Interval {
    type Err = Error;

    /// `lo,hi` with `inf`/`-inf` allowed.
    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once(',')
            .ok_or_else(|| Error::InvalidSpec(format!("interval `{s}` must be `lo,hi`")))?;
        Interval::new(parse_end(lo)?, parse_end(hi)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let i: Interval = "-inf, inf".parse().unwrap();
        assert_eq!(i, Interval::real_line());
        assert_eq!(i.to_string(), "-inf,inf");
        let j: Interval = "0,1".parse().unwrap();
        assert_eq!(j.to_string().parse::<Interval>().unwrap(), j);
        assert!("1,0".parse::<Interval>().is_err());
        assert!("0".parse::<Interval>().is_err());
        assert!("inf,inf".parse::<Interval>().is_err());
    }

    #[test]
    fn default_gamma_shapes() {
        let unit: Interval = "0,1".parse().unwrap();
        let g = unit.default_gamma();
        assert!(g.eval(0.5).unwrap().abs() < 1e-15);
        let half: Interval = "2,inf".parse().unwrap();
        assert!(half.default_gamma().eval(3.0).unwrap().abs() < 1e-15);
        let left: Interval = "-inf,2".parse().unwrap();
        assert!(left.default_gamma().eval(1.0).unwrap().abs() < 1e-15);
        assert_eq!(Interval::real_line().default_gamma().eval(4.25).unwrap(), 4.25);
    }

    #[test]
    fn samples_stay_inside() {
        for s in ["0,1", "0,inf", "-inf,3", "-inf,inf"] {
            let i: Interval = s.parse().unwrap();
            let pts = i.spread_samples(1000);
            assert!(pts.len() >= 990, "{s}");
            assert!(pts.windows(2).all(|w| w[0] < w[1]), "{s}");
        }
    }
}
