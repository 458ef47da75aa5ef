//! Signed ambient spaces `ℝ^N_a` and the quadrics `𝕊^N_a(c)`, `ℍ^N_a(−c)`.
//!
//! Signs are kept in the order in which the construction lays out its
//! coordinate blocks, e.g. `ℝ × (ℝ²₁)^a × ℝ^{4b}` is stored as `+`, then `a`
//! copies of `(−, +)`, then `4b` pluses. [`AmbientSpace::canonical_order`]
//! gives the permutation to the "negatives first" layout.

use std::fmt;

use crate::error::{Error, Result};

/// Diagonal entry of the ambient metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `ℝ^N` with a diagonal `±1` metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmbientSpace {
    signs: Vec<Sign>,
}

impl AmbientSpace {
    pub fn new(signs: Vec<Sign>) -> Self {
        AmbientSpace { signs }
    }

    pub fn euclidean(dim: usize) -> Self {
        AmbientSpace {
            signs: vec![Sign::Plus; dim],
        }
    }

    /// The Lorentzian plane `ℝ²₁` with signs `(−, +)`.
    pub fn lorentz_plane() -> Self {
        AmbientSpace {
            signs: vec![Sign::Minus, Sign::Plus],
        }
    }

    /// Orthogonal product: the signs of `other` are appended.
    pub fn product(mut self, other: &AmbientSpace) -> Self {
        self.signs.extend_from_slice(&other.signs);
        self
    }

    pub fn dim(&self) -> usize {
        self.signs.len()
    }

    /// Number of negative entries.
    pub fn index(&self) -> usize {
        self.signs.iter().filter(|s| **s == Sign::Minus).count()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: len,
            });
        }
        Ok(())
    }

    /// `Σ sᵢ xᵢ yᵢ`.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(x.len())?;
        self.check(y.len())?;
        Ok(self
            .signs
            .iter()
            .zip(x.iter().zip(y))
            .map(|(s, (a, b))| s.value() * a * b)
            .sum())
    }

    /// Permutation taking construction order to the layout with every
    /// negative coordinate first (stable within each sign class).
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.dim())
            .filter(|&i| self.signs[i] == Sign::Minus)
            .collect();
        order.extend((0..self.dim()).filter(|&i| self.signs[i] == Sign::Plus));
        order
    }
}

impl fmt::Display for AmbientSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R^{} (index {})", self.dim(), self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadricKind {
    Sphere,
    Hyperbolic,
}

/// The level set `⟨x,x⟩ = ±1/c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadric {
    pub kind: QuadricKind,
    pub c: f64,
    pub ambient: AmbientSpace,
}

impl Quadric {
    pub fn new(kind: QuadricKind, c: f64, ambient: AmbientSpace) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidSpec(format!("curvature c must be positive, got {c}")));
        }
        Ok(Quadric { kind, c, ambient })
    }

    /// `+1/c` for spheres, `−1/c` for hyperbolic quadrics.
    pub fn level(&self) -> f64 {
        match self.kind {
            QuadricKind::Sphere => 1.0 / self.c,
            QuadricKind::Hyperbolic => -1.0 / self.c,
        }
    }

    /// Dimension of the hypersurface itself.
    pub fn dim(&self) -> usize {
        self.ambient.dim() - 1
    }

    /// Index of the induced metric on the hypersurface.
    pub fn index(&self) -> usize {
        match self.kind {
            QuadricKind::Sphere => self.ambient.index(),
            QuadricKind::Hyperbolic => self.ambient.index() - 1,
        }
    }

    /// `⟨x,x⟩ − level`; zero exactly on the quadric.
    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        Ok(self.ambient.inner(x, x)? - self.level())
    }
}

impl fmt::Display for Quadric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            QuadricKind::Sphere => "S",
            QuadricKind::Hyperbolic => "H",
        };
        let sign = match self.kind {
            QuadricKind::Sphere => "",
            QuadricKind::Hyperbolic => "-",
        };
        write!(
            f,
            "{}^{}_{}({}{})",
            name,
            self.dim(),
            self.index(),
            sign,
            self.c
        )
    }
}

/// Free-function form of [`AmbientSpace::inner`].
pub fn inner(x: &[f64], y: &[f64], space: &AmbientSpace) -> Result<f64> {
    space.inner(x, y)
}

/// Free-function form of [`Quadric::residual`].
pub fn quadric_residual(x: &[f64], q: &Quadric) -> Result<f64> {
    q.residual(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inner_examples() {
        let lp = AmbientSpace::lorentz_plane();
        assert_eq!(lp.inner(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), -1.0);
        let e3 = AmbientSpace::euclidean(3);
        assert_eq!(e3.inner(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap(), 6.0);
        let u: f64 = 0.7;
        let h = [u.cosh(), u.sinh()];
        assert!((lp.inner(&h, &h).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let e3 = AmbientSpace::euclidean(3);
        assert_eq!(
            e3.inner(&[1.0], &[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 1
            })
        );
    }

    #[test]
    fn quadric_examples() {
        let s = Quadric::new(QuadricKind::Sphere, 1.0, AmbientSpace::euclidean(4)).unwrap();
        assert_eq!(s.residual(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        let h = Quadric::new(
            QuadricKind::Hyperbolic,
            1.0,
            AmbientSpace::lorentz_plane().product(&AmbientSpace::euclidean(2)),
        )
        .unwrap();
        assert_eq!(h.residual(&[1.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(h.level(), -1.0);
        assert_eq!(h.to_string(), "H^3_0(-1)");
        assert!(Quadric::new(QuadricKind::Sphere, 0.0, AmbientSpace::euclidean(2)).is_err());
    }

    #[test]
    fn canonical_order_puts_negatives_first() {
        let sp = AmbientSpace::euclidean(1)
            .product(&AmbientSpace::lorentz_plane())
            .product(&AmbientSpace::lorentz_plane());
        assert_eq!(sp.index(), 2);
        assert_eq!(sp.canonical_order(), vec![1, 3, 0, 2, 4]);
    }

    fn space_and_vectors() -> impl Strategy<Value = (Vec<bool>, Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
        (1usize..12).prop_flat_map(|n| {
            (
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(-10.0f64..10.0, n),
                proptest::collection::vec(-10.0f64..10.0, n),
                proptest::collection::vec(-10.0f64..10.0, n),
                -5.0f64..5.0,
            )
        })
    }

    proptest! {
        #[test]
        fn inner_is_symmetric_and_bilinear((neg, x, y, z, k) in space_and_vectors()) {
            let sp = AmbientSpace::new(neg.iter().map(|&m| if m { Sign::Minus } else { Sign::Plus }).collect());
            let xy = sp.inner(&x, &y).unwrap();
            prop_assert!((xy - sp.inner(&y, &x).unwrap()).abs() <= 1e-12);
            let comb: Vec<f64> = x.iter().zip(&z).map(|(a, b)| k * a + b).collect();
            let lhs = sp.inner(&comb, &y).unwrap();
            let rhs = k * xy + sp.inner(&z, &y).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }
}
