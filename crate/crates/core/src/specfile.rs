//! The `key=value` spec file and the built-in presets.
//!
//! ```text
//! # the hyperbolic plane dt² + e^{2t}dx²
//! n=2
//! a=0
//! interval=-inf,inf
//! rho=1
//! eta=exp(t)
//! c=1
//! target=flat
//! variant=immersion
//! ```
//!
//! `eta` lists `n − 1` expressions separated by `;`. `gamma`, `safety` and
//! `grid_density` are optional; `c`, `target` and `variant` default to `1`,
//! `flat` and `immersion`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::expr::FnExpr;
use crate::interval::Interval;
use crate::warped::{MetricSpec, Target, Variant};

const KEYS: [&str; 11] = [
    "n",
    "a",
    "interval",
    "rho",
    "eta",
    "c",
    "target",
    "variant",
    "gamma",
    "safety",
    "grid_density",
];

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidSpec(format!("line {line}: {msg}"))
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| bad(line, format_args!("`{key}` expects a number, got `{v}`")))
}

/// Parse a spec document. Shape checks (`a ≤ n − 1`, `n − 1` warping
/// functions, …) are left to [`MetricSpec::validate`].
pub fn parse(text: &str) -> Result<MetricSpec> {
    let mut seen = [false; KEYS.len()];
    let mut n = None;
    let mut a = None;
    let mut interval = None;
    let mut rho = None;
    let mut eta = None;
    let mut c = 1.0;
    let mut target = Target::Flat;
    let mut variant = Variant::Immersion;
    let mut gamma = None;
    let mut safety = 2.0;
    let mut grid_density = 64;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| bad(line, format_args!("expected key=value, got `{body}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let slot = KEYS
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| bad(line, format_args!("unknown key `{key}`")))?;
        if std::mem::replace(&mut seen[slot], true) {
            return Err(bad(line, format_args!("duplicate key `{key}`")));
        }
        let expr = |v: &str| v.parse::<FnExpr>().map_err(|e| bad(line, format_args!("`{key}`: {e}")));
        match key {
            "n" => n = Some(num::<usize>(line, key, value)?),
            "a" => a = Some(num::<usize>(line, key, value)?),
            "interval" => interval = Some(value.parse::<Interval>().map_err(|e| bad(line, e))?),
            "rho" => rho = Some(expr(value)?),
            "eta" => eta = Some(value.split(';').map(|v| expr(v.trim())).collect::<Result<Vec<_>>>()?),
            "c" => c = num(line, key, value)?,
            "target" => target = value.parse().map_err(|e| bad(line, e))?,
            "variant" => variant = value.parse().map_err(|e| bad(line, e))?,
            "gamma" => gamma = Some(expr(value)?),
            "safety" => safety = num(line, key, value)?,
            "grid_density" => grid_density = num(line, key, value)?,
            _ => unreachable!(),
        }
    }
    let missing = |k: &str| Error::InvalidSpec(format!("missing key `{k}`"));
    Ok(MetricSpec {
        n: n.ok_or_else(|| missing("n"))?,
        a: a.ok_or_else(|| missing("a"))?,
        interval: interval.ok_or_else(|| missing("interval"))?,
        rho: rho.ok_or_else(|| missing("rho"))?,
        eta: eta.ok_or_else(|| missing("eta"))?,
        c,
        target,
        variant,
        gamma,
        safety,
        grid_density,
    })
}

/// Print every key; `parse(&print(s)) == s`.
pub fn print(spec: &MetricSpec) -> String {
    let mut s = String::new();
    let eta: Vec<String> = spec.eta.iter().map(|e| e.to_string()).collect();
    let _ = writeln!(s, "n={}", spec.n);
    let _ = writeln!(s, "a={}", spec.a);
    let _ = writeln!(s, "interval={}", spec.interval);
    let _ = writeln!(s, "rho={}", spec.rho);
    let _ = writeln!(s, "eta={}", eta.join(";"));
    let _ = writeln!(s, "c={}", spec.c);
    let _ = writeln!(s, "target={}", spec.target);
    let _ = writeln!(s, "variant={}", spec.variant);
    if let Some(g) = &spec.gamma {
        let _ = writeln!(s, "gamma={g}");
    }
    let _ = writeln!(s, "safety={}", spec.safety);
    let _ = writeln!(s, "grid_density={}", spec.grid_density);
    s
}

pub const PRESETS: [&str; 6] = [
    "hyperbolic-plane",
    "rozendorn",
    "azov-t",
    "azov-conformal",
    "sol3",
    "product-euclidean",
];

/// Options for [`preset`]; `None` picks the preset's default.
#[derive(Debug, Clone, Default)]
pub struct PresetArgs {
    /// The free function of `rozendorn`, `azov-t` and `azov-conformal`.
    pub function: Option<String>,
    /// Dimension for the presets that allow any `n`.
    pub n: Option<usize>,
    pub a: Option<usize>,
}

/// A named example metric as a flat immersion spec.
///
/// | name                | metric                                 | default |
/// |---------------------|----------------------------------------|---------|
/// | `hyperbolic-plane`  | `dt² + e^{2t}dx²`                      |         |
/// | `rozendorn`         | `dt² + f(t)²dx²`                       | `f = cosh(t)` |
/// | `azov-t`            | `dt² + f(t)²Σdxⱼ²`                     | `f = exp(t)`, `n = 3` |
/// | `azov-conformal`    | `g(t)²(dt² + Σdxⱼ²)`                   | `g = cosh(t)`, `n = 3` |
/// | `sol3`              | `dt² + e^{2t}dx² + e^{−2t}dy²`         |         |
/// | `product-euclidean` | `dt² + Σdxⱼ²`                          | `n = 3` |
pub fn preset(name: &str, args: &PresetArgs) -> Result<MetricSpec> {
    let ex = |s: &str| -> Result<FnExpr> { Ok(s.parse::<FnExpr>()?) };
    let fixed_n = |n: usize| -> Result<usize> {
        match args.n {
            Some(m) if m != n => Err(Error::InvalidSpec(format!("preset `{name}` has n = {n}"))),
            _ => Ok(n),
        }
    };
    let f = |default: &str| ex(args.function.as_deref().unwrap_or(default));
    let (rho, eta) = match name {
        "hyperbolic-plane" => {
            fixed_n(2)?;
            (ex("1")?, vec![ex("exp(t)")?])
        }
        "rozendorn" => {
            fixed_n(2)?;
            (ex("1")?, vec![f("cosh(t)")?])
        }
        "azov-t" => (ex("1")?, vec![f("exp(t)")?; args.n.unwrap_or(3).max(2) - 1]),
        "azov-conformal" => {
            let g = f("cosh(t)")?;
            (g.clone(), vec![g; args.n.unwrap_or(3).max(2) - 1])
        }
        "sol3" => {
            fixed_n(3)?;
            (ex("1")?, vec![ex("exp(t)")?, ex("exp(-t)")?])
        }
        "product-euclidean" => (ex("1")?, vec![ex("1")?; args.n.unwrap_or(3).max(2) - 1]),
        other => {
            return Err(Error::InvalidSpec(format!(
                "unknown preset `{other}` (known: {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(MetricSpec::new(args.a.unwrap_or(0), Interval::real_line(), rho, eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_minimal() {
        let s = parse("n=2\na=0\ninterval=-inf,inf\nrho=1\neta=exp(t)\n").unwrap();
        assert_eq!(s.n, 2);
        assert_eq!(s.c, 1.0);
        assert_eq!(s.target, Target::Flat);
        assert_eq!(s.variant, Variant::Immersion);
        assert!(s.gamma.is_none());
        assert!(s.validate().is_ok());
    }

    #[test]
    fn comments_and_spacing() {
        let text = "# comment\n n = 3 # trailing\na=1\ninterval = 0, inf\nrho=1\neta = t ; t^2\n\ntarget=sphere\nvariant=embedding\nc=0.5\n";
        let s = parse(text).unwrap();
        assert_eq!(s.eta.len(), 2);
        assert_eq!(s.target, Target::Sphere);
        assert_eq!(s.c, 0.5);
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse("n=2\nfoo=1\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("foo"), "{e}");
        assert!(parse("n=2\nn=3\n").unwrap_err().to_string().contains("duplicate"));
        assert!(parse("n=two\n").is_err());
        assert!(parse("n=2\na=0\ninterval=-inf,inf\nrho=1\n").unwrap_err().to_string().contains("eta"));
        assert!(parse("n=2\na=0\ninterval=-inf,inf\nrho=1+\neta=1\n").is_err());
        assert!(parse("n=2\na=0\ninterval=-inf,inf\nrho=1\neta=1\ntarget=torus\n").is_err());
    }

    #[test]
    fn a_at_least_n_is_a_validation_error() {
        let s = parse("n=2\na=2\ninterval=-inf,inf\nrho=1\neta=exp(t)\n").unwrap();
        assert!(s.validate().is_err());
    }

    #[test]
    fn presets() {
        let d = PresetArgs::default();
        let h = preset("hyperbolic-plane", &d).unwrap();
        assert_eq!((h.n, h.a), (2, 0));
        assert_eq!(h.eta[0].to_string().parse::<FnExpr>().unwrap(), "exp(t)".parse().unwrap());
        let sol = preset("sol3", &d).unwrap();
        assert_eq!(sol.n, 3);
        assert_eq!(sol.eta[1], "exp(-t)".parse().unwrap());
        let az = preset(
            "azov-conformal",
            &PresetArgs {
                function: Some("cosh(t)".into()),
                n: Some(4),
                a: None,
            },
        )
        .unwrap();
        assert_eq!(az.n, 4);
        assert!(az.eta.iter().all(|e| *e == az.rho));
        assert!(preset("torus", &d).is_err());
        assert!(preset("sol3", &PresetArgs { n: Some(4), ..d.clone() }).is_err());
        for name in PRESETS {
            let s = preset(name, &d).unwrap();
            assert_eq!(parse(&print(&s)).unwrap(), s);
            assert!(s.validate().is_ok(), "{name}");
        }
    }

    fn arb_spec() -> impl Strategy<Value = MetricSpec> {
        let fns = prop::sample::select(vec!["1", "exp(t)", "exp(-t)", "cosh(t)", "2+sin(t)", "t^2+1", "-(-3)"]);
        (
            1usize..5,
            prop::collection::vec(fns.clone(), 4),
            fns,
            0.1f64..10.0,
            prop::sample::select(vec![Target::Flat, Target::Sphere, Target::Hyperbolic]),
            prop::sample::select(vec![Variant::Immersion, Variant::Embedding]),
            prop::option::of(Just("t")),
            1.0f64..8.0,
            2usize..200,
        )
            .prop_map(|(m, etas, rho, c, target, variant, gamma, safety, gd)| {
                let eta: Vec<FnExpr> = etas[..m].iter().map(|e| e.parse().unwrap()).collect();
                let mut s = MetricSpec::new(m / 2, Interval::real_line(), rho.parse().unwrap(), eta)
                    .with_target(target, variant);
                s.c = c;
                s.gamma = gamma.map(|g| g.parse().unwrap());
                s.safety = safety;
                s.grid_density = gd;
                s
            })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(spec in arb_spec()) {
            let text = print(&spec);
            let back = parse(&text).unwrap();
            prop_assert_eq!(&back, &spec);
            prop_assert_eq!(print(&back), text);
        }
    }
}
