//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use warpembed::blanusa::{BlanusaPair, Gamma};
use warpembed::embed::{EmbedKind, EmbeddingModel};
use warpembed::interval::Interval;
use warpembed::semispace::QuadricKind;
use warpembed::specfile::{self, preset, PresetArgs};
use warpembed::verify::{
    check_isometry, check_quadric, check_smoothness, jacobian_agreement, relative_distance, witness_set,
    JacobianSource, VerifyConfig,
};
use warpembed::warped::{MetricSpec, Target, Variant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn spec_for(name: &str, a: usize, kind: EmbedKind) -> MetricSpec {
    let args = PresetArgs {
        a: Some(a),
        ..PresetArgs::default()
    };
    preset(name, &args).unwrap().with_target(kind.target(), kind.variant())
}

fn build(spec: &MetricSpec) -> EmbeddingModel {
    EmbeddingModel::build(Arc::new(spec.validate().unwrap())).unwrap()
}

/// All six kinds on the plane and all kinds for every `a` on Sol₃.
struct Models {
    h2: Vec<EmbeddingModel>,
    sol3: Vec<(usize, EmbeddingModel)>,
}

impl Models {
    fn all(&self) -> impl Iterator<Item = (String, &EmbeddingModel)> {
        self.h2
            .iter()
            .map(|m| (format!("H2 {}", m.kind()), m))
            .chain(self.sol3.iter().map(|(a, m)| (format!("Sol3 a={a} {}", m.kind()), m)))
    }
}

fn failing(bad: &[String]) -> String {
    match bad.len() {
        0 => String::new(),
        n if n <= 3 => format!("; failing {}", bad.join(", ")),
        n => format!("; failing {} (+{} more)", bad[..3].join(", "), n - 3),
    }
}

fn golden(i: usize) -> f64 {
    (i as f64 * 0.618_033_988_749_894_9).fract()
}

fn c1_partition_of_unity() -> Outcome {
    let mut worst: f64 = 0.0;
    for iv in [
        Interval::real_line(),
        Interval::new(0.0, 1.0).unwrap(),
        Interval::new(0.0, f64::INFINITY).unwrap(),
    ] {
        let pair = BlanusaPair::new(Gamma::default_for(iv));
        for i in 0..10_000 {
            let u = -25.0 + 50.0 * golden(i + 1);
            let t = pair.gamma().inverse(u).unwrap();
            let s = pair.sample(t).unwrap();
            worst = worst.max((s.psi[0].powi(2) + s.psi[1].powi(2) - 1.0).abs());
        }
    }
    Outcome {
        pass: worst < 1e-10,
        detail: format!("max |psi1^2+psi2^2-1| = {worst:.3e} (< 1e-10)"),
    }
}

fn isometry(models: &[(String, &EmbeddingModel)]) -> Outcome {
    let cfg = VerifyConfig::default();
    let mut worst = (0.0f64, 0.0f64);
    let mut bad = Vec::new();
    for (name, m) in models {
        let an = check_isometry(m, &cfg, JacobianSource::Analytic).unwrap();
        let fd = check_isometry(m, &cfg, JacobianSource::FiniteDifference).unwrap();
        if !(an < 1e-6 && fd < 1e-4) {
            bad.push(format!("{name}: {an:.2e}/{fd:.2e}"));
        }
        worst = (worst.0.max(an), worst.1.max(fd));
    }
    Outcome {
        pass: bad.is_empty(),
        detail: format!(
            "{} models, analytic {:.3e} (< 1e-6), fd {:.3e} (< 1e-4){}",
            models.len(),
            worst.0,
            worst.1,
            failing(&bad)
        ),
    }
}

fn c4_quadric(models: &Models) -> Outcome {
    let cfg = VerifyConfig::default();
    let (mut rel, mut abs, mut count) = (0.0f64, 0.0f64, 0);
    for (_, m) in models.all() {
        if let Some(q) = check_quadric(m, &cfg).unwrap() {
            rel = rel.max(q.relative);
            abs = abs.max(q.absolute);
            count += 1;
        }
    }
    Outcome {
        pass: rel < 1e-8 && count == 16,
        detail: format!(
            "{count} quadric models x 1000 points, relative {rel:.3e} (< 1e-8), absolute {abs:.3e}"
        ),
    }
}

fn expected_signature(kind: EmbedKind, n: usize, a: usize) -> ((usize, usize), Option<(QuadricKind, usize, usize)>) {
    let (n, a) = (n as i64, a as i64);
    let u = |v: i64| v as usize;
    match kind {
        EmbedKind::F => ((u(4 * n - 3 - 2 * a), u(a)), None),
        EmbedKind::Fh => ((u(4 * n - 2 - a), u(a + 1)), Some((QuadricKind::Hyperbolic, u(4 * n - 3 - a), u(a)))),
        EmbedKind::Fs => ((u(4 * n - 2 - 2 * a), u(a)), Some((QuadricKind::Sphere, u(4 * n - 3 - 2 * a), u(a)))),
        EmbedKind::FHat => ((u(8 * n - 7 - 6 * a), u(a)), None),
        EmbedKind::FHatH => (
            (u(8 * n - 6 - 5 * a), u(a + 1)),
            Some((QuadricKind::Hyperbolic, u(8 * n - 7 - 5 * a), u(a))),
        ),
        EmbedKind::FHatS => ((u(8 * n - 4 - 6 * a), u(a)), Some((QuadricKind::Sphere, u(8 * n - 5 - 6 * a), u(a)))),
    }
}

fn c5_dimension_table() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for n in 2..=6 {
        for a in 0..n {
            let base = preset(
                "product-euclidean",
                &PresetArgs {
                    n: Some(n),
                    a: Some(a),
                    function: None,
                },
            )
            .unwrap();
            for kind in EmbedKind::ALL {
                let m = build(&base.clone().with_target(kind.target(), kind.variant()));
                let (amb, quad) = expected_signature(kind, n, a);
                let got_q = m.quadric().map(|q| (q.kind, q.dim(), q.index()));
                if (m.ambient().dim(), m.ambient().index()) != amb || got_q != quad {
                    bad.push(format!("n={n} a={a} {kind}"));
                }
                checked += 1;
            }
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: format!("{checked} (n, a, kind) cases{}", failing(&bad)),
    }
}

fn c6_witnesses() -> Outcome {
    let mut cases: Vec<(&str, usize)> = specfile::PRESETS.iter().map(|p| (*p, 0)).collect();
    cases.push(("sol3", 1));
    let (mut worst_collide, mut worst_separate, mut pairs) = (0.0f64, f64::INFINITY, 0);
    let mut bad = Vec::new();
    for (name, a) in cases {
        for target in [Target::Flat, Target::Hyperbolic, Target::Sphere] {
            let imm = build(&spec_for(name, a, EmbedKind::from_target(target, Variant::Immersion)));
            let emb = build(&spec_for(name, a, EmbedKind::from_target(target, Variant::Embedding)));
            for (k, l) in witness_set(imm.metric().b()) {
                let ((t1, x1), (t2, x2)) = imm.collision_witness(k, &l).unwrap();
                let d_imm = relative_distance(&imm.eval(t1, &x1).unwrap(), &imm.eval(t2, &x2).unwrap());
                let d_emb = relative_distance(&emb.eval(t1, &x1).unwrap(), &emb.eval(t2, &x2).unwrap());
                if !(d_imm < 1e-10 && d_emb > 1e-3) {
                    bad.push(format!("{name} a={a} {target} k={k} l={l:?}: {d_imm:.2e}/{d_emb:.2e}"));
                }
                worst_collide = worst_collide.max(d_imm);
                worst_separate = worst_separate.min(d_emb);
                pairs += 1;
            }
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: format!(
            "{pairs} witness pairs, immersions collide to {worst_collide:.3e} (< 1e-10), embeddings separate by {worst_separate:.3e} (> 1e-3){}",
            failing(&bad)
        ),
    }
}

fn c7_smoothness(models: &Models) -> Outcome {
    let mut worst: f64 = 0.0;
    for (_, m) in models.all() {
        worst = worst.max(check_smoothness(m.metric(), m.steps(), (-5, 4)).unwrap());
    }
    Outcome {
        pass: worst < 1e-6,
        detail: format!("10 breakpoints per model, max jump {worst:.3e} (< 1e-6)"),
    }
}

fn c8_certificate(models: &Models) -> Outcome {
    let mut worst = f64::INFINITY;
    let mut bad = Vec::new();
    for (name, m) in models.all() {
        let density = 4 * m.metric().spec().grid_density;
        let cert = m.steps().certificate(-10, 10, density).unwrap();
        if !cert.passes() {
            bad.push(name.clone());
        }
        worst = worst.min(cert.min_margin() / (cert.safety / 2.0));
    }
    Outcome {
        pass: bad.is_empty(),
        detail: format!(
            "min margin / (safety/2) = {worst:.3} (>= 1) on a 4x denser grid{}",
            failing(&bad)
        ),
    }
}

fn c9_jacobian(models: &Models) -> Outcome {
    let cfg = VerifyConfig::default();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (_, m) in models.all() {
        worst = worst.max(jacobian_agreement(m, &cfg).unwrap());
        count += 1;
    }
    Outcome {
        pass: worst < 1e-5,
        detail: format!("{count} models x 50 points, max column error {worst:.3e} (< 1e-5)"),
    }
}

fn c10_determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("warpembed-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("sol3.spec");
    let spec = spec_for("sol3", 1, EmbedKind::FHatS);
    std::fs::write(&path, specfile::print(&spec)).unwrap();
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_warpembed"))
            .args(["verify", path.to_str().unwrap(), "--seed", "7"])
            .output()
            .unwrap()
    };
    let (a, b) = (run(), run());
    let _ = std::fs::remove_dir_all(&dir);
    let same = a.stdout == b.stdout && !a.stdout.is_empty();
    Outcome {
        pass: same && a.status.success(),
        detail: format!(
            "two verify runs, {} bytes, identical: {same}, exit {:?}",
            a.stdout.len(),
            a.status.code()
        ),
    }
}

fn report(id: u32, name: &str, started: Instant, out: Outcome, limit: Option<Duration>, failed: &mut u32) {
    let took = started.elapsed();
    let in_time = limit.map_or(true, |l| took <= l);
    let pass = out.pass && in_time;
    if !pass {
        *failed += 1;
    }
    let budget = limit.map_or(String::new(), |l| format!(", budget {:.0} s", l.as_secs_f64()));
    println!(
        "{} criterion {id:>2} {name}: {} [{:.2} s{budget}]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64()
    );
}

fn main() {
    let mut failed = 0;

    let t = Instant::now();
    report(1, "partition of unity", t, c1_partition_of_unity(), Some(Duration::from_secs(5)), &mut failed);

    let t = Instant::now();
    let h2: Vec<EmbeddingModel> = EmbedKind::ALL.iter().map(|&k| build(&spec_for("hyperbolic-plane", 0, k))).collect();
    let named: Vec<(String, &EmbeddingModel)> = h2.iter().map(|m| (format!("H2 {}", m.kind()), m)).collect();
    report(2, "isometry, hyperbolic plane", t, isometry(&named), Some(Duration::from_secs(120)), &mut failed);

    let t = Instant::now();
    let sol3: Vec<(usize, EmbeddingModel)> = (0..=2)
        .flat_map(|a| EmbedKind::ALL.iter().map(move |&k| (a, build(&spec_for("sol3", a, k)))))
        .collect();
    let named: Vec<(String, &EmbeddingModel)> =
        sol3.iter().map(|(a, m)| (format!("Sol3 a={a} {}", m.kind()), m)).collect();
    report(3, "isometry, Sol3", t, isometry(&named), Some(Duration::from_secs(300)), &mut failed);

    let models = Models { h2, sol3 };
    let t = Instant::now();
    report(4, "quadric membership", t, c4_quadric(&models), None, &mut failed);
    let t = Instant::now();
    report(5, "dimension table", t, c5_dimension_table(), None, &mut failed);
    let t = Instant::now();
    report(6, "collision witnesses", t, c6_witnesses(), None, &mut failed);
    let t = Instant::now();
    report(7, "smoothness at breakpoints", t, c7_smoothness(&models), None, &mut failed);
    let t = Instant::now();
    report(8, "step certificate", t, c8_certificate(&models), None, &mut failed);
    let t = Instant::now();
    report(9, "jacobian agreement", t, c9_jacobian(&models), None, &mut failed);
    let t = Instant::now();
    report(10, "determinism", t, c10_determinism(), None, &mut failed);

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
