use std::sync::{Arc, OnceLock};

use approx::assert_relative_eq;
use proptest::prelude::*;
use warpembed::embed::{EmbedKind, EmbeddingModel};
use warpembed::specfile::{self, preset, PresetArgs};
use warpembed::verify::{metric_error, relative_distance};

fn sol3_models() -> &'static Vec<EmbeddingModel> {
    static MODELS: OnceLock<Vec<EmbeddingModel>> = OnceLock::new();
    MODELS.get_or_init(|| {
        (0..=2)
            .flat_map(|a| {
                EmbedKind::ALL.iter().map(move |k| {
                    let spec = preset(
                        "sol3",
                        &PresetArgs {
                            a: Some(a),
                            ..Default::default()
                        },
                    )
                    .unwrap()
                    .with_target(k.target(), k.variant());
                    EmbeddingModel::from_spec(&spec).unwrap()
                })
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pullback_equals_metric(idx in 0usize..18, t in -6.0f64..6.0, x in prop::array::uniform2(-3.0f64..3.0)) {
        let m = &sol3_models()[idx];
        let fr = m.frame(t).unwrap();
        let jac = m.jacobian_frame(&fr, &x);
        let err = metric_error(&jac, m.ambient().signs(), &m.target_metric(&fr));
        prop_assert!(err < 1e-6, "{} t={} err={}", m.kind(), t, err);
    }

    #[test]
    fn quadric_kinds_stay_on_their_quadric(idx in 0usize..18, t in -6.0f64..6.0, x in prop::array::uniform2(-3.0f64..3.0)) {
        let m = &sol3_models()[idx];
        if let Some(q) = m.quadric() {
            let p = m.eval(t, &x).unwrap();
            let norm2: f64 = p.iter().map(|v| v * v).sum();
            prop_assert!(q.residual(&p).unwrap().abs() < 1e-9 * norm2.max(1.0));
        }
    }

    #[test]
    fn witnesses_collide_for_immersions(idx in 0usize..18, k in -3i64..=3, l1 in -2i64..=2, l2 in -2i64..=2) {
        let m = &sol3_models()[idx];
        let b = m.metric().b();
        let l: Vec<i64> = [l1, l2][..b].to_vec();
        prop_assume!(b > 0 && l.iter().any(|&v| v != 0));
        let ((t1, x1), (t2, x2)) = m.witness_points(k, &l).unwrap();
        prop_assert_eq!(t1, t2);
        prop_assert_eq!(&x1[..m.metric().a()], &x2[..m.metric().a()]);
        let d = relative_distance(&m.eval(t1, &x1).unwrap(), &m.eval(t2, &x2).unwrap());
        if m.kind().is_embedding() {
            prop_assert!(m.collision_witness(k, &l).is_err());
            prop_assert!(d > 1e-12, "{} {}", m.kind(), d);
        } else {
            prop_assert!(d < 1e-10, "{} {}", m.kind(), d);
        }
    }

    #[test]
    fn signature_formula(n in 2usize..=6, a_frac in 0.0f64..1.0) {
        let a = ((n as f64) * a_frac).floor() as usize;
        let a = a.min(n - 1);
        let (ni, ai) = (n as i64, a as i64);
        let want = [
            (4 * ni - 3 - 2 * ai, ai),
            (4 * ni - 2 - ai, ai + 1),
            (4 * ni - 2 - 2 * ai, ai),
            (8 * ni - 7 - 6 * ai, ai),
            (8 * ni - 6 - 5 * ai, ai + 1),
            (8 * ni - 4 - 6 * ai, ai),
        ];
        for (kind, (d, i)) in EmbedKind::ALL.iter().zip(want) {
            prop_assert_eq!(kind.ambient_signature(n, a), (d as usize, i as usize));
        }
    }
}

#[test]
fn distinct_x_columns_have_disjoint_support() {
    for m in sol3_models() {
        let jac = m.jacobian(0.7, &[0.4, -1.3]).unwrap();
        let lead = m.layout()[0].width();
        for r in lead..jac.nrows() {
            assert!(jac[(r, 1)] == 0.0 || jac[(r, 2)] == 0.0, "{} row {r}", m.kind());
        }
    }
}

#[test]
fn evaluation_extends_the_step_range() {
    let spec = preset("hyperbolic-plane", &PresetArgs::default()).unwrap();
    let m = EmbeddingModel::from_spec(&spec).unwrap();
    let before = m.steps().covered_range().unwrap();
    let fr = m.frame(14.5).unwrap();
    let err = metric_error(&m.jacobian_frame(&fr, &[0.3]), m.ambient().signs(), &m.target_metric(&fr));
    assert!(err < 1e-6);
    let after = m.steps().covered_range().unwrap();
    assert!(after.1 > before.1, "{before:?} -> {after:?}");
}

#[test]
fn spec_text_round_trip_rebuilds_the_same_map() {
    let spec = preset("sol3", &PresetArgs { a: Some(1), ..Default::default() }).unwrap();
    let again = specfile::parse(&specfile::print(&spec)).unwrap();
    let (m1, m2) = (
        EmbeddingModel::build(Arc::new(spec.validate().unwrap())).unwrap(),
        EmbeddingModel::build(Arc::new(again.validate().unwrap())).unwrap(),
    );
    let (p, q) = (m1.eval(-1.2, &[0.5, 2.0]).unwrap(), m2.eval(-1.2, &[0.5, 2.0]).unwrap());
    assert_eq!(p, q);
}

#[test]
fn plane_isometry_has_the_expected_diagonal() {
    // at t₀ = 0 the plane's metric is dt² + dx²
    let spec = preset("hyperbolic-plane", &PresetArgs::default()).unwrap();
    let m = EmbeddingModel::from_spec(&spec).unwrap();
    let jac = m.jacobian(0.0, &[1.0]).unwrap();
    let g = jac.transpose() * &jac;
    assert_relative_eq!(g[(0, 0)], 1.0, epsilon = 1e-12);
    assert_relative_eq!(g[(1, 1)], 1.0, epsilon = 1e-12);
    assert_relative_eq!(g[(0, 1)], 0.0, epsilon = 1e-12);
}
