mod common;

use std::sync::Arc;

use common::*;
use l2v_core::latrep::{mean_pattern, DirectionSet};
use l2v_core::scalar::cosine;
use l2v_core::steering::{
    extract_pattern, inject, inject_values, make_hook, run_pipeline, FilterMode,
    InjectionPositions, LayerHook, SteeringConfig, SteeringVector,
};
use l2v_core::tensor_store::{write_tensor, ActivationMatrix, Precision, Role};
use l2v_core::Error;
use proptest::prelude::*;

fn cfg(k: usize, ds: usize, dt: usize) -> SteeringConfig {
    SteeringConfig {
        k,
        d_source: ds,
        d_target: dt,
        layer_source: 2,
        layer_target: 2,
        alpha: 0.5,
        bypass_filter: false,
        positions: InjectionPositions::Last,
        filter_mode: FilterMode::Aggregate,
    }
}

#[test]
fn dc_plus_high_frequency_collapses_to_constant() {
    // DFT oracle: w = 2 + 0.5 cos(2 pi 5 t / 16) has energy at bins 0, 5, 11.
    // k = 2 keeps only bin 0, so the filtered vector is the constant 2,
    // rescaled to ||w||.
    let w = tones(16, &[(0, 2.0, 0.0), (5, 0.5, 0.0)]);
    let spec = naive_dft(&w);
    assert!((spec[0].re - 32.0).abs() < 1e-12);
    assert!((spec[5].re - 4.0).abs() < 1e-12);
    let dirs = DirectionSet::from_rows(&[w.clone(), w.clone()]).unwrap();
    let sv = extract_pattern(&dirs, &cfg(2, 16, 16)).unwrap();
    let level = norm(&w) / 4.0;
    assert!(sv.values.iter().all(|x| (x - level).abs() < 1e-12));
}

#[test]
fn restoration_holds_across_widths() {
    let mut r = rng(20);
    for (ds, dt, k) in [(64, 48, 12), (48, 64, 9), (64, 64, 64), (17, 40, 17)] {
        let rows: Vec<Vec<f64>> = (0..10).map(|_| random_vec(&mut r, ds)).collect();
        let dirs = DirectionSet::from_rows(&rows).unwrap();
        let sv = extract_pattern(&dirs, &cfg(k, ds, dt)).unwrap();
        let ratio = norm(&sv.values) / norm(&mean_pattern(&dirs).values);
        assert!((ratio - 1.0).abs() <= 1e-9, "{ds}->{dt}: {ratio}");
        assert_eq!(sv.len(), dt);
    }
}

#[test]
fn scaling_directions_scales_vector() {
    let mut r = rng(21);
    let rows: Vec<Vec<f64>> = (0..6).map(|_| random_vec(&mut r, 64)).collect();
    let c = 3.5;
    let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| c * x).collect()).collect();
    let a = extract_pattern(&DirectionSet::from_rows(&rows).unwrap(), &cfg(10, 64, 48)).unwrap();
    let b = extract_pattern(&DirectionSet::from_rows(&scaled).unwrap(), &cfg(10, 64, 48)).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((c * x - y).abs() < 1e-12);
    }
    let h = random_vec(&mut r, 48);
    let alpha = 0.7;
    let out_a = inject(&h, &a, alpha).unwrap();
    let out_b = inject(&h, &b, alpha / c).unwrap();
    assert!(max_abs_diff(&out_a, &out_b) < 1e-12);
}

#[test]
fn extraction_is_bit_deterministic() {
    let mut r = rng(22);
    let rows: Vec<Vec<f64>> = (0..6).map(|_| random_vec(&mut r, 64)).collect();
    let dirs = DirectionSet::from_rows(&rows).unwrap();
    let a = extract_pattern(&dirs, &cfg(10, 64, 48)).unwrap();
    let b = extract_pattern(&dirs, &cfg(10, 64, 48)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn hook_is_shareable_across_threads() {
    let c = cfg(4, 8, 8);
    let sv = Arc::new(SteeringVector {
        values: vec![1.0, 0.5, 0.0, -0.5, -1.0, -0.5, 0.0, 0.5],
        original_norm: 2.0,
        config: c.clone(),
        provenance: Default::default(),
    });
    let hook = Arc::new(make_hook(sv, &c).unwrap());
    let h: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
    let want = hook.apply(2, &h).unwrap();
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let hook = Arc::clone(&hook);
            let h = h.clone();
            std::thread::spawn(move || hook.apply(2, &h).unwrap())
        })
        .collect();
    for t in handles {
        assert_eq!(t.join().unwrap(), want);
    }
}

fn write_pair(dir: &std::path::Path, w: &[f64], n: usize) -> (std::path::PathBuf, std::path::PathBuf) {
    let d = w.len();
    let mut r = rng(23);
    let neg_rows: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut r, d)).collect();
    let pos_rows: Vec<Vec<f64>> = neg_rows
        .iter()
        .map(|row| row.iter().zip(w).map(|(a, b)| a + b).collect())
        .collect();
    let pos = ActivationMatrix::from_rows(&pos_rows).unwrap().with_role(Role::Positive).with_layer(2);
    let neg = ActivationMatrix::from_rows(&neg_rows).unwrap().with_role(Role::Negative).with_layer(2);
    let pp = dir.join("pos.lvt");
    let np = dir.join("neg.lvt");
    write_tensor(&pp, &pos, Precision::F64).unwrap();
    write_tensor(&np, &neg, Precision::F64).unwrap();
    (pp, np)
}

#[test]
fn pipeline_identity_shift() {
    let dir = tempfile::tempdir().unwrap();
    let w = tones(16, &[(0, 0.3, 0.0), (1, 1.0, 0.2), (3, 0.4, 1.0)]);
    let (pp, np) = write_pair(dir.path(), &w, 5);
    let out = dir.path().join("sv.lvt");
    let sv = run_pipeline(&pp, &np, &cfg(16, 16, 16), &out).unwrap();
    assert!(max_abs_diff(&sv.values, &w) < 1e-12);
    let back = SteeringVector::<f64>::read(&out).unwrap();
    assert_eq!(back, sv);

    let out2 = dir.path().join("sv2.lvt");
    run_pipeline(&pp, &np, &cfg(16, 16, 16), &out2).unwrap();
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&out2).unwrap());
}

#[test]
fn pipeline_errors_carry_stage() {
    let dir = tempfile::tempdir().unwrap();
    let (pp, _) = write_pair(dir.path(), &[0.0; 8], 3);
    // pos paired with itself (relabelled) gives a zero mean
    let pos: ActivationMatrix<f64> = l2v_core::tensor_store::read_tensor(&pp).unwrap();
    let neg_path = dir.path().join("same.lvt");
    write_tensor(&neg_path, &pos.clone().with_role(Role::Negative), Precision::F64).unwrap();
    let out = dir.path().join("never.lvt");
    let err = run_pipeline(&pp, &neg_path, &cfg(4, 8, 8), &out).unwrap_err();
    assert_eq!(err.stage(), Some("extract_pattern"));
    assert!(matches!(err.root(), Error::DegeneratePattern));
    assert!(err.to_string().contains("extract_pattern"));
    assert!(!out.exists());

    let err = run_pipeline(dir.path().join("missing.lvt"), &neg_path, &cfg(4, 8, 8), &out).unwrap_err();
    assert_eq!(err.stage(), Some("read_positive"));
}

fn triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    prop_oneof![Just(48usize), Just(64usize)].prop_flat_map(|d| {
        (
            prop::collection::vec(-1.0f64..1.0, d),
            prop::collection::vec(-1.0f64..1.0, d),
            (0.0f64..2.0).prop_map(|a| 2.0 - a),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn injection_preserves_norm_and_turns_toward(input in triple()) {
        let (h, v, alpha) = input;
        prop_assume!(norm(&h) > 1e-6 && norm(&v) > 1e-6);
        let out = inject_values(&h, &v, alpha).unwrap();
        let nh = norm(&h);
        prop_assert!((norm(&out) - nh).abs() <= 1e-12 * nh);
        let before = cosine(&h, &v).unwrap();
        let after = cosine(&out, &v).unwrap();
        if before.abs() < 1.0 - 1e-9 {
            prop_assert!(after > before);
        } else {
            prop_assert!(after >= before - 1e-12);
        }
        prop_assert_eq!(inject_values(&h, &v, 0.0).unwrap(), h);
    }

    #[test]
    fn per_sample_mode_agrees(seed in 0u64..1000, k in 1usize..=48) {
        let mut r = rng(seed);
        let rows: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut r, 64)).collect();
        let dirs = DirectionSet::from_rows(&rows).unwrap();
        let agg = extract_pattern(&dirs, &cfg(k, 64, 48));
        let mut c = cfg(k, 64, 48);
        c.filter_mode = FilterMode::PerSample;
        let per = extract_pattern(&dirs, &c);
        match (agg, per) {
            (Ok(a), Ok(p)) => prop_assert!(max_abs_diff(&a.values, &p.values) <= 1e-9),
            (Err(_), Err(_)) => {}
            (a, p) => prop_assert!(false, "modes disagree: {:?} vs {:?}", a.is_ok(), p.is_ok()),
        }
    }
}
