use eegseg::classify::{
    auc, grid_search_cv, train_svm, ClassifyError, SvmModel, SvmParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

use common::{blobs, qp_oracle};

#[test]
fn xor_is_solved_and_matches_oracle() {
    let x = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]];
    let y = vec![true, true, false, false];
    let model = train_svm(&x, &y, &SvmParams::new(10.0, 1.0)).unwrap();
    for (xi, &yi) in x.iter().zip(&y) {
        assert_eq!(model.predict(xi).unwrap(), yi);
    }
    assert!((model.dual_objective - qp_oracle(&x, &y, 10.0, 1.0)).abs() < 1e-4);
}

#[test]
fn dual_objective_matches_qp_oracle() {
    for seed in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = rng.gen_range(6..=20);
        let (x, mut y) = blobs(n / 2, 3, 1.0, seed);
        y[0] = true;
        y[1] = false;
        let c = [0.5, 5.0][seed as usize % 2];
        let gamma = [0.3, 1.0][(seed as usize / 2) % 2];
        let model = train_svm(&x, &y, &SvmParams::new(c, gamma)).unwrap();
        let oracle = qp_oracle(&x, &y, c, gamma);
        assert!(
            (model.dual_objective - oracle).abs() < 1e-4,
            "seed {seed}: {} vs {oracle}",
            model.dual_objective
        );
    }
}

#[test]
fn separable_blobs() {
    let (x, y) = blobs(25, 2, 12.0, 1);
    let model = train_svm(&x, &y, &SvmParams::new(10.0, 0.5)).unwrap();
    for (xi, &yi) in x.iter().zip(&y) {
        assert_eq!(model.predict(xi).unwrap(), yi);
    }
    let s_t = model.decision_score(&[6.0, 0.0]).unwrap();
    let s_d = model.decision_score(&[-6.0, 0.0]).unwrap();
    assert!(s_t > 0.0 && s_d < 0.0);
    assert!(model.dual_coefficients.iter().all(|a| a.abs() <= 10.0 + 1e-12));
    assert_eq!(model.dual_coefficients.len(), model.support_vectors.len());
    assert!(model.normalization.std.iter().all(|&s| s > 0.0));
}

#[test]
fn hard_margin_support_vectors_sit_on_the_margin() {
    let (x, y) = blobs(20, 2, 10.0, 2);
    let model = train_svm(&x, &y, &SvmParams::new(1e6, 0.5)).unwrap();
    let norm = &model.normalization;
    for sv in &model.support_vectors {
        let raw: Vec<f64> = sv.iter().enumerate().map(|(j, v)| v * norm.std[j] + norm.mean[j]).collect();
        let s = model.decision_score(&raw).unwrap();
        assert!(s.abs() >= 1.0 - 1e-3, "{s}");
    }
}

#[test]
fn scores_are_continuous() {
    let (x, y) = blobs(30, 4, 2.0, 3);
    let model = train_svm(&x, &y, &SvmParams::new(1.0, 0.25)).unwrap();
    for xi in &x {
        let moved: Vec<f64> = xi.iter().map(|v| v + 1e-6).collect();
        let diff = model.decision_score(xi).unwrap() - model.decision_score(&moved).unwrap();
        assert!(diff.abs() < 1e-4);
    }
}

#[test]
fn flipping_labels_flips_scores() {
    let (x, y) = blobs(30, 3, 2.0, 4);
    let flipped: Vec<bool> = y.iter().map(|l| !l).collect();
    let params = SvmParams::new(1.0, 0.3);
    let a = train_svm(&x, &y, &params).unwrap();
    let b = train_svm(&x, &flipped, &params).unwrap();
    for xi in &x {
        let (sa, sb) = (a.decision_score(xi).unwrap(), b.decision_score(xi).unwrap());
        assert!((sa + sb).abs() < 1e-3, "{sa} {sb}");
        if sa.abs() > 1e-3 {
            assert_eq!(sa > 0.0, sb < 0.0);
        }
    }
}

#[test]
fn json_round_trip_preserves_scores() {
    let (x, y) = blobs(30, 5, 1.5, 5);
    let model = train_svm(&x, &y, &SvmParams::new(3.0, 0.1)).unwrap();
    let back = SvmModel::<f64>::from_json(&model.to_json()).unwrap();
    for xi in &x {
        let d = model.decision_score(xi).unwrap() - back.decision_score(xi).unwrap();
        assert!(d.abs() <= 1e-12);
    }
    assert!(SvmModel::<f64>::from_json("{\"format\":\"other\",\"version\":1}").is_err());
}

#[test]
fn training_errors() {
    let (x, y) = blobs(5, 2, 1.0, 6);
    assert!(matches!(
        train_svm(&x, &vec![true; x.len()], &SvmParams::new(1.0, 1.0)),
        Err(ClassifyError::SingleClassData)
    ));
    assert!(matches!(
        train_svm(&x, &y, &SvmParams::new(0.0, 1.0)),
        Err(ClassifyError::NonPositiveHyperparameter)
    ));
    let model = train_svm(&x, &y, &SvmParams::new(1.0, 1.0)).unwrap();
    assert!(matches!(
        model.decision_score(&[1.0]),
        Err(ClassifyError::DimensionMismatch { expected: 2, actual: 1 })
    ));
}

#[test]
fn single_precision_model_agrees() {
    let (x, y) = blobs(30, 3, 3.0, 7);
    let x32: Vec<Vec<f32>> = x.iter().map(|r| r.iter().map(|&v| v as f32).collect()).collect();
    let m64 = train_svm(&x, &y, &SvmParams::new(1.0, 0.3)).unwrap();
    let m32 = train_svm(&x32, &y, &SvmParams::new(1.0f32, 0.3)).unwrap();
    let s64: Vec<f64> = x.iter().map(|r| m64.decision_score(r).unwrap()).collect();
    let s32: Vec<f32> = x32.iter().map(|r| m32.decision_score(r).unwrap()).collect();
    assert!((auc(&s64, &y).unwrap() - auc(&s32, &y).unwrap()).abs() < 0.01);
}

#[test]
fn balanced_weights_scale_the_box() {
    let (x, mut y) = blobs(30, 2, 1.0, 8);
    for l in y.iter_mut().skip(1).step_by(3) {
        *l = false;
    }
    let params = SvmParams::new(1.0, 0.5).balanced(&y);
    let (wp, wn) = params.class_weights.unwrap();
    assert!(wp > 1.0 && wn < 1.0);
    let model = train_svm(&x, &y, &params).unwrap();
    assert!(model.dual_coefficients.iter().all(|a| a.abs() <= wp + 1e-12));
}

#[test]
fn grid_of_one_point_returns_it() {
    let (x, y) = blobs(20, 2, 2.0, 9);
    let r = grid_search_cv(&x, &y, &[2.0], &[0.5], 5, 0, false).unwrap();
    assert_eq!((r.c, r.gamma), (2.0, 0.5));
    assert_eq!(r.points.len(), 1);
}

#[test]
fn separable_grid_search_is_perfect_and_deterministic() {
    let (x, y) = blobs(30, 2, 14.0, 10);
    let cs = [0.01, 0.1, 1.0, 10.0];
    let gs = [0.001, 0.01, 0.1, 1.0];
    let r = grid_search_cv(&x, &y, &cs, &gs, 5, 3, false).unwrap();
    assert_eq!(r.cv_auc, 1.0);
    // every point ties at 1.0, so the smallest C and gamma win
    assert_eq!((r.c, r.gamma), (0.01, 0.001));
    assert_eq!(r, grid_search_cv(&x, &y, &cs, &gs, 5, 3, false).unwrap());
}

#[test]
fn selected_point_is_near_best_on_held_out_data() {
    let (x, y) = blobs(150, 8, 1.2, 11);
    let (xt, yt) = blobs(300, 8, 1.2, 12);
    let cs = [0.1, 1.0, 10.0];
    let gs = [0.003, 0.03, 0.3];
    let r = grid_search_cv(&x, &y, &cs, &gs, 5, 1, false).unwrap();
    let held_out = |c: f64, g: f64| {
        let m = train_svm(&x, &y, &SvmParams::new(c, g)).unwrap();
        auc(&m.decision_scores(&xt).unwrap(), &yt).unwrap()
    };
    let chosen = held_out(r.c, r.gamma);
    for &c in &cs {
        for &g in &gs {
            assert!(chosen >= held_out(c, g) - 0.03, "C={c} gamma={g}");
        }
    }
}
