use approx::assert_relative_eq;
use dperm::geometry::{
    closed_form_quadratic, dp_accmd, gaussian_width_mc, lemma51_check, projected_gradient,
    AccMdConfig, AccMdSchedule, BodyKind, ConvexBody, MirrorMap,
};
use dperm::harness::reference_projected;
use dperm::linalg::{dot, norm1, norm2};
use dperm::{NoisePlan, RunRng, SmoothObjective};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn random_vec(rng: &mut ChaCha20Rng, p: usize, scale: f64) -> Vec<f64> {
    (0..p).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

fn bodies(p: usize) -> Vec<ConvexBody> {
    vec![
        ConvexBody::l2_ball(p, 1.0),
        ConvexBody::l2_ball(p, 2.5),
        ConvexBody::l1_ball(p, 1.0),
        ConvexBody::l1_ball(p, 0.4),
    ]
}

#[test]
fn norm_examples() {
    let l2 = ConvexBody::l2_ball(2, 2.0);
    assert_eq!(l2.minkowski_norm(&[3.0, 4.0]), 2.5);
    assert_eq!(l2.dual_norm(&[3.0, 4.0]), 10.0);
    let l1 = ConvexBody::l1_ball(3, 2.0);
    assert_eq!(l1.minkowski_norm(&[1.0, -2.0, 1.0]), 2.0);
    assert_eq!(l1.dual_norm(&[1.0, -3.0, 2.0]), 6.0);
    assert_eq!(l1.l2_diameter(), 4.0);
    assert!(l1.contains(&[1.0, -1.0, 0.0], 0.0));
    assert!(!l1.contains(&[1.0, -1.0, 0.1], 1e-9));
    assert!(ConvexBody::l2_ball(2, 0.0).validate().is_err());
    assert!(ConvexBody::l1_ball(0, 1.0).validate().is_err());
}

#[test]
fn duality_and_lemma51_on_random_pairs() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for body in bodies(6) {
        for _ in 0..10_000 {
            let u = random_vec(&mut rng, 6, 3.0);
            let v = random_vec(&mut rng, 6, 3.0);
            let lhs = dot(&u, &v).abs();
            let rhs = body.minkowski_norm(&u) * body.dual_norm(&v);
            assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15);
            assert!(lemma51_check(&body, &u));
        }
        // The dual norm is attained on the boundary of C.
        let v = random_vec(&mut rng, 6, 1.0);
        let w: Vec<f64> = match body.kind {
            BodyKind::L2Ball => v.iter().map(|x| body.radius * x / norm2(&v)).collect(),
            BodyKind::L1Ball => {
                let (j, _) = v
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                    .unwrap();
                let mut w = vec![0.0; 6];
                w[j] = body.radius * v[j].signum();
                w
            }
        };
        assert!(body.contains(&w, 1e-12));
        assert_relative_eq!(dot(&w, &v), body.dual_norm(&v), max_relative = 1e-12);
    }
}

#[test]
fn mirror_map_is_strongly_convex_in_body_norm() {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for body in bodies(5) {
        let map = MirrorMap::for_body(body).unwrap();
        for _ in 0..10_000 {
            let x = random_vec(&mut rng, 5, 1.0);
            let y = random_vec(&mut rng, 5, 1.0);
            let d: Vec<f64> = y.iter().zip(&x).map(|(a, b)| a - b).collect();
            let lower = 0.5 * body.minkowski_norm(&d).powi(2);
            assert!(map.bregman(&y, &x) >= lower * (1.0 - 1e-12));
            assert!(map.bregman(&x, &x).abs() < 1e-15);
        }
    }
}

#[test]
fn l1_mirror_map_bound_is_tight() {
    // Equality in ‖v‖₁² ≤ p‖v‖₂² at v ∝ (1, …, 1).
    for p in [2usize, 10, 100] {
        let body = ConvexBody::l1_ball(p, 1.0);
        let map = MirrorMap::for_body(body).unwrap();
        assert_eq!(map.scale(), p as f64);
        let x = vec![0.0; p];
        let y = vec![1.0 / p as f64; p];
        let b = map.bregman(&y, &x);
        let lower = 0.5 * body.minkowski_norm(&y).powi(2);
        assert_relative_eq!(b, lower, max_relative = 1e-12);
        assert_relative_eq!(b, 0.5, max_relative = 1e-12);
    }
}

#[test]
fn inner_solver_matches_closed_form() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for body in [ConvexBody::l1_ball(8, 1.0), ConvexBody::l2_ball(8, 1.0)] {
        for _ in 0..50 {
            let center = body.project(&random_vec(&mut rng, 8, 1.0));
            let g = random_vec(&mut rng, 8, 4.0);
            let curvature = rng.random_range(0.5..5.0);
            let exact = closed_form_quadratic(&body, &center, &g, curvature);
            let grad = |y: &[f64]| -> Vec<f64> {
                y.iter()
                    .zip(&center)
                    .zip(&g)
                    .map(|((yi, ci), gi)| curvature * (yi - ci) + gi)
                    .collect()
            };
            let (y, _) = projected_gradient(&body, &center, grad, curvature, 1e-12, 100_000).unwrap();
            for (a, b) in y.iter().zip(&exact) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn mirror_step_examples() {
    let map = MirrorMap::for_body(ConvexBody::l2_ball(2, 1.0)).unwrap();
    let z = map.mirror_step(&[0.0, 0.0], &[1.0, 0.0], 0.5).unwrap();
    assert_eq!(z, vec![-0.5, 0.0]);
    let z = map.mirror_step(&[0.0, 0.0], &[4.0, 0.0], 0.5).unwrap();
    assert_eq!(z, vec![-1.0, 0.0]);
    let z = map.mirror_step(&[0.2, 0.1], &[4.0, 0.0], 0.0).unwrap();
    assert_eq!(z, vec![0.2, 0.1]);
    // y-step curvature L·‖C‖₂²·scale = 1·4·1.
    let y = map.smoothed_min_step(&[0.0, 0.0], &[-2.0, 0.0], 1.0).unwrap();
    assert_eq!(y, vec![0.5, 0.0]);

    let l1 = MirrorMap::for_body(ConvexBody::l1_ball(2, 1.0)).unwrap();
    assert!(!l1.closed_form());
    let z = l1.mirror_step(&[0.0, 0.0], &[-1.0, -1.0], 0.5).unwrap();
    // Unconstrained minimizer (0.25, 0.25) is feasible.
    assert!((z[0] - 0.25).abs() < 1e-9 && (z[1] - 0.25).abs() < 1e-9);
    let z = l1.mirror_step(&[0.0, 0.0], &[-8.0, 0.0], 0.5).unwrap();
    assert!((z[0] - 1.0).abs() < 1e-9 && z[1].abs() < 1e-9);
    assert!(l1.mirror_step(&[0.0], &[1.0, 1.0], 0.5).is_err());
    assert!(l1.with_inner_tolerance(0.0).is_err());
}

/// Projection onto the ℓ1 ball by bisection on the soft threshold.
fn l1_projection_oracle(y: &[f64], r: f64) -> Vec<f64> {
    if norm1(y) <= r {
        return y.to_vec();
    }
    let (mut lo, mut hi) = (0.0, y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s: f64 = y.iter().map(|v| (v.abs() - mid).max(0.0)).sum();
        if s > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    y.iter().map(|v| v.signum() * (v.abs() - hi).max(0.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn l1_projection_properties(
        y in prop::collection::vec(-5.0..5.0f64, 1..12),
        r in 0.05..4.0f64,
    ) {
        let body = ConvexBody::l1_ball(y.len(), r);
        let p = body.project(&y);
        prop_assert!(norm1(&p) <= r * (1.0 + 1e-12));
        let again = body.project(&p);
        for (a, b) in again.iter().zip(&p) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let oracle = l1_projection_oracle(&y, r);
        for (a, b) in p.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        // Variational inequality at every vertex ±r·e_j.
        let resid: Vec<f64> = y.iter().zip(&p).map(|(a, b)| a - b).collect();
        for j in 0..y.len() {
            for s in [-1.0, 1.0] {
                let mut w = vec![0.0; y.len()];
                w[j] = s * r;
                let d: Vec<f64> = w.iter().zip(&p).map(|(a, b)| a - b).collect();
                prop_assert!(dot(&resid, &d) <= 1e-9);
            }
        }
    }

    #[test]
    fn projection_is_non_expansive(
        x in prop::collection::vec(-5.0..5.0f64, 4),
        y in prop::collection::vec(-5.0..5.0f64, 4),
        r in 0.1..3.0f64,
        l1 in any::<bool>(),
    ) {
        let body = if l1 { ConvexBody::l1_ball(4, r) } else { ConvexBody::l2_ball(4, r) };
        let (px, py) = (body.project(&x), body.project(&y));
        let d: Vec<f64> = px.iter().zip(&py).map(|(a, b)| a - b).collect();
        let e: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        prop_assert!(norm2(&d) <= norm2(&e) + 1e-12);
    }
}

struct ShiftedQuadratic {
    diag: Vec<f64>,
    target: Vec<f64>,
}

impl SmoothObjective for ShiftedQuadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * self
            .diag
            .iter()
            .zip(x.iter().zip(&self.target))
            .map(|(d, (a, b))| d * (a - b) * (a - b))
            .sum::<f64>()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.diag
            .iter()
            .zip(x.iter().zip(&self.target))
            .map(|(d, (a, b))| d * (a - b))
            .collect()
    }
    fn smoothness_bound(&self) -> f64 {
        self.diag.iter().cloned().fold(0.0, f64::max)
    }
}

#[test]
fn accmd_iterates_stay_feasible_and_approach_optimum() {
    let obj = ShiftedQuadratic {
        diag: vec![1.0, 0.5, 0.2],
        target: vec![1.0, 1.0, -1.0],
    };
    for body in [ConvexBody::l2_ball(3, 1.0), ConvexBody::l1_ball(3, 1.0)] {
        let map = MirrorMap::for_body(body).unwrap();
        let reference = reference_projected(&obj, &body, 1e-12, 1_000_000).unwrap();
        let mut gaps = Vec::new();
        for t in [4usize, 16, 64] {
            let cfg = AccMdConfig::new(t, vec![0.0; 3], NoisePlan::off(t as u64, 1.0));
            let trace = dp_accmd(&obj, &map, &cfg, &mut RunRng::new(0), Some(&reference)).unwrap();
            assert!(body.contains(&trace.final_point, 1e-9));
            assert_eq!(trace.records.len(), t + 1);
            gaps.push(trace.final_excess_risk().unwrap());
        }
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        assert!(gaps.iter().all(|g| *g >= -1e-9));

        let sigma = NoisePlan {
            sigma: 0.5,
            ..NoisePlan::off(20, 1.0)
        };
        let cfg = AccMdConfig::new(20, vec![0.0; 3], sigma);
        let trace = dp_accmd(&obj, &map, &cfg, &mut RunRng::new(5), None).unwrap();
        assert!(body.contains(&trace.final_point, 1e-9));
    }
}

#[test]
fn accmd_rejects_bad_configs() {
    let obj = ShiftedQuadratic {
        diag: vec![1.0, 1.0],
        target: vec![0.0, 0.0],
    };
    let map = MirrorMap::for_body(ConvexBody::l2_ball(2, 1.0)).unwrap();
    let outside = AccMdConfig::new(3, vec![2.0, 0.0], NoisePlan::off(3, 1.0));
    assert!(dp_accmd(&obj, &map, &outside, &mut RunRng::new(0), None).is_err());
    let zero = AccMdConfig::new(0, vec![0.0, 0.0], NoisePlan::off(0, 1.0));
    assert!(dp_accmd(&obj, &map, &zero, &mut RunRng::new(0), None).is_err());
    let wrong = MirrorMap::for_body(ConvexBody::l2_ball(3, 1.0)).unwrap();
    let cfg = AccMdConfig::new(3, vec![0.0, 0.0], NoisePlan::off(3, 1.0));
    assert!(dp_accmd(&obj, &wrong, &cfg, &mut RunRng::new(0), None).is_err());
    let unscaled = AccMdConfig {
        schedule: AccMdSchedule::Unscaled,
        ..cfg
    };
    assert!(dp_accmd(&obj, &map, &unscaled, &mut RunRng::new(0), None).is_ok());
}

#[test]
fn width_of_interval_and_error_bars() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let body = ConvexBody::l2_ball(1, 1.0);
    let w = gaussian_width_mc(&body, 200_000, &mut rng).unwrap();
    let exact = (2.0 / std::f64::consts::PI).sqrt();
    assert!((w.mean - exact).abs() < 5.0 * w.std_error);
    // E|b|² = 1 and sd(|b|) = √(1 - 2/π).
    assert!((w.mean_square - 1.0).abs() < 0.02);
    let sd = (1.0 - 2.0 / std::f64::consts::PI).sqrt();
    assert_relative_eq!(w.std_error, sd / (200_000f64).sqrt(), max_relative = 0.02);
    assert!(gaussian_width_mc(&body, 99, &mut rng).is_err());
}
