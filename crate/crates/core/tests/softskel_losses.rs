mod common;

use belkit::losses::{
    bel_grad, bel_loss, dice_loss, gul_loss, tversky_loss, weight_map, weight_map_from_distance, LossParams, WeightMap,
    WeightMode, GAMMA_GRID,
};
use belkit::morphology::{dilate, erode, StructuringElement};
use belkit::phantom::{generate, TreeSpec};
use belkit::softskel::{breakage_map, soft_dilate, soft_erode, soft_skel};
use belkit::{BinaryMask, ProbabilityVolume, Volume3, UNIT_SPACING};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn pool_oracle(x: &ProbabilityVolume, take_min: bool) -> Vec<f64> {
    let dims = x.dims();
    let v = x.volume();
    cells(dims)
        .map(|p| {
            let mut acc = *v.get(p);
            for d in offsets(1) {
                let n = shifted(dims, p, d).map_or(0.0, |q| *v.get(q));
                acc = if take_min { acc.min(n) } else { acc.max(n) };
            }
            acc
        })
        .collect()
}

/// Weight map computed voxel by voxel from brute-force boundary distances.
fn weight_oracle(g: &BinaryMask, params: &LossParams, b: Option<&ProbabilityVolume>) -> Vec<f64> {
    let eroded = scan_morphology(g, 1, false, true);
    let surface = BinaryMask::from_fn(g.dims(), UNIT_SPACING, |p| {
        g.contains(p) && !eroded[g.volume().index(p)]
    })
    .unwrap();
    let d: Vec<f64> = brute_edt_squared(&surface, g)
        .iter()
        .map(|&s| (s as f64).sqrt())
        .collect();
    let dmax = (0..g.len()).filter(|&i| g.is_set(i)).map(|i| d[i]).fold(0.0, f64::max);
    (0..g.len())
        .map(|i| {
            if !g.is_set(i) {
                return 1.0;
            }
            let ratio = if dmax > 0.0 { d[i] / dmax } else { 0.0 };
            let bi = b.map_or(0.0, |b| b.data()[i]);
            (1.0 - params.mu * ratio.powf(params.gamma)) * (1.0 + params.theta * bi)
        })
        .collect()
}

fn loss_oracle(p: &ProbabilityVolume, g: &BinaryMask, w: &[f64], alpha: f64, beta: f64, r: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, (&wi, &pi)) in w.iter().zip(p.data()).enumerate() {
        let gi = if g.is_set(i) { 1.0 } else { 0.0 };
        num += wi * pi.powf(r) * gi;
        den += wi * (alpha * pi + beta * gi);
    }
    1.0 - num / den
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn soft_pools_match_scan(dims in [1usize..=8, 1usize..=8, 1usize..=8], seed in any::<u64>()) {
        let x = random_probability(dims, 0.0, 1.0, seed);
        let e = soft_erode(&x);
        let d = soft_dilate(&x);
        prop_assert_eq!(e.data(), &pool_oracle(&x, true)[..]);
        prop_assert_eq!(d.data(), &pool_oracle(&x, false)[..]);
        for i in 0..x.data().len() {
            prop_assert!(e.data()[i] <= x.data()[i] && x.data()[i] <= d.data()[i]);
        }
    }

    #[test]
    fn soft_pools_equal_binary_morphology(dims in [1usize..=9, 1usize..=9, 1usize..=9], density in 0.2f64..0.9, seed in any::<u64>()) {
        let m = random_mask(dims, density, seed);
        let x = ProbabilityVolume::from_mask(&m);
        let (se, sd) = (soft_erode(&x), soft_dilate(&x));
        let e = ProbabilityVolume::from_mask(&erode(&m, StructuringElement::Cross6));
        let d = ProbabilityVolume::from_mask(&dilate(&m, StructuringElement::Cross6));
        prop_assert_eq!(se.data(), e.data());
        prop_assert_eq!(sd.data(), d.data());
    }

    #[test]
    fn soft_skeleton_stays_in_range_and_inside_support(dims in [2usize..=8, 2usize..=8, 2usize..=8], seed in any::<u64>(), k in 1usize..6) {
        let x = random_probability(dims, 0.0, 1.0, seed);
        let mut r = rng(seed ^ 0xff);
        let data: Vec<f64> = x.data().iter().map(|&v| if r.gen_bool(0.3) { 0.0 } else { v }).collect();
        let x = ProbabilityVolume::new(Volume3::from_vec(dims, UNIT_SPACING, data).unwrap()).unwrap();
        let s = soft_skel(&x, k).unwrap();
        for (sv, xv) in s.data().iter().zip(x.data()) {
            prop_assert!((0.0..=1.0).contains(sv));
            if *xv == 0.0 {
                prop_assert_eq!(*sv, 0.0);
            }
        }
    }

    #[test]
    fn breakage_is_bounded_and_vanishes_on_self(dims in [2usize..=8, 2usize..=8, 2usize..=8], seed in any::<u64>()) {
        let g = random_blobs(dims, 3, seed);
        let p = random_probability(dims, 0.0, 1.0, seed ^ 7);
        let b = breakage_map(&g, &p, 4).unwrap();
        prop_assert!(b.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let own = breakage_map(&g, &ProbabilityVolume::from_mask(&g), 4).unwrap();
        prop_assert!(own.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weight_map_matches_oracle(seed in any::<u64>(), gi in 0usize..4, with_b in any::<bool>()) {
        let dims = [6, 7, 6];
        let g = random_blobs(dims, 3, seed);
        prop_assume!(g.any());
        let params = LossParams::bel(GAMMA_GRID[gi], 0.7);
        let b = with_b.then(|| random_probability(dims, 0.0, 1.0, seed ^ 3));
        let w = weight_map(&g, &params, b.as_ref()).unwrap();
        let want = weight_oracle(&g, &params, b.as_ref());
        for (a, e) in w.data().iter().zip(&want) {
            prop_assert!((a - e).abs() <= 1e-12, "{} vs {}", a, e);
        }
        for i in 0..g.len() {
            let wi = w.data()[i];
            if g.is_set(i) {
                prop_assert!(wi >= (1.0 - params.mu) * (1.0 - 1e-15) && wi <= 1.0 + params.theta);
            } else {
                prop_assert_eq!(wi, 1.0);
            }
        }
    }

    #[test]
    fn bel_loss_matches_scalar_loop(seed in any::<u64>(), gi in 0usize..4, r in prop::sample::select(vec![0.5, 0.7, 1.0])) {
        let dims = [6, 6, 6];
        let g = random_blobs(dims, 3, seed);
        prop_assume!(g.any());
        let p = random_probability(dims, 0.0, 1.0, seed ^ 9);
        let params = LossParams::bel(GAMMA_GRID[gi], r);
        let w = weight_map(&g, &params, None).unwrap();
        let got = bel_loss(&p, &g, &w, &params).unwrap().loss;
        let want = loss_oracle(&p, &g, &weight_oracle(&g, &params, None), params.alpha, params.beta, r);
        prop_assert!(rel_close(got, want, 1e-12), "{} vs {}", got, want);
        let lower = if r == 1.0 { 0.0 } else { 1.0 - 1.0 / params.beta };
        prop_assert!(got >= lower - 1e-12 && got <= 1.0 + 1e-12);
    }

    #[test]
    fn tversky_matches_scalar_loop(seed in any::<u64>(), alpha in 0.05f64..0.95) {
        let dims = [5, 6, 7];
        let g = random_mask(dims, 0.4, seed);
        prop_assume!(g.any());
        let p = random_probability(dims, 0.0, 1.0, seed ^ 5);
        let got = tversky_loss(&p, &g, alpha, 1.0 - alpha).unwrap().loss;
        let want = loss_oracle(&p, &g, &vec![1.0; g.len()], alpha, 1.0 - alpha, 1.0);
        prop_assert!(rel_close(got, want, 1e-12));
        prop_assert!((0.0..=1.0 + 1e-12).contains(&got));
    }

    #[test]
    fn raising_a_foreground_prediction_never_raises_the_loss(seed in any::<u64>(), r in prop::sample::select(vec![0.5, 0.7, 1.0]), bump in 0.001f64..0.3) {
        let dims = [5, 5, 5];
        let g = random_blobs(dims, 2, seed);
        prop_assume!(g.any());
        let p = random_probability(dims, 0.0, 1.0, seed ^ 11);
        let params = LossParams::bel(0.6, r);
        let w = weight_map(&g, &params, None).unwrap();
        let base = bel_loss(&p, &g, &w, &params).unwrap().loss;
        let i = g.indices().next().unwrap();
        let mut data = p.data().to_vec();
        data[i] = (data[i] + bump).min(1.0);
        let raised = ProbabilityVolume::new(Volume3::from_vec(dims, UNIT_SPACING, data).unwrap()).unwrap();
        let after = bel_loss(&raised, &g, &w, &params).unwrap().loss;
        prop_assert!(after <= base + 1e-15, "{} > {}", after, base);
    }
}

#[test]
fn tversky_half_half_equals_dice_on_binary_inputs() {
    for seed in 0..50 {
        let dims = [7, 5, 6];
        let g = random_mask(dims, 0.4, seed);
        let p = ProbabilityVolume::from_mask(&random_mask(dims, 0.5, seed + 1000));
        let t = tversky_loss(&p, &g, 0.5, 0.5).unwrap().loss;
        let d = dice_loss(&p, &g).unwrap().loss;
        assert!((t - d).abs() <= 1e-12, "seed {seed}: {t} vs {d}");
    }
}

#[test]
fn identities_at_perfect_and_empty_predictions() {
    let g = random_blobs([8, 8, 8], 3, 4);
    let params = LossParams::bel(0.8, 0.5);
    let w = weight_map(&g, &params, None).unwrap();
    let perfect = ProbabilityVolume::from_mask(&g);
    let zero = ProbabilityVolume::zeros(g.dims(), UNIT_SPACING).unwrap();
    assert_eq!(bel_loss(&perfect, &g, &w, &params).unwrap().loss, 0.0);
    assert_eq!(bel_loss(&zero, &g, &w, &params).unwrap().loss, 1.0);
    assert_eq!(dice_loss(&zero, &g).unwrap().loss, 1.0);
    assert_eq!(gul_loss(&perfect, &g, &LossParams::gul(0.6, 0.7)).unwrap().loss, 0.0);
}

#[test]
fn finite_differences_agree_with_the_gradient() {
    let h = 1e-5;
    for seed in 0..20u64 {
        let dims = [5, 5, 5];
        let g = random_blobs(dims, 2, seed);
        if !g.any() {
            continue;
        }
        let p = random_probability(dims, 0.0, 1.0, seed ^ 21);
        for r in [0.5, 0.7, 1.0] {
            let params = LossParams::bel(GAMMA_GRID[seed as usize % 4], r);
            let b = breakage_map(&g, &p, 3).unwrap();
            let w = weight_map(&g, &params, Some(&b)).unwrap();
            let grad = bel_grad(&p, &g, &w, &params).unwrap();
            for i in 0..p.data().len() {
                let pi = p.data()[i];
                if !(0.01..=0.99).contains(&pi) {
                    continue;
                }
                let at = |v: f64| {
                    let mut d = p.data().to_vec();
                    d[i] = v;
                    let q = ProbabilityVolume::new(Volume3::from_vec(dims, UNIT_SPACING, d).unwrap()).unwrap();
                    bel_loss(&q, &g, &w, &params).unwrap().loss
                };
                let fd = (at(pi + h) - at(pi - h)) / (2.0 * h);
                let an = grad.data()[i];
                assert!(rel_close(an, fd, 1e-4), "seed {seed} r {r} voxel {i}: {an} vs {fd}");
            }
        }
    }
}

#[test]
fn background_gradient_pushes_predictions_down() {
    let g = random_blobs([6, 6, 6], 2, 3);
    let p = random_probability([6, 6, 6], 0.1, 0.9, 4);
    let params = LossParams::bel(0.6, 0.7);
    let w = weight_map(&g, &params, None).unwrap();
    let grad = bel_grad(&p, &g, &w, &params).unwrap();
    assert!((0..g.len()).filter(|&i| !g.is_set(i)).all(|i| grad.data()[i] > 0.0));
}

#[test]
fn weight_substitutions_are_exact() {
    let g = BinaryMask::from_fn([5, 5, 5], UNIT_SPACING, |p| p.iter().all(|&c| (1..4).contains(&c))).unwrap();
    let params = LossParams::with_alpha(0.2, 1.0, 0.7, 0.05, WeightMode::Boundary);
    assert!((params.mu - 0.75).abs() < 1e-15);
    let b = ProbabilityVolume::new(Volume3::filled([5, 5, 5], UNIT_SPACING, 1.0).unwrap()).unwrap();
    let plain = weight_map(&g, &params, None).unwrap();
    let boosted = weight_map(&g, &params, Some(&b)).unwrap();
    let centre = g.volume().index([2, 2, 2]);
    let face = g.volume().index([1, 2, 2]);
    assert!((plain.data()[centre] - 0.25).abs() <= 1e-12);
    assert!((boosted.data()[centre] - 0.2625).abs() <= 1e-12);
    assert!((plain.data()[face] - 1.0).abs() <= 1e-12);
    assert_eq!(plain.data()[0], 1.0);
    assert_eq!(boosted.data()[0], 1.0);
    let none = weight_map_from_distance(&g, None, &params, None).unwrap();
    assert_eq!(none, WeightMap::uniform([5, 5, 5], UNIT_SPACING).unwrap());
}

#[test]
fn soft_skeleton_of_a_tube_is_a_connected_core_near_the_axis() {
    let dims = [17, 17, 30];
    let tube = z_tube(dims, 3.0, 3, 27);
    let s = soft_skel(&ProbabilityVolume::from_mask(&tube), 5).unwrap();
    let core = BinaryMask::from_fn(dims, UNIT_SPACING, |p| s.volume().get(p) > &0.5).unwrap();
    assert_eq!(component_count(&core), 1);
    assert!(
        core.count() < tube.count() / 4,
        "core {} of {}",
        core.count(),
        tube.count()
    );
    for z in 4..26 {
        let near = (7..=9).any(|x| (7..=9).any(|y| core.contains([x, y, z])));
        assert!(near, "no core voxel within 1 of the axis at z={z}");
    }
}

#[test]
fn breakage_concentrates_on_the_erased_branch() {
    let t = generate(&TreeSpec::default()).unwrap();
    let id = 6;
    let cut = t.break_branch(id, 6.0).unwrap();
    let b = breakage_map(&t.mask, &ProbabilityVolume::from_mask(&cut.mask), 10).unwrap();
    let branch = t.branch(id).unwrap();
    let reach = branch.radius + 3.0;
    let near_branch = |p: [usize; 3]| {
        branch
            .centerline
            .iter()
            .any(|q| (0..3).map(|a| (p[a] as f64 - q[a] as f64).powi(2)).sum::<f64>() <= reach * reach)
    };
    let support: Vec<_> = (0..b.data().len()).filter(|&i| b.data()[i] > 0.0).collect();
    assert!(!support.is_empty());
    for i in support {
        let p = b.volume().coords(i);
        assert!(near_branch(p), "breakage at {p:?} away from branch {id}");
    }
}
