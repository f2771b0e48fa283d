use nalgebra::{DMatrix, DVector};
use pii::poisson::{composite, patch_residual, Neighbor};
use pii::{
    build_guidance, pii_blend, pii_blend_with_stats, solve_patch, Error, GuidanceField, Image, ImageGrid,
    PatchRegion, PatchSpec, SolveMethod, SolverConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Assembles the patch system straight from the finite-difference equations
/// and solves it with nalgebra's LU.
fn dense_oracle(dest: &Image, guidance: &GuidanceField<f64>, channel: usize) -> Vec<f64> {
    let region = guidance.region();
    let (h, w) = (dest.height(), dest.width());
    let n = region.pixel_count();
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for (p, (r, c)) in region.pixels().enumerate() {
        let offsets: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
        for (slot, (dr, dc)) in offsets.iter().enumerate() {
            let (qr, qc) = (r as isize + dr, c as isize + dc);
            if qr < 0 || qc < 0 || qr >= h as isize || qc >= w as isize {
                continue;
            }
            let (qr, qc) = (qr as usize, qc as usize);
            a[(p, p)] += 1.0;
            b[p] += guidance.at(p, channel)[slot];
            if region.contains(qr, qc) {
                let q = (qr - region.top()) * region.width() + (qc - region.left());
                a[(p, q)] -= 1.0;
            } else {
                b[p] += dest.get(qr, qc, channel);
            }
        }
    }
    a.lu().solve(&b).expect("nonsingular").iter().copied().collect()
}

fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, channels: usize) -> Image {
    ImageGrid::from_fn(h, w, channels, |_, _, _| rng.gen_range(-2.0..2.0)).unwrap()
}

fn random_guidance(rng: &mut ChaCha8Rng, region: PatchRegion, channels: usize) -> GuidanceField<f64> {
    let values = (0..region.pixel_count() * channels)
        .map(|_| [0; 4].map(|_| rng.gen_range(-1.0..1.0)))
        .collect();
    GuidanceField::new(region, channels, values).unwrap()
}

fn spec_for(region: PatchRegion, alpha: f64) -> PatchSpec {
    PatchSpec::new(region, alpha, 0, 1).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn patch_values(img: &Image, region: PatchRegion, channel: usize) -> Vec<f64> {
    region.pixels().map(|(r, c)| img.get(r, c, channel)).collect()
}

#[test]
fn constant_boundary_zero_guidance() {
    let region = PatchRegion::new(2, 3, 7, 6, 12, 12).unwrap();
    let g = GuidanceField::new(region, 1, vec![[0.0; 4]; region.pixel_count()]).unwrap();
    // start far from the answer so CG has work to do
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noisy: Image = ImageGrid::from_fn(12, 12, 1, |r, c, _| {
        if region.contains(r, c) {
            rng.gen_range(-50.0..50.0)
        } else {
            3.25
        }
    })
    .unwrap();
    let sol = solve_patch(&noisy, &g, &spec_for(region, 0.5), &SolverConfig::default()).unwrap();
    assert!(sol.iterations > 0);
    for v in sol.values.data() {
        assert!((v - 3.25).abs() < 1e-6);
    }
}

#[test]
fn own_gradients_reconstruct_dest() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dest = random_image(&mut rng, 20, 24, 1);
    let region = PatchRegion::new(3, 4, 12, 15, 20, 24).unwrap();
    let g = GuidanceField::from_image(&dest, region).unwrap();
    // solve from a zero start by blanking the patch in the initial guess
    let blank = ImageGrid::from_fn(20, 24, 1, |r, c, _| if region.contains(r, c) { 0.0 } else { dest.get(r, c, 0) }).unwrap();
    let sol = solve_patch(&blank, &g, &spec_for(region, 0.3), &SolverConfig::default()).unwrap();
    let got = sol.values.data();
    assert!(max_abs_diff(got, &patch_values(&dest, region, 0)) < 1e-6);
}

#[test]
fn random_6x6_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dest = random_image(&mut rng, 10, 10, 1);
    let region = PatchRegion::new(2, 2, 6, 6, 10, 10).unwrap();
    let g = random_guidance(&mut rng, region, 1);
    let oracle = dense_oracle(&dest, &g, 0);
    for method in [SolveMethod::ConjugateGradient, SolveMethod::DirectDense] {
        let cfg = SolverConfig {
            method,
            ..Default::default()
        };
        let sol = solve_patch(&dest, &g, &spec_for(region, 0.5), &cfg).unwrap();
        assert!(max_abs_diff(sol.values.data(), &oracle) < 1e-6, "{method:?}");
        assert!(sol.residual_norm <= 1e-8);
    }
}

#[test]
fn multichannel_matches_oracle_per_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dest = random_image(&mut rng, 11, 9, 3);
    let region = PatchRegion::new(1, 2, 8, 5, 11, 9).unwrap();
    let g = random_guidance(&mut rng, region, 3);
    let sol = solve_patch(&dest, &g, &spec_for(region, 0.5), &SolverConfig::default()).unwrap();
    for ch in 0..3 {
        let got: Vec<f64> = sol.values.channel_values(ch).collect();
        assert!(max_abs_diff(&got, &dense_oracle(&dest, &g, ch)) < 1e-6);
    }
}

#[test]
fn alpha_zero_blend_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dest = random_image(&mut rng, 64, 64, 1);
    let source = random_image(&mut rng, 64, 64, 1);
    let region = PatchRegion::new(5, 9, 40, 33, 64, 64).unwrap();
    let out = pii_blend(&dest, &source, &spec_for(region, 0.0), &SolverConfig::default()).unwrap();
    assert!(max_abs_diff(out.data(), dest.data()) < 1e-6);
}

#[test]
fn outside_patch_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dest = random_image(&mut rng, 30, 30, 2);
    let source = random_image(&mut rng, 30, 30, 2);
    let region = PatchRegion::new(4, 6, 10, 17, 30, 30).unwrap();
    let out = pii_blend(&dest, &source, &spec_for(region, 0.7), &SolverConfig::default()).unwrap();
    for r in 0..30 {
        for c in 0..30 {
            for ch in 0..2 {
                if !region.contains(r, c) {
                    assert_eq!(out.get(r, c, ch).to_bits(), dest.get(r, c, ch).to_bits());
                }
            }
        }
    }
}

/// With identical images the precedence rule picks `s * diff` with `s = max(α, 1 - α)`, so
/// the solution is `s * dest + (1 - s) * harmonic(boundary)`. It equals
/// `dest` only when `dest` is harmonic inside the patch.
#[test]
fn identical_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dest = random_image(&mut rng, 16, 16, 1);
    let region = PatchRegion::new(3, 3, 9, 8, 16, 16).unwrap();
    for &alpha in &[0.1, 0.5, 0.8] {
        let spec = spec_for(region, alpha);
        let out = pii_blend(&dest, &dest, &spec, &SolverConfig::default()).unwrap();
        let g = build_guidance(&dest, &dest, &spec).unwrap();
        let oracle = dense_oracle(&dest, &g, 0);
        assert!(max_abs_diff(&patch_values(&out, region, 0), &oracle) < 1e-6);

        let s: f64 = if (1.0 - alpha) > alpha { 1.0 - alpha } else { alpha };
        let zero = GuidanceField::new(region, 1, vec![[0.0; 4]; region.pixel_count()]).unwrap();
        let harmonic = dense_oracle(&dest, &zero, 0);
        let predicted: Vec<f64> = patch_values(&dest, region, 0)
            .iter()
            .zip(&harmonic)
            .map(|(d, hm)| s * d + (1.0 - s) * hm)
            .collect();
        assert!(max_abs_diff(&oracle, &predicted) < 1e-9);
    }

    // a linear ramp is discretely harmonic, so it survives any α
    let ramp = ImageGrid::from_fn(16, 16, 1, |r, c, _| 0.3 * r as f64 - 0.7 * c as f64 + 2.0).unwrap();
    for &alpha in &[0.05, 0.5, 0.95] {
        let out = pii_blend(&ramp, &ramp, &spec_for(region, alpha), &SolverConfig::default()).unwrap();
        assert!(max_abs_diff(out.data(), ramp.data()) < 1e-6);
    }
}

#[test]
fn bright_square_keeps_shape() {
    let dest = ImageGrid::filled(24, 24, 1, 0.0).unwrap();
    let background = 0.4;
    let source = ImageGrid::from_fn(24, 24, 1, |r, c, _| {
        if (9..14).contains(&r) && (8..15).contains(&c) {
            5.0
        } else {
            background
        }
    })
    .unwrap();
    let region = PatchRegion::new(4, 4, 15, 15, 24, 24).unwrap();
    let spec = spec_for(region, 0.95);
    let out = pii_blend(&dest, &source, &spec, &SolverConfig::default()).unwrap();
    let g = build_guidance(&dest, &source, &spec).unwrap();
    let oracle = dense_oracle(&dest, &g, 0);
    assert!(max_abs_diff(&patch_values(&out, region, 0), &oracle) < 1e-6);
    // dest differences are zero, so v = 0.95 * source differences and the
    // solution is the source shifted so the ring reads 0
    for (r, c) in region.pixels() {
        let want = 0.95 * (source.get(r, c, 0) - background);
        assert!((out.get(r, c, 0) - want).abs() < 1e-6, "({r},{c})");
    }
}

#[test]
fn solved_patch_satisfies_discrete_poisson_equation() {
    // Laplacian of the composite equals the divergence of the guidance.
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dest = random_image(&mut rng, 20, 20, 1);
    let source = random_image(&mut rng, 20, 20, 1);
    let region = PatchRegion::new(5, 4, 9, 11, 20, 20).unwrap();
    let spec = spec_for(region, 0.6);
    let out = pii_blend(&dest, &source, &spec, &SolverConfig {
        rel_tolerance: 1e-12,
        ..Default::default()
    })
    .unwrap();
    let g = build_guidance(&dest, &source, &spec).unwrap();
    for (k, (r, c)) in region.pixels().enumerate() {
        let lap = out.get(r - 1, c, 0) + out.get(r + 1, c, 0) + out.get(r, c - 1, 0) + out.get(r, c + 1, 0)
            - 4.0 * out.get(r, c, 0);
        let div: f64 = -g.at(k, 0).iter().sum::<f64>();
        assert!((lap - div).abs() < 1e-9, "({r},{c}) {lap} vs {div}");
    }
    assert!(patch_residual(&out, &dest, &g).unwrap() <= 1e-12);
}

#[test]
fn nonconvergence_reports_residual() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dest = random_image(&mut rng, 40, 40, 1);
    let source = random_image(&mut rng, 40, 40, 1);
    let region = PatchRegion::new(2, 2, 30, 30, 40, 40).unwrap();
    let cfg = SolverConfig {
        max_iterations: Some(2),
        ..Default::default()
    };
    match pii_blend(&dest, &source, &spec_for(region, 0.5), &cfg) {
        Err(Error::NonConvergence { residual, iterations }) => {
            assert!(residual > 1e-8);
            assert_eq!(iterations, 2);
        }
        other => panic!("expected NonConvergence, got {other:?}"),
    }
}

#[test]
fn single_precision_instantiation() {
    let dest: ImageGrid<f32> = ImageGrid::from_fn(20, 20, 1, |r, c, _| (r as f32 * 0.3).sin() + c as f32 * 0.05).unwrap();
    let source: ImageGrid<f32> = ImageGrid::from_fn(20, 20, 1, |r, c, _| (c as f32 * 0.4).cos() * 2.0 - r as f32 * 0.1).unwrap();
    let region = PatchRegion::new(4, 4, 10, 10, 20, 20).unwrap();
    let cfg = SolverConfig {
        rel_tolerance: 1e-5,
        ..Default::default()
    };
    let (out32, stats) = pii_blend_with_stats(&dest, &source, &spec_for(region, 0.6), &cfg).unwrap();
    assert!(stats.residual_norm <= 1e-5);
    let out64 = pii_blend(
        &dest.cast::<f64>().unwrap(),
        &source.cast::<f64>().unwrap(),
        &spec_for(region, 0.6),
        &SolverConfig::default(),
    )
    .unwrap();
    for (a, b) in out32.data().iter().zip(out64.data()) {
        assert!((*a as f64 - b).abs() < 1e-3);
    }
}

#[test]
fn composite_places_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let dest = random_image(&mut rng, 12, 12, 1);
    let region = PatchRegion::new(3, 2, 4, 6, 12, 12).unwrap();
    let g = random_guidance(&mut rng, region, 1);
    let sol = solve_patch(&dest, &g, &spec_for(region, 0.5), &SolverConfig::default()).unwrap();
    let out = composite(&dest, &sol);
    assert_eq!(patch_values(&out, region, 0), sol.values.data());
}

fn neighbor_permutation() -> [usize; 4] {
    // slot of each direction after transposition
    Neighbor::ALL.map(|n| Neighbor::ALL.iter().position(|m| *m == n.transposed()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cg_agrees_with_dense_up_to_256_unknowns(
        seed in any::<u64>(),
        ph in 1usize..=16,
        pw in 1usize..=16,
        top in 1usize..4,
        left in 1usize..4,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = (ph + top + 1 + rng.gen_range(0..3), pw + left + 1 + rng.gen_range(0..3));
        let dest = random_image(&mut rng, h, w, 1);
        let region = PatchRegion::new(top, left, ph, pw, h, w).unwrap();
        let g = random_guidance(&mut rng, region, 1);
        let sol = solve_patch(&dest, &g, &spec_for(region, 0.5), &SolverConfig::default()).unwrap();
        prop_assert!(max_abs_diff(sol.values.data(), &dense_oracle(&dest, &g, 0)) < 1e-6);
    }

    #[test]
    fn zero_guidance_obeys_maximum_principle(seed in any::<u64>(), ph in 1usize..12, pw in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = (ph + 2, pw + 2);
        let dest = random_image(&mut rng, h, w, 1);
        let region = PatchRegion::new(1, 1, ph, pw, h, w).unwrap();
        let g = GuidanceField::new(region, 1, vec![[0.0; 4]; region.pixel_count()]).unwrap();
        let sol = solve_patch(&dest, &g, &spec_for(region, 0.5), &SolverConfig::default()).unwrap();
        let ring: Vec<f64> = (0..h)
            .flat_map(|r| (0..w).map(move |c| (r, c)))
            .filter(|&(r, c)| !region.contains(r, c) && !((r == 0 || r == h - 1) && (c == 0 || c == w - 1)))
            .map(|(r, c)| dest.get(r, c, 0))
            .collect();
        let lo = ring.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ring.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for v in sol.values.data() {
            prop_assert!(*v >= lo - 1e-9 && *v <= hi + 1e-9);
        }
    }

    #[test]
    fn transposition_commutes_with_blend(seed in any::<u64>(), alpha in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dest = random_image(&mut rng, 18, 23, 1);
        let source = random_image(&mut rng, 18, 23, 1);
        let ph = rng.gen_range(3..14);
        let pw = rng.gen_range(3..19);
        let top = rng.gen_range(1..18 - ph);
        let left = rng.gen_range(1..23 - pw);
        let spec = spec_for(PatchRegion::new(top, left, ph, pw, 18, 23).unwrap(), alpha);
        let cfg = SolverConfig { rel_tolerance: 1e-12, ..Default::default() };
        let out = pii_blend(&dest, &source, &spec, &cfg).unwrap();
        let out_t = pii_blend(&dest.transpose(), &source.transpose(), &spec.transpose(), &cfg).unwrap();
        prop_assert!(max_abs_diff(out.transpose().data(), out_t.data()) < 1e-10);

        // the guidance field itself transposes exactly
        let g = build_guidance(&dest, &source, &spec).unwrap();
        let gt = build_guidance(&dest.transpose(), &source.transpose(), &spec.transpose()).unwrap();
        let perm = neighbor_permutation();
        for (k, (r, c)) in spec.region.pixels().enumerate() {
            let kt = gt.region().local_index(c, r).unwrap();
            for slot in 0..4 {
                prop_assert_eq!(g.at(k, 0)[slot], gt.at(kt, 0)[perm[slot]]);
            }
        }
        // pixels outside the patch stay exact in both orientations
        for r in 0..18 {
            for c in 0..23 {
                if !spec.region.contains(r, c) {
                    prop_assert_eq!(out_t.get(c, r, 0).to_bits(), dest.get(r, c, 0).to_bits());
                }
            }
        }
    }

    #[test]
    fn tighter_tolerance_never_raises_residual(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dest = random_image(&mut rng, 30, 30, 1);
        let region = PatchRegion::new(2, 3, rng.gen_range(3..26), rng.gen_range(3..25), 30, 30).unwrap();
        let g = random_guidance(&mut rng, region, 1);
        let mut tol = 1e-3;
        let mut last = f64::INFINITY;
        while tol > 1e-13 {
            let cfg = SolverConfig { rel_tolerance: tol, ..Default::default() };
            let sol = solve_patch(&dest, &g, &spec_for(region, 0.5), &cfg).unwrap();
            prop_assert!(sol.residual_norm <= tol);
            prop_assert!(sol.residual_norm <= last);
            last = sol.residual_norm;
            tol /= 2.0;
        }
    }
}
