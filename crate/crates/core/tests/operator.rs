use ddgm_core::image::{Image, Sinogram};
use ddgm_core::rng::{seeded, standard_normal_image};
use ddgm_core::tomo::{ProjectionOperator, TiltGeometry};
use proptest::prelude::*;

fn random_sinogram(seed: u64, a: usize, b: usize) -> Sinogram {
    Sinogram::from_vec(a, b, standard_normal_image(&mut seeded(seed), a, b).into_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_identity(
        h in 1usize..14, w in 1usize..14, angles in 1usize..9, bins in 1usize..20,
        lo in -90.0f64..0.0, span in 0.0f64..179.0, seed in any::<u64>(),
    ) {
        let hi = if angles == 1 { lo } else { lo + span };
        let op = ProjectionOperator::new(TiltGeometry::new(angles, lo, hi, bins).unwrap(), h, w).unwrap();
        let x = standard_normal_image(&mut seeded(seed), h, w);
        let s = random_sinogram(seed ^ 1, angles, bins);
        let ax = op.forward(&x).unwrap();
        let lhs = ax.dot(&s);
        let rhs = x.dot(&op.adjoint(&s).unwrap());
        let scale = (ax.norm_sq() * s.norm_sq()).sqrt().max(1e-300);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn forward_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let op = ProjectionOperator::limited_angle(10, 7).unwrap();
        let x = standard_normal_image(&mut seeded(seed), 10, 10);
        let z = standard_normal_image(&mut seeded(seed ^ 7), 10, 10);
        let mut combo = x.clone();
        combo.scale(a);
        combo.axpy(b, &z);
        let mut want = op.forward(&x).unwrap();
        for v in want.as_mut_slice() { *v *= a; }
        want.axpy(b, &op.forward(&z).unwrap());
        let got = op.forward(&combo).unwrap();
        for (p, q) in got.as_slice().iter().zip(want.as_slice()) {
            prop_assert!((p - q).abs() <= 1e-10 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn axis_aligned_views_preserve_mass(seed in any::<u64>(), h in 1usize..12, w in 1usize..12) {
        let x = standard_normal_image(&mut seeded(seed), h, w);
        for angle in [0.0, 90.0, -90.0] {
            let bins = h.max(w);
            let op = ProjectionOperator::new(TiltGeometry::single(angle, bins), h, w).unwrap();
            let total: f64 = op.forward(&x).unwrap().as_slice().iter().sum();
            prop_assert!((total - x.sum()).abs() <= 1e-9 * (1.0 + x.norm_sq().sqrt()));
        }
    }
}

#[test]
fn oblique_views_preserve_mass_of_centered_objects() {
    // Linear interpolation along a tilted ray redistributes but does not lose
    // mass as long as the object stays away from the detector edges.
    let (h, w) = (32, 32);
    let blob = Image::from_fn(h, w, |i, j| {
        let (dy, dx) = (i as f64 - 15.5, j as f64 - 15.5);
        (-(dx * dx + dy * dy) / 18.0).exp()
    });
    let op = ProjectionOperator::new(TiltGeometry::new(13, -60.0, 60.0, 48).unwrap(), h, w).unwrap();
    let s = op.forward(&blob).unwrap();
    for a in 0..13 {
        let total: f64 = s.row(a).iter().sum();
        assert!((total - blob.sum()).abs() <= 1e-2 * blob.sum(), "view {a}: {total} vs {}", blob.sum());
    }
}
