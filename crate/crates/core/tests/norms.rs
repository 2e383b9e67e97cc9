use pseudodisc::norms::{lp, sup, w1p, w2p, Region};
use pseudodisc::{Complex64, Discretization, ModalMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random scalar map whose mode coefficients decay like `w^deg`, so the
/// same distribution is sampled at every resolution.
fn random_map(disc: &Discretization<f64>, w: f64, rng: &mut ChaCha8Rng) -> ModalMap<f64> {
    let space = disc.u_space();
    let coeffs = (0..space.dim())
        .map(|i| {
            let (m, l) = space.locate(i);
            let deg = m.unsigned_abs() as i32 + 2 * l as i32;
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * w.powi(deg)
        })
        .collect();
    ModalMap::from_coeffs(1, space, coeffs)
}

#[test]
fn sobolev_constant_is_resolution_independent() {
    let mut chat = vec![];
    for d in [8, 12, 16] {
        let disc = Discretization::<f64>::with_degree(d);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut c: f64 = 0.0;
        for _ in 0..100 {
            let u = random_map(&disc, 0.7, &mut rng);
            let u = u.scale(Complex64::new(1.0 / w1p(&disc, &u, 4.0, Region::Disc).unwrap(), 0.0));
            c = c.max(sup(&disc, &u, Region::Disc).unwrap());
        }
        assert!(c.is_finite() && c > 0.0);
        chat.push(c);
    }
    let hi = chat.iter().cloned().fold(0.0, f64::max);
    let lo = chat.iter().cloned().fold(f64::MAX, f64::min);
    assert!(hi < 2.0 * lo, "{chat:?}");
}

#[test]
fn restriction_never_increases_norms() {
    let disc = Discretization::<f64>::with_degree(10);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let u = random_map(&disc, 0.9, &mut rng);
        for p in [2.5, 4.0, 6.0] {
            let full = lp(&disc, &u, p, Region::Disc).unwrap();
            let full1 = w1p(&disc, &u, p, Region::Disc).unwrap();
            for tau in [0.1, 0.3, 0.6] {
                let half = lp(&disc, &u, p, Region::Half1(tau)).unwrap();
                let both = lp(&disc, &u, p, Region::Overlap(tau)).unwrap();
                assert!(both <= half && half <= full);
                assert!(lp(&disc, &u, p, Region::Half2(tau)).unwrap() <= full);
                assert!(w1p(&disc, &u, p, Region::Overlap(tau)).unwrap() <= full1);
            }
        }
    }
}

#[test]
fn norms_are_homogeneous() {
    let disc = Discretization::<f64>::with_degree(10);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = random_map(&disc, 0.9, &mut rng);
    for lambda in [Complex64::new(-2.5, 0.0), Complex64::new(0.0, 3.0), Complex64::new(0.6, -0.8)] {
        let v = u.scale(lambda);
        for region in [Region::Disc, Region::Overlap(0.3)] {
            let pairs = [
                (lp(&disc, &v, 4.0, region).unwrap(), lp(&disc, &u, 4.0, region).unwrap()),
                (w1p(&disc, &v, 4.0, region).unwrap(), w1p(&disc, &u, 4.0, region).unwrap()),
                (w2p(&disc, &v, 4.0, region).unwrap(), w2p(&disc, &u, 4.0, region).unwrap()),
                (sup(&disc, &v, region).unwrap(), sup(&disc, &u, region).unwrap()),
            ];
            for (a, b) in pairs {
                assert!((a - lambda.norm() * b).abs() <= 1e-13 * a.max(1.0), "{a} vs {}", lambda.norm() * b);
            }
        }
    }
}
