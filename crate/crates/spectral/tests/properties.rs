//! Property suites for the spectral primitives: projector identities on
//! random well-gapped matrices, glancing classification consistency with the
//! eigenvalues, and agreement of the subspace-restricted exponential with a
//! dense matrix exponential.

use hyplab_spectral::{
    decaying_exponential_apply, eig, expm, spectral_split, CMatrix, CVector, SpectralError,
    DEFAULT_AXIS_TOL,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn gapped_matrix_strategy() -> impl Strategy<Value = CMatrix> {
    // diag(+-[1, 2]) + 0.15 * random: eigenvalues stay off the axis.
    (2usize..7, any::<u64>()).prop_map(|(n, seed)| {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(
                0.15 * rng.random_range(-1.0..1.0),
                0.15 * rng.random_range(-1.0..1.0),
            )
        });
        for i in 0..n {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            m[(i, i)] += Complex64::new(sign * rng.random_range(1.0..2.0), 0.0);
        }
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn projector_identities(m in gapped_matrix_strategy()) {
        let n = m.nrows();
        let s = spectral_split(&m, DEFAULT_AXIS_TOL).unwrap();
        let scale = m.norm().max(1.0);
        let id = CMatrix::identity(n, n);
        prop_assert!(((&s.pi_minus + &s.pi_plus) - &id).norm() < 1e-9 * scale);
        prop_assert!((&s.pi_minus * &s.pi_minus - &s.pi_minus).norm() < 1e-9 * scale);
        prop_assert!((&s.pi_plus * &s.pi_plus - &s.pi_plus).norm() < 1e-9 * scale);
        prop_assert!(((&m * &s.pi_minus) - (&s.pi_minus * &m * &s.pi_minus)).norm() < 1e-9 * scale);
        prop_assert_eq!(s.stable_dim() + s.unstable_dim(), n);
    }

    #[test]
    fn glancing_flag_matches_eigenvalues(m in gapped_matrix_strategy(), shift in 0.0f64..2.5) {
        // Push one eigenvalue toward the axis by subtracting its real part.
        let (ev, _) = eig(&m).unwrap();
        let closest = ev
            .iter()
            .min_by(|a, b| a.re.abs().partial_cmp(&b.re.abs()).unwrap())
            .cloned()
            .unwrap();
        let n = m.nrows();
        let shifted = &m - CMatrix::identity(n, n) * Complex64::new(closest.re * (1.0 - shift.min(1.0)), 0.0);
        let (ev2, _) = eig(&shifted).unwrap();
        let gap = ev2.iter().map(|e| e.re.abs()).fold(f64::INFINITY, f64::min);
        let tol = DEFAULT_AXIS_TOL * shifted.norm();
        match spectral_split(&shifted, DEFAULT_AXIS_TOL) {
            Ok(_) => prop_assert!(gap >= tol * 0.999),
            Err(SpectralError::GlancingOrCharacteristic { .. }) => prop_assert!(gap < tol * 1.001),
            Err(e) => return Err(TestCaseError::fail(format!("unexpected error {e}"))),
        }
    }

    #[test]
    fn restricted_exponential_matches_dense_expm(m in gapped_matrix_strategy(), z in 0.0f64..10.0, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let s = spectral_split(&m, DEFAULT_AXIS_TOL).unwrap();
        let k = s.stable_dim();
        prop_assume!(k > 0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let coeffs = CVector::from_fn(k, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let v = &s.stable_basis * coeffs;
        prop_assume!(v.norm() > 1e-6);
        let fast = decaying_exponential_apply(&m, &s, z, &v, 1e-9).unwrap();
        let expm_full = expm(&(&m * Complex64::new(z, 0.0)));
        let dense = &expm_full * &v;
        // The dense oracle itself carries eps * ||e^{zM}|| rounding from the
        // unstable directions; allow exactly that much beyond 1e-9 relative.
        let tol = 1e-9 * dense.norm().max(v.norm()).max(1.0)
            + 100.0 * f64::EPSILON * expm_full.norm() * v.norm();
        prop_assert!((fast - dense).norm() <= tol);
    }
}
