//! Property tests for the boundary-condition reduction over randomly
//! generated symmetric models: the defining annihilations, rank counts and
//! case dispatch must hold for any admissible (Gamma_1, Gamma_2) split.

use hyplab_core::lopatinski::{classify_case, reduce, Case};
use hyplab_core::model::{load_model_str, RMatrix};
use hyplab_core::symbols::block_diagonalize;
use hyplab_core::Frequency;
use hyplab_spectral::{eig, rank, spectral_split, CMatrix, DEFAULT_AXIS_TOL, DEFAULT_RANK_TOL};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn to_c(m: &RMatrix) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| Complex64::new(m[(i, j)], 0.0))
}

/// Build a random d = 1 model with symmetric, well-gapped A_d and a random
/// admissible boundary split; returns None if the draw is inadmissible.
fn random_model(seed: u64) -> Option<hyplab_core::HyperbolicParabolicModel> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..6usize);
    // symmetric A_d = Q D Q^T with eigenvalues away from zero
    let mut b = RMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    let q = b.qr().q();
    let mut d = RMatrix::zeros(n, n);
    for i in 0..n {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        d[(i, i)] = sign * rng.random_range(0.5..2.0);
    }
    let ad = &q * &d * q.transpose();
    let n_dirichlet = rng.random_range(0..=n);
    let n_neumann = n - n_dirichlet;
    let mut g1 = RMatrix::zeros(n_dirichlet, n);
    let mut g2 = RMatrix::zeros(n_neumann, n);
    for i in 0..n_dirichlet {
        for j in 0..n {
            g1[(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    for i in 0..n_neumann {
        for j in 0..n {
            g2[(i, j)] = rng.random_range(-1.0..1.0);
        }
    }
    let matrices_json = |m: &RMatrix| -> String {
        let vals: Vec<String> = (0..n * n)
            .map(|k| format!("{}", m[(k / n, k % n)]))
            .collect();
        format!("[{}]", vals.join(","))
    };
    let rows_json = |m: &RMatrix| -> String {
        let rows: Vec<String> = (0..m.nrows())
            .map(|i| {
                let r: Vec<String> = (0..n).map(|j| format!("{}", m[(i, j)])).collect();
                format!("[{}]", r.join(","))
            })
            .collect();
        format!("[{}]", rows.join(","))
    };
    let id = RMatrix::identity(n, n);
    let incoming = (0..n).filter(|&i| d[(i, i)] > 0.0).count();
    let totally_incoming = incoming == n;
    let text = format!(
        r#"{{"name": "random", "d": 1, "N": {n},
            "matrices": [{}, {}],
            "gamma1": {}, "gamma2": {},
            "baseState": [{}],
            "flags": {{"symmetric": true, "totallyIncoming": {totally_incoming}}},
            "params": {{}}}}"#,
        matrices_json(&id),
        matrices_json(&ad),
        rows_json(&g1),
        rows_json(&g2),
        vec!["0.0"; n].join(","),
    );
    load_model_str(&text).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn reduction_invariants_hold_on_random_models(seed in any::<u64>()) {
        let m = match random_model(seed) {
            Some(m) => m,
            None => return Ok(()), // rank-deficient draw, skipped
        };
        let cls = classify_case(&m).unwrap();
        prop_assert_eq!(cls.n_dirichlet + cls.n_neumann, m.n);
        prop_assert_eq!(cls.incoming + cls.outgoing, m.n);
        let reduced = match reduce(&m) {
            Ok(r) => r,
            Err(_) => return Ok(()), // genuine transversality failure
        };
        let split = spectral_split(&m.a_base_c(1), DEFAULT_AXIS_TOL).unwrap();
        match cls.case {
            Case::CaseII | Case::BoundaryCase => {
                let gt2 = reduced.gamma_tilde2.as_ref().unwrap();
                // rank = N_neumann - outgoing
                prop_assert_eq!(gt2.nrows(), cls.n_neumann - cls.outgoing);
                prop_assert_eq!(rank(gt2, DEFAULT_RANK_TOL), gt2.nrows());
                // defining annihilation: M Gamma_2 b = 0 on E_-
                let ann = gt2 * &split.stable_basis;
                prop_assert!(ann.norm() < 1e-12 * (1.0 + gt2.norm()));
                // annihilator rows orthonormal
                let mm = reduced.m_annihilator.as_ref().unwrap();
                let gram = mm * mm.adjoint();
                prop_assert!((gram - CMatrix::identity(mm.nrows(), mm.nrows())).norm() < 1e-10);
            }
            Case::CaseI => {
                let gt1 = reduced.gamma_tilde1.as_ref().unwrap();
                prop_assert_eq!(gt1.nrows(), cls.incoming);
                prop_assert_eq!(rank(gt1, DEFAULT_RANK_TOL), cls.incoming);
                // K annihilates Gamma_1 X by construction
                let k = reduced.k_annihilator.as_ref().unwrap();
                let g2c = to_c(&m.gamma2);
                let ker = hyplab_spectral::nullspace(&(&g2c * &split.stable_basis), DEFAULT_RANK_TOL);
                let ad_inv = m.a_base_c(1).try_inverse().unwrap();
                let x = ad_inv * (&split.stable_basis * ker.basis);
                prop_assert!((k * to_c(&m.gamma1) * x).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn p_block_stays_positive_for_incoming_models(seed in any::<u64>(), rho in 0.001f64..0.05) {
        // For totally incoming models the parabolic block of the
        // first-order symbol keeps a positive real spectrum at small rho.
        let m = match random_model(seed) {
            Some(m) if m.totally_incoming => m,
            _ => return Ok(()),
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
        let dir = Frequency::d1(rng.random_range(-1.0..1.0), rng.random_range(0.0..1.0));
        let dir = match dir.hat() { Some(h) => h, None => return Ok(()) };
        let z = dir.scaled(rho.min(0.9 * hyplab_core::symbols::r_small(&m).unwrap()));
        if z.rho() == 0.0 { return Ok(()); }
        let bd = match block_diagonalize(&m, &z) { Ok(b) => b, Err(_) => return Ok(()) };
        let (ev_p, _) = eig(&bd.p).unwrap();
        let (ev_ad, _) = eig(&m.a_base_c(1)).unwrap();
        let floor = ev_ad.iter().map(|e| e.re).fold(f64::INFINITY, f64::min);
        for e in ev_p {
            prop_assert!(e.re > 0.5 * floor, "P eigenvalue {e} below half the A_d floor {floor}");
        }
        prop_assert!(bd.residual < 1e-9);
    }
}
