//! Laplace-Fourier symbols of the boundary-value problem: the hyperbolic
//! boundary symbol, the 2N x 2N parabolic first-order symbol G(zeta), its
//! block diagonalization into a hyperbolic block H and a parabolic block P,
//! the low-frequency Evans function and its degeneracy rate.

use crate::error::{CoreError, Result};
use crate::frequency::Frequency;
use crate::model::HyperbolicParabolicModel;
use hyplab_spectral::{
    opnorm2, spectral_split, subspace_det, CMatrix, SpectralError, SpectralSplit, SubspaceBasis,
    DEFAULT_AXIS_TOL,
};
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn check_freq(model: &HyperbolicParabolicModel, zeta: &Frequency) -> Result<()> {
    if zeta.eta.len() != model.d - 1 {
        return Err(CoreError::WrongShape(format!(
            "frequency has {} tangential components, model d-1 = {}",
            zeta.eta.len(),
            model.d - 1
        )));
    }
    Ok(())
}

/// (gamma + i tau) I + sum_j i eta_j A_j, the tangential part of the symbol.
pub fn tangential_symbol(model: &HyperbolicParabolicModel, zeta: &Frequency) -> Result<CMatrix> {
    check_freq(model, zeta)?;
    let n = model.n;
    let mut m = CMatrix::identity(n, n) * Complex64::new(zeta.gamma, zeta.tau);
    for (j, &etaj) in zeta.eta.iter().enumerate() {
        m += model.a_base_c(j + 1) * (I * etaj);
    }
    Ok(m)
}

/// A_d^{-1} ((gamma + i tau) I + sum i eta_j A_j); its unstable space E_+
/// carries the decaying solutions of the first-order boundary ODE.
pub fn interior_pencil(model: &HyperbolicParabolicModel, zeta: &Frequency) -> Result<CMatrix> {
    let ad = model.a_base_c(model.d);
    let ad_inv = ad.try_inverse().ok_or(CoreError::SingularAd)?;
    Ok(ad_inv * tangential_symbol(model, zeta)?)
}

/// Homogeneous degree-one boundary symbol
/// `-A_d^{-1} (gamma + i tau + sum_j i eta_j A_j)`.
pub fn hyperbolic_boundary_symbol(
    model: &HyperbolicParabolicModel,
    zeta: &Frequency,
) -> Result<CMatrix> {
    let m = interior_pencil(model, zeta)?;
    // For gamma > 0 with symmetric coefficients the tangential factor is
    // invertible; verify since downstream reductions rely on it.
    if zeta.gamma > 0.0 && model.symmetric {
        let t = tangential_symbol(model, zeta)?;
        let smin_ok = t
            .svd(false, false)
            .singular_values
            .iter()
            .all(|&s| s > 1e-14 * zeta.rho().max(1.0));
        if !smin_ok {
            return Err(CoreError::Other(
                "tangential symbol unexpectedly singular for gamma > 0".into(),
            ));
        }
    }
    Ok(-m)
}

/// The 2N x 2N first-order parabolic symbol
/// `G(zeta) = [0, I; i tau + gamma + A(i eta) + |eta|^2, A_d]`.
pub fn parabolic_symbol_g(model: &HyperbolicParabolicModel, zeta: &Frequency) -> Result<CMatrix> {
    check_freq(model, zeta)?;
    let n = model.n;
    let eta2: f64 = zeta.eta.iter().map(|x| x * x).sum();
    let lower_left =
        tangential_symbol(model, zeta)? + CMatrix::identity(n, n) * Complex64::new(eta2, 0.0);
    let ad = model.a_base_c(model.d);
    let mut g = CMatrix::zeros(2 * n, 2 * n);
    g.view_mut((0, n), (n, n))
        .copy_from(&CMatrix::identity(n, n));
    g.view_mut((n, 0), (n, n)).copy_from(&lower_left);
    g.view_mut((n, n), (n, n)).copy_from(&ad);
    Ok(g)
}

fn min_abs_eig_ad(model: &HyperbolicParabolicModel) -> Result<f64> {
    let (ev, _) = hyplab_spectral::eig(&model.a_base_c(model.d))?;
    Ok(ev.iter().map(|e| e.norm()).fold(f64::INFINITY, f64::min))
}

/// Default small-frequency radius: 0.1 * min |eig(A_d)|, guaranteeing the
/// H/P eigenvalue clusters of G(zeta) stay separated.
pub fn r_small(model: &HyperbolicParabolicModel) -> Result<f64> {
    Ok(0.1 * min_abs_eig_ad(model)?)
}

/// Exact invariant-subspace splitting of G(zeta) into the N eigenvalues
/// converging to 0 (block H) and the N converging to spec(A_d) (block P),
/// in the graph normalization S = [I, S12; S21, I] with H = S21.
#[derive(Debug, Clone)]
pub struct BlockDiagonalization {
    pub h: CMatrix,
    pub p: CMatrix,
    pub s: CMatrix,
    pub s12: CMatrix,
    pub s21: CMatrix,
    /// ||S^{-1} G S - diag(H, P)|| / ||G||.
    pub residual: f64,
}

pub fn block_diagonalize(
    model: &HyperbolicParabolicModel,
    zeta: &Frequency,
) -> Result<BlockDiagonalization> {
    let n = model.n;
    let rho = zeta.rho();
    let r = r_small(model)?;
    if rho > r + 1e-15 {
        return Err(CoreError::ClustersNotSeparated(format!(
            "rho = {rho:.3e} exceeds r_small = {r:.3e}"
        )));
    }
    let g = parabolic_symbol_g(model, zeta)?;
    let ad = model.a_base_c(model.d);
    if rho == 0.0 {
        // H = 0, P = A_d, S = [I, A_d^{-1}; 0, I].
        let ad_inv = ad.clone().try_inverse().ok_or(CoreError::SingularAd)?;
        let mut s = CMatrix::identity(2 * n, 2 * n);
        s.view_mut((0, n), (n, n)).copy_from(&ad_inv);
        return Ok(BlockDiagonalization {
            h: CMatrix::zeros(n, n),
            p: ad,
            s,
            s12: ad_inv,
            s21: CMatrix::zeros(n, n),
            residual: 0.0,
        });
    }
    let split_radius = 0.5 * min_abs_eig_ad(model)?;
    let mut form = hyplab_spectral::schur(&g)?;
    let near_zero: Vec<bool> = form
        .eigenvalues()
        .iter()
        .map(|e| e.norm() < split_radius)
        .collect();
    let k = near_zero.iter().filter(|&&b| b).count();
    if k != n {
        return Err(CoreError::ClustersNotSeparated(format!(
            "{k} eigenvalues near zero, expected {n}"
        )));
    }
    let k = hyplab_spectral::schur_reorder(&mut form, &near_zero);
    let q1 = form.q.columns(0, k).into_owned();
    let q1a = q1.view((0, 0), (n, n)).into_owned();
    let q1b = q1.view((n, 0), (n, n)).into_owned();
    let q1a_inv = q1a
        .try_inverse()
        .ok_or_else(|| CoreError::ClustersNotSeparated("H-subspace is not a graph".into()))?;
    let s21 = q1b * q1a_inv; // = H by the (1,1) block of G S = S diag(H, P)

    let mut form_p = hyplab_spectral::schur(&g)?;
    let select_p: Vec<bool> = form_p
        .eigenvalues()
        .iter()
        .map(|e| e.norm() >= split_radius)
        .collect();
    let kp = hyplab_spectral::schur_reorder(&mut form_p, &select_p);
    debug_assert_eq!(kp, n);
    let q2 = form_p.q.columns(0, kp).into_owned();
    let q2a = q2.view((0, 0), (n, n)).into_owned();
    let q2b = q2.view((n, 0), (n, n)).into_owned();
    let q2b_inv = q2b
        .try_inverse()
        .ok_or_else(|| CoreError::ClustersNotSeparated("P-subspace is not a graph".into()))?;
    let s12 = q2a * q2b_inv;

    let lower_left = g.view((n, 0), (n, n)).into_owned();
    let h = s21.clone();
    let p = &lower_left * &s12 + &ad;

    let mut s = CMatrix::identity(2 * n, 2 * n);
    s.view_mut((0, n), (n, n)).copy_from(&s12);
    s.view_mut((n, 0), (n, n)).copy_from(&s21);
    let s_inv = s
        .clone()
        .try_inverse()
        .ok_or_else(|| CoreError::ClustersNotSeparated("conjugator not invertible".into()))?;
    let mut block = CMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&h);
    block.view_mut((n, n), (n, n)).copy_from(&p);
    let residual = (&s_inv * &g * &s - block).norm() / g.norm().max(1e-300);
    Ok(BlockDiagonalization {
        h,
        p,
        s,
        s12,
        s21,
        residual,
    })
}

/// Conjugator of the semiclassical symbol G = [0, I; M, A] in the form of a
/// contraction fixed point: T = [I, A^{-1}; -A^{-1} M + tau1, I + tau2].
#[derive(Debug, Clone)]
pub struct AmConjugation {
    pub t: CMatrix,
    pub tau1: CMatrix,
    pub tau2: CMatrix,
    pub h: CMatrix,
    pub p: CMatrix,
    pub residual: f64,
}

/// `beta` plays (beta_0, .., beta_{d-1}, gamma') and `p3` is the zeroth
/// order perturbation; both must be small for the contraction to converge.
pub fn lemma_am_conjugator(
    model: &HyperbolicParabolicModel,
    beta: &Frequency,
    p3: &CMatrix,
) -> Result<AmConjugation> {
    check_freq(model, beta)?;
    let n = model.n;
    if p3.nrows() != n || p3.ncols() != n {
        return Err(CoreError::WrongShape("p3 must be N x N".into()));
    }
    // M(p, beta) = i beta_0 + gamma' + sum A_j i beta_j + p3 + sum beta_j^2
    let beta_sq: f64 = beta.eta.iter().map(|x| x * x).sum();
    let mut m = CMatrix::identity(n, n) * Complex64::new(beta.gamma + beta_sq, beta.tau);
    for (j, &bj) in beta.eta.iter().enumerate() {
        m += model.a_base_c(j + 1) * (I * bj);
    }
    m += p3;
    let a = model.a_base_c(model.d);
    let a_inv = a.clone().try_inverse().ok_or(CoreError::SingularAd)?;
    let h0 = -&a_inv * &m;

    let scale = m.norm().max(1e-300);
    let mut tau1 = CMatrix::zeros(n, n);
    let mut tau2 = CMatrix::zeros(n, n);
    let mut converged = false;
    for _ in 0..200 {
        let new_tau1 = {
            let h = &h0 + &tau1;
            &a_inv * (&h * &h)
        };
        let inner = (CMatrix::identity(n, n) + &tau2)
            .try_inverse()
            .ok_or_else(|| CoreError::ContractionDiverged("I + tau2 singular".into()))?;
        let new_tau2 = &m * &a_inv * inner * &a_inv;
        let delta = (&new_tau1 - &tau1).norm() + (&new_tau2 - &tau2).norm();
        tau1 = new_tau1;
        tau2 = new_tau2;
        if tau1.norm() > 1e3 * scale.max(1.0) {
            return Err(CoreError::ContractionDiverged(format!(
                "tau1 norm {} with |beta| = {}",
                tau1.norm(),
                beta.rho()
            )));
        }
        if delta < 1e-15 * scale.max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(CoreError::ContractionDiverged(
            "no fixed point after 200 iterations".into(),
        ));
    }
    let h = &h0 + &tau1;
    let p = &a + &a * &tau2;
    let mut t = CMatrix::identity(2 * n, 2 * n);
    t.view_mut((0, n), (n, n)).copy_from(&a_inv);
    t.view_mut((n, 0), (n, n)).copy_from(&h);
    t.view_mut((n, n), (n, n))
        .copy_from(&(CMatrix::identity(n, n) + &tau2));
    let mut g = CMatrix::zeros(2 * n, 2 * n);
    g.view_mut((0, n), (n, n))
        .copy_from(&CMatrix::identity(n, n));
    g.view_mut((n, 0), (n, n)).copy_from(&m);
    g.view_mut((n, n), (n, n)).copy_from(&a);
    let t_inv = t
        .clone()
        .try_inverse()
        .ok_or_else(|| CoreError::ContractionDiverged("T not invertible".into()))?;
    let mut block = CMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&h);
    block.view_mut((n, n), (n, n)).copy_from(&p);
    let residual = (&t_inv * &g * &t - block).norm() / g.norm().max(1e-300);
    Ok(AmConjugation {
        t,
        tau1,
        tau2,
        h,
        p,
        residual,
    })
}

/// Unstable-space basis of the interior pencil, with gamma = 0 limits by
/// Richardson extrapolation of the spectral projector over
/// gamma in {1e-2, 1e-3, 1e-4}. The flag reports that the limit required
/// extrapolation (glancing or otherwise axis-touching spectrum).
pub fn eplus_basis(model: &HyperbolicParabolicModel, zeta: &Frequency) -> Result<(CMatrix, bool)> {
    let m = interior_pencil(model, zeta)?;
    match spectral_split(&m, DEFAULT_AXIS_TOL) {
        Ok(split) => Ok((split.unstable_basis, false)),
        Err(SpectralError::GlancingOrCharacteristic { .. }) => {
            let levels = [1e-2, 1e-3, 1e-4];
            let mut projs = Vec::new();
            for g in levels {
                let zg = zeta.with_gamma(zeta.gamma + g);
                let mg = interior_pencil(model, &zg)?;
                let split = spectral_split(&mg, DEFAULT_AXIS_TOL).map_err(|e| {
                    CoreError::GlancingLimitFailure(format!("split at gamma = {g}: {e}"))
                })?;
                projs.push(split.pi_plus);
            }
            // pi(gamma) ~ pi0 + c gamma; levels in ratio 10.
            let pi0 = (&projs[2] * Complex64::new(10.0, 0.0) - &projs[1])
                * Complex64::new(1.0 / 9.0, 0.0);
            let trace_re: f64 = pi0.diagonal().iter().map(|z| z.re).sum();
            let k = trace_re.round();
            if k < 0.0 || (trace_re - k).abs() > 0.2 {
                return Err(CoreError::GlancingLimitFailure(format!(
                    "extrapolated projector trace {trace_re:.3} is not near an integer"
                )));
            }
            let k = k as usize;
            let svd = pi0.clone().svd(true, false);
            let u = svd.u.expect("svd u");
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&i, &j| {
                svd.singular_values[j]
                    .partial_cmp(&svd.singular_values[i])
                    .unwrap()
            });
            if k > 0 && svd.singular_values[order[k - 1]] < 0.5 {
                return Err(CoreError::GlancingLimitFailure(
                    "extrapolated projector has no clear rank".into(),
                ));
            }
            let mut basis = CMatrix::zeros(model.n, k);
            for (col, &idx) in order.iter().take(k).enumerate() {
                basis.column_mut(col).copy_from(&u.column(idx));
            }
            Ok((basis, true))
        }
        Err(e) => Err(e.into()),
    }
}

/// Spectral split of the interior pencil (direct, no extrapolation).
pub fn interior_split(model: &HyperbolicParabolicModel, zeta: &Frequency) -> Result<SpectralSplit> {
    Ok(spectral_split(
        &interior_pencil(model, zeta)?,
        DEFAULT_AXIS_TOL,
    )?)
}

/// Low-frequency Evans function: closed form det H(zeta) together with the
/// definitional subspace determinant det(E^-(zeta), ker Gamma) and their
/// ratio (bounded away from 0 and infinity on the small-frequency region).
#[derive(Debug, Clone)]
pub struct EvansValue {
    pub det_h: Complex64,
    pub det_definitional: Complex64,
    pub ratio: f64,
}

pub fn evans(model: &HyperbolicParabolicModel, zeta: &Frequency) -> Result<EvansValue> {
    let n = model.n;
    let bd = block_diagonalize(model, zeta)?;
    let det_h = bd.h.determinant();
    let g = parabolic_symbol_g(model, zeta)?;
    let split = spectral_split(&g, DEFAULT_AXIS_TOL)?;
    let e_minus = SubspaceBasis::new(split.stable_basis.clone());
    // ker Gamma with Gamma U = u_2: span of the first-block coordinate axes.
    let mut ker = CMatrix::zeros(2 * n, n);
    for i in 0..n {
        ker[(i, i)] = Complex64::new(1.0, 0.0);
    }
    let det_def = subspace_det(&e_minus, &SubspaceBasis::new(ker))?;
    let ratio = det_h.norm() / det_def.norm().max(1e-300);
    Ok(EvansValue {
        det_h,
        det_definitional: det_def,
        ratio,
    })
}

/// Degeneracy rate R(zeta) = 1 / ||H(zeta)^{-1}|| = sigma_min(H); zero
/// exactly when H is singular.
pub fn degeneracy_r(model: &HyperbolicParabolicModel, zeta: &Frequency) -> Result<f64> {
    if zeta.rho() == 0.0 {
        return Err(CoreError::ZeroFrequency);
    }
    let bd = block_diagonalize(model, zeta)?;
    let svd = bd.h.svd(false, false);
    Ok(svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min))
}

/// Stable-subspace dimension of G(zeta); equals N for gamma > 0
/// (consistent splitting).
pub fn g_stable_dim(model: &HyperbolicParabolicModel, zeta: &Frequency) -> Result<usize> {
    let g = parabolic_symbol_g(model, zeta)?;
    Ok(spectral_split(&g, DEFAULT_AXIS_TOL)?.stable_dim())
}

/// Operator norm helper re-exported for report code.
pub fn opnorm(m: &CMatrix) -> f64 {
    opnorm2(m)
}
