//! Boundary-layer expansions: the linear constant-coefficient pure-Neumann
//! expansion via the filtering construction (solve for v = H u_0 first, a
//! dissipative hyperbolic problem, then recover u_0 slice by slice), the
//! first- and second-order layer profiles, the quasilinear totally incoming
//! cascade in one space dimension, and the order-zero mixed reduction.

use crate::error::{CoreError, Result};
use crate::grid::{BandedMatrix, DiscreteField, Grid1};
use crate::lopatinski::{Case, ReducedBC};
use crate::model::{HyperbolicParabolicModel, RMatrix};
use hyplab_spectral::{
    decaying_exponential_apply, nullspace, spectral_split, CMatrix, CVector, SpectralSplit,
    DEFAULT_AXIS_TOL, DEFAULT_RANK_TOL,
};
use nalgebra::DVector;
use num_complex::Complex64;

// ------------------------------------------------------- layer profiles

/// A boundary-layer term `(a0(t) + z a1(t)) e^{z A_d}`-style profile stored
/// through its trace amplitudes (values in E_-(A_d)) and the decay matrix.
pub struct LayerDescriptor {
    pub nt: usize,
    pub dt: f64,
    pub amplitude0: Vec<DVector<f64>>,
    pub amplitude1: Option<Vec<DVector<f64>>>,
    pub gap: f64,
    a_d: CMatrix,
    split: SpectralSplit,
}

fn to_cvec(v: &DVector<f64>) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|&x| Complex64::new(x, 0.0)))
}

fn to_rvec(v: &CVector) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().map(|z| z.re))
}

impl LayerDescriptor {
    /// Evaluate the profile at time node `it` and fast variable `z >= 0`.
    pub fn eval(&self, it: usize, z: f64) -> Result<DVector<f64>> {
        let mut out = decaying_exponential_apply(
            &self.a_d,
            &self.split,
            z,
            &to_cvec(&self.amplitude0[it]),
            1e-6,
        )?;
        if let Some(a1) = &self.amplitude1 {
            let extra =
                decaying_exponential_apply(&self.a_d, &self.split, z, &to_cvec(&a1[it]), 1e-6)?;
            out += extra * Complex64::new(z, 0.0);
        }
        Ok(to_rvec(&out))
    }

    pub fn sup_at_z(&self, z: f64) -> f64 {
        (0..self.nt)
            .map(|it| self.eval(it, z).map(|v| v.amax()).unwrap_or(f64::NAN))
            .fold(0.0f64, f64::max)
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.sup_at_z(0.0) <= tol
    }
}

/// Expansion u^eps ~ sum_j eps^j (outer_j(x) + layer_j(x', x_d / eps)).
pub struct ExpansionProfile {
    pub order: usize,
    pub outer_terms: Vec<DiscreteField>,
    /// layer_terms[j] is the layer of order j (u_j^*), absent when zero.
    pub layer_terms: Vec<Option<LayerDescriptor>>,
}

impl ExpansionProfile {
    /// Evaluate the composite approximation at viscosity eps on its grid.
    pub fn composite(&self, eps: f64, n_terms: usize) -> DiscreteField {
        let grid = self.outer_terms[0].grid;
        let n = self.outer_terms[0].n_comp;
        let mut out = DiscreteField::zeros(grid, n);
        for it in 0..grid.nt {
            for ix in 0..grid.nx {
                let mut acc = DVector::zeros(n);
                for j in 0..n_terms {
                    let w = eps.powi(j as i32);
                    if let Some(outer) = self.outer_terms.get(j) {
                        acc += outer.get(it, ix) * w;
                    }
                    if let Some(Some(layer)) = self.layer_terms.get(j) {
                        let z = grid.x(ix) / eps;
                        if let Ok(l) = layer.eval(it, z) {
                            acc += l * w;
                        }
                    }
                }
                out.set(it, ix, &acc);
            }
        }
        out
    }
}

// ------------------------------------------------- filtered outer solve

#[derive(Debug, Clone, Copy)]
pub struct OuterGridSpec {
    pub x_max: f64,
    pub t_max: f64,
    pub nx: usize,
    pub cfl: f64,
}

impl Default for OuterGridSpec {
    fn default() -> Self {
        Self {
            x_max: 6.0,
            t_max: 1.0,
            nx: 400,
            cfl: 0.4,
        }
    }
}

pub struct FilteredOuter {
    /// v = H u_0, the dissipative-problem unknown.
    pub v: DiscreteField,
    pub u0: DiscreteField,
}

fn symmetric_eig(a: &RMatrix) -> (DVector<f64>, RMatrix) {
    let se = nalgebra::SymmetricEigen::new(a.clone());
    (se.eigenvalues, se.eigenvectors)
}

/// Second-order x-derivative of a characteristic component: centered in the
/// interior (the inflow node is prescribed, so no stencil junction forms),
/// one-sided from the interior at the outflow node.
fn char_dx(w: &[f64], ix: usize, nx: usize, h: f64, lam: f64) -> f64 {
    if ix == 0 {
        // only reached for lam < 0 (outflow at x = 0)
        (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h)
    } else if ix + 1 == nx {
        // only reached for lam > 0 (outflow at x = X)
        (3.0 * w[ix] - 4.0 * w[ix - 1] + w[ix - 2]) / (2.0 * h)
    } else {
        let _ = lam;
        (w[ix + 1] - w[ix - 1]) / (2.0 * h)
    }
}

/// Solve the constant-coefficient symmetric problem L u_0 = f with the
/// filtered Neumann-type boundary condition pi_+ d_x u_0 = 0 at x = 0
/// (d = 1). Returns both the dissipative unknown v and u_0.
pub fn solve_filtered_outer(
    model: &HyperbolicParabolicModel,
    f: &dyn Fn(f64, f64) -> DVector<f64>,
    spec: &OuterGridSpec,
) -> Result<FilteredOuter> {
    if model.d != 1 {
        return Err(CoreError::WrongShape(
            "filtered outer solver is one-dimensional; see the cascade for d >= 2 plans".into(),
        ));
    }
    if !model.is_constant_coefficient() {
        return Err(CoreError::WrongShape(
            "filtered construction needs constant coefficients".into(),
        ));
    }
    if !model.symmetric {
        return Err(CoreError::WrongShape(
            "filtered construction needs symmetric A_j".into(),
        ));
    }
    let n = model.n;
    let a = model.base_a[1].clone();
    let (lambda, r) = symmetric_eig(&a);
    if lambda.iter().any(|l| l.abs() < 1e-12) {
        return Err(CoreError::CharacteristicBoundary);
    }
    let rt = r.transpose();
    let a_inv = a.clone().try_inverse().ok_or(CoreError::SingularAd)?;

    let dx = spec.x_max / (spec.nx - 1) as f64;
    let lam_max = lambda.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let nt = ((spec.t_max * lam_max) / (spec.cfl * dx)).ceil() as usize + 1;
    let dt = spec.t_max / (nt - 1) as f64;
    let grid = Grid1 {
        nt,
        nx: spec.nx,
        dt,
        dx,
        t0: 0.0,
        x0: 0.0,
    };

    // g = d_t (A^{-1} f) in characteristic coordinates.
    let af = DiscreteField::sample(grid, n, |t, x| &a_inv * f(t, x));
    let g = af.ddt();
    // inflow data for lambda_k > 0: (R^T A^{-1} f)(t, 0).
    let inflow = |t: f64| -> DVector<f64> { &rt * (&a_inv * f(t, 0.0)) };

    // March w (characteristic coordinates of v) with SSP-RK3 and centered
    // interior stencils; the forcing is interpolated at the stage times.
    let mut w = vec![vec![0.0f64; grid.nx * n]; grid.nt];
    let rhs_half = |it: usize, ix: usize| -> DVector<f64> {
        (&rt * (g.get(it, ix) + g.get(it + 1, ix))) * 0.5
    };
    let tendency = |wrow: &Vec<f64>, rhs: &dyn Fn(usize) -> DVector<f64>, out: &mut Vec<f64>| {
        for k in 0..n {
            let lam = lambda[k];
            let comp: Vec<f64> = (0..grid.nx).map(|ix| wrow[ix * n + k]).collect();
            for ix in 0..grid.nx {
                let inflow_node = if lam > 0.0 {
                    ix == 0
                } else {
                    ix + 1 == grid.nx
                };
                out[ix * n + k] = if inflow_node {
                    0.0
                } else {
                    -lam * char_dx(&comp, ix, grid.nx, dx, lam)
                };
            }
        }
        for ix in 0..grid.nx {
            let r = rhs(ix);
            for k in 0..n {
                let lam = lambda[k];
                let inflow_node = if lam > 0.0 {
                    ix == 0
                } else {
                    ix + 1 == grid.nx
                };
                if !inflow_node {
                    out[ix * n + k] += r[k];
                }
            }
        }
    };
    let mut f1 = vec![0.0; grid.nx * n];
    let mut f2 = vec![0.0; grid.nx * n];
    let mut f3 = vec![0.0; grid.nx * n];
    for it in 0..grid.nt - 1 {
        let r_n = |ix: usize| -> DVector<f64> { &rt * g.get(it, ix) };
        let r_np1 = |ix: usize| -> DVector<f64> { &rt * g.get(it + 1, ix) };
        let r_half = |ix: usize| rhs_half(it, ix);
        tendency(&w[it], &r_n, &mut f1);
        let mut s1: Vec<f64> = w[it].clone();
        for k in 0..grid.nx * n {
            s1[k] += dt * f1[k];
        }
        apply_inflow(&mut s1, &inflow(grid.t(it + 1)), &lambda, grid.nx, n);
        tendency(&s1, &r_np1, &mut f2);
        let mut s2: Vec<f64> = vec![0.0; grid.nx * n];
        for k in 0..grid.nx * n {
            s2[k] = 0.75 * w[it][k] + 0.25 * (s1[k] + dt * f2[k]);
        }
        apply_inflow(&mut s2, &inflow(grid.t(it) + 0.5 * dt), &lambda, grid.nx, n);
        tendency(&s2, &r_half, &mut f3);
        let mut next: Vec<f64> = vec![0.0; grid.nx * n];
        for k in 0..grid.nx * n {
            next[k] = w[it][k] / 3.0 + 2.0 / 3.0 * (s2[k] + dt * f3[k]);
        }
        apply_inflow(&mut next, &inflow(grid.t(it + 1)), &lambda, grid.nx, n);
        w[it + 1] = next;
    }

    // v = R w; u_0 from d_t u_0 = A v by the trapezoid rule per slice.
    let mut v = DiscreteField::zeros(grid, n);
    for it in 0..grid.nt {
        for ix in 0..grid.nx {
            let wv = DVector::from_fn(n, |k, _| w[it][ix * n + k]);
            v.set(it, ix, &(&r * wv));
        }
    }
    let mut u0 = DiscreteField::zeros(grid, n);
    for ix in 0..grid.nx {
        let mut acc = DVector::zeros(n);
        for it in 1..grid.nt {
            let va = v.get(it - 1, ix);
            let vb = v.get(it, ix);
            acc += &a * (va + vb) * (0.5 * dt);
            u0.set(it, ix, &acc);
        }
    }
    Ok(FilteredOuter { v, u0 })
}

fn apply_inflow(row: &mut [f64], data: &DVector<f64>, lambda: &DVector<f64>, nx: usize, n: usize) {
    for k in 0..n {
        if lambda[k] > 0.0 {
            row[k] = data[k]; // x = 0 inflow
        } else {
            row[(nx - 1) * n + k] = 0.0; // x = X inflow (zero data)
        }
    }
}

/// L^2 residual of L u - f with high-order difference stencils.
pub fn linear_residual(
    model: &HyperbolicParabolicModel,
    u: &DiscreteField,
    f: &dyn Fn(f64, f64) -> DVector<f64>,
) -> f64 {
    let a = model.base_a[1].clone();
    let ut = u.ddt();
    let ux = u.ddx();
    let grid = u.grid;
    let mut res = DiscreteField::zeros(grid, u.n_comp);
    for it in 0..grid.nt {
        for ix in 0..grid.nx {
            let r = ut.get(it, ix) + &a * ux.get(it, ix) - f(grid.t(it), grid.x(ix));
            res.set(it, ix, &r);
        }
    }
    res.l2()
}

/// First-order layer profile u_1^*(t, z) = -e^{z A_d} A_d^{-1} d_x u_0(t, 0);
/// requires the numerical trace to lie in E_-(A_d) (the construction
/// enforces it at the continuous level).
pub fn layer_profile_first_order(
    model: &HyperbolicParabolicModel,
    u0: &DiscreteField,
) -> Result<LayerDescriptor> {
    let a = model.base_a[model.d].clone();
    let a_c = model.a_base_c(model.d);
    let split = spectral_split(&a_c, DEFAULT_AXIS_TOL)?;
    let traces = u0.boundary_x_derivative();
    // One-sided boundary stencils keep the measured incoming trace at
    // roughly dx^1.2 times the trace scale; the tolerance tracks that so a
    // genuine O(1) violation of the boundary condition still trips it.
    let tol_rel = 10.0 * u0.grid.dx.powf(1.2);
    // Absolute floor scaled to the run (early-time rows are pure noise).
    let global = traces.iter().map(|t| t.norm()).fold(0.0f64, f64::max);
    let floor = 1e-5 * (1.0 + global);
    let a_inv = a.try_inverse().ok_or(CoreError::SingularAd)?;
    let mut amp = Vec::with_capacity(traces.len());
    for tr in &traces {
        let pi_plus_tr = &split.pi_plus * to_cvec(tr);
        let resid = pi_plus_tr.norm();
        let scale = tr.norm();
        if resid > tol_rel * scale + floor {
            return Err(CoreError::TraceNotInStableSubspace(
                resid / scale.max(1e-300),
            ));
        }
        // amplitude = -pi_- A_d^{-1} trace
        let v = to_cvec(&(-(&a_inv) * tr));
        amp.push(to_rvec(&(&split.pi_minus * v)));
    }
    Ok(LayerDescriptor {
        nt: u0.grid.nt,
        dt: u0.grid.dt,
        amplitude0: amp,
        amplitude1: None,
        gap: split.gap_width,
        a_d: a_c,
        split,
    })
}

/// Next-order terms: the outer corrector solving L u1 = Laplacian u_0 with
/// the same filtered boundary condition, and the decaying second-order layer
/// u_2^*(t, z) = e^{z A}(h(t) + z A^{-1} c'(t)) matching
/// (d_x u1)(t, 0) + (d_z u_2^*)(t, 0) = 0.
///
/// The Laplacian forcing comes from the identity d_x u_0 = A^{-1} f - v, so
/// only one numerical differentiation is applied to computed fields.
pub fn next_order_terms(
    model: &HyperbolicParabolicModel,
    outer: &FilteredOuter,
    f: &dyn Fn(f64, f64) -> DVector<f64>,
    layer1: &LayerDescriptor,
    spec: &OuterGridSpec,
) -> Result<(DiscreteField, LayerDescriptor)> {
    let u0 = &outer.u0;
    let a_full = model.base_a[model.d].clone();
    let a_inv_full = a_full.clone().try_inverse().ok_or(CoreError::SingularAd)?;
    // Lap u_0 = d_x(A^{-1} f) - d_x v.
    let af = DiscreteField::sample(u0.grid, model.n, |t, x| &a_inv_full * f(t, x));
    let lap = af.ddx().sub(&outer.v.ddx())?;
    let grid0 = u0.grid;
    let forcing = move |t: f64, x: f64| -> DVector<f64> {
        // quadratic interpolation in t (the inner solver differentiates the
        // forcing in time, so staircase sampling is not an option); the x
        // grid is shared, nearest index is exact.
        let ix = ((x - grid0.x0) / grid0.dx)
            .round()
            .clamp(0.0, (grid0.nx - 1) as f64) as usize;
        let s = ((t - grid0.t0) / grid0.dt).clamp(0.0, (grid0.nt - 1) as f64);
        let ic = (s.round() as usize).clamp(1, grid0.nt - 2);
        let d = s - ic as f64;
        let (fm, f0, fp) = (lap.get(ic - 1, ix), lap.get(ic, ix), lap.get(ic + 1, ix));
        &f0 + (&fp - &fm) * (0.5 * d) + (&fp - &f0 * 2.0 + &fm) * (0.5 * d * d)
    };
    let mut spec1 = *spec;
    spec1.nx = u0.grid.nx;
    let out = solve_filtered_outer(model, &forcing, &spec1)?;
    let u1 = resample_to(&out.u0, &u0.grid)?;

    // c(t) = layer1 amplitude; q = A^{-1} c'; h = -A^{-1}(m + A^{-1} c')
    let a = model.base_a[model.d].clone();
    let a_inv = a.clone().try_inverse().ok_or(CoreError::SingularAd)?;
    let nt = u0.grid.nt;
    let dt = u0.grid.dt;
    let cdot: Vec<DVector<f64>> = (0..nt)
        .map(|it| {
            if it == 0 {
                (&layer1.amplitude0[1] - &layer1.amplitude0[0]) / dt
            } else if it + 1 == nt {
                (&layer1.amplitude0[it] - &layer1.amplitude0[it - 1]) / dt
            } else {
                (&layer1.amplitude0[it + 1] - &layer1.amplitude0[it - 1]) / (2.0 * dt)
            }
        })
        .collect();
    let m_trace = u1.boundary_x_derivative();
    let a_c = model.a_base_c(model.d);
    let split = spectral_split(&a_c, DEFAULT_AXIS_TOL)?;
    let tol_rel = 20.0 * u0.grid.dx.powf(1.2);
    // A genuine violation of the order-one boundary condition scales with
    // the global data; early-time rows are noise-on-noise, so the guard
    // compares against the global scale.
    let global = m_trace.iter().map(|t| t.norm()).fold(0.0f64, f64::max)
        + cdot.iter().map(|t| t.norm()).fold(0.0f64, f64::max)
        + 1e-300;
    let mut amp0 = Vec::with_capacity(nt);
    let mut amp1 = Vec::with_capacity(nt);
    for it in 0..nt {
        let q = &a_inv * &cdot[it];
        let h_raw = -(&a_inv) * (&m_trace[it] + &q);
        let leak = (&split.pi_plus * to_cvec(&h_raw)).norm();
        if leak > tol_rel * global + 1e-8 {
            return Err(CoreError::TraceNotInStableSubspace(leak / global));
        }
        amp0.push(to_rvec(&(&split.pi_minus * to_cvec(&h_raw))));
        amp1.push(to_rvec(&(&split.pi_minus * to_cvec(&q))));
    }
    let layer2 = LayerDescriptor {
        nt,
        dt,
        amplitude0: amp0,
        amplitude1: Some(amp1),
        gap: split.gap_width,
        a_d: a_c,
        split,
    };
    Ok((u1, layer2))
}

fn resample_to(f: &DiscreteField, grid: &Grid1) -> Result<DiscreteField> {
    if f.grid == *grid {
        return Ok(f.clone());
    }
    if f.grid.nx != grid.nx || (f.grid.dx - grid.dx).abs() > 1e-12 {
        return Err(CoreError::WrongShape("x grids differ".into()));
    }
    // linear interpolation in t
    let mut out = DiscreteField::zeros(*grid, f.n_comp);
    for it in 0..grid.nt {
        let t = grid.t(it);
        let s = ((t - f.grid.t0) / f.grid.dt).clamp(0.0, (f.grid.nt - 1) as f64);
        let i0 = (s.floor() as usize).min(f.grid.nt - 2);
        let w = s - i0 as f64;
        for ix in 0..grid.nx {
            let v = f.get(i0, ix) * (1.0 - w) + f.get(i0 + 1, ix) * w;
            out.set(it, ix, &v);
        }
    }
    Ok(out)
}

// --------------------------------------------- quasilinear cascade (d=1)

#[derive(Debug, Clone, Copy)]
pub struct CascadeSpec {
    pub x_max: f64,
    pub t_max: f64,
    pub nx: usize,
    pub dt_over_dx: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for CascadeSpec {
    fn default() -> Self {
        Self {
            x_max: 6.0,
            t_max: 1.0,
            nx: 600,
            dt_over_dx: 0.5,
            newton_tol: 1e-10,
            newton_max_iter: 50,
        }
    }
}

struct CnTransport<'a> {
    grid: Grid1,
    n: usize,
    /// A(t, x, u) at a node; for linear problems ignores u.
    coeff: &'a dyn Fn(usize, usize, &DVector<f64>) -> Result<RMatrix>,
    /// dA/du contraction J(u)(w) approx d_u A(u)(w, .) applied to a vector,
    /// as the Jacobian contribution; None for linear problems.
    dcoeff: Option<&'a dyn Fn(usize, usize, &DVector<f64>, &DVector<f64>) -> Result<RMatrix>>,
    /// optional zero-order term C(t, x).
    zero_order: Option<&'a dyn Fn(usize, usize) -> RMatrix>,
    rhs: &'a dyn Fn(usize, usize) -> DVector<f64>,
    dirichlet: &'a dyn Fn(f64) -> DVector<f64>,
}

impl<'a> CnTransport<'a> {
    /// Backward-biased second-order stencil weights for d_x at node ix:
    /// list of (node, weight).
    fn stencil(&self, ix: usize) -> Vec<(usize, f64)> {
        let h = self.grid.dx;
        if ix >= 2 {
            vec![
                (ix, 3.0 / (2.0 * h)),
                (ix - 1, -4.0 / (2.0 * h)),
                (ix - 2, 1.0 / (2.0 * h)),
            ]
        } else {
            // ix == 1: centered
            vec![(2, 1.0 / (2.0 * h)), (0, -1.0 / (2.0 * h))]
        }
    }

    fn dx_at(&self, row: &[f64], ix: usize) -> DVector<f64> {
        let n = self.n;
        let mut out = DVector::zeros(n);
        for (node, wgt) in self.stencil(ix) {
            for c in 0..n {
                out[c] += wgt * row[node * n + c];
            }
        }
        out
    }

    /// One Crank-Nicolson step from `prev` (returns the new row).
    fn step(
        &self,
        it: usize,
        prev: &[f64],
        newton: bool,
        tol: f64,
        max_iter: usize,
    ) -> Result<Vec<f64>> {
        let n = self.n;
        let nx = self.grid.nx;
        let dt = self.grid.dt;
        let t_next = self.grid.t(it + 1);
        // explicit part: -(1/2)[A(u^n) d_x u^n + C u^n] + (1/2)(f^n + f^{n+1}) + u^n/dt
        let mut expl = vec![DVector::<f64>::zeros(n); nx];
        for ix in 1..nx {
            let u_n = DVector::from_column_slice(&prev[ix * n..(ix + 1) * n]);
            let a_n = (self.coeff)(it, ix, &u_n)?;
            let mut e = &u_n / dt - (a_n * self.dx_at(prev, ix)) * 0.5;
            if let Some(c) = self.zero_order {
                e -= (c(it, ix) * &u_n) * 0.5;
            }
            e += ((self.rhs)(it, ix) + (self.rhs)(it + 1, ix)) * 0.5;
            expl[ix] = e;
        }
        let mut cur = prev.to_vec();
        let bc = (self.dirichlet)(t_next);
        for c in 0..n {
            cur[c] = bc[c];
        }
        let iterations = if newton { max_iter } else { 1 };
        let kl = 3 * n - 1;
        let ku = 2 * n - 1;
        let mut last_res = f64::INFINITY;
        for iter in 0..iterations {
            // residual
            let mut res = vec![0.0f64; nx * n];
            for c in 0..n {
                res[c] = cur[c] - bc[c];
            }
            for ix in 1..nx {
                let u = DVector::from_column_slice(&cur[ix * n..(ix + 1) * n]);
                let a_u = (self.coeff)(it + 1, ix, &u)?;
                let mut r = &u / dt + (a_u * self.dx_at(&cur, ix)) * 0.5 - &expl[ix];
                if let Some(cterm) = self.zero_order {
                    r += (cterm(it + 1, ix) * &u) * 0.5;
                }
                for c in 0..n {
                    res[ix * n + c] = r[c];
                }
            }
            let res_norm = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = 1.0 + cur.iter().fold(0.0f64, |m, v| m.max(v.abs())) / dt;
            if newton && res_norm <= tol * scale {
                return Ok(cur);
            }
            // Jacobian (banded)
            let mut jac = BandedMatrix::new(nx * n, kl, ku);
            for c in 0..n {
                jac.set(c, c, 1.0);
            }
            for ix in 1..nx {
                let u = DVector::from_column_slice(&cur[ix * n..(ix + 1) * n]);
                let a_u = (self.coeff)(it + 1, ix, &u)?;
                for c in 0..n {
                    jac.add(ix * n + c, ix * n + c, 1.0 / dt);
                }
                for (node, wgt) in self.stencil(ix) {
                    for rr in 0..n {
                        for cc in 0..n {
                            jac.add(ix * n + rr, node * n + cc, 0.5 * wgt * a_u[(rr, cc)]);
                        }
                    }
                }
                if let Some(cterm) = self.zero_order {
                    let cm = cterm(it + 1, ix);
                    for rr in 0..n {
                        for cc in 0..n {
                            jac.add(ix * n + rr, ix * n + cc, 0.5 * cm[(rr, cc)]);
                        }
                    }
                }
                if let Some(dc) = self.dcoeff {
                    // d/du [A(u) w] with w = d_x u held, columns k: dA/du_k w
                    let w = self.dx_at(&cur, ix);
                    let j = dc(it + 1, ix, &u, &w)?;
                    for rr in 0..n {
                        for cc in 0..n {
                            jac.add(ix * n + rr, ix * n + cc, 0.5 * j[(rr, cc)]);
                        }
                    }
                }
            }
            jac.factor()?;
            let mut delta = res.clone();
            jac.solve(&mut delta);
            // damped update
            let mut alpha = 1.0f64;
            if newton && res_norm > last_res && iter > 0 {
                alpha = 0.5;
            }
            for (c, d) in cur.iter_mut().zip(delta.iter()) {
                *c -= alpha * d;
            }
            last_res = res_norm;
            if !newton {
                break;
            }
            if iter + 1 == iterations {
                return Err(CoreError::NonlinearSolveDiverged(format!(
                    "Newton residual {res_norm:.3e} after {iterations} iterations at t = {t_next}"
                )));
            }
        }
        Ok(cur)
    }

    fn run(&self, newton: bool, tol: f64, max_iter: usize) -> Result<DiscreteField> {
        let n = self.n;
        let mut field = DiscreteField::zeros(self.grid, n);
        let mut prev = vec![0.0f64; self.grid.nx * n];
        let bc0 = (self.dirichlet)(self.grid.t(0));
        for c in 0..n {
            prev[c] = bc0[c];
        }
        for ix in 0..self.grid.nx {
            let v = DVector::from_column_slice(&prev[ix * n..(ix + 1) * n]);
            field.set(0, ix, &v);
        }
        for it in 0..self.grid.nt - 1 {
            let next = self.step(it, &prev, newton, tol, max_iter)?;
            for ix in 0..self.grid.nx {
                let v = DVector::from_column_slice(&next[ix * n..(ix + 1) * n]);
                field.set(it + 1, ix, &v);
            }
            prev = next;
        }
        Ok(field)
    }
}

/// Build the cascade u_0, u_1, ... u_{order-1} for the totally incoming
/// quasilinear problem in d = 1 (each term: solve the boundary trace by
/// time integration, then the dissipative Dirichlet problem inward).
pub fn quasilinear_incoming_expansion(
    model: &HyperbolicParabolicModel,
    f: &dyn Fn(f64, f64) -> DVector<f64>,
    order: usize,
    spec: &CascadeSpec,
) -> Result<ExpansionProfile> {
    if model.d != 1 {
        return Err(CoreError::WrongShape(
            "cascade implemented for d = 1".into(),
        ));
    }
    if !model.totally_incoming {
        return Err(CoreError::WrongShape(
            "cascade requires a totally incoming model".into(),
        ));
    }
    if order == 0 || order > 3 {
        return Err(CoreError::WrongShape(
            "cascade supports orders 1..=3".into(),
        ));
    }
    let n = model.n;
    let dx = spec.x_max / (spec.nx - 1) as f64;
    let dt = spec.dt_over_dx * dx;
    let nt = (spec.t_max / dt).ceil() as usize + 1;
    let dt = spec.t_max / (nt - 1) as f64;
    let grid = Grid1 {
        nt,
        nx: spec.nx,
        dt,
        dx,
        t0: 0.0,
        x0: 0.0,
    };

    // u_0 trace: d_t v = f(t, 0) (A_0 = I), then the interior solve.
    let trace0 = integrate_trace(&grid, &|t| f(t, 0.0));
    let coeff0 = |_it: usize, _ix: usize, u: &DVector<f64>| -> Result<RMatrix> {
        let a = model.eval_a(1, u.as_slice())?;
        Ok(a)
    };
    let dcoeff0 = |_it: usize, _ix: usize, u: &DVector<f64>, w: &DVector<f64>| -> Result<RMatrix> {
        // d/du [A(u) w]: columns k = (dA/du_k) w
        let mut j = RMatrix::zeros(n, n);
        for k in 0..n {
            let da = model.jacobian_a(1, u.as_slice(), k)?;
            let col = da * w;
            for rr in 0..n {
                j[(rr, k)] = col[rr];
            }
        }
        Ok(j)
    };
    let rhs0 = |it: usize, ix: usize| f(grid.t(it), grid.x(ix));
    let dir0 = |t: f64| interp_trace(&trace0, &grid, t);
    let solver0 = CnTransport {
        grid,
        n,
        coeff: &coeff0,
        dcoeff: Some(&dcoeff0),
        zero_order: None,
        rhs: &rhs0,
        dirichlet: &dir0,
    };
    let u0 = solver0.run(true, spec.newton_tol, spec.newton_max_iter)?;
    check_positive_ad(model, &u0)?;

    let mut outer_terms = vec![u0];
    if order >= 2 {
        let u0 = &outer_terms[0];
        let lap0 = u0.d2dx2();
        let du0 = u0.ddx();
        // trace: d_t w = Lap u_0 (t, 0) since d_x u_0 and d_x u_1 vanish there
        let trace1 = integrate_trace(&grid, &|t| {
            let it = ((t - grid.t0) / grid.dt).round() as usize;
            lap0.get(it.min(grid.nt - 1), 0)
        });
        let u0c = u0.clone();
        let du0c = du0.clone();
        let coeff1 = move |it: usize, ix: usize, _u: &DVector<f64>| -> Result<RMatrix> {
            model.eval_a(1, u0c.at(it, ix))
        };
        let u0z = outer_terms[0].clone();
        let zero1 = move |it: usize, ix: usize| -> RMatrix {
            // C(t, x) w = d_u A(u_0)(w, d_x u_0): columns k = (dA/du_k) d_x u_0
            let u = u0z.get(it, ix);
            let w = du0c.get(it, ix);
            let mut c = RMatrix::zeros(n, n);
            for k in 0..n {
                if let Ok(da) = model.jacobian_a(1, u.as_slice(), k) {
                    let col = da * &w;
                    for rr in 0..n {
                        c[(rr, k)] = col[rr];
                    }
                }
            }
            c
        };
        let rhs1 = |it: usize, ix: usize| lap0.get(it, ix);
        let dir1 = |t: f64| interp_trace(&trace1, &grid, t);
        let solver1 = CnTransport {
            grid,
            n,
            coeff: &coeff1,
            dcoeff: None,
            zero_order: Some(&zero1),
            rhs: &rhs1,
            dirichlet: &dir1,
        };
        let u1 = solver1.run(false, spec.newton_tol, 1)?;
        outer_terms.push(u1);
    }
    if order >= 3 {
        let u0 = outer_terms[0].clone();
        let u1 = outer_terms[1].clone();
        let lap1 = u1.d2dx2();
        let du0 = u0.ddx();
        let du1 = u1.ddx();
        // rhs = Lap u_1 - d_u A(u_0)(u_1, d_x u_1) - d^2_u A(u_0)(u_1, u_1, d_x u_0)
        let rhs_field = {
            let mut f2 = DiscreteField::zeros(grid, n);
            for it in 0..grid.nt {
                for ix in 0..grid.nx {
                    let u0v = u0.get(it, ix);
                    let u1v = u1.get(it, ix);
                    let mut r = lap1.get(it, ix);
                    r -= model.du_a_apply(1, u0v.as_slice(), &u1v, &du1.get(it, ix))?;
                    // second derivative via symmetric difference of jacobians
                    let h = 1e-4 * (1.0 + u0v.amax());
                    let up: Vec<f64> = u0v.iter().zip(u1v.iter()).map(|(a, b)| a + h * b).collect();
                    let dn: Vec<f64> = u0v.iter().zip(u1v.iter()).map(|(a, b)| a - h * b).collect();
                    let second = (model.eval_a(1, &up)? + model.eval_a(1, &dn)?
                        - model.eval_a(1, u0v.as_slice())? * 2.0)
                        / (h * h);
                    r -= second * du0.get(it, ix);
                    f2.set(it, ix, &r);
                }
            }
            f2
        };
        let trace2 = integrate_trace(&grid, &|t| {
            let it = (((t - grid.t0) / grid.dt).round() as usize).min(grid.nt - 1);
            rhs_field.get(it, 0)
        });
        let u0c = u0.clone();
        let coeff2 = move |it: usize, ix: usize, _u: &DVector<f64>| -> Result<RMatrix> {
            model.eval_a(1, u0c.at(it, ix))
        };
        let du0c = du0.clone();
        let u0z = u0.clone();
        let zero2 = move |it: usize, ix: usize| -> RMatrix {
            let u = u0z.get(it, ix);
            let w = du0c.get(it, ix);
            let mut c = RMatrix::zeros(n, n);
            for k in 0..n {
                if let Ok(da) = model.jacobian_a(1, u.as_slice(), k) {
                    let col = da * &w;
                    for rr in 0..n {
                        c[(rr, k)] = col[rr];
                    }
                }
            }
            c
        };
        let rhs2 = |it: usize, ix: usize| rhs_field.get(it, ix);
        let dir2 = |t: f64| interp_trace(&trace2, &grid, t);
        let solver2 = CnTransport {
            grid,
            n,
            coeff: &coeff2,
            dcoeff: None,
            zero_order: Some(&zero2),
            rhs: &rhs2,
            dirichlet: &dir2,
        };
        let u2 = solver2.run(false, spec.newton_tol, 1)?;
        outer_terms.push(u2);
    }
    // Totally incoming: every layer term vanishes.
    let layer_terms = (0..=order).map(|_| None).collect();
    Ok(ExpansionProfile {
        order,
        outer_terms,
        layer_terms,
    })
}

fn check_positive_ad(model: &HyperbolicParabolicModel, u: &DiscreteField) -> Result<()> {
    // Sample the run: A_d(u) must stay positive definite (eigenvalues > 0).
    let grid = u.grid;
    let step_t = (grid.nt / 16).max(1);
    let step_x = (grid.nx / 16).max(1);
    for it in (0..grid.nt).step_by(step_t) {
        for ix in (0..grid.nx).step_by(step_x) {
            let a = model.eval_a(model.d, u.at(it, ix))?;
            let sym = (&a + a.transpose()) * 0.5;
            let ev = nalgebra::SymmetricEigen::new(sym).eigenvalues;
            if ev.iter().any(|&l| l <= 0.0) {
                return Err(CoreError::AdNotPositive(format!(
                    "at (t, x) = ({}, {})",
                    grid.t(it),
                    grid.x(ix)
                )));
            }
        }
    }
    Ok(())
}

fn integrate_trace(grid: &Grid1, rhs: &dyn Fn(f64) -> DVector<f64>) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(grid.nt);
    let mut acc: Option<DVector<f64>> = None;
    for it in 0..grid.nt {
        match acc.take() {
            None => {
                let z = rhs(grid.t(0)) * 0.0;
                out.push(z.clone());
                acc = Some(z);
            }
            Some(prev) => {
                let t0 = grid.t(it - 1);
                let t1 = grid.t(it);
                let next = &prev + (rhs(t0) + rhs(t1)) * (0.5 * grid.dt);
                out.push(next.clone());
                acc = Some(next);
            }
        }
    }
    out
}

fn interp_trace(trace: &[DVector<f64>], grid: &Grid1, t: f64) -> DVector<f64> {
    let s = ((t - grid.t0) / grid.dt).clamp(0.0, (trace.len() - 1) as f64);
    let i0 = (s.floor() as usize).min(trace.len() - 2);
    let w = s - i0 as f64;
    &trace[i0] * (1.0 - w) + &trace[i0 + 1] * w
}

/// Residual of the viscous operator applied to a composite expansion:
/// ||E(u^a) - f||_{L2} with E(u) = d_t u + A(u) d_x u - eps d_x^2 u.
pub fn viscous_residual(
    model: &HyperbolicParabolicModel,
    u: &DiscreteField,
    f: &dyn Fn(f64, f64) -> DVector<f64>,
    eps: f64,
) -> Result<f64> {
    let ut = u.ddt();
    let ux = u.ddx();
    let uxx = u.d2dx2();
    let grid = u.grid;
    let mut res = DiscreteField::zeros(grid, u.n_comp);
    for it in 0..grid.nt {
        for ix in 0..grid.nx {
            let a = model.eval_a(1, u.at(it, ix))?;
            let r = ut.get(it, ix) + a * ux.get(it, ix)
                - uxx.get(it, ix) * eps
                - f(grid.t(it), grid.x(ix));
            res.set(it, ix, &r);
        }
    }
    Ok(res.l2())
}

// ------------------------------------------- order-zero mixed reduction

#[derive(Debug, Clone)]
pub struct OrderZeroLayerSolve {
    /// The layer amplitude: d_z u_1^*(0) in E_- (case ii) or u_0^*(0) in X
    /// (case i).
    pub amplitude: DVector<f64>,
    pub solvability_residual: f64,
}

/// Case (ii): find d_z u_1^*|_{z=0} in E_-(A_d) with
/// Gamma_2(d_x u_0|_0 + amplitude) = g_2; case (i): find u_0^*(0) in X with
/// Gamma_1(u_0(0) + amplitude) = g_1. Least squares on the subspace; the
/// reported residual vanishes exactly when the reduced conditions hold.
pub fn order_zero_mixed_reduction(
    model: &HyperbolicParabolicModel,
    reduced: &ReducedBC,
    boundary_data: &DVector<f64>,
    outer_trace: &DVector<f64>,
    residual_tol: Option<f64>,
) -> Result<OrderZeroLayerSolve> {
    let ad = model.a_base_c(model.d);
    let split = spectral_split(&ad, DEFAULT_AXIS_TOL)?;
    let (gamma, subspace) = match reduced.classification.case {
        Case::CaseI => {
            // X = A_d^{-1} ker(Gamma_2|E_-)
            let b = model.gamma2_c() * &split.stable_basis;
            let ker = nullspace(&b, DEFAULT_RANK_TOL);
            let ad_inv = ad.clone().try_inverse().ok_or(CoreError::SingularAd)?;
            let x = hyplab_spectral::orthonormal_columns(
                &(ad_inv * (&split.stable_basis * ker.basis)),
                1e-12,
            );
            (model.gamma1_c(), x)
        }
        _ => (model.gamma2_c(), split.stable_basis.clone()),
    };
    // target = data - Gamma * trace_term
    let trace_c = to_cvec(outer_trace);
    let data_c = to_cvec(boundary_data);
    let target = data_c - &gamma * trace_c;
    let mapped = &gamma * &subspace;
    // least squares via normal equations (small, well conditioned by
    // orthonormal subspace columns)
    let gram = mapped.adjoint() * &mapped;
    let coeffs = match gram.try_inverse() {
        Some(gi) => gi * (mapped.adjoint() * &target),
        None => {
            return Err(CoreError::TransversalityFailure(
                "layer solve normal equations singular".into(),
            ))
        }
    };
    let amplitude_c = &subspace * &coeffs;
    let residual = (&gamma * &amplitude_c - target).norm();
    if let Some(tol) = residual_tol {
        if residual > tol {
            return Err(CoreError::SolvabilityResidualLarge(residual));
        }
    }
    Ok(OrderZeroLayerSolve {
        amplitude: to_rvec(&amplitude_c.column(0).into_owned()),
        solvability_residual: residual,
    })
}

// -------------------------------------- filtered outer solve, d = 2

/// Space-time field on a (t, x_1, x_d) grid, x_1 periodic:
/// `values[((it * n1 + i1) * nd + id) * n_comp + c]`.
pub struct DiscreteField2 {
    pub nt: usize,
    pub n1: usize,
    pub nd: usize,
    pub dt: f64,
    pub d1: f64,
    pub dd: f64,
    pub n_comp: usize,
    pub values: Vec<f64>,
}

impl DiscreteField2 {
    pub fn zeros(
        nt: usize,
        n1: usize,
        nd: usize,
        dt: f64,
        d1: f64,
        dd: f64,
        n_comp: usize,
    ) -> Self {
        Self {
            nt,
            n1,
            nd,
            dt,
            d1,
            dd,
            n_comp,
            values: vec![0.0; nt * n1 * nd * n_comp],
        }
    }
    #[inline]
    pub fn idx(&self, it: usize, i1: usize, id: usize) -> usize {
        ((it * self.n1 + i1) * self.nd + id) * self.n_comp
    }
    pub fn get(&self, it: usize, i1: usize, id: usize) -> DVector<f64> {
        let b = self.idx(it, i1, id);
        DVector::from_column_slice(&self.values[b..b + self.n_comp])
    }
    pub fn set(&mut self, it: usize, i1: usize, id: usize, v: &DVector<f64>) {
        let b = self.idx(it, i1, id);
        self.values[b..b + self.n_comp].copy_from_slice(v.as_slice());
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OuterGridSpec2 {
    /// Tangential period (x_1 lives on [0, x1_period)).
    pub x1_period: f64,
    pub xd_max: f64,
    pub t_max: f64,
    pub n1: usize,
    pub nd: usize,
    pub cfl: f64,
}

impl Default for OuterGridSpec2 {
    fn default() -> Self {
        Self {
            x1_period: 2.0,
            xd_max: 3.0,
            t_max: 0.5,
            n1: 32,
            nd: 90,
            cfl: 0.35,
        }
    }
}

pub struct FilteredOuter2 {
    pub v: DiscreteField2,
    pub u0: DiscreteField2,
}

/// Constant-coefficient filtered construction in two space dimensions:
/// solve the dissipative problem for v = H u_0 (inflow prescribed on the
/// incoming characteristics of A_d at x_d = 0), then recover u_0 slice by
/// slice from d_t u_0 + A_1 d_1 u_0 = A_d v. The tangential direction is
/// periodic; data must be supported away from x_d = x_d_max.
pub fn solve_filtered_outer_2d(
    model: &HyperbolicParabolicModel,
    f: &dyn Fn(f64, f64, f64) -> DVector<f64>,
    spec: &OuterGridSpec2,
) -> Result<FilteredOuter2> {
    if model.d != 2 {
        return Err(CoreError::WrongShape(
            "two-dimensional solver needs d = 2".into(),
        ));
    }
    if !model.is_constant_coefficient() || !model.symmetric {
        return Err(CoreError::WrongShape(
            "filtered construction needs constant symmetric coefficients".into(),
        ));
    }
    let n = model.n;
    let a1 = model.base_a[1].clone();
    let ad = model.base_a[2].clone();
    let (lam_d, r_d) = symmetric_eig(&ad);
    if lam_d.iter().any(|l| l.abs() < 1e-12) {
        return Err(CoreError::CharacteristicBoundary);
    }
    let rdt = r_d.transpose();
    let ad_inv = ad.clone().try_inverse().ok_or(CoreError::SingularAd)?;

    let d1 = spec.x1_period / spec.n1 as f64;
    let dd = spec.xd_max / (spec.nd - 1) as f64;
    let rho1 = nalgebra::SymmetricEigen::new(a1.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, l| m.max(l.abs()));
    let rho_d = lam_d.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let dt_cfl = spec.cfl / (rho1 / d1 + rho_d / dd).max(1e-12);
    let nt = (spec.t_max / dt_cfl).ceil() as usize + 1;
    let dt = spec.t_max / (nt - 1) as f64;

    let (n1, nd) = (spec.n1, spec.nd);
    let x1 = |i1: usize| d1 * i1 as f64;
    let xd = |id: usize| dd * id as f64;
    let t_of = |it: usize| dt * it as f64;

    // g = d_t(A_d^{-1} f) + A_1 d_1(A_d^{-1} f), evaluated spectrally
    // accurately enough by sampling at the stage times (analytic closure).
    let hq = 1e-5;
    let g_at = |t: f64, x1v: f64, xdv: f64| -> DVector<f64> {
        let ft = (&ad_inv * f(t + hq, x1v, xdv) - &ad_inv * f(t - hq, x1v, xdv)) / (2.0 * hq);
        let fx = (&ad_inv * f(t, x1v + hq, xdv) - &ad_inv * f(t, x1v - hq, xdv)) / (2.0 * hq);
        ft + &a1 * fx
    };
    let inflow = |t: f64, x1v: f64| -> DVector<f64> { &rdt * (&ad_inv * f(t, x1v, 0.0)) };

    // tendency of the dissipative problem on a state row (length n1*nd*n)
    let stride1 = nd * n;
    let dx1 = |row: &[f64], i1: usize, id: usize, c: usize| -> f64 {
        let ip = (i1 + 1) % n1;
        let im = (i1 + n1 - 1) % n1;
        (row[ip * stride1 + id * n + c] - row[im * stride1 + id * n + c]) / (2.0 * d1)
    };
    let dxd = |row: &[f64], i1: usize, id: usize, c: usize| -> f64 {
        let at = |j: usize| row[i1 * stride1 + j * n + c];
        if id == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * dd)
        } else if id + 1 == nd {
            (3.0 * at(id) - 4.0 * at(id - 1) + at(id - 2)) / (2.0 * dd)
        } else {
            (at(id + 1) - at(id - 1)) / (2.0 * dd)
        }
    };
    let apply_char_bc = |row: &mut [f64], t: f64| {
        for i1 in 0..n1 {
            // x_d = 0: incoming characteristics of A_d prescribed
            let node = DVector::from_column_slice(&row[i1 * stride1..i1 * stride1 + n]);
            let mut w = &rdt * node;
            let data = inflow(t, x1(i1));
            for k in 0..n {
                if lam_d[k] > 0.0 {
                    w[k] = data[k];
                }
            }
            let back = &r_d * w;
            row[i1 * stride1..i1 * stride1 + n].copy_from_slice(back.as_slice());
            // x_d = max: zero inflow for characteristics entering from far
            let b = i1 * stride1 + (nd - 1) * n;
            let node = DVector::from_column_slice(&row[b..b + n]);
            let mut w = &rdt * node;
            for k in 0..n {
                if lam_d[k] < 0.0 {
                    w[k] = 0.0;
                }
            }
            let back = &r_d * w;
            row[b..b + n].copy_from_slice(back.as_slice());
        }
    };
    let tendency = |row: &[f64], t: f64, out: &mut [f64]| {
        for i1 in 0..n1 {
            for id in 0..nd {
                let mut d1v = DVector::zeros(n);
                let mut ddv = DVector::zeros(n);
                for c in 0..n {
                    d1v[c] = dx1(row, i1, id, c);
                    ddv[c] = dxd(row, i1, id, c);
                }
                let g = g_at(t, x1(i1), xd(id));
                let val = g - &a1 * d1v - &ad * ddv;
                out[i1 * stride1 + id * n..i1 * stride1 + id * n + n]
                    .copy_from_slice(val.as_slice());
            }
        }
    };

    let mut v = DiscreteField2::zeros(nt, n1, nd, dt, d1, dd, n);
    let mut row = vec![0.0f64; n1 * nd * n];
    let mut k1 = vec![0.0f64; n1 * nd * n];
    let mut k2 = vec![0.0f64; n1 * nd * n];
    let mut k3 = vec![0.0f64; n1 * nd * n];
    for it in 0..nt - 1 {
        let t = t_of(it);
        tendency(&row, t, &mut k1);
        let mut s1: Vec<f64> = row.iter().zip(k1.iter()).map(|(a, b)| a + dt * b).collect();
        apply_char_bc(&mut s1, t + dt);
        tendency(&s1, t + dt, &mut k2);
        let mut s2: Vec<f64> = (0..row.len())
            .map(|k| 0.75 * row[k] + 0.25 * (s1[k] + dt * k2[k]))
            .collect();
        apply_char_bc(&mut s2, t + 0.5 * dt);
        tendency(&s2, t + 0.5 * dt, &mut k3);
        let mut next: Vec<f64> = (0..row.len())
            .map(|k| row[k] / 3.0 + 2.0 / 3.0 * (s2[k] + dt * k3[k]))
            .collect();
        apply_char_bc(&mut next, t + dt);
        row = next;
        for i1 in 0..n1 {
            for id in 0..nd {
                let b = i1 * stride1 + id * n;
                let val = DVector::from_column_slice(&row[b..b + n]);
                v.set(it + 1, i1, id, &val);
            }
        }
    }

    // u_0 per x_d slice: d_t u_0 + A_1 d_1 u_0 = A_d v (periodic in x_1).
    let mut u0 = DiscreteField2::zeros(nt, n1, nd, dt, d1, dd, n);
    let stride_slice = n;
    for id in 0..nd {
        let mut slice = vec![0.0f64; n1 * n];
        let rhs_at = |it_lo: usize, frac: f64, i1: usize| -> DVector<f64> {
            let lo = v.get(it_lo, i1, id);
            let hi = v.get((it_lo + 1).min(nt - 1), i1, id);
            (&ad) * (lo * (1.0 - frac) + hi * frac)
        };
        let tendency_slice = |row: &[f64], it_lo: usize, frac: f64, out: &mut [f64]| {
            for i1 in 0..n1 {
                let ip = (i1 + 1) % n1;
                let im = (i1 + n1 - 1) % n1;
                let mut der = DVector::zeros(n);
                for c in 0..n {
                    der[c] = (row[ip * stride_slice + c] - row[im * stride_slice + c]) / (2.0 * d1);
                }
                let val = rhs_at(it_lo, frac, i1) - &a1 * der;
                out[i1 * stride_slice..i1 * stride_slice + n].copy_from_slice(val.as_slice());
            }
        };
        let mut q1 = vec![0.0f64; n1 * n];
        let mut q2 = vec![0.0f64; n1 * n];
        let mut q3 = vec![0.0f64; n1 * n];
        for it in 0..nt - 1 {
            tendency_slice(&slice, it, 0.0, &mut q1);
            let s1: Vec<f64> = slice
                .iter()
                .zip(q1.iter())
                .map(|(a, b)| a + dt * b)
                .collect();
            tendency_slice(&s1, it, 1.0, &mut q2);
            let s2: Vec<f64> = (0..slice.len())
                .map(|k| 0.75 * slice[k] + 0.25 * (s1[k] + dt * q2[k]))
                .collect();
            tendency_slice(&s2, it, 0.5, &mut q3);
            let next: Vec<f64> = (0..slice.len())
                .map(|k| slice[k] / 3.0 + 2.0 / 3.0 * (s2[k] + dt * q3[k]))
                .collect();
            slice = next;
            for i1 in 0..n1 {
                let b = i1 * stride_slice;
                let val = DVector::from_column_slice(&slice[b..b + n]);
                u0.set(it + 1, i1, id, &val);
            }
        }
    }
    Ok(FilteredOuter2 { v, u0 })
}
