//! Direct finite-difference solvers for the viscous problem with Neumann
//! boundary conditions (d = 1), the discontinuous-coefficient transmission
//! system solved on the whole line, the incoming hyperbolic limit, and the
//! exact constant-coefficient resolvent ODE of the block-diagonalized
//! symbol.

use crate::error::{CoreError, Result};
use crate::expansion::{quasilinear_incoming_expansion, CascadeSpec};
use crate::frequency::Frequency;
use crate::grid::{BandedMatrix, DiscreteField, Grid1};
use crate::model::{HyperbolicParabolicModel, RMatrix};
use crate::symbols::block_diagonalize;
use hyplab_spectral::{eig, opnorm2, solve_lyapunov_stable, CMatrix, CVector};
use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scheme {
    BackwardEulerUpwind,
    CrankNicolsonCentered,
}

#[derive(Debug, Clone, Copy)]
pub struct ViscousSpec {
    pub x_max: f64,
    pub t_max: f64,
    /// Layer-resolving default: dx = eps / 4.
    pub dx: Option<f64>,
    pub scheme: Scheme,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for ViscousSpec {
    fn default() -> Self {
        Self {
            x_max: 6.0,
            t_max: 1.0,
            dx: None,
            scheme: Scheme::CrankNicolsonCentered,
            newton_tol: 1e-10,
            newton_max_iter: 50,
        }
    }
}

pub struct ViscousRun {
    pub eps: f64,
    pub scheme: Scheme,
    pub solution: DiscreteField,
}

/// Implicit solve of d_t u + A(u) d_x u - eps d_x^2 u = f on [0, X] with the
/// discrete Neumann condition (ghost u_{-1} = u_1) at x = 0, second-order
/// extrapolation outflow at x = X, u = 0 at t = 0.
pub fn viscous_solve_1d(
    model: &HyperbolicParabolicModel,
    eps: f64,
    f: &dyn Fn(f64, f64) -> DVector<f64>,
    spec: &ViscousSpec,
) -> Result<ViscousRun> {
    if model.d != 1 {
        return Err(CoreError::WrongShape(
            "viscous solver is one-dimensional".into(),
        ));
    }
    let n = model.n;
    let dx = spec.dx.unwrap_or(eps / 4.0);
    if dx > eps / 4.0 + 1e-12 {
        return Err(CoreError::SolverFailure(format!(
            "dx = {dx} must resolve the layer: dx <= eps/4 = {}",
            eps / 4.0
        )));
    }
    let nx = (spec.x_max / dx).round() as usize + 1;
    let dx = spec.x_max / (nx - 1) as f64;
    let dt = dx / 2.0;
    let nt = (spec.t_max / dt).ceil() as usize + 1;
    let dt = spec.t_max / (nt - 1) as f64;
    let grid = Grid1 {
        nt,
        nx,
        dt,
        dx,
        t0: 0.0,
        x0: 0.0,
    };
    // Mixed-sign A_d needs the support to stay inside the domain for the
    // outflow extrapolation to be valid; totally incoming does not.
    let monitor_support = !model.totally_incoming;

    let mut field = DiscreteField::zeros(grid, n);
    let mut prev = vec![0.0f64; nx * n];
    // the upwind-biased scheme reaches two blocks to the left
    let kl = 3 * n - 1;
    let ku = 2 * n - 1;
    let crank = spec.scheme == Scheme::CrankNicolsonCentered;
    let theta = if crank { 0.5 } else { 1.0 };

    // spatial operator rows at a given state row
    let op = |row: &[f64], it: usize| -> Result<Vec<f64>> {
        let mut out = vec![0.0f64; nx * n];
        for ix in 0..nx {
            let u = DVector::from_column_slice(&row[ix * n..(ix + 1) * n]);
            let a = model.eval_a(1, u.as_slice())?;
            let (dc, d2) = stencil_values(row, ix, nx, n, dx, crank);
            let val = a * dc - d2 * eps - f(grid.t(it), grid.x(ix));
            for c in 0..n {
                out[ix * n + c] = val[c];
            }
        }
        Ok(out)
    };

    for it in 0..nt - 1 {
        let expl = if crank { Some(op(&prev, it)?) } else { None };
        let mut cur = prev.clone();
        let mut last_res = f64::INFINITY;
        let quasi = !model.is_constant_coefficient();
        let iters = if quasi { spec.newton_max_iter } else { 1 };
        for iter in 0..=iters {
            // residual F(cur)
            let opn = op(&cur, it + 1)?;
            let mut res = vec![0.0f64; nx * n];
            for k in 0..nx * n {
                res[k] = (cur[k] - prev[k]) / dt + theta * opn[k];
                if let Some(e) = &expl {
                    res[k] += 0.5 * e[k];
                }
            }
            let res_norm = res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = 1.0 / dt * (1.0 + cur.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            if res_norm <= spec.newton_tol * scale && iter > 0 {
                break;
            }
            if iter == iters {
                if quasi && res_norm > spec.newton_tol * scale * 100.0 {
                    return Err(CoreError::NonlinearSolveDiverged(format!(
                        "residual {res_norm:.3e} at t = {}",
                        grid.t(it + 1)
                    )));
                }
                break;
            }
            // Jacobian
            let mut jac = BandedMatrix::new(nx * n, kl, ku);
            for ix in 0..nx {
                let u = DVector::from_column_slice(&cur[ix * n..(ix + 1) * n]);
                let a = model.eval_a(1, u.as_slice())?;
                for c in 0..n {
                    jac.add(ix * n + c, ix * n + c, 1.0 / dt);
                }
                let entries = stencil_structure(ix, nx, dx, crank);
                for (node, wc, w2) in entries {
                    for rr in 0..n {
                        for cc in 0..n {
                            let v = theta * a[(rr, cc)] * wc;
                            jac.add(ix * n + rr, node * n + cc, v);
                        }
                        jac.add(ix * n + rr, node * n + rr, -theta * eps * w2);
                    }
                }
                if quasi {
                    let (dc, _) = stencil_values(&cur, ix, nx, n, dx, crank);
                    for k in 0..n {
                        let da = model.jacobian_a(1, u.as_slice(), k)?;
                        let col = da * &dc;
                        for rr in 0..n {
                            jac.add(ix * n + rr, ix * n + k, theta * col[rr]);
                        }
                    }
                }
            }
            jac.factor()?;
            let mut delta = res.clone();
            jac.solve(&mut delta);
            let alpha = if quasi && res_norm > last_res && iter > 0 {
                0.5
            } else {
                1.0
            };
            for (c, d) in cur.iter_mut().zip(delta.iter()) {
                *c -= alpha * d;
            }
            last_res = res_norm;
        }
        if cur.iter().any(|v| !v.is_finite() || v.abs() > 1e12) {
            return Err(CoreError::SolverFailure("viscous solve blew up".into()));
        }
        prev = cur;
        for ix in 0..nx {
            let v = DVector::from_column_slice(&prev[ix * n..(ix + 1) * n]);
            field.set(it + 1, ix, &v);
        }
    }
    if monitor_support {
        let max = field.linf();
        for it in 0..nt {
            for ix in nx - 5..nx {
                let v = field.get(it, ix).amax();
                if v > 1e-8 * max.max(1e-300) {
                    return Err(CoreError::SupportReachedOutflow);
                }
            }
        }
    }
    Ok(ViscousRun {
        eps,
        scheme: spec.scheme,
        solution: field,
    })
}

/// (centered or upwind first derivative, second derivative) at a node with
/// the Neumann ghost at ix = 0 and the extrapolation ghost at ix = nx - 1.
fn stencil_values(
    row: &[f64],
    ix: usize,
    nx: usize,
    n: usize,
    dx: f64,
    centered: bool,
) -> (DVector<f64>, DVector<f64>) {
    let v = |j: usize, c: usize| row[j * n + c];
    let mut dc = DVector::zeros(n);
    let mut d2 = DVector::zeros(n);
    for c in 0..n {
        if ix == 0 {
            // ghost u_{-1} = u_1
            dc[c] = 0.0;
            d2[c] = 2.0 * (v(1, c) - v(0, c)) / (dx * dx);
        } else if ix + 1 == nx {
            // ghost u_nx = 2 u_{nx-1} - u_{nx-2}
            dc[c] = (v(ix, c) - v(ix - 1, c)) / dx;
            d2[c] = 0.0;
        } else {
            dc[c] = if centered {
                (v(ix + 1, c) - v(ix - 1, c)) / (2.0 * dx)
            } else if ix >= 2 {
                (3.0 * v(ix, c) - 4.0 * v(ix - 1, c) + v(ix - 2, c)) / (2.0 * dx)
            } else {
                (v(ix, c) - v(ix - 1, c)) / dx
            };
            d2[c] = (v(ix + 1, c) - 2.0 * v(ix, c) + v(ix - 1, c)) / (dx * dx);
        }
    }
    (dc, d2)
}

/// Stencil connectivity as (node, first-derivative weight, second-derivative
/// weight) triples matching `stencil_values`.
fn stencil_structure(ix: usize, nx: usize, dx: f64, centered: bool) -> Vec<(usize, f64, f64)> {
    let h = dx;
    let h2 = dx * dx;
    if ix == 0 {
        vec![(0, 0.0, -2.0 / h2), (1, 0.0, 2.0 / h2)]
    } else if ix + 1 == nx {
        vec![(ix, 1.0 / h, 0.0), (ix - 1, -1.0 / h, 0.0)]
    } else if centered {
        vec![
            (ix - 1, -1.0 / (2.0 * h), 1.0 / h2),
            (ix, 0.0, -2.0 / h2),
            (ix + 1, 1.0 / (2.0 * h), 1.0 / h2),
        ]
    } else if ix >= 2 {
        vec![
            (ix - 2, 1.0 / (2.0 * h), 0.0),
            (ix - 1, -4.0 / (2.0 * h), 1.0 / h2),
            (ix, 3.0 / (2.0 * h), -2.0 / h2),
            (ix + 1, 0.0, 1.0 / h2),
        ]
    } else {
        vec![
            (ix - 1, -1.0 / h, 1.0 / h2),
            (ix, 1.0 / h, -2.0 / h2),
            (ix + 1, 0.0, 1.0 / h2),
        ]
    }
}

// ----------------------------------------------------- fornet transmission

pub struct FornetRun {
    /// Viscous transmission solution folded to the half line, components
    /// (v_+, v_-).
    pub viscous: DiscreteField,
    /// Hyperbolic limit with the same boundary conditions, solved by the
    /// boundary-Cauchy method.
    pub limit: DiscreteField,
}

#[derive(Debug, Clone, Copy)]
pub struct FornetSpec {
    pub x_max: f64,
    pub t_max: f64,
    pub dx: Option<f64>,
}

impl Default for FornetSpec {
    fn default() -> Self {
        Self {
            x_max: 8.0,
            t_max: 1.5,
            dx: None,
        }
    }
}

/// Solve the discontinuous-coefficient scalar problem on the whole line
/// (speed -alpha for x < 0, beta for x >= 0) with viscosity eps, fold it to
/// the 2x2 transmission system on the half line, and solve the hyperbolic
/// limit problem with the same mixed boundary conditions via the trace ODE.
pub fn fornet_solve(
    alpha: f64,
    beta: f64,
    eps: f64,
    f_plus: &dyn Fn(f64, f64) -> f64,
    f_minus: &dyn Fn(f64, f64) -> f64,
    h_plus: &dyn Fn(f64) -> f64,
    h_minus: &dyn Fn(f64) -> f64,
    spec: &FornetSpec,
) -> Result<FornetRun> {
    if alpha <= 0.0 || beta <= 0.0 {
        return Err(CoreError::WrongShape("fornet needs alpha, beta > 0".into()));
    }
    if ((h_plus)(0.0) - (h_minus)(0.0)).abs() > 1e-12 {
        return Err(CoreError::WrongShape(
            "incompatible data: h_+(0) != h_-(0)".into(),
        ));
    }
    let dx = spec.dx.unwrap_or(eps / 4.0).min(eps / 4.0);
    let nhalf = (spec.x_max / dx).round() as usize;
    let dx = spec.x_max / nhalf as f64;
    let nx_full = 2 * nhalf + 1; // node nhalf is x = 0
    let dt = dx / 2.0;
    let nt = (spec.t_max / dt).ceil() as usize + 1;
    let dt = spec.t_max / (nt - 1) as f64;

    let a_of = |ix: usize| -> f64 {
        if ix >= nhalf {
            beta
        } else {
            -alpha
        }
    };
    let xf = |ix: usize| -> f64 { (ix as f64 - nhalf as f64) * dx };
    let f_of = |t: f64, x: f64| -> f64 {
        if x >= 0.0 {
            f_plus(t, x)
        } else {
            f_minus(t, -x)
        }
    };
    let h_of = |x: f64| -> f64 {
        if x >= 0.0 {
            h_plus(x)
        } else {
            h_minus(-x)
        }
    };

    // Crank-Nicolson centered on the whole line, Dirichlet 0 at both ends
    // (compact data, outgoing far fields).
    let mut u_prev: Vec<f64> = (0..nx_full).map(|ix| h_of(xf(ix))).collect();
    let mut snapshots = vec![u_prev.clone()];
    let lam = |ix: usize| a_of(ix);
    for it in 0..nt - 1 {
        let mut jac = BandedMatrix::new(nx_full, 2, 2);
        let mut rhs = vec![0.0f64; nx_full];
        let (t0, t1) = (it as f64 * dt, (it + 1) as f64 * dt);
        jac.set(0, 0, 1.0);
        rhs[0] = 0.0;
        jac.set(nx_full - 1, nx_full - 1, 1.0);
        rhs[nx_full - 1] = 0.0;
        for ix in 1..nx_full - 1 {
            let a = lam(ix);
            let cfl1 = a / (2.0 * dx);
            let d2 = eps / (dx * dx);
            // (u^{n+1} - u^n)/dt + 1/2[Op u^{n+1} + Op u^n] = (f^n + f^{n+1})/2
            jac.set(ix, ix, 1.0 / dt + d2);
            jac.set(ix, ix - 1, 0.5 * (-cfl1 - d2));
            jac.set(ix, ix + 1, 0.5 * (cfl1 - d2));
            let op_prev = a * (u_prev[ix + 1] - u_prev[ix - 1]) / (2.0 * dx)
                - eps * (u_prev[ix + 1] - 2.0 * u_prev[ix] + u_prev[ix - 1]) / (dx * dx);
            rhs[ix] = u_prev[ix] / dt - 0.5 * op_prev + 0.5 * (f_of(t0, xf(ix)) + f_of(t1, xf(ix)));
        }
        jac.factor()?;
        jac.solve(&mut rhs);
        u_prev = rhs;
        snapshots.push(u_prev.clone());
    }

    let half_grid = Grid1 {
        nt,
        nx: nhalf + 1,
        dt,
        dx,
        t0: 0.0,
        x0: 0.0,
    };
    let mut viscous = DiscreteField::zeros(half_grid, 2);
    for (it, row) in snapshots.iter().enumerate() {
        for ix in 0..=nhalf {
            let v = DVector::from_column_slice(&[row[nhalf + ix], row[nhalf - ix]]);
            viscous.set(it, ix, &v);
        }
    }

    // Hyperbolic limit: trace ODE A0 w' = (0, -f_+(t,0)/beta - f_-(t,0)/alpha),
    // A0 = [[1, -1], [-1/beta, -1/alpha]], then incoming Dirichlet transport.
    let det = -1.0 / alpha - 1.0 / beta;
    let a0_inv = RMatrix::from_row_slice(
        2,
        2,
        &[-1.0 / alpha / det, 1.0 / det, 1.0 / beta / det, 1.0 / det],
    );
    let mut w = vec![DVector::from_column_slice(&[h_plus(0.0), h_minus(0.0)]); nt];
    let rhs_tr = |t: f64| -> DVector<f64> {
        &a0_inv
            * DVector::from_column_slice(&[0.0, -f_plus(t, 0.0) / beta - f_minus(t, 0.0) / alpha])
    };
    for it in 1..nt {
        let t0 = (it - 1) as f64 * dt;
        let t1 = it as f64 * dt;
        let incr = (rhs_tr(t0) + rhs_tr(t1)) * (0.5 * dt);
        w[it] = &w[it - 1] + incr;
    }

    let mut limit = DiscreteField::zeros(half_grid, 2);
    for (comp, (speed, f_fn, h_fn)) in [
        (
            beta,
            f_plus as &dyn Fn(f64, f64) -> f64,
            h_plus as &dyn Fn(f64) -> f64,
        ),
        (alpha, f_minus, h_minus),
    ]
    .into_iter()
    .enumerate()
    {
        // explicit RK2 upwind (all speeds positive: inflow at x = 0)
        let nxh = nhalf + 1;
        let mut row: Vec<f64> = (0..nxh).map(|ix| h_fn(ix as f64 * dx)).collect();
        row[0] = w[0][comp];
        for ix in 0..nxh {
            limit.values[(0 * nxh + ix) * 2 + comp] = row[ix];
        }
        // sub-steps to satisfy CFL for this speed
        let nsub = (speed * dt / (0.4 * dx)).ceil().max(1.0) as usize;
        let dts = dt / nsub as f64;
        for it in 0..nt - 1 {
            for sub in 0..nsub {
                let t_cur = it as f64 * dt + sub as f64 * dts;
                let t_nxt = t_cur + dts;
                let deriv = |r: &Vec<f64>, ix: usize| -> f64 {
                    if ix >= 2 {
                        (3.0 * r[ix] - 4.0 * r[ix - 1] + r[ix - 2]) / (2.0 * dx)
                    } else {
                        (r[ix + 1] - r[if ix == 0 { 0 } else { ix - 1 }])
                            / ((if ix == 0 { 1.0 } else { 2.0 }) * dx)
                    }
                };
                let mut stage = row.clone();
                for ix in 1..nxh {
                    stage[ix] =
                        row[ix] + dts * (-speed * deriv(&row, ix) + f_fn(t_cur, ix as f64 * dx));
                }
                stage[0] = interp_w(&w, dt, t_nxt, comp);
                let mut next = row.clone();
                for ix in 1..nxh {
                    let f0 = -speed * deriv(&row, ix) + f_fn(t_cur, ix as f64 * dx);
                    let f1 = -speed * deriv(&stage, ix) + f_fn(t_nxt, ix as f64 * dx);
                    next[ix] = row[ix] + 0.5 * dts * (f0 + f1);
                }
                next[0] = interp_w(&w, dt, t_nxt, comp);
                row = next;
            }
            for ix in 0..nxh {
                limit.values[((it + 1) * nxh + ix) * 2 + comp] = row[ix];
            }
        }
    }
    Ok(FornetRun { viscous, limit })
}

fn interp_w(w: &[DVector<f64>], dt: f64, t: f64, comp: usize) -> f64 {
    let s = (t / dt).clamp(0.0, (w.len() - 1) as f64);
    let i0 = (s.floor() as usize).min(w.len() - 2);
    let frac = s - i0 as f64;
    w[i0][comp] * (1.0 - frac) + w[i0 + 1][comp] * frac
}

/// Solver-facing entry point for the residual hyperbolic problem when all
/// characteristics are incoming: order-zero cascade term.
pub fn hyperbolic_solve_incoming(
    model: &HyperbolicParabolicModel,
    f: &dyn Fn(f64, f64) -> DVector<f64>,
    spec: &CascadeSpec,
) -> Result<DiscreteField> {
    let profile = quasilinear_incoming_expansion(model, f, 1, spec)?;
    Ok(profile.outer_terms.into_iter().next().unwrap())
}

// ------------------------------------------------------- resolvent ODE

/// Profile sum_k c_k e^{-mu_k x} on [0, inf), Re mu_k > 0.
#[derive(Debug, Clone)]
pub struct ExpProfile {
    pub terms: Vec<(Complex64, CVector)>,
}

impl ExpProfile {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }
    pub fn single(mu: Complex64, c: CVector) -> Self {
        Self {
            terms: vec![(mu, c)],
        }
    }
    /// L2[0, inf) norm squared by the Gram formula.
    pub fn l2_sq(&self) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (mj, cj) in &self.terms {
            for (mk, ck) in &self.terms {
                acc += cj.dotc(ck) / (mj.conj() + mk);
            }
        }
        acc.re.max(0.0)
    }
    pub fn at_zero(&self, n: usize) -> CVector {
        let mut v = CVector::zeros(n);
        for (_, c) in &self.terms {
            v += c;
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct ResolventSolve {
    pub zeta: Frequency,
    pub u_h_l2_sq: f64,
    pub u_p_l2_sq: f64,
    pub u_h_trace_sq: f64,
    pub u_p_trace_sq: f64,
    pub f_h_l2_sq: f64,
    pub f_p_l2_sq: f64,
    pub g_norm_sq: f64,
    pub weight: f64,
}

impl ResolventSolve {
    /// Left side of the degenerate resolvent estimate.
    pub fn lhs(&self) -> f64 {
        let w = self.weight;
        w.powi(3) * self.u_h_l2_sq
            + self.u_p_l2_sq
            + w.powi(2) * self.u_h_trace_sq
            + self.u_p_trace_sq
    }
    /// Right side combination (constant 1).
    pub fn rhs(&self) -> f64 {
        self.f_p_l2_sq + self.weight * self.f_h_l2_sq + self.g_norm_sq
    }
}

/// Exact decaying solution of d_x U = diag(H, P) U + (F_H, F_P) with the
/// conjugated boundary condition H u_H(0) + u_P(0) = g, by variation of
/// constants on the stable H block and backward integration of the unstable
/// P block; L2 norms in closed form.
pub fn resolvent_ode_solve(
    model: &HyperbolicParabolicModel,
    zeta: &Frequency,
    f_h: &ExpProfile,
    f_p: &ExpProfile,
    g: &CVector,
) -> Result<ResolventSolve> {
    if !model.totally_incoming {
        return Err(CoreError::WrongShape(
            "resolvent ODE assumes a totally incoming model".into(),
        ));
    }
    let n = model.n;
    let bd = block_diagonalize(model, zeta)?;
    let h = &bd.h;
    let p = &bd.p;
    let (ev_h, _) = eig(h)?;
    if ev_h.iter().any(|e| e.re >= 0.0) {
        return Err(CoreError::SingularH);
    }
    let id = CMatrix::identity(n, n);

    // u_P(x) = -sum e^{-mu x} (P + mu)^{-1} c  (decaying backward solution)
    let mut up_terms: Vec<(Complex64, CVector)> = Vec::new();
    for (mu, c) in &f_p.terms {
        let m = (p + &id * *mu)
            .try_inverse()
            .ok_or_else(|| CoreError::SolverFailure("P + mu is singular".into()))?;
        up_terms.push((*mu, -(m * c)));
    }
    let up = ExpProfile { terms: up_terms };
    let up0 = up.at_zero(n);

    // u_H(0) from the boundary condition.
    let h_inv = h.clone().try_inverse().ok_or(CoreError::SingularH)?;
    let uh0 = h_inv * (g - &up0);

    // u_H(x) = e^{xH} a + sum e^{-mu x} b_k, b = -(H + mu)^{-1} c.
    let mut b_terms: Vec<(Complex64, CVector)> = Vec::new();
    for (mu, c) in &f_h.terms {
        let m = (h + &id * *mu).try_inverse().ok_or(CoreError::SingularH)?;
        b_terms.push((*mu, -(m * c)));
    }
    let mut a_vec = uh0.clone();
    for (_, b) in &b_terms {
        a_vec -= b;
    }

    // |u_H|_2^2 = a^H X a + gram(b) + 2 Re sum a^H (mu_bar - H^H)^{-1} b
    let x = solve_lyapunov_stable(h)?;
    let mut uh_l2 = (a_vec.adjoint() * &x * &a_vec)[(0, 0)].re;
    let bprof = ExpProfile {
        terms: b_terms.clone(),
    };
    uh_l2 += bprof.l2_sq();
    for (mu, b) in &b_terms {
        let m = (&id * mu.conj() - h.adjoint())
            .try_inverse()
            .ok_or(CoreError::SingularH)?;
        let cross = (a_vec.adjoint() * m * b)[(0, 0)];
        uh_l2 += 2.0 * cross.re;
    }

    let rho = zeta.rho();
    Ok(ResolventSolve {
        zeta: zeta.clone(),
        u_h_l2_sq: uh_l2.max(0.0),
        u_p_l2_sq: up.l2_sq(),
        u_h_trace_sq: uh0.norm_squared(),
        u_p_trace_sq: up0.norm_squared(),
        f_h_l2_sq: f_h.l2_sq(),
        f_p_l2_sq: f_p.l2_sq(),
        g_norm_sq: g.norm_squared(),
        weight: zeta.gamma + rho * rho,
    })
}

/// Norm of the difference of two fields on the same grid in L-inf and L2.
pub fn field_errors(a: &DiscreteField, b: &DiscreteField) -> Result<(f64, f64)> {
    let d = a.sub(b)?;
    Ok((d.linf(), d.l2()))
}

pub fn opnorm(m: &CMatrix) -> f64 {
    opnorm2(m)
}
