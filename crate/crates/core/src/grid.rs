//! Space-time grids, discrete fields (N components per node), norms and
//! difference stencils, plus the banded LU used by the implicit solvers.

use crate::error::{CoreError, Result};
use nalgebra::DVector;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid1 {
    pub nt: usize,
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
    /// Value of t at index 0; fields vanish for t < t0 by construction.
    pub t0: f64,
    pub x0: f64,
}

impl Grid1 {
    pub fn t(&self, it: usize) -> f64 {
        self.t0 + self.dt * it as f64
    }
    pub fn x(&self, ix: usize) -> f64 {
        self.x0 + self.dx * ix as f64
    }
}

/// Discrete space-time field: `values[(it * nx + ix) * n_comp + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    pub grid: Grid1,
    pub n_comp: usize,
    pub values: Vec<f64>,
}

impl DiscreteField {
    pub fn zeros(grid: Grid1, n_comp: usize) -> Self {
        Self {
            grid,
            n_comp,
            values: vec![0.0; grid.nt * grid.nx * n_comp],
        }
    }

    pub fn sample(grid: Grid1, n_comp: usize, f: impl Fn(f64, f64) -> DVector<f64>) -> Self {
        let mut out = Self::zeros(grid, n_comp);
        for it in 0..grid.nt {
            for ix in 0..grid.nx {
                let v = f(grid.t(it), grid.x(ix));
                out.set(it, ix, &v);
            }
        }
        out
    }

    #[inline]
    pub fn at(&self, it: usize, ix: usize) -> &[f64] {
        let base = (it * self.grid.nx + ix) * self.n_comp;
        &self.values[base..base + self.n_comp]
    }

    pub fn get(&self, it: usize, ix: usize) -> DVector<f64> {
        DVector::from_column_slice(self.at(it, ix))
    }

    #[inline]
    pub fn set(&mut self, it: usize, ix: usize, v: &DVector<f64>) {
        let base = (it * self.grid.nx + ix) * self.n_comp;
        self.values[base..base + self.n_comp].copy_from_slice(v.as_slice());
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn trapezoid_weight(n: usize, i: usize) -> f64 {
        if i == 0 || i + 1 == n {
            0.5
        } else {
            1.0
        }
    }

    /// Space-time L2 norm by the trapezoid rule.
    pub fn l2(&self) -> f64 {
        self.weighted_l2(0.0)
    }

    /// |e^{-gamma t} u|_{L2} by the trapezoid rule.
    pub fn weighted_l2(&self, gamma: f64) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for it in 0..g.nt {
            let wt = Self::trapezoid_weight(g.nt, it) * (-2.0 * gamma * g.t(it)).exp();
            for ix in 0..g.nx {
                let wx = Self::trapezoid_weight(g.nx, ix);
                let v = self.at(it, ix);
                let s: f64 = v.iter().map(|x| x * x).sum();
                acc += wt * wx * s;
            }
        }
        (acc * g.dt * g.dx).sqrt()
    }

    pub fn sub(&self, other: &DiscreteField) -> Result<DiscreteField> {
        if self.grid != other.grid || self.n_comp != other.n_comp {
            return Err(CoreError::WrongShape("field grids differ".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(other.values.iter()) {
            *a -= b;
        }
        Ok(out)
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// First x-derivative, fourth-order interior stencils with one-sided
    /// closures at the edges.
    pub fn ddx(&self) -> DiscreteField {
        let g = &self.grid;
        let n = self.n_comp;
        let h = g.dx;
        let mut out = DiscreteField::zeros(*g, n);
        for it in 0..g.nt {
            for c in 0..n {
                let v = |ix: usize| self.at(it, ix)[c];
                for ix in 0..g.nx {
                    let d = if ix >= 2 && ix + 2 < g.nx {
                        (v(ix - 2) - 8.0 * v(ix - 1) + 8.0 * v(ix + 1) - v(ix + 2)) / (12.0 * h)
                    } else if ix == 0 {
                        (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
                    } else if ix == 1 {
                        (v(2) - v(0)) / (2.0 * h)
                    } else if ix + 1 == g.nx {
                        (3.0 * v(ix) - 4.0 * v(ix - 1) + v(ix - 2)) / (2.0 * h)
                    } else {
                        (v(ix + 1) - v(ix - 1)) / (2.0 * h)
                    };
                    out.values[(it * g.nx + ix) * n + c] = d;
                }
            }
        }
        out
    }

    /// Second x-derivative, fourth-order interior stencils.
    pub fn d2dx2(&self) -> DiscreteField {
        let g = &self.grid;
        let n = self.n_comp;
        let h2 = g.dx * g.dx;
        let mut out = DiscreteField::zeros(*g, n);
        for it in 0..g.nt {
            for c in 0..n {
                let v = |ix: usize| self.at(it, ix)[c];
                for ix in 0..g.nx {
                    let d = if ix >= 2 && ix + 2 < g.nx {
                        (-v(ix - 2) + 16.0 * v(ix - 1) - 30.0 * v(ix) + 16.0 * v(ix + 1)
                            - v(ix + 2))
                            / (12.0 * h2)
                    } else if ix == 0 {
                        (2.0 * v(0) - 5.0 * v(1) + 4.0 * v(2) - v(3)) / h2
                    } else if ix == 1 || ix + 2 == g.nx {
                        (v(ix - 1) - 2.0 * v(ix) + v(ix + 1)) / h2
                    } else {
                        // ix + 1 == nx - 1
                        (2.0 * v(ix) - 5.0 * v(ix - 1) + 4.0 * v(ix - 2) - v(ix - 3)) / h2
                    };
                    out.values[(it * g.nx + ix) * n + c] = d;
                }
            }
        }
        out
    }

    /// First t-derivative, second order.
    pub fn ddt(&self) -> DiscreteField {
        let g = &self.grid;
        let n = self.n_comp;
        let h = g.dt;
        let mut out = DiscreteField::zeros(*g, n);
        for ix in 0..g.nx {
            for c in 0..n {
                let v = |it: usize| self.at(it, ix)[c];
                for it in 0..g.nt {
                    let d = if it == 0 {
                        (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * h)
                    } else if it + 1 == g.nt {
                        (3.0 * v(it) - 4.0 * v(it - 1) + v(it - 2)) / (2.0 * h)
                    } else {
                        (v(it + 1) - v(it - 1)) / (2.0 * h)
                    };
                    out.values[(it * g.nx + ix) * n + c] = d;
                }
            }
        }
        out
    }

    /// One-sided second-order x-derivative trace at x = x0, per time node.
    pub fn boundary_x_derivative(&self) -> Vec<DVector<f64>> {
        let g = &self.grid;
        let h = g.dx;
        (0..g.nt)
            .map(|it| {
                let u0 = self.get(it, 0);
                let u1 = self.get(it, 1);
                let u2 = self.get(it, 2);
                (-u0 * 3.0 + u1 * 4.0 - u2) / (2.0 * h)
            })
            .collect()
    }

    /// Simple flat JSON serialization (dims, spacing, flat values).
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schemaVersion": 1,
            "nt": self.grid.nt,
            "nx": self.grid.nx,
            "dt": self.grid.dt,
            "dx": self.grid.dx,
            "t0": self.grid.t0,
            "x0": self.grid.x0,
            "nComp": self.n_comp,
            "values": self.values,
        })
    }
}

// ------------------------------------------------------------ banded LU

/// General banded matrix with LAPACK-style storage and partial pivoting.
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
    factored: bool,
}

impl BandedMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ab: vec![0.0; ldab * n],
            ipiv: vec![0; n],
            factored: false,
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        // row index within column j: kl + ku + i - j
        (self.kl + self.ku + i - j) * self.n + j
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        // after fill-in the upper bandwidth grows to ku + kl
        i + self.ku + self.kl >= j && j + self.kl >= i && i < self.n && j < self.n
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            i + self.ku >= j && j + self.kl >= i,
            "entry ({i},{j}) outside declared band"
        );
        let s = self.slot(i, j);
        self.ab[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(i + self.ku >= j && j + self.kl >= i);
        let s = self.slot(i, j);
        self.ab[s] += v;
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.ab[self.slot(i, j)]
        } else {
            0.0
        }
    }

    pub fn factor(&mut self) -> Result<()> {
        let n = self.n;
        for j in 0..n {
            let imax = (j + self.kl).min(n - 1);
            let mut p = j;
            let mut best = self.get(j, j).abs();
            for i in j + 1..=imax {
                let v = self.get(i, j).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(CoreError::SolverFailure("banded LU: zero pivot".into()));
            }
            self.ipiv[j] = p;
            if p != j {
                let kmax = (j + self.ku + self.kl).min(n - 1);
                for k in j..=kmax {
                    let a = self.get(j, k);
                    let b = self.get(p, k);
                    if self.in_band(j, k) {
                        let s = self.slot(j, k);
                        self.ab[s] = b;
                    }
                    if self.in_band(p, k) {
                        let s = self.slot(p, k);
                        self.ab[s] = a;
                    }
                }
            }
            let pivot = self.get(j, j);
            for i in j + 1..=imax {
                let l = self.get(i, j) / pivot;
                let s = self.slot(i, j);
                self.ab[s] = l;
                if l != 0.0 {
                    let kmax = (j + self.ku + self.kl).min(n - 1);
                    for k in j + 1..=kmax {
                        let u = self.get(j, k);
                        if u != 0.0 {
                            let si = self.slot(i, k);
                            self.ab[si] -= l * u;
                        }
                    }
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    pub fn solve(&self, b: &mut [f64]) {
        assert!(self.factored, "factor() before solve()");
        let n = self.n;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let imax = (j + self.kl).min(n - 1);
            for i in j + 1..=imax {
                b[i] -= self.get(i, j) * b[j];
            }
        }
        for i in (0..n).rev() {
            let kmax = (i + self.ku + self.kl).min(n - 1);
            let mut s = b[i];
            for k in i + 1..=kmax {
                s -= self.get(i, k) * b[k];
            }
            b[i] = s / self.get(i, i);
        }
    }
}

/// Log-log least-squares slope through (x, y) samples.
pub fn fit_loglog_slope(pairs: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn derivatives_are_high_order() {
        let grid = Grid1 {
            nt: 6,
            nx: 101,
            dt: 0.1,
            dx: 0.01,
            t0: 0.0,
            x0: 0.0,
        };
        let f = DiscreteField::sample(grid, 1, |t, x| {
            DVector::from_element(1, (x + 0.3 * t).sin())
        });
        let dx = f.ddx();
        let dxx = f.d2dx2();
        let mut err1 = 0.0f64;
        let mut err2 = 0.0f64;
        for it in 0..grid.nt {
            for ix in 0..grid.nx {
                let arg = grid.x(ix) + 0.3 * grid.t(it);
                err1 = err1.max((dx.at(it, ix)[0] - arg.cos()).abs());
                err2 = err2.max((dxx.at(it, ix)[0] + arg.sin()).abs());
            }
        }
        assert!(err1 < 5e-5, "ddx err {err1}");
        assert!(err2 < 1e-3, "d2dx2 err {err2}");
    }

    #[test]
    fn banded_lu_matches_dense_solve() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..40 {
            let n = rng.random_range(3..40usize);
            let kl = rng.random_range(1..4usize).min(n - 1);
            let ku = rng.random_range(1..3usize).min(n - 1);
            let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
            let mut band = BandedMatrix::new(n, kl, ku);
            for i in 0..n {
                for j in 0..n {
                    if i + ku >= j && j + kl >= i {
                        let v = if i == j {
                            rng.random_range(2.0..4.0)
                        } else {
                            rng.random_range(-1.0..1.0)
                        };
                        dense[(i, j)] = v;
                        band.set(i, j, v);
                    }
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let want = dense
                .clone()
                .lu()
                .solve(&nalgebra::DVector::from_column_slice(&b))
                .unwrap();
            let mut got = b.clone();
            band.factor().unwrap();
            band.solve(&mut got);
            for i in 0..n {
                assert!((got[i] - want[i]).abs() < 1e-9, "mismatch at {i}");
            }
        }
    }

    #[test]
    fn weighted_norm_decays_with_gamma() {
        let grid = Grid1 {
            nt: 50,
            nx: 10,
            dt: 0.05,
            dx: 0.1,
            t0: 0.0,
            x0: 0.0,
        };
        let f = DiscreteField::sample(grid, 1, |_, _| DVector::from_element(1, 1.0));
        assert!(f.weighted_l2(4.0) < f.weighted_l2(1.0));
        assert!(f.weighted_l2(0.0) > 0.0);
    }
}
