//! Model files, validation and the builtin example registry.
//!
//! A model is a first-order system sum_j A_j(u) d_j u with A_0 = I at the
//! base state, a noncharacteristic boundary matrix A_d, and boundary rows
//! Gamma_1 (Dirichlet) / Gamma_2 (Neumann). Matrix entries are numbers or
//! expressions in the state variables u1..uN.

use crate::error::{CoreError, Result};
use crate::expr::{parse_expr, CompiledExpr};
use hyplab_spectral::{eig, rank, CMatrix};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub type RMatrix = DMatrix<f64>;

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixEntry {
    Const(f64),
    Expr(CompiledExpr),
}

impl MatrixEntry {
    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        match self {
            MatrixEntry::Const(v) => Ok(*v),
            MatrixEntry::Expr(c) => c.eval(u),
        }
    }
    pub fn is_const(&self) -> bool {
        matches!(self, MatrixEntry::Const(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryMatrix {
    pub n: usize,
    pub entries: Vec<MatrixEntry>, // row-major n x n
}

impl EntryMatrix {
    pub fn constant(m: &RMatrix) -> Self {
        let n = m.nrows();
        let entries = (0..n * n)
            .map(|k| MatrixEntry::Const(m[(k / n, k % n)]))
            .collect();
        Self { n, entries }
    }
    pub fn eval(&self, u: &[f64]) -> Result<RMatrix> {
        let mut out = RMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(i, j)] = self.entries[i * self.n + j].eval(u)?;
            }
        }
        Ok(out)
    }
    pub fn is_const(&self) -> bool {
        self.entries.iter().all(|e| e.is_const())
    }
}

/// Validated model: dimension d, state size N, matrices A_0..A_d, boundary
/// rows, base state and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperbolicParabolicModel {
    pub name: String,
    pub d: usize,
    pub n: usize,
    pub a: Vec<EntryMatrix>,
    pub symmetric: bool,
    pub totally_incoming: bool,
    pub gamma1: RMatrix,
    pub gamma2: RMatrix,
    pub base_state: Vec<f64>,
    pub params: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    /// A_j evaluated at the base state.
    pub base_a: Vec<RMatrix>,
}

fn to_complex(m: &RMatrix) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| Complex64::new(m[(i, j)], 0.0))
}

impl HyperbolicParabolicModel {
    pub fn n_dirichlet(&self) -> usize {
        self.gamma1.nrows()
    }
    pub fn n_neumann(&self) -> usize {
        self.gamma2.nrows()
    }
    /// A_j at the base state as a complex matrix.
    pub fn a_base_c(&self, j: usize) -> CMatrix {
        to_complex(&self.base_a[j])
    }
    pub fn ad_base(&self) -> &RMatrix {
        &self.base_a[self.d]
    }
    pub fn gamma1_c(&self) -> CMatrix {
        to_complex(&self.gamma1)
    }
    pub fn gamma2_c(&self) -> CMatrix {
        to_complex(&self.gamma2)
    }
    pub fn eval_a(&self, j: usize, u: &[f64]) -> Result<RMatrix> {
        self.a[j].eval(u)
    }
    pub fn is_constant_coefficient(&self) -> bool {
        self.a.iter().all(|m| m.is_const())
    }

    /// d/du_k A_j at u, central differences with step 1e-6 (1 + |u|_inf).
    pub fn jacobian_a(&self, j: usize, u: &[f64], k: usize) -> Result<RMatrix> {
        let scale = 1.0 + u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let h = 1e-6 * scale;
        let mut up = u.to_vec();
        let mut dn = u.to_vec();
        up[k] += h;
        dn[k] -= h;
        Ok((self.eval_a(j, &up)? - self.eval_a(j, &dn)?) / (2.0 * h))
    }

    /// Directional derivative d_u A_j(u)(w, vec) = (sum_k w_k dA_j/du_k) vec.
    pub fn du_a_apply(
        &self,
        j: usize,
        u: &[f64],
        w: &nalgebra::DVector<f64>,
        vec: &nalgebra::DVector<f64>,
    ) -> Result<nalgebra::DVector<f64>> {
        let mut out = nalgebra::DVector::zeros(self.n);
        for k in 0..self.n {
            if w[k] != 0.0 {
                let dj = self.jacobian_a(j, u, k)?;
                out += dj * vec * w[k];
            }
        }
        Ok(out)
    }
}

// -------------------------------------------------------------- schema

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum EntryRepr {
    Num(f64),
    Text(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct FlagsRepr {
    symmetric: bool,
    #[serde(rename = "totallyIncoming")]
    totally_incoming: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelFileRepr {
    name: String,
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    matrices: Vec<Vec<EntryRepr>>,
    gamma1: Vec<Vec<f64>>,
    gamma2: Vec<Vec<f64>>,
    #[serde(rename = "baseState")]
    base_state: Vec<f64>,
    flags: FlagsRepr,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

fn rows_to_matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<RMatrix> {
    for r in rows {
        if r.len() != n {
            return Err(CoreError::SchemaError(format!(
                "{what}: row length {} != N = {n}",
                r.len()
            )));
        }
    }
    let mut m = RMatrix::zeros(rows.len(), n);
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

/// Parse the documented JSON schema into an unvalidated model.
pub fn model_from_json(text: &str) -> Result<HyperbolicParabolicModel> {
    let repr: ModelFileRepr =
        serde_json::from_str(text).map_err(|e| CoreError::SchemaError(e.to_string()))?;
    let n = repr.n;
    if repr.matrices.len() != repr.d + 1 {
        return Err(CoreError::SchemaError(format!(
            "expected {} matrices, got {}",
            repr.d + 1,
            repr.matrices.len()
        )));
    }
    let mut a = Vec::new();
    for (j, flat) in repr.matrices.iter().enumerate() {
        if flat.len() != n * n {
            return Err(CoreError::SchemaError(format!(
                "matrix {j}: expected {} entries, got {}",
                n * n,
                flat.len()
            )));
        }
        let mut entries = Vec::with_capacity(n * n);
        for e in flat {
            entries.push(match e {
                EntryRepr::Num(v) => {
                    if !v.is_finite() {
                        return Err(CoreError::SchemaError("non-finite matrix entry".into()));
                    }
                    MatrixEntry::Const(*v)
                }
                EntryRepr::Text(src) => {
                    MatrixEntry::Expr(CompiledExpr::compile(parse_expr(src, n)?))
                }
            });
        }
        a.push(EntryMatrix { n, entries });
    }
    if repr.base_state.len() != n {
        return Err(CoreError::SchemaError("baseState length != N".into()));
    }
    let gamma1 = rows_to_matrix(&repr.gamma1, n, "gamma1")?;
    let gamma2 = rows_to_matrix(&repr.gamma2, n, "gamma2")?;
    let model = HyperbolicParabolicModel {
        name: repr.name,
        d: repr.d,
        n,
        base_a: Vec::new(),
        a,
        symmetric: repr.flags.symmetric,
        totally_incoming: repr.flags.totally_incoming,
        gamma1,
        gamma2,
        base_state: repr.base_state,
        params: repr.params,
        notes: Vec::new(),
    };
    Ok(model)
}

/// Serialize back to the documented JSON schema.
pub fn model_to_json(m: &HyperbolicParabolicModel) -> String {
    let matrices: Vec<Vec<EntryRepr>> =
        m.a.iter()
            .map(|em| {
                em.entries
                    .iter()
                    .map(|e| match e {
                        MatrixEntry::Const(v) => EntryRepr::Num(*v),
                        MatrixEntry::Expr(c) => EntryRepr::Text(c.source.to_string()),
                    })
                    .collect()
            })
            .collect();
    let g1: Vec<Vec<f64>> = (0..m.gamma1.nrows())
        .map(|i| (0..m.n).map(|j| m.gamma1[(i, j)]).collect())
        .collect();
    let g2: Vec<Vec<f64>> = (0..m.gamma2.nrows())
        .map(|i| (0..m.n).map(|j| m.gamma2[(i, j)]).collect())
        .collect();
    let repr = ModelFileRepr {
        name: m.name.clone(),
        d: m.d,
        n: m.n,
        matrices,
        gamma1: g1,
        gamma2: g2,
        base_state: m.base_state.clone(),
        flags: FlagsRepr {
            symmetric: m.symmetric,
            totally_incoming: m.totally_incoming,
        },
        params: m.params.clone(),
    };
    serde_json::to_string_pretty(&repr).expect("model serialization")
}

// ---------------------------------------------------------- validation

fn real_eigenvalues_checked(m: &RMatrix, what: &str) -> Result<Vec<Complex64>> {
    let (ev, _) = eig(&to_complex(m))?;
    let scale = m.norm().max(1.0);
    for e in &ev {
        if e.im.abs() > 1e-8 * scale {
            return Err(CoreError::InvariantViolation {
                check: format!("{what}: eigenvalue {e} is not real"),
            });
        }
    }
    Ok(ev)
}

/// Count singular values above an absolute threshold.
pub fn rank_abs(m: &CMatrix, tol_abs: f64) -> usize {
    let svd = m.clone().svd(false, false);
    svd.singular_values.iter().filter(|&&s| s > tol_abs).count()
}

fn semisimple_at(m: &CMatrix) -> Result<bool> {
    let (ev, _) = eig(m)?;
    let n = m.nrows();
    let scale = m.norm().max(1.0);
    let radius = 1e-6 * scale;
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] {
            continue;
        }
        let mut cluster = vec![i];
        for j in i + 1..n {
            if !used[j] && (ev[j] - ev[i]).norm() <= radius {
                cluster.push(j);
                used[j] = true;
            }
        }
        let alg = cluster.len();
        if alg > 1 {
            let mean: Complex64 = cluster.iter().map(|&k| ev[k]).sum::<Complex64>() / (alg as f64);
            let shifted = m - CMatrix::identity(n, n) * mean;
            // Absolute threshold tied to the scale of m itself: the shifted
            // matrix can be numerically zero at exact collisions.
            let geo = n - rank_abs(&shifted, 1e-8 * scale);
            if geo < alg {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Run all model invariants; returns the validated model with `base_a`
/// filled. Errors name the failing check.
pub fn validate(mut m: HyperbolicParabolicModel) -> Result<HyperbolicParabolicModel> {
    let n = m.n;
    if m.d < 1 {
        return Err(CoreError::InvariantViolation {
            check: "d must be >= 1".into(),
        });
    }
    let mut base_a = Vec::new();
    for j in 0..=m.d {
        base_a.push(m.eval_a(j, &m.base_state)?);
    }
    // A_0 = I at base state
    if (&base_a[0] - RMatrix::identity(n, n)).norm() > 1e-9 {
        return Err(CoreError::InvariantViolation {
            check: "A_0 must evaluate to the identity at the base state".into(),
        });
    }
    // A_d invertible
    let ad = &base_a[m.d];
    let svd = ad.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if smax == 0.0 || smin < 1e-12 * smax {
        return Err(CoreError::InvariantViolation {
            check: "A_d must be invertible at the base state".into(),
        });
    }
    // rank Gamma_1 + rank Gamma_2 = rank stack = N
    let d_rows = m.gamma1.nrows();
    let n_rows = m.gamma2.nrows();
    let r1 = if d_rows == 0 {
        0
    } else {
        rank(&to_complex(&m.gamma1), 1e-10)
    };
    let r2 = if n_rows == 0 {
        0
    } else {
        rank(&to_complex(&m.gamma2), 1e-10)
    };
    let mut stack = RMatrix::zeros(d_rows + n_rows, n);
    stack.view_mut((0, 0), (d_rows, n)).copy_from(&m.gamma1);
    stack
        .view_mut((d_rows, 0), (n_rows, n))
        .copy_from(&m.gamma2);
    let rs = rank(&to_complex(&stack), 1e-10);
    if r1 + r2 != n || rs != n {
        return Err(CoreError::InvariantViolation {
            check: format!("rank Gamma_1 ({r1}) + rank Gamma_2 ({r2}) must equal N = {n} with independent rows (stack rank {rs})"),
        });
    }
    // symmetric flag
    if m.symmetric {
        for (j, aj) in base_a.iter().enumerate() {
            if (aj - aj.transpose()).norm() > 1e-12 * aj.norm().max(1.0) {
                return Err(CoreError::InvariantViolation {
                    check: format!(
                        "symmetric flag set but A_{j} is not symmetric at the base state"
                    ),
                });
            }
        }
    }
    // totally incoming flag agrees with the spectrum of A_d
    let ad_ev = real_eigenvalues_checked(ad, "A_d")?;
    let all_positive = ad_ev.iter().all(|e| e.re > 1e-10 * ad.norm().max(1.0));
    if m.totally_incoming != all_positive {
        return Err(CoreError::InvariantViolation {
            check: format!(
                "totallyIncoming flag ({}) does not match the spectrum of A_d (all positive: {})",
                m.totally_incoming, all_positive
            ),
        });
    }
    // Characteristic structure on a xi-sphere sample at the base state:
    // eigenvalues of sum xi_j A_j must be real and semisimple. The
    // multiplicity pattern across the sphere is recorded, not enforced
    // (examples with A_d = I collapse multiplicities at isolated xi).
    let dirs: Vec<Vec<f64>> = if m.d == 1 {
        vec![vec![1.0]]
    } else {
        (0..24)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * (k as f64) / 24.0;
                vec![th.cos(), th.sin()]
            })
            .collect()
    };
    let mut patterns = Vec::new();
    for xi in &dirs {
        let mut sym = RMatrix::zeros(n, n);
        for (j, &x) in xi.iter().enumerate() {
            sym += &base_a[j + 1] * x;
        }
        let ev = real_eigenvalues_checked(&sym, "characteristic symbol")?;
        if !semisimple_at(&to_complex(&sym))? {
            return Err(CoreError::InvariantViolation {
                check: "characteristic symbol has a nontrivial Jordan block on the xi-sphere"
                    .into(),
            });
        }
        // multiplicity pattern
        let scale = sym.norm().max(1.0);
        let mut sorted: Vec<f64> = ev.iter().map(|e| e.re).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut pat = Vec::new();
        let mut count = 1;
        for i in 1..sorted.len() {
            if (sorted[i] - sorted[i - 1]).abs() <= 1e-6 * scale {
                count += 1;
            } else {
                pat.push(count);
                count = 1;
            }
        }
        pat.push(count);
        pat.sort_unstable();
        patterns.push(pat);
    }
    if patterns.windows(2).any(|w| w[0] != w[1]) {
        m.notes.push(
            "characteristic multiplicity pattern varies over the xi-sphere sample".to_string(),
        );
    }
    m.base_a = base_a;
    Ok(m)
}

pub fn load_model_str(text: &str) -> Result<HyperbolicParabolicModel> {
    validate(model_from_json(text)?)
}

pub fn load_model(path: &std::path::Path) -> Result<HyperbolicParabolicModel> {
    let text = std::fs::read_to_string(path)?;
    load_model_str(&text)
}

// ----------------------------------------------------------- registry

pub struct BuiltinInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub params: &'static [(&'static str, f64)],
}

/// Builtin models; every entry passes `validate`.
pub fn registry() -> Vec<BuiltinInfo> {
    vec![
        BuiltinInfo {
            name: "neueg",
            description: "first-order wave equation with drift, full Neumann conditions",
            params: &[("alpha", 0.0)],
        },
        BuiltinInfo {
            name: "inceg",
            description: "totally incoming 2x2 with one Dirichlet and one Neumann condition",
            params: &[("g11", 0.5), ("g12", 1.0)],
        },
        BuiltinInfo {
            name: "badinceg",
            description: "totally incoming 3x3 where the weak Lopatinski condition fails",
            params: &[("a", 1.0), ("b", -1.0)],
        },
        BuiltinInfo {
            name: "fornet",
            description: "1d discontinuous-coefficient transmission system (vanishing viscosity)",
            params: &[("alpha", 1.0), ("beta", 2.0)],
        },
        BuiltinInfo {
            name: "eg2",
            description: "3x3 mixed system where method two works but uniform Lopatinski fails",
            params: &[("alpha", 1.0), ("beta", 2.0), ("s1", 0.3), ("s2", 0.4)],
        },
        BuiltinInfo {
            name: "neueg2",
            description:
                "wave equation with drift, full Neumann, enlarged boundary-Cauchy analysis",
            params: &[("alpha", 0.0)],
        },
        BuiltinInfo {
            name: "noest",
            description: "drifted wave variant where frozen-coefficient semisimplicity fails",
            params: &[("theta", 0.5), ("alpha", 0.0)],
        },
        BuiltinInfo {
            name: "rao",
            description: "linearized compressible Euler, supersonic inflow, insulating wall",
            params: &[
                ("gas_r", 1.0),
                ("cv", 1.5),
                ("rho", 1.0),
                ("temp", 1.0),
                ("u", 1.0),
                ("v", 2.0),
            ],
        },
        BuiltinInfo {
            name: "scalar1d",
            description: "scalar 1d model, linear (nl = 0) or with quadratic coefficient",
            params: &[("a", 1.0), ("nl", 0.0)],
        },
    ]
}

fn get(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn identity_entry(n: usize) -> EntryMatrix {
    EntryMatrix::constant(&RMatrix::identity(n, n))
}

fn raw_model(
    name: &str,
    d: usize,
    n: usize,
    a: Vec<EntryMatrix>,
    gamma1: RMatrix,
    gamma2: RMatrix,
    symmetric: bool,
    totally_incoming: bool,
    base_state: Vec<f64>,
    params: BTreeMap<String, f64>,
    notes: Vec<String>,
) -> HyperbolicParabolicModel {
    HyperbolicParabolicModel {
        name: name.to_string(),
        d,
        n,
        a,
        symmetric,
        totally_incoming,
        gamma1,
        gamma2,
        base_state,
        params,
        notes,
        base_a: Vec::new(),
    }
}

/// Build a builtin by name with parameter overrides, running validation.
pub fn build_builtin(
    name: &str,
    overrides: &BTreeMap<String, f64>,
) -> Result<HyperbolicParabolicModel> {
    let info = registry()
        .into_iter()
        .find(|b| b.name == name)
        .ok_or_else(|| CoreError::UnknownBuiltin(name.to_string()))?;
    let mut params: BTreeMap<String, f64> = info
        .params
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    for (k, v) in overrides {
        if !params.contains_key(k) {
            return Err(CoreError::SchemaError(format!(
                "model `{name}` has no parameter `{k}`"
            )));
        }
        params.insert(k.clone(), *v);
    }
    let m = match name {
        "neueg" | "neueg2" | "noest" => {
            let alpha = get(&params, "alpha", 0.0);
            let theta = if name == "noest" {
                get(&params, "theta", 0.5)
            } else {
                0.0
            };
            let a1 = RMatrix::from_row_slice(2, 2, &[theta, 1.0, 1.0, theta]);
            let a2 = RMatrix::from_row_slice(2, 2, &[1.0 + alpha, 0.0, 0.0, -1.0 + alpha]);
            raw_model(
                name,
                2,
                2,
                vec![
                    identity_entry(2),
                    EntryMatrix::constant(&a1),
                    EntryMatrix::constant(&a2),
                ],
                RMatrix::zeros(0, 2),
                RMatrix::identity(2, 2),
                true,
                false,
                vec![0.0, 0.0],
                params,
                vec![],
            )
        }
        "inceg" => {
            let g11 = get(&params, "g11", 0.5);
            let g12 = get(&params, "g12", 1.0);
            let a1 = RMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
            let a2 = RMatrix::identity(2, 2);
            raw_model(
                name,
                2,
                2,
                vec![
                    identity_entry(2),
                    EntryMatrix::constant(&a1),
                    EntryMatrix::constant(&a2),
                ],
                RMatrix::from_row_slice(1, 2, &[g11, g12]),
                RMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
                true,
                true,
                vec![0.0, 0.0],
                params,
                vec![],
            )
        }
        "badinceg" => {
            let a = get(&params, "a", 1.0);
            let b = get(&params, "b", -1.0);
            let a1 = RMatrix::from_row_slice(3, 3, &[0.0, 1.0, a, 1.0, 1.0, 0.0, a, 0.0, 0.0]);
            let a2 = RMatrix::identity(3, 3);
            raw_model(
                name,
                2,
                3,
                vec![
                    identity_entry(3),
                    EntryMatrix::constant(&a1),
                    EntryMatrix::constant(&a2),
                ],
                RMatrix::from_row_slice(1, 3, &[1.0, 1.0, b]),
                RMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]),
                true,
                true,
                vec![0.0; 3],
                params,
                vec![],
            )
        }
        "fornet" => {
            let alpha = get(&params, "alpha", 1.0);
            let beta = get(&params, "beta", 2.0);
            if alpha <= 0.0 || beta <= 0.0 {
                return Err(CoreError::InvariantViolation {
                    check: "fornet requires alpha > 0 and beta > 0".into(),
                });
            }
            let a1 = RMatrix::from_row_slice(2, 2, &[beta, 0.0, 0.0, alpha]);
            raw_model(
                name,
                1,
                2,
                vec![identity_entry(2), EntryMatrix::constant(&a1)],
                RMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
                RMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
                true,
                true,
                vec![0.0, 0.0],
                params,
                vec![],
            )
        }
        "eg2" => {
            let alpha = get(&params, "alpha", 1.0);
            let beta = get(&params, "beta", 2.0);
            let s1 = get(&params, "s1", 0.3);
            let s2 = get(&params, "s2", 0.4);
            let a1 = RMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
            let a2 = RMatrix::from_row_slice(3, 3, &[-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
            raw_model(
                name,
                2,
                3,
                vec![
                    identity_entry(3),
                    EntryMatrix::constant(&a1),
                    EntryMatrix::constant(&a2),
                ],
                RMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0]),
                RMatrix::from_row_slice(2, 3, &[1.0, s1, s2, 0.0, alpha, beta]),
                true,
                false,
                vec![0.0; 3],
                params,
                vec![],
            )
        }
        "rao" => build_rao(&params)?,
        "scalar1d" => {
            let a = get(&params, "a", 1.0);
            let nl = get(&params, "nl", 0.0);
            let entry = if nl == 0.0 {
                MatrixEntry::Const(a)
            } else {
                let src = format!("{a} + {nl}*u1*u1/10");
                MatrixEntry::Expr(CompiledExpr::compile(parse_expr(&src, 1)?))
            };
            raw_model(
                name,
                1,
                1,
                vec![
                    identity_entry(1),
                    EntryMatrix {
                        n: 1,
                        entries: vec![entry],
                    },
                ],
                RMatrix::zeros(0, 1),
                RMatrix::from_row_slice(1, 1, &[1.0]),
                true,
                a > 0.0,
                vec![0.0],
                params,
                vec![],
            )
        }
        _ => return Err(CoreError::UnknownBuiltin(name.to_string())),
    };
    validate(m)
}

/// Linearized compressible Euler in primitive variables (rho, u, v, T) with
/// an ideal-gas pressure law, normalized so A_0 = I: the stored matrices are
/// A_0^{-1} A_j at the sample state. Dirichlet on (rho, u, v), Neumann on T.
fn build_rao(params: &BTreeMap<String, f64>) -> Result<HyperbolicParabolicModel> {
    let r = get(params, "gas_r", 1.0);
    let cv = get(params, "cv", 1.5);
    let rho = get(params, "rho", 1.0);
    let temp = get(params, "temp", 1.0);
    let u = get(params, "u", 1.0);
    let v = get(params, "v", 2.0);
    let p = r * rho * temp;
    let p_rho = r * temp;
    let p_t = r * rho;
    let c2 = p_rho + p * p_t / (rho * rho * cv);
    if c2 <= 0.0 {
        return Err(CoreError::InvariantViolation {
            check: "sound speed squared must be positive".into(),
        });
    }
    let c = c2.sqrt();
    let e_total = cv * temp + 0.5 * (u * u + v * v);
    #[rustfmt::skip]
    let a0 = RMatrix::from_row_slice(4, 4, &[
        1.0,     0.0,      0.0,      0.0,
        u,       rho,      0.0,      0.0,
        v,       0.0,      rho,      0.0,
        e_total, rho * u,  rho * v,  rho * cv,
    ]);
    // Closed-form inverse of the block-triangular A_0.
    #[rustfmt::skip]
    let a0_inv = RMatrix::from_row_slice(4, 4, &[
        1.0,                                      0.0,            0.0,            0.0,
        -u / rho,                                 1.0 / rho,      0.0,            0.0,
        -v / rho,                                 0.0,            1.0 / rho,      0.0,
        (u * u + v * v - e_total) / (rho * cv),   -u / (rho * cv), -v / (rho * cv), 1.0 / (rho * cv),
    ]);
    if (&a0 * &a0_inv - RMatrix::identity(4, 4)).norm() > 1e-12 * a0.norm().max(1.0) {
        return Err(CoreError::InvariantViolation {
            check: "closed-form A_0 inverse does not invert A_0".into(),
        });
    }
    #[rustfmt::skip]
    let a1 = RMatrix::from_row_slice(4, 4, &[
        u,          rho,            0.0, 0.0,
        p_rho / rho, u,             0.0, p_t / rho,
        0.0,        0.0,            u,   0.0,
        0.0,        p / (rho * cv), 0.0, u,
    ]);
    #[rustfmt::skip]
    let a2 = RMatrix::from_row_slice(4, 4, &[
        v,           0.0, rho,            0.0,
        0.0,         v,   0.0,            0.0,
        p_rho / rho, 0.0, v,              p_t / rho,
        0.0,         0.0, p / (rho * cv), v,
    ]);
    // The printed A_1, A_2 are the primitive-variable quasilinear matrices:
    // A_2 itself has the characteristics v - c, v, v, v + c. A_0 and its
    // closed-form inverse are kept as a bookkeeping self-check above.
    let mut notes = vec![format!(
        "sound speed c = {c:.6}; normal velocity v = {v}; supersonic inflow requires 0 < c < v"
    )];
    if v <= c {
        return Err(CoreError::InvariantViolation {
            check: format!("rao requires supersonic inflow v > c (v = {v}, c = {c:.6})"),
        });
    }
    if u == 0.0 {
        notes.push(
            "u = 0: Jordan block expected in the tangential boundary system (semisimplicity fails)"
                .to_string(),
        );
    }
    notes.push(format!(
        "weak-Lopatinski determinant reference values: v*(v^2 - p_rho) = {}, v^2 - c^2 + p*p_T/rho^2 = {}",
        v * (v * v - p_rho),
        v * v - c2 + p * p_t / (rho * rho)
    ));
    let gamma1 = RMatrix::from_row_slice(
        3,
        4,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0,
        ],
    );
    let gamma2 = RMatrix::from_row_slice(1, 4, &[0.0, 0.0, 0.0, 1.0]);
    Ok(raw_model(
        "rao",
        2,
        4,
        vec![
            identity_entry(4),
            EntryMatrix::constant(&a1),
            EntryMatrix::constant(&a2),
        ],
        gamma1,
        gamma2,
        false,
        true,
        vec![rho, u, v, temp],
        params.clone(),
        notes,
    ))
}

/// Parse "builtin:name" or a file path.
pub fn resolve_model(
    spec: &str,
    overrides: &BTreeMap<String, f64>,
) -> Result<HyperbolicParabolicModel> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        build_builtin(name, overrides)
    } else {
        if !overrides.is_empty() {
            return Err(CoreError::SchemaError(
                "parameter overrides only apply to builtin models".into(),
            ));
        }
        load_model(std::path::Path::new(spec))
    }
}
