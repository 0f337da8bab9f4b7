//! Report-emitting commands: stability scans, Evans scans, expansion builds
//! and convergence studies. Each writes JSON (versioned) plus flat CSV into
//! the output directory and is deterministic for fixed inputs.

use hyplab_core::cauchy::{
    evolutionary_check, reduced_block_resolvent_scan, resolvent_norm_scan,
    semisimple_constmult_scan, sharp_scalar_condition, tangential_system, weak_hyperbolicity_check,
    SemisimpleScanConfig,
};
use hyplab_core::expansion::{
    layer_profile_first_order, next_order_terms, quasilinear_incoming_expansion,
    solve_filtered_outer, viscous_residual, CascadeSpec, OuterGridSpec,
};
use hyplab_core::grid::fit_loglog_slope;
use hyplab_core::lopatinski::{classify_case, glancing_detector, reduce, scan_uniform, ScanConfig};
use hyplab_core::model::HyperbolicParabolicModel;
use hyplab_core::report::{write_json, CsvWriter, SCHEMA_VERSION};
use hyplab_core::solvers::{fornet_solve, viscous_solve_1d, FornetSpec, ViscousSpec};
use hyplab_core::symbols::{degeneracy_r, evans, r_small};
use hyplab_core::{CoreError, Frequency, Result};
use nalgebra::DVector;
use serde_json::json;
use std::path::Path;

pub struct ScanOptions {
    pub angles: usize,
    pub gamma_levels: Vec<f64>,
    pub seed: u64,
    pub uniform_threshold: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            angles: 64,
            gamma_levels: vec![0.0, 1e-3, 1e-2, 1e-1, 0.3, 0.6, 0.9],
            seed: 0,
            uniform_threshold: 1e-3,
        }
    }
}

/// Full stability report: case reduction, Lopatinski hemisphere scan,
/// glancing detection, and the boundary-Cauchy (method two) diagnostics.
pub fn cmd_stability(
    model: &HyperbolicParabolicModel,
    opts: &ScanOptions,
    out_dir: &Path,
) -> Result<serde_json::Value> {
    std::fs::create_dir_all(out_dir)?;
    let classification = classify_case(model)?;
    let reduced = reduce(model)?;
    let cfg = ScanConfig {
        angles: opts.angles,
        gamma_levels: opts.gamma_levels.clone(),
        uniform_threshold: opts.uniform_threshold,
        ..Default::default()
    };
    let lop = scan_uniform(model, &reduced, &cfg)?;

    let mut csv = CsvWriter::new(&[
        "tau",
        "gamma",
        "eta",
        "abs_det",
        "sigma_restricted",
        "well_cond",
        "glancing",
        "kernel_dim",
    ]);
    for rec in &lop.records {
        let eta = rec.zeta.eta.first().copied().unwrap_or(0.0);
        csv.row(&[
            rec.zeta.tau,
            rec.zeta.gamma,
            eta,
            rec.abs_det,
            rec.sigma_restricted,
            rec.well_cond.min(1e30),
            if rec.glancing { 1.0 } else { 0.0 },
            rec.kernel_dim as f64,
        ]);
    }
    csv.write_to(&out_dir.join("scan.csv"))?;

    let glancing = if model.d >= 2 {
        glancing_detector(model, &[1.0])?
    } else {
        Vec::new()
    };

    // method two
    let mut cauchy = json!({});
    if reduced.gamma_tilde2.is_some() {
        let plain_rows = model.gamma1.nrows()
            + reduced
                .gamma_tilde2
                .as_ref()
                .map(|g| g.nrows())
                .unwrap_or(0);
        let plain = if plain_rows == model.n {
            let ts = tangential_system(model, &reduced)?;
            let (evol, cond) = evolutionary_check(&ts, 1e-12);
            let wh = if model.d >= 2 && evol {
                let grid: Vec<Vec<f64>> = (1..=8).map(|k| vec![k as f64 / 8.0]).collect();
                Some(weak_hyperbolicity_check(&ts, &grid)?)
            } else {
                None
            };
            json!({
                "evolutionary": evol,
                "conditionNumber": if cond.is_finite() { cond } else { 1e30 },
                "weaklyHyperbolic": wh.as_ref().map(|w| w.weakly_hyperbolic),
                "maxImRoot": wh.as_ref().map(|w| w.max_im_root),
            })
        } else {
            json!(null)
        };
        let scan = semisimple_constmult_scan(model, &reduced, &SemisimpleScanConfig::default())?;
        let resolvent = resolvent_norm_scan(model, &reduced, 500, opts.seed)?;
        let sharp = match sharp_scalar_condition(model, &reduced, 16) {
            Ok(s) => json!({"kind": "scalar", "pass": s.pass, "min": s.min_value}),
            Err(CoreError::WrongShape(_)) => {
                let blk = reduced_block_resolvent_scan(model, &reduced, 400, opts.seed)?;
                json!({"kind": "reduced-block", "constant": blk.constant, "samples": blk.samples})
            }
            Err(e) => return Err(e),
        };
        cauchy = json!({
            "plainSystem": plain,
            "frozenScan": {
                "evolutionaryEverywhere": scan.evolutionary_everywhere,
                "semisimple": scan.semisimple,
                "pureImaginary": scan.pure_imaginary,
                "constantMultiplicity": scan.constant_multiplicity,
                "multiplicityPattern": scan.multiplicity_pattern,
                "witnesses": serde_json::to_value(&scan.failed_points)?,
                "sampledPoints": scan.sampled_points,
                "skippedPoints": scan.skipped_points,
            },
            "resolventConstant": resolvent.constant,
            "sharp": sharp,
        });
    }

    let report = json!({
        "schemaVersion": SCHEMA_VERSION,
        "model": model.name,
        "params": model.params,
        "notes": model.notes,
        "classification": serde_json::to_value(&classification)?,
        "lopatinski": {
            "verdict": serde_json::to_value(lop.verdict)?,
            "minAbsDet": lop.min_abs_det,
            "argmin": serde_json::to_value(&lop.argmin)?,
            "maxWellCond": lop.max_well_cond.min(1e30),
            "glancingCount": lop.glancing_count,
            "interiorZero": lop.interior_zero.as_ref().map(|(z, v)| json!({
                "zeta": serde_json::to_value(z).unwrap(), "sigma": v
            })),
        },
        "glancingPoints": serde_json::to_value(&glancing)?,
        "methodTwo": cauchy,
    });
    write_json(&out_dir.join("report.json"), &report)?;
    Ok(report)
}

/// Evans-function scan over the small-frequency region: CSV of
/// (zeta, |D|, R, R/(gamma + rho^2)) plus a summary line.
pub fn cmd_evans(
    model: &HyperbolicParabolicModel,
    opts: &ScanOptions,
    out_dir: &Path,
) -> Result<serde_json::Value> {
    std::fs::create_dir_all(out_dir)?;
    let r_max = r_small(model)?.min(0.05);
    let rhos = [r_max, r_max / 2.0, r_max / 4.0];
    let mut csv = CsvWriter::new(&["tau", "gamma", "eta", "abs_d", "r", "r_over_weight"]);
    let mut min_ratio = f64::INFINITY;
    let mut dh_small = f64::INFINITY;
    let mut dh_large: f64 = 0.0;
    for &rho in &rhos {
        for &g_hat in &[0.0f64, 0.05, 0.2, 0.6] {
            let rr = (1.0 - g_hat * g_hat).sqrt();
            let dirs: Vec<Frequency> = if model.d == 1 {
                vec![Frequency::d1(rr, g_hat), Frequency::d1(-rr, g_hat)]
            } else {
                (0..opts.angles)
                    .map(|k| {
                        let th = std::f64::consts::TAU * (k as f64) / (opts.angles as f64);
                        Frequency::d2(rr * th.cos(), g_hat, rr * th.sin())
                    })
                    .collect()
            };
            for dir in dirs {
                let z = dir.scaled(rho);
                if z.rho() == 0.0 {
                    continue;
                }
                let rv = match degeneracy_r(model, &z) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                let abs_d = evans(model, &z).map(|e| e.det_h.norm()).unwrap_or(f64::NAN);
                let w = z.gamma + z.rho() * z.rho();
                min_ratio = min_ratio.min(rv / w);
                if abs_d.is_finite() {
                    if rho == rhos[0] {
                        dh_large = dh_large.max(abs_d);
                    }
                    if rho == rhos[2] {
                        dh_small = dh_small.min(abs_d);
                    }
                }
                csv.row(&[
                    z.tau,
                    z.gamma,
                    z.eta.first().copied().unwrap_or(0.0),
                    abs_d,
                    rv,
                    rv / w,
                ]);
            }
        }
    }
    csv.write_to(&out_dir.join("evans.csv"))?;
    let summary = json!({
        "schemaVersion": SCHEMA_VERSION,
        "model": model.name,
        "minROverWeight": min_ratio,
        "vanishingTowardZero": dh_small < dh_large,
    });
    write_json(&out_dir.join("evans.json"), &summary)?;
    Ok(summary)
}

/// Expansion build: cascade for quasilinear models (and the filtered linear
/// pipeline with layer descriptors for constant-coefficient ones), with a
/// residual table over a fixed epsilon sweep.
pub fn cmd_expand(
    model: &HyperbolicParabolicModel,
    order: usize,
    out_dir: &Path,
) -> Result<serde_json::Value> {
    std::fs::create_dir_all(out_dir)?;
    if model.d != 1 {
        return Err(CoreError::WrongShape(
            "expansion builds run in d = 1".into(),
        ));
    }
    let forcing = |t: f64, x: f64| -> DVector<f64> {
        let t = t.max(0.0);
        DVector::from_element(model.n, t * t * t * (-x).exp())
    };
    let eps_sweep = [0.1f64, 0.05, 0.025];
    let mut residuals = Vec::new();
    let mut layer_info = json!(null);
    if model.totally_incoming {
        let spec = CascadeSpec::default();
        let profile = quasilinear_incoming_expansion(model, &forcing, order.clamp(1, 3), &spec)?;
        for (j, term) in profile.outer_terms.iter().enumerate() {
            write_json(&out_dir.join(format!("u{j}.json")), &term.to_json())?;
        }
        for &eps in &eps_sweep {
            let composite = profile.composite(eps, profile.order);
            residuals.push((eps, viscous_residual(model, &composite, &forcing, eps)?));
        }
    } else {
        if !model.is_constant_coefficient() || !model.symmetric {
            return Err(CoreError::WrongShape(
                "mixed-sign models need the constant-coefficient filtered pipeline".into(),
            ));
        }
        let spec = OuterGridSpec::default();
        let out = solve_filtered_outer(model, &forcing, &spec)?;
        write_json(&out_dir.join("u0.json"), &out.u0.to_json())?;
        let layer1 = layer_profile_first_order(model, &out.u0)?;
        layer_info = json!({
            "decayRate": layer1.gap / 2.0,
            "supAtZ0": layer1.sup_at_z(0.0),
            "supAtZ4": layer1.sup_at_z(4.0),
        });
        if order >= 2 {
            let (u1, layer2) = next_order_terms(model, &out, &forcing, &layer1, &spec)?;
            write_json(&out_dir.join("u1.json"), &u1.to_json())?;
            layer_info["layer2SupAtZ0"] = json!(layer2.sup_at_z(0.0));
        }
    }
    let mut csv = CsvWriter::new(&["eps", "residual"]);
    for (e, r) in &residuals {
        csv.row(&[*e, *r]);
    }
    csv.write_to(&out_dir.join("residuals.csv"))?;
    let slope = if residuals.len() >= 2 {
        fit_loglog_slope(&residuals)
    } else {
        f64::NAN
    };
    let summary = json!({
        "schemaVersion": SCHEMA_VERSION,
        "model": model.name,
        "order": order,
        "residuals": residuals,
        "residualSlope": slope,
        "layer": layer_info,
    });
    write_json(&out_dir.join("expand.json"), &summary)?;
    Ok(summary)
}

/// Small-viscosity convergence study: viscous runs against the cascade
/// terms, or the transmission study for the fornet builtin.
pub fn cmd_converge(
    model: &HyperbolicParabolicModel,
    eps_list: &[f64],
    out_dir: &Path,
) -> Result<serde_json::Value> {
    std::fs::create_dir_all(out_dir)?;
    if model.name == "fornet" {
        let alpha = *model.params.get("alpha").unwrap_or(&1.0);
        let beta = *model.params.get("beta").unwrap_or(&2.0);
        let zero2 = |_: f64, _: f64| 0.0;
        let bump = |x: f64| (-((x - 2.0) / 0.5f64).powi(2)).exp();
        let spec = FornetSpec::default();
        let mut errs = Vec::new();
        for &eps in eps_list {
            let run = fornet_solve(alpha, beta, eps, &zero2, &zero2, &bump, &bump, &spec)?;
            errs.push((eps, run.viscous.sub(&run.limit)?.l2()));
        }
        let slope = fit_loglog_slope(&errs);
        let mut csv = CsvWriter::new(&["eps", "l2_error"]);
        for (e, v) in &errs {
            csv.row(&[*e, *v]);
        }
        csv.write_to(&out_dir.join("converge.csv"))?;
        let summary = json!({
            "schemaVersion": SCHEMA_VERSION,
            "model": "fornet",
            "errorsL2": errs,
            "slope": slope,
            "monotone": errs.windows(2).all(|w| w[1].1 < w[0].1),
        });
        write_json(&out_dir.join("converge.json"), &summary)?;
        return Ok(summary);
    }
    if model.d != 1 || !model.totally_incoming {
        return Err(CoreError::WrongShape(
            "convergence studies run on totally incoming d = 1 models".into(),
        ));
    }
    let forcing = |t: f64, x: f64| -> DVector<f64> {
        let t = t.max(0.0);
        DVector::from_element(model.n, t * t * t * (-x).exp())
    };
    let dx = eps_list.iter().cloned().fold(f64::INFINITY, f64::min) / 4.0;
    let cspec = CascadeSpec {
        x_max: 6.0,
        t_max: 1.0,
        nx: (6.0 / dx).round() as usize + 1,
        ..Default::default()
    };
    let profile = quasilinear_incoming_expansion(model, &forcing, 2, &cspec)?;
    let u0 = &profile.outer_terms[0];
    let u1 = &profile.outer_terms[1];
    let mut rows = Vec::new();
    for &eps in eps_list {
        let vspec = ViscousSpec {
            x_max: 6.0,
            t_max: 1.0,
            dx: Some(dx),
            ..Default::default()
        };
        let run = viscous_solve_1d(model, eps, &forcing, &vspec)?;
        let e0 = run.solution.sub(u0)?.linf();
        let mut ua = u0.clone();
        for (a, b) in ua.values.iter_mut().zip(u1.values.iter()) {
            *a += eps * b;
        }
        let e1 = run.solution.sub(&ua)?.l2();
        rows.push((eps, e0, e1));
    }
    let s0 = fit_loglog_slope(&rows.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>());
    let s1 = fit_loglog_slope(&rows.iter().map(|r| (r.0, r.2)).collect::<Vec<_>>());
    let mut csv = CsvWriter::new(&["eps", "linf_err_u0", "l2_err_ua1"]);
    for (e, a, b) in &rows {
        csv.row(&[*e, *a, *b]);
    }
    csv.write_to(&out_dir.join("converge.csv"))?;
    let summary = json!({
        "schemaVersion": SCHEMA_VERSION,
        "model": model.name,
        "rows": rows,
        "slopeLinfU0": s0,
        "slopeL2Ua1": s1,
    });
    write_json(&out_dir.join("converge.json"), &summary)?;
    Ok(summary)
}
