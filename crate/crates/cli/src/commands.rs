use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ndarray::Array2;

use alphacomb::bench::{run_bench, BenchOutcome};
use alphacomb::optimizer::shrinkage_dense_weights;
use alphacomb::panel::{
    align_to, gen_synthetic, load_expected_csv, load_positions, load_returns_csv, load_value_csv, save_expected_csv,
    save_returns_csv, save_weights_csv, SynthSpec,
};
use alphacomb::regress::{exact_factor_weights, regression_limit_weights};
use alphacomb::riskmodel::{log_center, position_loadings};
use alphacomb::stats::{normalize_and_trim, sample_correlation_dense, sample_variances, serial_demean};
use alphacomb::style::{figure_projection, flatten_offdiag, style_regression, style_tensors};
use alphacomb::{combine as combine_weights, combine_with_report, AugmentMode, CombineOptions, DenseCap, WeightSource};

use crate::{BenchArgs, CombineArgs, GenArgs, LoadingsMode, OracleArgs, StyleArgs, StyleFactor};

/// Tolerance of the exact factor-model identity.
const IDENTITY_TOL: f64 = 1e-9;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    num / b.iter().map(|y| y.abs()).fold(0.0, f64::max)
}

pub fn combine(a: &CombineArgs) -> Result<bool> {
    let start = Instant::now();
    let panel = load_returns_csv(&a.returns)?;
    let e = load_expected_csv(&a.expected, &panel)?;
    let mut opts = CombineOptions { remove_overall_mode: !a.keep_overall_mode, ..Default::default() };

    if let Some(path) = &a.loadings {
        let load = load_positions(path)?;
        if load.rescaled_slices > 0 {
            eprintln!("warning: {} position slices rescaled to unit absolute sum", load.rescaled_slices);
        }
        let pl = position_loadings(&load.history, a.loadings_scale)?;
        if !pl.dropped.is_empty() {
            eprintln!("warning: {} instruments never held, dropped", pl.dropped.len());
        }
        let row_of: HashMap<&str, usize> =
            load.history.alpha_ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut omega = Array2::<f64>::zeros((panel.n_alphas(), pl.omega.ncols()));
        for (i, id) in panel.alpha_ids().iter().enumerate() {
            let Some(&r) = row_of.get(id.as_str()) else {
                bail!("alpha {id:?} has no positions in {}", path.display());
            };
            omega.row_mut(i).assign(&pl.omega.row(r));
        }
        opts.external_loadings = Some(omega);
        opts.augment_mode = match a.loadings_mode {
            LoadingsMode::Replace => AugmentMode::Replace,
            LoadingsMode::Union => AugmentMode::Union,
        };
    }
    if let Some(path) = &a.specific_risks {
        let pairs = load_value_csv(path, "specific_risk")?;
        opts.weight_source = WeightSource::Precomputed(align_to(panel.alpha_ids(), pairs, "specific risks")?);
    }
    if let Some(k) = a.pc_specific {
        opts.weight_source = WeightSource::PcSpecific { k, zeta: a.zeta };
    }

    let t = Instant::now();
    let rep = combine_with_report(&panel, &e, &opts)?;
    let compute = t.elapsed().as_secs_f64();
    save_weights_csv(&a.out, panel.alpha_ids(), rep.weights.weights())?;
    if !rep.dropped_columns.is_empty() {
        eprintln!("warning: {} dependent loading columns dropped", rep.dropped_columns.len());
    }
    println!(
        "N = {}, M = {}, eta = {:.6e}, min q = {:.6e}, negative weights = {}, columns = {}, \
         combine {:.3} s, total {:.3} s",
        panel.n_alphas(),
        panel.m(),
        rep.weights.eta(),
        rep.min_q,
        rep.negative_count,
        rep.n_columns,
        compute,
        start.elapsed().as_secs_f64()
    );
    Ok(true)
}

pub fn oracle_check(a: &OracleArgs, seed: u64, cap: DenseCap) -> Result<bool> {
    cap.check("oracle check", a.n)?;
    let k = a.k.min(a.m).min(a.n);
    let spec = SynthSpec { n_alphas: a.n, n_obs: a.m + 1, true_k: k, seed, ..Default::default() };
    let s = gen_synthetic(&spec)?;
    let exact = exact_factor_weights(&s.expected, &s.model)?;
    let cov = s.model.dense_covariance(cap)?;
    let dense = alphacomb::optimizer::dense_oracle_weights(cov.view(), &s.expected, cap)?;
    let identity = rel_err(exact.weights(), dense.weights());
    let ok = identity <= IDENTITY_TOL;
    println!(
        "factor-model identity (N = {}, K = {k}): max rel err {identity:.3e} [{}]",
        a.n,
        if ok { "PASS" } else { "FAIL" }
    );
    match regression_limit_weights(&s.expected, &s.model) {
        Ok(l) => println!(
            "regression limit vs exact: max rel err {:.3e}, min q {:.3e}",
            rel_err(l.weights.weights(), exact.weights()),
            l.min_q
        ),
        Err(e) => println!("regression limit vs exact: n/a ({e})"),
    }

    // Pipeline against the dense inverse of the shrunk sample covariance.
    let mut table: Vec<Vec<Option<f64>>> = vec![Vec::new(); a.zeta.len()];
    for &n in &a.trend {
        let mut row_err = |msg: String| {
            println!("shrinkage sweep N = {n}: n/a ({msg})");
            for col in table.iter_mut() {
                col.push(None);
            }
        };
        if n > cap.0 {
            row_err(format!("above dense cap {}", cap.0));
            continue;
        }
        let spec = SynthSpec { n_alphas: n, n_obs: a.m + 1, true_k: a.k.min(a.m), seed, ..Default::default() };
        let s = match gen_synthetic(&spec) {
            Ok(s) => s,
            Err(e) => {
                row_err(e.to_string());
                continue;
            }
        };
        let keep = CombineOptions { remove_overall_mode: false, ..Default::default() };
        let pipeline = match combine_weights(&s.panel, &s.expected, &keep) {
            Ok(w) => w,
            Err(e) => {
                row_err(e.to_string());
                continue;
            }
        };
        let x = serial_demean(&s.panel);
        for (z, &zeta) in a.zeta.iter().enumerate() {
            let dev = shrinkage_dense_weights(&x, &s.expected, zeta, cap).map(|d| rel_err(pipeline.weights(), d.weights()));
            match dev {
                Ok(d) => {
                    println!("shrinkage sweep N = {n}, zeta = {zeta}: max rel err {d:.3e}");
                    table[z].push(Some(d));
                }
                Err(e) => {
                    println!("shrinkage sweep N = {n}, zeta = {zeta}: n/a ({e})");
                    table[z].push(None);
                }
            }
        }
    }
    for (zeta, devs) in a.zeta.iter().zip(&table) {
        let vals: Vec<f64> = devs.iter().flatten().copied().collect();
        if vals.len() >= 2 {
            let falling = vals.windows(2).all(|w| w[1] < w[0]);
            println!("trend zeta = {zeta}: {}", if falling { "decreasing in N" } else { "not decreasing in N" });
        }
    }
    Ok(ok)
}

pub fn bench(a: &BenchArgs, seed: u64) -> Result<bool> {
    let points: Vec<(usize, usize)> = a.n.iter().map(|&n| (n, a.m)).collect();
    let mut out = run_bench(&points, a.repeats, seed)?;
    if out.aborted.is_none() && !a.vary_m.is_empty() {
        let n0 = a.n.first().copied().context("--n is empty")?;
        let points: Vec<(usize, usize)> = a.vary_m.iter().map(|&m| (n0, m)).collect();
        let more = run_bench(&points, a.repeats, seed)?;
        out.rows.extend(more.rows);
        out.aborted = more.aborted;
    }
    write_bench(&out, a.out.as_deref())?;
    for r in &out.rows {
        let ratio = r.ratio.map(|x| format!(", ratio {x:.2}")).unwrap_or_default();
        eprintln!("N = {}, M = {}: {:.3} s{ratio}", r.n, r.m, r.seconds);
    }
    if let Some(msg) = &out.aborted {
        eprintln!("bench aborted: {msg}");
        return Ok(false);
    }
    Ok(true)
}

fn write_bench(out: &BenchOutcome, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?);
            out.write_csv(&mut w)?;
            w.flush()?;
        }
        None => out.write_csv(&mut io::stdout().lock())?,
    }
    Ok(())
}

pub fn gen(a: &GenArgs, seed: u64) -> Result<bool> {
    let spec = SynthSpec {
        n_alphas: a.n,
        n_obs: a.m + 1,
        true_k: a.k,
        rho_range: (a.rho_min, a.rho_max),
        vol_range: (a.vol_min, a.vol_max),
        seed,
    };
    let s = gen_synthetic(&spec)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let ids = s.panel.alpha_ids();
    save_returns_csv(&s.panel, a.out_dir.join("returns.csv"))?;
    save_expected_csv(a.out_dir.join("expected.csv"), ids, &s.expected)?;

    // Factor covariance of the generating model is the identity.
    let path = a.out_dir.join("truth.csv");
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    write!(w, "alpha_id,specific_risk")?;
    for f in 1..=a.k {
        write!(w, ",loading_{f}")?;
    }
    writeln!(w)?;
    let omega = s.model.omega();
    for (i, id) in ids.iter().enumerate() {
        write!(w, "{id},{}", s.model.xi()[i])?;
        for v in omega.row(i) {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    println!("wrote N = {}, M = {}, K = {} to {}", a.n, a.m, a.k, a.out_dir.display());
    Ok(true)
}

pub fn style(a: &StyleArgs, cap: DenseCap) -> Result<bool> {
    let panel = load_returns_csv(&a.returns)?;
    cap.check("style regression", panel.n_alphas())?;
    let x = serial_demean(&panel);
    let sigma: Vec<f64> = sample_variances(&x)?.iter().map(|v| v.sqrt()).collect();
    let y = normalize_and_trim(&x, &sigma, false)?;
    let psi_a = flatten_offdiag(sample_correlation_dense(&y, cap)?.view())?;
    let nu = match a.factor {
        StyleFactor::Volatility => log_center("volatility", &sigma)?,
        StyleFactor::Momentum => {
            let mom: Vec<f64> = panel.returns().rows().into_iter().map(|r| r.sum()).collect();
            log_center("momentum", &mom)?
        }
    };
    let t = style_tensors(&nu)?;
    let rep = style_regression(&psi_a, &t.y, &t.z)?;
    rep.write_csv(&a.out)?;
    figure_projection(&psi_a, &t.y, &t.z, &rep.coefficients)?.write_csv(&a.figure)?;
    print!("{}", rep.to_table());
    Ok(true)
}
