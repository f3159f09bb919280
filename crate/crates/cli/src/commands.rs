//! `kernels`, `evolve` and `heatgf`.

use std::time::Instant;

use fvheat_core::bath::build_kernel_table;
use fvheat_core::linalg::{max_abs_diff, C64};
use fvheat_core::oracle::richardson_log_derivative;
use fvheat_core::records::ResultRecord;
use serde_json::json;

use crate::config::Scenario;
use crate::engines;
use crate::output::{self, complex, matrix, parameters};
use crate::{CliError, CliResult};

fn nus_or_zero(scn: &Scenario) -> Vec<f64> {
    if scn.nus.is_empty() {
        vec![0.0]
    } else {
        scn.nus.clone()
    }
}

pub fn kernels(scn: &Scenario) -> CliResult<()> {
    let dir = output::out_dir(scn)?;
    let tau_max = scn.grid.t_f - scn.grid.t_i;
    let mut files = Vec::new();
    for (b, spec) in scn.baths.iter().enumerate() {
        for (j, &nu) in nus_or_zero(scn).iter().enumerate() {
            let table = build_kernel_table(spec, tau_max, scn.kernel_samples, nu)?;
            let name = format!("kernels_bath{b}_nu{j}.csv");
            table.write_csv(output::create(&dir.join(&name))?)?;
            files.push(json!({"bath": b, "nu": nu, "file": name, "kind": "kernel_table"}));
        }
    }
    let truncated = if scn.order >= 3 || scn.kerr.iter().any(|&k| k != 0.0) {
        Some(engines::truncated_baths(scn)?)
    } else {
        None
    };
    for (j, &nu) in nus_or_zero(scn).iter().enumerate() {
        let coeffs = engines::coefficients(scn, truncated.as_deref(), nu)?;
        for (b, cf) in coeffs.iter().enumerate() {
            let name = format!("influence_bath{b}_nu{j}.csv");
            cf.write_csv(output::create(&dir.join(&name))?)?;
            files.push(json!({"bath": b, "nu": cf.nu, "file": name, "kind": "influence_coefficients"}));
        }
    }
    if let Some(tb) = &truncated {
        if let Some(h) = engines::higher_order(scn, scn.order, tb)? {
            let name = "higher_order.csv".to_string();
            h.write_csv(output::create(&dir.join(&name))?)?;
            files.push(json!({"file": name, "kind": "higher_order_kernels", "order": scn.order}));
        }
    }
    for f in &files {
        println!("wrote {}", dir.join(f["file"].as_str().unwrap_or_default()).display());
    }
    output::write_record(&dir, "kernels.json", &ResultRecord::new("kernels", parameters(scn), json!({ "files": files })))?;
    Ok(())
}

pub fn evolve(scn: &Scenario) -> CliResult<()> {
    let run_paths = scn.budget > 0;
    if run_paths {
        engines::check_budget(scn)?;
    } else {
        eprintln!("warning: path budget is 0, running the oracle only and skipping the engine comparison");
    }
    let dir = output::out_dir(scn)?;
    let params = parameters(scn);

    let start = Instant::now();
    let truncated = engines::truncated_baths(scn)?;
    let oracle = engines::oracle(scn, truncated.clone())?;
    let rho_oracle = engines::oracle_density(scn, &oracle)?;
    let rec = ResultRecord::new("density", params.clone(), json!({ "engine": "oracle", "rho": matrix(&rho_oracle) }))
        .with_wall_time(start.elapsed().as_secs_f64());
    output::write_record(&dir, "density_oracle.json", &rec)?;
    println!("oracle     rho_S(t_f) = {}", matrix(&rho_oracle));

    if !run_paths {
        return Ok(());
    }
    let start = Instant::now();
    let coeffs = engines::coefficients(scn, Some(&truncated), 0.0)?;
    let kernels = engines::higher_order(scn, scn.order, &truncated)?;
    let rho_paths = engines::path_density(scn, &coeffs, kernels.as_ref())?;
    let rec = ResultRecord::new(
        "density",
        params.clone(),
        json!({ "engine": "path_sum", "order": scn.order, "rho": matrix(&rho_paths) }),
    )
    .with_wall_time(start.elapsed().as_secs_f64());
    output::write_record(&dir, "density_pathsum.json", &rec)?;
    println!("path sum   rho_S(t_f) = {}", matrix(&rho_paths));

    let diff = max_abs_diff(&rho_paths, &rho_oracle);
    let within = diff < scn.tolerance;
    let rec = ResultRecord::new("density", params, json!({ "max_abs_diff": diff, "within_tolerance": within }))
        .with_tolerance(scn.tolerance);
    output::write_record(&dir, "density_comparison.json", &rec)?;
    println!("max |difference| = {diff:.3e} (tolerance {:.1e})", scn.tolerance);
    Ok(())
}

fn write_gf_csv(path: &std::path::Path, nus: &[f64], values: &[C64]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(output::create(path)?);
    let io = |e: csv::Error| CliError::Engine(e.into());
    w.write_record(["nu", "re_g", "im_g"]).map_err(io)?;
    for (nu, g) in nus.iter().zip(values) {
        w.serialize((nu, g.re, g.im)).map_err(io)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn heatgf(scn: &Scenario) -> CliResult<()> {
    let run_paths = scn.budget > 0;
    if run_paths {
        engines::check_budget(scn)?;
        if scn.order > 2 {
            eprintln!("warning: higher-order terms are not applied to counting; path-sum G uses order 2");
        }
    } else {
        eprintln!("warning: path budget is 0, running the oracle only");
    }
    let dir = output::out_dir(scn)?;
    let params = parameters(scn);
    let nus = nus_or_zero(scn);
    let truncated = engines::truncated_baths(scn)?;
    let oracle = engines::oracle(scn, truncated.clone())?;

    let start = Instant::now();
    let g_oracle = engines::oracle_gf(scn, &oracle, &nus)?;
    let oracle_time = start.elapsed().as_secs_f64() / nus.len() as f64;
    let mut g_paths = Vec::new();
    for (j, (&nu, &go)) in nus.iter().zip(&g_oracle).enumerate() {
        let mut values = json!({
            "nu": nu,
            "t_f": scn.grid.t_f,
            "n_slices": scn.grid.n_slices,
            "oracle": complex(go),
        });
        let mut wall = oracle_time;
        if run_paths {
            let start = Instant::now();
            let gp = engines::path_gf(scn, Some(&truncated), nu)?;
            wall += start.elapsed().as_secs_f64();
            values["path_sum"] = complex(gp);
            values["abs_diff"] = json!((gp - go).norm());
            g_paths.push(gp);
            println!("nu = {nu:>8.4}  G_path = {:+.10} {:+.10}i  G_oracle = {:+.10} {:+.10}i", gp.re, gp.im, go.re, go.im);
        } else {
            println!("nu = {nu:>8.4}  G_oracle = {:+.10} {:+.10}i", go.re, go.im);
        }
        let rec = ResultRecord::new("gf", params.clone(), values).with_wall_time(wall);
        output::write_record(&dir, &format!("gf_nu{j}.json"), &rec)?;
    }
    write_gf_csv(&dir.join("heatgf_oracle.csv"), &nus, &g_oracle)?;
    if run_paths {
        write_gf_csv(&dir.join("heatgf_pathsum.csv"), &nus, &g_paths)?;
    }

    // first moment of the heat: finite differences in nu against tr{H_C Δρ}
    let h = scn.fd_step;
    let steps = [h, -h, 2.0 * h, -2.0 * h];
    let g = engines::oracle_gf(scn, &oracle, &steps)?;
    let fd_oracle = richardson_log_derivative(g[0], g[1], g[2], g[3], h);
    let direct = oracle.heat_first_moment(scn.counted, &scn.rho0, scn.grid.t_i, scn.grid.t_f, scn.oracle_steps())?;
    let mut rows = vec![("oracle", fd_oracle, Some(direct))];
    if run_paths {
        let g: Vec<C64> = steps
            .iter()
            .map(|&nu| engines::path_gf(scn, Some(&truncated), nu))
            .collect::<fvheat_core::Result<_>>()?;
        rows.push(("path_sum", richardson_log_derivative(g[0], g[1], g[2], g[3], h), None));
    }
    let path = dir.join("first_moment.csv");
    let mut w = csv::Writer::from_writer(output::create(&path)?);
    let io = |e: csv::Error| CliError::Engine(e.into());
    w.write_record(["engine", "fd_first_moment_re", "fd_first_moment_im", "direct_first_moment"]).map_err(io)?;
    for (engine, fd, direct) in &rows {
        let direct = direct.map(|d| d.to_string()).unwrap_or_default();
        w.write_record([engine.to_string(), fd.re.to_string(), fd.im.to_string(), direct]).map_err(io)?;
        println!("first moment [{engine}]: -i d/dnu ln G = {:.10e}", fd.re);
    }
    w.flush().map_err(|source| CliError::Io { path, source })?;
    println!("first moment [oracle]: tr(H_C (rho(t) - rho(0))) = {direct:.10e}");
    let rel = (fd_oracle.re - direct).abs() / direct.abs().max(f64::MIN_POSITIVE);
    let rec = ResultRecord::new(
        "gf",
        params,
        json!({
            "fd_step": h,
            "fd_first_moment_oracle": complex(fd_oracle),
            "direct_first_moment_oracle": direct,
            "relative_difference": rel,
            "fd_first_moment_path_sum": rows.get(1).map(|r| complex(r.1)),
        }),
    );
    output::write_record(&dir, "first_moment.json", &rec)?;
    Ok(())
}
