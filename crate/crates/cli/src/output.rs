//! File output helpers.

use std::path::{Path, PathBuf};

use fvheat_core::linalg::{self, CMatrix, C64};
use fvheat_core::records::ResultRecord;
use serde_json::{json, Value};

use crate::config::Scenario;
use crate::{CliError, CliResult};

pub fn out_dir(scn: &Scenario) -> CliResult<PathBuf> {
    let dir = scn.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io { path: dir.clone(), source })?;
    Ok(dir)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_record(dir: &Path, name: &str, rec: &ResultRecord) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let mut text = rec.to_json_pretty().expect("records serialize");
    text.push('\n');
    write_text(&path, &text)?;
    Ok(path)
}

pub fn create(path: &Path) -> CliResult<std::fs::File> {
    std::fs::File::create(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn complex(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn matrix(m: &CMatrix) -> Value {
    json!(linalg::to_pairs(m))
}

/// Echo of the resolved run parameters.
pub fn parameters(scn: &Scenario) -> Value {
    let baths: Vec<Value> = scn
        .baths
        .iter()
        .zip(&scn.kerr)
        .map(|(b, k)| {
            json!({
                "beta": b.beta,
                "kerr": k,
                "modes": b.modes.iter().map(|m| json!({"omega": m.omega, "mass": m.mass, "coupling": m.coupling})).collect::<Vec<_>>(),
                "ramp": b.ramp.map(|r| json!({"t_on": r.t_on, "t_off": r.t_off, "width": r.width})),
            })
        })
        .collect();
    json!({
        "system_dim": scn.system.dim(),
        "h_s": matrix(scn.system.h_s()),
        "x_s": matrix(scn.system.x_s()),
        "rho0": matrix(&scn.rho0),
        "baths": baths,
        "t_i": scn.grid.t_i,
        "t_f": scn.grid.t_f,
        "n_slices": scn.grid.n_slices,
        "counted_bath": scn.counted,
        "nu": scn.nus,
        "order": scn.order,
        "budget": scn.budget.to_string(),
        "gauss_order": scn.gauss_order,
        "oracle_steps": scn.oracle_steps(),
    })
}
