use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use varsbp::linalg::{DenseMatrix, Eigenvalue};

use crate::Failure;

pub fn matrix_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn spectrum_csv(eigs: &[Eigenvalue]) -> String {
    let mut out = String::from("re,im\n");
    for e in eigs {
        let _ = writeln!(out, "{:.16e},{:.16e}", e.re, e.im);
    }
    out
}

pub fn vector_csv(v: &[f64]) -> String {
    let mut out = String::from("index,value\n");
    for (i, x) in v.iter().enumerate() {
        let _ = writeln!(out, "{i},{x:.16e}");
    }
    out
}

/// Columns of equal length under a header.
pub fn columns_csv(header: &[&str], cols: &[&[f64]]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    let n = cols.first().map_or(0, |c| c.len());
    for k in 0..n {
        let row: Vec<String> = cols.iter().map(|c| format!("{:.16e}", c[k])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Writes `content` to `path`, or to standard output when `path` is absent.
pub fn emit(path: Option<&Path>, content: &str) -> Result<(), Failure> {
    match path {
        Some(p) => write_file(p, content),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| Failure::Usage(format!("cannot write to standard output: {e}")))
        }
    }
}

pub fn write_file(path: &Path, content: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| Failure::Usage(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, content).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Writes every `(name, content)` pair below `dir`.
pub fn write_dir(dir: &Path, files: &[(String, String)]) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", dir.display())))?;
    for (name, content) in files {
        let p: PathBuf = dir.join(name);
        write_file(&p, content)?;
    }
    Ok(())
}
