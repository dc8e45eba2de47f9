//! Output files. Every file starts with a provenance header line
//! `# pfdamage <version> config=<hash>`; numbers are written with Rust's
//! shortest round-trip formatting so reading a file back is bit-exact.
//! Layouts are documented in `docs/FORMATS.md`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::control::{ContinuationReport, ControlBasis, OptimizeResult};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::material::CoefficientSplit;
use crate::piecewise::PiecewisePoly;
use crate::stepper::{EnergyRecord, Trajectory};
use crate::verify::{DependenceReport, SweepReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// First 16 hex digits of the SHA-256 of `config_text`.
pub fn config_hash(config_text: &str) -> String {
    let digest = Sha256::digest(config_text.as_bytes());
    digest.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn provenance_header(config_text: &str) -> String {
    format!("# pfdamage {VERSION} config={}", config_hash(config_text))
}

/// Write `header` and `body` to `path`, creating parent directories.
pub fn write_file(path: &Path, header: &str, body: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{header}")?;
    f.write_all(body.as_bytes())?;
    f.flush()?;
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn join(xs: &[f64], sep: &str) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(sep)
}

/// Nodal fields at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub k: usize,
    pub t: f64,
    pub dim: usize,
    pub coords: Vec<[f64; 2]>,
    pub chi: Vec<f64>,
    /// Node-major, `dim` components per node.
    pub u: Vec<f64>,
}

impl Snapshot {
    pub fn from_level(grid: &Grid, traj: &Trajectory, k: usize) -> Result<Self> {
        let u = traj.u_level(k)?.to_vec();
        Ok(Snapshot {
            k,
            t: traj.time(k),
            dim: grid.dim(),
            coords: (0..grid.n_nodes()).map(|n| grid.node_coords(n)).collect(),
            chi: traj.chi[k].clone(),
            u,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# snapshot k={} t={} dim={} nodes={}\n", self.k, self.t, self.dim, self.chi.len());
        s.push_str(if self.dim == 2 { "x,y,chi,u_x,u_y\n" } else { "x,chi,u_x\n" });
        for (n, p) in self.coords.iter().enumerate() {
            let u = &self.u[n * self.dim..(n + 1) * self.dim];
            if self.dim == 2 {
                let _ = writeln!(s, "{},{},{},{},{}", p[0], p[1], self.chi[n], u[0], u[1]);
            } else {
                let _ = writeln!(s, "{},{},{}", p[0], self.chi[n], u[0]);
            }
        }
        s
    }

    /// Parse a snapshot file (header lines starting with `#` other than the
    /// `# snapshot` line are ignored).
    pub fn parse(text: &str) -> Result<Self> {
        let fmt_err = |m: String| Error::Format(m);
        let mut meta = None;
        let mut rows = Vec::new();
        let mut seen_columns = false;
        for (i, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix("# snapshot ") {
                let mut k = None;
                let mut t = None;
                let mut dim = None;
                for kv in rest.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("k", v)) => k = v.parse::<usize>().ok(),
                        Some(("t", v)) => t = v.parse::<f64>().ok(),
                        Some(("dim", v)) => dim = v.parse::<usize>().ok(),
                        _ => {}
                    }
                }
                match (k, t, dim) {
                    (Some(k), Some(t), Some(d @ (1 | 2))) => meta = Some((k, t, d)),
                    _ => return Err(fmt_err(format!("line {}: malformed snapshot header", i + 1))),
                }
            } else if line.starts_with('#') || line.trim().is_empty() {
                continue;
            } else if !seen_columns {
                seen_columns = true;
            } else {
                let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
                rows.push(vals.map_err(|e| fmt_err(format!("line {}: {e}", i + 1)))?);
            }
        }
        let (k, t, dim) = meta.ok_or_else(|| fmt_err("missing `# snapshot` line".into()))?;
        let width = 2 * dim + 1;
        let mut snap = Snapshot { k, t, dim, coords: Vec::new(), chi: Vec::new(), u: Vec::new() };
        for (r, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(fmt_err(format!("data row {}: expected {width} columns, got {}", r + 1, row.len())));
            }
            snap.coords.push(if dim == 2 { [row[0], row[1]] } else { [row[0], 0.0] });
            snap.chi.push(row[dim]);
            snap.u.extend_from_slice(&row[dim + 1..]);
        }
        Ok(snap)
    }
}

pub fn energy_csv(records: &[EnergyRecord]) -> String {
    let mut s = String::from(
        "k,t,kinetic,elastic,gradient,potential,free_energy,total,dissipation_increment,work,penalty_mass,\
         convex_split_slack,nonconvex_allowance,slack,slack_scale,newton_iterations,damage_residual,\
         complementarity,max_rate,max_positive_rate\n",
    );
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.t,
            r.kinetic,
            r.elastic,
            r.gradient,
            r.potential,
            r.free_energy,
            r.total(),
            r.dissipation_increment,
            r.work,
            r.penalty_mass,
            r.convex_split_slack,
            r.nonconvex_allowance,
            r.slack,
            r.slack_scale,
            r.newton_iterations,
            r.damage_residual,
            r.complementarity,
            r.max_rate,
            r.max_positive_rate
        );
    }
    s
}

pub fn sweep_csv(report: &SweepReport) -> String {
    let mut s = String::from(
        "value,max_positive_rate,max_rate,max_complementarity,final_energy,energy_violations,distance,failure\n",
    );
    for p in &report.points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            p.value,
            p.max_positive_rate,
            p.max_rate,
            p.max_complementarity,
            p.final_energy,
            p.energy_violations,
            fmt_opt(p.distance),
            p.failure.as_deref().unwrap_or("").replace([',', '\n'], ";")
        );
    }
    s
}

pub fn dependence_csv(report: &DependenceReport) -> String {
    let mut s = String::from("delta,lhs,rhs,ratio\n");
    for r in &report.rows {
        let _ = writeln!(s, "{},{},{},{}", r.delta, r.lhs, r.rhs, r.ratio);
    }
    s
}

pub fn continuation_csv(report: &ContinuationReport) -> String {
    let mut s = String::from("beta,value,norm,step_from_previous,evals,converged,distance_to_anchor,coeffs\n");
    for l in &report.levels {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            l.beta,
            l.value,
            l.norm,
            l.step_from_previous,
            l.evals,
            l.converged,
            fmt_opt(l.distance_to_anchor),
            join(&l.coeffs, ";")
        );
    }
    s
}

/// Every cost evaluation of an optimizer run, in evaluation order.
pub fn landscape_csv(result: &OptimizeResult) -> String {
    let mut s = String::from("coeffs,value\n");
    for p in &result.landscape {
        let _ = writeln!(s, "{},{}", join(&p.coeffs, ";"), p.value);
    }
    s
}

/// Control coefficients, one per line with mode and knot index.
pub fn controls_csv(basis: &ControlBasis, coeffs: &[f64]) -> String {
    let mut s = String::from("index,mode,knot,time,value\n");
    let knots = basis.knots();
    for (i, c) in coeffs.iter().enumerate() {
        let (m, j) = (i / knots.len(), i % knots.len());
        let _ = writeln!(s, "{i},{m},{j},{},{c}", knots[j]);
    }
    s
}

/// Read the `value` column of a controls file.
pub fn parse_controls(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == "index,mode,knot,time,value" => {}
        _ => return Err(Error::Format("controls file: missing column header".into())),
    }
    for (i, line) in lines {
        let cols: Vec<&str> = line.split(',').collect();
        let idx = cols.first().and_then(|c| c.parse::<usize>().ok());
        if cols.len() != 5 || idx != Some(out.len()) {
            return Err(Error::Format(format!("controls file line {}: malformed row", i + 1)));
        }
        out.push(cols[4].parse::<f64>().map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

fn pieces_rows(s: &mut String, name: &str, p: &PiecewisePoly) {
    let breaks = p.breaks();
    let (lo, hi) = p.tail_pieces();
    let _ = writeln!(s, "{name},-inf,{},{}", breaks[0], join(&lo, ";"));
    for (a, b, c) in p.interval_pieces() {
        let _ = writeln!(s, "{name},{a},{b},{}", join(&c, ";"));
    }
    let _ = writeln!(s, "{name},{},inf,{}", breaks[breaks.len() - 1], join(&hi, ";"));
}

/// Piecewise coefficients of the convex and concave parts. Each row is one
/// piece, with coefficients in powers of `x - anchor`; the anchor is the left
/// end except for the unbounded left piece, which is anchored at its right
/// end.
pub fn split_pieces_csv(split: &CoefficientSplit) -> String {
    // adding 0.0 turns a negative zero into a positive one
    let mut s = format!(
        "# lambda1={} lambda2={} delta={}\nfunction,left,right,coefficients\n",
        split.lambda1 + 0.0,
        split.lambda2 + 0.0,
        split.delta
    );
    pieces_rows(&mut s, "c1", &split.c1);
    pieces_rows(&mut s, "c2", &split.c2);
    s
}

/// `x, c, c1, c2, c1', c2', c1'', c2''` on a uniform sample of `[lo, hi]`.
pub fn split_samples_csv(split: &CoefficientSplit, lo: f64, hi: f64, n: usize) -> String {
    let (d1, d2) = (split.c1.derivative(), split.c2.derivative());
    let (dd1, dd2) = (d1.derivative(), d2.derivative());
    let mut s = String::from("x,c,c1,c2,c1_prime,c2_prime,c1_second,c2_second\n");
    for i in 0..n {
        let x = if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
        let _ = writeln!(
            s,
            "{x},{},{},{},{},{},{},{}",
            split.c(x),
            split.c1.eval(x),
            split.c2.eval(x),
            d1.eval(x),
            d2.eval(x),
            dd1.eval(x),
            dd2.eval(x)
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let snap = Snapshot {
            k: 3,
            t: 0.1 + 0.2,
            dim: 2,
            coords: vec![[0.0, 0.0], [1.0 / 3.0, 0.7]],
            chi: vec![0.9, -1e-17],
            u: vec![1.0 / 7.0, f64::MIN_POSITIVE, -2.5e300, 0.0],
        };
        let text = format!("{}\n{}", provenance_header("x"), snap.to_text());
        assert_eq!(Snapshot::parse(&text).unwrap(), snap);
    }

    #[test]
    fn hash_is_sixteen_hex_digits() {
        let h = config_hash("[geometry]\n");
        assert_eq!(h.len(), 16);
        assert!(h.chars().all(|c| c.is_ascii_hexdigit()));
        assert_ne!(h, config_hash("[geometry] \n"));
    }

    #[test]
    fn controls_parse_rejects_gaps() {
        let ok = "# h\nindex,mode,knot,time,value\n0,0,0,0,1.5\n1,1,0,0,-0.25\n";
        assert_eq!(parse_controls(ok).unwrap(), vec![1.5, -0.25]);
        assert!(parse_controls("index,mode,knot,time,value\n1,0,0,0,1\n").is_err());
    }
}
