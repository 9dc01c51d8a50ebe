//! CSV and binary dumps of path collections.
//!
//! CSV rows are `path_id,t,x_1..x_d` with shortest round-trip decimals, so a
//! CSV dump and a binary dump of the same paths decode to identical values.

use std::io::{BufRead, Read, Write};
use std::sync::Arc;

use super::SamplePath;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LTCPATH1";

pub fn write_paths_csv<W: Write>(mut w: W, paths: &[SamplePath]) -> Result<()> {
    let d = paths.first().map_or(1, |p| p.dim());
    let mut header = String::from("path_id,t");
    for i in 1..=d {
        header.push_str(&format!(",x_{i}"));
    }
    writeln!(w, "{header}")?;
    for (id, p) in paths.iter().enumerate() {
        for (k, t) in p.times().iter().enumerate() {
            write!(w, "{id},{t}")?;
            for v in p.value(k) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

fn csv_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset: line,
        message: format!("line {line}: {}", message.into()),
    }
}

/// Reads paths written by [`write_paths_csv`]. Seeds and jump times are not
/// part of the CSV format and come back as 0 and empty.
pub fn read_paths_csv<R: BufRead>(r: R) -> Result<Vec<SamplePath>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| csv_error(1, "missing header"))??;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "path_id" || cols[1] != "t" {
        return Err(csv_error(1, "expected header path_id,t,x_1.."));
    }
    let d = cols.len() - 2;
    let mut rows: Vec<(usize, Vec<f64>, Vec<f64>)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 2 {
            return Err(csv_error(lineno, format!("expected {} fields", d + 2)));
        }
        let id: usize = fields[0].parse().map_err(|_| csv_error(lineno, "bad path id"))?;
        let nums = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| csv_error(lineno, format!("bad number '{f}'"))))
            .collect::<Result<Vec<f64>>>()?;
        match rows.last_mut() {
            Some((last, t, v)) if *last == id => {
                t.push(nums[0]);
                v.extend_from_slice(&nums[1..]);
            }
            _ => {
                if id != rows.len() {
                    return Err(csv_error(lineno, "path ids must be consecutive from 0"));
                }
                rows.push((id, vec![nums[0]], nums[1..].to_vec()));
            }
        }
    }
    let mut shared: Option<Arc<[f64]>> = None;
    rows.into_iter()
        .map(|(_, t, v)| {
            let times = match &shared {
                Some(s) if **s == *t => Arc::clone(s),
                _ => {
                    let s: Arc<[f64]> = t.into();
                    shared = Some(Arc::clone(&s));
                    s
                }
            };
            SamplePath::new(times, v, d, 0)
        })
        .collect()
}

pub fn write_paths_binary<W: Write>(mut w: W, paths: &[SamplePath]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(paths.len() as u64).to_le_bytes())?;
    for p in paths {
        w.write_all(&(p.dim() as u64).to_le_bytes())?;
        w.write_all(&(p.len() as u64).to_le_bytes())?;
        w.write_all(&(p.jump_times().len() as u64).to_le_bytes())?;
        w.write_all(&p.seed().to_le_bytes())?;
        for v in p.times().iter().chain(p.values()).chain(p.jump_times()) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n).map(|_| read_u64(r).map(f64::from_bits)).collect()
}

pub fn read_paths_binary<R: Read>(mut r: R) -> Result<Vec<SamplePath>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: "not a path dump".into(),
        });
    }
    let n = read_u64(&mut r)? as usize;
    let mut out = Vec::with_capacity(n.min(1 << 20));
    let mut shared: Option<Arc<[f64]>> = None;
    for _ in 0..n {
        let d = read_u64(&mut r)? as usize;
        let len = read_u64(&mut r)? as usize;
        let n_jumps = read_u64(&mut r)? as usize;
        let seed = read_u64(&mut r)?;
        let t = read_f64s(&mut r, len)?;
        let v = read_f64s(&mut r, len.saturating_mul(d))?;
        let jumps = read_f64s(&mut r, n_jumps)?;
        let times = match &shared {
            Some(s) if **s == *t => Arc::clone(s),
            _ => {
                let s: Arc<[f64]> = t.into();
                shared = Some(Arc::clone(&s));
                s
            }
        };
        out.push(SamplePath::new(times, v, d, seed)?.with_jump_times(jumps));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate_ensemble, SimConfig};
    use crate::symbol::Preset;

    #[test]
    fn csv_and_binary_round_trip() {
        let t = Preset::CompoundPoisson { rate: 3.0, jump: 0.7 }.triplet(2).unwrap();
        let mut t2 = t.clone();
        t2.diffusion = crate::symbol::Diffusion::isotropic(0.3, 2);
        let e = simulate_ensemble(&t2, &[0.1, -0.2], &SimConfig::new(0.01, 0.5, 5), 3).unwrap();

        let mut csv = Vec::new();
        write_paths_csv(&mut csv, &e.paths).unwrap();
        let back = read_paths_csv(csv.as_slice()).unwrap();
        let mut bin = Vec::new();
        write_paths_binary(&mut bin, &e.paths).unwrap();
        let back_bin = read_paths_binary(bin.as_slice()).unwrap();
        assert_eq!(back_bin, e.paths);
        for (a, b) in back.iter().zip(&back_bin) {
            assert_eq!(a.times(), b.times());
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }
        assert!(std::str::from_utf8(&csv).unwrap().starts_with("path_id,t,x_1,x_2\n"));
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(read_paths_csv("path_id,t,x_1\n0,0,a\n".as_bytes()).is_err());
        assert!(read_paths_csv("id,t,x_1\n".as_bytes()).is_err());
        assert!(read_paths_csv("path_id,t,x_1\n1,0,0\n".as_bytes()).is_err());
    }
}
