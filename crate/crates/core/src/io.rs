//! Trajectory files: CSV with header `t,q1..qn,qd1..qdn,u1..un[,l1..l2n]`
//! and a JSON sidecar holding the metadata.
//!
//! Values are written with 17 significant digits, which round-trips `f64`
//! exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::integrate::{FlagKind, RunFlag, Sample, Source, Trajectory, TrajectoryMeta};

/// Column names for `n` degrees of freedom.
pub fn header(n: usize, with_costates: bool) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("q{i}")));
    cols.extend((1..=n).map(|i| format!("qd{i}")));
    cols.extend((1..=n).map(|i| format!("u{i}")));
    if with_costates {
        cols.extend((1..=2 * n).map(|i| format!("l{i}")));
    }
    cols
}

/// `17` significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `traj.csv` → `traj.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

/// `base.ext` → `base<suffix>`.
pub fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

pub fn write_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let first = traj.samples.first().ok_or_else(|| Error::Invalid("empty trajectory".into()))?;
    let n = first.u.len();
    let with_l = traj.has_costates();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(n, with_l))?;
    for s in &traj.samples {
        let mut row = vec![fmt_f64(s.t)];
        row.extend(s.x.iter().chain(&s.u).map(|v| fmt_f64(*v)));
        if with_l {
            row.extend(s.lambda.as_ref().expect("checked").iter().map(|v| fmt_f64(*v)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the CSV at `path` and the metadata next to it.
pub fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    write_csv(traj, BufWriter::new(File::create(path)?))?;
    write_json(&traj.meta, &sidecar_path(path))
}

pub fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Parses trajectory CSV text. `t` must start at 0 and increase strictly.
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Trajectory> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let names: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let cols = names.len();
    let (n, with_l) = if cols >= 4 && (cols - 1) % 5 == 0 && names == header((cols - 1) / 5, true) {
        ((cols - 1) / 5, true)
    } else if cols >= 4 && (cols - 1) % 3 == 0 && names == header((cols - 1) / 3, false) {
        ((cols - 1) / 3, false)
    } else {
        return Err(Error::Schema(format!(
            "unexpected header [{}]; expected t,q1..qn,qd1..qdn,u1..un[,l1..l2n]",
            names.join(",")
        )));
    };

    let mut samples: Vec<Sample> = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Schema(format!("row {row}: {e}")))?;
        if rec.len() != cols {
            return Err(Error::Schema(format!("row {row} has {} fields, expected {cols}", rec.len())));
        }
        let mut vals = Vec::with_capacity(cols);
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Schema(format!("row {row}, column {}: cannot parse {field:?}", names[j])))?;
            if !v.is_finite() {
                return Err(Error::NaN {
                    row,
                    column: names[j].clone(),
                });
            }
            vals.push(v);
        }
        let t = vals[0];
        if row == 0 && t != 0.0 {
            return Err(Error::Schema(format!("first sample must have t = 0, got {t}")));
        }
        if let Some(prev) = samples.last() {
            if !(t > prev.t) {
                return Err(Error::Monotonicity { row, t });
            }
        }
        samples.push(Sample {
            t,
            x: vals[1..1 + 2 * n].to_vec(),
            u: vals[1 + 2 * n..1 + 3 * n].to_vec(),
            lambda: with_l.then(|| vals[1 + 3 * n..].to_vec()),
        });
    }
    if samples.is_empty() {
        return Err(Error::Schema("no data rows".into()));
    }
    let mut meta = TrajectoryMeta::new(Source::Ingested, "");
    if !with_l {
        meta.flags.push(RunFlag {
            kind: FlagKind::MissingCostates,
            t: 0.0,
            detail: "no costate columns; usable for resimulation only".into(),
        });
    }
    Ok(Trajectory { samples, meta })
}

/// Reads a trajectory file. A sidecar, when present, supplies the model
/// hash and the recorded configuration; the source becomes `ingested`.
pub fn ingest(path: &Path) -> Result<Trajectory> {
    let mut traj = read_csv(BufReader::new(File::open(path)?))?;
    let side = sidecar_path(path);
    if side.exists() {
        let meta: TrajectoryMeta = serde_json::from_reader(BufReader::new(File::open(&side)?))
            .map_err(|e| Error::Schema(format!("sidecar {}: {e}", side.display())))?;
        traj.meta.model_hash = meta.model_hash;
        traj.meta.config = meta.config;
        traj.meta.flags.extend(meta.flags);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(with_l: bool) -> Trajectory {
        let samples = (0..3)
            .map(|k| Sample {
                t: k as f64 * 0.1,
                x: vec![0.1 * k as f64, 1.0 / 3.0, -2.0, 1e-300],
                u: vec![19.999999999999996, -10.0],
                lambda: with_l.then(|| vec![std::f64::consts::PI, -3.0, 1e17, -6.0]),
            })
            .collect();
        Trajectory {
            samples,
            meta: TrajectoryMeta::new(Source::Constructed, "abc"),
        }
    }

    fn roundtrip(tr: &Trajectory) -> Trajectory {
        let mut buf = Vec::new();
        write_csv(tr, &mut buf).unwrap();
        read_csv(buf.as_slice()).unwrap()
    }

    #[test]
    fn header_layout() {
        assert_eq!(header(2, true).join(","), "t,q1,q2,qd1,qd2,u1,u2,l1,l2,l3,l4");
        assert_eq!(header(2, false).join(","), "t,q1,q2,qd1,qd2,u1,u2");
    }

    #[test]
    fn bit_exact_roundtrip() {
        for with_l in [true, false] {
            let tr = tiny(with_l);
            let back = roundtrip(&tr);
            assert_eq!(back.samples, tr.samples);
            assert_eq!(back.meta.has_flag(FlagKind::MissingCostates), !with_l);
        }
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-10.0), "-1.0000000000000000e1");
    }

    #[test]
    fn schema_errors() {
        let bad = "t,q1,q2,qd1,qd2,u1\n0,0,0,0,0,0\n";
        assert!(matches!(read_csv(bad.as_bytes()), Err(Error::Schema(_))));
        let bad = "t,q1,q2,qd1,qd2,u1,u2\n0,0,0,0,0,0\n";
        assert!(matches!(read_csv(bad.as_bytes()), Err(Error::Schema(_))));
        let bad = "t,q1,q2,qd1,qd2,u1,u2\n0,0,0,0,0,0,abc\n";
        assert!(matches!(read_csv(bad.as_bytes()), Err(Error::Schema(_))));
        let bad = "t,q1,q2,qd1,qd2,u1,u2\n0.5,0,0,0,0,0,0\n";
        assert!(matches!(read_csv(bad.as_bytes()), Err(Error::Schema(_))));
        assert!(matches!(read_csv("t,q1,q2,qd1,qd2,u1,u2\n".as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn monotonicity_and_nan() {
        let s = "t,q1,q2,qd1,qd2,u1,u2\n0,0,0,0,0,0,0\n0.2,0,0,0,0,0,0\n0.1,0,0,0,0,0,0\n";
        assert!(matches!(read_csv(s.as_bytes()), Err(Error::Monotonicity { row: 2, .. })));
        let s = "t,q1,q2,qd1,qd2,u1,u2\n0,0,0,0,0,0,0\n0.1,0,NaN,0,0,0,0\n";
        match read_csv(s.as_bytes()) {
            Err(Error::NaN { row, column }) => assert_eq!((row, column.as_str()), (1, "q2")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn files_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let tr = tiny(true);
        write_trajectory(&tr, &path).unwrap();
        assert!(sidecar_path(&path).ends_with("traj.meta.json"));
        let back = ingest(&path).unwrap();
        assert_eq!(back.samples, tr.samples);
        assert_eq!(back.meta.model_hash, "abc");
        assert_eq!(back.meta.source, Source::Ingested);
    }
}
