//! Per-control-step simulation records and their CSV form.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{Vector3, Vector6};

use crate::error::{Error, Result};
use crate::selector::SelectionStatus;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    /// s
    pub t: f64,
    pub position: Vector3<f64>,
    /// Unit quaternion (w, x, y, z), w ≥ 0.
    pub quaternion: [f64; 4],
    pub e_p: Vector3<f64>,
    pub e_r: Vector3<f64>,
    /// Servo angle at the step [rad].
    pub alpha: f64,
    /// Angle commanded at the step [rad].
    pub alpha_cmd: f64,
    pub u: Vector6<f64>,
    /// True interaction force, world frame [N].
    pub f_i: Vector3<f64>,
    /// Force-sensor reading, body frame [N].
    pub f_i_meas: Vector3<f64>,
    pub wrench_force: Vector3<f64>,
    pub wrench_torque: Vector3<f64>,
    pub saturated: bool,
    /// None for the baseline allocator.
    pub status: Option<SelectionStatus>,
    pub mei: f64,
    pub fei: f64,
    /// Selector plus allocation wall time [ms]; NaN when not recorded.
    pub t_alloc_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

const BASE_COLUMNS: &[&str] = &[
    "t",
    "px",
    "py",
    "pz",
    "qw",
    "qx",
    "qy",
    "qz",
    "ep_x",
    "ep_y",
    "ep_z",
    "eR_x",
    "eR_y",
    "eR_z",
    "alpha",
    "alpha_cmd",
    "u1",
    "u2",
    "u3",
    "u4",
    "u5",
    "u6",
    "fi_x",
    "fi_y",
    "fi_z",
    "fm_x",
    "fm_y",
    "fm_z",
    "fd_x",
    "fd_y",
    "fd_z",
    "td_x",
    "td_y",
    "td_z",
    "saturated",
    "status",
    "mei",
    "fei",
];
const TIMING_COLUMN: &str = "t_alloc_ms";

/// Column names in file order.
pub fn columns(with_timing: bool) -> Vec<&'static str> {
    let mut cols = BASE_COLUMNS.to_vec();
    if with_timing {
        cols.push(TIMING_COLUMN);
    }
    cols
}

fn status_str(s: Option<SelectionStatus>) -> &'static str {
    s.map_or("none", |s| s.as_str())
}

fn parse_status(s: &str) -> Result<Option<SelectionStatus>> {
    match s {
        "nominal" => Ok(Some(SelectionStatus::Nominal)),
        "relaxed" => Ok(Some(SelectionStatus::Relaxed)),
        "infeasible" => Ok(Some(SelectionStatus::Infeasible)),
        "none" => Ok(None),
        other => Err(Error::TraceFormat(format!(
            "unknown selector status '{other}'"
        ))),
    }
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows with t ≥ `t0`.
    pub fn since(&self, t0: f64) -> &[TraceRow] {
        let k = self.rows.partition_point(|r| r.t < t0);
        &self.rows[k..]
    }

    pub fn infeasible_count(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.status == Some(SelectionStatus::Infeasible))
            .count()
    }

    /// Wall-clock timing is excluded unless requested so that reruns of a
    /// seeded scenario give identical files.
    pub fn write_csv<W: Write>(&self, mut out: W, with_timing: bool) -> Result<()> {
        writeln!(out, "{}", columns(with_timing).join(","))?;
        let mut line = String::new();
        for r in &self.rows {
            line.clear();
            let nums = [r.t]
                .iter()
                .chain(r.position.iter())
                .chain(r.quaternion.iter())
                .chain(r.e_p.iter())
                .chain(r.e_r.iter())
                .chain([r.alpha, r.alpha_cmd].iter())
                .chain(r.u.iter())
                .chain(r.f_i.iter())
                .chain(r.f_i_meas.iter())
                .chain(r.wrench_force.iter())
                .chain(r.wrench_torque.iter())
                .copied()
                .collect::<Vec<f64>>();
            for x in nums {
                let _ = write!(line, "{x},");
            }
            let _ = write!(
                line,
                "{},{},{},{}",
                u8::from(r.saturated),
                status_str(r.status),
                r.mei,
                r.fei
            );
            if with_timing {
                let _ = write!(line, ",{}", r.t_alloc_ms);
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>, with_timing: bool) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(file, with_timing)
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::TraceFormat("missing header".into()))??;
        let with_timing = if header == columns(true).join(",") {
            true
        } else if header == columns(false).join(",") {
            false
        } else {
            return Err(Error::TraceFormat("unexpected header".into()));
        };
        let width = columns(with_timing).len();
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != width {
                return Err(Error::TraceFormat(format!(
                    "line {}: expected {width} fields, got {}",
                    n + 2,
                    fields.len()
                )));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i].parse::<f64>().map_err(|_| {
                    Error::TraceFormat(format!("line {}: bad number '{}'", n + 2, fields[i]))
                })
            };
            let v3 = |i: usize| -> Result<Vector3<f64>> {
                Ok(Vector3::new(num(i)?, num(i + 1)?, num(i + 2)?))
            };
            let mut u = Vector6::zeros();
            for k in 0..6 {
                u[k] = num(16 + k)?;
            }
            rows.push(TraceRow {
                t: num(0)?,
                position: v3(1)?,
                quaternion: [num(4)?, num(5)?, num(6)?, num(7)?],
                e_p: v3(8)?,
                e_r: v3(11)?,
                alpha: num(14)?,
                alpha_cmd: num(15)?,
                u,
                f_i: v3(22)?,
                f_i_meas: v3(25)?,
                wrench_force: v3(28)?,
                wrench_torque: v3(31)?,
                saturated: match fields[34] {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::TraceFormat(format!("bad saturation flag '{other}'")))
                    }
                },
                status: parse_status(fields[35])?,
                mei: num(36)?,
                fei: num(37)?,
                t_alloc_ms: if with_timing { num(38)? } else { f64::NAN },
            });
        }
        Ok(Self { rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_row(t: f64) -> TraceRow {
        TraceRow {
            t,
            position: Vector3::new(0.1, -0.2, 1.0 / 3.0),
            quaternion: [1.0, 0.0, 0.0, 0.0],
            e_p: Vector3::new(1e-3, 2e-3, -3e-3),
            e_r: Vector3::new(1e-4, 0.0, -1e-4),
            alpha: 0.1,
            alpha_cmd: 0.12,
            u: Vector6::from_fn(|i, _| 1000.0 + i as f64),
            f_i: Vector3::new(-10.0, 0.0, 0.0),
            f_i_meas: Vector3::new(-9.9, 0.1, 0.1),
            wrench_force: Vector3::new(0.0, 0.0, 34.335),
            wrench_torque: Vector3::zeros(),
            saturated: t > 0.0,
            status: Some(SelectionStatus::Relaxed),
            mei: 0.3,
            fei: 0.9,
            t_alloc_ms: 0.0123,
        }
    }

    #[test]
    fn csv_round_trip_with_timing() {
        let trace = Trace {
            rows: vec![sample_row(0.0), sample_row(0.01)],
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf, true).unwrap();
        assert_eq!(Trace::read_csv(&buf[..]).unwrap(), trace);
    }

    #[test]
    fn csv_without_timing_reads_back_nan() {
        let mut row = sample_row(0.0);
        row.status = None;
        let trace = Trace { rows: vec![row] };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf, false).unwrap();
        let back = Trace::read_csv(&buf[..]).unwrap();
        assert!(back.rows[0].t_alloc_ms.is_nan());
        assert_eq!(back.rows[0].status, None);
        assert_eq!(back.rows[0].u, row.u);
    }

    #[test]
    fn header_order_is_fixed() {
        let cols = columns(true);
        assert_eq!(cols.len(), 39);
        assert_eq!(cols[0], "t");
        assert_eq!(cols[4], "qw");
        assert_eq!(cols[16], "u1");
        assert_eq!(cols[38], "t_alloc_ms");
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(Trace::read_csv(&b""[..]).is_err());
        assert!(Trace::read_csv(&b"a,b\n"[..]).is_err());
        let bad = format!("{}\n1,2,3\n", columns(false).join(","));
        assert!(Trace::read_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn since_skips_early_rows() {
        let trace = Trace {
            rows: (0..10).map(|k| sample_row(k as f64)).collect(),
        };
        assert_eq!(trace.since(4.0).len(), 6);
        assert_eq!(trace.since(100.0).len(), 0);
    }
}
