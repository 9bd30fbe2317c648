//! Per-step run log and its CSV form.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::Pose2D;
use crate::navigation::NavMode;

pub const CSV_HEADER: &str = "step,time_s,true_x,true_y,true_theta,odo_x,odo_y,odo_theta,\
mcl_x,mcl_y,mcl_theta,ndt_x,ndt_y,ndt_theta,fused_x,fused_y,fused_theta,nav_mode,cov_trace";

const COLUMNS: usize = 19;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CsvError {
    #[error("header does not match the run log schema")]
    BadHeader,
    #[error("line {line}: expected {COLUMNS} fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: cannot parse field `{field}`: {value:?}")]
    BadField { line: usize, field: &'static str, value: String },
}

type PoseField = fn(&StepRow) -> Option<Pose2D>;

#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub step: usize,
    pub time_s: f64,
    pub truth: Pose2D,
    pub odometry: Pose2D,
    pub mcl: Option<Pose2D>,
    pub ndt: Option<Pose2D>,
    pub fused: Option<Pose2D>,
    pub nav_mode: Option<NavMode>,
    pub cov_trace: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub rows: Vec<StepRow>,
}

fn push_pose(out: &mut String, p: Option<&Pose2D>) {
    match p {
        Some(p) => write!(out, ",{},{},{}", p.x, p.y, p.theta).expect("string write"),
        None => out.push_str(",,,"),
    }
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn truth(&self) -> Vec<Pose2D> {
        self.rows.iter().map(|r| r.truth).collect()
    }

    pub fn odometry(&self) -> Vec<Pose2D> {
        self.rows.iter().map(|r| r.odometry).collect()
    }

    /// Estimator trajectories by name; an estimator is listed when every
    /// row carries it.
    pub fn estimators(&self) -> Vec<(&'static str, Vec<Pose2D>)> {
        let mut out = vec![("odometry", self.odometry())];
        let fields: [(&'static str, PoseField); 3] = [("mcl", |r| r.mcl), ("ndt", |r| r.ndt), ("fused", |r| r.fused)];
        for (name, get) in fields {
            let poses: Option<Vec<Pose2D>> = self.rows.iter().map(get).collect();
            if let Some(p) = poses.filter(|p| !p.is_empty()) {
                out.push((name, p));
            }
        }
        out
    }

    /// Shortest round-trip float formatting keeps the output byte-stable.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 + self.rows.len() * 200);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            write!(out, "{},{}", r.step, r.time_s).expect("string write");
            push_pose(&mut out, Some(&r.truth));
            push_pose(&mut out, Some(&r.odometry));
            push_pose(&mut out, r.mcl.as_ref());
            push_pose(&mut out, r.ndt.as_ref());
            push_pose(&mut out, r.fused.as_ref());
            out.push(',');
            if let Some(m) = r.nav_mode {
                out.push_str(m.as_str());
            }
            out.push(',');
            if let Some(t) = r.cov_trace {
                write!(out, "{t}").expect("string write");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, CsvError> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(CsvError::BadHeader);
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != COLUMNS {
                return Err(CsvError::FieldCount { line: line_no, found: f.len() });
            }
            let bad = |field: &'static str, value: &str| CsvError::BadField {
                line: line_no,
                field,
                value: value.to_string(),
            };
            let num = |idx: usize, name: &'static str| -> Result<Option<f64>, CsvError> {
                if f[idx].is_empty() {
                    Ok(None)
                } else {
                    f[idx].parse().map(Some).map_err(|_| bad(name, f[idx]))
                }
            };
            let pose = |idx: usize, name: &'static str| -> Result<Option<Pose2D>, CsvError> {
                match (num(idx, name)?, num(idx + 1, name)?, num(idx + 2, name)?) {
                    (Some(x), Some(y), Some(t)) => Ok(Some(Pose2D::new(x, y, t))),
                    (None, None, None) => Ok(None),
                    _ => Err(bad(name, line)),
                }
            };
            let step = f[0].parse().map_err(|_| bad("step", f[0]))?;
            let nav_mode = match f[17] {
                "" => None,
                s => Some(NavMode::parse(s).ok_or_else(|| bad("nav_mode", s))?),
            };
            rows.push(StepRow {
                step,
                time_s: num(1, "time_s")?.ok_or_else(|| bad("time_s", f[1]))?,
                truth: pose(2, "true")?.ok_or_else(|| bad("true", line))?,
                odometry: pose(5, "odo")?.ok_or_else(|| bad("odo", line))?,
                mcl: pose(8, "mcl")?,
                ndt: pose(11, "ndt")?,
                fused: pose(14, "fused")?,
                nav_mode,
                cov_trace: num(18, "cov_trace")?,
            });
        }
        Ok(Self { rows })
    }
}
