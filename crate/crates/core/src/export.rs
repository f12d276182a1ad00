//! CSV and JSON writers. Every output starts with a header naming the tool
//! version, the scenario hash and the resolved defaults; nothing time- or
//! host-dependent is written, so identical scenarios give identical bytes.

use crate::geometry::RegionLabel;
use crate::scenario::Scenario;
use crate::sim::{regional_speed_stats, RegionalStats, TrajectoryRecord};
use serde::Serialize;
use serde_json::Value;
use std::io::{self, Write};

pub const TOOL: &str = "softds";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario_hash: String,
    pub resolved_defaults: Value,
}

impl Header {
    pub fn for_scenario(s: &Scenario) -> Self {
        Header {
            tool: TOOL,
            version: VERSION,
            scenario_hash: s.hash(),
            resolved_defaults: s.resolved_defaults(),
        }
    }

    /// `#`-prefixed comment lines for CSV files.
    pub fn write_comment<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "# {} {}", self.tool, self.version)?;
        writeln!(w, "# scenario_hash: {}", self.scenario_hash)?;
        writeln!(w, "# resolved_defaults: {}", self.resolved_defaults)
    }
}

/// Shortest round-trip decimal; `nan` / `inf` spelled in lower case.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v}")
    }
}

fn trajectory_columns(n_obstacles: usize, with_start: bool) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    if with_start {
        cols.push("start".into());
    }
    cols.extend(["t", "x", "y", "vx", "vy"].map(String::from));
    for i in 0..n_obstacles {
        cols.push(format!("gamma_{i}"));
        cols.push(format!("gamma_k_{i}"));
        cols.push(format!("region_{i}"));
    }
    cols.push("intersection".into());
    cols
}

fn write_trajectory_rows<W: Write>(w: &mut W, rec: &TrajectoryRecord, start: Option<usize>) -> io::Result<()> {
    for s in &rec.steps {
        let mut fields: Vec<String> = Vec::with_capacity(6 + 3 * s.gammas.len());
        if let Some(i) = start {
            fields.push(i.to_string());
        }
        fields.push(fmt_f64(s.t));
        fields.extend(s.position.iter().map(|v| fmt_f64(*v)));
        fields.extend(s.velocity.iter().map(|v| fmt_f64(*v)));
        for ((g, gk), r) in s.gammas.iter().zip(&s.gammas_soft).zip(&s.regions) {
            fields.push(fmt_f64(*g));
            fields.push(fmt_f64(*gk));
            fields.push(r.as_str().into());
        }
        fields.push(u8::from(s.intersection).to_string());
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// One trajectory: `t,x,y,vx,vy,(gamma_i,gamma_k_i,region_i)*,intersection`.
pub fn write_trajectory_csv<W: Write>(w: &mut W, header: &Header, n_obstacles: usize, rec: &TrajectoryRecord) -> io::Result<()> {
    header.write_comment(w)?;
    writeln!(w, "{}", trajectory_columns(n_obstacles, false).join(","))?;
    write_trajectory_rows(w, rec, None)
}

/// Several trajectories in one file, keyed by a leading `start` column.
pub fn write_concat_csv<W: Write>(
    w: &mut W,
    header: &Header,
    n_obstacles: usize,
    records: &[(usize, &TrajectoryRecord)],
) -> io::Result<()> {
    header.write_comment(w)?;
    writeln!(w, "{}", trajectory_columns(n_obstacles, true).join(","))?;
    for (i, rec) in records {
        write_trajectory_rows(w, rec, Some(*i))?;
    }
    Ok(())
}

/// One evaluated grid point of the `field` command.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    /// `None` when the point is masked (inside a hard core or not evaluable).
    pub velocity: Option<(f64, f64)>,
    pub gammas: Vec<f64>,
    pub regions: Vec<RegionLabel>,
}

/// `x,y,vx,vy,masked,gamma_i*,region_i*`; masked rows carry `nan` velocities.
pub fn write_field_csv<W: Write>(w: &mut W, header: &Header, n_obstacles: usize, rows: &[FieldRow]) -> io::Result<()> {
    header.write_comment(w)?;
    let mut cols: Vec<String> = ["x", "y", "vx", "vy", "masked"].map(String::from).to_vec();
    cols.extend((0..n_obstacles).map(|i| format!("gamma_{i}")));
    cols.extend((0..n_obstacles).map(|i| format!("region_{i}")));
    writeln!(w, "{}", cols.join(","))?;
    for r in rows {
        let (vx, vy) = r.velocity.unwrap_or((f64::NAN, f64::NAN));
        let mut fields = vec![
            fmt_f64(r.x),
            fmt_f64(r.y),
            fmt_f64(vx),
            fmt_f64(vy),
            u8::from(r.velocity.is_none()).to_string(),
        ];
        fields.extend(r.gammas.iter().map(|g| fmt_f64(*g)));
        fields.extend(r.regions.iter().map(|l| l.as_str().to_string()));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Per-run summary entry of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub start_index: usize,
    pub start: Vec<f64>,
    pub converged: bool,
    pub steps: usize,
    pub final_time: Option<f64>,
    pub navigation_time: Option<f64>,
    /// Absent for scenes without obstacles.
    pub min_gamma: Option<f64>,
    pub regional_speeds: RegionalStats,
    pub failure: Option<String>,
    pub file: Option<String>,
}

impl RunSummary {
    pub fn new(start_index: usize, rec: &TrajectoryRecord, file: Option<String>) -> Self {
        RunSummary {
            start_index,
            start: rec.steps.first().map(|s| s.position.iter().copied().collect()).unwrap_or_default(),
            converged: rec.converged,
            steps: rec.step_count,
            final_time: rec.steps.last().map(|s| s.t),
            navigation_time: rec.navigation_time,
            min_gamma: rec.min_gamma.is_finite().then_some(rec.min_gamma),
            regional_speeds: regional_speed_stats(rec),
            failure: rec.failure.clone(),
            file,
        }
    }
}

/// Pretty JSON document `{"header": …, "scenario": provenance, <body fields>}`.
pub fn write_json_report<W: Write, T: Serialize>(w: &mut W, header: &Header, scenario: &Scenario, body: &T) -> io::Result<()> {
    let mut doc = serde_json::Map::new();
    doc.insert("header".into(), serde_json::to_value(header)?);
    doc.insert("scenario".into(), scenario.provenance_json());
    match serde_json::to_value(body)? {
        Value::Object(fields) => doc.extend(fields),
        other => {
            doc.insert("body".into(), other);
        }
    }
    serde_json::to_writer_pretty(&mut *w, &Value::Object(doc))?;
    writeln!(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-17, 6.02e23, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::NAN), "nan");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn trajectory_column_order() {
        assert_eq!(
            trajectory_columns(2, false).join(","),
            "t,x,y,vx,vy,gamma_0,gamma_k_0,region_0,gamma_1,gamma_k_1,region_1,intersection"
        );
        assert!(trajectory_columns(0, true).join(",").starts_with("start,t,"));
    }
}
