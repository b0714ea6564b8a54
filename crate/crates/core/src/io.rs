//! Artifact formats: CSV serialization for tubes, rollouts, benchmarks,
//! and nominal trajectories, plus 2-D outline extraction for plotting.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write → read cycle reproduces bit-identical values and repeated runs
//! produce byte-identical files.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::simlab::{
    count_transitions, BenchmarkRow, BenchmarkSummary, ContainmentStats, ReductionMethod, Rollout,
};
use crate::synth::{AuditReport, SynthStatus, SynthesisResult};
use crate::zonoset::Zonotope;
use crate::{Error, Result};

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Config(format!("{what}: '{s}' is not a number")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Config(format!("{what}: '{s}' is not an index")))
}

fn field<'a>(record: &'a csv::StringRecord, idx: usize, what: &str) -> Result<&'a str> {
    record
        .get(idx)
        .ok_or_else(|| Error::Config(format!("{what}: missing column {idx}")))
}

/// Zonotope lists use the long format `k,row,col,value`: col 0 is the
/// center entry, col j ≥ 1 is generator column j − 1. Every entry is
/// written, zeros included.
pub fn write_zonotope_list(path: &Path, sets: &[Zonotope]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "row", "col", "value"])?;
    for (k, z) in sets.iter().enumerate() {
        for row in 0..z.dim() {
            w.write_record([
                k.to_string(),
                row.to_string(),
                "0".into(),
                fmt(z.center()[row]),
            ])?;
            for col in 0..z.num_generators() {
                w.write_record([
                    k.to_string(),
                    row.to_string(),
                    (col + 1).to_string(),
                    fmt(z.generator()[(row, col)]),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_zonotope_list(path: &Path) -> Result<Vec<Zonotope>> {
    let what = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)?;
    let mut entries: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let k = parse_usize(field(&record, 0, &what)?, &what)?;
        let row = parse_usize(field(&record, 1, &what)?, &what)?;
        let col = parse_usize(field(&record, 2, &what)?, &what)?;
        let value = parse_f64(field(&record, 3, &what)?, &what)?;
        entries.entry(k).or_default().push((row, col, value));
    }
    let mut sets = Vec::with_capacity(entries.len());
    for (k, cells) in &entries {
        if *k != sets.len() {
            return Err(Error::Config(format!("{what}: set index {k} out of order")));
        }
        let n = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
        let p = cells.iter().map(|c| c.1).max().unwrap_or(0);
        let mut center = DVector::zeros(n);
        let mut generator = DMatrix::zeros(n, p);
        for &(row, col, value) in cells {
            if col == 0 {
                center[row] = value;
            } else {
                generator[(row, col - 1)] = value;
            }
        }
        sets.push(Zonotope::new(center, generator)?);
    }
    Ok(sets)
}

/// Vector lists use `k,i,value`; zero-length vectors leave no rows, so
/// the reader only recovers the populated prefix (callers pad).
pub fn write_vectors(path: &Path, vectors: &[DVector<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "i", "value"])?;
    for (k, v) in vectors.iter().enumerate() {
        for i in 0..v.len() {
            w.write_record([k.to_string(), i.to_string(), fmt(v[i])])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_vectors(path: &Path) -> Result<Vec<DVector<f64>>> {
    let what = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)?;
    let mut entries: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let k = parse_usize(field(&record, 0, &what)?, &what)?;
        let i = parse_usize(field(&record, 1, &what)?, &what)?;
        let value = parse_f64(field(&record, 2, &what)?, &what)?;
        entries.entry(k).or_default().push((i, value));
    }
    let len = entries.keys().last().map_or(0, |k| k + 1);
    let mut vectors = vec![DVector::zeros(0); len];
    for (k, cells) in entries {
        let mut v = DVector::zeros(cells.iter().map(|c| c.0 + 1).max().unwrap_or(0));
        for (i, value) in cells {
            v[i] = value;
        }
        vectors[k] = v;
    }
    Ok(vectors)
}

pub fn write_schedule(path: &Path, schedule: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "mode"])?;
    for (k, mode) in schedule.iter().enumerate() {
        w.write_record([k.to_string(), mode.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_schedule(path: &Path) -> Result<Vec<usize>> {
    let what = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)?;
    let mut schedule = Vec::new();
    for record in reader.records() {
        let record = record?;
        let k = parse_usize(field(&record, 0, &what)?, &what)?;
        if k != schedule.len() {
            return Err(Error::Config(format!("{what}: step {k} out of order")));
        }
        schedule.push(parse_usize(field(&record, 1, &what)?, &what)?);
    }
    Ok(schedule)
}

fn status_name(status: SynthStatus) -> &'static str {
    match status {
        SynthStatus::Optimal => "optimal",
        SynthStatus::BudgetExceeded => "budget-exceeded",
    }
}

fn status_from(name: &str) -> Result<SynthStatus> {
    match name {
        "optimal" => Ok(SynthStatus::Optimal),
        "budget-exceeded" => Ok(SynthStatus::BudgetExceeded),
        other => Err(Error::Config(format!("unknown solve status '{other}'"))),
    }
}

/// Writes a synthesis result as `states.csv`, `inputs.csv`, `slacks.csv`,
/// `solve.csv`, and (hybrid) `schedule.csv` inside `dir`.
pub fn write_result(dir: &Path, result: &SynthesisResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_zonotope_list(&dir.join("states.csv"), &result.states)?;
    write_zonotope_list(&dir.join("inputs.csv"), &result.inputs)?;
    write_vectors(&dir.join("slacks.csv"), &result.slacks)?;
    if let Some(schedule) = &result.schedule {
        write_schedule(&dir.join("schedule.csv"), schedule)?;
    }
    let mut w = csv::Writer::from_path(dir.join("solve.csv"))?;
    w.write_record(["objective", "status", "nodes_explored"])?;
    w.write_record([
        fmt(result.objective),
        status_name(result.status).into(),
        result.nodes_explored.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn read_result(dir: &Path) -> Result<SynthesisResult> {
    let states = read_zonotope_list(&dir.join("states.csv"))?;
    let inputs = read_zonotope_list(&dir.join("inputs.csv"))?;
    if states.len() != inputs.len() + 1 {
        return Err(Error::Config(format!(
            "{}: {} state sets for {} input sets",
            dir.display(),
            states.len(),
            inputs.len()
        )));
    }
    let mut slacks = read_vectors(&dir.join("slacks.csv"))?;
    slacks.resize(inputs.len(), DVector::zeros(0));
    let schedule_path = dir.join("schedule.csv");
    let schedule = if schedule_path.exists() {
        Some(read_schedule(&schedule_path)?)
    } else {
        None
    };
    let what = dir.join("solve.csv").display().to_string();
    let mut reader = csv::Reader::from_path(dir.join("solve.csv"))?;
    let record = reader
        .records()
        .next()
        .ok_or_else(|| Error::Config(format!("{what}: empty")))??;
    Ok(SynthesisResult {
        states,
        inputs,
        slacks,
        schedule,
        status: status_from(field(&record, 1, &what)?)?,
        objective: parse_f64(field(&record, 0, &what)?, &what)?,
        nodes_explored: parse_usize(field(&record, 2, &what)?, &what)?,
    })
}

pub fn write_audit(path: &Path, report: &AuditReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["check", "violation"])?;
    for check in &report.checks {
        w.write_record([check.label.clone(), fmt(check.violation)])?;
    }
    w.flush()?;
    Ok(())
}

/// Rollout batches share one file: `rollout,t,x0..,u0..,kappa,bound_member,
/// exact_member`, with input columns empty on each final row.
pub fn write_rollouts(path: &Path, rollouts: &[Rollout]) -> Result<()> {
    let n = rollouts.first().map_or(0, |r| r.states[0].len());
    let m = rollouts
        .first()
        .and_then(|r| r.inputs.first())
        .map_or(0, |u| u.len());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["rollout".to_string(), "t".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    header.extend((0..m).map(|i| format!("u{i}")));
    header.extend(["kappa", "bound_member", "exact_member"].map(String::from));
    w.write_record(&header)?;
    for (idx, rollout) in rollouts.iter().enumerate() {
        for (t, x) in rollout.states.iter().enumerate() {
            let mut record = vec![idx.to_string(), t.to_string()];
            record.extend(x.iter().map(|&v| fmt(v)));
            if t < rollout.inputs.len() {
                record.extend(rollout.inputs[t].iter().map(|&v| fmt(v)));
                record.push(rollout.chosen[t].to_string());
            } else {
                record.extend(std::iter::repeat_n(String::new(), m + 1));
            }
            record.push(rollout.bound_member[t].to_string());
            record.push(rollout.exact_member[t].to_string());
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_rollouts(path: &Path) -> Result<Vec<Rollout>> {
    let what = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let n = headers.iter().filter(|h| h.starts_with('x')).count();
    let m = headers.iter().filter(|h| h.starts_with('u')).count();
    let mut rollouts: Vec<Rollout> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let idx = parse_usize(field(&record, 0, &what)?, &what)?;
        if idx == rollouts.len() {
            rollouts.push(Rollout {
                states: Vec::new(),
                inputs: Vec::new(),
                chosen: Vec::new(),
                bound_member: Vec::new(),
                exact_member: Vec::new(),
                exits: 0,
                re_entries: 0,
            });
        }
        let rollout = rollouts
            .last_mut()
            .ok_or_else(|| Error::Config(format!("{what}: rollout ids out of order")))?;
        let mut x = DVector::zeros(n);
        for i in 0..n {
            x[i] = parse_f64(field(&record, 2 + i, &what)?, &what)?;
        }
        rollout.states.push(x);
        if !field(&record, 2 + n + m, &what)?.is_empty() {
            let mut u = DVector::zeros(m);
            for i in 0..m {
                u[i] = parse_f64(field(&record, 2 + n + i, &what)?, &what)?;
            }
            rollout.inputs.push(u);
            rollout
                .chosen
                .push(parse_usize(field(&record, 2 + n + m, &what)?, &what)?);
        }
        let parse_bool = |s: &str| match s {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(Error::Config(format!("{what}: bad flag '{other}'"))),
        };
        rollout
            .bound_member
            .push(parse_bool(field(&record, 3 + n + m, &what)?)?);
        rollout
            .exact_member
            .push(parse_bool(field(&record, 4 + n + m, &what)?)?);
    }
    for rollout in &mut rollouts {
        let (exits, re_entries) = count_transitions(&rollout.exact_member);
        rollout.exits = exits;
        rollout.re_entries = re_entries;
    }
    Ok(rollouts)
}

/// Per-step membership counts as `t,members`.
pub fn write_containment(path: &Path, stats: &ContainmentStats) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "members"])?;
    for (t, members) in stats.per_step_member.iter().enumerate() {
        w.write_record([t.to_string(), members.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable containment summary.
pub fn containment_summary(stats: &ContainmentStats) -> String {
    format!(
        "rollouts:              {}\n\
         steps per rollout:     {}\n\
         member (state, step):  {} / {}\n\
         containment fraction:  {}\n\
         tube exits:            {}\n\
         tube re-entries:       {}\n",
        stats.rollouts,
        stats.steps,
        stats.member_pairs,
        stats.total_pairs,
        fmt(stats.fraction()),
        stats.exits,
        stats.re_entries
    )
}

pub fn write_benchmark(path: &Path, rows: &[BenchmarkRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "method", "volume", "reference_volume", "error_percent"])?;
    for row in rows {
        w.write_record([
            row.step.to_string(),
            row.method.name().into(),
            fmt(row.volume),
            fmt(row.reference_volume),
            fmt(row.error_percent),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_benchmark(path: &Path) -> Result<Vec<BenchmarkRow>> {
    let what = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(BenchmarkRow {
            step: parse_usize(field(&record, 0, &what)?, &what)?,
            method: ReductionMethod::parse(field(&record, 1, &what)?)?,
            volume: parse_f64(field(&record, 2, &what)?, &what)?,
            reference_volume: parse_f64(field(&record, 3, &what)?, &what)?,
            error_percent: parse_f64(field(&record, 4, &what)?, &what)?,
        });
    }
    Ok(rows)
}

/// Mean/max volume-error table, one row per method.
pub fn benchmark_table(summaries: &[BenchmarkSummary]) -> String {
    let mut out = String::from("method      mean error %   max error %\n");
    for s in summaries {
        out.push_str(&format!(
            "{:<12}{:<15}{}\n",
            s.method.name(),
            fmt(s.mean_percent),
            fmt(s.max_percent)
        ));
    }
    out
}

/// Reads a nominal trajectory CSV with header `t,q1,q2,dq1,dq2,u`:
/// states are the (q1,q2,dq1,dq2) rows, inputs the u column of every row
/// but the last.
pub fn read_nominal_trajectory(path: &Path) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    let what = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)?;
    let expected = ["t", "q1", "q2", "dq1", "dq2", "u"];
    let headers = reader.headers()?;
    for (i, name) in expected.iter().enumerate() {
        if headers.get(i) != Some(name) {
            return Err(Error::Config(format!(
                "{what}: expected column {} to be '{name}', got '{}'",
                i + 1,
                headers.get(i).unwrap_or("")
            )));
        }
    }
    let mut states = Vec::new();
    let mut inputs = Vec::new();
    for record in reader.records() {
        let record = record?;
        let mut x = DVector::zeros(4);
        for i in 0..4 {
            x[i] = parse_f64(field(&record, 1 + i, &what)?, &what)?;
        }
        states.push(x);
        inputs.push(DVector::from_element(
            1,
            parse_f64(field(&record, 5, &what)?, &what)?,
        ));
    }
    if states.len() < 2 {
        return Err(Error::Config(format!("{what}: need at least two rows")));
    }
    inputs.pop();
    Ok((states, inputs))
}

pub fn write_nominal_trajectory(
    path: &Path,
    states: &[DVector<f64>],
    inputs: &[DVector<f64>],
    dt: f64,
) -> Result<()> {
    if states.len() != inputs.len() + 1 || states.iter().any(|x| x.len() != 4) {
        return Err(Error::ShapeMismatch(format!(
            "{} states for {} inputs",
            states.len(),
            inputs.len()
        )));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "q1", "q2", "dq1", "dq2", "u"])?;
    for (k, x) in states.iter().enumerate() {
        let u = inputs.get(k).map_or(0.0, |u| u[0]);
        w.write_record([
            fmt(k as f64 * dt),
            fmt(x[0]),
            fmt(x[1]),
            fmt(x[2]),
            fmt(x[3]),
            fmt(u),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Ordered boundary vertices of a zonotope's 2-D axis projection,
/// counter-clockwise and closed (first vertex repeated at the end).
/// Generator columns whose projection is zero are skipped.
pub fn outline_vertices(z: &Zonotope, axes: (usize, usize)) -> Result<Vec<(f64, f64)>> {
    let (ax, ay) = axes;
    if ax >= z.dim() || ay >= z.dim() || ax == ay {
        return Err(Error::InvalidArgument(format!(
            "projection axes ({ax}, {ay}) invalid for dimension {}",
            z.dim()
        )));
    }
    let center = (z.center()[ax], z.center()[ay]);
    // Flip every generator into the upper half-plane; the boundary walk
    // then visits them in angle order.
    let mut gens: Vec<(f64, f64)> = (0..z.num_generators())
        .map(|j| (z.generator()[(ax, j)], z.generator()[(ay, j)]))
        .filter(|&(gx, gy)| gx != 0.0 || gy != 0.0)
        .map(|(gx, gy)| {
            if gy < 0.0 || (gy == 0.0 && gx < 0.0) {
                (-gx, -gy)
            } else {
                (gx, gy)
            }
        })
        .collect();
    gens.sort_by(|a, b| a.1.atan2(a.0).partial_cmp(&b.1.atan2(b.0)).unwrap());
    if gens.is_empty() {
        return Ok(vec![center, center]);
    }
    let p = gens.len();
    let mut vertices = Vec::with_capacity(2 * p + 1);
    let start = (
        center.0 - gens.iter().map(|g| g.0).sum::<f64>(),
        center.1 - gens.iter().map(|g| g.1).sum::<f64>(),
    );
    vertices.push(start);
    for g in &gens {
        let last = *vertices.last().unwrap();
        vertices.push((last.0 + 2.0 * g.0, last.1 + 2.0 * g.1));
    }
    // Second half by central symmetry.
    for j in 1..p {
        let v = vertices[j];
        vertices.push((2.0 * center.0 - v.0, 2.0 * center.1 - v.1));
    }
    vertices.push(start);
    Ok(vertices)
}

/// Writes outlines of a zonotope list as `k,x,y` polylines.
pub fn write_outlines(path: &Path, sets: &[Zonotope], axes: (usize, usize)) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "x", "y"])?;
    for (k, z) in sets.iter().enumerate() {
        for (x, y) in outline_vertices(z, axes)? {
            w.write_record([k.to_string(), fmt(x), fmt(y)])?;
        }
    }
    w.flush()?;
    Ok(())
}
