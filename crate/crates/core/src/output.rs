//! Result files: comma-separated tables, a key = value safety report and
//! optional SVG frames.
//!
//! Every file is written to a temporary sibling first and renamed into
//! place, so a reader never sees a half-written file. Floats use Rust's
//! shortest round-trip formatting, which makes the tables byte-stable for a
//! fixed log.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::engine::{phase_of, EventKind, SafetyReport, SimulationLog};
use crate::error::EmitError;
use crate::model::Status;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const BARRIER_FILE: &str = "barriers.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const REPORT_FILE: &str = "safety_report.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmitOptions {
    pub out_dir: PathBuf,
    /// Write one SVG frame every this many steps; `None` disables frames.
    pub frame_every: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputBundle {
    pub trajectory: PathBuf,
    pub barriers: PathBuf,
    pub events: PathBuf,
    pub report: PathBuf,
    pub frames: Vec<PathBuf>,
    pub trajectory_rows: usize,
    pub barrier_rows: usize,
    pub event_rows: usize,
}

/// One row per live robot per logged instant. Returns the row count.
pub fn write_trajectory<W: Write>(log: &SimulationLog, w: &mut W) -> io::Result<usize> {
    writeln!(w, "t,robot,p_x,p_y,v_x,v_y,u_x,u_y,status")?;
    let mut rows = 0;
    for rec in &log.records {
        for (i, s) in rec.states.iter().enumerate() {
            if !s.is_live() {
                continue;
            }
            let u = rec.filtered[i].unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                rec.time,
                i,
                s.p.x,
                s.p.y,
                s.v.x,
                s.v.y,
                u.x,
                u.y,
                s.status.label()
            )?;
            rows += 1;
        }
    }
    Ok(rows)
}

/// One row per barrier value of every live robot at every instant.
pub fn write_barriers<W: Write>(log: &SimulationLog, w: &mut W) -> io::Result<usize> {
    writeln!(w, "t,robot,barrier,value")?;
    let mut rows = 0;
    for rec in &log.records {
        for (i, snap) in rec.barriers.iter().enumerate() {
            let Some(snap) = snap else { continue };
            for (source, h) in snap.entries() {
                writeln!(w, "{},{},{},{}", rec.time, i, source, h)?;
                rows += 1;
            }
        }
    }
    Ok(rows)
}

pub fn write_events<W: Write>(log: &SimulationLog, w: &mut W) -> io::Result<usize> {
    writeln!(w, "t,robot,event")?;
    for e in &log.events {
        writeln!(w, "{},{},{}", e.time, e.robot, e.kind.label())?;
    }
    Ok(log.events.len())
}

fn to_string_with<F>(f: F) -> String
where
    F: FnOnce(&mut Vec<u8>) -> io::Result<usize>,
{
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("tables are ASCII")
}

pub fn trajectory_table(log: &SimulationLog) -> String {
    to_string_with(|w| write_trajectory(log, w))
}

pub fn barrier_table(log: &SimulationLog) -> String {
    to_string_with(|w| write_barriers(log, w))
}

pub fn events_table(log: &SimulationLog) -> String {
    to_string_with(|w| write_events(log, w))
}

/// Structured `key = value` text; `failure` lines repeat once per failure.
pub fn report_text(report: &SafetyReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "certified = {}", report.certified());
    let _ = writeln!(s, "cert_tol = {}", report.cert_tol);
    for (family, min) in &report.minima {
        let _ = writeln!(s, "min.{} = {}", family.name(), min);
    }
    let _ = writeln!(s, "slack_events = {}", report.slack_event_count);
    let _ = writeln!(s, "slack_total = {}", report.slack_total);
    let _ = writeln!(s, "eliminations = {}", report.eliminations);
    let _ = writeln!(s, "finishes = {}", report.finishes);
    let _ = writeln!(s, "failures = {}", report.failures.len());
    for f in &report.failures {
        let _ = writeln!(
            s,
            "failure = t={} robot={} barrier={} value={}",
            f.time, f.robot, f.barrier, f.value
        );
    }
    s
}

const PX_PER_M: f64 = 20.0;
const PAD: f64 = 10.0;
const GREEN: &str = "#2e9e44";
const RED: &str = "#d23030";

/// SVG picture of record `index`: walls colored by the light, finish line,
/// live robots as disks of diameter `d0`, eliminated robots as gray squares,
/// finished robots as hollow disks.
pub fn frame_svg(log: &SimulationLog, index: usize) -> String {
    let rec = &log.records[index];
    let pg = &log.playground;
    let w = pg.l_x * PX_PER_M + 2.0 * PAD;
    let h = pg.l_y * PX_PER_M + 2.0 * PAD;
    let sx = |x: f64| PAD + x * PX_PER_M;
    // SVG y grows downward
    let sy = |y: f64| PAD + (pg.l_y - y) * PX_PER_M;
    let wall = if phase_of(rec.time, &log.schedule).is_red() {
        RED
    } else {
        GREEN
    };
    let r = 0.5 * pg.d0 * PX_PER_M;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="{wall}" stroke-width="4"/>"#,
        pg.l_x * PX_PER_M,
        pg.l_y * PX_PER_M
    );
    let _ = writeln!(
        s,
        r#"<line x1="{}" y1="{fy}" x2="{}" y2="{fy}" stroke="black" stroke-dasharray="6,4"/>"#,
        sx(0.0),
        sx(pg.l_x),
        fy = sy(pg.g_y)
    );
    for st in &rec.states {
        let (cx, cy) = (sx(st.p.x), sy(st.p.y));
        match st.status {
            Status::Live => {
                let _ = writeln!(
                    s,
                    r##"<circle cx="{cx}" cy="{cy}" r="{r}" fill="#3060c0"/>"##
                );
            }
            Status::Finished { .. } => {
                let _ = writeln!(
                    s,
                    r##"<circle cx="{cx}" cy="{cy}" r="{r}" fill="none" stroke="#3060c0"/>"##
                );
            }
            Status::Eliminated { .. } => {
                let _ = writeln!(
                    s,
                    r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#808080"/>"##,
                    cx - r,
                    cy - r,
                    2.0 * r,
                    2.0 * r
                );
            }
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{PAD}" y="{}" font-size="10" font-family="monospace">t = {:.2} s</text>"#,
        h - 1.0,
        rec.time
    );
    s.push_str("</svg>\n");
    s
}

fn atomic_write<F>(path: &Path, body: F) -> Result<usize, EmitError>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<usize>,
{
    let err = |source| EmitError {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut w = BufWriter::new(File::create(&tmp)?);
        let n = body(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(n)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(err)
}

/// Writes all tables, the report and the requested frames into
/// `options.out_dir`, creating it if needed.
pub fn emit(
    log: &SimulationLog,
    report: &SafetyReport,
    options: &EmitOptions,
) -> Result<OutputBundle, EmitError> {
    let dir = &options.out_dir;
    fs::create_dir_all(dir).map_err(|source| EmitError {
        path: dir.clone(),
        source,
    })?;
    let trajectory = dir.join(TRAJECTORY_FILE);
    let barriers = dir.join(BARRIER_FILE);
    let events = dir.join(EVENTS_FILE);
    let report_path = dir.join(REPORT_FILE);

    let trajectory_rows = atomic_write(&trajectory, |w| write_trajectory(log, w))?;
    let barrier_rows = atomic_write(&barriers, |w| write_barriers(log, w))?;
    let event_rows = atomic_write(&events, |w| write_events(log, w))?;
    let text = report_text(report);
    atomic_write(&report_path, |w| w.write_all(text.as_bytes()).map(|_| 0))?;

    let mut frames = Vec::new();
    if let Some(every) = options.frame_every.filter(|&n| n > 0) {
        let frame_dir = dir.join("frames");
        fs::create_dir_all(&frame_dir).map_err(|source| EmitError {
            path: frame_dir.clone(),
            source,
        })?;
        for index in (0..log.records.len()).step_by(every) {
            let path = frame_dir.join(format!("frame_{index:06}.svg"));
            let svg = frame_svg(log, index);
            atomic_write(&path, |w| w.write_all(svg.as_bytes()).map(|_| 0))?;
            frames.push(path);
        }
    }

    Ok(OutputBundle {
        trajectory,
        barriers,
        events,
        report: report_path,
        frames,
        trajectory_rows,
        barrier_rows,
        event_rows,
    })
}

/// Counts events of each kind, for summaries.
pub fn event_counts(log: &SimulationLog) -> (usize, usize) {
    log.events.iter().fold((0, 0), |(e, f), ev| match ev.kind {
        EventKind::Eliminated { .. } => (e + 1, f),
        EventKind::Finished => (e, f + 1),
    })
}
