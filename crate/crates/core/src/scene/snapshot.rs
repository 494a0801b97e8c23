//! Binary state snapshots and the per-step metrics table.
//!
//! Snapshot layout: a text header of `key value` lines terminated by
//! `end\n`, followed by little-endian binary data:
//!
//! ```text
//! contact-newton snapshot 1
//! step 12
//! bodies 2
//! contacts 81
//! end
//! time: f64
//! per body:    dofs u64, has_orientation u8, q [f64; dofs], v [f64; dofs], quaternion [f64; 4] (i, j, k, w) if present
//! per contact: object_a u64, owner kind u8 (0 body, 1 collider), owner index u64, frame [f64; 9] (n, t1, t2), lambda [f64; 3]
//! ```

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::sim::{StepReport, StepSink};
use super::SceneError;
use crate::collision::{ContactFrame, Owner};
use crate::dynamics::MechanicalState;

const MAGIC: &str = "contact-newton snapshot 1";

/// One contact pair's frame and total force in that frame (N).
#[derive(Clone, Debug, PartialEq)]
pub struct ContactRecord {
    pub object_a: usize,
    pub object_b: Owner,
    pub frame: ContactFrame,
    /// `(normal, tangent1, tangent2)` components.
    pub lambda: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    /// Number of steps taken to reach this state.
    pub step: usize,
    /// s
    pub time: f64,
    pub bodies: Vec<MechanicalState>,
    /// Contacts resolved by the step that produced this state.
    pub contacts: Vec<ContactRecord>,
}

impl Snapshot {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("{MAGIC}\nstep {}\nbodies {}\ncontacts {}\nend\n", self.step, self.bodies.len(), self.contacts.len()).into_bytes();
        out.extend_from_slice(&self.time.to_le_bytes());
        for b in &self.bodies {
            out.extend_from_slice(&(b.q.len() as u64).to_le_bytes());
            out.push(b.orientation.is_some() as u8);
            for x in b.q.iter().chain(&b.v) {
                out.extend_from_slice(&x.to_le_bytes());
            }
            if let Some(r) = b.orientation {
                for x in r.as_ref().coords.iter() {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        for c in &self.contacts {
            out.extend_from_slice(&(c.object_a as u64).to_le_bytes());
            let (kind, index) = match c.object_b {
                Owner::Body(i) => (0u8, i),
                Owner::Collider(i) => (1u8, i),
            };
            out.push(kind);
            out.extend_from_slice(&(index as u64).to_le_bytes());
            for v in [c.frame.normal, c.frame.tangent1, c.frame.tangent2] {
                for x in v.iter() {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            for x in c.lambda {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SceneError> {
        let bad = |m: &str| SceneError::Snapshot(m.to_string());
        let end = find(bytes, b"\nend\n").ok_or_else(|| bad("missing header terminator"))?;
        let header = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8"))?;
        let mut lines = header.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("unknown snapshot version"));
        }
        let mut field = |name: &str| -> Result<usize, SceneError> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            let value = line.strip_prefix(name).and_then(|v| v.strip_prefix(' ')).ok_or_else(|| SceneError::Snapshot(format!("expected `{name}`")))?;
            value.parse().map_err(|_| SceneError::Snapshot(format!("bad value for `{name}`")))
        };
        let step = field("step")?;
        let n_bodies = field("bodies")?;
        let n_contacts = field("contacts")?;

        let mut r = Reader { data: &bytes[end + 5..] };
        let time = r.f64()?;
        let mut bodies = Vec::with_capacity(n_bodies);
        for _ in 0..n_bodies {
            let dofs = r.u64()? as usize;
            let has_orientation = r.u8()? != 0;
            let q = r.f64s(dofs)?;
            let v = r.f64s(dofs)?;
            let orientation = if has_orientation {
                let c = r.f64s(4)?;
                Some(UnitQuaternion::new_unchecked(Quaternion::new(c[3], c[0], c[1], c[2])))
            } else {
                None
            };
            bodies.push(MechanicalState { q, v, orientation });
        }
        let mut contacts = Vec::with_capacity(n_contacts);
        for _ in 0..n_contacts {
            let object_a = r.u64()? as usize;
            let kind = r.u8()?;
            let index = r.u64()? as usize;
            let object_b = match kind {
                0 => Owner::Body(index),
                1 => Owner::Collider(index),
                _ => return Err(bad("unknown owner kind")),
            };
            let f = r.f64s(9)?;
            let frame = ContactFrame {
                normal: Vector3::new(f[0], f[1], f[2]),
                tangent1: Vector3::new(f[3], f[4], f[5]),
                tangent2: Vector3::new(f[6], f[7], f[8]),
            };
            let l = r.f64s(3)?;
            contacts.push(ContactRecord { object_a, object_b, frame, lambda: [l[0], l[1], l[2]] });
        }
        if !r.data.is_empty() {
            return Err(bad("trailing bytes after snapshot"));
        }
        Ok(Snapshot { step, time, bodies, contacts })
    }

    pub fn save(&self, path: &Path) -> Result<(), SceneError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| SceneError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let bytes = std::fs::read(path).map_err(|source| SceneError::Io { path: path.to_path_buf(), source })?;
        Self::from_bytes(&bytes)
    }
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

struct Reader<'a> {
    data: &'a [u8],
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], SceneError> {
        if self.data.len() < N {
            return Err(SceneError::Snapshot("truncated snapshot data".into()));
        }
        let (head, rest) = self.data.split_at(N);
        self.data = rest;
        Ok(head.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8, SceneError> {
        Ok(self.take::<1>()?[0])
    }

    fn u64(&mut self) -> Result<u64, SceneError> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64, SceneError> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, SceneError> {
        (0..n).map(|_| self.f64()).collect()
    }
}

/// Writes `snapshots/step_%06d.bin` under a directory every `every` steps.
pub struct SnapshotWriter {
    dir: PathBuf,
    every: usize,
}

impl SnapshotWriter {
    pub fn new(out_dir: &Path, every: usize) -> Result<Self, SceneError> {
        let dir = out_dir.join("snapshots");
        std::fs::create_dir_all(&dir).map_err(|source| SceneError::Io { path: dir.clone(), source })?;
        Ok(Self { dir, every: every.max(1) })
    }

    pub fn path_for(&self, step: usize) -> PathBuf {
        self.dir.join(format!("step_{step:06}.bin"))
    }
}

impl StepSink for SnapshotWriter {
    fn record(&mut self, _report: &StepReport, state: &Snapshot) -> Result<(), SceneError> {
        if state.step % self.every == 0 {
            state.save(&self.path_for(state.step))?;
        }
        Ok(())
    }
}

/// Column names of `metrics.csv`. Every column after
/// [`METRICS_TIMING_START`] is a wall-clock time in milliseconds.
pub const METRICS_COLUMNS: [&str; 23] = [
    "step",
    "time",
    "scheme",
    "dofs",
    "pairs",
    "constraints",
    "newton_iterations",
    "pgs_iterations",
    "penetration_before",
    "penetration_after",
    "penetration_per_iteration",
    "lambda_n_max",
    "lambda_n_sum",
    "detect_ms",
    "linearize_ms",
    "assemble_ms",
    "free_motion_ms",
    "build_wg_ms",
    "rebuild_ms",
    "pgs_ms",
    "correction_ms",
    "integrate_ms",
    "total_ms",
];

pub const METRICS_TIMING_START: usize = 13;

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// One `metrics.csv` row. `build_wg_ms` is empty for schemes without `W_g`;
/// per-iteration timings are summed over the Newton iterations and the
/// fast scheme's closing correction is included in `correction_ms`.
pub fn metrics_row(r: &StepReport) -> String {
    let per_iter = r.iterations.iter().map(|i| i.max_penetration.to_string()).collect::<Vec<_>>().join(";");
    let sum = |f: fn(&crate::solver::IterationReport) -> std::time::Duration| r.iterations.iter().map(|i| ms(f(i))).sum::<f64>();
    let t = &r.timings;
    let cells = [
        r.step.to_string(),
        r.time.to_string(),
        r.scheme.to_string(),
        r.dofs.to_string(),
        r.pairs.to_string(),
        r.constraints.to_string(),
        r.iterations.len().to_string(),
        r.pgs_iterations().to_string(),
        r.penetration_before.to_string(),
        r.penetration_after.to_string(),
        per_iter,
        r.lambda_n_max.to_string(),
        r.lambda_n_sum.to_string(),
        ms(t.detect).to_string(),
        ms(t.linearize).to_string(),
        ms(t.assemble).to_string(),
        ms(t.free_motion).to_string(),
        t.build_wg.map(|d| ms(d).to_string()).unwrap_or_default(),
        sum(|i| i.rebuild).to_string(),
        sum(|i| i.pgs).to_string(),
        (sum(|i| i.correction) + t.final_correction.map(ms).unwrap_or(0.0)).to_string(),
        ms(t.integrate).to_string(),
        ms(t.total).to_string(),
    ];
    cells.join(",")
}

/// Appends one row per step to `metrics.csv`.
pub struct MetricsWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(out_dir: &Path) -> Result<Self, SceneError> {
        std::fs::create_dir_all(out_dir).map_err(|source| SceneError::Io { path: out_dir.to_path_buf(), source })?;
        let path = out_dir.join("metrics.csv");
        let file = File::create(&path).map_err(|source| SceneError::Io { path: path.clone(), source })?;
        let mut w = Self { path, out: BufWriter::new(file) };
        w.line(&METRICS_COLUMNS.join(","))?;
        Ok(w)
    }

    fn line(&mut self, s: &str) -> Result<(), SceneError> {
        writeln!(self.out, "{s}").and_then(|_| self.out.flush()).map_err(|source| SceneError::Io { path: self.path.clone(), source })
    }
}

impl StepSink for MetricsWriter {
    fn record(&mut self, report: &StepReport, _state: &Snapshot) -> Result<(), SceneError> {
        self.line(&metrics_row(report))
    }
}
