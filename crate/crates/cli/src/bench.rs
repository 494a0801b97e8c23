//! Scheme comparison benchmark.
//!
//! `bench.csv` columns, one row per (resolution, scheme):
//!
//! | column | meaning |
//! |---|---|
//! | `resolution` | box cells `nx x ny x nz` |
//! | `nodes`, `dofs`, `constraints` | problem size; `constraints` = 3 × pairs |
//! | `scheme` | `single`, `standard` or `fast` |
//! | `build_wg_ms` | building `W_g` (fast only, else empty) |
//! | `rebuild_ms`, `pgs_ms`, `correction_ms` | per Newton iteration |
//! | `iteration_ms` | sum of the three per-iteration phases |
//! | `scheme_ms` | whole correction phase: `W_g` + all iterations + closing correction |
//! | `step_ms` | whole time step |
//! | `update_fraction` | `rebuild_ms / iteration_ms` |
//!
//! Every timing cell is the median over the measured repetitions (one
//! repetition is one time step); per-iteration values are averaged over
//! the iterations of a step before taking the median.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use contact_newton::scene::{load_scene, Scene, SceneConfig, StepReport};
use contact_newton::solver::Scheme;
use serde::Deserialize;

const REFERENCE_ITERATION_SPEEDUP: f64 = 6.97;
const REFERENCE_SCHEME_SPEEDUP: f64 = 3.20;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    /// Scene file, relative to the spec file.
    pub scene: PathBuf,
    /// Cell counts of the scene's box object, in increasing size.
    pub resolutions: Vec<[usize; 3]>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default = "default_newton_iterations")]
    pub newton_iterations: usize,
    /// PGS runs exactly this many sweeps so every iteration does equal work.
    #[serde(default = "default_pgs_sweeps")]
    pub pgs_sweeps: usize,
    /// Output directory, relative to the spec file.
    pub out: Option<PathBuf>,
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Standard, Scheme::Fast]
}
fn default_repetitions() -> usize {
    5
}
fn default_warmup() -> usize {
    3
}
fn default_newton_iterations() -> usize {
    5
}
fn default_pgs_sweeps() -> usize {
    30
}

fn nodes(cells: &[usize; 3]) -> usize {
    cells.iter().map(|c| c + 1).product()
}

impl BenchSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let spec: BenchSpec = toml::from_str(&text).with_context(|| format!("invalid bench spec {}", path.display()))?;
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.repetitions < 3 {
            bail!("repetitions must be at least 3, got {}", self.repetitions);
        }
        if self.resolutions.is_empty() || self.resolutions.iter().any(|r| r.contains(&0)) {
            bail!("resolutions must be a non-empty list of positive cell counts");
        }
        if self.resolutions.windows(2).any(|w| nodes(&w[0]) >= nodes(&w[1])) {
            bail!("resolutions must be strictly increasing in node count");
        }
        if self.schemes.is_empty() || self.newton_iterations == 0 || self.pgs_sweeps == 0 {
            bail!("schemes, newton_iterations and pgs_sweeps must be non-empty/positive");
        }
        Ok(())
    }
}

/// Medians of one (resolution, scheme) cell.
#[derive(Clone, Debug)]
pub struct BenchRow {
    pub cells: [usize; 3],
    pub nodes: usize,
    pub dofs: usize,
    pub constraints: usize,
    pub scheme: Scheme,
    pub build_wg_ms: Option<f64>,
    pub rebuild_ms: f64,
    pub pgs_ms: f64,
    pub correction_ms: f64,
    pub iteration_ms: f64,
    pub scheme_ms: f64,
    pub step_ms: f64,
}

impl BenchRow {
    pub fn update_fraction(&self) -> f64 {
        self.rebuild_ms / self.iteration_ms
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn configure(base: &SceneConfig, spec: &BenchSpec, cells: [usize; 3], scheme: Scheme) -> Result<SceneConfig> {
    let Some(mut config) = base.clone().with_box_cells(cells) else {
        bail!("bench scene needs a box-generated soft object");
    };
    config.newton.scheme = scheme;
    config.newton.max_iterations = spec.newton_iterations;
    config.newton.early_exit = false;
    config.pgs.max_iterations = spec.pgs_sweeps;
    config.pgs.tolerance = f64::MIN_POSITIVE;
    Ok(config)
}

fn measure(config: SceneConfig, spec: &BenchSpec, cells: [usize; 3]) -> Result<BenchRow> {
    let scheme = config.newton.scheme;
    let mut scene = Scene::new(config)?;
    for _ in 0..spec.warmup {
        scene.step()?;
    }
    let reports: Vec<StepReport> = (0..spec.repetitions).map(|_| scene.step()).collect::<Result<_, _>>()?;
    if reports.iter().any(|r| r.pairs == 0) {
        bail!("bench scene lost contact at {cells:?}; timings would be meaningless");
    }
    let per_iter = |f: &dyn Fn(&contact_newton::solver::IterationReport) -> f64| -> f64 {
        let mut v: Vec<f64> = reports.iter().map(|r| r.iterations.iter().map(f).sum::<f64>() / r.iterations.len() as f64).collect();
        median(&mut v)
    };
    let column = |f: &dyn Fn(&StepReport) -> f64| -> f64 {
        let mut v: Vec<f64> = reports.iter().map(f).collect();
        median(&mut v)
    };
    let scheme_ms = column(&|r| {
        r.timings.build_wg.map(ms).unwrap_or(0.0)
            + r.iterations.iter().map(|i| ms(i.rebuild + i.pgs + i.correction)).sum::<f64>()
            + r.timings.final_correction.map(ms).unwrap_or(0.0)
    });
    let step_ms = column(&|r| ms(r.timings.total));
    let build_wg_ms = (scheme == Scheme::Fast).then(|| column(&|r| r.timings.build_wg.map(ms).unwrap_or(0.0)));
    let last = reports.last().expect("repetitions >= 3");
    Ok(BenchRow {
        cells,
        nodes: nodes(&cells),
        dofs: last.dofs,
        constraints: last.constraints,
        scheme,
        build_wg_ms,
        rebuild_ms: per_iter(&|i| ms(i.rebuild)),
        pgs_ms: per_iter(&|i| ms(i.pgs)),
        correction_ms: per_iter(&|i| ms(i.correction)),
        iteration_ms: per_iter(&|i| ms(i.rebuild + i.pgs + i.correction)),
        scheme_ms,
        step_ms,
    })
}

pub fn csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "resolution,nodes,dofs,constraints,scheme,build_wg_ms,rebuild_ms,pgs_ms,correction_ms,iteration_ms,scheme_ms,step_ms,update_fraction\n",
    );
    for r in rows {
        let [x, y, z] = r.cells;
        let _ = writeln!(
            out,
            "{x}x{y}x{z},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.nodes,
            r.dofs,
            r.constraints,
            r.scheme,
            r.build_wg_ms.map(|v| v.to_string()).unwrap_or_default(),
            r.rebuild_ms,
            r.pgs_ms,
            r.correction_ms,
            r.iteration_ms,
            r.scheme_ms,
            r.step_ms,
            r.update_fraction()
        );
    }
    out
}

pub fn summary(rows: &[BenchRow], spec: &BenchSpec) -> String {
    let mut out = format!(
        "Scheme comparison: {} measured steps after {} warmup steps, {} Newton iterations, {} PGS sweeps per iteration; medians.\n\n",
        spec.repetitions, spec.warmup, spec.newton_iterations, spec.pgs_sweeps
    );
    for cells in &spec.resolutions {
        let find = |s: Scheme| rows.iter().find(|r| r.cells == *cells && r.scheme == s);
        let [x, y, z] = cells;
        let Some(any) = rows.iter().find(|r| r.cells == *cells) else { continue };
        let _ = writeln!(out, "{x}x{y}x{z} cells: {} nodes, {} DOFs, {} constraint rows", any.nodes, any.dofs, any.constraints);
        for r in rows.iter().filter(|r| r.cells == *cells) {
            let _ = writeln!(
                out,
                "  {:<8} iteration {:>10.3} ms  correction phase {:>10.3} ms  step {:>10.3} ms  update fraction {:.1}%",
                r.scheme.to_string(),
                r.iteration_ms,
                r.scheme_ms,
                r.step_ms,
                100.0 * r.update_fraction()
            );
        }
        if let (Some(s), Some(f)) = (find(Scheme::Standard), find(Scheme::Fast)) {
            let _ = writeln!(
                out,
                "  fast vs standard: {:.2}x per Newton iteration (reference {REFERENCE_ITERATION_SPEEDUP:.2}x), {:.2}x whole scheme (reference {REFERENCE_SCHEME_SPEEDUP:.2}x)",
                s.iteration_ms / f.iteration_ms,
                s.scheme_ms / f.scheme_ms
            );
        }
        out.push('\n');
    }
    out.push_str(
        "Reference ratios are the published GPU measurements of the original method. They were taken on different\n\
         hardware with a different implementation and are NOT comparable to the numbers above.\n",
    );
    out
}

pub fn cmd_bench(spec_path: &Path, out: Option<PathBuf>) -> Result<bool> {
    let spec = BenchSpec::load(spec_path)?;
    let base_dir = spec_path.parent().unwrap_or(Path::new("."));
    let base = load_scene(&base_dir.join(&spec.scene))?;
    let out = out.or_else(|| spec.out.as_ref().map(|o| base_dir.join(o))).unwrap_or_else(|| PathBuf::from("bench-out"));
    std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;

    let mut rows = Vec::new();
    for &cells in &spec.resolutions {
        for &scheme in &spec.schemes {
            let row = measure(configure(&base, &spec, cells, scheme)?, &spec, cells)?;
            eprintln!("{:?} {}: {:.3} ms per iteration", cells, scheme, row.iteration_ms);
            rows.push(row);
        }
    }
    let csv_path = out.join("bench.csv");
    std::fs::write(&csv_path, csv(&rows)).with_context(|| format!("cannot write {}", csv_path.display()))?;
    let text = summary(&rows, &spec);
    let summary_path = out.join("summary.txt");
    std::fs::write(&summary_path, &text).with_context(|| format!("cannot write {}", summary_path.display()))?;
    print!("{text}");
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(resolutions: Vec<[usize; 3]>, repetitions: usize) -> BenchSpec {
        BenchSpec {
            scene: "x.scn".into(),
            resolutions,
            schemes: default_schemes(),
            repetitions,
            warmup: 0,
            newton_iterations: 2,
            pgs_sweeps: 30,
            out: None,
        }
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn spec_validation() {
        assert!(spec(vec![[2, 2, 2], [2, 4, 2]], 3).validate().is_ok());
        assert!(spec(vec![[2, 2, 2]], 2).validate().is_err());
        assert!(spec(vec![[2, 4, 2], [2, 2, 2]], 3).validate().is_err());
        assert!(spec(vec![], 3).validate().is_err());
    }

    #[test]
    fn one_resolution_gives_two_rows_and_a_ratio() {
        let scene = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenes/bench_block.scn");
        let base = load_scene(&scene).unwrap();
        let spec = spec(vec![[2, 2, 2]], 3);
        let rows: Vec<_> =
            spec.schemes.iter().map(|&s| measure(configure(&base, &spec, [2, 2, 2], s).unwrap(), &spec, [2, 2, 2]).unwrap()).collect();
        let table = csv(&rows);
        assert_eq!(table.lines().count(), 3);
        assert!(table.lines().nth(2).unwrap().contains(",fast,"));
        assert_eq!(rows[0].constraints, 27);
        assert!(rows[0].build_wg_ms.is_none() && rows[1].build_wg_ms.is_some());
        let text = summary(&rows, &spec);
        assert!(text.contains("per Newton iteration (reference 6.97x)"));
        assert!(text.contains("NOT comparable"));
    }
}
