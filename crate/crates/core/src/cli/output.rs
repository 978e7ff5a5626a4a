//! Run directories: history and SSN logs written as the run advances, and
//! VTK snapshots on a fixed cadence.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::mesh::Mesh;
use crate::postprocess::{SsnLogStep, HISTORY_HEADER, SSN_LOG_HEADER};
use crate::stepper::{RecordKind, StepError, StepObserver, StepReport, TimeGrid};

use super::config::RunConfig;
use super::vtk::{write_snapshot, SnapshotFields};

/// Times always captured by the automatic cadence when the run reaches them.
pub const FEATURED_TIMES: [f64; 4] = [0.015, 0.03, 0.06, 0.12];

/// Levels that get a snapshot (level 0 is the initial state).
pub fn snapshot_levels(cfg: &RunConfig, grid: &TimeGrid) -> Vec<usize> {
    let n = grid.n_steps;
    let mut levels: BTreeSet<usize> = BTreeSet::from([0, n]);
    let every = cfg.snapshot_every.unwrap_or_else(|| n.div_ceil(10).max(1));
    levels.extend((every..=n).step_by(every));
    if cfg.snapshot_every.is_none() {
        for t in FEATURED_TIMES {
            if t <= grid.final_time() + 0.5 * grid.dt {
                levels.insert(((t / grid.dt).round() as usize).min(n));
            }
        }
    }
    levels.into_iter().collect()
}

pub fn snapshot_path(dir: &Path, level: usize) -> PathBuf {
    dir.join("snapshots").join(format!("step_{level:06}.vtk"))
}

fn io_err(path: &Path, e: std::io::Error) -> StepError {
    StepError::Output(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, StepError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

/// Writes `history.csv`, `ssn_log.csv` and snapshots as records arrive, so
/// an aborted run leaves everything up to the failure on disk.
pub struct RunWriter<'m> {
    dir: PathBuf,
    mesh: &'m Mesh,
    history: BufWriter<File>,
    ssn_log: BufWriter<File>,
    snapshots: BTreeSet<usize>,
}

impl<'m> RunWriter<'m> {
    pub fn create(dir: &Path, mesh: &'m Mesh, snapshots: &[usize]) -> Result<Self, StepError> {
        let snap_dir = dir.join("snapshots");
        std::fs::create_dir_all(&snap_dir).map_err(|e| io_err(&snap_dir, e))?;
        let mut history = create(&dir.join("history.csv"))?;
        let mut ssn_log = create(&dir.join("ssn_log.csv"))?;
        writeln!(history, "{HISTORY_HEADER}").map_err(|e| io_err(dir, e))?;
        writeln!(ssn_log, "{SSN_LOG_HEADER}").map_err(|e| io_err(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), mesh, history, ssn_log, snapshots: snapshots.iter().copied().collect() })
    }

    pub fn write_snapshot(&self, level: usize, fields: &SnapshotFields<'_>) -> Result<(), StepError> {
        write_snapshot(fields, self.mesh, &snapshot_path(&self.dir, level)).map_err(|e| StepError::Output(e.to_string()))
    }

    fn write_rows(&mut self, report: &StepReport<'_>) -> std::io::Result<()> {
        writeln!(self.history, "{}", report.record.csv_row())?;
        let log = SsnLogStep { step: report.step, t: report.t, deltas: report.residual_history.to_vec() };
        for row in log.csv_rows() {
            writeln!(self.ssn_log, "{row}")?;
        }
        self.history.flush()?;
        self.ssn_log.flush()
    }
}

impl StepObserver for RunWriter<'_> {
    fn record(&mut self, report: &StepReport<'_>) -> Result<(), StepError> {
        let dir = self.dir.clone();
        self.write_rows(report).map_err(|e| io_err(&dir, e))?;
        if report.kind == RecordKind::Level && self.snapshots.contains(&report.step) {
            let fields = SnapshotFields {
                velocity: Some(report.u),
                temperature: report.theta,
                pressure: Some(report.p),
                active: Some(report.mask),
                g_t: Some(report.g_t),
                mu_t: Some(report.mu_t),
            };
            self.write_snapshot(report.step, &fields)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::{Preset, RunConfig};

    #[test]
    fn automatic_cadence_includes_featured_times() {
        let cfg = RunConfig::preset(Preset::Experiment1);
        let grid = TimeGrid::fixed(0.0015, 80).unwrap();
        let levels = snapshot_levels(&cfg, &grid);
        for (t, level) in [(0.015, 10), (0.03, 20), (0.06, 40), (0.12, 80)] {
            assert!(levels.contains(&level), "t = {t}");
        }
        assert!(levels.contains(&0));
        assert!(levels.len() <= 15);
    }

    #[test]
    fn fixed_cadence_keeps_final_level() {
        let cfg = RunConfig { snapshot_every: Some(3), ..RunConfig::preset(Preset::Experiment1) };
        let grid = TimeGrid::fixed(0.01, 7).unwrap();
        assert_eq!(snapshot_levels(&cfg, &grid), vec![0, 3, 6, 7]);
    }
}
