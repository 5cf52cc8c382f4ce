//! File-backed training sink: everything the loop emits lands in one
//! output directory.
//!
//! Layout: `metrics.csv` (streamed, one row per episode), `eval_<ep>.csv`
//! for periodic evaluations, `ckpt_<ep>.bin` agent checkpoints,
//! `snapshot_<ep>.bin` resumable snapshots. Rows are flushed as written so
//! an aborted run keeps everything up to the failure.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use elastic_core::eval::{records_to_csv, EvalRecord};
use elastic_core::trainer::{MetricsRow, TrainError, TrainSink, METRICS_CSV_HEADER};

pub struct FileSink {
    dir: PathBuf,
    metrics: BufWriter<File>,
}

fn sink_err(what: &str, path: &Path, e: std::io::Error) -> TrainError {
    TrainError::Sink(format!("{what} {}: {e}", path.display()))
}

impl FileSink {
    /// Creates the directory (parents included) and starts `metrics.csv`.
    pub fn create(dir: &Path) -> Result<Self, TrainError> {
        std::fs::create_dir_all(dir).map_err(|e| sink_err("create", dir, e))?;
        let path = dir.join("metrics.csv");
        let file = File::create(&path).map_err(|e| sink_err("create", &path, e))?;
        let mut metrics = BufWriter::new(file);
        writeln!(metrics, "{METRICS_CSV_HEADER}").map_err(|e| sink_err("write", &path, e))?;
        Ok(FileSink { dir: dir.to_path_buf(), metrics })
    }

    fn write_file(&self, name: &str, bytes: &[u8]) -> Result<(), TrainError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| sink_err("write", &path, e))
    }
}

impl TrainSink for FileSink {
    fn on_metrics(&mut self, row: &MetricsRow) -> Result<(), TrainError> {
        let path = self.dir.join("metrics.csv");
        writeln!(self.metrics, "{}", row.to_csv_row()).map_err(|e| sink_err("write", &path, e))?;
        self.metrics.flush().map_err(|e| sink_err("flush", &path, e))
    }

    fn on_eval(&mut self, episode: usize, records: &[EvalRecord]) -> Result<(), TrainError> {
        self.write_file(&format!("eval_{episode}.csv"), records_to_csv(records).as_bytes())
    }

    fn on_checkpoint(&mut self, episode: usize, bundle: &[u8]) -> Result<(), TrainError> {
        self.write_file(&format!("ckpt_{episode}.bin"), bundle)
    }

    fn on_snapshot(&mut self, episode: usize, snapshot: &[u8]) -> Result<(), TrainError> {
        self.write_file(&format!("snapshot_{episode}.bin"), snapshot)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn files_land_in_the_directory() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        let mut sink = FileSink::create(&dir).unwrap();
        let row = MetricsRow {
            episode: 1,
            steps: 3,
            sim_time: 0.5,
            return_shaped: -0.25,
            return_task: 0.01,
            alpha_m: 1.0,
            alpha_eps: 0.1,
            temperature: 0.2,
            critic_loss: f64::NAN,
            actor_loss: f64::NAN,
            grad_norm: f64::NAN,
            v_lyap: f64::NAN,
            v_alpha_term: f64::NAN,
            v_qerr_term: f64::NAN,
        };
        sink.on_metrics(&row).unwrap();
        sink.on_checkpoint(5, b"ckpt-bytes").unwrap();
        sink.on_snapshot(5, b"snap-bytes").unwrap();
        sink.on_eval(
            5,
            &[EvalRecord {
                episode: 0,
                success: true,
                energy_steps: 10,
                time_seconds: 1.0,
                mean_rate_hz: 10.0,
            }],
        )
        .unwrap();

        let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
        let mut lines = metrics.lines();
        assert_eq!(lines.next(), Some(METRICS_CSV_HEADER));
        assert_eq!(lines.next(), Some(row.to_csv_row().as_str()));
        assert_eq!(std::fs::read(dir.join("ckpt_5.bin")).unwrap(), b"ckpt-bytes");
        assert_eq!(std::fs::read(dir.join("snapshot_5.bin")).unwrap(), b"snap-bytes");
        let eval = std::fs::read_to_string(dir.join("eval_5.csv")).unwrap();
        assert!(eval.starts_with("episode,success,"));
        assert!(eval.contains("0,1,10,1,10"));
    }
}
