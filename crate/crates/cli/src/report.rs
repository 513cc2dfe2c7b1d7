//! JSON reports and the run manifest.

use std::path::Path;

use maxode::catalog::Guarantee;
use maxode::horizon::{ContractionData, HorizonResult};
use maxode::picard::PicardReport;
use maxode::trajectory::RunningMaxTrack;
use maxode::{Grid, ProblemSpec, Trajectory};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = to_json(value);
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::new(3, format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
pub struct GridInfo {
    pub steps: usize,
    pub h: f64,
    pub t_end: f64,
}

impl GridInfo {
    pub fn of(grid: &Grid) -> Option<GridInfo> {
        Some(GridInfo { steps: grid.n_steps(), h: grid.step(), t_end: grid.end() })
    }
}

#[derive(Serialize)]
pub struct Manifest {
    pub subcommand: &'static str,
    pub input: String,
    /// SHA-256 of the canonical problem text.
    pub digest: String,
    pub method: Option<&'static str>,
    pub grid: Option<GridInfo>,
    pub outputs: Vec<String>,
    pub exit_code: u8,
}

pub fn digest(spec: &ProblemSpec) -> String {
    Sha256::digest(spec.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(subcommand: &'static str, input: &Path, spec: &ProblemSpec, method: Option<&'static str>, grid: Option<GridInfo>) -> Manifest {
        Manifest {
            subcommand,
            input: input.display().to_string(),
            digest: digest(spec),
            method,
            grid,
            outputs: Vec::new(),
            exit_code: 0,
        }
    }

    pub fn finish(mut self, out_dir: &Path, exit_code: u8) -> Result<(), Failure> {
        self.exit_code = exit_code;
        write_json(&out_dir.join("manifest.json"), &self)
    }
}

#[derive(Serialize)]
pub struct SolveReport {
    pub method: &'static str,
    pub status: &'static str,
    pub steps: usize,
    pub h: f64,
    pub t_end: f64,
    pub final_state: Option<Vec<f64>>,
    pub final_maxima: Option<Vec<f64>>,
    pub guarantee: Option<Guarantee>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guarantee_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard: Option<PicardReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SolveReport {
    pub fn new(method: &'static str, grid: &Grid) -> SolveReport {
        SolveReport {
            method,
            status: "ok",
            steps: grid.n_steps(),
            h: grid.step(),
            t_end: grid.end(),
            final_state: None,
            final_maxima: None,
            guarantee: None,
            guarantee_error: None,
            picard: None,
            error: None,
        }
    }

    pub fn set_final(&mut self, spec: &ProblemSpec, traj: &Trajectory) {
        let last = traj.len() - 1;
        self.final_state = Some(traj.state(last).to_vec());
        self.final_maxima = RunningMaxTrack::for_trajectory(traj, spec.maxima()).ok().map(|t| t.row(last).to_vec());
    }
}

#[derive(Serialize)]
pub struct HorizonReport {
    #[serde(flatten)]
    pub result: HorizonResult,
    pub constants: ContractionData,
    /// False when all constants were supplied on the command line.
    pub estimated: bool,
}

#[derive(Serialize)]
pub struct PicardOutput {
    #[serde(flatten)]
    pub report: Option<PicardReport>,
    pub contraction_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}
