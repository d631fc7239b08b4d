use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::NoiseModel;
use super::scene::{default_intrinsics, render_depth, SyntheticScene, WoundType};
use super::{measure_area, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub seed: u64,
    pub noise: NoiseModel,
    /// Camera tilts, degrees; negative tilts share a cell with their magnitude.
    pub angles_deg: Vec<f64>,
    pub repeats: usize,
    pub wounds: Vec<WoundType>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            noise: NoiseModel::default(),
            angles_deg: vec![0.0, 10.0, 20.0, 30.0],
            repeats: 5,
            wounds: WoundType::ALL.to_vec(),
        }
    }
}

/// Aggregate of every run for one wound type and tilt magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub wound: WoundType,
    pub angle_deg: f64,
    pub truth_cm2: f64,
    /// Measured area per run; `None` when the pipeline failed.
    pub measured_cm2: Vec<Option<f64>>,
    pub mae_cm2: f64,
    pub std_cm2: f64,
    pub accuracy_pct: f64,
}

fn accuracy(measured: Option<f64>, truth: f64) -> f64 {
    measured.map_or(0.0, |m| 100.0 * (1.0 - (m - truth).abs() / truth))
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl CellResult {
    fn new(wound: WoundType, angle_deg: f64, truth_cm2: f64, measured_cm2: Vec<Option<f64>>) -> Self {
        let errors: Vec<f64> = measured_cm2
            .iter()
            .map(|m| m.map_or(truth_cm2, |m| (m - truth_cm2).abs()))
            .collect();
        let (mae_cm2, std_cm2) = mean_std(&errors);
        let accuracy_pct = measured_cm2.iter().map(|&m| accuracy(m, truth_cm2)).sum::<f64>() / measured_cm2.len() as f64;
        Self {
            wound,
            angle_deg,
            truth_cm2,
            measured_cm2,
            mae_cm2,
            std_cm2,
            accuracy_pct,
        }
    }

    pub fn failures(&self) -> usize {
        self.measured_cm2.iter().filter(|m| m.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub cells: Vec<CellResult>,
    pub grand_mae_cm2: f64,
    pub grand_std_cm2: f64,
    pub grand_accuracy_pct: f64,
}

impl AccuracyReport {
    fn from_cells(cells: Vec<CellResult>) -> Self {
        let mut errors = Vec::new();
        let mut acc = Vec::new();
        for c in &cells {
            for &m in &c.measured_cm2 {
                errors.push(m.map_or(c.truth_cm2, |m| (m - c.truth_cm2).abs()));
                acc.push(accuracy(m, c.truth_cm2));
            }
        }
        let (grand_mae_cm2, grand_std_cm2) = mean_std(&errors);
        let grand_accuracy_pct = acc.iter().sum::<f64>() / acc.len().max(1) as f64;
        Self {
            cells,
            grand_mae_cm2,
            grand_std_cm2,
            grand_accuracy_pct,
        }
    }

    pub fn angles(&self) -> Vec<f64> {
        let mut a: Vec<f64> = self.cells.iter().map(|c| c.angle_deg).collect();
        a.sort_by(f64::total_cmp);
        a.dedup();
        a
    }

    pub fn wounds(&self) -> Vec<WoundType> {
        let mut w: Vec<WoundType> = self.cells.iter().map(|c| c.wound).collect();
        w.sort();
        w.dedup();
        w
    }

    fn runs_where(&self, keep: impl Fn(&CellResult) -> bool) -> (Vec<f64>, Vec<f64>) {
        let mut errors = Vec::new();
        let mut acc = Vec::new();
        for c in self.cells.iter().filter(|c| keep(c)) {
            for &m in &c.measured_cm2 {
                errors.push(m.map_or(c.truth_cm2, |m| (m - c.truth_cm2).abs()));
                acc.push(accuracy(m, c.truth_cm2));
            }
        }
        (errors, acc)
    }

    /// Mean accuracy per tilt over all wound types.
    pub fn per_angle_accuracy(&self) -> Vec<(f64, f64)> {
        self.angles()
            .into_iter()
            .map(|a| {
                let (_, acc) = self.runs_where(|c| c.angle_deg == a);
                (a, mean_std(&acc).0)
            })
            .collect()
    }

    pub fn per_wound_accuracy(&self) -> Vec<(WoundType, f64)> {
        self.wounds()
            .into_iter()
            .map(|w| {
                let (_, acc) = self.runs_where(|c| c.wound == w);
                (w, mean_std(&acc).0)
            })
            .collect()
    }

    /// Max minus min of the per-angle mean accuracy, percentage points.
    pub fn angle_spread(&self) -> f64 {
        let v: Vec<f64> = self.per_angle_accuracy().into_iter().map(|(_, a)| a).collect();
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().map(CellResult::failures).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("type,angle_deg,mae_cm2,std_cm2,accuracy_pct\n");
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{:.4},{:.4},{:.3}",
                c.wound.label(),
                c.angle_deg,
                c.mae_cm2,
                c.std_cm2,
                c.accuracy_pct
            );
        }
        s
    }

    /// Two blocks side by side: MAE/Std per tilt, accuracy per tilt; averages last.
    pub fn to_table(&self) -> String {
        let angles = self.angles();
        let cell = |w: WoundType, a: f64| self.cells.iter().find(|c| c.wound == w && c.angle_deg == a);
        let mut s = String::new();
        let _ = write!(s, "{:<5}", "Type");
        for a in &angles {
            let _ = write!(s, " {:>11}", format!("{a}°"));
        }
        let _ = write!(s, " {:>11} |", "Avg");
        for a in &angles {
            let _ = write!(s, " {:>6}", format!("{a}°"));
        }
        let _ = writeln!(s, " {:>6}", "Avg");
        let mae_std = |(e, _): &(Vec<f64>, Vec<f64>)| {
            let (m, sd) = mean_std(e);
            format!("{m:.2}/{sd:.2}")
        };
        let acc_of = |(_, a): &(Vec<f64>, Vec<f64>)| format!("{:.2}", mean_std(a).0);
        for w in self.wounds() {
            let _ = write!(s, "{:<5}", w.label());
            for &a in &angles {
                let txt = cell(w, a).map_or("-".to_string(), |c| format!("{:.2}/{:.2}", c.mae_cm2, c.std_cm2));
                let _ = write!(s, " {txt:>11}");
            }
            let all = self.runs_where(|c| c.wound == w);
            let _ = write!(s, " {:>11} |", mae_std(&all));
            for &a in &angles {
                let txt = cell(w, a).map_or("-".to_string(), |c| format!("{:.2}", c.accuracy_pct));
                let _ = write!(s, " {txt:>6}");
            }
            let _ = writeln!(s, " {:>6}", acc_of(&all));
        }
        let _ = write!(s, "{:<5}", "Avg");
        for &a in &angles {
            let _ = write!(s, " {:>11}", mae_std(&self.runs_where(|c| c.angle_deg == a)));
        }
        let all = self.runs_where(|_| true);
        let _ = write!(s, " {:>11} |", mae_std(&all));
        for &a in &angles {
            let _ = write!(s, " {:>6}", acc_of(&self.runs_where(|c| c.angle_deg == a)));
        }
        let _ = writeln!(s, " {:>6}", acc_of(&all));
        s
    }
}

/// Seed for run `index` of the sweep, independent of scheduling.
pub fn run_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Renders and measures every (wound, tilt, repeat) in parallel.
pub fn run_sweep(cfg: &SweepConfig) -> AccuracyReport {
    let k = default_intrinsics();
    let mut jobs = Vec::new();
    for (wi, &w) in cfg.wounds.iter().enumerate() {
        for (ai, &a) in cfg.angles_deg.iter().enumerate() {
            for r in 0..cfg.repeats {
                let index = ((wi * cfg.angles_deg.len() + ai) * cfg.repeats + r) as u64;
                jobs.push((w, a, run_seed(cfg.seed, index)));
            }
        }
    }
    let results: Vec<(WoundType, f64, f64, Option<f64>)> = jobs
        .par_iter()
        .map(|&(w, a, seed)| {
            let scene = SyntheticScene::new(w.shape(), a, cfg.noise, seed);
            let measured = render_depth(&scene, &k)
                .ok()
                .and_then(|r| measure_area(&r.bundle, r.seed, DEFAULT_THRESHOLD).ok());
            (w, a.abs(), scene.truth_area_cm2(), measured)
        })
        .collect();
    let mut grouped: BTreeMap<(WoundType, u64), (f64, f64, Vec<Option<f64>>)> = BTreeMap::new();
    for (w, a, truth, m) in results {
        grouped.entry((w, a.to_bits())).or_insert((a, truth, Vec::new())).2.push(m);
    }
    let mut cells: Vec<CellResult> = grouped
        .into_iter()
        .map(|((w, _), (a, truth, runs))| CellResult::new(w, a, truth, runs))
        .collect();
    cells.sort_by(|p, q| p.wound.cmp(&q.wound).then(p.angle_deg.total_cmp(&q.angle_deg)));
    AccuracyReport::from_cells(cells)
}
