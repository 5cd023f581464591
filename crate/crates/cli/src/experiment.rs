//! Convergence probes: threshold calibration over a seed set and the
//! unbalanced-loop (`k_d = 3` vs `k_d = 1`) comparison.

use std::fmt::Write as _;

use ganlab_core::distributions::{Distribution, Preset};
use ganlab_core::gan::{GanConfig, GanModel};
use ganlab_core::session::sample_js;
use ganlab_core::viz::DEFAULT_DENSITY_RESOLUTION;
use ganlab_core::{Execution, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// JS threshold for the two-gaussians convergence check: the 90th-percentile
/// best JS over seeds 1..=10 within 5000 epochs, from `ganlab calibrate`.
pub const CONVERGENCE_JS_THRESHOLD: f64 = 0.40008199506653236;
pub const CONVERGENCE_MAX_EPOCHS: u64 = 5000;
pub const CONVERGENCE_SEED: u64 = 42;
pub const CALIBRATION_SEEDS: [u64; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

/// How JS is measured during a convergence run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Probe {
    pub samples: usize,
    pub resolution: usize,
    /// Epochs between measurements.
    pub every: u64,
}

impl Default for Probe {
    fn default() -> Self {
        Self {
            samples: 1000,
            resolution: DEFAULT_DENSITY_RESOLUTION,
            every: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trace {
    pub best_js: f64,
    pub best_epoch: u64,
    /// First measured epoch with JS below the target, if one was given and reached.
    pub reached_at: Option<u64>,
}

fn probe_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    rng
}

/// Trains from `seed` for up to `max_epochs`, measuring JS every
/// `probe.every` epochs. Stops at the first measurement below `target`.
pub fn js_trace(
    config: &GanConfig,
    source: &Distribution,
    seed: u64,
    max_epochs: u64,
    probe: Probe,
    target: Option<f64>,
) -> Result<Trace> {
    let mut model = GanModel::new(config.clone(), seed)?;
    let mut rng = probe_rng(seed);
    let mut trace = Trace {
        best_js: f64::INFINITY,
        best_epoch: 0,
        reached_at: None,
    };
    while model.epoch() < max_epochs {
        model.train_epoch(source)?;
        if model.epoch() % probe.every != 0 {
            continue;
        }
        let js = sample_js(&model, source, probe.samples, probe.resolution, &mut rng)?;
        if js < trace.best_js {
            trace.best_js = js;
            trace.best_epoch = model.epoch();
        }
        if target.is_some_and(|t| js < t) {
            trace.reached_at = Some(model.epoch());
            break;
        }
    }
    Ok(trace)
}

/// Nearest-rank percentile (`q` in `(0, 1]`) of a non-empty sample.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub per_seed: Vec<(u64, Trace)>,
    pub threshold: f64,
}

impl Calibration {
    pub fn report(&self) -> String {
        let mut out = String::from("seed,best_js,best_epoch\n");
        for (seed, t) in &self.per_seed {
            let _ = writeln!(out, "{seed},{},{}", t.best_js, t.best_epoch);
        }
        let _ = writeln!(out, "threshold_p90,{}", self.threshold);
        out
    }
}

/// Best JS per seed on the default two-gaussians setup, and its 90th percentile.
pub fn calibrate(seeds: &[u64], max_epochs: u64, probe: Probe, exec: Execution) -> Result<Calibration> {
    let config = GanConfig::default();
    let source: Distribution = Preset::TwoGaussians.into();
    let traces = exec.try_map(seeds.len(), |i| js_trace(&config, &source, seeds[i], max_epochs, probe, None))?;
    let best: Vec<f64> = traces.iter().map(|t| t.best_js).collect();
    Ok(Calibration {
        threshold: percentile(&best, 0.9),
        per_seed: seeds.iter().copied().zip(traces).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnbalancedRow {
    pub seed: u64,
    pub balanced: Option<u64>,
    pub unbalanced: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnbalancedReport {
    pub threshold: f64,
    pub max_epochs: u64,
    pub rows: Vec<UnbalancedRow>,
}

fn cell(v: Option<u64>) -> String {
    v.map_or_else(|| "-".to_owned(), |e| e.to_string())
}

fn median(values: &mut [u64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    })
}

impl UnbalancedReport {
    /// CSV rows per seed followed by a summary; `-` marks a run that never
    /// reached the threshold.
    pub fn render(&self) -> String {
        let mut out = format!(
            "# epochs to JS < {} within {} epochs (two_gaussians, default config)\n",
            self.threshold, self.max_epochs
        );
        out.push_str("seed,k_d=1,k_d=3\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.seed, cell(r.balanced), cell(r.unbalanced));
        }
        for (label, pick) in [
            ("k_d=1", (|r: &UnbalancedRow| r.balanced) as fn(&UnbalancedRow) -> Option<u64>),
            ("k_d=3", |r: &UnbalancedRow| r.unbalanced),
        ] {
            let mut reached: Vec<u64> = self.rows.iter().filter_map(pick).collect();
            let count = reached.len();
            let med = median(&mut reached).map_or_else(|| "-".to_owned(), |m| m.to_string());
            let _ = writeln!(out, "# {label}: reached {count}/{}, median epochs {med}", self.rows.len());
        }
        let faster = self
            .rows
            .iter()
            .filter(|r| match (r.unbalanced, r.balanced) {
                (Some(u), Some(b)) => u < b,
                (Some(_), None) => true,
                _ => false,
            })
            .count();
        let _ = writeln!(out, "# k_d=3 faster on {faster}/{} seeds", self.rows.len());
        out
    }
}

/// Runs `k_d = 1` and `k_d = 3` from each seed and records epochs to `threshold`.
pub fn unbalanced(
    seeds: &[u64],
    threshold: f64,
    max_epochs: u64,
    probe: Probe,
    exec: Execution,
) -> Result<UnbalancedReport> {
    let source: Distribution = Preset::TwoGaussians.into();
    let balanced = GanConfig::default();
    let unbalanced_cfg = GanConfig {
        k_d: 3,
        ..GanConfig::default()
    };
    let results = exec.try_map(seeds.len() * 2, |i| {
        let cfg = if i % 2 == 0 { &balanced } else { &unbalanced_cfg };
        js_trace(cfg, &source, seeds[i / 2], max_epochs, probe, Some(threshold)).map(|t| t.reached_at)
    })?;
    let rows = seeds
        .iter()
        .zip(results.chunks(2))
        .map(|(&seed, pair)| UnbalancedRow {
            seed,
            balanced: pair[0],
            unbalanced: pair[1],
        })
        .collect();
    Ok(UnbalancedReport {
        threshold,
        max_epochs,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentile() {
        let v: Vec<f64> = (1..=10).rev().map(f64::from).collect();
        assert_eq!(percentile(&v, 0.9), 9.0);
        assert_eq!(percentile(&v, 0.5), 5.0);
        assert_eq!(percentile(&v, 1.0), 10.0);
        assert_eq!(percentile(&[3.0], 0.9), 3.0);
    }

    #[test]
    fn trace_is_deterministic_and_stops_at_target() {
        let cfg = GanConfig::default();
        let src: Distribution = Preset::TwoGaussians.into();
        let a = js_trace(&cfg, &src, 3, 200, Probe::default(), None).unwrap();
        assert_eq!(a, js_trace(&cfg, &src, 3, 200, Probe::default(), None).unwrap());
        assert_eq!(a.best_epoch % 10, 0);
        let stop = js_trace(&cfg, &src, 3, 200, Probe::default(), Some(1.0)).unwrap();
        assert_eq!(stop.reached_at, Some(10));
    }

    #[test]
    fn report_marks_unreached_runs() {
        let report = UnbalancedReport {
            threshold: 0.1,
            max_epochs: 100,
            rows: vec![
                UnbalancedRow { seed: 1, balanced: Some(50), unbalanced: Some(30) },
                UnbalancedRow { seed: 2, balanced: None, unbalanced: Some(90) },
            ],
        };
        let text = report.render();
        assert!(text.contains("1,50,30\n"));
        assert!(text.contains("2,-,90\n"));
        assert!(text.contains("# k_d=1: reached 1/2, median epochs 50\n"));
        assert!(text.contains("# k_d=3: reached 2/2, median epochs 60\n"));
        assert!(text.contains("# k_d=3 faster on 2/2 seeds\n"));
    }
}
