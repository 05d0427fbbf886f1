use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ppo::EvalReport;
use crate::rewards::Stage;
use crate::simenv::ShapeKind;

/// Success rates of one object class, in percent, as mean and sample
/// standard deviation over seed groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub name: String,
    /// Episodes over all seed groups.
    pub trials: usize,
    pub track_mean: f64,
    pub track_std: f64,
    pub catch_mean: f64,
    pub catch_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub stage: Stage,
    pub mode: String,
    pub checkpoint_digest: String,
    pub config_digest: String,
    pub episodes_per_seed: usize,
    pub seeds: Vec<u64>,
    pub classes: Vec<ClassSummary>,
    /// Pooled over the training shapes.
    pub training: ClassSummary,
    /// Pooled over the held-out objects.
    pub held_out: ClassSummary,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn pooled(name: &str, reports: &[EvalReport], pick: &dyn Fn(&str) -> bool) -> ClassSummary {
    let mut track = Vec::new();
    let mut catch = Vec::new();
    let mut trials = 0;
    for r in reports {
        let (mut n, mut t, mut c) = (0usize, 0.0, 0.0);
        for class in r.classes.iter().filter(|c| pick(&c.name)) {
            n += class.episodes;
            t += class.touch_rate * class.episodes as f64;
            c += class.catch_rate * class.episodes as f64;
        }
        if n > 0 {
            track.push(100.0 * t / n as f64);
            catch.push(100.0 * c / n as f64);
        }
        trials += n;
    }
    let (track_mean, track_std) = mean_std(&track);
    let (catch_mean, catch_std) = mean_std(&catch);
    ClassSummary {
        name: name.to_string(),
        trials,
        track_mean,
        track_std,
        catch_mean,
        catch_std,
    }
}

/// Fold per-seed reports (same classes, same order) into one summary.
pub fn summarize(reports: &[EvalReport], mode: &str, checkpoint_digest: &str, config_digest: &str) -> EvalSummary {
    let names: Vec<String> = reports.first().map(|r| r.classes.iter().map(|c| c.name.clone()).collect()).unwrap_or_default();
    let held_out = |n: &str| n != "training" && !ShapeKind::ALL.iter().any(|k| k.name() == n);
    EvalSummary {
        stage: reports.first().map_or(Stage::Tracking, |r| r.stage),
        mode: mode.to_string(),
        checkpoint_digest: checkpoint_digest.to_string(),
        config_digest: config_digest.to_string(),
        episodes_per_seed: reports.first().and_then(|r| r.classes.first()).map_or(0, |c| c.episodes),
        seeds: reports.iter().map(|r| r.seed).collect(),
        classes: names.iter().map(|n| pooled(n, reports, &|c: &str| c == n)).collect(),
        training: pooled("training", reports, &|c: &str| !held_out(c)),
        held_out: pooled("held-out", reports, &held_out),
    }
}

impl EvalSummary {
    /// Plain-text table, one row per class.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "stage {}  mode {}  seeds {}  episodes/seed {}  (± is std over seed groups)",
            self.stage,
            self.mode,
            self.seeds.len(),
            self.episodes_per_seed
        );
        let _ = writeln!(s, "{:<22} {:>7} {:>16} {:>16}", "object", "trials", "track S.R. %", "catch S.R. %");
        for c in self.classes.iter().chain([&self.training, &self.held_out]) {
            if c.trials == 0 {
                continue;
            }
            let _ = writeln!(
                s,
                "{:<22} {:>7} {:>9.1} ± {:<4.1} {:>9.1} ± {:<4.1}",
                c.name, c.trials, c.track_mean, c.track_std, c.catch_mean, c.catch_std
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppo::ClassReport;

    fn report(seed: u64, rates: &[(&str, f64, f64)]) -> EvalReport {
        EvalReport {
            stage: Stage::Catching,
            seed,
            episodes: rates.len() * 10,
            touch_rate: 0.0,
            catch_rate: 0.0,
            classes: rates
                .iter()
                .map(|(n, t, c)| ClassReport {
                    name: n.to_string(),
                    episodes: 10,
                    touch_rate: *t,
                    catch_rate: *c,
                    mean_return: 0.0,
                    mean_steps_held: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn mean_and_spread_over_seeds() {
        let reports = [
            report(0, &[("sphere", 0.5, 0.2), ("bowl", 0.4, 0.1)]),
            report(1, &[("sphere", 0.7, 0.4), ("bowl", 0.6, 0.3)]),
        ];
        let s = summarize(&reports, "two-stage", "c", "d");
        let sphere = &s.classes[0];
        assert_eq!(sphere.trials, 20);
        assert!((sphere.track_mean - 60.0).abs() < 1e-9);
        assert!((sphere.track_std - 200f64.sqrt()).abs() < 1e-9);
        assert!((s.training.catch_mean - 30.0).abs() < 1e-9);
        assert!((s.held_out.catch_mean - 20.0).abs() < 1e-9);
        assert_eq!(s.seeds, vec![0, 1]);
        assert!(s.table().contains("sphere"));
    }

    #[test]
    fn order_of_seed_reports_does_not_matter() {
        let a = report(0, &[("cube", 0.25, 0.0)]);
        let b = report(1, &[("cube", 0.75, 0.5)]);
        let x = summarize(&[a.clone(), b.clone()], "m", "", "");
        let y = summarize(&[b, a], "m", "", "");
        assert_eq!(x.classes, y.classes);
    }
}
