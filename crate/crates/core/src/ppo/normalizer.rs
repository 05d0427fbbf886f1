use serde::{Deserialize, Serialize};

const VAR_EPS: f64 = 1e-8;

/// Running per-dimension mean and variance. Each dimension keeps its own
/// sample count so slots can be reset independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    /// Population variance.
    pub var: Vec<f64>,
    pub count: Vec<f64>,
    /// Normalized values are clipped to `[-clip, clip]`.
    pub clip: f64,
}

impl Normalizer {
    pub fn new(dim: usize) -> Self {
        Normalizer {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
            count: vec![0.0; dim],
            clip: 10.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Merge a batch of samples (rows) into the statistics.
    pub fn update<'a, I>(&mut self, rows: I)
    where
        I: IntoIterator<Item = &'a [f64]> + Clone,
    {
        let n = rows.clone().into_iter().count();
        if n == 0 {
            return;
        }
        let nf = n as f64;
        let d = self.dim();
        let mut bmean = vec![0.0; d];
        for row in rows.clone() {
            for (m, x) in bmean.iter_mut().zip(row) {
                *m += x;
            }
        }
        bmean.iter_mut().for_each(|m| *m /= nf);
        let mut bvar = vec![0.0; d];
        for row in rows {
            for ((v, x), m) in bvar.iter_mut().zip(row).zip(&bmean) {
                *v += (x - m) * (x - m);
            }
        }
        bvar.iter_mut().for_each(|v| *v /= nf);
        for i in 0..d {
            let c = self.count[i];
            if c == 0.0 {
                self.mean[i] = bmean[i];
                self.var[i] = bvar[i];
                self.count[i] = nf;
                continue;
            }
            let total = c + nf;
            let delta = bmean[i] - self.mean[i];
            self.mean[i] += delta * nf / total;
            let m2 = self.var[i] * c + bvar[i] * nf + delta * delta * c * nf / total;
            self.var[i] = m2 / total;
            self.count[i] = total;
        }
    }

    /// Forget the statistics of the given slots.
    pub fn reset_slots(&mut self, slots: std::ops::Range<usize>) {
        for i in slots {
            self.mean[i] = 0.0;
            self.var[i] = 1.0;
            self.count[i] = 0.0;
        }
    }

    pub fn normalize_into(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            let z = (x[i] - self.mean[i]) / (self.var[i] + VAR_EPS).sqrt();
            out[i] = z.clamp(-self.clip, self.clip);
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.normalize_into(x, &mut out);
        out
    }
}
