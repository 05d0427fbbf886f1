use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::normalizer::Normalizer;
use crate::error::{Error, Result};
use crate::simenv::{ARM_ACTION_DIM, HAND_DOF, ROLL_INDEX, TRACKING_OBS_DIM};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;
pub const INITIAL_LOG_STD: f64 = -0.5;
const LOG_2PI: f64 = 1.837_877_066_409_345_5;

/// Shape of a policy/value network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub obs_dim: usize,
    /// Hidden layer widths, shared by the actor trunk and the critic.
    pub hidden: Vec<usize>,
    /// Adds the 12-output hand head.
    pub hand: bool,
    /// Roll action enabled; when false its log-probability and output are
    /// masked out.
    pub roll: bool,
}

impl NetSpec {
    pub fn action_dim(&self) -> usize {
        ARM_ACTION_DIM + if self.hand { HAND_DOF } else { 0 }
    }

    /// 1 for dimensions the policy controls, 0 for frozen ones.
    pub fn action_mask(&self) -> Vec<f64> {
        (0..self.action_dim())
            .map(|i| if i == ROLL_INDEX && !self.roll { 0.0 } else { 1.0 })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.obs_dim == 0 || self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config(format!("invalid network shape {self:?}")));
        }
        Ok(())
    }
}

/// A named block in the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub segments: Vec<Segment>,
}

impl Layout {
    pub fn for_spec(spec: &NetSpec) -> Self {
        let mut layout = Layout { segments: Vec::new() };
        for trunk in ["pi", "vf"] {
            let mut fan_in = spec.obs_dim;
            for (l, &width) in spec.hidden.iter().enumerate() {
                layout.push(&format!("{trunk}.w{l}"), fan_in, width);
                layout.push(&format!("{trunk}.b{l}"), 1, width);
                fan_in = width;
            }
        }
        let last = *spec.hidden.last().expect("validated");
        layout.push("pi.arm.w", last, ARM_ACTION_DIM);
        layout.push("pi.arm.b", 1, ARM_ACTION_DIM);
        if spec.hand {
            layout.push("pi.hand.w", last, HAND_DOF);
            layout.push("pi.hand.b", 1, HAND_DOF);
        }
        layout.push("log_std", 1, spec.action_dim());
        layout.push("vf.out.w", last, 1);
        layout.push("vf.out.b", 1, 1);
        layout
    }

    fn push(&mut self, name: &str, rows: usize, cols: usize) {
        let offset = self.len();
        self.segments.push(Segment {
            name: name.to_string(),
            rows,
            cols,
            offset,
        });
    }

    pub fn len(&self) -> usize {
        self.segments.last().map_or(0, |s| s.offset + s.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    fn seg(&self, name: &str) -> &Segment {
        self.get(name).unwrap_or_else(|| panic!("missing parameter block {name}"))
    }
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub input: Array2<f64>,
    pub actor: Vec<Array2<f64>>,
    pub critic: Vec<Array2<f64>>,
    /// Batch × action_dim.
    pub mean: Array2<f64>,
    pub value: Array1<f64>,
}

/// Gaussian actor-critic. Parameters live in one flat vector described by
/// `layout`, which makes the optimizer and checkpoint code layout-agnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    pub spec: NetSpec,
    pub layout: Layout,
    pub params: Vec<f64>,
    pub normalizer: Normalizer,
}

impl PolicyNet {
    /// Fresh network. Hidden weights are drawn with variance `1/fan_in`,
    /// action heads are scaled down by 100 and the input weights reading the
    /// hand-joint slots start at zero.
    pub fn new<R: Rng + ?Sized>(spec: NetSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let layout = Layout::for_spec(&spec);
        let mut params = vec![0.0; layout.len()];
        for seg in &layout.segments {
            let name = seg.name.as_str();
            let scale = if name == "pi.arm.w" || name == "pi.hand.w" {
                0.01 / (seg.rows as f64).sqrt()
            } else if name.contains(".w") {
                1.0 / (seg.rows as f64).sqrt()
            } else {
                0.0
            };
            for p in &mut params[seg.range()] {
                let n: f64 = StandardNormal.sample(rng);
                *p = scale * n;
            }
        }
        params[layout.seg("log_std").range()].fill(INITIAL_LOG_STD);
        let mut net = PolicyNet {
            normalizer: Normalizer::new(spec.obs_dim),
            spec,
            layout,
            params,
        };
        net.zero_hand_inputs();
        Ok(net)
    }

    fn zero_hand_inputs(&mut self) {
        if self.spec.obs_dim <= TRACKING_OBS_DIM {
            return;
        }
        for trunk in ["pi", "vf"] {
            let seg = self.layout.seg(&format!("{trunk}.w0")).clone();
            let mut w = ArrayViewMut2::from_shape((seg.rows, seg.cols), &mut self.params[seg.range()]).expect("layout");
            w.slice_mut(s![TRACKING_OBS_DIM.., ..]).fill(0.0);
        }
    }

    pub fn action_dim(&self) -> usize {
        self.spec.action_dim()
    }

    pub fn block(&self, name: &str) -> &[f64] {
        &self.params[self.layout.seg(name).range()]
    }

    pub fn block_mut(&mut self, name: &str) -> &mut [f64] {
        let range = self.layout.seg(name).range();
        &mut self.params[range]
    }

    fn matrix(&self, name: &str) -> ArrayView2<'_, f64> {
        let seg = self.layout.seg(name);
        ArrayView2::from_shape((seg.rows, seg.cols), &self.params[seg.range()]).expect("layout")
    }

    fn vector(&self, name: &str) -> ArrayView1<'_, f64> {
        ArrayView1::from(self.block(name))
    }

    /// Log standard deviations after clamping.
    pub fn log_std(&self) -> Vec<f64> {
        self.block("log_std").iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect()
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std().iter().map(|v| v.exp()).collect()
    }

    /// Keep log-std inside its admissible range after an optimizer step.
    pub fn project(&mut self) {
        for v in self.block_mut("log_std") {
            *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    fn trunk(&self, prefix: &str, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(self.spec.hidden.len());
        for l in 0..self.spec.hidden.len() {
            let input = if l == 0 { x } else { &acts[l - 1] };
            let mut z = input.dot(&self.matrix(&format!("{prefix}.w{l}")));
            z += &self.vector(&format!("{prefix}.b{l}"));
            z.mapv_inplace(f64::tanh);
            acts.push(z);
        }
        acts
    }

    /// Batched forward pass on already-normalized observations.
    pub fn forward(&self, x: Array2<f64>) -> Result<ForwardPass> {
        if x.ncols() != self.spec.obs_dim {
            return Err(Error::Dimension {
                expected: self.spec.obs_dim,
                actual: x.ncols(),
            });
        }
        let actor = self.trunk("pi", &x);
        let critic = self.trunk("vf", &x);
        let h = actor.last().expect("non-empty");
        let mut arm = h.dot(&self.matrix("pi.arm.w"));
        arm += &self.vector("pi.arm.b");
        let mean = if self.spec.hand {
            let mut hand = h.dot(&self.matrix("pi.hand.w"));
            hand += &self.vector("pi.hand.b");
            ndarray::concatenate(Axis(1), &[arm.view(), hand.view()]).expect("same rows")
        } else {
            arm
        };
        let hv = critic.last().expect("non-empty");
        let value = hv.dot(&self.matrix("vf.out.w")).column(0).to_owned() + self.block("vf.out.b")[0];
        Ok(ForwardPass {
            input: x,
            actor,
            critic,
            mean,
            value,
        })
    }

    /// Normalize raw observations with the stored statistics and run forward.
    pub fn forward_raw(&self, raw: &[Vec<f64>]) -> Result<ForwardPass> {
        let x = self.normalize_batch(raw)?;
        self.forward(x)
    }

    pub fn normalize_batch(&self, raw: &[Vec<f64>]) -> Result<Array2<f64>> {
        let d = self.spec.obs_dim;
        let mut x = Array2::zeros((raw.len(), d));
        for (mut row, obs) in x.rows_mut().into_iter().zip(raw) {
            if obs.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    actual: obs.len(),
                });
            }
            self.normalizer.normalize_into(obs, row.as_slice_mut().expect("row-major"));
        }
        Ok(x)
    }

    /// Diagonal Gaussian log-density of `actions` (rows) under `mean`,
    /// over the unmasked dimensions.
    pub fn log_prob(&self, mean: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>) -> Array1<f64> {
        let log_std = self.log_std();
        let mask = self.spec.action_mask();
        let constant: f64 = log_std.iter().zip(&mask).map(|(l, m)| m * (l + 0.5 * LOG_2PI)).sum();
        let inv_var: Vec<f64> = log_std.iter().map(|l| (-2.0 * l).exp()).collect();
        Array1::from_iter(mean.rows().into_iter().zip(actions.rows()).map(|(mu, a)| {
            let quad: f64 = (0..mu.len()).map(|j| mask[j] * (a[j] - mu[j]).powi(2) * inv_var[j]).sum();
            -0.5 * quad - constant
        }))
    }

    /// Entropy of the action distribution (same for every state).
    pub fn entropy(&self) -> f64 {
        let mask = self.spec.action_mask();
        self.log_std()
            .iter()
            .zip(&mask)
            .map(|(l, m)| m * (l + 0.5 * (LOG_2PI + 1.0)))
            .sum()
    }

    /// Gradients of a scalar loss given its partial derivatives with respect
    /// to the action means, the log-std vector and the values.
    pub fn backward(&self, fp: &ForwardPass, d_mean: &Array2<f64>, d_log_std: &[f64], d_value: &Array1<f64>) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        let h = fp.actor.last().expect("non-empty");

        let d_arm = d_mean.slice(s![.., ..ARM_ACTION_DIM]);
        self.write(&mut grad, "pi.arm.w", &h.t().dot(&d_arm));
        self.write_vec(&mut grad, "pi.arm.b", &d_arm.sum_axis(Axis(0)));
        let mut d_h = d_arm.dot(&self.matrix("pi.arm.w").t());
        if self.spec.hand {
            let d_hand = d_mean.slice(s![.., ARM_ACTION_DIM..]);
            self.write(&mut grad, "pi.hand.w", &h.t().dot(&d_hand));
            self.write_vec(&mut grad, "pi.hand.b", &d_hand.sum_axis(Axis(0)));
            d_h += &d_hand.dot(&self.matrix("pi.hand.w").t());
        }
        self.trunk_backward(&mut grad, "pi", &fp.input, &fp.actor, d_h);

        let raw = self.block("log_std");
        let seg = self.layout.seg("log_std").range();
        for (j, g) in grad[seg].iter_mut().enumerate() {
            if (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw[j]) {
                *g = d_log_std[j];
            }
        }

        let hv = fp.critic.last().expect("non-empty");
        let dv = d_value.view().insert_axis(Axis(1));
        self.write(&mut grad, "vf.out.w", &hv.t().dot(&dv));
        self.write_vec(&mut grad, "vf.out.b", &dv.sum_axis(Axis(0)));
        let d_hv = dv.dot(&self.matrix("vf.out.w").t());
        self.trunk_backward(&mut grad, "vf", &fp.input, &fp.critic, d_hv);
        grad
    }

    fn trunk_backward(&self, grad: &mut [f64], prefix: &str, input: &Array2<f64>, acts: &[Array2<f64>], mut d_h: Array2<f64>) {
        for l in (0..acts.len()).rev() {
            let dz = &d_h * &acts[l].mapv(|a| 1.0 - a * a);
            let below = if l == 0 { input } else { &acts[l - 1] };
            self.write(grad, &format!("{prefix}.w{l}"), &below.t().dot(&dz));
            self.write_vec(grad, &format!("{prefix}.b{l}"), &dz.sum_axis(Axis(0)));
            if l > 0 {
                d_h = dz.dot(&self.matrix(&format!("{prefix}.w{l}")).t());
            }
        }
    }

    fn write(&self, grad: &mut [f64], name: &str, m: &Array2<f64>) {
        let seg = self.layout.seg(name);
        let mut dst = ArrayViewMut2::from_shape((seg.rows, seg.cols), &mut grad[seg.range()]).expect("layout");
        dst.assign(m);
    }

    fn write_vec(&self, grad: &mut [f64], name: &str, v: &Array1<f64>) {
        let seg = self.layout.seg(name);
        grad[seg.range()].copy_from_slice(v.as_slice().expect("contiguous"));
    }

    /// Deterministic action: the mean, clamped to `[-1, 1]`, masked dims 0.
    pub fn act_deterministic(&self, raw_obs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let fp = self.forward_raw(raw_obs)?;
        let mask = self.spec.action_mask();
        Ok(fp
            .mean
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(&mask).map(|(m, k)| if *k == 0.0 { 0.0 } else { m.clamp(-1.0, 1.0) }).collect())
            .collect())
    }
}

impl PolicyNet {
    /// Stochastic action: a Gaussian sample around the mean, clamped like
    /// the deterministic one.
    pub fn act_sampled<R: Rng + ?Sized>(&self, raw_obs: &[Vec<f64>], rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let fp = self.forward_raw(raw_obs)?;
        let mask = self.spec.action_mask();
        let std = self.std();
        Ok(fp
            .mean
            .rows()
            .into_iter()
            .map(|row| {
                let sample: Vec<f64> = row
                    .iter()
                    .zip(&std)
                    .map(|(m, s)| {
                        let eps: f64 = StandardNormal.sample(rng);
                        m + s * eps
                    })
                    .collect();
                env_action(&sample, &mask)
            })
            .collect())
    }
}

/// Clamp a sampled action into the normalized box and zero masked dims; this
/// is what the environment receives.
pub fn env_action(sample: &[f64], mask: &[f64]) -> Vec<f64> {
    sample
        .iter()
        .zip(mask)
        .map(|(a, m)| if *m == 0.0 { 0.0 } else { a.clamp(-1.0, 1.0) })
        .collect()
}
