use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{clip_grad_norm, Adam};
use super::config::PpoConfig;
use super::net::PolicyNet;
use crate::error::{Error, Result};

/// Inputs to one loss evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Minibatch<'a> {
    /// Normalized observations.
    pub obs: ArrayView2<'a, f64>,
    pub actions: ArrayView2<'a, f64>,
    pub logp_old: ArrayView1<'a, f64>,
    pub advantages: ArrayView1<'a, f64>,
    pub returns: ArrayView1<'a, f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossStats {
    pub total: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
}

impl LossStats {
    fn accumulate(&mut self, other: &LossStats, w: f64) {
        self.total += w * other.total;
        self.policy_loss += w * other.policy_loss;
        self.value_loss += w * other.value_loss;
        self.entropy += w * other.entropy;
        self.clip_fraction += w * other.clip_fraction;
        self.approx_kl += w * other.approx_kl;
        self.grad_norm += w * other.grad_norm;
    }
}

/// Clipped-surrogate PPO loss and its gradient with respect to every
/// network parameter:
///
/// `L = -mean(min(r·A, clip(r, 1-ε, 1+ε)·A)) + c_v·mean((V-R)²) - c_e·H`
pub fn ppo_loss(net: &PolicyNet, mb: &Minibatch<'_>, cfg: &PpoConfig) -> Result<(LossStats, Vec<f64>)> {
    let m = mb.obs.nrows();
    let mf = m as f64;
    let fp = net.forward(mb.obs.to_owned())?;
    let logp = net.log_prob(fp.mean.view(), mb.actions);
    let mask = net.spec.action_mask();
    let log_std = net.log_std();
    let inv_var: Vec<f64> = log_std.iter().map(|l| (-2.0 * l).exp()).collect();
    let a_dim = net.action_dim();

    let mut policy_loss = 0.0;
    let mut clipped = 0usize;
    let mut kl = 0.0;
    let mut d_logp = Array1::zeros(m);
    for i in 0..m {
        let ratio = (logp[i] - mb.logp_old[i]).exp();
        let adv = mb.advantages[i];
        let unclipped = ratio * adv;
        let clipped_obj = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
        if (ratio - 1.0).abs() > cfg.clip {
            clipped += 1;
        }
        kl += (ratio - 1.0) - (logp[i] - mb.logp_old[i]);
        if unclipped <= clipped_obj {
            policy_loss -= unclipped / mf;
            d_logp[i] = -ratio * adv / mf;
        } else {
            policy_loss -= clipped_obj / mf;
        }
    }

    let mut d_mean = Array2::zeros((m, a_dim));
    let mut d_log_std = vec![0.0; a_dim];
    for i in 0..m {
        let g = d_logp[i];
        if g == 0.0 {
            continue;
        }
        for j in 0..a_dim {
            if mask[j] == 0.0 {
                continue;
            }
            let diff = mb.actions[(i, j)] - fp.mean[(i, j)];
            d_mean[(i, j)] = g * diff * inv_var[j];
            d_log_std[j] += g * (diff * diff * inv_var[j] - 1.0);
        }
    }
    let entropy = net.entropy();
    for j in 0..a_dim {
        d_log_std[j] -= cfg.entropy_coef * mask[j];
    }

    let diff = &fp.value - &mb.returns;
    let value_loss = diff.mapv(|d| d * d).sum() / mf;
    let d_value = diff.mapv(|d| cfg.value_coef * 2.0 * d / mf);

    let total = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy;
    if !total.is_finite() {
        return Err(Error::Diverged(format!(
            "non-finite loss (policy {policy_loss}, value {value_loss})"
        )));
    }
    let grad = net.backward(&fp, &d_mean, &d_log_std, &d_value);
    Ok((
        LossStats {
            total,
            policy_loss,
            value_loss,
            entropy,
            clip_fraction: clipped as f64 / mf,
            approx_kl: kl / mf,
            grad_norm: 0.0,
        },
        grad,
    ))
}

/// Flattened training data for one update.
#[derive(Debug, Clone)]
pub struct UpdateData {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub logp: Array1<f64>,
    pub advantages: Array1<f64>,
    pub returns: Array1<f64>,
}

/// Normalize advantages over the whole batch, then run `epochs` passes of
/// shuffled minibatch Adam steps. Returns per-minibatch means and the stats
/// of the very first minibatch (before any parameter change).
pub fn ppo_update<R: Rng + ?Sized>(
    net: &mut PolicyNet,
    adam: &mut Adam,
    data: &UpdateData,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<(LossStats, LossStats)> {
    let n = data.obs.nrows();
    if n == 0 {
        return Ok((LossStats::default(), LossStats::default()));
    }
    let mean = data.advantages.mean().unwrap_or(0.0);
    let std = data.advantages.std(0.0);
    let adv = data.advantages.mapv(|a| (a - mean) / (std + 1e-8));

    let mb_count = cfg.minibatches.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut mean_stats = LossStats::default();
    let mut first = None;
    let mut count = 0.0;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for k in 0..mb_count {
            let lo = k * n / mb_count;
            let hi = (k + 1) * n / mb_count;
            let idx = &order[lo..hi];
            let obs = data.obs.select(Axis(0), idx);
            let actions = data.actions.select(Axis(0), idx);
            let logp_old = data.logp.select(Axis(0), idx);
            let a = adv.select(Axis(0), idx);
            let ret = data.returns.select(Axis(0), idx);
            let mb = Minibatch {
                obs: obs.view(),
                actions: actions.view(),
                logp_old: logp_old.view(),
                advantages: a.view(),
                returns: ret.view(),
            };
            let (mut stats, mut grad) = ppo_loss(net, &mb, cfg)?;
            stats.grad_norm = clip_grad_norm(&mut grad, cfg.max_grad_norm);
            if first.is_none() {
                first = Some(stats);
            }
            adam.step(&mut net.params, &grad);
            net.project();
            mean_stats.accumulate(&stats, 1.0);
            count += 1.0;
        }
    }
    let mut out = LossStats::default();
    out.accumulate(&mean_stats, 1.0 / count);
    Ok((out, first.expect("at least one minibatch")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ppo::net::NetSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    struct Fixture {
        net: PolicyNet,
        obs: Array2<f64>,
        actions: Array2<f64>,
        logp_old: Array1<f64>,
        adv: Array1<f64>,
        ret: Array1<f64>,
    }

    impl Fixture {
        fn mb(&self) -> Minibatch<'_> {
            Minibatch {
                obs: self.obs.view(),
                actions: self.actions.view(),
                logp_old: self.logp_old.view(),
                advantages: self.adv.view(),
                returns: self.ret.view(),
            }
        }
    }

    fn gauss(rng: &mut ChaCha8Rng) -> f64 {
        StandardNormal.sample(rng)
    }

    fn fixture(roll: bool, seed: u64) -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = NetSpec {
            obs_dim: 5,
            hidden: vec![4, 4],
            hand: false,
            roll,
        };
        let mut net = PolicyNet::new(spec, &mut rng).unwrap();
        for p in net.params.iter_mut() {
            *p = 0.5 * gauss(&mut rng);
        }
        for v in net.block_mut("log_std") {
            *v = -0.5 + 0.2 * v.tanh();
        }
        let m = 12;
        let obs = Array2::from_shape_fn((m, 5), |_| gauss(&mut rng));
        let actions = Array2::from_shape_fn((m, 6), |_| gauss(&mut rng));
        let fp = net.forward(obs.clone()).unwrap();
        let logp = net.log_prob(fp.mean.view(), actions.view());
        // ratios spread inside and outside the clip interval, away from its edges
        let shifts = [-0.6, -0.1, 0.0, 0.05, 0.4, -0.3];
        let logp_old = Array1::from_shape_fn(m, |i| logp[i] - shifts[i % shifts.len()]);
        let adv = Array1::from_shape_fn(m, |_| gauss(&mut rng));
        let ret = Array1::from_shape_fn(m, |_| gauss(&mut rng));
        Fixture {
            net,
            obs,
            actions,
            logp_old,
            adv,
            ret,
        }
    }

    fn cfg() -> PpoConfig {
        PpoConfig {
            entropy_coef: 0.01,
            ..PpoConfig::default()
        }
    }

    fn check_gradient(roll: bool) {
        let f = fixture(roll, 11);
        let cfg = cfg();
        let (_, grad) = ppo_loss(&f.net, &f.mb(), &cfg).unwrap();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for k in 0..f.net.params.len() {
            let mut plus = f.net.clone();
            plus.params[k] += h;
            let mut minus = f.net.clone();
            minus.params[k] -= h;
            let lp = ppo_loss(&plus, &f.mb(), &cfg).unwrap().0.total;
            let lm = ppo_loss(&minus, &f.mb(), &cfg).unwrap().0.total;
            let fd = (lp - lm) / (2.0 * h);
            let rel = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-5);
            worst = worst.max(rel);
        }
        assert!(worst <= 1e-4, "worst relative gradient error {worst:e}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        check_gradient(true);
    }

    #[test]
    fn masked_gradient_matches_finite_differences() {
        check_gradient(false);
    }

    #[test]
    fn masked_roll_gets_no_policy_gradient() {
        let f = fixture(false, 12);
        let cfg = PpoConfig {
            entropy_coef: 0.01,
            ..PpoConfig::default()
        };
        let (_, grad) = ppo_loss(&f.net, &f.mb(), &cfg).unwrap();
        let seg = f.net.layout.get("log_std").unwrap();
        assert_eq!(grad[seg.offset + crate::simenv::ROLL_INDEX], 0.0);
        let w = f.net.layout.get("pi.arm.w").unwrap();
        for r in 0..w.rows {
            assert_eq!(grad[w.offset + r * w.cols + crate::simenv::ROLL_INDEX], 0.0);
        }
    }

    #[test]
    fn fresh_policy_has_unit_ratio() {
        let mut f = fixture(true, 13);
        let fp = f.net.forward(f.obs.clone()).unwrap();
        f.logp_old = f.net.log_prob(fp.mean.view(), f.actions.view());
        let (stats, _) = ppo_loss(&f.net, &f.mb(), &cfg()).unwrap();
        assert_eq!(stats.clip_fraction, 0.0);
        assert!(stats.approx_kl.abs() < 1e-14);
        let expected = -f.adv.mean().unwrap();
        assert!((stats.policy_loss - expected).abs() < 1e-12);
    }

    #[test]
    fn two_sample_surrogate_by_hand() {
        let mut f = fixture(true, 14);
        let fp = f.net.forward(f.obs.clone()).unwrap();
        let logp = f.net.log_prob(fp.mean.view(), f.actions.view());
        let rows = [0usize, 1];
        let obs = f.obs.select(Axis(0), &rows);
        let actions = f.actions.select(Axis(0), &rows);
        // ratio 1.5 with positive advantage is clipped to 1.2, ratio 0.5 with
        // negative advantage is clipped to 0.8
        let logp_old = Array1::from(vec![logp[0] - 1.5f64.ln(), logp[1] - 0.5f64.ln()]);
        let adv = Array1::from(vec![2.0, -1.0]);
        let ret = Array1::from(vec![0.0, 0.0]);
        f.obs = obs;
        f.actions = actions;
        f.logp_old = logp_old;
        f.adv = adv;
        f.ret = ret;
        let (stats, _) = ppo_loss(&f.net, &f.mb(), &cfg()).unwrap();
        let expected = -(1.2 * 2.0 + 0.8 * -1.0) / 2.0;
        assert!((stats.policy_loss - expected).abs() < 1e-12);
        assert_eq!(stats.clip_fraction, 1.0);
    }

    #[test]
    fn zero_advantage_gives_no_policy_gradient() {
        let mut f = fixture(true, 15);
        f.adv.fill(0.0);
        let cfg = PpoConfig {
            entropy_coef: 0.0,
            value_coef: 0.0,
            ..PpoConfig::default()
        };
        let (stats, grad) = ppo_loss(&f.net, &f.mb(), &cfg).unwrap();
        assert_eq!(stats.policy_loss, 0.0);
        assert!(grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let mut f = fixture(true, 16);
        f.ret[0] = f64::NAN;
        assert!(matches!(ppo_loss(&f.net, &f.mb(), &cfg()), Err(Error::Diverged(_))));
    }

    #[test]
    fn update_reduces_loss_on_fixed_batch() {
        let f = fixture(true, 17);
        let mut net = f.net.clone();
        let fp = net.forward(f.obs.clone()).unwrap();
        let data = UpdateData {
            obs: f.obs.clone(),
            actions: f.actions.clone(),
            logp: net.log_prob(fp.mean.view(), f.actions.view()),
            advantages: f.adv.clone(),
            returns: f.ret.clone(),
        };
        let cfg = PpoConfig {
            minibatches: 1,
            epochs: 1,
            learning_rate: 1e-2,
            ..PpoConfig::default()
        };
        let mut adam = Adam::new(net.params.len(), cfg.learning_rate);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (before, _) = ppo_update(&mut net, &mut adam, &data, &cfg, &mut rng).unwrap();
        for _ in 0..20 {
            ppo_update(&mut net, &mut adam, &data, &cfg, &mut rng).unwrap();
        }
        let (after, _) = ppo_update(&mut net, &mut adam, &data, &cfg, &mut rng).unwrap();
        assert!(after.total < before.total, "{} !< {}", after.total, before.total);
    }
}
