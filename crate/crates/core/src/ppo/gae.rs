/// Generalized advantage estimation over one trajectory segment.
///
/// `dones[t]` marks that the episode ended after step `t`; `bootstrap` is the
/// value of the state following the last step (ignored if it is terminal).
pub fn compute_gae(rewards: &[f64], values: &[f64], dones: &[bool], bootstrap: f64, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert_eq!(values.len(), n, "values length");
    assert_eq!(dones.len(), n, "dones length");
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffix_sums_when_undiscounted() {
        let r = [1.0, 2.0, 3.0, 4.0];
        let (a, ret) = compute_gae(&r, &[0.0; 4], &[false; 4], 0.0, 1.0, 1.0);
        assert_eq!(a, vec![10.0, 9.0, 7.0, 4.0]);
        assert_eq!(ret, a);
    }

    #[test]
    fn single_step_by_hand() {
        let (a, ret) = compute_gae(&[1.0], &[0.5], &[false], 0.0, 0.9, 0.95);
        assert!((a[0] - 0.5).abs() < 1e-15);
        assert!((ret[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn done_cuts_the_future() {
        let base = compute_gae(&[1.0, 2.0, 3.0], &[0.1, 0.2, 0.3], &[false, true, false], 7.0, 0.99, 0.95).0;
        let other = compute_gae(&[1.0, 2.0, -30.0], &[0.1, 0.2, 9.0], &[false, true, false], -4.0, 0.99, 0.95).0;
        assert_eq!(base[..2], other[..2]);
    }
}
