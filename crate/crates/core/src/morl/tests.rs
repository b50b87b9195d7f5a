use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn close(a: f64, n: f64) -> bool {
    (a - n).abs() <= 1e-4 * a.abs().max(n.abs()) + 1e-9
}

fn random_tree(rng: &mut ChaCha8Rng, depth: usize, n_in: usize) -> Ddt {
    let mut t = Ddt::new(depth, n_in, 4, 1.0, rng).unwrap();
    for p in t.params.iter_mut() {
        *p += rng.gen_range(-0.5..0.5);
    }
    t
}

fn random_valid(rng: &mut ChaCha8Rng) -> [bool; 4] {
    let mut v: [bool; 4] = std::array::from_fn(|_| rng.gen_bool(0.75));
    v[rng.gen_range(0..4)] = true;
    v
}

fn log_prob(t: &Ddt, x: &[f64], valid: &[bool], a: usize) -> f64 {
    t.forward(x, valid).probs[a].ln()
}

#[test]
fn tree_log_prob_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let t = random_tree(&mut rng, 3, 5);
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let valid = random_valid(&mut rng);
        let a = (0..4).find(|&k| valid[k]).unwrap();
        let tr = t.forward(&x, &valid);
        let mut g = vec![0.0; t.params.len()];
        t.backward_log_prob(&x, &valid, &tr, a, 1.0, &mut g);
        let h = 1e-6;
        for i in 0..t.params.len() {
            let mut p = t.clone();
            p.params[i] += h;
            let up = log_prob(&p, &x, &valid, a);
            p.params[i] -= 2.0 * h;
            let dn = log_prob(&p, &x, &valid, a);
            let num = (up - dn) / (2.0 * h);
            assert!(close(g[i], num), "param {i}: analytic {} numeric {num}", g[i]);
        }
    }
}

#[test]
fn value_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let net = ValueNet::new(6, 8, 2, &mut rng).unwrap();
    let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w = [0.7, -1.3];
    let tr = net.forward(&x);
    let mut g = vec![0.0; net.params.len()];
    net.backward(&x, &tr, &w, &mut g);
    let f = |n: &ValueNet| {
        let v = n.value(&x);
        w[0] * v[0] + w[1] * v[1]
    };
    let h = 1e-6;
    for i in 0..net.params.len() {
        let mut p = net.clone();
        p.params[i] += h;
        let up = f(&p);
        p.params[i] -= 2.0 * h;
        let num = (up - f(&p)) / (2.0 * h);
        assert!(close(g[i], num), "param {i}: analytic {} numeric {num}", g[i]);
    }
}

fn batch(rng: &mut ChaCha8Rng, t: &Ddt, n: usize) -> Vec<Transition> {
    (0..n)
        .map(|k| {
            let input: [f64; POLICY_INPUTS] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
            let valid = random_valid(rng);
            let action = (0..4).filter(|&a| valid[a]).nth(k % valid.iter().filter(|&&v| v).count()).unwrap();
            let lp = t.forward(&input, &valid).probs[action].ln();
            // half the samples sit well inside the clip range, half well outside
            let shift = if k % 2 == 0 { rng.gen_range(-0.05..0.05) } else { rng.gen_range(0.3..0.5) };
            Transition { input, valid, action, old_log_prob: lp - shift, reward: [0.0; 2], terminal: false }
        })
        .collect()
}

#[test]
fn policy_loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let t = random_tree(&mut rng, 2, POLICY_INPUTS);
    let ts = batch(&mut rng, &t, 8);
    let samples: Vec<PolicySample> =
        ts.iter().map(|tr| PolicySample { t: tr, adv: rng.gen_range(-2.0..2.0) }).collect();
    let (_, g) = policy_loss(&samples, &t, 0.1);
    let h = 1e-7;
    for i in 0..t.params.len() {
        let mut p = t.clone();
        p.params[i] += h;
        let up = policy_loss(&samples, &p, 0.1).0;
        p.params[i] -= 2.0 * h;
        let num = (up - policy_loss(&samples, &p, 0.1).0) / (2.0 * h);
        assert!(close(g[i], num), "param {i}: analytic {} numeric {num}", g[i]);
    }
}

#[test]
fn value_loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let net = ValueNet::new(POLICY_INPUTS, 8, 2, &mut rng).unwrap();
    let xs: Vec<[f64; POLICY_INPUTS]> = (0..5).map(|_| std::array::from_fn(|_| rng.gen_range(0.0..1.0))).collect();
    let b: Vec<(&[f64; POLICY_INPUTS], [f64; 2])> =
        xs.iter().map(|x| (x, [rng.gen_range(-2.0..0.0), rng.gen_range(-2.0..0.0)])).collect();
    let (_, g) = value_loss(&b, &net);
    let h = 1e-6;
    for i in 0..net.params.len() {
        let mut p = net.clone();
        p.params[i] += h;
        let up = value_loss(&b, &p).0;
        p.params[i] -= 2.0 * h;
        let num = (up - value_loss(&b, &p).0) / (2.0 * h);
        assert!(close(g[i], num), "param {i}: analytic {} numeric {num}", g[i]);
    }
}

#[test]
fn masked_actions_are_never_sampled() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let t = random_tree(&mut rng, 3, 4);
    let valid = [true, false, true, true];
    let mut mode = ActionMode::Sample(ChaCha8Rng::seed_from_u64(16));
    for _ in 0..20_000 {
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let p = t.forward(&x, &valid).probs;
        assert_eq!(p[1], 0.0);
        assert_ne!(select_action(&p, &mut mode), 1);
    }
}

#[test]
fn reward_accounting_closes() {
    let mut rec = Recorder::new(RewardNormalizer::new(0.99, 10.0));
    let blank = Transition {
        input: [0.0; POLICY_INPUTS],
        valid: [true; 4],
        action: 0,
        old_log_prob: 0.0,
        reward: [0.0; 2],
        terminal: false,
    };
    let jobs = [(0u64, 3usize, 2.0, 5.0, 0.5, 0.25), (1, 2, 3.0, 4.0, 0.0, 0.0), (2, 4, 1.0, 1.0, 0.2, 0.1)];
    let mut expect = [0.0; 2];
    for &(id, decisions, time, energy, stall_t, stall_e) in &jobs {
        rec.begin_job();
        rec.record(blank.clone());
        rec.abort(); // a rolled-back attempt leaves no trace
        rec.begin_job();
        for _ in 0..decisions {
            rec.record(blank.clone());
        }
        rec.scheduled(id, time, energy);
        let s = rec.normalizer.scales();
        rec.finished(id, stall_t, stall_e);
        expect[0] -= (time + stall_t) / s[0];
        expect[1] -= (energy + stall_e) / s[1];
    }
    let (ts, _) = rec.finish_episode();
    assert_eq!(ts.len(), 9);
    assert!(ts.last().unwrap().terminal);
    let nonzero = ts.iter().filter(|t| t.reward != [0.0, 0.0]).count();
    assert_eq!(nonzero, 3, "only each job's last decision is rewarded");
    let got = ts.iter().fold([0.0; 2], |a, t| [a[0] + t.reward[0], a[1] + t.reward[1]]);
    assert!((got[0] - expect[0]).abs() < 1e-12 && (got[1] - expect[1]).abs() < 1e-12);
}

#[test]
fn targets_respect_terminal_boundaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let net = ValueNet::new(POLICY_INPUTS, 4, 2, &mut rng).unwrap();
    let mk = |v: f64, r: [f64; 2], terminal| Transition {
        input: std::array::from_fn(|i| match i {
            i if i == POLICY_INPUTS - 2 => 1.0,
            i if i == POLICY_INPUTS - 1 => 0.0,
            _ => v,
        }),
        valid: [true; 4],
        action: 0,
        old_log_prob: 0.0,
        reward: r,
        terminal,
    };
    let b = vec![mk(0.1, [0.0, 0.0], false), mk(0.2, [-1.0, -2.0], true), mk(0.3, [-0.5, 0.0], true)];
    let (y, adv) = targets_and_advantages(&b, &net, 0.95);
    let v1 = net.value(&b[1].input);
    assert!((y[0][0] - 0.95 * v1[0]).abs() < 1e-15);
    assert_eq!(y[1], [-1.0, -2.0]);
    let v2 = net.value(&b[2].input);
    // preference (1, 0) scalarizes onto the latency component
    assert!((adv[2] - (-0.5 - v2[0])).abs() < 1e-15);
}

#[test]
fn smoothing_matches_recurrence() {
    let s = smooth(&[1.0, 0.0, 0.0], 0.8);
    assert_eq!(s[0], 1.0);
    assert!((s[1] - 0.8).abs() < 1e-15 && (s[2] - 0.64).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_outputs_distribution(seed in any::<u64>(), depth in 1usize..6, scale in 0.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Ddt::new(depth, 6, 4, 1.0, &mut rng).unwrap();
        for p in t.params.iter_mut() {
            *p = rng.gen_range(-scale..=scale);
        }
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let valid = random_valid(&mut rng);
        let p = t.forward(&x, &valid).probs;
        prop_assert!(p.iter().all(|v| *v >= 0.0 && v.is_finite()));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for k in 0..4 {
            if !valid[k] {
                prop_assert_eq!(p[k], 0.0);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_on_random_inputs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tree(&mut rng, 2, 3);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let valid = random_valid(&mut rng);
        let a = (0..4).rev().find(|&k| valid[k]).unwrap();
        let tr = t.forward(&x, &valid);
        let mut g = vec![0.0; t.params.len()];
        t.backward_log_prob(&x, &valid, &tr, a, 1.0, &mut g);
        let h = 1e-6;
        for i in 0..t.params.len() {
            let mut p = t.clone();
            p.params[i] += h;
            let up = log_prob(&p, &x, &valid, a);
            p.params[i] -= 2.0 * h;
            let num = (up - log_prob(&p, &x, &valid, a)) / (2.0 * h);
            prop_assert!(close(g[i], num), "param {}: {} vs {}", i, g[i], num);
        }
    }
}
