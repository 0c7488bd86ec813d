//! Oracles shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use ebp::agent::{actor_loss_and_gradients, critic_loss_and_gradients, Activation, Mlp};
use ebp::energy::{EnergyParams, EulerAngles, ObjectState};
use ebp::envs::{EnvKind, GoalEnv, Script, ScriptMemory};
use ebp::harness::rollout;
use ebp::per::SumTree;
use ebp::replay::{Episode, ReplayBuffer, SamplingStrategy};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson chi-square goodness of fit. Cells with zero expected probability
/// must be empty; returns the p-value (0 if a zero-probability cell was hit).
pub fn chi_square_p(observed: &[u64], probs: &[f64]) -> f64 {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        if p == 0.0 {
            if o > 0 {
                return 0.0;
            }
            continue;
        }
        let e = p * n as f64;
        stat += (o as f64 - e).powi(2) / e;
        cells += 1;
    }
    if cells < 2 {
        return 1.0;
    }
    1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat)
}

/// Relative error `|a - n| / max(|a|, |n|)` between gradient vectors.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Central differences of `loss` with respect to every parameter of `net`.
pub fn numeric_gradient(net: &Mlp, step: f64, mut loss: impl FnMut(&Mlp) -> f64) -> Vec<f64> {
    let params = net.flat_params();
    let mut probe = net.clone();
    let mut grad = Vec::with_capacity(params.len());
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] = params[i] + step;
        probe.set_flat_params(&p).unwrap();
        let up = loss(&probe);
        p[i] = params[i] - step;
        probe.set_flat_params(&p).unwrap();
        let down = loss(&probe);
        grad.push((up - down) / (2.0 * step));
    }
    grad
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.0..1.0))
}

/// Random three-layer sizes `[input, h1, h2, output]`.
fn random_sizes(rng: &mut ChaCha8Rng, input: usize, output: usize) -> Vec<usize> {
    vec![input, rng.gen_range(3..9), rng.gen_range(3..9), output]
}

/// Xavier weights plus uniform noise on every parameter, so that no
/// pre-activation sits exactly on a ReLU kink (zero biases would put dead
/// units of the next layer at exactly 0, where central differences are
/// one-sided).
fn random_net(sizes: &[usize], output: Activation, rng: &mut ChaCha8Rng) -> Mlp {
    let mut net = Mlp::new(sizes, output, rng).unwrap();
    let params: Vec<f64> = net.flat_params().iter().map(|p| p + rng.gen_range(-0.5..0.5)).collect();
    net.set_flat_params(&params).unwrap();
    net
}

/// Critic gradient check on a random small network; returns relative error.
pub fn critic_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = rng.gen_range(3..8);
    let sizes = random_sizes(&mut rng, input, 1);
    let critic = random_net(&sizes, Activation::Identity, &mut rng);
    let x = random_matrix(&mut rng, 8, input);
    let targets: Vec<f64> = (0..8).map(|_| rng.gen_range(-5.0..0.0)).collect();
    let (_, grads, _) = critic_loss_and_gradients(&critic, x.view(), &targets).unwrap();
    let numeric = numeric_gradient(&critic, 1e-5, |net| {
        critic_loss_and_gradients(net, x.view(), &targets).unwrap().0
    });
    relative_error(&grads.flatten(), &numeric)
}

/// Actor gradient check through a fixed random critic; returns relative error.
pub fn actor_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = rng.gen_range(3..8);
    let actions = rng.gen_range(1..4);
    let sizes = random_sizes(&mut rng, input, actions);
    let actor = random_net(&sizes, Activation::Tanh, &mut rng);
    let sizes = random_sizes(&mut rng, input + actions, 1);
    let critic = random_net(&sizes, Activation::Identity, &mut rng);
    let x = random_matrix(&mut rng, 8, input);
    let l2 = if seed % 2 == 0 { 0.0 } else { 0.5 };
    let (_, grads) = actor_loss_and_gradients(&actor, &critic, x.view(), 1.0, l2).unwrap();
    let numeric = numeric_gradient(&actor, 1e-5, |net| {
        actor_loss_and_gradients(net, &critic, x.view(), 1.0, l2).unwrap().0
    });
    relative_error(&grads.flatten(), &numeric)
}

/// Trajectory energies of the untouched, lifted-and-dropped and delivered
/// scripted scenarios from the same pick-and-place reset.
pub fn scenario_energies(rng_seed: u64) -> Option<[f64; 3]> {
    let kind = EnvKind::PlanarPickPlace;
    let params = EnergyParams::with_clip(kind.spec().e_tran_max).unwrap();
    let mut energies = [0.0; 3];
    for (slot, script) in [Script::Untouched, Script::Drop, Script::Deliver].into_iter().enumerate() {
        let mut env = kind.make();
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut memory = ScriptMemory::default();
        let episode = rollout(&mut env, &mut rng, &params, |env, _, _| Ok(env.scripted_action(script, &mut memory))).unwrap();
        if script == Script::Deliver && !episode.success() {
            return None;
        }
        energies[slot] = episode.trajectory_energy();
    }
    Some(energies)
}

/// Seeds whose pick-and-place goal floats above the drop height.
pub fn aerial_goal_seeds(count: usize) -> Vec<u64> {
    let mut env = EnvKind::PlanarPickPlace.make();
    (0u64..)
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (_, goal) = env.reset(&mut rng);
            goal[2] >= 0.1
        })
        .take(count)
        .collect()
}

/// Rotation matrix of a unit quaternion `[w, x, y, z]`.
pub fn quat_matrix([a, b, c, d]: [f64; 4]) -> [[f64; 3]; 3] {
    [
        [1.0 - 2.0 * (c * c + d * d), 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
        [2.0 * (b * c + a * d), 1.0 - 2.0 * (b * b + d * d), 2.0 * (c * d - a * b)],
        [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), 1.0 - 2.0 * (b * b + c * c)],
    ]
}

/// Rz(yaw) * Ry(pitch) * Rx(roll)
pub fn euler_matrix(e: EulerAngles) -> [[f64; 3]; 3] {
    let (sr, cr) = e.roll.sin_cos();
    let (sp, cp) = e.pitch.sin_cos();
    let (sy, cy) = e.yaw.sin_cos();
    [
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ]
}

/// A motionless four-step episode; callers override its energy.
pub fn still_episode() -> Episode {
    let states = vec![ObjectState::at([0.0; 3]).unwrap(); 4];
    let ag = vec![vec![0.0; 3]; 4];
    let obs = vec![vec![0.0; 2]; 4];
    Episode::new(&obs, &vec![vec![0.0]; 3], &[-1.0; 3], &[1.0; 3], &ag, &states, &EnergyParams::default()).unwrap()
}

pub fn energy_buffer(energies: &[f64]) -> ReplayBuffer {
    let mut b = ReplayBuffer::new(energies.len(), SamplingStrategy::Energy).unwrap();
    for &e in energies {
        b.insert(still_episode().with_energy(e).unwrap()).unwrap();
    }
    b
}

/// Histogram of sampled episodes by insertion index.
pub fn draw_counts(b: &ReplayBuffer, draws: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0u64; b.len()];
    for _ in 0..draws {
        counts[b.sample_episode(&mut rng).unwrap().insertion_index() as usize] += 1;
    }
    counts
}

pub fn linear_scan(leaves: &[f64], prefix: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in leaves.iter().enumerate() {
        acc += p;
        if prefix < acc {
            return i;
        }
    }
    unreachable!("prefix below total")
}

/// Sum-tree lookups against a linear scan over trees of up to 1024 leaves.
/// Returns (queries, mismatches).
pub fn sum_tree_fuzz(seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut queries, mut mismatches) = (0, 0);
    for size in [1usize, 2, 3, 7, 64, 100, 513, 1024] {
        let mut tree = SumTree::new(size);
        for _ in 0..3 {
            for leaf in 0..size {
                // dyadic priorities keep every prefix sum exact
                let p = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(1..4096) as f64 / 1024.0 };
                tree.update(leaf, p).unwrap();
            }
            let leaves = tree.leaves()[..size].to_vec();
            let total: f64 = leaves.iter().sum();
            if total == 0.0 {
                continue;
            }
            if tree.total() != total {
                mismatches += 1;
            }
            for _ in 0..5000 {
                let prefix = rng.gen_range(0.0..total);
                if tree.sample(prefix).unwrap() != linear_scan(&leaves, prefix) {
                    mismatches += 1;
                }
                queries += 1;
            }
        }
    }
    (queries, mismatches)
}
