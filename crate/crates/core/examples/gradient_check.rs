//! Backpropagated critic and actor gradients against central differences.
//!
//! cargo run --release --example gradient_check

use ebp::agent::{actor_loss_and_gradients, critic_loss_and_gradients, Activation, Mlp};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn numeric(net: &Mlp, loss: impl Fn(&Mlp) -> f64) -> Vec<f64> {
    let params = net.flat_params();
    let mut probe = net.clone();
    (0..params.len())
        .map(|i| {
            let mut p = params.clone();
            p[i] += 1e-5;
            probe.set_flat_params(&p).unwrap();
            let up = loss(&probe);
            p[i] -= 2e-5;
            probe.set_flat_params(&p).unwrap();
            (up - loss(&probe)) / 2e-5
        })
        .collect()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    diff / norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()))
}

fn main() -> ebp::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (obs, act) = (5, 2);
    let actor = Mlp::new(&[obs, 16, 16, act], Activation::Tanh, &mut rng)?;
    let critic = Mlp::new(&[obs + act, 16, 16, 1], Activation::Identity, &mut rng)?;
    let x = Array2::from_shape_simple_fn((32, obs), || rng.gen_range(-1.0..1.0));
    let xa = Array2::from_shape_simple_fn((32, obs + act), || rng.gen_range(-1.0..1.0));
    let targets: Vec<f64> = (0..32).map(|_| rng.gen_range(-10.0..0.0)).collect();

    let (loss, grads, _) = critic_loss_and_gradients(&critic, xa.view(), &targets)?;
    let fd = numeric(&critic, |net| critic_loss_and_gradients(net, xa.view(), &targets).unwrap().0);
    println!("critic loss {loss:.4}, {} params, relative error {:.2e}", fd.len(), relative_error(&grads.flatten(), &fd));

    let (loss, grads) = actor_loss_and_gradients(&actor, &critic, x.view(), 1.0, 1.0)?;
    let fd = numeric(&actor, |net| actor_loss_and_gradients(net, &critic, x.view(), 1.0, 1.0).unwrap().0);
    println!("actor loss {loss:.4}, {} params, relative error {:.2e}", fd.len(), relative_error(&grads.flatten(), &fd));
    Ok(())
}
