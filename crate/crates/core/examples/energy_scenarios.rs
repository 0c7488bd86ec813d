//! Trajectory energy of three scripted pick-and-place episodes from the same
//! reset: the object left alone, lifted then dropped, and delivered.
//!
//! cargo run --release --example energy_scenarios -- [seed]

use ebp::energy::{transition_energies, EnergyParams};
use ebp::envs::{EnvKind, GoalEnv, Script, ScriptMemory};
use ebp::harness::rollout;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ebp::Result<()> {
    let seed = std::env::args().nth(1).map_or(Ok(1), |s| s.parse()).expect("seed must be an integer");
    let kind = EnvKind::PlanarPickPlace;
    let params = EnergyParams::with_clip(kind.spec().e_tran_max)?;
    for script in [Script::Untouched, Script::Drop, Script::Deliver] {
        let mut env = kind.make();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut memory = ScriptMemory::default();
        let episode = rollout(&mut env, &mut rng, &params, |env, _, _| Ok(env.scripted_action(script, &mut memory)))?;
        let peak = transition_energies(episode.object_states(), &params)?.into_iter().fold(0.0, f64::max);
        println!(
            "{:<9} energy {:.4} J  peak step {:.4} J  success {}  goal {:?}",
            format!("{script:?}"),
            episode.trajectory_energy(),
            peak,
            episode.success(),
            episode.goal()
        );
    }
    Ok(())
}
