//! Writes scripted episodes as a JSON-lines trace that
//! `ebp replay-analyze --trace <file>` can read back.
//!
//! cargo run --release --example export_trace -- trace.jsonl

use std::path::PathBuf;

use ebp::envs::trace::{write_trace, TraceRecord};
use ebp::envs::{EnvKind, GoalEnv, Script, ScriptMemory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn record(env: &impl GoalEnv, action: Option<Vec<f64>>, reward: Option<f64>) -> TraceRecord {
    let state = env.state();
    TraceRecord {
        t: state.t,
        gripper: state.gripper,
        object_position: state.object.position(),
        object_quaternion: state.object.orientation(),
        action,
        reward,
        achieved_goal: env.achieved_goal(),
        goal: state.goal.clone(),
    }
}

fn main() -> ebp::Result<()> {
    let path = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "trace.jsonl".into()));
    let mut episodes = Vec::new();
    for (seed, script) in [(1, Script::Untouched), (1, Script::Drop), (1, Script::Deliver)] {
        let mut env = EnvKind::PlanarPickPlace.make();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        env.reset(&mut rng);
        let mut memory = ScriptMemory::default();
        let mut records = vec![record(&env, None, None)];
        loop {
            let action = env.scripted_action(script, &mut memory);
            let outcome = env.step(&action)?;
            records.push(record(&env, Some(action), Some(outcome.reward)));
            if outcome.done {
                break;
            }
        }
        episodes.push(records);
    }
    write_trace(&path, &episodes)?;
    println!("wrote {} episodes to {}", episodes.len(), path.display());
    Ok(())
}
