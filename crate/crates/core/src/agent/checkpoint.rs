//! Line-oriented text checkpoints. Floats are written as the hex of their
//! bit patterns so a load reproduces every parameter exactly.

use std::fs;
use std::path::Path;

use super::{Activation, AgentConfig, Ddpg, Mlp, Normalizer};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "ebp-agent";

fn hex(values: &[f64]) -> String {
    values.iter().map(|v| format!("{:016x}", v.to_bits())).collect::<Vec<_>>().join(" ")
}

fn unhex(token: &str) -> Result<f64> {
    u64::from_str_radix(token, 16)
        .map(f64::from_bits)
        .map_err(|_| Error::Checkpoint(format!("bad float token {token:?}")))
}

const SCALARS: [&str; 9] = [
    "gamma",
    "tau",
    "actor_lr",
    "critic_lr",
    "noise_sigma",
    "random_eps",
    "action_bound",
    "action_l2",
    "norm_clip",
];

fn scalar_values(c: &AgentConfig) -> [f64; 9] {
    [c.gamma, c.tau, c.actor_lr, c.critic_lr, c.noise_sigma, c.random_eps, c.action_bound, c.action_l2, c.norm_clip]
}

pub fn save_checkpoint(agent: &Ddpg, path: &Path) -> Result<()> {
    let mut out = format!("{MAGIC} {CHECKPOINT_VERSION}\n");
    for (name, value) in SCALARS.iter().zip(scalar_values(&agent.config)) {
        out += &format!("{name} {}\n", hex(&[value]));
    }
    let hidden: Vec<String> = agent.config.hidden.iter().map(usize::to_string).collect();
    out += &format!("hidden {}\n", hidden.join(" "));
    for (name, net) in [
        ("actor", &agent.actor),
        ("critic", &agent.critic),
        ("actor_target", &agent.actor_target),
        ("critic_target", &agent.critic_target),
    ] {
        let sizes: Vec<String> = net.sizes().iter().map(usize::to_string).collect();
        out += &format!("net {name} {} {}\n", net.output_activation().name(), sizes.join(" "));
        out += &hex(&net.flat_params());
        out.push('\n');
    }
    for (name, norm) in [("obs", &agent.obs_norm), ("goal", &agent.goal_norm)] {
        let (count, mean, m2, clip) = norm.state();
        out += &format!("norm {name} {count} {}\n{}\n{}\n", hex(&[clip]), hex(mean), hex(m2));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        self.inner
            .next()
            .map(|(i, l)| (i + 1, l.split_whitespace().collect()))
            .ok_or_else(|| Error::Checkpoint("unexpected end of checkpoint".into()))
    }

    fn expect(&mut self, keyword: &str) -> Result<Vec<&'a str>> {
        let (line, tokens) = self.next()?;
        if tokens.first() != Some(&keyword) {
            return Err(Error::Checkpoint(format!("line {line}: expected {keyword:?}")));
        }
        Ok(tokens[1..].to_vec())
    }

    fn floats(&mut self) -> Result<Vec<f64>> {
        let (_, tokens) = self.next()?;
        tokens.into_iter().map(unhex).collect()
    }
}

fn parse_usize(token: &str) -> Result<usize> {
    token.parse().map_err(|_| Error::Checkpoint(format!("bad integer {token:?}")))
}

pub fn load_checkpoint(path: &Path) -> Result<Ddpg> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Lines { inner: text.lines().enumerate() };
    let header = lines.expect(MAGIC)?;
    if header != [CHECKPOINT_VERSION.to_string()] {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {header:?}")));
    }
    let mut scalars = [0.0; 9];
    for (name, slot) in SCALARS.iter().zip(&mut scalars) {
        let tokens = lines.expect(name)?;
        *slot = unhex(tokens.first().ok_or_else(|| Error::Checkpoint(format!("{name} has no value")))?)?;
    }
    let hidden = lines.expect("hidden")?.into_iter().map(parse_usize).collect::<Result<Vec<_>>>()?;
    let [gamma, tau, actor_lr, critic_lr, noise_sigma, random_eps, action_bound, action_l2, norm_clip] = scalars;
    let config = AgentConfig {
        gamma,
        tau,
        actor_lr,
        critic_lr,
        noise_sigma,
        random_eps,
        hidden,
        action_bound,
        action_l2,
        norm_clip,
    };
    config.validate()?;

    let mut nets = Vec::with_capacity(4);
    for name in ["actor", "critic", "actor_target", "critic_target"] {
        let tokens = lines.expect("net")?;
        if tokens.len() < 4 || tokens[0] != name {
            return Err(Error::Checkpoint(format!("malformed header for network {name}")));
        }
        let activation = Activation::from_name(tokens[1])?;
        let sizes = tokens[2..].iter().map(|t| parse_usize(t)).collect::<Result<Vec<_>>>()?;
        let mut net = Mlp::zeros(&sizes, activation)?;
        net.set_flat_params(&lines.floats()?).map_err(|e| Error::Checkpoint(e.to_string()))?;
        nets.push(net);
    }
    let mut norms = Vec::with_capacity(2);
    for name in ["obs", "goal"] {
        let tokens = lines.expect("norm")?;
        if tokens.len() != 3 || tokens[0] != name {
            return Err(Error::Checkpoint(format!("malformed header for normalizer {name}")));
        }
        let count = tokens[1].parse().map_err(|_| Error::Checkpoint("bad normalizer count".into()))?;
        let clip = unhex(tokens[2])?;
        let mean = lines.floats()?;
        let m2 = lines.floats()?;
        norms.push(Normalizer::from_state(count, mean, m2, clip)?);
    }
    let nets: [Mlp; 4] = nets.try_into().expect("four networks parsed");
    let goal_norm = norms.pop().expect("two normalizers parsed");
    let obs_norm = norms.pop().expect("two normalizers parsed");
    Ddpg::from_parts(config, nets, obs_norm, goal_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let config = AgentConfig { gamma: 0.1 + 0.2, ..AgentConfig::default() };
        let mut agent = Ddpg::new(13, 3, 4, config, &mut rng).unwrap();
        for _ in 0..7 {
            agent.obs_norm.update(&[std::f64::consts::PI / 7.0; 13]).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.ckpt");
        save_checkpoint(&agent, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, agent);
    }

    #[test]
    fn version_and_truncation_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let agent = Ddpg::new(2, 2, 1, AgentConfig::default(), &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.ckpt");
        save_checkpoint(&agent, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replacen("ebp-agent 1", "ebp-agent 9", 1)).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));
        let cut: String = text.lines().take(14).collect::<Vec<_>>().join("\n");
        fs::write(&path, cut).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Checkpoint(_))));
    }
}
