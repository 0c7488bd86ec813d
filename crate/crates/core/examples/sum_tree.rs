//! Proportional sampling from a sum-tree and from a prioritized store.
//!
//! cargo run --release --example sum_tree

use ebp::per::{PerConfig, PrioritizedStore, SumTree};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> ebp::Result<()> {
    let priorities = [1.0, 0.0, 3.0, 0.5, 2.5];
    let mut tree = SumTree::new(priorities.len());
    for (leaf, &p) in priorities.iter().enumerate() {
        tree.update(leaf, p)?;
    }
    println!("total {}  capacity {}", tree.total(), tree.capacity());
    for prefix in [0.0, 0.99, 1.0, 3.9, 4.0, 6.9] {
        println!("prefix {prefix:>4} -> leaf {}", tree.sample(prefix)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let draws = 70_000;
    let mut counts = [0usize; 5];
    for _ in 0..draws {
        counts[tree.sample_with(&mut rng)?] += 1;
    }
    for (leaf, (&p, &c)) in priorities.iter().zip(&counts).enumerate() {
        println!("leaf {leaf}: expected {:.3}  observed {:.3}", p / tree.total(), c as f64 / draws as f64);
    }

    // priorities (|delta| + eps)^alpha; new items enter at the running maximum
    let mut store = PrioritizedStore::new(4, PerConfig::default())?;
    let slots: Vec<usize> = ["a", "b", "c", "d"].into_iter().map(|item| store.insert(item)).collect();
    store.update_priorities(&slots, &[0.0, 0.1, 1.0, 10.0])?;
    for &slot in &slots {
        println!("{} priority {:.4}", store.get(slot).unwrap(), store.priority(slot)?);
    }
    let evicted = store.insert("e");
    println!("'e' replaced slot {evicted} at priority {:.4}", store.priority(evicted)?);
    Ok(())
}
