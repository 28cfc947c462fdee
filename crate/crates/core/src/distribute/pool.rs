use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use crate::coordinates::{coordinate, Coordinate, CoordinateConfig};
use crate::model::{ModelError, Scenario, StochasticProgram};

/// Coordinates for every scenario, in input order, using `threads` workers
/// pulling from a shared counter. The result does not depend on `threads`.
pub fn run_parallel_coordinates(
    program: &StochasticProgram,
    scenarios: &[Scenario],
    cfg: &CoordinateConfig,
    threads: usize,
) -> Result<Vec<Coordinate>, ModelError> {
    if scenarios.is_empty() {
        return Ok(Vec::new());
    }
    let prepared = cfg.prepare(program, scenarios)?;
    let threads = threads.clamp(1, scenarios.len());
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<Coordinate>> = vec![None; scenarios.len()];
    thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= scenarios.len() {
                            break done;
                        }
                        done.push((i, coordinate(&prepared, &scenarios[i], cfg)));
                    }
                })
            })
            .collect();
        for h in handles {
            for (i, c) in h.join().expect("coordinate worker panicked") {
                slots[i] = Some(c);
            }
        }
    });
    Ok(slots.into_iter().map(|c| c.expect("every index is claimed once")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordinates::to_csv;
    use crate::model::{builtin_example1, enumerate_scenarios, ENUMERATION_CAP};

    #[test]
    fn thread_count_does_not_matter() {
        let (p, d) = builtin_example1();
        let s = enumerate_scenarios(&p, &d, ENUMERATION_CAP).unwrap();
        let s = &s[..20];
        let cfg = CoordinateConfig::default();
        let one = run_parallel_coordinates(&p, s, &cfg, 1).unwrap();
        let many = run_parallel_coordinates(&p, s, &cfg, 8).unwrap();
        assert_eq!(to_csv(&one), to_csv(&many));
        assert!(run_parallel_coordinates(&p, &[], &cfg, 4).unwrap().is_empty());
    }
}
