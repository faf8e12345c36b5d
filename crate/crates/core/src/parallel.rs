//! Data-parallel map over independent work items. Results always come back
//! in input order, so reductions are identical whichever path runs.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon pool, optionally capped at `threads` workers. Falls back to
    /// sequential when the crate is built without `parallel`.
    #[default]
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExecutionConfig {
    pub mode: Execution,
    pub threads: Option<usize>,
}

impl ExecutionConfig {
    pub fn sequential() -> Self {
        Self {
            mode: Execution::Sequential,
            threads: None,
        }
    }

    pub fn parallel(threads: Option<usize>) -> Self {
        Self {
            mode: Execution::Parallel,
            threads,
        }
    }
}

pub fn map<T, R, F>(cfg: ExecutionConfig, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    match cfg.mode {
        Execution::Sequential => items.into_iter().map(f).collect(),
        Execution::Parallel => parallel_map(cfg.threads, items, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, R, F>(threads: Option<usize>, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    let run = || items.into_par_iter().map(&f).collect();
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, R, F>(_threads: Option<usize>, items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v: Vec<u64> = (0..200).collect();
        let a = map(ExecutionConfig::sequential(), v.clone(), |x| x * x);
        let b = map(ExecutionConfig::parallel(Some(3)), v, |x| x * x);
        assert_eq!(a, b);
    }
}
