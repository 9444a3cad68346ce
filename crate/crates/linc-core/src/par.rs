//! Data-parallel helpers with a sequential fallback.
//!
//! With the default `parallel` feature the helpers dispatch to rayon;
//! without it they run the same closures on a plain iterator. Callers pass
//! independent work items and derive any per-item RNG seeds themselves, so
//! results are identical in both modes.

#[cfg(feature = "parallel")]
pub fn par_map<I, O, F>(items: Vec<I>, f: F) -> Vec<O>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<I, O, F>(items: Vec<I>, f: F) -> Vec<O>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// Map `0..n` through `f`, in parallel when enabled.
pub fn par_map_indexed<O, F>(n: usize, f: F) -> Vec<O>
where
    O: Send,
    F: Fn(usize) -> O + Sync + Send,
{
    par_map((0..n).collect(), f)
}

/// Always-sequential variant, kept available for benchmarks comparing the
/// two execution modes within a single build.
pub fn seq_map<I, O, F>(items: Vec<I>, f: F) -> Vec<O>
where
    F: Fn(I) -> O,
{
    items.into_iter().map(f).collect()
}
