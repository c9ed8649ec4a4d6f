//! Shared fixtures for the criterion benches.

use ktram::bench::Dataset;
use ktram::device::preset_params;
use ktram::{Core, CoreConfig, Mode, NodeId, SpikeSet, Variant};

pub fn core_with_node(cols: u32, mode: Mode) -> (Core, NodeId) {
    let cfg = CoreConfig::new(1, cols, preset_params(Variant::W))
        .with_seed(1)
        .with_mode(mode);
    let mut core = Core::new(cfg).expect("valid bench core");
    let node = core.alloc_node(0..cols as usize).expect("fresh core");
    (core, node)
}

/// Every other non-bias address of a `cols`-wide node.
pub fn half_pattern(cols: u32) -> SpikeSet {
    SpikeSet::new((1..cols as usize).step_by(2)).with_bias(true)
}

/// Deterministic two-class binary dataset: class `k` lights features
/// congruent to `k` mod 2, with one feature per sample knocked out.
pub fn striped_dataset(dim: usize, n: usize) -> Dataset {
    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let mut x: Vec<f64> = (0..dim)
            .map(|f| f64::from(u8::from(f % 2 == class)))
            .collect();
        x[(i * 7) % dim] = 0.0;
        samples.push(x);
        labels.push(class.to_string());
    }
    Dataset::new(samples, Some(labels))
}
