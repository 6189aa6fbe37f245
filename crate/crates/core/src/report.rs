use serde::Serialize;

/// Multiply-accumulate counts for one layer: what a dense evaluation would
/// cost and what was actually computed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LayerMacs {
    pub name: String,
    pub dense_macs: u64,
    pub retained_macs: u64,
}

impl LayerMacs {
    pub fn new(name: impl Into<String>, dense_macs: u64, retained_macs: u64) -> Self {
        debug_assert!(retained_macs <= dense_macs);
        LayerMacs {
            name: name.into(),
            dense_macs,
            retained_macs,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub layers: Vec<LayerMacs>,
    pub average_depth: f64,
    pub wall_ms: f64,
}

impl EfficiencyReport {
    pub fn total_dense_macs(&self) -> u64 {
        self.layers.iter().map(|l| l.dense_macs).sum()
    }

    pub fn total_retained_macs(&self) -> u64 {
        self.layers.iter().map(|l| l.retained_macs).sum()
    }

    /// FLOPs are reported as two per multiply-accumulate.
    pub fn total_flops(&self) -> u64 {
        2 * self.total_retained_macs()
    }

    /// Sums over layers whose name starts with `prefix`.
    pub fn retained_with_prefix(&self, prefix: &str) -> u64 {
        self.layers
            .iter()
            .filter(|l| l.name.starts_with(prefix))
            .map(|l| l.retained_macs)
            .sum()
    }

    pub fn dense_with_prefix(&self, prefix: &str) -> u64 {
        self.layers
            .iter()
            .filter(|l| l.name.starts_with(prefix))
            .map(|l| l.dense_macs)
            .sum()
    }

    /// Retained MACs of the gated residual blocks (trailing convs excluded).
    pub fn block_retained_macs(&self) -> u64 {
        self.layers
            .iter()
            .filter(|l| is_block_layer(&l.name))
            .map(|l| l.retained_macs)
            .sum()
    }

    pub fn block_dense_macs(&self) -> u64 {
        self.layers
            .iter()
            .filter(|l| is_block_layer(&l.name))
            .map(|l| l.dense_macs)
            .sum()
    }
}

/// `body.g{g}.b{b}.*` names a layer inside a gated residual block.
pub fn is_block_layer(name: &str) -> bool {
    let mut parts = name.split('.');
    parts.next() == Some("body")
        && parts.next().is_some_and(|g| g.starts_with('g'))
        && parts.next().is_some_and(|b| b.starts_with('b') && b[1..].parse::<usize>().is_ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_filters() {
        let r = EfficiencyReport {
            layers: vec![
                LayerMacs::new("head", 10, 10),
                LayerMacs::new("body.g0.b0.conv1", 100, 40),
                LayerMacs::new("body.g0.b0.conv2", 100, 30),
                LayerMacs::new("body.g0.tail", 100, 100),
                LayerMacs::new("body.tail", 100, 100),
            ],
            average_depth: 1.0,
            wall_ms: 0.0,
        };
        assert_eq!(r.total_dense_macs(), 410);
        assert_eq!(r.total_retained_macs(), 280);
        assert_eq!(r.total_flops(), 560);
        assert_eq!(r.block_retained_macs(), 70);
        assert_eq!(r.block_dense_macs(), 200);
        assert_eq!(r.retained_with_prefix("body."), 270);
    }
}
