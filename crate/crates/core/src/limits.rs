//! Resource ceilings checked before expensive constructions.

/// Environment variable overriding [`Limits::max_dim`].
pub const DIM_CAP_ENV: &str = "CQPOLAR_DIM_CAP";

/// Caps on synthesized channel sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Largest quantum dimension of a synthesized channel block.
    pub max_dim: usize,
    /// Largest number of classical blocks in a synthesized channel.
    pub max_blocks: usize,
    /// Largest number of complex entries stored in the factors of a
    /// synthesized channel (16 bytes each).
    pub max_entries: usize,
}

impl Default for Limits {
    /// Defaults, with the dimension cap taken from the environment when set.
    fn default() -> Self {
        let max_dim = std::env::var(DIM_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(4096);
        Self {
            max_dim,
            max_blocks: 1 << 21,
            max_entries: 1 << 27,
        }
    }
}
