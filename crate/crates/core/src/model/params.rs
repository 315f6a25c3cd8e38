use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Temporal and feature-level attention in parallel.
    Dual,
    /// Temporal attention alone.
    TemporalOnly,
    /// Single-layer GRU read-out, the non-attention baseline.
    RecurrentBaseline,
}

impl Variant {
    pub const ALL: [Variant; 3] = [
        Variant::RecurrentBaseline,
        Variant::TemporalOnly,
        Variant::Dual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Dual => "dual",
            Variant::TemporalOnly => "temporal_only",
            Variant::RecurrentBaseline => "recurrent_baseline",
        }
    }

    pub fn has_temporal_attention(self) -> bool {
        matches!(self, Variant::Dual | Variant::TemporalOnly)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    #[default]
    None,
    /// Each class contributes half of the total loss weight.
    Balanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Width of the temporal query/key/value projections; also the GRU width.
    pub d_k: usize,
    /// Number of per-feature descriptors and width of the feature projections.
    pub d_f: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub variant: Variant,
    pub class_weighting: ClassWeighting,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            d_k: 16,
            d_f: 8,
            lr: 0.01,
            epochs: 300,
            seed: 0,
            variant: Variant::Dual,
            class_weighting: ClassWeighting::None,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate {} must be > 0", self.lr)));
        }
        if self.d_k == 0 || self.d_f == 0 {
            return Err(Error::InvalidConfig("projection widths must be positive".into()));
        }
        Ok(())
    }
}

/// One named parameter block inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

pub(crate) mod names {
    pub const T_Q: &str = "temporal.w_q";
    pub const T_K: &str = "temporal.w_k";
    pub const T_V: &str = "temporal.w_v";
    pub const F_Q: &str = "feature.w_q";
    pub const F_K: &str = "feature.w_k";
    pub const F_V: &str = "feature.w_v";
    pub const G_WZ: &str = "gru.w_z";
    pub const G_UZ: &str = "gru.u_z";
    pub const G_BZ: &str = "gru.b_z";
    pub const G_WR: &str = "gru.w_r";
    pub const G_UR: &str = "gru.u_r";
    pub const G_BR: &str = "gru.b_r";
    pub const G_WH: &str = "gru.w_h";
    pub const G_UH: &str = "gru.u_h";
    pub const G_BH: &str = "gru.b_h";
    pub const HEAD_W: &str = "head.w";
    pub const HEAD_B: &str = "head.b";
}

/// Parameters of one binary classifier, stored as a single flat vector so the
/// optimizer and the gradient checker can treat them uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub variant: Variant,
    pub n_features: usize,
    pub d_k: usize,
    pub d_f: usize,
    pub values: Vec<f64>,
}

pub fn layout(variant: Variant, v: usize, d_k: usize, d_f: usize) -> Vec<Block> {
    use names::*;
    let shapes: Vec<(&'static str, usize, usize)> = match variant {
        Variant::Dual => vec![
            (T_Q, v, d_k),
            (T_K, v, d_k),
            (T_V, v, d_k),
            (F_Q, d_f, d_f),
            (F_K, d_f, d_f),
            (F_V, d_f, d_f),
            (HEAD_W, 1, d_k + d_f),
            (HEAD_B, 1, 1),
        ],
        Variant::TemporalOnly => vec![
            (T_Q, v, d_k),
            (T_K, v, d_k),
            (T_V, v, d_k),
            (HEAD_W, 1, d_k),
            (HEAD_B, 1, 1),
        ],
        Variant::RecurrentBaseline => {
            let h = d_k;
            vec![
                (G_WZ, v, h),
                (G_UZ, h, h),
                (G_BZ, 1, h),
                (G_WR, v, h),
                (G_UR, h, h),
                (G_BR, 1, h),
                (G_WH, v, h),
                (G_UH, h, h),
                (G_BH, 1, h),
                (HEAD_W, 1, h),
                (HEAD_B, 1, 1),
            ]
        }
    };
    let mut offset = 0;
    shapes
        .into_iter()
        .map(|(name, rows, cols)| {
            let b = Block {
                name,
                rows,
                cols,
                offset,
            };
            offset += rows * cols;
            b
        })
        .collect()
}

impl ModelParams {
    pub fn zeros(variant: Variant, n_features: usize, d_k: usize, d_f: usize) -> Self {
        let n = layout(variant, n_features, d_k, d_f).iter().map(Block::len).sum();
        Self {
            variant,
            n_features,
            d_k,
            d_f,
            values: vec![0.0; n],
        }
    }

    /// Every parameter drawn from `U(-scale, scale)`.
    pub fn random<R: Rng>(
        variant: Variant,
        n_features: usize,
        d_k: usize,
        d_f: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(variant, n_features, d_k, d_f);
        for x in &mut p.values {
            *x = rng.random_range(-scale..scale);
        }
        p
    }

    pub fn from_values(
        variant: Variant,
        n_features: usize,
        d_k: usize,
        d_f: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let p = Self::zeros(variant, n_features, d_k, d_f);
        if p.values.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: p.values.len(),
                right: values.len(),
            });
        }
        Ok(Self { values, ..p })
    }

    pub fn layout(&self) -> Vec<Block> {
        layout(self.variant, self.n_features, self.d_k, self.d_f)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<Block> {
        self.layout().into_iter().find(|b| b.name == name)
    }

    pub fn slice(&self, name: &str) -> &[f64] {
        let b = self.find(name).unwrap_or_else(|| panic!("no block {name} in {}", self.variant));
        &self.values[b.range()]
    }

    pub fn matrix(&self, name: &str) -> Matrix {
        let b = self.find(name).unwrap_or_else(|| panic!("no block {name} in {}", self.variant));
        Matrix::new(b.rows, b.cols, self.values[b.range()].to_vec()).expect("block shape")
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}

/// Accumulates gradients block by block into a flat vector with the same layout.
pub(crate) struct GradBuffer {
    blocks: Vec<Block>,
    pub values: Vec<f64>,
}

impl GradBuffer {
    pub fn for_params(p: &ModelParams) -> Self {
        Self {
            blocks: p.layout(),
            values: vec![0.0; p.len()],
        }
    }

    pub fn set(&mut self, name: &str, data: &[f64]) {
        let b = self.blocks.iter().find(|b| b.name == name).expect("known block");
        debug_assert_eq!(b.len(), data.len());
        self.values[b.range()].copy_from_slice(data);
    }
}
