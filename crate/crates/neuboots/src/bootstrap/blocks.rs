//! Stratified block assignment and block-to-sample weight expansion.

use rand::Rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::alpha::BootstrapAlpha;
use crate::{Error, Result};

/// A partition of sample indices `[0, n)` into `S` blocks.
///
/// Invariants (checked in `debug` builds and by tests): blocks are exclusive
/// and exhaustive, every block is nonempty when `n >= S`, and for
/// classification the per-class counts of any two blocks differ by at most 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAssignment {
    u: Vec<usize>,
    num_blocks: usize,
    block_sizes: Vec<usize>,
}

impl BlockAssignment {
    /// Block index of each sample.
    pub fn u(&self) -> &[usize] {
        &self.u
    }

    /// Block of sample `i`.
    #[inline]
    pub fn block_of(&self, i: usize) -> usize {
        self.u[i]
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Partition `n` sample indices into `s` blocks.
///
/// With `labels`, samples are dealt class by class: each class's indices are
/// shuffled and then dealt to consecutive positions of one shuffled block
/// order, so per-class block counts differ by at most 1 and leftover samples
/// land on blocks in shuffled order. Without labels (regression) the same
/// dealing runs over all indices at once.
pub fn assign_blocks<R: Rng + ?Sized>(
    labels: Option<&[usize]>,
    n: usize,
    s: usize,
    rng: &mut R,
) -> Result<BlockAssignment> {
    if s == 0 {
        return Err(Error::InvalidConfig("need at least one block".into()));
    }
    if s > n {
        return Err(Error::InvalidConfig(format!(
            "{s} blocks over {n} samples would leave empty blocks"
        )));
    }
    if let Some(l) = labels {
        if l.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} samples",
                l.len(),
                n
            )));
        }
    }

    let mut block_order: Vec<usize> = (0..s).collect();
    block_order.shuffle(rng);

    // Group indices by class (one group when unlabeled), shuffle within each.
    let groups: Vec<Vec<usize>> = match labels {
        None => {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(rng);
            vec![all]
        }
        Some(labels) => {
            let classes = labels.iter().copied().max().unwrap_or(0) + 1;
            let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
            for (i, &c) in labels.iter().enumerate() {
                by_class[c].push(i);
            }
            for g in &mut by_class {
                g.shuffle(rng);
            }
            by_class
        }
    };

    // Deal every group onto consecutive circular positions of the shuffled
    // block order. Dealing never skips a position, so the first `s`
    // assignments hit `s` distinct blocks and no block stays empty; within a
    // group the positions form a circular window, so per-class counts differ
    // by at most 1 across blocks.
    let mut u = vec![0usize; n];
    let mut block_sizes = vec![0usize; s];
    let mut pos = 0usize;
    for group in &groups {
        for &i in group {
            let b = block_order[pos % s];
            u[i] = b;
            block_sizes[b] += 1;
            pos += 1;
        }
    }
    debug_assert_eq!(pos, n);
    debug_assert!(block_sizes.iter().all(|&c| c > 0));

    Ok(BlockAssignment {
        u,
        num_blocks: s,
        block_sizes,
    })
}

/// Expand block weights to per-sample weights: `w_i = alpha[u(i)]`, exactly.
pub fn expand_weights(alpha: &BootstrapAlpha, assignment: &BlockAssignment) -> Result<Vec<f64>> {
    if alpha.len() != assignment.num_blocks() {
        return Err(Error::DimensionMismatch(format!(
            "alpha of length {} for {} blocks",
            alpha.len(),
            assignment.num_blocks()
        )));
    }
    let values = alpha.values();
    Ok(assignment.u().iter().map(|&b| values[b]).collect())
}
