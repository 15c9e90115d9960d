//! Enumeration of integer partitions in multiplicity form.
//!
//! A partition of `k` is stored as the vector `(b_1, …, b_k)` where `b_j`
//! counts the parts of size `j`, so that `Σ_j j·b_j = k`. This is the index
//! set of the Faà di Bruno expansion used by the Laplace-transform
//! derivatives.

use std::sync::OnceLock;

/// Largest supported `k`; derivative orders beyond 15 would require more than
/// 16 receive antennas, outside the supported regime.
pub const MAX_PARTITION_K: usize = 15;

/// All multiplicity vectors `(b_1, …, b_k)` with `Σ j·b_j = k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSet {
    pub k: usize,
    /// Each element has length `k`; for `k = 0` there is a single empty
    /// element so that the zeroth-order derivative term equals 1.
    pub elements: Vec<Vec<u32>>,
}

impl PartitionSet {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

fn enumerate(k: usize) -> PartitionSet {
    let mut elements = Vec::new();
    let mut current = vec![0u32; k];
    // Fix multiplicities from the largest part downward.
    fn rec(j: usize, remaining: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if j == 0 {
            if remaining == 0 {
                out.push(current.clone());
            }
            return;
        }
        for b in 0..=(remaining / j) {
            current[j - 1] = b as u32;
            rec(j - 1, remaining - j * b, current, out);
        }
        current[j - 1] = 0;
    }
    if k == 0 {
        elements.push(Vec::new());
    } else {
        rec(k, k, &mut current, &mut elements);
    }
    PartitionSet { k, elements }
}

/// Enumerates the partitions of `k` in multiplicity form.
///
/// Panics for `k > 15`; antenna counts are validated well below that.
pub fn partitions(k: usize) -> PartitionSet {
    partitions_cached(k).clone()
}

/// Cached access for the hot evaluation paths.
pub(crate) fn partitions_cached(k: usize) -> &'static PartitionSet {
    assert!(
        k <= MAX_PARTITION_K,
        "partition order {k} exceeds the supported maximum {MAX_PARTITION_K}"
    );
    static CACHE: OnceLock<Vec<PartitionSet>> = OnceLock::new();
    let all = CACHE.get_or_init(|| (0..=MAX_PARTITION_K).map(enumerate).collect());
    &all[k]
}
