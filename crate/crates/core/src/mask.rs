use std::fmt;

use bitvec::prelude::*;

/// Selection vector over the `N` data points; bit `i` set means point `i`
/// belongs to the subset.
///
/// When a mask is packed into an integer index (truth tables, spectra),
/// bit `i` of the index corresponds to point `i`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SubsetMask {
    bits: BitVec<u64, Lsb0>,
}

impl SubsetMask {
    pub fn empty(n: usize) -> Self {
        Self {
            bits: bitvec![u64, Lsb0; 0; n],
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            bits: bitvec![u64, Lsb0; 1; n],
        }
    }

    /// Builds a mask from point indices. Indices `>= n` are a usage error.
    pub fn from_indices<I>(n: usize, indices: I) -> crate::Result<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut mask = Self::empty(n);
        for i in indices {
            if i >= n {
                return Err(crate::Error::usage(format!(
                    "point index {i} out of range for N = {n}"
                )));
            }
            mask.bits.set(i, true);
        }
        Ok(mask)
    }

    /// Unpacks a lattice index (bit `i` of `index` is point `i`).
    pub fn from_index(index: u64, n: usize) -> Self {
        debug_assert!(n <= 64);
        let mut mask = Self::empty(n);
        for i in 0..n {
            if index >> i & 1 == 1 {
                mask.bits.set(i, true);
            }
        }
        mask
    }

    /// Packs the mask into a lattice index; `None` when `N > 64`.
    pub fn to_index(&self) -> Option<u64> {
        if self.len() > 64 {
            return None;
        }
        Some(self.ones().fold(0u64, |acc, i| acc | 1 << i))
    }

    /// Population size `N`.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// `|C_z|`.
    pub fn count(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits.set(i, value);
    }

    pub fn flip_in_place(&mut self, i: usize) {
        let v = self.bits[i];
        self.bits.set(i, !v);
    }

    /// `z ⊕ e_i`.
    pub fn flip(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.flip_in_place(i);
        out
    }

    /// Indices of the selected points, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter_ones()
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.len() == other.len() && self.ones().all(|i| other.contains(i))
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SubsetMask(")?;
        for b in self.bits.iter() {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn index_layout_bit_zero_is_first_point() {
        let m = SubsetMask::from_index(0b101, 3);
        assert!(m.contains(0));
        assert!(!m.contains(1));
        assert!(m.contains(2));
        assert_eq!(m.to_index(), Some(0b101));
        assert_eq!(format!("{m:?}"), "SubsetMask(101)");
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        assert!(SubsetMask::from_indices(3, [0, 3]).is_err());
    }

    proptest! {
        #[test]
        fn flip_is_an_involution(index in 0u64..(1 << 12), i in 0usize..12) {
            let z = SubsetMask::from_index(index, 12);
            prop_assert_eq!(z.flip(i).flip(i), z.clone());
            let delta = if z.contains(i) { -1i64 } else { 1 };
            prop_assert_eq!(z.flip(i).count() as i64, z.count() as i64 + delta);
        }

        #[test]
        fn popcount_matches_index(index in 0u64..(1 << 20)) {
            let z = SubsetMask::from_index(index, 20);
            prop_assert_eq!(z.count() as u32, index.count_ones());
            prop_assert_eq!(z.to_index(), Some(index));
        }
    }
}
