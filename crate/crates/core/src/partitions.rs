//! Set partitions of finite index sets.
//!
//! Partitions are streamed in lexicographic order of their restricted-growth strings, which
//! is also the order of the canonical form (blocks sorted, blocks ordered by least element).

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{FromPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on the ground-set size accepted by the enumerators.
pub const DEFAULT_CAP: usize = 12;

/// A partition of a finite set of indices into disjoint nonempty blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct SetPartition {
    ground: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    /// Builds a partition from arbitrary blocks, bringing them to canonical form.
    pub fn new(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut ground: Vec<usize> = blocks.iter().flatten().copied().collect();
        if blocks.iter().any(Vec::is_empty) {
            return Err(Error::InvalidParameter(
                "partition blocks must be nonempty".into(),
            ));
        }
        ground.sort_unstable();
        if ground.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter(
                "partition blocks must be disjoint".into(),
            ));
        }
        Ok(Self { ground, blocks }.canonicalize())
    }

    /// The empty partition of the empty set.
    pub fn empty() -> Self {
        Self {
            ground: Vec::new(),
            blocks: Vec::new(),
        }
    }

    /// The partition of `ground` into singletons.
    pub fn singletons(ground: &[usize]) -> Result<Self> {
        let ground = index_set(ground)?;
        Ok(Self {
            blocks: ground.iter().map(|&i| vec![i]).collect(),
            ground,
        })
    }

    /// Sorts every block and orders blocks by their least element.
    pub fn canonicalize(mut self) -> Self {
        for b in &mut self.blocks {
            b.sort_unstable();
        }
        self.blocks.sort_unstable_by_key(|b| b[0]);
        self
    }

    pub fn ground(&self) -> &[usize] {
        &self.ground
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn is_pair_partition(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 2)
    }

    /// Whether every block of `self` lies inside some block of `coarser`.
    pub fn refines(&self, coarser: &SetPartition) -> bool {
        self.ground == coarser.ground
            && self.blocks.iter().all(|b| {
                coarser
                    .blocks
                    .iter()
                    .any(|c| b.iter().all(|i| c.contains(i)))
            })
    }

    /// `∏_B (-1)^{|B|-1} (|B|-1)!`.
    pub fn mu_star(&self) -> i64 {
        self.blocks
            .iter()
            .map(|b| {
                let f = factorial(b.len() - 1);
                if b.len() % 2 == 0 {
                    -f
                } else {
                    f
                }
            })
            .try_fold(1i64, i64::checked_mul)
            .expect("mu* overflows i64")
    }
}

impl fmt::Display for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{{")?;
            for (j, x) in b.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, "}}")?;
        }
        write!(f, "}}")
    }
}

impl TryFrom<Vec<Vec<usize>>> for SetPartition {
    type Error = Error;
    fn try_from(blocks: Vec<Vec<usize>>) -> Result<Self> {
        Self::new(blocks)
    }
}

impl From<SetPartition> for Vec<Vec<usize>> {
    fn from(p: SetPartition) -> Self {
        p.blocks
    }
}

pub fn mu_star(p: &SetPartition) -> i64 {
    p.mu_star()
}

fn factorial(k: usize) -> i64 {
    (1..=k as i64)
        .try_fold(1i64, i64::checked_mul)
        .expect("factorial overflows i64")
}

/// Sorts and checks an index set for duplicates.
fn index_set(k: &[usize]) -> Result<Vec<usize>> {
    let mut v = k.to_vec();
    v.sort_unstable();
    if v.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter(
            "index set has repeated elements".into(),
        ));
    }
    Ok(v)
}

fn checked_ground(k: &[usize], cap: usize) -> Result<Vec<usize>> {
    let v = index_set(k)?;
    if v.len() > cap {
        return Err(Error::SizeLimit {
            what: "index set",
            got: v.len(),
            cap,
        });
    }
    Ok(v)
}

/// Stream of every partition of an index set.
#[derive(Debug, Clone)]
pub struct Partitions {
    ground: Vec<usize>,
    rgs: Vec<usize>,
    // running maximum of rgs[..=i]
    max: Vec<usize>,
    done: bool,
}

impl Partitions {
    fn new(ground: Vec<usize>) -> Self {
        let n = ground.len();
        Self {
            ground,
            rgs: vec![0; n],
            max: vec![0; n],
            done: false,
        }
    }

    fn current(&self) -> SetPartition {
        let count = self.rgs.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); count];
        for (&i, &b) in self.ground.iter().zip(&self.rgs) {
            blocks[b].push(i);
        }
        SetPartition {
            ground: self.ground.clone(),
            blocks,
        }
    }

    fn advance(&mut self) {
        let n = self.rgs.len();
        for i in (1..n).rev() {
            if self.rgs[i] <= self.max[i - 1] {
                self.rgs[i] += 1;
                self.max[i] = self.max[i - 1].max(self.rgs[i]);
                for j in i + 1..n {
                    self.rgs[j] = 0;
                    self.max[j] = self.max[i];
                }
                return;
            }
        }
        self.done = true;
    }
}

impl Iterator for Partitions {
    type Item = SetPartition;
    fn next(&mut self) -> Option<SetPartition> {
        if self.done {
            return None;
        }
        let p = self.current();
        self.advance();
        Some(p)
    }
}

/// Every partition of `k`, each exactly once, in canonical order.
pub fn enumerate_partitions(k: &[usize]) -> Result<Partitions> {
    enumerate_partitions_capped(k, DEFAULT_CAP)
}

pub fn enumerate_partitions_capped(k: &[usize], cap: usize) -> Result<Partitions> {
    Ok(Partitions::new(checked_ground(k, cap)?))
}

/// Stream of the partitions whose blocks all have two elements, in lexicographic order of
/// their canonical block lists.
///
/// Digit `i` of the odometer picks the partner of the least element still unpaired after
/// `i` pairs have been formed.
#[derive(Debug, Clone)]
pub struct PairPartitions {
    ground: Vec<usize>,
    digits: Vec<usize>,
    done: bool,
}

impl PairPartitions {
    fn current(&self) -> SetPartition {
        let mut rest = self.ground.clone();
        let mut blocks = Vec::with_capacity(self.digits.len());
        for &d in &self.digits {
            let partner = rest.remove(1 + d);
            let first = rest.remove(0);
            blocks.push(vec![first, partner]);
        }
        SetPartition {
            ground: self.ground.clone(),
            blocks,
        }
    }

    fn advance(&mut self) {
        let m = self.digits.len();
        for i in (0..m).rev() {
            let radix = 2 * (m - i) - 1;
            if self.digits[i] + 1 < radix {
                self.digits[i] += 1;
                return;
            }
            self.digits[i] = 0;
        }
        self.done = true;
    }
}

impl Iterator for PairPartitions {
    type Item = SetPartition;
    fn next(&mut self) -> Option<SetPartition> {
        if self.done {
            return None;
        }
        let p = self.current();
        self.advance();
        Some(p)
    }
}

/// Every pair partition of `k`; empty when `|k|` is odd and a single empty partition for `k = ∅`.
pub fn enumerate_pair_partitions(k: &[usize]) -> Result<PairPartitions> {
    enumerate_pair_partitions_capped(k, DEFAULT_CAP)
}

pub fn enumerate_pair_partitions_capped(k: &[usize], cap: usize) -> Result<PairPartitions> {
    let ground = checked_ground(k, cap)?;
    let odd = ground.len() % 2 == 1;
    Ok(PairPartitions {
        digits: vec![0; ground.len() / 2],
        ground,
        done: odd,
    })
}

/// Bound on `|K|` for the sieve transforms, which touch every pair of comparable partitions.
pub const SIEVE_CAP: usize = 7;

/// Values attached to the partitions of an index set.
pub type PartitionWeights<T> = BTreeMap<SetPartition, T>;

/// Möbius function of the partition lattice between `finer` and a coarsening `coarser`:
/// `∏_{C ∈ coarser} (-1)^{k_C-1} (k_C-1)!` where `k_C` counts the blocks of `finer` inside `C`.
/// For `finer` the singletons this is `μ*(coarser)`.
pub fn lattice_mobius(finer: &SetPartition, coarser: &SetPartition) -> i64 {
    coarser
        .blocks
        .iter()
        .map(|c| {
            let k = finer.blocks.iter().filter(|b| c.contains(&b[0])).count();
            let f = factorial(k - 1);
            if k % 2 == 0 {
                -f
            } else {
                f
            }
        })
        .try_fold(1i64, i64::checked_mul)
        .expect("lattice Möbius value overflows i64")
}

/// Both directions of the sieve between distinct-index sums `R_G` and unrestricted sums
/// `C_G`, evaluated at every partition `π` of `K`:
///
/// * `unrestricted[π] = Σ_{G ≥ π} w(G)` (from distinct sums to unrestricted ones)
/// * `distinct[π] = Σ_{G ≥ π} μ(π, G) w(G)` (from unrestricted sums to distinct ones)
///
/// where `G ≥ π` ranges over the coarsenings of `π`. At the singleton partition these read
/// `C = Σ_G R_G` and `R = Σ_G μ*(G) C_G`. The two maps are inverse to each other.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveTransforms<T> {
    pub unrestricted: PartitionWeights<T>,
    pub distinct: PartitionWeights<T>,
}

pub fn sieve_transforms<T>(weights: &PartitionWeights<T>, k: &[usize]) -> Result<SieveTransforms<T>>
where
    T: Clone + Zero + FromPrimitive + std::ops::Mul<Output = T>,
{
    let ground = checked_ground(k, SIEVE_CAP)?;
    let all: Vec<SetPartition> = Partitions::new(ground).collect();
    let values = all
        .iter()
        .map(|p| {
            weights
                .get(p)
                .cloned()
                .ok_or_else(|| Error::IncompleteInput(format!("no weight for partition {p}")))
        })
        .collect::<Result<Vec<T>>>()?;
    let mut unrestricted = PartitionWeights::new();
    let mut distinct = PartitionWeights::new();
    for finer in &all {
        let mut plain = T::zero();
        let mut signed = T::zero();
        for (coarser, w) in all.iter().zip(&values) {
            if !finer.refines(coarser) {
                continue;
            }
            let mu =
                T::from_i64(lattice_mobius(finer, coarser)).expect("Möbius value representable");
            signed = signed + mu * w.clone();
            plain = plain + w.clone();
        }
        unrestricted.insert(finer.clone(), plain);
        distinct.insert(finer.clone(), signed);
    }
    Ok(SieveTransforms {
        unrestricted,
        distinct,
    })
}

/// Nonempty subsets of a sorted set, each returned sorted.
pub fn nonempty_subsets(ground: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let n = ground.len();
    assert!(n < usize::BITS as usize);
    (1usize..1 << n).map(move |mask| {
        (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ground[i])
            .collect()
    })
}
