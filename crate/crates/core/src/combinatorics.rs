//! Non-crossing partitions and the moment/free-cumulant correspondence
//!
//! `m_k = Σ_{π ∈ NC(k)} Π_{B ∈ π} R_{|B|}`
//!
//! Partitions of `{1..n}` are enumerated once per `n` and cached as compact
//! label strings; moment/cumulant conversion only needs the multiset of block
//! sizes, which is tabulated with exact integer counts.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use crate::{Error, Result};

/// Largest ground set accepted by the enumerator (`Catalan(14) = 2 674 440`).
pub const NC_SIZE_CAP: usize = 14;

/// A partition of `{1..n}`. Blocks are sorted ascending and ordered by their
/// minimum element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    /// Validates and normalizes `blocks` as a partition of `{1..n}`.
    pub fn new(n: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n + 1];
        for block in &mut blocks {
            if block.is_empty() {
                return Err(Error::Parameter("empty block".into()));
            }
            block.sort_unstable();
            for &e in block.iter() {
                if e == 0 || e > n {
                    return Err(Error::Parameter(format!("element {e} outside 1..={n}")));
                }
                if seen[e] {
                    return Err(Error::Parameter(format!("element {e} appears twice")));
                }
                seen[e] = true;
            }
        }
        if let Some(missing) = (1..=n).find(|&e| !seen[e]) {
            return Err(Error::Parameter(format!("element {missing} not covered")));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { n, blocks })
    }

    fn from_labels(labels: &[u8]) -> Self {
        let count = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        let mut blocks = vec![Vec::new(); count];
        for (i, &l) in labels.iter().enumerate() {
            blocks[l as usize].push(i + 1);
        }
        Self {
            n: labels.len(),
            blocks,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }
}

/// False iff some `i₁ < j₁ < i₂ < j₂` has `i₁, i₂` in one block and `j₁, j₂`
/// in another.
pub fn is_noncrossing(p: &SetPartition) -> bool {
    let mut owner = vec![0usize; p.n + 1];
    for (k, block) in p.blocks.iter().enumerate() {
        for &e in block {
            owner[e] = k;
        }
    }
    for (r, block) in p.blocks.iter().enumerate() {
        for pair in block.windows(2) {
            let (i1, i2) = (pair[0], pair[1]);
            // A block that has an element strictly between i1 and i2 must not
            // have any element outside [i1, i2].
            for j1 in i1 + 1..i2 {
                let s = owner[j1];
                if s == r {
                    continue;
                }
                if p.blocks[s].iter().any(|&j| j < i1 || j > i2) {
                    return false;
                }
            }
        }
    }
    true
}

/// Exact Catalan number.
pub fn catalan(n: usize) -> u64 {
    let mut c: u64 = 1;
    for k in 0..n as u64 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    c
}

fn check_cap(n: usize) -> Result<()> {
    if n > NC_SIZE_CAP {
        return Err(Error::BoundedResource {
            requested: n,
            cap: NC_SIZE_CAP,
        });
    }
    Ok(())
}

/// Label strings of NC(n), concatenated (`n` bytes each); label `k` is the
/// `k`-th block in order of first element.
struct NcTable {
    n: usize,
    labels: Vec<u8>,
}

impl NcTable {
    fn len(&self) -> usize {
        if self.n == 0 {
            1
        } else {
            self.labels.len() / self.n
        }
    }

    fn iter(&self) -> impl Iterator<Item = &[u8]> {
        let n = self.n;
        (0..self.len()).map(move |k| &self.labels[k * n..(k + 1) * n])
    }
}

fn nc_table(n: usize) -> &'static NcTable {
    static TABLES: [OnceLock<NcTable>; NC_SIZE_CAP + 1] = [const { OnceLock::new() }; NC_SIZE_CAP + 1];
    TABLES[n].get_or_init(|| build_table(n))
}

/// The block of element 1 cuts the rest of the ground set into segments that
/// are partitioned independently; each segment size is looked up in the cache.
fn build_table(n: usize) -> NcTable {
    if n == 0 {
        return NcTable { n, labels: Vec::new() };
    }
    let mut labels = Vec::with_capacity(n * catalan(n) as usize);
    let rest = n - 1;
    let mut word = vec![0u8; n];
    for mask in 0u32..(1u32 << rest) {
        // Members of the first block other than element 1, as 0-based positions.
        let members: Vec<usize> = (0..rest).filter(|k| mask & (1 << k) != 0).map(|k| k + 1).collect();
        let mut segments = Vec::with_capacity(members.len() + 1);
        let mut start = 1;
        for &m in &members {
            segments.push((start, m - start));
            start = m + 1;
        }
        segments.push((start, n - start));
        word[0] = 0;
        for &m in &members {
            word[m] = 0;
        }
        fill_segments(&segments, 0, 1, &mut word, &mut labels);
    }
    NcTable { n, labels }
}

fn fill_segments(segments: &[(usize, usize)], idx: usize, next_label: u8, word: &mut [u8], out: &mut Vec<u8>) {
    if idx == segments.len() {
        out.extend_from_slice(&normalize_labels(word));
        return;
    }
    let (start, len) = segments[idx];
    if len == 0 {
        fill_segments(segments, idx + 1, next_label, word, out);
        return;
    }
    let table = nc_table(len);
    for sub in table.iter() {
        let mut used = 0u8;
        for (k, &l) in sub.iter().enumerate() {
            word[start + k] = next_label + l;
            used = used.max(l + 1);
        }
        fill_segments(segments, idx + 1, next_label + used, word, out);
    }
}

fn normalize_labels(word: &[u8]) -> Vec<u8> {
    let mut map = [u8::MAX; 256];
    let mut next = 0u8;
    word.iter()
        .map(|&l| {
            if map[l as usize] == u8::MAX {
                map[l as usize] = next;
                next += 1;
            }
            map[l as usize]
        })
        .collect()
}

/// Calls `f` on the label string of every non-crossing partition of `{1..n}`.
pub fn for_each_nc<F: FnMut(&[u8])>(n: usize, mut f: F) -> Result<()> {
    check_cap(n)?;
    for labels in nc_table(n).iter() {
        f(labels);
    }
    Ok(())
}

/// All non-crossing partitions of `{1..n}`, `1 ≤ n ≤ 14`.
pub fn enumerate_nc(n: usize) -> Result<Vec<SetPartition>> {
    if n == 0 {
        return Err(Error::Parameter("NC(n) requires n >= 1".into()));
    }
    check_cap(n)?;
    Ok(nc_table(n).iter().map(SetPartition::from_labels).collect())
}

/// Block-size multisets of NC(n) with exact multiplicities.
fn block_types(n: usize) -> &'static [(Vec<usize>, u64)] {
    static TYPES: [OnceLock<Vec<(Vec<usize>, u64)>>; NC_SIZE_CAP + 1] = [const { OnceLock::new() }; NC_SIZE_CAP + 1];
    TYPES[n].get_or_init(|| {
        let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for labels in nc_table(n).iter() {
            let mut sizes = vec![0usize; n];
            for &l in labels {
                sizes[l as usize] += 1;
            }
            sizes.retain(|&s| s > 0);
            sizes.sort_unstable_by(|a, b| b.cmp(a));
            *counts.entry(sizes).or_default() += 1;
        }
        counts.into_iter().collect()
    })
}

/// Moments `m₁..m_order`; `m₀ = 1` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSequence {
    m: Vec<f64>,
}

impl MomentSequence {
    pub fn new(m: Vec<f64>) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::Parameter("moment sequence must have order >= 1".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("moments must be finite".into()));
        }
        Ok(Self { m })
    }

    pub fn order(&self) -> usize {
        self.m.len()
    }

    /// `m_k`, with `m₀ = 1`.
    pub fn get(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.m[k - 1]
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.m
    }
}

/// Free cumulants `R₁..R_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantSequence {
    r: Vec<f64>,
}

impl CumulantSequence {
    pub fn new(r: Vec<f64>) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::Parameter("cumulant sequence must have order >= 1".into()));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("cumulants must be finite".into()));
        }
        Ok(Self { r })
    }

    pub fn order(&self) -> usize {
        self.r.len()
    }

    /// `R_n` for `n ≥ 1`.
    pub fn get(&self, n: usize) -> f64 {
        self.r[n - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.r
    }
}

/// `C_n = R_n(V⁻¹, V, …, V)` for `n = 1..order`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedInverseCumulants {
    c: Vec<f64>,
}

impl MixedInverseCumulants {
    pub fn order(&self) -> usize {
        self.c.len()
    }

    /// `C_n` for `n ≥ 1`.
    pub fn get(&self, n: usize) -> f64 {
        self.c[n - 1]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.c
    }
}

/// `m_k` for `k ≤ n` from the non-crossing sum over block products.
pub fn moments_from_cumulants(r: &CumulantSequence, n: usize) -> Result<MomentSequence> {
    check_cap(n)?;
    if n > r.order() {
        return Err(Error::LengthMismatch {
            needed: n,
            available: r.order(),
        });
    }
    let m = (1..=n)
        .map(|k| {
            block_types(k)
                .iter()
                .map(|(sizes, count)| *count as f64 * sizes.iter().map(|&s| r.get(s)).product::<f64>())
                .sum()
        })
        .collect();
    MomentSequence::new(m)
}

/// Inverts [`moments_from_cumulants`] by peeling off the one-block term:
/// `R_k = m_k − Σ_{π ≠ 1_k} Π R_{|B|}`.
pub fn cumulants_from_moments(m: &MomentSequence, n: usize) -> Result<CumulantSequence> {
    check_cap(n)?;
    if n > m.order() {
        return Err(Error::LengthMismatch {
            needed: n,
            available: m.order(),
        });
    }
    let mut r: Vec<f64> = Vec::with_capacity(n);
    for k in 1..=n {
        let lower: f64 = block_types(k)
            .iter()
            .filter(|(sizes, _)| sizes.len() > 1)
            .map(|(sizes, count)| *count as f64 * sizes.iter().map(|&s| r[s - 1]).product::<f64>())
            .sum();
        r.push(m.get(k) - lower);
    }
    CumulantSequence::new(r)
}

/// Argument slot of a word in `V⁻¹` and `V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    Inverse,
    Direct,
}

/// Joint moment functional for a single commuting variable: a word's value is
/// `φ(V^{#Direct − #Inverse})`, looked up through `power_moment`.
pub fn commutative_word_moment<F: Fn(i32) -> f64>(power_moment: F) -> impl Fn(&[Letter]) -> f64 {
    move |word: &[Letter]| {
        let power: i32 = word
            .iter()
            .map(|l| match l {
                Letter::Direct => 1,
                Letter::Inverse => -1,
            })
            .sum();
        power_moment(power)
    }
}

/// Brute-force `R_n(V⁻¹, V, …, V)` from the joint moment functional, by
/// solving the non-crossing moment formula recursively on every sub-word.
pub fn mixed_cumulant_oracle<J: Fn(&[Letter]) -> f64>(joint: J, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Parameter("cumulant order must be >= 1".into()));
    }
    check_cap(n)?;
    let mut word = vec![Letter::Direct; n];
    word[0] = Letter::Inverse;
    let mut memo: HashMap<Vec<Letter>, f64> = HashMap::new();
    word_cumulant(&joint, &word, &mut memo)
}

fn word_cumulant<J: Fn(&[Letter]) -> f64>(
    joint: &J,
    word: &[Letter],
    memo: &mut HashMap<Vec<Letter>, f64>,
) -> Result<f64> {
    if let Some(&v) = memo.get(word) {
        return Ok(v);
    }
    let k = word.len();
    let mut lower = 0.0;
    let mut partitions: Vec<Vec<u8>> = Vec::new();
    for_each_nc(k, |labels| {
        if labels.iter().any(|&l| l != 0) {
            partitions.push(labels.to_vec());
        }
    })?;
    for labels in partitions {
        let blocks = labels.iter().map(|&l| l as usize).max().unwrap_or(0) + 1;
        let mut product = 1.0;
        for b in 0..blocks {
            let sub: Vec<Letter> = word
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l as usize == b)
                .map(|(&w, _)| w)
                .collect();
            product *= word_cumulant(joint, &sub, memo)?;
        }
        lower += product;
    }
    let value = joint(word) - lower;
    memo.insert(word.to_vec(), value);
    Ok(value)
}

/// Coefficients of `C(z) = (z + C₁)/(1 + z r(z))`:
/// `C₂ = 1 − C₁R₁` and `C_n = −Σ_{i<n} C_i R_{n−i}` for `n ≥ 3`.
pub fn mixed_inverse_cumulants(c1: f64, r: &CumulantSequence, order: usize) -> Result<MixedInverseCumulants> {
    if order == 0 {
        return Err(Error::Parameter("order must be >= 1".into()));
    }
    if order > r.order() + 1 {
        return Err(Error::LengthMismatch {
            needed: order - 1,
            available: r.order(),
        });
    }
    let mut c = Vec::with_capacity(order);
    c.push(c1);
    for n in 2..=order {
        let conv: f64 = (1..n).map(|i| c[i - 1] * r.get(n - i)).sum();
        let unit = if n == 2 { 1.0 } else { 0.0 };
        c.push(unit - conv);
    }
    Ok(MixedInverseCumulants { c })
}

/// `β_n = Σ_{i=1}^{n+1} C_i Σ_{k₁+…+k_i = n+1−i} m_{k₁}⋯m_{k_i}` by explicit
/// enumeration of weak compositions.
pub fn bls_expand(mixed: &MixedInverseCumulants, m: &MomentSequence, n: usize) -> Result<f64> {
    if mixed.order() < n + 1 {
        return Err(Error::LengthMismatch {
            needed: n + 1,
            available: mixed.order(),
        });
    }
    if n > 0 && m.order() < n {
        return Err(Error::LengthMismatch {
            needed: n,
            available: m.order(),
        });
    }
    let mut total = 0.0;
    for i in 1..=n + 1 {
        total += mixed.get(i) * composition_sum(m, n + 1 - i, i);
    }
    Ok(total)
}

fn composition_sum(m: &MomentSequence, remaining: usize, parts: usize) -> f64 {
    if parts == 0 {
        return if remaining == 0 { 1.0 } else { 0.0 };
    }
    (0..=remaining)
        .map(|k| m.get(k) * composition_sum(m, remaining - k, parts - 1))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(n: usize, blocks: &[&[usize]]) -> SetPartition {
        SetPartition::new(n, blocks.iter().map(|b| b.to_vec()).collect()).unwrap()
    }

    #[test]
    fn crossing_examples() {
        assert!(!is_noncrossing(&part(4, &[&[1, 3], &[2, 4]])));
        assert!(is_noncrossing(&part(4, &[&[1, 4], &[2, 3]])));
        assert!(is_noncrossing(&part(3, &[&[1], &[2], &[3]])));
        assert!(!is_noncrossing(&part(5, &[&[1, 4], &[2, 5], &[3]])));
    }

    #[test]
    fn partition_validation() {
        assert!(SetPartition::new(3, vec![vec![1, 2]]).is_err());
        assert!(SetPartition::new(3, vec![vec![1, 2], vec![2, 3]]).is_err());
        assert!(SetPartition::new(2, vec![vec![1], vec![]]).is_err());
        let p = SetPartition::new(3, vec![vec![3, 2], vec![1]]).unwrap();
        assert_eq!(p.blocks(), &[vec![1], vec![2, 3]]);
    }

    #[test]
    fn small_enumerations() {
        let one = enumerate_nc(1).unwrap();
        assert_eq!(one, vec![part(1, &[&[1]])]);
        assert_eq!(enumerate_nc(3).unwrap().len(), 5);
        assert_eq!(enumerate_nc(4).unwrap().len(), 14);
        assert!(matches!(
            enumerate_nc(15),
            Err(Error::BoundedResource { requested: 15, cap: 14 })
        ));
    }

    #[test]
    fn enumeration_is_exactly_nc() {
        // Compare against brute force over all set partitions for n = 6.
        fn all_partitions(n: usize) -> Vec<Vec<u8>> {
            let mut out = vec![vec![0u8]];
            for _ in 1..n {
                let mut next = Vec::new();
                for w in &out {
                    let max = *w.iter().max().unwrap();
                    for l in 0..=max + 1 {
                        let mut v = w.clone();
                        v.push(l);
                        next.push(v);
                    }
                }
                out = next;
            }
            out
        }
        let n = 6;
        let mut brute: Vec<SetPartition> = all_partitions(n)
            .iter()
            .map(|l| SetPartition::from_labels(l))
            .filter(is_noncrossing)
            .collect();
        let mut enumerated = enumerate_nc(n).unwrap();
        brute.sort_by(|a, b| a.blocks.cmp(&b.blocks));
        enumerated.sort_by(|a, b| a.blocks.cmp(&b.blocks));
        assert_eq!(brute, enumerated);
    }

    #[test]
    fn catalan_values() {
        let expected = [1u64, 1, 2, 5, 14, 42, 132, 429, 1430, 4862, 16796, 58786, 208012];
        for (n, &c) in expected.iter().enumerate() {
            assert_eq!(catalan(n), c);
        }
        assert_eq!(catalan(14), 2_674_440);
    }

    #[test]
    fn semicircle_moments() {
        let r = CumulantSequence::new(vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let m = moments_from_cumulants(&r, 6).unwrap();
        assert_eq!(m.as_slice(), &[0.0, 1.0, 0.0, 2.0, 0.0, 5.0]);
    }

    #[test]
    fn free_poisson_unit_moments_are_catalan() {
        let r = CumulantSequence::new(vec![1.0; 5]).unwrap();
        let m = moments_from_cumulants(&r, 5).unwrap();
        assert_eq!(m.as_slice(), &[1.0, 2.0, 5.0, 14.0, 42.0]);
    }

    #[test]
    fn scaled_free_poisson_second_moment() {
        // R_n = γ^n λ with (λ, γ) = (2, 1): m₂ = R₂ + R₁² = 2 + 4.
        let r = CumulantSequence::new(vec![2.0, 2.0]).unwrap();
        let m = moments_from_cumulants(&r, 2).unwrap();
        assert_eq!(m.as_slice(), &[2.0, 6.0]);
    }

    #[test]
    fn cumulant_inversion_examples() {
        let m = MomentSequence::new(vec![1.0, 2.0, 5.0, 14.0]).unwrap();
        assert_eq!(cumulants_from_moments(&m, 4).unwrap().as_slice(), &[1.0; 4]);
        let m = MomentSequence::new(vec![0.0, 1.0, 0.0, 2.0]).unwrap();
        assert_eq!(cumulants_from_moments(&m, 4).unwrap().as_slice(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn length_errors() {
        let r = CumulantSequence::new(vec![1.0; 3]).unwrap();
        assert!(matches!(moments_from_cumulants(&r, 4), Err(Error::LengthMismatch { .. })));
        let long = CumulantSequence::new(vec![1.0; 16]).unwrap();
        assert!(matches!(moments_from_cumulants(&long, 15), Err(Error::BoundedResource { .. })));
    }

    #[test]
    fn oracle_low_orders() {
        let (m1, c1) = (2.5, 0.7);
        let joint = commutative_word_moment(|k| match k {
            -1 => c1,
            0 => 1.0,
            1 => m1,
            _ => unreachable!("order-2 words only reach powers -1..=1"),
        });
        assert_eq!(mixed_cumulant_oracle(&joint, 1).unwrap(), c1);
        let c2 = mixed_cumulant_oracle(&joint, 2).unwrap();
        assert!((c2 - (1.0 - c1 * m1)).abs() < 1e-15);
    }

    #[test]
    fn mixed_cumulants_zero_r() {
        let r = CumulantSequence::new(vec![0.0; 5]).unwrap();
        let c = mixed_inverse_cumulants(3.0, &r, 6).unwrap();
        assert_eq!(c.as_slice(), &[3.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn mixed_cumulants_second_coefficient() {
        let r = CumulantSequence::new(vec![3.0]).unwrap();
        let c = mixed_inverse_cumulants(2.0, &r, 2).unwrap();
        assert_eq!(c.get(2), -5.0);
        assert!(mixed_inverse_cumulants(2.0, &r, 3).is_err());
    }

    #[test]
    fn bls_low_orders() {
        let r = CumulantSequence::new(vec![1.0, 2.0, 3.0]).unwrap();
        let mixed = mixed_inverse_cumulants(0.4, &r, 4).unwrap();
        let m = MomentSequence::new(vec![1.5, 4.0, 9.0]).unwrap();
        assert_eq!(bls_expand(&mixed, &m, 0).unwrap(), mixed.get(1));
        let b1 = bls_expand(&mixed, &m, 1).unwrap();
        assert!((b1 - (mixed.get(1) * 1.5 + mixed.get(2))).abs() < 1e-15);
        assert!(bls_expand(&mixed, &m, 4).is_err());
    }
}
