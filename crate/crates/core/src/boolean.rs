//! Exact Boolean-function machinery: truth tables, the Walsh–Hadamard
//! transform and its inverse, the 2-input gate catalog and nearest-table
//! projection.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest supported LUT arity (an FPGA LUT-6).
pub const MAX_ARITY: usize = 6;

fn check_arity(arity: usize) -> Result<()> {
    if (1..=MAX_ARITY).contains(&arity) {
        Ok(())
    } else {
        Err(Error::Arity(arity))
    }
}

/// Value of input `input` at corner `corner` of an `arity`-input table.
#[inline]
pub fn corner_bit(corner: usize, input: usize, arity: usize) -> bool {
    (corner >> (arity - 1 - input)) & 1 == 1
}

/// Corner index for a slice of input bits (input 0 most significant).
#[inline]
pub fn corner_index(bits: impl IntoIterator<Item = bool>) -> usize {
    bits.into_iter().fold(0, |acc, b| (acc << 1) | b as usize)
}

/// An exact `n`-input Boolean function.
///
/// Entry `k` is stored as bit `k` of a 64-bit word, so a table of arity six
/// fills the word exactly. The string form lists entries in corner order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TruthTable {
    arity: u8,
    bits: u64,
}

impl TruthTable {
    pub fn from_bits(arity: usize, bits: u64) -> Result<Self> {
        check_arity(arity)?;
        let size = 1usize << arity;
        let mask = if size == 64 { u64::MAX } else { (1u64 << size) - 1 };
        if bits & !mask != 0 {
            return Err(Error::Length {
                expected: size,
                actual: 64 - bits.leading_zeros() as usize,
            });
        }
        Ok(Self {
            arity: arity as u8,
            bits,
        })
    }

    pub fn from_fn(arity: usize, f: impl Fn(usize) -> bool) -> Result<Self> {
        check_arity(arity)?;
        let bits = (0..1usize << arity)
            .filter(|&k| f(k))
            .fold(0u64, |acc, k| acc | 1 << k);
        Ok(Self {
            arity: arity as u8,
            bits,
        })
    }

    pub fn from_bools(values: &[bool]) -> Result<Self> {
        let arity = values.len().trailing_zeros() as usize;
        if !values.len().is_power_of_two() {
            return Err(Error::Parse(alloc::format!(
                "length {} is not a power of two",
                values.len()
            )));
        }
        Self::from_fn(arity, |k| values[k])
    }

    pub fn arity(&self) -> usize {
        self.arity as usize
    }

    /// Number of entries, `2^arity`.
    pub fn len(&self) -> usize {
        1 << self.arity
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Packed entries: bit `k` is the output at corner `k`.
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn get(&self, corner: usize) -> bool {
        (self.bits >> corner) & 1 == 1
    }

    /// Evaluates the table on explicit input bits.
    pub fn eval(&self, inputs: &[bool]) -> bool {
        debug_assert_eq!(inputs.len(), self.arity());
        self.get(corner_index(inputs.iter().copied()))
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(move |k| self.get(k))
    }
}

impl fmt::Display for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl core::str::FromStr for TruthTable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(alloc::format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() < 2 {
            return Err(Error::Parse(String::from(s)));
        }
        Self::from_bools(&values)
    }
}

impl Serialize for TruthTable {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TruthTable {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let s = <String as Deserialize>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Walsh–Hadamard coefficients of one LUT node, in subset-index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WalshCoeffs {
    values: Vec<f64>,
}

impl WalshCoeffs {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if !values.len().is_power_of_two() || values.len() < 2 {
            return Err(Error::Length {
                expected: values.len().next_power_of_two().max(2),
                actual: values.len(),
            });
        }
        check_arity(values.len().trailing_zeros() as usize)?;
        Ok(Self { values })
    }

    pub fn zeros(arity: usize) -> Result<Self> {
        check_arity(arity)?;
        Ok(Self {
            values: vec![0.0; 1 << arity],
        })
    }

    pub fn arity(&self) -> usize {
        self.values.len().trailing_zeros() as usize
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

impl TryFrom<Vec<f64>> for WalshCoeffs {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<WalshCoeffs> for Vec<f64> {
    fn from(c: WalshCoeffs) -> Self {
        c.values
    }
}

/// The ±1 truth vector: `+1` where the table is true, `-1` elsewhere.
pub fn signed_truth_vector(tt: &TruthTable) -> Vec<f64> {
    tt.iter().map(|b| if b { 1.0 } else { -1.0 }).collect()
}

/// `∏_{i∈S} B(x_i)` for subset `subset` at corner `corner`, with `B(0) = -1`.
pub fn character_value(subset: usize, corner: usize, arity: usize) -> f64 {
    let negatives = (0..arity)
        .filter(|&i| (subset >> i) & 1 == 1 && !corner_bit(corner, i, arity))
        .count();
    if negatives % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Reverses the low `arity` bits, converting between corner order and the
/// "bit j is input j" order used by the butterflies.
#[inline]
fn reverse_low_bits(k: usize, arity: usize) -> usize {
    k.reverse_bits() >> (usize::BITS as usize - arity)
}

/// Exact Walsh–Hadamard coefficients of `tt`.
///
/// Computed with an in-place butterfly; every intermediate is an integer so
/// the final division by `2^n` is exact in binary floating point.
pub fn walsh_transform(tt: &TruthTable) -> WalshCoeffs {
    let n = tt.arity();
    let size = tt.len();
    let mut v = vec![0.0; size];
    for k in 0..size {
        v[reverse_low_bits(k, n)] = if tt.get(k) { 1.0 } else { -1.0 };
    }
    for j in 0..n {
        let bit = 1 << j;
        for m in 0..size {
            if m & bit == 0 {
                let (lo, hi) = (v[m], v[m | bit]);
                v[m] = lo + hi;
                v[m | bit] = hi - lo;
            }
        }
    }
    let scale = 1.0 / size as f64;
    for x in &mut v {
        *x *= scale;
    }
    WalshCoeffs { values: v }
}

/// Logits `l(x)` at every corner, returned in corner order.
pub fn corner_logits(coeffs: &[f64]) -> Vec<f64> {
    let size = coeffs.len();
    let n = size.trailing_zeros() as usize;
    let mut v = coeffs.to_vec();
    for j in 0..n {
        let bit = 1 << j;
        for t in 0..size {
            if t & bit == 0 {
                let (without, with) = (v[t], v[t | bit]);
                v[t] = without - with;
                v[t | bit] = without + with;
            }
        }
    }
    (0..size).map(|k| v[reverse_low_bits(k, n)]).collect()
}

/// `l(x) = Σ_S c_S ∏_{i∈S} B(x_i)` at a single Boolean corner.
pub fn corner_logit(coeffs: &WalshCoeffs, corner: usize) -> f64 {
    let n = coeffs.arity();
    coeffs
        .values
        .iter()
        .enumerate()
        .map(|(s, c)| c * character_value(s, corner, n))
        .sum()
}

/// Projects any real coefficient vector to its closest truth table:
/// `bits[k] = l(corner k) >= 0`.
pub fn nearest_truth_table(coeffs: &WalshCoeffs) -> TruthTable {
    nearest_table_from_slice(&coeffs.values)
}

pub(crate) fn nearest_table_from_slice(coeffs: &[f64]) -> TruthTable {
    let logits = corner_logits(coeffs);
    let bits = logits
        .iter()
        .enumerate()
        .filter(|(_, &l)| l >= 0.0)
        .fold(0u64, |acc, (k, _)| acc | 1 << k);
    TruthTable {
        arity: coeffs.len().trailing_zeros() as u8,
        bits,
    }
}

/// Identifier of one of the 16 two-input gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GateId(pub u8);

impl GateId {
    pub const CONST0: Self = Self(0);
    pub const CONST1: Self = Self(1);
    pub const AND: Self = Self(2);
    pub const OR: Self = Self(3);
    pub const XOR: Self = Self(4);
    pub const XNOR: Self = Self(5);
    pub const NAND: Self = Self(6);
    pub const NOR: Self = Self(7);
    pub const A_AND_NOT_B: Self = Self(8);
    pub const NOT_A_AND_B: Self = Self(9);
    pub const ID_A: Self = Self(10);
    pub const NOT_A: Self = Self(11);
    pub const ID_B: Self = Self(12);
    pub const NOT_B: Self = Self(13);
    pub const IMP_A_B: Self = Self(14);
    pub const IMP_B_A: Self = Self(15);

    pub fn new(id: usize) -> Result<Self> {
        if id < 16 {
            Ok(Self(id as u8))
        } else {
            Err(Error::GateId(id))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn entry(self) -> &'static GateCatalogEntry {
        &CATALOG[self.index()]
    }

    pub fn table(self) -> TruthTable {
        self.entry().table()
    }
}

/// One row of the 2-input gate catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct GateCatalogEntry {
    pub id: GateId,
    /// Identifier-safe mnemonic used by the text netlist format.
    pub name: &'static str,
    pub formula: &'static str,
    table_bits: u64,
    /// Coefficients times two; every catalog coefficient is a half-integer.
    twice_coeffs: [i8; 4],
}

impl GateCatalogEntry {
    pub fn table(&self) -> TruthTable {
        TruthTable {
            arity: 2,
            bits: self.table_bits,
        }
    }

    pub fn coeffs(&self) -> WalshCoeffs {
        WalshCoeffs {
            values: self.twice_coeffs.iter().map(|&c| c as f64 / 2.0).collect(),
        }
    }
}

// Table strings read corners 00, 01, 10, 11 left to right; `bits` stores
// corner k at bit k, hence the reversed binary literals.
const fn entry(
    id: u8,
    name: &'static str,
    formula: &'static str,
    table_bits: u64,
    twice_coeffs: [i8; 4],
) -> GateCatalogEntry {
    GateCatalogEntry {
        id: GateId(id),
        name,
        formula,
        table_bits,
        twice_coeffs,
    }
}

static CATALOG: [GateCatalogEntry; 16] = [
    entry(0, "CONST0", "0", 0b0000, [-2, 0, 0, 0]),
    entry(1, "CONST1", "1", 0b1111, [2, 0, 0, 0]),
    entry(2, "AND", "a & b", 0b1000, [-1, 1, 1, 1]),
    entry(3, "OR", "a | b", 0b1110, [1, 1, 1, -1]),
    entry(4, "XOR", "a ^ b", 0b0110, [0, 0, 0, -2]),
    entry(5, "XNOR", "!(a ^ b)", 0b1001, [0, 0, 0, 2]),
    entry(6, "NAND", "!(a & b)", 0b0111, [1, -1, -1, -1]),
    entry(7, "NOR", "!(a | b)", 0b0001, [-1, -1, -1, 1]),
    entry(8, "A_AND_NOT_B", "a & !b", 0b0100, [-1, 1, -1, -1]),
    entry(9, "NOT_A_AND_B", "!a & b", 0b0010, [-1, -1, 1, -1]),
    entry(10, "ID_A", "a", 0b1100, [0, 2, 0, 0]),
    entry(11, "NOT_A", "!a", 0b0011, [0, -2, 0, 0]),
    entry(12, "ID_B", "b", 0b1010, [0, 0, 2, 0]),
    entry(13, "NOT_B", "!b", 0b0101, [0, 0, -2, 0]),
    entry(14, "IMP_A_B", "!a | b", 0b1011, [1, -1, 1, 1]),
    entry(15, "IMP_B_A", "!b | a", 0b1101, [1, 1, -1, 1]),
];

/// The 16 two-input Boolean functions with their exact coefficients.
pub fn gate_catalog() -> &'static [GateCatalogEntry; 16] {
    &CATALOG
}

/// Catalog id of a 2-input table.
pub fn classify_gate(tt: &TruthTable) -> Result<GateId> {
    if tt.arity() != 2 {
        return Err(Error::Arity(tt.arity()));
    }
    Ok(GATE_BY_BITS[tt.bits as usize])
}

const GATE_BY_BITS: [GateId; 16] = {
    let mut out = [GateId(0); 16];
    let mut i = 0;
    while i < 16 {
        out[CATALOG_BITS[i] as usize] = GateId(i as u8);
        i += 1;
    }
    out
};

const CATALOG_BITS: [u64; 16] = [
    0b0000, 0b1111, 0b1000, 0b1110, 0b0110, 0b1001, 0b0111, 0b0001, 0b0100, 0b0010, 0b1100, 0b0011,
    0b1010, 0b0101, 0b1011, 0b1101,
];

#[cfg(test)]
mod tests {
    use super::*;

    fn tt(s: &str) -> TruthTable {
        s.parse().unwrap()
    }

    /// Literal definition of the transform, used as the oracle for the
    /// butterfly implementation.
    fn naive_transform(tt: &TruthTable) -> Vec<f64> {
        let n = tt.arity();
        let f = signed_truth_vector(tt);
        (0..tt.len())
            .map(|s| {
                (0..tt.len())
                    .map(|k| f[k] * character_value(s, k, n))
                    .sum::<f64>()
                    / tt.len() as f64
            })
            .collect()
    }

    #[test]
    fn string_form_uses_corner_order() {
        let id_a = tt("0011");
        assert!(!id_a.get(0) && !id_a.get(1) && id_a.get(2) && id_a.get(3));
        assert_eq!(id_a.to_string(), "0011");
        assert!(id_a.eval(&[true, false]));
        assert!("0x1".parse::<TruthTable>().is_err());
        assert!("011".parse::<TruthTable>().is_err());
    }

    #[test]
    fn signed_vectors() {
        assert_eq!(signed_truth_vector(&tt("0001")), [-1.0, -1.0, -1.0, 1.0]);
        assert_eq!(signed_truth_vector(&tt("0000")), [-1.0; 4]);
        assert_eq!(signed_truth_vector(&tt("0110")), [-1.0, 1.0, 1.0, -1.0]);
    }

    #[test]
    fn characters() {
        // corner (a=1, b=0) is index 0b10
        assert_eq!(character_value(0, 0b10, 2), 1.0);
        assert_eq!(character_value(0b01, 0b10, 2), 1.0);
        assert_eq!(character_value(0b11, 0b10, 2), -1.0);
        assert_eq!(character_value(0, 3, 2), 1.0);
    }

    #[test]
    fn transform_examples() {
        assert_eq!(walsh_transform(&tt("0110")).values(), [0.0, 0.0, 0.0, -1.0]);
        assert_eq!(walsh_transform(&tt("0001")).values(), [-0.5, 0.5, 0.5, 0.5]);
        assert_eq!(walsh_transform(&tt("1111")).values(), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn butterfly_matches_definition() {
        for n in 1..=4 {
            for bits in 0..(1u64 << (1 << n)).min(4096) {
                let t = TruthTable::from_bits(n, bits).unwrap();
                assert_eq!(walsh_transform(&t).values(), naive_transform(&t).as_slice());
            }
        }
    }

    #[test]
    fn corner_logit_examples() {
        let xor = WalshCoeffs::new(vec![0.0, 0.0, 0.0, -1.0]).unwrap();
        assert_eq!(corner_logit(&xor, 3), -1.0);
        let and = GateId::AND.entry().coeffs();
        assert_eq!(corner_logit(&and, 3), 1.0);
        let c0 = GateId::CONST0.entry().coeffs();
        for k in 0..4 {
            assert_eq!(corner_logit(&c0, k), -1.0);
        }
    }

    #[test]
    fn fast_corner_logits_match_single_corner() {
        let c = WalshCoeffs::new(vec![0.3, -1.2, 0.7, 0.05, 2.0, -0.4, 0.9, -0.1]).unwrap();
        let fast = corner_logits(c.values());
        for (k, l) in fast.iter().enumerate() {
            assert!((l - corner_logit(&c, k)).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_examples() {
        let xor = WalshCoeffs::new(vec![0.0, 0.0, 0.0, -1.0]).unwrap();
        assert_eq!(nearest_truth_table(&xor).to_string(), "0110");
        // l at (00,01,10,11) = -0.45, -0.35, 1.05, 0.85
        let c = WalshCoeffs::new(vec![0.2, 0.7, -0.1, 0.05]).unwrap();
        assert_eq!(nearest_truth_table(&c).to_string(), "0011");
        assert_eq!(nearest_truth_table(&WalshCoeffs::zeros(2).unwrap()).to_string(), "1111");
    }

    #[test]
    fn catalog_rows() {
        let cat = gate_catalog();
        let nor = &cat[GateId::NOR.index()];
        assert_eq!(nor.table().to_string(), "1000");
        assert_eq!(nor.coeffs().values(), [-0.5, -0.5, -0.5, 0.5]);
        let id_b = &cat[GateId::ID_B.index()];
        assert_eq!(id_b.table().to_string(), "0101");
        assert_eq!(id_b.coeffs().values(), [0.0, 0.0, 1.0, 0.0]);
        let imp = &cat[GateId::IMP_A_B.index()];
        assert_eq!(imp.table().to_string(), "1101");
        assert_eq!(imp.coeffs().values(), [0.5, -0.5, 0.5, 0.5]);
        for (i, e) in cat.iter().enumerate() {
            assert_eq!(e.id.index(), i);
            assert_eq!(e.table().bits(), CATALOG_BITS[i]);
            assert_eq!(walsh_transform(&e.table()), e.coeffs(), "{}", e.name);
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify_gate(&tt("0110")).unwrap(), GateId::XOR);
        assert_eq!(classify_gate(&tt("0011")).unwrap(), GateId::ID_A);
        assert_eq!(classify_gate(&tt("1110")).unwrap(), GateId::NAND);
        assert!(classify_gate(&tt("01101001")).is_err());
    }

    #[test]
    fn arity_cap() {
        assert_eq!(TruthTable::from_bits(7, 0), Err(Error::Arity(7)));
        assert!(WalshCoeffs::new(vec![0.0; 128]).is_err());
        assert!(WalshCoeffs::new(vec![0.0; 3]).is_err());
        assert!(TruthTable::from_bits(2, 0b1_0000).is_err());
        assert!(TruthTable::from_bits(6, u64::MAX).is_ok());
    }

    #[test]
    fn serde_forms() {
        let t = tt("0110");
        let c = walsh_transform(&t);
        let _: Vec<f64> = c.clone().into();
        assert_eq!(WalshCoeffs::try_from(Vec::from(c.clone())).unwrap(), c);
    }
}
