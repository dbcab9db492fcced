//! Basis enumeration for the full product spaces, the single-excitation
//! (blockade-restricted) space, composites of two restricted spaces, and
//! truncated product spaces with blockaded states removed.
//!
//! Every space stores its basis as per-atom level configurations, so all
//! operator builders work label-wise on any kind of space. A state that is
//! absent from the basis is simply never reached.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::PairCouplings;
use crate::operators::{StateVector, C64};

/// Default cap on the dimension of a product space.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    G,
    R,
    S,
    E,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::G, Level::R, Level::S, Level::E];

    pub fn symbol(self) -> char {
        match self {
            Level::G => 'g',
            Level::R => 'r',
            Level::S => 's',
            Level::E => 'e',
        }
    }

    fn from_symbol(c: char) -> Option<Level> {
        Some(match c {
            'g' => Level::G,
            'r' => Level::R,
            's' => Level::S,
            'e' => Level::E,
            _ => return None,
        })
    }

    /// Rydberg levels carry interactions.
    pub fn is_rydberg(self) -> bool {
        matches!(self, Level::R | Level::S)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    /// Every product of `levels` single-atom states.
    Full { levels: usize },
    /// |G⟩, |R_k⟩, |S_k⟩ (and |E_k⟩ when `engineered`).
    Restricted { engineered: bool },
    /// Two restricted spaces, left-major.
    Composite { left: usize, right: usize },
    /// A product space with some configurations excluded.
    Truncated { levels: usize },
}

/// Human-facing basis label.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BasisLabel {
    /// Per-atom level list, e.g. `grsg`.
    Product(Vec<Level>),
    Ground,
    /// Atom index is 1-based, as in |R_1⟩.
    R(usize),
    S(usize),
    E(usize),
    Pair(Box<BasisLabel>, Box<BasisLabel>),
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisLabel::Product(levels) => {
                levels.iter().try_for_each(|l| write!(f, "{}", l.symbol()))
            }
            BasisLabel::Ground => write!(f, "G"),
            BasisLabel::R(k) => write!(f, "R_{k}"),
            BasisLabel::S(k) => write!(f, "S_{k}"),
            BasisLabel::E(k) => write!(f, "E_{k}"),
            BasisLabel::Pair(a, b) => write!(f, "({a},{b})"),
        }
    }
}

impl BasisLabel {
    /// Parse `G`, `R_k`, `S_k`, `E_k`, `(a,b)` or a per-atom string like `grsg`.
    pub fn parse(s: &str) -> Option<BasisLabel> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix('(').and_then(|x| x.strip_suffix(')')) {
            let (a, b) = inner.split_once(',')?;
            return Some(BasisLabel::Pair(
                Box::new(BasisLabel::parse(a)?),
                Box::new(BasisLabel::parse(b)?),
            ));
        }
        if s == "G" {
            return Some(BasisLabel::Ground);
        }
        if let Some((head, k)) = s.split_once('_') {
            let k: usize = k.parse().ok().filter(|&k| k >= 1)?;
            return match head {
                "R" => Some(BasisLabel::R(k)),
                "S" => Some(BasisLabel::S(k)),
                "E" => Some(BasisLabel::E(k)),
                _ => None,
            };
        }
        s.chars()
            .map(Level::from_symbol)
            .collect::<Option<Vec<_>>>()
            .filter(|v| !v.is_empty())
            .map(BasisLabel::Product)
    }
}

#[derive(Clone, Debug)]
pub struct HilbertSpace {
    kind: SpaceKind,
    atoms: usize,
    configs: Vec<Vec<Level>>,
    index: HashMap<Vec<Level>, usize>,
}

impl PartialEq for HilbertSpace {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.configs == other.configs
    }
}

impl HilbertSpace {
    fn from_configs(kind: SpaceKind, atoms: usize, configs: Vec<Vec<Level>>) -> Self {
        let index = configs
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        HilbertSpace {
            kind,
            atoms,
            configs,
            index,
        }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    /// Total number of atoms (both ensembles for a composite).
    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn config(&self, i: usize) -> &[Level] {
        &self.configs[i]
    }

    pub fn configs(&self) -> impl Iterator<Item = &[Level]> {
        self.configs.iter().map(Vec::as_slice)
    }

    pub fn index_of_config(&self, c: &[Level]) -> Option<usize> {
        self.index.get(c).copied()
    }

    pub fn is_restricted(&self) -> bool {
        matches!(self.kind, SpaceKind::Restricted { .. })
    }

    /// Whether any basis state places an atom in `level`.
    pub fn has_level(&self, level: Level) -> bool {
        self.configs.iter().any(|c| c.contains(&level))
    }

    pub fn ground_index(&self) -> Option<usize> {
        self.index_of_config(&vec![Level::G; self.atoms])
    }

    pub fn label(&self, i: usize) -> BasisLabel {
        match self.kind {
            SpaceKind::Restricted { .. } => single_excitation_label(&self.configs[i], 0),
            SpaceKind::Composite { left, .. } => {
                let c = &self.configs[i];
                BasisLabel::Pair(
                    Box::new(single_excitation_label(&c[..left], 0)),
                    Box::new(single_excitation_label(&c[left..], 0)),
                )
            }
            _ => BasisLabel::Product(self.configs[i].clone()),
        }
    }

    pub fn labels(&self) -> Vec<BasisLabel> {
        (0..self.dim()).map(|i| self.label(i)).collect()
    }

    pub fn index_of(&self, label: &BasisLabel) -> Option<usize> {
        let config = match (self.kind, label) {
            (_, BasisLabel::Product(c)) => c.clone(),
            (SpaceKind::Composite { left, right }, BasisLabel::Pair(a, b)) => {
                let mut c = single_excitation_config(a, left)?;
                c.extend(single_excitation_config(b, right)?);
                c
            }
            (SpaceKind::Composite { .. }, _) => return None,
            (_, BasisLabel::Pair(..)) => return None,
            (_, symbolic) => single_excitation_config(symbolic, self.atoms)?,
        };
        self.index_of_config(&config)
    }

    /// Look up a label given as text.
    pub fn index_of_str(&self, s: &str) -> Option<usize> {
        self.index_of(&BasisLabel::parse(s)?)
    }

    /// Keep only the configurations accepted by `keep`; order is preserved.
    pub fn truncated(&self, keep: impl Fn(&[Level]) -> bool) -> HilbertSpace {
        let levels = match self.kind {
            SpaceKind::Full { levels } | SpaceKind::Truncated { levels } => levels,
            _ => {
                if self.has_level(Level::E) {
                    4
                } else {
                    3
                }
            }
        };
        let configs = self.configs.iter().filter(|c| keep(c)).cloned().collect();
        HilbertSpace::from_configs(SpaceKind::Truncated { levels }, self.atoms, configs)
    }

    /// Remove every configuration in which a perfectly blockaded pair is
    /// doubly excited in the corresponding channel.
    pub fn blockaded(&self, couplings: &PairCouplings) -> Result<HilbertSpace> {
        if couplings.atoms() != self.atoms {
            return Err(Error::DimensionMismatch {
                expected: self.atoms,
                found: couplings.atoms(),
            });
        }
        Ok(self.truncated(|c| !has_perfect_pair(c, couplings)))
    }
}

pub(crate) fn has_perfect_pair(c: &[Level], couplings: &PairCouplings) -> bool {
    for i in 0..c.len() {
        for j in (i + 1)..c.len() {
            let table = match (c[i], c[j]) {
                (Level::R, Level::R) => &couplings.rr,
                (Level::S, Level::S) => &couplings.ss,
                (Level::R, Level::S) | (Level::S, Level::R) => &couplings.rs,
                _ => continue,
            };
            if table.get(i, j).is_perfect() {
                return true;
            }
        }
    }
    false
}

fn single_excitation_label(c: &[Level], offset: usize) -> BasisLabel {
    match c.iter().position(|&l| l != Level::G) {
        None => BasisLabel::Ground,
        Some(k) => match c[k] {
            Level::R => BasisLabel::R(k + 1 + offset),
            Level::S => BasisLabel::S(k + 1 + offset),
            _ => BasisLabel::E(k + 1 + offset),
        },
    }
}

fn single_excitation_config(label: &BasisLabel, atoms: usize) -> Option<Vec<Level>> {
    let mut c = vec![Level::G; atoms];
    let (k, level) = match *label {
        BasisLabel::Ground => return Some(c),
        BasisLabel::R(k) => (k, Level::R),
        BasisLabel::S(k) => (k, Level::S),
        BasisLabel::E(k) => (k, Level::E),
        _ => return None,
    };
    if k == 0 || k > atoms {
        return None;
    }
    c[k - 1] = level;
    Some(c)
}

/// Full product space of `n` atoms with `levels` ∈ {3, 4} states each, in
/// lexicographic order with atom 1 most significant.
pub fn full_space(n: usize, levels: usize) -> Result<HilbertSpace> {
    full_space_with_cap(n, levels, DEFAULT_DIMENSION_CAP)
}

pub fn full_space_with_cap(n: usize, levels: usize, cap: usize) -> Result<HilbertSpace> {
    if n == 0 {
        return Err(Error::validation("N", "at least one atom required"));
    }
    if !(3..=4).contains(&levels) {
        return Err(Error::validation("levels", format!("{levels} is not 3 or 4")));
    }
    let dim = (levels as u32)
        .checked_pow(n as u32)
        .map(|d| d as usize)
        .filter(|&d| d <= cap)
        .ok_or(Error::DimensionCap {
            dim: levels.saturating_pow(n.min(64) as u32),
            cap,
        })?;
    let configs = (0..dim)
        .map(|mut i| {
            let mut c = vec![Level::G; n];
            for slot in c.iter_mut().rev() {
                *slot = Level::ALL[i % levels];
                i /= levels;
            }
            c
        })
        .collect();
    Ok(HilbertSpace::from_configs(SpaceKind::Full { levels }, n, configs))
}

/// Single-excitation space [G, R_1..R_N, S_1..S_N], dimension 2N+1.
pub fn restricted_space(n: usize) -> Result<HilbertSpace> {
    restricted_with(n, false)
}

/// Single-excitation space with the short-lived level:
/// [G, R_1..R_N, S_1..S_N, E_1..E_N], dimension 3N+1.
pub fn restricted_space_engineered(n: usize) -> Result<HilbertSpace> {
    restricted_with(n, true)
}

fn restricted_with(n: usize, engineered: bool) -> Result<HilbertSpace> {
    if n == 0 {
        return Err(Error::validation("N", "at least one atom required"));
    }
    let mut levels = vec![Level::R, Level::S];
    if engineered {
        levels.push(Level::E);
    }
    let mut configs = vec![vec![Level::G; n]];
    for level in levels {
        for k in 0..n {
            let mut c = vec![Level::G; n];
            c[k] = level;
            configs.push(c);
        }
    }
    Ok(HilbertSpace::from_configs(
        SpaceKind::Restricted { engineered },
        n,
        configs,
    ))
}

/// Tensor product of two restricted spaces, left-major:
/// index(l, r) = index(l)·dim(right) + index(r).
pub fn composite_space(left: &HilbertSpace, right: &HilbertSpace) -> Result<HilbertSpace> {
    if !left.is_restricted() || !right.is_restricted() {
        return Err(Error::IncompatibleSpace(
            "composite spaces are built from two restricted spaces".into(),
        ));
    }
    let mut configs = Vec::with_capacity(left.dim() * right.dim());
    for l in &left.configs {
        for r in &right.configs {
            let mut c = l.clone();
            c.extend_from_slice(r);
            configs.push(c);
        }
    }
    Ok(HilbertSpace::from_configs(
        SpaceKind::Composite {
            left: left.atoms,
            right: right.atoms,
        },
        left.atoms + right.atoms,
        configs,
    ))
}

/// Uniform superpositions (|R_sym⟩, |S⟩) over the single-excitation states.
pub fn symmetric_states(space: &HilbertSpace) -> Result<(StateVector, StateVector)> {
    if !space.is_restricted() {
        return Err(Error::IncompatibleSpace(
            "symmetric states are defined on a restricted space".into(),
        ));
    }
    Ok((
        single_excitation_superposition(space, Level::R),
        single_excitation_superposition(space, Level::S),
    ))
}

/// Normalized uniform superposition of every basis state with exactly one
/// atom in `level` and all others in |g⟩.
pub(crate) fn single_excitation_superposition(space: &HilbertSpace, level: Level) -> StateVector {
    let hits: Vec<usize> = (0..space.dim())
        .filter(|&i| {
            let c = space.config(i);
            c.iter().filter(|&&l| l == level).count() == 1
                && c.iter().all(|&l| l == level || l == Level::G)
        })
        .collect();
    let amp = C64::new(1.0 / (hits.len() as f64).sqrt(), 0.0);
    let mut v = DVector::zeros(space.dim());
    for i in hits {
        v[i] = amp;
    }
    StateVector::new_unchecked(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PairCoupling, PairCouplings};
    use proptest::prelude::*;

    #[test]
    fn dimensions() {
        assert_eq!(full_space(3, 3).unwrap().dim(), 27);
        assert_eq!(full_space(2, 4).unwrap().dim(), 16);
        assert_eq!(full_space(6, 3).unwrap().dim(), 729);
        assert_eq!(full_space(6, 4).unwrap().dim(), 4096);
        assert_eq!(restricted_space(10).unwrap().dim(), 21);
        assert_eq!(restricted_space(20).unwrap().dim(), 41);
        assert_eq!(restricted_space_engineered(10).unwrap().dim(), 31);
        let r3 = restricted_space(3).unwrap();
        assert_eq!(composite_space(&r3, &r3).unwrap().dim(), 49);
        let r1 = restricted_space(1).unwrap();
        assert_eq!(composite_space(&r1, &r1).unwrap().dim(), 9);
    }

    #[test]
    fn dimension_cap_is_enforced() {
        assert!(matches!(full_space(7, 4), Err(Error::DimensionCap { .. })));
        assert!(matches!(full_space_with_cap(3, 3, 26), Err(Error::DimensionCap { dim: 27, cap: 26 })));
        assert!(full_space(0, 3).is_err());
        assert!(full_space(2, 5).is_err());
        assert!(restricted_space(0).is_err());
    }

    #[test]
    fn restricted_order_and_labels() {
        let s = restricted_space(1).unwrap();
        assert_eq!(s.labels(), vec![BasisLabel::Ground, BasisLabel::R(1), BasisLabel::S(1)]);
        let s = restricted_space(3).unwrap();
        let names: Vec<String> = s.labels().iter().map(ToString::to_string).collect();
        assert_eq!(names, ["G", "R_1", "R_2", "R_3", "S_1", "S_2", "S_3"]);
        assert_eq!(s.index_of_str("S_2"), Some(5));
        assert_eq!(s.index_of_str("S_4"), None);
        assert_eq!(s.index_of_str("gsg"), Some(5));
    }

    #[test]
    fn full_space_is_lexicographic() {
        let s = full_space(2, 3).unwrap();
        let names: Vec<String> = s.labels().iter().map(ToString::to_string).collect();
        assert_eq!(names, ["gg", "gr", "gs", "rg", "rr", "rs", "sg", "sr", "ss"]);
    }

    #[test]
    fn composite_indexing() {
        let l = restricted_space(2).unwrap();
        let r = restricted_space(3).unwrap();
        let c = composite_space(&l, &r).unwrap();
        let g = BasisLabel::Pair(Box::new(BasisLabel::Ground), Box::new(BasisLabel::Ground));
        assert_eq!(c.index_of(&g), Some(0));
        for (i, a) in l.labels().into_iter().enumerate() {
            for (j, b) in r.labels().into_iter().enumerate() {
                let label = BasisLabel::Pair(Box::new(a.clone()), Box::new(b));
                assert_eq!(c.index_of(&label), Some(i * r.dim() + j));
            }
        }
        assert_eq!(c.index_of_str("(S_1,R_3)"), Some(3 * r.dim() + 3));
        assert!(composite_space(&full_space(1, 3).unwrap(), &r).is_err());
    }

    #[test]
    fn restricted_embeds_in_full() {
        for n in 1..=4 {
            let r = restricted_space(n).unwrap();
            let f = full_space(n, 3).unwrap();
            let mut images: Vec<usize> = r.configs().map(|c| f.index_of_config(c).unwrap()).collect();
            images.sort();
            images.dedup();
            assert_eq!(images.len(), r.dim());
        }
    }

    #[test]
    fn symmetric_state_amplitudes() {
        let s = restricted_space(4).unwrap();
        let (r, w) = symmetric_states(&s).unwrap();
        for k in 1..=4 {
            assert!((w.amplitudes()[s.index_of(&BasisLabel::S(k)).unwrap()].re - 0.5).abs() < 1e-15);
            assert!((r.amplitudes()[s.index_of(&BasisLabel::R(k)).unwrap()].re - 0.5).abs() < 1e-15);
        }
        let s1 = restricted_space(1).unwrap();
        let (_, w1) = symmetric_states(&s1).unwrap();
        assert_eq!(w1.amplitudes()[2], C64::new(1.0, 0.0));
        assert!(symmetric_states(&full_space(2, 3).unwrap()).is_err());
    }

    #[test]
    fn blockade_truncation() {
        let f = full_space(4, 3).unwrap();
        let hybrid = PairCouplings::uniform(4, PairCoupling::Perfect, PairCoupling::Perfect, PairCoupling::Finite(1.0));
        let h = f.blockaded(&hybrid).unwrap();
        // G, 4 R_k, 4 S_k, 12 ordered (r_i, s_j) pairs.
        assert_eq!(h.dim(), 21);
        let perfect = PairCouplings::uniform(4, PairCoupling::Perfect, PairCoupling::Perfect, PairCoupling::Perfect);
        assert_eq!(f.blockaded(&perfect).unwrap().dim(), 9);
    }

    proptest! {
        #[test]
        fn labels_round_trip(n in 1usize..5, levels in 3usize..5, which in 0usize..4) {
            let space = match which {
                0 => full_space(n, levels).unwrap(),
                1 => restricted_space(n).unwrap(),
                2 => restricted_space_engineered(n).unwrap(),
                _ => {
                    let r = restricted_space(n).unwrap();
                    composite_space(&r, &restricted_space(levels - 2).unwrap()).unwrap()
                }
            };
            for (i, label) in space.labels().iter().enumerate() {
                prop_assert_eq!(space.index_of(label), Some(i));
                prop_assert_eq!(space.index_of_str(&label.to_string()), Some(i));
            }
        }
    }
}
