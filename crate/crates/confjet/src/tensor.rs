//! Dense arrays of jets indexed over `{0..n}^rank`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::jet::{Jet, JetError, VarSet};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymTag {
    Sym(usize, usize),
    Anti(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TensorError {
    Symmetry { tag: SymTag, index: Vec<usize> },
    Shape,
    Jet(JetError),
}

impl From<JetError> for TensorError {
    fn from(e: JetError) -> Self {
        TensorError::Jet(e)
    }
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::Symmetry { tag, index } => write!(f, "declared symmetry {:?} fails at {:?}", tag, index),
            TensorError::Shape => write!(f, "tensor shapes do not match"),
            TensorError::Jet(e) => write!(f, "{}", e),
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct TensorJet {
    dim: usize,
    valence: Vec<Slot>,
    comps: Vec<Jet>,
    sym: Vec<SymTag>,
}

impl fmt::Debug for TensorJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (k, idx) in MultiIndex::new(self.dim, self.rank()).enumerate() {
            if !self.comps[k].is_zero() {
                m.entry(&idx, &self.comps[k]);
            }
        }
        m.finish()
    }
}

/// Iterator over `{0..n}^rank` in lexicographic order.
pub struct MultiIndex {
    dim: usize,
    cur: Option<Vec<usize>>,
}

impl MultiIndex {
    pub fn new(dim: usize, rank: usize) -> Self {
        let cur = if dim == 0 && rank > 0 { None } else { Some(vec![0; rank]) };
        MultiIndex { dim, cur }
    }
}

impl Iterator for MultiIndex {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.cur.clone()?;
        let mut nxt = out.clone();
        let mut k = nxt.len();
        loop {
            if k == 0 {
                self.cur = None;
                break;
            }
            k -= 1;
            nxt[k] += 1;
            if nxt[k] < self.dim {
                self.cur = Some(nxt);
                break;
            }
            nxt[k] = 0;
        }
        Some(out)
    }
}

impl TensorJet {
    pub fn zeros(vars: &Arc<VarSet>, order: u32, dim: usize, valence: &[Slot]) -> Self {
        let len = dim.pow(valence.len() as u32);
        TensorJet { dim, valence: valence.to_vec(), comps: vec![Jet::zero(vars, order); len], sym: Vec::new() }
    }

    pub fn from_fn(dim: usize, valence: &[Slot], mut f: impl FnMut(&[usize]) -> Jet) -> Self {
        let comps = MultiIndex::new(dim, valence.len()).map(|i| f(&i)).collect();
        TensorJet { dim, valence: valence.to_vec(), comps, sym: Vec::new() }
    }

    /// A (0,2) tensor from a row-major `n*n` array.
    pub fn from_matrix(dim: usize, entries: Vec<Jet>) -> Self {
        assert_eq!(entries.len(), dim * dim);
        TensorJet { dim, valence: vec![Slot::Down, Slot::Down], comps: entries, sym: Vec::new() }
    }

    pub fn from_comps(dim: usize, valence: &[Slot], comps: Vec<Jet>) -> Result<Self, TensorError> {
        if comps.len() != dim.pow(valence.len() as u32) {
            return Err(TensorError::Shape);
        }
        Ok(TensorJet { dim, valence: valence.to_vec(), comps, sym: Vec::new() })
    }

    /// Attaches symmetry tags after checking them on every component.
    pub fn with_symmetry(mut self, tags: &[SymTag]) -> Result<Self, TensorError> {
        for tag in tags {
            let (a, b, anti) = match *tag {
                SymTag::Sym(a, b) => (a, b, false),
                SymTag::Anti(a, b) => (a, b, true),
            };
            for idx in MultiIndex::new(self.dim, self.rank()) {
                if idx[a] >= idx[b] {
                    continue;
                }
                let mut sw = idx.clone();
                sw.swap(a, b);
                let x = self.get(&idx);
                let y = self.get(&sw);
                let ok = if anti { (x + y).is_zero() } else { (x - y).is_zero() };
                if !ok
                    || (anti
                        && !self
                            .get(&{
                                let mut d = idx.clone();
                                d[b] = d[a];
                                d
                            })
                            .is_zero())
                {
                    return Err(TensorError::Symmetry { tag: *tag, index: idx });
                }
            }
        }
        self.sym = tags.to_vec();
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.valence.len()
    }

    pub fn valence(&self) -> &[Slot] {
        &self.valence
    }

    pub fn symmetry(&self) -> &[SymTag] {
        &self.sym
    }

    pub fn comps(&self) -> &[Jet] {
        &self.comps
    }

    pub fn into_comps(self) -> Vec<Jet> {
        self.comps
    }

    pub fn vars(&self) -> &Arc<VarSet> {
        self.comps[0].vars()
    }

    fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |a, &i| a * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> &Jet {
        &self.comps[self.flat(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Jet) {
        let k = self.flat(idx);
        self.comps[k] = v;
    }

    pub fn get_mut(&mut self, idx: &[usize]) -> &mut Jet {
        let k = self.flat(idx);
        &mut self.comps[k]
    }

    /// Smallest truncation order among the components.
    pub fn order(&self) -> u32 {
        self.comps.iter().map(Jet::order).min().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Jet::is_zero)
    }

    pub fn map(&self, f: impl FnMut(&Jet) -> Jet) -> Self {
        TensorJet { dim: self.dim, valence: self.valence.clone(), comps: self.comps.iter().map(f).collect(), sym: self.sym.clone() }
    }

    pub fn try_map(&self, f: impl FnMut(&Jet) -> Result<Jet, JetError>) -> Result<Self, JetError> {
        let comps = self.comps.iter().map(f).collect::<Result<Vec<_>, _>>()?;
        Ok(TensorJet { dim: self.dim, valence: self.valence.clone(), comps, sym: self.sym.clone() })
    }

    pub fn zip_with(&self, other: &TensorJet, mut f: impl FnMut(&Jet, &Jet) -> Jet) -> Self {
        assert!(self.dim == other.dim && self.valence == other.valence, "tensor shapes differ");
        let comps = self.comps.iter().zip(&other.comps).map(|(a, b)| f(a, b)).collect();
        let sym = if self.sym == other.sym { self.sym.clone() } else { Vec::new() };
        TensorJet { dim: self.dim, valence: self.valence.clone(), comps, sym }
    }

    pub fn add(&self, other: &TensorJet) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &TensorJet) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: &Scalar) -> Self {
        self.map(|a| a.scale(c))
    }

    pub fn mul_jet(&self, f: &Jet) -> Self {
        self.map(|a| a * f)
    }

    pub fn truncate(&self, order: u32) -> Self {
        self.map(|a| a.truncate(order))
    }

    /// Values at the origin of every variable.
    pub fn at_origin(&self) -> Vec<Scalar> {
        self.comps.iter().map(Jet::constant_term).collect()
    }

    /// Reinterprets the slot positions without touching components.
    pub fn with_valence(mut self, valence: &[Slot]) -> Self {
        assert_eq!(valence.len(), self.valence.len());
        self.valence = valence.to_vec();
        self
    }

    /// Swaps two slots.
    pub fn transpose(&self, a: usize, b: usize) -> Self {
        let mut valence = self.valence.clone();
        valence.swap(a, b);
        TensorJet::from_fn(self.dim, &valence, |idx| {
            let mut s = idx.to_vec();
            s.swap(a, b);
            self.get(&s).clone()
        })
    }

    /// Symmetric part of a (0,2) tensor.
    pub fn symmetrize2(&self) -> Self {
        assert_eq!(self.rank(), 2);
        let half = Scalar::ratio(1, 2);
        TensorJet::from_fn(self.dim, &self.valence, |i| (self.get(&[i[0], i[1]]) + self.get(&[i[1], i[0]])).scale(&half))
    }
}
