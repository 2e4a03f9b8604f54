//! Artery class labels and sub-class bookkeeping.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::IndividualGraph;
use crate::error::{Error, Result};

/// The five left-coronary classes. Declaration order is the canonical label
/// order used for tie-breaking and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BaseClass {
    LMA,
    LAD,
    LCX,
    D,
    OM,
}

impl BaseClass {
    pub const ALL: [BaseClass; 5] = [BaseClass::LMA, BaseClass::LAD, BaseClass::LCX, BaseClass::D, BaseClass::OM];

    pub fn name(self) -> &'static str {
        match self {
            BaseClass::LMA => "LMA",
            BaseClass::LAD => "LAD",
            BaseClass::LCX => "LCX",
            BaseClass::D => "D",
            BaseClass::OM => "OM",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BaseClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A base class with an optional sub-index, e.g. `LAD2` or plain `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArteryLabel {
    pub base: BaseClass,
    pub sub_index: Option<u32>,
}

impl ArteryLabel {
    pub const fn new(base: BaseClass, sub_index: u32) -> Self {
        Self { base, sub_index: Some(sub_index) }
    }

    pub const fn base_only(base: BaseClass) -> Self {
        Self { base, sub_index: None }
    }
}

impl fmt::Display for ArteryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sub_index {
            Some(k) => write!(f, "{}{}", self.base, k),
            None => write!(f, "{}", self.base),
        }
    }
}

impl FromStr for ArteryLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let split = s.find(|c: char| c.is_ascii_digit()).unwrap_or(s.len());
        let (name, digits) = s.split_at(split);
        let base = BaseClass::ALL
            .into_iter()
            .find(|b| b.name() == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown artery class {s:?}")))?;
        let sub_index = if digits.is_empty() {
            None
        } else {
            let k: u32 = digits.parse().map_err(|_| Error::InvalidInput(format!("bad label {s:?}")))?;
            if k == 0 {
                return Err(Error::InvalidInput(format!("sub-index must be positive in {s:?}")));
            }
            Some(k)
        };
        Ok(Self { base, sub_index })
    }
}

impl Serialize for ArteryLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ArteryLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Drops the sub-index: `LAD2 -> LAD`.
pub fn group_subclasses(label: ArteryLabel) -> BaseClass {
    label.base
}

/// Assigns sub-indices by breadth-first traversal from the single LMA node.
/// Children are visited in row-major order of the key point they share with
/// their parent, then by node id. Every class keeps its own counter, so a
/// class seen once gets index 1.
pub fn relabel_subclasses(g: &IndividualGraph) -> Result<IndividualGraph> {
    let mut bases = Vec::with_capacity(g.nodes.len());
    for n in &g.nodes {
        let l = n.label.ok_or_else(|| Error::Labeling(format!("node {} has no label", n.id)))?;
        bases.push(l.base);
    }
    let roots: Vec<usize> = (0..bases.len()).filter(|&i| bases[i] == BaseClass::LMA).collect();
    if roots.len() != 1 {
        return Err(Error::Labeling(format!("expected exactly one LMA node, found {}", roots.len())));
    }
    let adj = g.adjacency();
    let mut order = Vec::with_capacity(g.nodes.len());
    let mut seen = vec![false; g.nodes.len()];
    seen[roots[0]] = true;
    let mut queue = VecDeque::from([roots[0]]);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        let mut kids: Vec<usize> = adj[u].iter().copied().filter(|&v| !seen[v]).collect();
        kids.sort_by_key(|&v| (g.shared_keypoint(u, v), v));
        for v in kids {
            seen[v] = true;
            queue.push_back(v);
        }
    }
    if order.len() != g.nodes.len() {
        return Err(Error::Labeling("graph is not connected to the LMA node".into()));
    }
    let mut counters: HashMap<BaseClass, u32> = HashMap::new();
    let mut out = g.clone();
    for u in order {
        let c = counters.entry(bases[u]).or_insert(0);
        *c += 1;
        out.nodes[u].label = Some(ArteryLabel::new(bases[u], *c));
    }
    Ok(out)
}
