use std::collections::BTreeMap;

use super::gates::Gate;
use super::state::{QuantumState, SlotId};
use crate::error::Result;

/// Ordered gate list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Circuit {
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, g: Gate) {
        self.gates.push(g);
    }

    pub fn extend(&mut self, other: &Circuit) {
        self.gates.extend_from_slice(&other.gates);
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn apply(&self, s: &mut QuantumState) -> Result<()> {
        for g in &self.gates {
            g.apply(s)?;
        }
        Ok(())
    }

    /// Reversed gate order with inverted gates.
    pub fn inverse(&self) -> Circuit {
        Circuit { gates: self.gates.iter().rev().map(Gate::inverse).collect() }
    }

    /// Greedy layering: each gate sits one layer above the latest gate
    /// touching any of its qubits.
    pub fn depth(&self) -> usize {
        let mut level: BTreeMap<SlotId, usize> = BTreeMap::new();
        let mut depth = 0;
        for g in &self.gates {
            let ts = g.targets();
            let l = ts.iter().map(|t| level.get(t).copied().unwrap_or(0)).max().unwrap_or(0) + 1;
            for t in ts {
                level.insert(t, l);
            }
            depth = depth.max(l);
        }
        depth
    }

    pub fn gate_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut out = BTreeMap::new();
        for g in &self.gates {
            *out.entry(g.name()).or_insert(0) += 1;
        }
        out
    }

    pub fn count(&self, name: &str) -> usize {
        self.gates.iter().filter(|g| g.name() == name).count()
    }

    /// Distinct slots touched.
    pub fn width(&self) -> usize {
        let mut seen: Vec<SlotId> = self.gates.iter().flat_map(|g| g.targets()).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    pub fn dump(&self) -> String {
        self.gates.iter().map(|g| format!("{g}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Circuit> {
        let gates = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::parse)
            .collect::<Result<Vec<Gate>>>()?;
        Ok(Circuit { gates })
    }
}
