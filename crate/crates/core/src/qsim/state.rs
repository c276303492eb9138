use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Amplitudes below this magnitude are dropped after every operation.
pub const PRUNE_EPS: f64 = 1e-14;
/// Allowed drift of the squared norm from one.
pub const NORM_TOL: f64 = 1e-10;

pub type SlotId = usize;
pub type BasisKey = Vec<u32>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub name: String,
    pub radix: u32,
}

/// Ordered `(name, radix)` slots.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegisterLayout {
    slots: Vec<Slot>,
}

impl RegisterLayout {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: &str, radix: u32) -> Result<SlotId> {
        if radix < 2 {
            return Err(Error::InvalidRegister(format!("slot {name} has radix {radix} < 2")));
        }
        if self.find(name).is_some() {
            return Err(Error::InvalidRegister(format!("duplicate slot name {name}")));
        }
        self.slots.push(Slot { name: name.to_string(), radix });
        Ok(self.slots.len() - 1)
    }

    pub fn find(&self, name: &str) -> Option<SlotId> {
        self.slots.iter().position(|s| s.name == name)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, id: SlotId) -> &Slot {
        &self.slots[id]
    }

    /// Product of radices (saturating; only informative for small layouts).
    pub fn dimension(&self) -> f64 {
        self.slots.iter().map(|s| s.radix as f64).product()
    }
}

/// Sparse amplitude map over a mixed-radix layout.
#[derive(Debug, Clone)]
pub struct QuantumState {
    layout: RegisterLayout,
    amps: HashMap<BasisKey, Complex64>,
}

impl Default for QuantumState {
    fn default() -> Self {
        Self::new()
    }
}

impl QuantumState {
    /// The empty-layout state with amplitude 1.
    pub fn new() -> Self {
        let mut amps = HashMap::new();
        amps.insert(Vec::new(), Complex64::new(1.0, 0.0));
        QuantumState { layout: RegisterLayout::new(), amps }
    }

    /// `n` qubits named `q0..` in `|0...0⟩`.
    pub fn qubits(n: usize) -> Self {
        let mut s = Self::new();
        for i in 0..n {
            s.add_slot(&format!("q{i}"), 2).unwrap();
        }
        s
    }

    /// Builds a state from explicit amplitudes; normalizes it.
    pub fn from_amplitudes(layout: RegisterLayout, amps: impl IntoIterator<Item = (BasisKey, Complex64)>) -> Result<Self> {
        let mut map: HashMap<BasisKey, Complex64> = HashMap::new();
        for (k, a) in amps {
            if k.len() != layout.len() || k.iter().zip(&layout.slots).any(|(&v, s)| v >= s.radix) {
                return Err(Error::InvalidRegister(format!("basis key {k:?} does not fit the layout")));
            }
            *map.entry(k).or_default() += a;
        }
        let mut s = QuantumState { layout, amps: map };
        s.prune();
        let n = s.norm_sqr();
        if n < 1e-300 {
            return Err(Error::Unnormalized(n));
        }
        let f = 1.0 / n.sqrt();
        s.amps.values_mut().for_each(|a| *a *= f);
        Ok(s)
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &HashMap<BasisKey, Complex64> {
        &self.amps
    }

    pub fn amplitude(&self, key: &[u32]) -> Complex64 {
        self.amps.get(key).copied().unwrap_or_default()
    }

    pub fn support(&self) -> usize {
        self.amps.len()
    }

    /// Appends a slot initialized to `|0⟩`.
    pub fn add_slot(&mut self, name: &str, radix: u32) -> Result<SlotId> {
        let id = self.layout.push(name, radix)?;
        self.amps = self
            .amps
            .drain()
            .map(|(mut k, a)| {
                k.push(0);
                (k, a)
            })
            .collect();
        Ok(id)
    }

    pub fn add_qubits(&mut self, prefix: &str, n: usize) -> Result<Vec<SlotId>> {
        (0..n).map(|i| self.add_slot(&format!("{prefix}{i}"), 2)).collect()
    }

    pub fn slot(&self, name: &str) -> Result<SlotId> {
        self.layout.find(name).ok_or_else(|| Error::InvalidRegister(format!("no slot named {name}")))
    }

    /// Removes a slot that holds a definite value; later slot ids shift down.
    pub fn remove_slot(&mut self, id: SlotId) -> Result<u32> {
        let mut value = None;
        for k in self.amps.keys() {
            match value {
                None => value = Some(k[id]),
                Some(v) if v != k[id] => {
                    return Err(Error::InvalidRegister(format!(
                        "slot {} is entangled and cannot be removed",
                        self.layout.slots[id].name
                    )))
                }
                _ => {}
            }
        }
        self.layout.slots.remove(id);
        self.amps = self
            .amps
            .drain()
            .map(|(mut k, a)| {
                k.remove(id);
                (k, a)
            })
            .collect();
        Ok(value.unwrap_or(0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::Unnormalized(n));
        }
        Ok(())
    }

    pub(crate) fn prune(&mut self) {
        self.amps.retain(|_, a| a.norm() >= PRUNE_EPS);
    }

    pub(crate) fn check_qubit(&self, id: SlotId) -> Result<()> {
        match self.layout.slots.get(id) {
            None => Err(Error::InvalidRegister(format!("slot {id} does not exist"))),
            Some(s) if s.radix != 2 => Err(Error::InvalidRegister(format!("slot {} has radix {}, not a qubit", s.name, s.radix))),
            _ => Ok(()),
        }
    }

    pub(crate) fn check_slot(&self, id: SlotId) -> Result<()> {
        if id >= self.layout.len() {
            return Err(Error::InvalidRegister(format!("slot {id} does not exist")));
        }
        Ok(())
    }

    /// Relabels basis keys by a bijection.
    pub fn permute<F: Fn(&mut BasisKey)>(&mut self, f: F) {
        self.amps = self
            .amps
            .drain()
            .map(|(mut k, a)| {
                f(&mut k);
                (k, a)
            })
            .collect();
    }

    /// Multiplies every amplitude by a key-dependent phase.
    pub fn phase<F: Fn(&BasisKey) -> Complex64>(&mut self, f: F) {
        for (k, a) in self.amps.iter_mut() {
            *a *= f(k);
        }
    }

    /// Applies a 2x2 matrix `[[m00, m01], [m10, m11]]` to a qubit.
    pub fn apply_1q(&mut self, q: SlotId, m: [[Complex64; 2]; 2]) -> Result<()> {
        self.check_qubit(q)?;
        let mut out: HashMap<BasisKey, Complex64> = HashMap::with_capacity(self.amps.len() * 2);
        for (k, a) in self.amps.drain() {
            let v = k[q] as usize;
            for row in 0..2 {
                let c = m[row][v];
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                let mut nk = k.clone();
                nk[q] = row as u32;
                *out.entry(nk).or_default() += c * a;
            }
        }
        self.amps = out;
        self.prune();
        Ok(())
    }

    /// Maps each key to a superposition; `f` returns `(key, coefficient)` pairs.
    pub fn apply_linear<F: Fn(&BasisKey) -> Vec<(BasisKey, Complex64)>>(&mut self, f: F) {
        let mut out: HashMap<BasisKey, Complex64> = HashMap::with_capacity(self.amps.len());
        for (k, a) in self.amps.drain() {
            for (nk, c) in f(&k) {
                *out.entry(nk).or_default() += c * a;
            }
        }
        self.amps = out;
        self.prune();
    }

    /// Value of a little-endian qubit register in a basis key.
    pub fn register_value(key: &[u32], qubits: &[SlotId]) -> u64 {
        qubits.iter().enumerate().fold(0u64, |acc, (i, &q)| acc | ((key[q] as u64) << i))
    }

    pub fn set_register(key: &mut [u32], qubits: &[SlotId], value: u64) {
        for (i, &q) in qubits.iter().enumerate() {
            key[q] = ((value >> i) & 1) as u32;
        }
    }

    /// Marginal distribution over the given slots.
    pub fn probabilities(&self, slots: &[SlotId]) -> BTreeMap<Vec<u32>, f64> {
        let mut out = BTreeMap::new();
        for (k, a) in &self.amps {
            let key: Vec<u32> = slots.iter().map(|&s| k[s]).collect();
            *out.entry(key).or_insert(0.0) += a.norm_sqr();
        }
        out
    }

    /// Marginal distribution of a little-endian qubit register.
    pub fn register_distribution(&self, qubits: &[SlotId]) -> BTreeMap<u64, f64> {
        let mut out = BTreeMap::new();
        for (k, a) in &self.amps {
            *out.entry(Self::register_value(k, qubits)).or_insert(0.0) += a.norm_sqr();
        }
        out
    }

    /// Samples an outcome without collapsing (for repeated shots).
    pub fn sample<R: Rng + ?Sized>(&self, slots: &[SlotId], rng: &mut R) -> Vec<u32> {
        sample_from(&self.probabilities(slots), rng)
    }

    /// Projective measurement of `slots`; the state collapses and renormalizes.
    pub fn measure<R: Rng + ?Sized>(&mut self, slots: &[SlotId], rng: &mut R) -> Result<Vec<u32>> {
        for &s in slots {
            self.check_slot(s)?;
        }
        let outcome = self.sample(slots, rng);
        self.postselect(slots, &outcome)?;
        Ok(outcome)
    }

    /// Projects onto `slots = values` and renormalizes.
    pub fn postselect(&mut self, slots: &[SlotId], values: &[u32]) -> Result<f64> {
        self.amps.retain(|k, _| slots.iter().zip(values).all(|(&s, &v)| k[s] == v));
        let p = self.norm_sqr();
        if p <= 0.0 {
            return Err(Error::Unnormalized(p));
        }
        let f = 1.0 / p.sqrt();
        self.amps.values_mut().for_each(|a| *a *= f);
        Ok(p)
    }

    pub fn inner(&self, other: &QuantumState) -> Result<Complex64> {
        if self.layout.len() != other.layout.len() {
            return Err(Error::InvalidRegister("layouts differ".into()));
        }
        Ok(self.amps.iter().map(|(k, a)| a.conj() * other.amplitude(k)).sum())
    }

    /// `|⟨self|other⟩|²`; insensitive to global phase.
    pub fn fidelity(&self, other: &QuantumState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Reduced density matrix over qubits (little-endian index order).
    pub fn reduced_density(&self, qubits: &[SlotId]) -> Vec<Vec<Complex64>> {
        let d = 1usize << qubits.len();
        let mut rho = vec![vec![Complex64::default(); d]; d];
        let mut groups: HashMap<BasisKey, Vec<(usize, Complex64)>> = HashMap::new();
        for (k, a) in &self.amps {
            let mut rest = k.clone();
            for &q in qubits {
                rest[q] = 0;
            }
            groups.entry(rest).or_default().push((Self::register_value(k, qubits) as usize, *a));
        }
        for entries in groups.values() {
            for &(i, ai) in entries {
                for &(j, aj) in entries {
                    rho[i][j] += ai * aj.conj();
                }
            }
        }
        rho
    }
}

pub(crate) fn sample_from<K: Clone, R: Rng + ?Sized>(dist: &BTreeMap<K, f64>, rng: &mut R) -> K {
    let total: f64 = dist.values().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = None;
    for (k, &p) in dist {
        if u < p {
            return k.clone();
        }
        u -= p;
        last = Some(k);
    }
    last.expect("empty distribution").clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn layout_rules() {
        let mut l = RegisterLayout::new();
        assert!(l.push("a", 1).is_err());
        l.push("a", 2).unwrap();
        assert!(l.push("a", 3).is_err());
        l.push("g", 225).unwrap();
        assert_eq!(l.dimension(), 450.0);
    }

    #[test]
    fn measure_definite_state() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let mut s = QuantumState::qubits(4);
        s.permute(|k| {
            k[1] = 1;
            k[2] = 1;
        });
        for _ in 0..20 {
            assert_eq!(s.clone().measure(&[0, 1, 2, 3], &mut rng).unwrap(), vec![0, 1, 1, 0]);
        }
    }

    #[test]
    fn uniform_measurement_frequencies() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let amp = Complex64::new(0.5, 0.0);
        let mut layout = RegisterLayout::new();
        layout.push("a", 2).unwrap();
        layout.push("b", 2).unwrap();
        let s = QuantumState::from_amplitudes(
            layout,
            [vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]].into_iter().map(|k| (k, amp)),
        )
        .unwrap();
        let mut counts = [0u32; 4];
        for _ in 0..10_000 {
            let mut t = s.clone();
            let o = t.measure(&[0, 1], &mut rng).unwrap();
            t.check_normalized().unwrap();
            counts[(o[0] * 2 + o[1]) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1e4 - 0.25).abs() < 0.02);
        }
    }

    #[test]
    fn remove_definite_slot() {
        let mut s = QuantumState::qubits(2);
        s.add_slot("g", 225).unwrap();
        s.permute(|k| k[2] = 17);
        assert_eq!(s.remove_slot(2).unwrap(), 17);
        assert_eq!(s.layout().len(), 2);
        assert!(s.slot("g").is_err());
    }
}
