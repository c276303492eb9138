use rand::Rng;

use super::gaussian::DiscreteGaussian;
use super::lwe::{ByteReader, LweCiphertext, LweSecretKey};
use super::params::{centered, LweParams, MheParams};
use crate::error::{Error, Result};

/// MHE secret key `sk = (-e_sk, 1)`; `e_sk` is binary so every extracted
/// column is an ordinary LWE ciphertext under `e_sk`.
#[derive(Debug, Clone, PartialEq)]
pub struct MheSecretKey {
    e_sk: Vec<u8>,
    params: MheParams,
}

/// Public matrix `A' = [A; e_sk^T A]` of shape `(n'+1) x n'`.
#[derive(Debug, Clone)]
pub struct MhePublicKey {
    a_prime: Vec<u64>,
    params: MheParams,
}

/// GSW-style matrix ciphertext `A'S + E + μG`, stored row-major.
///
/// `noise` bounds the entries of the error matrix; the phase error of any
/// column is therefore at most `(n'+1)·noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct MheCiphertext {
    data: Vec<u64>,
    pub params: MheParams,
    pub noise: f64,
}

pub fn keygen<R: Rng + ?Sized>(params: &MheParams, rng: &mut R) -> (MheSecretKey, MhePublicKey) {
    let n = params.n;
    let e_sk: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
    let mut a_prime = vec![0u64; (n + 1) * n];
    for v in a_prime[..n * n].iter_mut() {
        *v = rng.gen::<u64>() & params.mask();
    }
    for j in 0..n {
        let mut acc = 0u64;
        for i in 0..n {
            if e_sk[i] == 1 {
                acc = acc.wrapping_add(a_prime[i * n + j]);
            }
        }
        a_prime[n * n + j] = acc & params.mask();
    }
    (MheSecretKey { e_sk, params: *params }, MhePublicKey { a_prime, params: *params })
}

impl MheSecretKey {
    pub fn params(&self) -> &MheParams {
        &self.params
    }

    pub fn e_sk(&self) -> &[u8] {
        &self.e_sk
    }

    /// The LWE key under which extracted columns decrypt.
    pub fn lwe_key(&self) -> LweSecretKey {
        LweSecretKey::from_bits(self.e_sk.clone()).expect("binary key")
    }

    /// `sk · C[:, col] mod Q'`.
    fn column_phase(&self, ct: &MheCiphertext, col: usize) -> u64 {
        let m = self.params.cols();
        let n = self.params.n;
        let mut acc = ct.data[n * m + col];
        for i in 0..n {
            if self.e_sk[i] == 1 {
                acc = acc.wrapping_sub(ct.data[i * m + col]);
            }
        }
        acc & self.params.mask()
    }

    pub fn decrypt(&self, ct: &MheCiphertext) -> Result<u8> {
        if ct.params.log_q != self.params.log_q || ct.params.n != self.params.n {
            return Err(Error::ParamsMismatch("MHE key and ciphertext differ".into()));
        }
        let phase = self.column_phase(ct, self.params.cols() - 1);
        // closer to Q'/2 than to 0
        let dist = centered(phase, self.params.log_q).unsigned_abs();
        Ok(u8::from(dist > self.params.q() / 4))
    }

    /// Largest `|sk·C - μ·sk·G|` over all columns (test oracle).
    pub fn measured_noise(&self, ct: &MheCiphertext, mu: u8) -> u64 {
        let lq = self.params.log_q as usize;
        let n = self.params.n;
        (0..self.params.cols())
            .map(|col| {
                let row = col / lq;
                let coeff = if row == n { 1 } else { 0u64.wrapping_sub(self.e_sk[row] as u64) };
                let gadget = if mu == 1 { coeff.wrapping_mul(1u64 << (col % lq)) } else { 0 };
                let err = self.column_phase(ct, col).wrapping_sub(gadget);
                centered(err, self.params.log_q).unsigned_abs()
            })
            .max()
            .unwrap_or(0)
    }
}

impl MhePublicKey {
    pub fn params(&self) -> &MheParams {
        &self.params
    }

    pub fn encrypt<R: Rng + ?Sized>(&self, mu: u8, rng: &mut R) -> Result<MheCiphertext> {
        if mu > 1 {
            return Err(Error::PlaintextOutOfRange { value: mu as u64, modulus: 2 });
        }
        let p = self.params;
        let (r, n, m) = (p.rows(), p.n, p.cols());
        let mask = p.mask();
        let s: Vec<u64> = (0..n * m).map(|_| rng.gen::<u64>() & mask).collect();
        let gauss = DiscreteGaussian::new(p.beta_init);
        let mut data = vec![0u64; r * m];
        for i in 0..r {
            for j in 0..m {
                let mut acc = gauss.sample(rng) as u64;
                for k in 0..n {
                    acc = acc.wrapping_add(self.a_prime[i * n + k].wrapping_mul(s[k * m + j]));
                }
                data[i * m + j] = acc & mask;
            }
        }
        let mut ct = MheCiphertext { data, params: p, noise: p.beta_init as f64 };
        if mu == 1 {
            ct.add_gadget(1);
        }
        Ok(ct)
    }
}

impl MheCiphertext {
    /// Noiseless `μ·G`.
    pub fn trivial(params: MheParams, mu: u8) -> Self {
        let mut ct = MheCiphertext { data: vec![0; params.rows() * params.cols()], params, noise: 0.0 };
        if mu & 1 == 1 {
            ct.add_gadget(1);
        }
        ct
    }

    /// Adds `sign·G` in place.
    fn add_gadget(&mut self, sign: i64) {
        let lq = self.params.log_q as usize;
        let m = self.params.cols();
        let mask = self.params.mask();
        for i in 0..self.params.rows() {
            for t in 0..lq {
                let idx = i * m + i * lq + t;
                self.data[idx] = self.data[idx].wrapping_add((sign as u64).wrapping_mul(1u64 << t)) & mask;
            }
        }
    }

    pub fn data(&self) -> &[u64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.data[row * self.params.cols() + col]
    }

    fn check(&self, other: &MheCiphertext) -> Result<()> {
        if self.params.log_q != other.params.log_q || self.params.n != other.params.n {
            return Err(Error::ParamsMismatch("MHE ciphertexts use different parameters".into()));
        }
        Ok(())
    }

    /// `self · G^{-1}(other)` without materializing the bit matrix.
    fn gadget_product(&self, other: &MheCiphertext) -> Vec<u64> {
        let (r, m) = (self.params.rows(), self.params.cols());
        let lq = self.params.log_q as usize;
        let mut out = vec![0u64; r * m];
        for j in 0..m {
            for row in 0..r {
                let mut v = other.data[row * m + j];
                let mut t = 0;
                while v != 0 {
                    let tz = v.trailing_zeros() as usize;
                    t += tz;
                    let k = row * lq + t;
                    for i in 0..r {
                        out[i * m + j] = out[i * m + j].wrapping_add(self.data[i * m + k]);
                    }
                    v >>= tz;
                    v >>= 1;
                    t += 1;
                }
            }
        }
        let mask = self.params.mask();
        out.iter_mut().for_each(|x| *x &= mask);
        out
    }

    fn with(&self, data: Vec<u64>, noise: f64) -> MheCiphertext {
        MheCiphertext { data, params: self.params, noise }
    }

    /// Homomorphic AND, `C_a · G^{-1}(C_b)`.
    pub fn and(&self, other: &MheCiphertext) -> Result<MheCiphertext> {
        self.check(other)?;
        let m = self.params.cols() as f64;
        Ok(self.with(self.gadget_product(other), m * self.noise + other.noise))
    }

    /// `G - C_0 · G^{-1}(C_1)`.
    pub fn nand(&self, other: &MheCiphertext) -> Result<MheCiphertext> {
        Ok(self.and(other)?.not())
    }

    pub fn not(&self) -> MheCiphertext {
        let mask = self.params.mask();
        let mut ct = self.with(self.data.iter().map(|&x| x.wrapping_neg() & mask).collect(), self.noise);
        ct.add_gadget(1);
        ct
    }

    /// `C_a + C_b - 2 C_a G^{-1}(C_b)`: XOR that stays a bit encryption.
    pub fn xor(&self, other: &MheCiphertext) -> Result<MheCiphertext> {
        self.check(other)?;
        let prod = self.gadget_product(other);
        let mask = self.params.mask();
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .zip(&prod)
            .map(|((&a, &b), &p)| a.wrapping_add(b).wrapping_sub(p.wrapping_mul(2)) & mask)
            .collect();
        let m = self.params.cols() as f64;
        Ok(self.with(data, (2.0 * m + 1.0) * self.noise + other.noise))
    }

    /// Plain sum `C_a + C_b` (encrypts `μ_a + μ_b` over the integers).
    pub fn add(&self, other: &MheCiphertext) -> Result<MheCiphertext> {
        self.check(other)?;
        let mask = self.params.mask();
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a.wrapping_add(b) & mask).collect();
        Ok(self.with(data, self.noise + other.noise))
    }

    /// XOR with a public bit: `NOT` when `bit = 1`.
    pub fn xor_plain(&self, bit: u8) -> MheCiphertext {
        if bit & 1 == 1 {
            self.not()
        } else {
            self.clone()
        }
    }

    /// Bound on the phase error of any extracted column.
    pub fn phase_noise_bound(&self) -> f64 {
        (self.params.n + 1) as f64 * self.noise
    }

    /// True when the ledger has passed the accumulated-noise budget.
    pub fn exceeds_budget(&self) -> bool {
        self.noise > self.params.beta_acc
    }

    /// Column `k` from the right, an LWE ciphertext under `e_sk` whose
    /// plaintext scale is `Q'/2^k`.
    pub fn extract_lwe(&self, k: u32) -> Result<LweCiphertext> {
        let lq = self.params.log_q;
        if k == 0 || k > lq {
            return Err(Error::LevelOutOfRange { level: k, max: lq });
        }
        let n = self.params.n;
        let col = self.params.cols() - k as usize;
        let params = LweParams::derived(lq, k, n)?;
        Ok(LweCiphertext {
            a: (0..n).map(|i| self.get(i, col)).collect(),
            b: self.get(n, col),
            params,
            noise_bound: self.phase_noise_bound(),
        })
    }

    /// The conversion to LWE: the last column, scale `Q'/2`.
    pub fn convert(&self) -> LweCiphertext {
        self.extract_lwe(1).expect("level 1 always exists")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut out = Vec::with_capacity(36 + 8 * self.data.len());
        out.extend_from_slice(b"QMHE");
        out.extend_from_slice(&p.log_q.to_le_bytes());
        out.extend_from_slice(&(p.n as u32).to_le_bytes());
        out.extend_from_slice(&p.beta_init.to_le_bytes());
        out.extend_from_slice(&p.beta_acc.to_bits().to_le_bytes());
        out.extend_from_slice(&self.noise.to_bits().to_le_bytes());
        for &x in &self.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<MheCiphertext> {
        let mut r = ByteReader::new(bytes);
        r.magic(b"QMHE")?;
        let log_q = r.u32()?;
        let n = r.u32()? as usize;
        let beta_init = r.u64()?;
        let beta_acc = f64::from_bits(r.u64()?);
        let noise = f64::from_bits(r.u64()?);
        let params = MheParams::new(log_q, n, beta_init, beta_acc)?;
        let len = params.rows() * params.cols();
        let data = (0..len).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        if data.iter().any(|&x| x > params.mask()) {
            return Err(Error::Malformed("MHE entry not reduced mod Q'".into()));
        }
        Ok(MheCiphertext { data, params, noise })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup(seed: u64) -> (MheSecretKey, MhePublicKey, ChaCha20Rng) {
        let p = MheParams::new(32, 3, 4, 1e6).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (sk, pk) = keygen(&p, &mut rng);
        (sk, pk, rng)
    }

    #[test]
    fn roundtrip_bits() {
        let (sk, pk, mut rng) = setup(1);
        for _ in 0..1000 {
            let mu = rng.gen_range(0..2u8);
            let ct = pk.encrypt(mu, &mut rng).unwrap();
            assert_eq!(sk.decrypt(&ct).unwrap(), mu);
            assert!(sk.measured_noise(&ct, mu) as f64 <= ct.phase_noise_bound());
        }
        assert!(pk.encrypt(2, &mut rng).is_err());
    }

    #[test]
    fn nand_truth_table() {
        let (sk, pk, mut rng) = setup(2);
        for a in 0..2u8 {
            for b in 0..2u8 {
                let ca = pk.encrypt(a, &mut rng).unwrap();
                let cb = pk.encrypt(b, &mut rng).unwrap();
                let out = ca.nand(&cb).unwrap();
                assert_eq!(sk.decrypt(&out).unwrap(), 1 - (a & b));
                assert!(sk.measured_noise(&out, 1 - (a & b)) as f64 <= out.phase_noise_bound());
                assert_eq!(sk.decrypt(&ca.xor(&cb).unwrap()).unwrap(), a ^ b);
                assert_eq!(sk.decrypt(&ca.and(&cb).unwrap()).unwrap(), a & b);
            }
        }
    }

    #[test]
    fn nand_chain_stays_within_ledger() {
        let (sk, pk, mut rng) = setup(3);
        let mut acc = pk.encrypt(1, &mut rng).unwrap();
        let mut bit = 1u8;
        for _ in 0..3 {
            let fresh_bit = rng.gen_range(0..2u8);
            let fresh = pk.encrypt(fresh_bit, &mut rng).unwrap();
            // fresh operand on the left keeps the growth additive
            acc = fresh.nand(&acc).unwrap();
            bit = 1 - (bit & fresh_bit);
            assert_eq!(sk.decrypt(&acc).unwrap(), bit);
            assert!(sk.measured_noise(&acc, bit) as f64 <= acc.phase_noise_bound());
        }
    }

    #[test]
    fn extraction_levels() {
        let (sk, pk, mut rng) = setup(4);
        let lwe_key = sk.lwe_key();
        let one = pk.encrypt(1, &mut rng).unwrap();
        let zero = pk.encrypt(0, &mut rng).unwrap();
        for k in 1..=32 {
            let c1 = one.extract_lwe(k).unwrap();
            let c0 = zero.extract_lwe(k).unwrap();
            let target = 1u64 << (32 - k);
            let err = centered(c1.phase(&lwe_key).unwrap().wrapping_sub(target), 32);
            assert!(err.unsigned_abs() as f64 <= c1.noise_bound);
            assert!(centered(c0.phase(&lwe_key).unwrap(), 32).unsigned_abs() as f64 <= c0.noise_bound);
            if k < 28 {
                assert_eq!(c1.decrypt(&lwe_key).unwrap(), 1);
                assert_eq!(c0.decrypt(&lwe_key).unwrap(), 0);
            }
            if k > 1 {
                let doubled = c1.scale(2);
                let prev = one.extract_lwe(k - 1).unwrap();
                let diff = centered(doubled.phase(&lwe_key).unwrap().wrapping_sub(prev.phase(&lwe_key).unwrap()), 32);
                assert!(diff.unsigned_abs() as f64 <= 2.0 * c1.noise_bound + prev.noise_bound);
            }
        }
        assert!(one.extract_lwe(0).is_err());
        assert!(one.extract_lwe(33).is_err());
        assert_eq!(one.convert(), one.extract_lwe(1).unwrap());
    }

    #[test]
    fn trivial_and_not() {
        let (sk, pk, mut rng) = setup(5);
        let p = *pk.params();
        assert_eq!(sk.decrypt(&MheCiphertext::trivial(p, 1)).unwrap(), 1);
        let z = pk.encrypt(0, &mut rng).unwrap();
        let o = pk.encrypt(1, &mut rng).unwrap();
        assert_eq!(sk.decrypt(&z.nand(&o).unwrap()).unwrap(), 1);
        assert_eq!(sk.decrypt(&o.not()).unwrap(), 0);
        assert_eq!(sk.decrypt(&z.xor_plain(1)).unwrap(), 1);
    }

    #[test]
    fn bytes_roundtrip() {
        let (_, pk, mut rng) = setup(6);
        let ct = pk.encrypt(1, &mut rng).unwrap();
        assert_eq!(MheCiphertext::from_bytes(&ct.to_bytes()).unwrap(), ct);
        assert!(MheCiphertext::from_bytes(&ct.to_bytes()[1..]).is_err());
    }
}
