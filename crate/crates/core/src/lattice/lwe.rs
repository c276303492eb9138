use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gaussian::DiscreteGaussian;
use super::params::{centered, round_div, LweParams};
use crate::error::{Error, Result};

/// Binary LWE secret key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LweSecretKey {
    bits: Vec<u8>,
}

impl LweSecretKey {
    pub fn generate<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        LweSecretKey { bits: (0..n).map(|_| rng.gen_range(0..2u8)).collect() }
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidKey("LWE secret key entries must be bits".into()));
        }
        if bits.is_empty() {
            return Err(Error::InvalidKey("empty LWE secret key".into()));
        }
        Ok(LweSecretKey { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }
}

/// `lwe_keygen`: uniform binary key of length `params.n`.
pub fn keygen<R: Rng + ?Sized>(params: &LweParams, rng: &mut R) -> LweSecretKey {
    LweSecretKey::generate(params.n, rng)
}

/// LWE ciphertext `(a, b = a·s + m·floor(Q/L) + e)` with a worst-case noise ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LweCiphertext {
    pub a: Vec<u64>,
    pub b: u64,
    pub params: LweParams,
    pub noise_bound: f64,
}

impl LweCiphertext {
    /// The all-zero ciphertext: a noiseless encryption of 0.
    pub fn zero(params: LweParams) -> Self {
        LweCiphertext { a: vec![0; params.n], b: 0, params, noise_bound: 0.0 }
    }

    /// Noiseless encoding of a public phase value `(0, value)`.
    pub fn trivial(params: LweParams, value: u64) -> Self {
        LweCiphertext { a: vec![0; params.n], b: value & params.mask(), params, noise_bound: 0.0 }
    }

    fn check_key(&self, key: &LweSecretKey) -> Result<()> {
        if key.dim() != self.params.n {
            return Err(Error::ParamsMismatch(format!(
                "key dimension {} vs ciphertext dimension {}",
                key.dim(),
                self.params.n
            )));
        }
        Ok(())
    }

    /// Exact phase `b - a·s mod Q`.
    pub fn phase(&self, key: &LweSecretKey) -> Result<u64> {
        self.check_key(key)?;
        let dot = self
            .a
            .iter()
            .zip(key.bits())
            .filter(|(_, &s)| s == 1)
            .fold(0u64, |acc, (&a, _)| acc.wrapping_add(a));
        Ok(self.b.wrapping_sub(dot) & self.params.mask())
    }

    /// `floor((L/Q)(b - a·s))` rounded half-up, reduced mod `L`.
    pub fn decrypt(&self, key: &LweSecretKey) -> Result<u64> {
        let phase = self.phase(key)? as u128;
        let m = round_div(phase * self.params.l() as u128, self.params.q() as u128) as u64;
        Ok(m & (self.params.l() - 1))
    }

    /// Signed distance between the phase and the exact encoding of `m`.
    pub fn error_for(&self, key: &LweSecretKey, m: u64) -> Result<i64> {
        let phase = self.phase(key)?;
        let encoded = m.wrapping_mul(self.params.delta());
        Ok(centered(phase.wrapping_sub(encoded), self.params.log_q))
    }

    pub fn add(&self, other: &LweCiphertext) -> Result<LweCiphertext> {
        self.combine(other, false)
    }

    pub fn sub(&self, other: &LweCiphertext) -> Result<LweCiphertext> {
        self.combine(other, true)
    }

    fn combine(&self, other: &LweCiphertext, negate: bool) -> Result<LweCiphertext> {
        if self.params != other.params {
            return Err(Error::ParamsMismatch(format!("{:?} vs {:?}", self.params, other.params)));
        }
        let mask = self.params.mask();
        let op = |x: u64, y: u64| if negate { x.wrapping_sub(y) } else { x.wrapping_add(y) } & mask;
        Ok(LweCiphertext {
            a: self.a.iter().zip(&other.a).map(|(&x, &y)| op(x, y)).collect(),
            b: op(self.b, other.b),
            params: self.params,
            noise_bound: self.noise_bound + other.noise_bound,
        })
    }

    /// Multiplies by a public integer; the ledger scales by `|k|`.
    pub fn scale(&self, k: i64) -> LweCiphertext {
        let mask = self.params.mask();
        let km = k as u64;
        LweCiphertext {
            a: self.a.iter().map(|&x| x.wrapping_mul(km) & mask).collect(),
            b: self.b.wrapping_mul(km) & mask,
            params: self.params,
            noise_bound: self.noise_bound * k.unsigned_abs() as f64,
        }
    }

    /// Same coefficients reinterpreted in another plaintext space.
    pub fn reinterpret(&self, log_l: u32) -> Result<LweCiphertext> {
        Ok(LweCiphertext { params: self.params.with_plaintext_bits(log_l)?, ..self.clone() })
    }

    /// True when the ledger no longer guarantees correct decryption.
    pub fn noise_flagged(&self) -> bool {
        self.noise_bound >= self.params.decryption_margin()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(36 + 8 * (self.a.len() + 1));
        out.extend_from_slice(b"QLWE");
        out.extend_from_slice(&self.params.log_q.to_le_bytes());
        out.extend_from_slice(&self.params.log_l.to_le_bytes());
        out.extend_from_slice(&(self.params.n as u32).to_le_bytes());
        out.extend_from_slice(&self.params.noise_bound.to_le_bytes());
        out.extend_from_slice(&self.noise_bound.to_bits().to_le_bytes());
        for &x in self.a.iter().chain(std::iter::once(&self.b)) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<LweCiphertext> {
        let mut r = ByteReader::new(bytes);
        r.magic(b"QLWE")?;
        let log_q = r.u32()?;
        let log_l = r.u32()?;
        let n = r.u32()? as usize;
        let b_fresh = r.u64()?;
        let noise_bound = f64::from_bits(r.u64()?);
        let mut params = LweParams::derived(log_q, log_l, n)?;
        params.noise_bound = b_fresh;
        let a = (0..n).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let b = r.u64()?;
        r.finish()?;
        if a.iter().chain(std::iter::once(&b)).any(|&x| x > params.mask()) {
            return Err(Error::Malformed("LWE coefficient not reduced mod Q".into()));
        }
        Ok(LweCiphertext { a, b, params, noise_bound })
    }
}

/// `lwe_encrypt` in secret-key form: uniform `a`, Gaussian `e`, ledger `B`.
pub fn encrypt<R: Rng + ?Sized>(key: &LweSecretKey, m: u64, params: &LweParams, rng: &mut R) -> Result<LweCiphertext> {
    let e = DiscreteGaussian::new(params.noise_bound).sample(rng);
    let mut ct = encrypt_with_error(key, m, e, params, rng)?;
    ct.noise_bound = params.noise_bound as f64;
    Ok(ct)
}

/// Test hook: secret-key encryption with a caller-chosen error term.
pub fn encrypt_with_error<R: Rng + ?Sized>(
    key: &LweSecretKey,
    m: u64,
    e: i64,
    params: &LweParams,
    rng: &mut R,
) -> Result<LweCiphertext> {
    let a: Vec<u64> = (0..params.n).map(|_| rng.gen::<u64>() & params.mask()).collect();
    encrypt_explicit(key, m, &a, e, params)
}

/// Fully explicit encryption: `b = a·s + e + floor(Q/L)·m mod Q`.
pub fn encrypt_explicit(key: &LweSecretKey, m: u64, a: &[u64], e: i64, params: &LweParams) -> Result<LweCiphertext> {
    if m >= params.l() {
        return Err(Error::PlaintextOutOfRange { value: m, modulus: params.l() });
    }
    if a.len() != params.n || key.dim() != params.n {
        return Err(Error::ParamsMismatch("vector length differs from n".into()));
    }
    let mask = params.mask();
    let dot = a
        .iter()
        .zip(key.bits())
        .filter(|(_, &s)| s == 1)
        .fold(0u64, |acc, (&x, _)| acc.wrapping_add(x));
    let b = dot
        .wrapping_add(e as u64)
        .wrapping_add(params.delta().wrapping_mul(m))
        & mask;
    Ok(LweCiphertext {
        a: a.iter().map(|&x| x & mask).collect(),
        b,
        params: *params,
        noise_bound: e.unsigned_abs() as f64,
    })
}

/// Public key `(Ã, b̃ = Ã s + e)` with `t` rows.
#[derive(Debug, Clone)]
pub struct LwePublicKey {
    rows: Vec<Vec<u64>>,
    b: Vec<u64>,
    params: LweParams,
}

impl LwePublicKey {
    pub fn generate<R: Rng + ?Sized>(key: &LweSecretKey, params: &LweParams, t: usize, rng: &mut R) -> Result<Self> {
        let mut rows = Vec::with_capacity(t);
        let mut b = Vec::with_capacity(t);
        for _ in 0..t {
            let ct = encrypt(key, 0, params, rng)?;
            rows.push(ct.a);
            b.push(ct.b);
        }
        Ok(LwePublicKey { rows, b, params: *params })
    }

    /// Encrypts with a random subset sum `x^T Ã`; the ledger is `t·B`.
    pub fn encrypt<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> Result<LweCiphertext> {
        let params = self.params;
        if m >= params.l() {
            return Err(Error::PlaintextOutOfRange { value: m, modulus: params.l() });
        }
        let mut ct = LweCiphertext::trivial(params, params.delta().wrapping_mul(m));
        for (row, &bi) in self.rows.iter().zip(&self.b) {
            if rng.gen::<bool>() {
                for (acc, &x) in ct.a.iter_mut().zip(row) {
                    *acc = acc.wrapping_add(x) & params.mask();
                }
                ct.b = ct.b.wrapping_add(bi) & params.mask();
            }
        }
        ct.noise_bound = (self.rows.len() as u64 * params.noise_bound) as f64;
        Ok(ct)
    }
}

pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Malformed("truncated payload".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn magic(&mut self, tag: &[u8; 4]) -> Result<()> {
        if self.take(4)? != tag {
            return Err(Error::Malformed(format!("expected {} header", String::from_utf8_lossy(tag))));
        }
        Ok(())
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Malformed("trailing bytes".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    #[test]
    fn keygen_is_deterministic() {
        let p = LweParams::new(16, 4, 4, 2).unwrap();
        assert_eq!(keygen(&p, &mut rng(0)), keygen(&p, &mut rng(0)));
        let p1 = LweParams::new(16, 4, 1, 2).unwrap();
        assert_eq!(keygen(&p1, &mut rng(3)).dim(), 1);
    }

    #[test]
    fn key_bits_are_balanced() {
        let p = LweParams::new(16, 4, 1, 2).unwrap();
        let mut r = rng(11);
        let ones: u32 = (0..10_000).map(|_| keygen(&p, &mut r).bits()[0] as u32).sum();
        let mean = ones as f64 / 1e4;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn small_worked_example() {
        // Q=16, L=4, n=2, s=(1,0), a=(3,5), e=1, m=2: b = 3 + 1 + 4*2 = 12
        let p = LweParams::derived(4, 2, 2).unwrap();
        let s = LweSecretKey::from_bits(vec![1, 0]).unwrap();
        let ct = encrypt_explicit(&s, 2, &[3, 5], 1, &p).unwrap();
        assert_eq!(ct.b, 12);
        assert_eq!(ct.decrypt(&s).unwrap(), 2);
    }

    #[test]
    fn zero_message_zero_noise() {
        let p = LweParams::new(16, 4, 8, 3).unwrap();
        let s = keygen(&p, &mut rng(1));
        let ct = encrypt_with_error(&s, 0, 0, &p, &mut rng(2)).unwrap();
        assert_eq!(ct.decrypt(&s).unwrap(), 0);
        assert_eq!(ct.phase(&s).unwrap(), 0);
    }

    #[test]
    fn half_step_rounds_up() {
        // phase = delta/2 exactly -> rounds to 1
        let p = LweParams::derived(4, 2, 1).unwrap();
        let s = LweSecretKey::from_bits(vec![0]).unwrap();
        let ct = encrypt_explicit(&s, 0, &[0], 2, &p).unwrap();
        assert_eq!(ct.decrypt(&s).unwrap(), 1);
        let ct = encrypt_explicit(&s, 0, &[0], 1, &p).unwrap();
        assert_eq!(ct.decrypt(&s).unwrap(), 0);
    }

    #[test]
    fn noise_past_margin_breaks_decryption() {
        let p = LweParams::new(12, 3, 4, 4).unwrap();
        let s = keygen(&p, &mut rng(5));
        let margin = (p.delta() / 2) as i64;
        let mut r = rng(6);
        // boundary search: largest error still decrypting, first one failing
        let ok = (0..=margin).rev().find(|&e| encrypt_with_error(&s, 3, e, &p, &mut r).unwrap().decrypt(&s).unwrap() == 3);
        assert_eq!(ok, Some(margin - 1));
        assert_ne!(encrypt_with_error(&s, 3, margin, &p, &mut r).unwrap().decrypt(&s).unwrap(), 3);
    }

    #[test]
    fn rejects_out_of_range_plaintext() {
        let p = LweParams::new(16, 4, 4, 2).unwrap();
        let s = keygen(&p, &mut rng(0));
        assert!(matches!(encrypt(&s, 16, &p, &mut rng(1)), Err(Error::PlaintextOutOfRange { .. })));
    }

    #[test]
    fn roundtrip_many() {
        let p = LweParams::new(20, 4, 16, 8).unwrap();
        let mut r = rng(9);
        for _ in 0..1000 {
            let s = keygen(&p, &mut r);
            let m = r.gen_range(0..16);
            let ct = encrypt(&s, m, &p, &mut r).unwrap();
            assert_eq!(ct.decrypt(&s).unwrap(), m);
            assert!(ct.error_for(&s, m).unwrap().unsigned_abs() <= p.noise_bound);
        }
    }

    #[test]
    fn add_and_scale() {
        let p = LweParams::new(20, 4, 8, 8).unwrap();
        let mut r = rng(4);
        let s = keygen(&p, &mut r);
        let c1 = encrypt(&s, 5, &p, &mut r).unwrap();
        let c2 = encrypt(&s, 14, &p, &mut r).unwrap();
        let sum = c1.add(&c2).unwrap();
        assert_eq!(sum.decrypt(&s).unwrap(), (5 + 14) % 16);
        assert_eq!(
            sum.phase(&s).unwrap(),
            (c1.phase(&s).unwrap() + c2.phase(&s).unwrap()) & p.mask()
        );
        let z = encrypt(&s, 0, &p, &mut r).unwrap();
        assert_eq!(c1.add(&z).unwrap().decrypt(&s).unwrap(), 5);
        assert_eq!(c1.scale(0).decrypt(&s).unwrap(), 0);
        assert_eq!(c1.scale(3).decrypt(&s).unwrap(), 15);
        assert_eq!(c1.scale(-1).decrypt(&s).unwrap(), 11);
        let other = LweParams::new(20, 3, 8, 8).unwrap();
        assert!(c1.add(&LweCiphertext::zero(other)).is_err());
    }

    #[test]
    fn public_key_path() {
        let p = LweParams::new(24, 4, 8, 2).unwrap();
        let mut r = rng(12);
        let s = keygen(&p, &mut r);
        let pk = LwePublicKey::generate(&s, &p, 32, &mut r).unwrap();
        for m in 0..16 {
            let ct = pk.encrypt(m, &mut r).unwrap();
            assert_eq!(ct.decrypt(&s).unwrap(), m);
            assert!(ct.error_for(&s, m).unwrap().unsigned_abs() as f64 <= ct.noise_bound);
        }
    }

    #[test]
    fn bytes_roundtrip_and_reject_garbage() {
        let p = LweParams::new(20, 4, 3, 8).unwrap();
        let mut r = rng(2);
        let s = keygen(&p, &mut r);
        let ct = encrypt(&s, 7, &p, &mut r).unwrap();
        assert_eq!(LweCiphertext::from_bytes(&ct.to_bytes()).unwrap(), ct);
        let mut bad = ct.to_bytes();
        bad.push(0);
        assert!(LweCiphertext::from_bytes(&bad).is_err());
        assert!(LweCiphertext::from_bytes(&bad[..10]).is_err());
    }
}
