//! Paillier encryption with the simplified key variant `g = N + 1`.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};

/// Moduli small enough to superpose over `Z_2 x Z*_N` in the simulator.
pub const TOY_MODULI: [u64; 4] = [15, 21, 33, 35];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaillierPublicKey {
    pub n: BigUint,
    pub n2: BigUint,
    pub g: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaillierKeys {
    pub p: BigUint,
    pub q: BigUint,
    pub lambda: BigUint,
    pub mu: BigUint,
    pub pk: PaillierPublicKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PaillierCiphertext {
    pub c: BigUint,
    pub n: BigUint,
}

fn is_prime(x: u64) -> bool {
    if x < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= x {
        if x % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

pub(crate) fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    let (a, m) = (BigInt::from(a.clone()), BigInt::from(m.clone()));
    let e = a.extended_gcd(&m);
    if !e.gcd.is_one() {
        return None;
    }
    e.x.mod_floor(&m).to_biguint()
}

fn ell(x: &BigUint, n: &BigUint) -> BigUint {
    (x - 1u32) / n
}

impl PaillierKeys {
    /// Simplified variant: `g = N+1`, `λ = φ(N)`, `μ = φ(N)^{-1} mod N`.
    pub fn generate(p: u64, q: u64) -> Result<Self> {
        if !is_prime(p) || !is_prime(q) {
            return Err(Error::InvalidKey(format!("{p} and {q} must both be prime")));
        }
        if p == q {
            return Err(Error::InvalidKey("p and q must be distinct".into()));
        }
        let (pb, qb) = (BigUint::from(p), BigUint::from(q));
        let n = &pb * &qb;
        let phi = (&pb - 1u32) * (&qb - 1u32);
        let mu = mod_inverse(&phi, &n).ok_or_else(|| {
            Error::InvalidKey(format!("gcd(N, φ(N)) != 1 for N = {n}; encryption is not bijective"))
        })?;
        let n2 = &n * &n;
        let g = &n + 1u32;
        Ok(PaillierKeys { p: pb, q: qb, lambda: phi, mu, pk: PaillierPublicKey { n, n2, g } })
    }

    /// General-`g` variant with `λ = lcm(p-1, q-1)`.
    pub fn generate_with_g(p: u64, q: u64, g: u64) -> Result<Self> {
        let base = Self::generate(p, q)?;
        let lambda = (&base.p - 1u32).lcm(&(&base.q - 1u32));
        let pk = PaillierPublicKey { g: BigUint::from(g), ..base.pk };
        let u = ell(&pk.g.modpow(&lambda, &pk.n2), &pk.n);
        let mu = mod_inverse(&u, &pk.n).ok_or_else(|| Error::InvalidKey(format!("g = {g} has wrong order")))?;
        Ok(PaillierKeys { lambda, mu, pk, ..base })
    }

    pub fn n(&self) -> &BigUint {
        &self.pk.n
    }

    pub fn decrypt(&self, ct: &PaillierCiphertext) -> Result<BigUint> {
        self.pk.check(ct)?;
        let u = ell(&ct.c.modpow(&self.lambda, &self.pk.n2), &self.pk.n);
        Ok((u * &self.mu) % &self.pk.n)
    }

    /// Recovers `(m, r)` with `Enc(m; r) = c` (simplified keys only).
    pub fn decompose(&self, ct: &PaillierCiphertext) -> Result<(BigUint, BigUint)> {
        let m = self.decrypt(ct)?;
        let n = &self.pk.n;
        let e = mod_inverse(n, &self.lambda).ok_or_else(|| Error::InvalidKey("N not invertible mod φ(N)".into()))?;
        let r = (&ct.c % n).modpow(&e, n);
        Ok((m, r))
    }
}

impl PaillierPublicKey {
    fn check(&self, ct: &PaillierCiphertext) -> Result<()> {
        if ct.n != self.n {
            return Err(Error::ParamsMismatch("ciphertext under a different Paillier modulus".into()));
        }
        Ok(())
    }

    /// `g^m · r^N mod N²`.
    pub fn encrypt(&self, m: &BigUint, r: &BigUint) -> Result<PaillierCiphertext> {
        if r.is_zero() || !r.gcd(&self.n).is_one() {
            return Err(Error::RandomnessNotCoprime);
        }
        let m = m % &self.n;
        let c = (self.g.modpow(&m, &self.n2) * r.modpow(&self.n, &self.n2)) % &self.n2;
        Ok(PaillierCiphertext { c, n: self.n.clone() })
    }

    pub fn encrypt_u64(&self, m: u64, r: u64) -> Result<PaillierCiphertext> {
        self.encrypt(&BigUint::from(m), &BigUint::from(r))
    }

    pub fn random_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        loop {
            let r = rng.gen_biguint_below(&self.n);
            if !r.is_zero() && r.gcd(&self.n).is_one() {
                return r;
            }
        }
    }

    pub fn encrypt_random<R: Rng + ?Sized>(&self, m: u64, rng: &mut R) -> Result<PaillierCiphertext> {
        let r = self.random_unit(rng);
        self.encrypt(&BigUint::from(m), &r)
    }

    /// Units of `Z_N` in increasing order.
    pub fn units(&self) -> Vec<u64> {
        let n: u64 = self.n.clone().try_into().expect("toy modulus");
        (1..n).filter(|r| r.gcd(&n) == 1).collect()
    }
}

impl PaillierCiphertext {
    fn n2(&self) -> BigUint {
        &self.n * &self.n
    }

    fn same(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::ParamsMismatch("Paillier moduli differ".into()));
        }
        Ok(())
    }

    /// Homomorphic addition: `c1 · c2 mod N²`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same(other)?;
        Ok(PaillierCiphertext { c: (&self.c * &other.c) % self.n2(), n: self.n.clone() })
    }

    /// Plaintext multiplication: `c^k mod N²`.
    pub fn plain_mult(&self, k: &BigUint) -> Self {
        PaillierCiphertext { c: self.c.modpow(k, &self.n2()), n: self.n.clone() }
    }

    /// Negation of the plaintext: `c^{-1} mod N²`.
    pub fn inverse(&self) -> Result<Self> {
        let c = mod_inverse(&self.c, &self.n2()).ok_or(Error::RandomnessNotCoprime)?;
        Ok(PaillierCiphertext { c, n: self.n.clone() })
    }

    pub fn to_hex(&self) -> String {
        self.c.to_str_radix(16)
    }

    pub fn from_hex(hex: &str, n: &BigUint) -> Result<Self> {
        let c = BigUint::parse_bytes(hex.as_bytes(), 16).ok_or_else(|| Error::Malformed("bad hex".into()))?;
        if c >= n * n || !c.gcd(n).is_one() {
            return Err(Error::Malformed("value outside Z*_{N²}".into()));
        }
        Ok(PaillierCiphertext { c, n: n.clone() })
    }
}

/// `c_{-2s0} = (Enc(s0)^{-1})^2`.
pub fn neg_two(c_s0: &PaillierCiphertext) -> Result<PaillierCiphertext> {
    let inv = c_s0.inverse()?;
    inv.add(&inv)
}

/// `Enc(m) · Enc(s0) · (1 + m(c_{-2s0} - 1))`: an encryption of `m ⊕ s0`.
pub fn xor_with_plain_bit(
    c_s0: &PaillierCiphertext,
    c_neg2s0: &PaillierCiphertext,
    m: u8,
    base_ct: &PaillierCiphertext,
) -> Result<PaillierCiphertext> {
    let out = base_ct.add(c_s0)?;
    if m & 1 == 1 {
        out.add(c_neg2s0)
    } else {
        Ok(out)
    }
}
