use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::db::Database;
use super::message::{decode_mhe, decode_paillier, encode_mhe, Party, PirMessage, Transcript};
use super::qcpir::{reconstruct_word, server_circuit, PirOutcome, ServerStats, SessionSeeds};
use super::transport::{link_pair, Link, TransportKind};
use crate::error::{Error, Result};
use crate::lattice::{mhe, MheCiphertext, MheParams, MhePublicKey, MheSecretKey};
use crate::paillier::{PaillierCiphertext, PaillierKeys};
use crate::qfhe::{CrotAuthority, Evaluator, PaillierCnot, PaillierConverter};

pub const CONVERTER_TAG: &str = "oracle-assisted";

/// Client: MHE and Paillier secrets; answers every conversion request.
pub struct PaillierQpirClient {
    sk: MheSecretKey,
    pk: MhePublicKey,
    keys: PaillierKeys,
    index_bits: usize,
    rng: ChaCha20Rng,
}

impl PaillierQpirClient {
    pub fn new(sk: MheSecretKey, pk: MhePublicKey, keys: PaillierKeys, index_bits: usize, seed: u64) -> Self {
        PaillierQpirClient { sk, pk, keys, index_bits, rng: ChaCha20Rng::seed_from_u64(seed) }
    }

    /// `m ⊕ a` in the clear and `Enc(a)`.
    pub fn query(&mut self, m: u64) -> Result<PirMessage> {
        if m >> self.index_bits != 0 {
            return Err(Error::IndexOutOfRange { index: m, size: 1 << self.index_bits });
        }
        let a: Vec<u8> = (0..self.index_bits).map(|_| self.rng.gen_range(0..2)).collect();
        let masked_index = a.iter().enumerate().map(|(k, &ak)| ((m >> k) & 1) as u8 ^ ak).collect();
        let keys: Vec<MheCiphertext> = a.iter().map(|&ak| self.pk.encrypt(ak, &mut self.rng)).collect::<Result<_>>()?;
        Ok(PirMessage::MaskedQuery { masked_index, keys: encode_mhe(&keys) })
    }

    /// Decrypts the MHE bits and re-encrypts them under Paillier, attaching
    /// MHE encryptions of the bits of `λ` and `μ`.
    pub fn convert(&mut self, req: &PirMessage) -> Result<PirMessage> {
        let bits = match req {
            PirMessage::ConversionRequest { bits, .. } => decode_mhe(bits)?,
            other => return Err(Error::Malformed(format!("expected ConversionRequest, got {}", other.kind()))),
        };
        let mut paillier = Vec::with_capacity(bits.len());
        for b in &bits {
            let s = self.sk.decrypt(b)?;
            paillier.push(self.keys.pk.encrypt_random(s as u64, &mut self.rng)?.to_hex());
        }
        let width = self.keys.n().bits();
        let mut key_bits = Vec::with_capacity(2 * width as usize);
        for v in [&self.keys.lambda, &self.keys.mu] {
            for k in 0..width {
                key_bits.push(self.pk.encrypt(v.bit(k) as u8, &mut self.rng)?);
            }
        }
        let modulus = u64::try_from(self.keys.n()).map_err(|_| Error::Conversion("modulus too wide".into()))?;
        Ok(PirMessage::ConversionReply { paillier, modulus, encrypted_keys: encode_mhe(&key_bits) })
    }

    pub fn reconstruct(&self, answer: &PirMessage) -> Result<u64> {
        reconstruct_word(&self.sk, answer)
    }
}

/// Server: evaluates the QRAM circuit, running the Paillier encrypted CNOT
/// for each Toffoli. `converter` stands in for homomorphic Paillier decryption.
pub struct PaillierQpirServer {
    db: Database,
    qram_m: usize,
    converter: PaillierConverter,
    rng: ChaCha20Rng,
}

impl PaillierQpirServer {
    pub fn new(db: Database, qram_m: usize, converter: PaillierConverter, seed: u64) -> Self {
        PaillierQpirServer { db, qram_m, converter, rng: ChaCha20Rng::seed_from_u64(seed) }
    }

    /// Runs the server side over `link`; returns the evaluated shape and the
    /// NAND count a genuine conversion would have cost.
    pub fn serve(&mut self, link: &mut dyn Link, auth: &mut CrotAuthority, paillier_pk: &crate::paillier::PaillierPublicKey) -> Result<(ServerStats, u64)> {
        let (masked, keys) = match PirMessage::from_bytes(&link.recv()?)? {
            PirMessage::MaskedQuery { masked_index, keys } => (masked_index, decode_mhe(&keys)?),
            other => return Err(Error::Malformed(format!("expected MaskedQuery, got {}", other.kind()))),
        };
        if masked.len() != self.db.index_bits() || masked.iter().any(|&b| b > 1) {
            return Err(Error::Malformed("masked index has the wrong shape".into()));
        }
        let physical = masked.iter().enumerate().map(|(k, &b)| (b as u64) << k).sum();
        let mut sc = server_circuit(&self.db, self.qram_m, physical, keys, *auth.params())?;
        let modulus = u64::try_from(&paillier_pk.n).map_err(|_| Error::Conversion("modulus too wide".into()))?;
        let request = |bits: &[MheCiphertext]| -> Result<Vec<PaillierCiphertext>> {
            let req = PirMessage::ConversionRequest { bits: encode_mhe(bits), converter: CONVERTER_TAG.into() };
            link.send(&req.to_bytes())?;
            match PirMessage::from_bytes(&link.recv()?)? {
                PirMessage::ConversionReply { paillier, modulus: m, .. } if m == modulus => decode_paillier(&paillier, m),
                PirMessage::ConversionReply { modulus: m, .. } => Err(Error::Conversion(format!("reply under modulus {m}, expected {modulus}"))),
                other => Err(Error::Malformed(format!("expected ConversionReply, got {}", other.kind()))),
            }
        };
        let backend = PaillierCnot::new(paillier_pk.clone(), self.converter.clone(), request);
        let mut ev = Evaluator::new(backend);
        ev.circuit(auth, &mut sc.ms, &sc.circuit)?;
        let nand = ev.backend.nand_cost();
        drop(ev);
        let vals = sc.ms.state.measure(&sc.output, &mut self.rng)?;
        let word = vals.iter().enumerate().map(|(b, &v)| (v as u64) << b).sum();
        let answer = PirMessage::Answer { word, mask: encode_mhe(&sc.ms.x_keys(&sc.output)) };
        link.send(&answer.to_bytes())?;
        Ok((sc.stats, nand))
    }
}

#[derive(Debug, Clone)]
pub struct PaillierPirOutcome {
    pub pir: PirOutcome,
    /// NAND gates a homomorphic Paillier decryption would need.
    pub conversion_nand_cost: u64,
}

/// One Paillier-QPIR session; `(p, q)` are the client's toy Paillier primes.
pub fn paillier_qpir_run(
    db: &Database,
    i: u64,
    params: MheParams,
    pq: (u64, u64),
    qram_m: usize,
    transport: TransportKind,
    seeds: SessionSeeds,
) -> Result<PaillierPirOutcome> {
    let mut krng = ChaCha20Rng::seed_from_u64(seeds.keygen);
    let (sk, pk) = mhe::keygen(&params, &mut krng);
    let keys = PaillierKeys::generate(pq.0, pq.1)?;
    let mut auth = CrotAuthority::new(sk.clone(), pk.clone(), seeds.authority);
    let mut client = PaillierQpirClient::new(sk, pk, keys.clone(), db.index_bits(), seeds.client);
    let paillier_pk = keys.pk.clone();
    let mut server = PaillierQpirServer::new(db.clone(), qram_m, PaillierConverter::new(keys), seeds.server);
    let (mut c_link, mut s_link) = link_pair(transport)?;
    let mut transcript = Transcript::new(seeds.to_map());

    let (word, stats, nand) = std::thread::scope(|s| -> Result<(u64, ServerStats, u64)> {
        let handle = s.spawn(|| server.serve(s_link.as_mut(), &mut auth, &paillier_pk));
        let client_side = (|| -> Result<u64> {
            let q = client.query(i)?;
            transcript.record(Party::Client, &q);
            c_link.send(&q.to_bytes())?;
            loop {
                let msg = PirMessage::from_bytes(&c_link.recv()?)?;
                transcript.record(Party::Server, &msg);
                match msg {
                    PirMessage::ConversionRequest { .. } => {
                        let reply = client.convert(&msg)?;
                        transcript.record(Party::Client, &reply);
                        c_link.send(&reply.to_bytes())?;
                    }
                    PirMessage::Answer { .. } => return client.reconstruct(&msg),
                    other => return Err(Error::Malformed(format!("unexpected {}", other.kind()))),
                }
            }
        })();
        // a failed client drops its link so the server unblocks
        drop(c_link);
        let served = handle.join().map_err(|_| Error::Other("server thread panicked".into()))?;
        let word = client_side?;
        let (stats, nand) = served?;
        Ok((word, stats, nand))
    })?;
    transcript.verdict = Some(format!("index {i} -> word {word}"));
    Ok(PaillierPirOutcome {
        pir: PirOutcome { word, transcript, stats, audit: auth.log().to_vec(), counts: auth.counts() },
        conversion_nand_cost: nand,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_indices_n4() {
        let params = MheParams::new(32, 2, 4, 1e7).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let db = Database::random(4, 2, &mut rng).unwrap();
        let mut rounds = Vec::new();
        for i in 0..4 {
            let out = paillier_qpir_run(&db, i, params, (3, 5), 4, TransportKind::InProcess, SessionSeeds::from_master(i)).unwrap();
            assert_eq!(out.pir.word, db.get(i).unwrap());
            let t = &out.pir.transcript;
            assert_eq!(t.rounds(), out.pir.stats.toffoli);
            assert_eq!(t.count("ConversionRequest"), out.pir.stats.toffoli);
            assert_eq!(out.pir.counts.convert, 3 * out.pir.stats.toffoli);
            assert!(out.conversion_nand_cost > 0);
            rounds.push(t.rounds());
        }
        assert!(rounds.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn out_of_range_index_is_an_error() {
        let params = MheParams::new(32, 2, 4, 1e7).unwrap();
        let db = Database::new(vec![1, 0], 1).unwrap();
        assert!(paillier_qpir_run(&db, 2, params, (3, 5), 2, TransportKind::InProcess, SessionSeeds::from_master(0)).is_err());
    }
}
