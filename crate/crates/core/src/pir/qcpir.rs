use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::db::Database;
use super::message::{decode_mhe, encode_mhe, Party, PirMessage, Transcript};
use super::transport::{link_pair, TransportKind};
use crate::error::{Error, Result};
use crate::lattice::{mhe, MheCiphertext, MheParams, MhePublicKey, MheSecretKey};
use crate::qfhe::{AuditEntry, AuthorityCounts, CrotAuthority, Evaluator, MaskedState, MheCnot};
use crate::qsim::{build_qram_circuit, QuantumState, SlotId};

/// Seeds of one protocol session; every random choice derives from these.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionSeeds {
    pub keygen: u64,
    pub client: u64,
    pub server: u64,
    pub authority: u64,
}

impl SessionSeeds {
    pub fn from_master(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        SessionSeeds { keygen: rng.gen(), client: rng.gen(), server: rng.gen(), authority: rng.gen() }
    }

    pub fn to_map(self) -> BTreeMap<String, u64> {
        [("keygen", self.keygen), ("client", self.client), ("server", self.server), ("authority", self.authority)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    /// Inverse of [`SessionSeeds::to_map`], e.g. from a transcript footer.
    pub fn from_map(m: &BTreeMap<String, u64>) -> Result<Self> {
        let get = |k: &str| m.get(k).copied().ok_or_else(|| Error::Malformed(format!("missing seed `{k}`")));
        Ok(SessionSeeds { keygen: get("keygen")?, client: get("client")?, server: get("server")?, authority: get("authority")? })
    }
}

/// Client side: holds the MHE secret key.
pub struct QcpirClient {
    sk: MheSecretKey,
    pk: MhePublicKey,
    index_bits: usize,
    rng: ChaCha20Rng,
}

impl QcpirClient {
    pub fn new(sk: MheSecretKey, pk: MhePublicKey, index_bits: usize, seed: u64) -> Self {
        QcpirClient { sk, pk, index_bits, rng: ChaCha20Rng::seed_from_u64(seed) }
    }

    pub fn query(&mut self, i: u64) -> Result<PirMessage> {
        if i >> self.index_bits != 0 {
            return Err(Error::IndexOutOfRange { index: i, size: 1 << self.index_bits });
        }
        let bits: Vec<MheCiphertext> =
            (0..self.index_bits).map(|k| self.pk.encrypt(((i >> k) & 1) as u8, &mut self.rng)).collect::<Result<_>>()?;
        Ok(PirMessage::Query { bits: encode_mhe(&bits) })
    }

    pub fn reconstruct(&self, answer: &PirMessage) -> Result<u64> {
        reconstruct_word(&self.sk, answer)
    }
}

pub(crate) fn reconstruct_word(sk: &MheSecretKey, answer: &PirMessage) -> Result<u64> {
    match answer {
        PirMessage::Answer { word, mask } => {
            let keys = decode_mhe(mask)?;
            let pad = keys.iter().enumerate().try_fold(0u64, |acc, (b, k)| Ok::<_, Error>(acc | (sk.decrypt(k)? as u64) << b))?;
            Ok(word ^ pad)
        }
        other => Err(Error::Malformed(format!("expected Answer, got {}", other.kind()))),
    }
}

/// Shape of the evaluated server circuit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServerStats {
    pub toffoli: usize,
    pub depth: usize,
    pub qubits: usize,
}

/// Masked `|i⟩|0⟩` with the QRAM circuit writing `DB_i` into the value register.
pub(crate) struct ServerCircuit {
    pub ms: MaskedState,
    pub circuit: crate::qsim::Circuit,
    pub output: Vec<SlotId>,
    pub stats: ServerStats,
}

pub(crate) fn server_circuit(db: &Database, qram_m: usize, physical_index: u64, x_keys: Vec<MheCiphertext>, params: MheParams) -> Result<ServerCircuit> {
    let l = db.index_bits();
    let w = db.word_bits();
    if x_keys.len() != l {
        return Err(Error::Malformed(format!("{} index bits for a database with {l}", x_keys.len())));
    }
    let index: Vec<SlotId> = (0..l).collect();
    let output: Vec<SlotId> = (l..l + w).collect();
    let qram = build_qram_circuit(db.entries(), w, qram_m, &index, &output, l + w)?;
    let total = l + w + qram.ancillas.len();
    let mut state = QuantumState::qubits(total);
    state.permute(|k| QuantumState::set_register(k, &index, physical_index));
    let zero = MheCiphertext::trivial(params, 0);
    let mut x = x_keys;
    x.resize(total, zero.clone());
    let ms = MaskedState::new(state, x, vec![zero; total])?;
    let stats = ServerStats { toffoli: qram.circuit.count("TOFFOLI") + qram.circuit.count("CSWAP"), depth: qram.circuit.depth(), qubits: total };
    Ok(ServerCircuit { ms, circuit: qram.circuit, output, stats })
}

/// Server side: the database, a QRAM memory budget and a CROT authority.
/// It never holds a decryption key.
pub struct QcpirServer {
    db: Database,
    qram_m: usize,
    rng: ChaCha20Rng,
}

impl QcpirServer {
    pub fn new(db: Database, qram_m: usize, seed: u64) -> Self {
        QcpirServer { db, qram_m, rng: ChaCha20Rng::seed_from_u64(seed) }
    }

    pub fn answer(&mut self, q: &PirMessage, auth: &mut CrotAuthority) -> Result<(PirMessage, ServerStats)> {
        let bits = match q {
            PirMessage::Query { bits } => decode_mhe(bits)?,
            other => return Err(Error::Malformed(format!("expected Query, got {}", other.kind()))),
        };
        // |0⟩ = X^s |s⟩: the encrypted index bits are the X keys
        let mut sc = server_circuit(&self.db, self.qram_m, 0, bits, *auth.params())?;
        Evaluator::new(MheCnot).circuit(auth, &mut sc.ms, &sc.circuit)?;
        let vals = sc.ms.state.measure(&sc.output, &mut self.rng)?;
        let word = vals.iter().enumerate().map(|(b, &v)| (v as u64) << b).sum();
        Ok((PirMessage::Answer { word, mask: encode_mhe(&sc.ms.x_keys(&sc.output)) }, sc.stats))
    }
}

#[derive(Debug, Clone)]
pub struct PirOutcome {
    pub word: u64,
    pub transcript: Transcript,
    pub stats: ServerStats,
    pub audit: Vec<AuditEntry>,
    pub counts: AuthorityCounts,
}

/// True when the authority log holds no key-disclosing operation.
pub fn audit_is_blind(log: &[AuditEntry]) -> bool {
    log.iter().all(|e| matches!(e.op, "CROT" | "ECNOT" | "REFRESH" | "CONVERT"))
}

/// One QCPIR session with client and server on separate threads.
pub fn qcpir_run(db: &Database, i: u64, params: MheParams, qram_m: usize, transport: TransportKind, seeds: SessionSeeds) -> Result<PirOutcome> {
    let mut krng = ChaCha20Rng::seed_from_u64(seeds.keygen);
    let (sk, pk) = mhe::keygen(&params, &mut krng);
    let mut auth = CrotAuthority::new(sk.clone(), pk.clone(), seeds.authority);
    let mut client = QcpirClient::new(sk, pk, db.index_bits(), seeds.client);
    let mut server = QcpirServer::new(db.clone(), qram_m, seeds.server);
    let (mut c_link, mut s_link) = link_pair(transport)?;
    let mut transcript = Transcript::new(seeds.to_map());

    let (word, stats) = std::thread::scope(|s| -> Result<(u64, ServerStats)> {
        let handle = s.spawn(|| -> Result<ServerStats> {
            let q = PirMessage::from_bytes(&s_link.recv()?)?;
            let (a, stats) = server.answer(&q, &mut auth)?;
            s_link.send(&a.to_bytes())?;
            Ok(stats)
        });
        let client_side = (|| -> Result<u64> {
            let q = client.query(i)?;
            transcript.record(Party::Client, &q);
            c_link.send(&q.to_bytes())?;
            let a = PirMessage::from_bytes(&c_link.recv()?)?;
            transcript.record(Party::Server, &a);
            client.reconstruct(&a)
        })();
        // a failed client drops its link so the server unblocks
        drop(c_link);
        let stats = handle.join().map_err(|_| Error::Other("server thread panicked".into()))?;
        let word = client_side?;
        Ok((word, stats?))
    })?;
    transcript.verdict = Some(format!("index {i} -> word {word}"));
    Ok(PirOutcome { word, transcript, stats, audit: auth.log().to_vec(), counts: auth.counts() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MheParams {
        MheParams::new(32, 2, 4, 1e7).unwrap()
    }

    #[test]
    fn every_index_small_databases() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for (n, w) in [(2usize, 1usize), (4, 1), (8, 3)] {
            let db = Database::random(n, w, &mut rng).unwrap();
            for i in 0..n as u64 {
                let out = qcpir_run(&db, i, params(), n, TransportKind::InProcess, SessionSeeds::from_master(i + 10 * n as u64)).unwrap();
                assert_eq!(out.word, db.get(i).unwrap(), "N = {n}, i = {i}");
                assert_eq!(out.transcript.rounds(), 1);
                assert!(audit_is_blind(&out.audit));
            }
        }
    }

    #[test]
    fn zero_database_answers_the_mask() {
        let db = Database::new(vec![0; 4], 2).unwrap();
        let mut krng = ChaCha20Rng::seed_from_u64(0);
        let (sk, pk) = mhe::keygen(&params(), &mut krng);
        let mut auth = CrotAuthority::new(sk.clone(), pk.clone(), 1);
        let mut client = QcpirClient::new(sk.clone(), pk, 2, 2);
        let mut server = QcpirServer::new(db, 4, 3);
        let (a, _) = server.answer(&client.query(3).unwrap(), &mut auth).unwrap();
        let PirMessage::Answer { word, mask } = &a else { panic!() };
        let pad: u64 = decode_mhe(mask).unwrap().iter().enumerate().map(|(b, k)| (sk.decrypt(k).unwrap() as u64) << b).sum();
        assert_eq!(*word, pad);
        assert_eq!(client.reconstruct(&a).unwrap(), 0);
        // flipping one answer bit flips one output bit
        let PirMessage::Answer { word, mask } = a else { panic!() };
        let tampered = PirMessage::Answer { word: word ^ 2, mask };
        assert_eq!(client.reconstruct(&tampered).unwrap(), 2);
        assert!(client.query(4).is_err());
    }

    #[test]
    fn socket_transport_and_replay() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let db = Database::random(4, 2, &mut rng).unwrap();
        let a = qcpir_run(&db, 2, params(), 4, TransportKind::Socket, SessionSeeds::from_master(5)).unwrap();
        let b = qcpir_run(&db, 2, params(), 4, TransportKind::InProcess, SessionSeeds::from_master(5)).unwrap();
        assert_eq!(a.word, db.get(2).unwrap());
        assert_eq!(a.transcript, b.transcript);
    }

    #[test]
    fn query_size_is_linear_in_index_bits() {
        let mut krng = ChaCha20Rng::seed_from_u64(0);
        let (sk, pk) = mhe::keygen(&params(), &mut krng);
        let sizes: Vec<usize> = [1usize, 2, 4, 8]
            .iter()
            .map(|&l| QcpirClient::new(sk.clone(), pk.clone(), l, 0).query(0).unwrap().to_bytes().len())
            .collect();
        // constant JSON framing plus a fixed cost per index bit
        let per_bit = sizes[1] - sizes[0];
        let overhead = sizes[0] - per_bit;
        for (l, s) in [1usize, 2, 4, 8].iter().zip(&sizes) {
            assert!(s.abs_diff(overhead + l * per_bit) <= 16, "{sizes:?}");
        }
    }
}
