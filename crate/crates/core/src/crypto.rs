//! Counter-mode encryption over a pluggable block cipher, a keyed MAC, a
//! simulation-grade signature scheme, and the deterministic scenario key store.
//!
//! Counter mode only ever runs the forward direction of the block cipher:
//! decryption regenerates the same keystream and XORs it back out. The
//! [`BlockCipher`] trait therefore has no inverse operation at all.

use std::fmt;

use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::model::{CipherKind, NodeId};

pub const BLOCK_BYTES: usize = 16;

/// One 128-bit cipher block.
pub type Block = [u8; BLOCK_BYTES];

/// The 128-bit counter `C`. Block `i` of a message (1-based) is processed
/// with `C + i - 1`, wrapping modulo 2^128.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CounterValue(pub u128);

impl CounterValue {
    /// Counter for a frame: `route_id || seq` in the low 64 bits.
    pub fn for_frame(route_id: u32, seq: u32) -> CounterValue {
        CounterValue(((route_id as u128) << 32) | seq as u128)
    }

    /// Counter used for the 1-based block `index`.
    pub fn nth(self, index: u64) -> CounterValue {
        CounterValue(self.0.wrapping_add(index as u128).wrapping_sub(1))
    }

    pub fn to_block(self) -> Block {
        self.0.to_be_bytes()
    }
}

/// A keyed permutation on 128-bit blocks.
pub trait BlockCipher {
    fn encrypt_block(&self, block: &Block) -> Block;
}

/// Fully specified toy cipher: `rotate_left(B ^ K, 13) ^ K` on the big-endian
/// integer value of the block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestCipher {
    key: u128,
}

impl TestCipher {
    pub fn new(key: Block) -> TestCipher {
        TestCipher {
            key: u128::from_be_bytes(key),
        }
    }
}

impl BlockCipher for TestCipher {
    fn encrypt_block(&self, block: &Block) -> Block {
        let b = u128::from_be_bytes(*block);
        ((b ^ self.key).rotate_left(13) ^ self.key).to_be_bytes()
    }
}

/// AES-128.
#[derive(Clone)]
pub struct Aes128Cipher(aes::Aes128);

impl Aes128Cipher {
    pub fn new(key: Block) -> Aes128Cipher {
        Aes128Cipher(aes::Aes128::new(&GenericArray::from(key)))
    }
}

impl fmt::Debug for Aes128Cipher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Aes128Cipher(..)")
    }
}

impl BlockCipher for Aes128Cipher {
    fn encrypt_block(&self, block: &Block) -> Block {
        let mut b = GenericArray::from(*block);
        self.0.encrypt_block(&mut b);
        b.into()
    }
}

/// Either cipher instance, chosen per scenario.
#[derive(Debug, Clone)]
pub enum LinkCipher {
    Aes128(Aes128Cipher),
    Test(TestCipher),
}

impl LinkCipher {
    pub fn new(kind: CipherKind, key: Block) -> LinkCipher {
        match kind {
            CipherKind::Aes128 => LinkCipher::Aes128(Aes128Cipher::new(key)),
            CipherKind::Test => LinkCipher::Test(TestCipher::new(key)),
        }
    }
}

impl BlockCipher for LinkCipher {
    fn encrypt_block(&self, block: &Block) -> Block {
        match self {
            LinkCipher::Aes128(c) => c.encrypt_block(block),
            LinkCipher::Test(c) => c.encrypt_block(block),
        }
    }
}

/// Keystream blocks `E(C), E(C+1), ..., E(C+n-1)`. Depends only on the key and
/// counter, so it can be generated before any plaintext exists.
pub fn ctr_keystream<C: BlockCipher + ?Sized>(
    cipher: &C,
    counter: CounterValue,
    n_blocks: usize,
) -> Vec<Block> {
    (1..=n_blocks as u64)
        .map(|i| cipher.encrypt_block(&counter.nth(i).to_block()))
        .collect()
}

/// XORs a precomputed keystream into `data`. The keystream must cover at least
/// `data.len()` bytes.
pub fn xor_keystream(keystream: &[Block], data: &[u8]) -> Vec<u8> {
    assert!(
        keystream.len() * BLOCK_BYTES >= data.len(),
        "keystream shorter than data"
    );
    data.iter()
        .enumerate()
        .map(|(j, b)| b ^ keystream[j / BLOCK_BYTES][j % BLOCK_BYTES])
        .collect()
}

fn apply_at<C: BlockCipher + ?Sized>(
    cipher: &C,
    counter: CounterValue,
    first_block: u64,
    data: &mut [u8],
) {
    for (k, chunk) in data.chunks_mut(BLOCK_BYTES).enumerate() {
        let ks = cipher.encrypt_block(&counter.nth(first_block + k as u64).to_block());
        for (b, s) in chunk.iter_mut().zip(ks.iter()) {
            *b ^= s;
        }
    }
}

/// Counter-mode encryption. The final partial block uses a truncated keystream.
pub fn ctr_encrypt<C: BlockCipher + ?Sized>(
    cipher: &C,
    counter: CounterValue,
    plaintext: &[u8],
) -> Vec<u8> {
    let mut out = plaintext.to_vec();
    apply_at(cipher, counter, 1, &mut out);
    out
}

/// Counter-mode decryption: the same keystream XOR as encryption.
pub fn ctr_decrypt<C: BlockCipher + ?Sized>(
    cipher: &C,
    counter: CounterValue,
    ciphertext: &[u8],
) -> Vec<u8> {
    ctr_encrypt(cipher, counter, ciphertext)
}

/// Decrypts only the 1-based block `block_index` of a message.
pub fn ctr_decrypt_block<C: BlockCipher + ?Sized>(
    cipher: &C,
    counter: CounterValue,
    block_index: u64,
    ct_block: &Block,
) -> Block {
    assert!(block_index >= 1, "block indices are 1-based");
    let ks = cipher.encrypt_block(&counter.nth(block_index).to_block());
    let mut out = *ct_block;
    for (b, s) in out.iter_mut().zip(ks.iter()) {
        *b ^= s;
    }
    out
}

/// Encrypts the message in independent segments of `blocks_per_segment`
/// blocks on the rayon pool.
pub fn ctr_encrypt_parallel<C: BlockCipher + Sync + ?Sized>(
    cipher: &C,
    counter: CounterValue,
    plaintext: &[u8],
    blocks_per_segment: usize,
) -> Vec<u8> {
    let seg = blocks_per_segment.max(1) * BLOCK_BYTES;
    let mut out = plaintext.to_vec();
    out.par_chunks_mut(seg).enumerate().for_each(|(k, chunk)| {
        let first = 1 + (k * blocks_per_segment.max(1)) as u64;
        apply_at(cipher, counter, first, chunk);
    });
    out
}

// ---------------------------------------------------------------------------
// MAC and signatures
// ---------------------------------------------------------------------------

pub const TAG_BYTES: usize = 16;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct MacKey(pub [u8; 16]);

impl fmt::Debug for MacKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("MacKey(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MacTag(pub [u8; TAG_BYTES]);

fn truncated_hash(parts: &[&[u8]]) -> [u8; TAG_BYTES] {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    let digest = h.finalize();
    let mut out = [0u8; TAG_BYTES];
    out.copy_from_slice(&digest[..TAG_BYTES]);
    out
}

fn ct_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// Truncated SHA-256 over `key || message`.
pub fn mac_compute(key: &MacKey, message: &[u8]) -> MacTag {
    MacTag(truncated_hash(&[b"mac", &key.0, message]))
}

pub fn mac_verify(key: &MacKey, message: &[u8], tag: &MacTag) -> bool {
    ct_eq(&mac_compute(key, message).0, &tag.0)
}

/// A signature claimed to be made by `signer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature {
    pub signer: NodeId,
    pub tag: [u8; TAG_BYTES],
}

/// Per-node secret signing key.
#[derive(Clone, PartialEq, Eq)]
pub struct SigningKey {
    node: NodeId,
    secret: [u8; 16],
}

impl fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SigningKey({})", self.node)
    }
}

/// Verification handle for one node. Simulation-grade: verification is
/// delegated to the key store, which recomputes the signer's tag.
#[derive(Clone, PartialEq, Eq)]
pub struct VerificationKey {
    node: NodeId,
    secret: [u8; 16],
}

impl fmt::Debug for VerificationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VerificationKey({})", self.node)
    }
}

impl SigningKey {
    pub fn node(&self) -> NodeId {
        self.node
    }

    /// Produces the raw tag for `message` under this key.
    pub fn tag(&self, message: &[u8]) -> [u8; TAG_BYTES] {
        truncated_hash(&[b"sig", &self.secret, message])
    }
}

pub fn sign(key: &SigningKey, message: &[u8]) -> Signature {
    Signature {
        signer: key.node,
        tag: key.tag(message),
    }
}

pub fn verify_sig(key: &VerificationKey, message: &[u8], sig: &Signature) -> bool {
    sig.signer == key.node
        && ct_eq(&truncated_hash(&[b"sig", &key.secret, message]), &sig.tag)
}

/// Keys for one unordered node pair's link.
#[derive(Debug, Clone)]
pub struct LinkKeys {
    pub cipher: LinkCipher,
    pub mac: MacKey,
}

/// Every key in a scenario, derived on demand from the scenario seed so that
/// lookups are total and runs reproducible.
#[derive(Debug, Clone)]
pub struct KeyStore {
    seed: u64,
    cipher: CipherKind,
}

impl KeyStore {
    pub fn new(seed: u64, cipher: CipherKind) -> KeyStore {
        KeyStore { seed, cipher }
    }

    fn derive(&self, label: &[u8], a: NodeId, b: NodeId) -> [u8; 16] {
        truncated_hash(&[
            b"anct-key",
            &self.seed.to_le_bytes(),
            label,
            &a.0.to_le_bytes(),
            &b.0.to_le_bytes(),
        ])
    }

    fn ordered(a: NodeId, b: NodeId) -> (NodeId, NodeId) {
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn link_keys(&self, a: NodeId, b: NodeId) -> LinkKeys {
        let (lo, hi) = Self::ordered(a, b);
        LinkKeys {
            cipher: LinkCipher::new(self.cipher, self.derive(b"link-enc", lo, hi)),
            mac: MacKey(self.derive(b"link-mac", lo, hi)),
        }
    }

    /// End-to-end key shared by a source and destination.
    pub fn flow_key(&self, source: NodeId, destination: NodeId) -> MacKey {
        let (lo, hi) = Self::ordered(source, destination);
        MacKey(self.derive(b"e2e-mac", lo, hi))
    }

    pub fn signing_key(&self, node: NodeId) -> SigningKey {
        SigningKey {
            node,
            secret: self.derive(b"sign", node, node),
        }
    }

    pub fn verification_key(&self, node: NodeId) -> VerificationKey {
        VerificationKey {
            node,
            secret: self.derive(b"sign", node, node),
        }
    }
}
