//! Runtime node protocol: one-message handshake, key derivation, and
//! encrypt-then-MAC sealed messages with a bit-exact wire format.
//!
//! The initiator draws a fresh nonzero scalar `alpha`, sends `alpha t_i G`,
//! and both sides land on the shared point `alpha (k_i . m_(i-j)) G`. Session
//! keys are derived from that point together with the share, the message is
//! XORed against a counter-mode keystream, and a keyed hash over header,
//! share, and ciphertext authenticates the lot.
//!
//! One 256-bit hash primitive (SHA-256) backs the keyed hash, the KDF, and
//! the keystream; swapping it means changing [`hash256`] and the golden
//! vectors. There is no replay protection at this layer: a captured message
//! opens again, and callers that care must layer nonce windows on top.

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::algebra::{CurvePoint, CurveParams, FieldElement, PointVector};
use crate::authority::Lcd;
use crate::error::{Error, Result};
use crate::topology::NodeId;

/// Recipient id reserved for point-to-multipoint broadcasts.
pub const BROADCAST_RECIPIENT: NodeId = 0;

/// Protocol version byte in every wire message.
pub const WIRE_VERSION: u8 = 1;

const LABEL_ENC: &[u8] = b"ECTAKS-v1-enc";
const LABEL_MAC: &[u8] = b"ECTAKS-v1-mac";
const LABEL_CTR: &[u8] = b"ECTAKS-v1-ctr";
const LABEL_TAG: &[u8] = b"ECTAKS-v1-tag";

/// The ephemeral handshake message `alpha t_i G`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EphemeralShare {
    share: PointVector,
}

impl EphemeralShare {
    /// Wraps a received point pair, rejecting the all-identity share that a
    /// valid initiator can never produce.
    pub fn new(share: PointVector) -> Result<Self> {
        if share.is_all_infinity() {
            return Err(Error::InvalidShare);
        }
        Ok(EphemeralShare { share })
    }

    pub fn points(&self) -> &PointVector {
        &self.share
    }
}

/// The shared secret point for one session direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ectak {
    point: CurvePoint,
}

impl Ectak {
    pub fn point(&self) -> CurvePoint {
        self.point
    }
}

/// Symmetric keys for one session: `enc` drives the keystream, `mac` the tag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionKeys {
    pub enc: [u8; 32],
    pub mac: [u8; 32],
}

/// A sealed message as it travels: fixed header, the ephemeral share, the
/// length-prefixed ciphertext, and a 32-byte tag over everything before it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireMessage {
    pub version: u8,
    pub sender: NodeId,
    pub recipient: NodeId,
    pub share: EphemeralShare,
    pub ciphertext: Vec<u8>,
    pub tag: [u8; 32],
}

fn hash256(parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    hasher.finalize().into()
}

fn nonzero_scalar<R: Rng + ?Sized>(rng: &mut R, p: u64) -> FieldElement {
    FieldElement::new(rng.random_range(1..p), p)
}

/// Starts a session toward `peer`: returns the share to send and the secret
/// point. The scalar `alpha` never leaves this frame.
pub fn initiate<R: Rng + ?Sized>(
    curve: &CurveParams,
    lcd: &Lcd,
    peer: NodeId,
    rng: &mut R,
) -> Result<(EphemeralShare, Ectak)> {
    let topology_vector = lcd.public.get(&peer).ok_or(Error::UnknownPeer(peer))?;
    let alpha = nonzero_scalar(rng, curve.subgroup_order());
    let share = curve.lift_vector(&lcd.secret.t.scale(alpha))?;
    let point = curve.mixed_dot(&lcd.secret.k.scale(alpha), topology_vector)?;
    if point.is_infinity() {
        // A provisioned LCD guarantees a nonzero product; getting here means
        // the LCD was tampered with or never came from a CA.
        return Err(Error::ZeroSessionKey(lcd.node, peer));
    }
    Ok((EphemeralShare::new(share)?, Ectak { point }))
}

/// Responder side: `k_j . (alpha t_i G)` lands on the initiator's point
/// whenever the arrow was provisioned. Off-curve shares are rejected.
pub fn respond(curve: &CurveParams, lcd: &Lcd, share: &EphemeralShare) -> Result<Ectak> {
    for point in share.points().points() {
        if !curve.is_on_curve(point) {
            return Err(Error::InvalidPoint);
        }
    }
    let point = curve.mixed_dot(&lcd.secret.k, share.points())?;
    Ok(Ectak { point })
}

/// Derives the encryption and authentication keys from the shared point and
/// the share, with one domain label per key.
pub fn derive_keys(curve: &CurveParams, ectak: &Ectak, share: &EphemeralShare) -> SessionKeys {
    let mut ikm = encode_point(curve, &ectak.point);
    for point in share.points().points() {
        ikm.extend_from_slice(&encode_point(curve, point));
    }
    SessionKeys {
        enc: hash256(&[LABEL_ENC, &ikm]),
        mac: hash256(&[LABEL_MAC, &ikm]),
    }
}

/// Counter-mode keystream XOR; applying it twice restores the input.
fn apply_keystream(key: &[u8; 32], data: &mut [u8]) {
    for (block_index, chunk) in data.chunks_mut(32).enumerate() {
        let counter = (block_index as u64).to_be_bytes();
        let block = hash256(&[key, LABEL_CTR, &counter]);
        for (byte, pad) in chunk.iter_mut().zip(block.iter()) {
            *byte ^= pad;
        }
    }
}

fn compute_tag(mac_key: &[u8; 32], authenticated: &[u8]) -> [u8; 32] {
    hash256(&[mac_key, LABEL_TAG, authenticated])
}

fn constant_time_eq(a: &[u8; 32], b: &[u8; 32]) -> bool {
    a.iter().zip(b.iter()).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

fn header_bytes(version: u8, sender: NodeId, recipient: NodeId) -> Vec<u8> {
    let mut out = vec![version];
    out.extend_from_slice(&sender.to_be_bytes());
    out.extend_from_slice(&recipient.to_be_bytes());
    out
}

/// Coordinate width in bytes: enough for `q`, fixed per curve.
fn coordinate_width(curve: &CurveParams) -> usize {
    ((64 - curve.q().leading_zeros() as usize) + 7) / 8
}

/// Uncompressed point encoding: marker `0x04` plus two fixed-width big-endian
/// coordinates; the identity is marker `0x00` with all-zero coordinates.
fn encode_point(curve: &CurveParams, point: &CurvePoint) -> Vec<u8> {
    let width = coordinate_width(curve);
    let mut out = Vec::with_capacity(1 + 2 * width);
    match point {
        CurvePoint::Infinity => out.extend(std::iter::repeat_n(0u8, 1 + 2 * width)),
        CurvePoint::Affine { x, y } => {
            out.push(0x04);
            out.extend_from_slice(&x.value().to_be_bytes()[8 - width..]);
            out.extend_from_slice(&y.value().to_be_bytes()[8 - width..]);
        }
    }
    out
}

fn decode_point(curve: &CurveParams, bytes: &[u8]) -> Result<CurvePoint> {
    let width = coordinate_width(curve);
    debug_assert_eq!(bytes.len(), 1 + 2 * width);
    let read_coord = |slice: &[u8]| -> u64 {
        let mut buf = [0u8; 8];
        buf[8 - slice.len()..].copy_from_slice(slice);
        u64::from_be_bytes(buf)
    };
    let x = read_coord(&bytes[1..1 + width]);
    let y = read_coord(&bytes[1 + width..]);
    let point = match bytes[0] {
        0x00 => {
            if x != 0 || y != 0 {
                return Err(Error::MalformedMessage(
                    "identity marker with nonzero coordinates".into(),
                ));
            }
            CurvePoint::Infinity
        }
        0x04 => {
            if x >= curve.q() || y >= curve.q() {
                return Err(Error::MalformedMessage(
                    "point coordinate exceeds the field".into(),
                ));
            }
            CurvePoint::affine(x, y, curve.q())
        }
        other => {
            return Err(Error::MalformedMessage(format!(
                "unknown point marker {other:#04x}"
            )))
        }
    };
    if !curve.is_on_curve(&point) {
        return Err(Error::InvalidPoint);
    }
    Ok(point)
}

impl WireMessage {
    /// Big-endian layout:
    /// `version(1) | sender(4) | recipient(4) | share(2 points) | ct_len(4) |
    /// ciphertext | tag(32)`.
    pub fn to_bytes(&self, curve: &CurveParams) -> Vec<u8> {
        let mut out = header_bytes(self.version, self.sender, self.recipient);
        for point in self.share.points().points() {
            out.extend_from_slice(&encode_point(curve, point));
        }
        out.extend_from_slice(&(self.ciphertext.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out.extend_from_slice(&self.tag);
        out
    }

    /// Strict parse: every length, marker, and point is checked, and any
    /// leftover or missing byte is an error.
    pub fn from_bytes(curve: &CurveParams, bytes: &[u8]) -> Result<WireMessage> {
        let point_len = 1 + 2 * coordinate_width(curve);
        let fixed = 1 + 4 + 4 + 2 * point_len + 4;
        if bytes.len() < fixed + 32 {
            return Err(Error::MalformedMessage(format!(
                "{} bytes is shorter than the minimal message",
                bytes.len()
            )));
        }
        if bytes[0] != WIRE_VERSION {
            return Err(Error::MalformedMessage(format!(
                "unsupported version {}",
                bytes[0]
            )));
        }
        let sender = u32::from_be_bytes(bytes[1..5].try_into().unwrap());
        let recipient = u32::from_be_bytes(bytes[5..9].try_into().unwrap());
        let mut offset = 9;
        let mut points = Vec::with_capacity(2);
        for _ in 0..2 {
            points.push(decode_point(curve, &bytes[offset..offset + point_len])?);
            offset += point_len;
        }
        let ct_len =
            u32::from_be_bytes(bytes[offset..offset + 4].try_into().unwrap()) as usize;
        offset += 4;
        if bytes.len() != offset + ct_len + 32 {
            return Err(Error::MalformedMessage(format!(
                "length field says {ct_len} ciphertext bytes, message disagrees"
            )));
        }
        let ciphertext = bytes[offset..offset + ct_len].to_vec();
        let tag: [u8; 32] = bytes[offset + ct_len..].try_into().unwrap();
        Ok(WireMessage {
            version: bytes[0],
            sender,
            recipient,
            share: EphemeralShare::new(PointVector::new(points))?,
            ciphertext,
            tag,
        })
    }
}

fn seal_with(
    curve: &CurveParams,
    sender: NodeId,
    recipient: NodeId,
    share: EphemeralShare,
    ectak: &Ectak,
    message: &[u8],
) -> WireMessage {
    let keys = derive_keys(curve, ectak, &share);
    let mut ciphertext = message.to_vec();
    apply_keystream(&keys.enc, &mut ciphertext);

    let mut authenticated = header_bytes(WIRE_VERSION, sender, recipient);
    for point in share.points().points() {
        authenticated.extend_from_slice(&encode_point(curve, point));
    }
    authenticated.extend_from_slice(&(ciphertext.len() as u32).to_be_bytes());
    authenticated.extend_from_slice(&ciphertext);
    let tag = compute_tag(&keys.mac, &authenticated);

    WireMessage {
        version: WIRE_VERSION,
        sender,
        recipient,
        share,
        ciphertext,
        tag,
    }
}

/// Seals `message` for neighbor `peer`: fresh handshake, encrypt, then MAC.
pub fn seal<R: Rng + ?Sized>(
    curve: &CurveParams,
    lcd: &Lcd,
    peer: NodeId,
    message: &[u8],
    rng: &mut R,
) -> Result<WireMessage> {
    let (share, ectak) = initiate(curve, lcd, peer, rng)?;
    Ok(seal_with(curve, lcd.node, peer, share, &ectak, message))
}

/// Opens a sealed message: recompute the shared point, verify the tag in
/// constant time, and only then decrypt. Any altered byte lands in `BadTag`
/// (or a parse error before that).
pub fn open(curve: &CurveParams, lcd: &Lcd, message: &WireMessage) -> Result<Vec<u8>> {
    let ectak = respond(curve, lcd, &message.share)?;
    let keys = derive_keys(curve, &ectak, &message.share);

    let mut authenticated = header_bytes(message.version, message.sender, message.recipient);
    for point in message.share.points().points() {
        authenticated.extend_from_slice(&encode_point(curve, point));
    }
    authenticated.extend_from_slice(&(message.ciphertext.len() as u32).to_be_bytes());
    authenticated.extend_from_slice(&message.ciphertext);
    let expected = compute_tag(&keys.mac, &authenticated);
    if !constant_time_eq(&expected, &message.tag) {
        return Err(Error::BadTag);
    }

    let mut plaintext = message.ciphertext.clone();
    apply_keystream(&keys.enc, &mut plaintext);
    Ok(plaintext)
}

/// Seals one broadcast for a provisioned cluster: every member's arrow from
/// the master carries the same product, so all member-side responses land on
/// one point and a single message serves the whole set.
pub fn multipoint_seal<R: Rng + ?Sized>(
    curve: &CurveParams,
    lcd: &Lcd,
    members: &[NodeId],
    message: &[u8],
    rng: &mut R,
) -> Result<WireMessage> {
    if members.is_empty() {
        return Err(Error::ClusterNotFormed);
    }
    let alpha = nonzero_scalar(rng, curve.subgroup_order());
    let share = EphemeralShare::new(curve.lift_vector(&lcd.secret.t.scale(alpha))?)?;
    let scaled_k = lcd.secret.k.scale(alpha);
    let mut common: Option<CurvePoint> = None;
    for &member in members {
        let topology_vector = lcd.public.get(&member).ok_or(Error::UnknownPeer(member))?;
        let point = curve.mixed_dot(&scaled_k, topology_vector)?;
        match common {
            None => common = Some(point),
            Some(existing) if existing != point => return Err(Error::ClusterNotFormed),
            Some(_) => {}
        }
    }
    let point = common.expect("members is nonempty");
    if point.is_infinity() {
        return Err(Error::ZeroSessionKey(lcd.node, members[0]));
    }
    Ok(seal_with(
        curve,
        lcd.node,
        BROADCAST_RECIPIENT,
        share,
        &Ectak { point },
        message,
    ))
}
