//! Sink side: packet wire format and the per-device reference list.
//!
//! Wire layout of a packet:
//!
//! ```text
//! +-----------+-----------------------+--------------------------------+
//! | device id | bit count (u16, BE)   | payload, MSB first, zero-padded |
//! +-----------+-----------------------+--------------------------------+
//!    1 byte          2 bytes            ceil(bit_count / 8) bytes
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{self, BitString, CodecError, Residual};
use crate::control::DeviceId;

const HEADER_LEN: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SinkError {
    #[error("device {0} is already registered")]
    DuplicateDevice(DeviceId),
    #[error("device {0} is not registered")]
    UnknownDevice(DeviceId),
    #[error("packet shorter than its {HEADER_LEN}-byte header ({0} bytes)")]
    ShortHeader(usize),
    #[error("payload of {bytes} bytes cannot carry exactly {bit_count} bits")]
    LengthMismatch { bit_count: u16, bytes: usize },
    #[error("non-zero padding after {bit_count} payload bits")]
    DirtyPadding { bit_count: u16 },
    #[error("payload of {0} bits exceeds the 16-bit length field")]
    PayloadTooLong(usize),
    #[error("empty payload")]
    EmptyPayload,
    #[error("raw payload of {bits} bits is not a multiple of the {width}-bit sample width")]
    RawLength { bits: usize, width: u8 },
    #[error("decode failed: {0}")]
    Decode(#[from] CodecError),
}

/// Wire unit between a device and the sink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub device_id: DeviceId,
    bit_count: u16,
    payload: Vec<u8>,
}

impl Packet {
    pub fn from_bits(device_id: DeviceId, bits: &BitString) -> Result<Self, SinkError> {
        let bit_count =
            u16::try_from(bits.len()).map_err(|_| SinkError::PayloadTooLong(bits.len()))?;
        Ok(Packet {
            device_id,
            bit_count,
            payload: bits.as_bytes().to_vec(),
        })
    }

    pub fn bit_count(&self) -> u16 {
        self.bit_count
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn bits(&self) -> BitString {
        BitString::from_bytes(&self.payload, usize::from(self.bit_count))
            .expect("packet invariant: payload holds bit_count bits")
    }

    /// Size on the wire, header included.
    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn wire_bits(&self) -> usize {
        self.wire_len() * 8
    }

    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.push(self.device_id);
        out.extend_from_slice(&self.bit_count.to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_wire(bytes: &[u8]) -> Result<Self, SinkError> {
        if bytes.len() < HEADER_LEN {
            return Err(SinkError::ShortHeader(bytes.len()));
        }
        let device_id = bytes[0];
        let bit_count = u16::from_be_bytes([bytes[1], bytes[2]]);
        let payload = &bytes[HEADER_LEN..];
        if payload.len() != usize::from(bit_count).div_ceil(8) {
            return Err(SinkError::LengthMismatch {
                bit_count,
                bytes: payload.len(),
            });
        }
        let used = usize::from(bit_count) % 8;
        if used != 0 && payload[payload.len() - 1] & (0xFF >> used) != 0 {
            return Err(SinkError::DirtyPadding { bit_count });
        }
        Ok(Packet {
            device_id,
            bit_count,
            payload: payload.to_vec(),
        })
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_wire())
    }
}

/// How a device's payload is to be interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadCoding {
    /// Concatenated residual codewords.
    Residuals,
    /// Uncompressed absolute readings of the given width.
    Raw { bits: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ReferenceEntry {
    value: i32,
    coding: PayloadCoding,
    packets: u64,
}

/// Reference list of last reconstructed readings, one entry per device.
#[derive(Debug, Clone, Default)]
pub struct SinkState {
    reference_list: BTreeMap<DeviceId, ReferenceEntry>,
}

impl SinkState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_device(&mut self, id: DeviceId) -> Result<(), SinkError> {
        self.register_device_with(id, PayloadCoding::Residuals)
    }

    pub fn register_device_with(
        &mut self,
        id: DeviceId,
        coding: PayloadCoding,
    ) -> Result<(), SinkError> {
        if self.reference_list.contains_key(&id) {
            return Err(SinkError::DuplicateDevice(id));
        }
        self.reference_list.insert(
            id,
            ReferenceEntry {
                value: 0,
                coding,
                packets: 0,
            },
        );
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.reference_list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference_list.is_empty()
    }

    pub fn held_value(&self, id: DeviceId) -> Result<i32, SinkError> {
        self.reference_list
            .get(&id)
            .map(|e| e.value)
            .ok_or(SinkError::UnknownDevice(id))
    }

    pub fn packets_received(&self, id: DeviceId) -> Result<u64, SinkError> {
        self.reference_list
            .get(&id)
            .map(|e| e.packets)
            .ok_or(SinkError::UnknownDevice(id))
    }

    /// Applies every codeword in the packet and returns the reconstructed
    /// reading after the last one. The reference list is left unchanged if
    /// any part of the payload fails to decode.
    pub fn on_packet(&mut self, packet: &Packet) -> Result<i32, SinkError> {
        let values = self.decode(packet)?;
        let entry = self
            .reference_list
            .get_mut(&packet.device_id)
            .expect("checked by decode");
        entry.value = *values.last().expect("decode yields at least one value");
        entry.packets += 1;
        Ok(entry.value)
    }

    /// Reconstructs every reading carried by `packet` without mutating state.
    pub fn decode(&self, packet: &Packet) -> Result<Vec<i32>, SinkError> {
        let entry = self
            .reference_list
            .get(&packet.device_id)
            .ok_or(SinkError::UnknownDevice(packet.device_id))?;
        let bits = packet.bits();
        if bits.is_empty() {
            return Err(SinkError::EmptyPayload);
        }
        match entry.coding {
            PayloadCoding::Residuals => {
                let residuals = codec::decode_all(&bits)?;
                let mut value = entry.value;
                Ok(residuals
                    .into_iter()
                    .map(|e: Residual| {
                        value += e.get();
                        value
                    })
                    .collect())
            }
            PayloadCoding::Raw { bits: width } => {
                let width_bits = usize::from(width);
                if width == 0 || !bits.len().is_multiple_of(width_bits) {
                    return Err(SinkError::RawLength {
                        bits: bits.len(),
                        width,
                    });
                }
                let mut reader = bits.reader();
                let mut out = Vec::with_capacity(bits.len() / width_bits);
                while !reader.is_exhausted() {
                    out.push(reader.read_uint(width_bits)? as i32);
                }
                Ok(out)
            }
        }
    }
}
