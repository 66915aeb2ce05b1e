//! Packets exchanged between hosts and switches.

use smallvec::SmallVec;

use crate::switch::IntRecord;
use crate::topology::{FiveTuple, PortId};

pub type FlowId = u32;

/// Wire bytes of a data packet's headers (Eth + IP + UDP + BTH + ICRC/FCS).
pub const DATA_HEADER_BYTES: u32 = 48;
/// Wire bytes of an ACK without telemetry or concurrency field.
pub const ACK_BASE_BYTES: u32 = 64;
/// The 16-bit concurrent-flow count carried by ACKs.
pub const N_FIELD_BYTES: u32 = 2;
/// One packed telemetry entry (64 bits).
pub const INT_ENTRY_BYTES: u32 = 8;

pub type IntList = SmallVec<[IntRecord; 6]>;

#[derive(Debug, Clone)]
pub struct DataPacket {
    pub flow: FlowId,
    pub tuple: FiveTuple,
    /// Byte offset of the first payload byte.
    pub seq: u64,
    pub payload: u32,
    /// Current size on the wire, including any telemetry appended so far.
    pub size: u32,
    /// Set on the final packet of a flow.
    pub last: bool,
    /// Per-hop telemetry appended at switch egress (data-path INT mode only).
    pub int: IntList,
}

#[derive(Debug, Clone)]
pub struct AckPacket {
    pub flow: FlowId,
    /// Reversed tuple of the data flow.
    pub tuple: FiveTuple,
    /// Cumulative: every byte below `ack_seq` has been received.
    pub ack_seq: u64,
    /// Concurrent inbound flows at the receiver.
    pub n: u16,
    pub carries_n: bool,
    /// Telemetry in the order it was written into the packet.
    pub int: IntList,
    /// Switch-local metadata: the port this ACK entered on.
    pub input_port: Option<PortId>,
}

impl AckPacket {
    pub fn size(&self) -> u32 {
        let n = if self.carries_n { N_FIELD_BYTES } else { 0 };
        ACK_BASE_BYTES + n + INT_ENTRY_BYTES * self.int.len() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfcKind {
    Pause,
    Resume,
}

#[derive(Debug, Clone)]
pub enum Packet {
    Data(DataPacket),
    Ack(AckPacket),
    Pfc(PfcKind),
}

/// Wire size of PFC control frames.
pub const PFC_FRAME_BYTES: u32 = 64;

impl Packet {
    pub fn size(&self) -> u32 {
        match self {
            Packet::Data(d) => d.size,
            Packet::Ack(a) => a.size(),
            Packet::Pfc(_) => PFC_FRAME_BYTES,
        }
    }
}

/// Data packet payload capacity for a given MTU.
pub fn payload_per_packet(mtu: u32) -> u32 {
    mtu - DATA_HEADER_BYTES
}
