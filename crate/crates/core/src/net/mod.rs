//! Wire protocol for sensor streams, the registry that lets clients find
//! sensor servers, the stream publisher/subscriber pair and the per-camera
//! latest-frame mailbox.

mod frames;
mod mailbox;
mod packet;
mod registry;
mod skeletons;
mod stream;

pub use frames::{
    is_keyframe, DepthCoding, FrameDecoder, FrameEncoder, PlaneCoding, SensorFrame,
    StreamCodecConfig,
};
pub use mailbox::{CameraStats, Mailboxes, TakenPacket};
pub use packet::{
    decode_packet, encode_packet, read_packet, PacketError, SectionCodec, SectionKind,
    SensorPacket, Section, MAX_SECTIONS, MAX_SECTION_PAYLOAD, PACKET_HEADER_LEN, PACKET_MAGIC,
    PACKET_VERSION, SECTION_HEADER_LEN,
};
pub use registry::{
    registry_endpoint, Clock, ManualClock, Registry, RegistryClient, RegistryEntry,
    RegistryError, RegistryServer, SystemClock, DEFAULT_REGISTRY_PORT, DEFAULT_TTL,
    REGISTRY_ENV,
};
pub use skeletons::{decode_skeletons, encode_skeletons};
pub use stream::{
    spawn_feeder, FeederHandle, FeederOptions, FeederStatus, StreamServer, Subscriber, DEFAULT_STREAM_PORT,
    DEFAULT_SUBSCRIBER_QUEUE,
};

use thiserror::Error;

use crate::codec::CodecError;

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Packet(#[from] PacketError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("section payload malformed: {0}")]
    Payload(String),
    #[error("predicted frame without its keyframe")]
    MissingKeyframe,
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
