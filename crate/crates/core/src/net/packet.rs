use std::io::Read;

use thiserror::Error;

pub const PACKET_MAGIC: [u8; 2] = *b"K3";
pub const PACKET_VERSION: u8 = 0x01;
/// magic, version, camera id, seq, timestamp, section count.
pub const PACKET_HEADER_LEN: usize = 2 + 1 + 2 + 4 + 8 + 1;
/// kind, codec, width, height, payload length.
pub const SECTION_HEADER_LEN: usize = 1 + 1 + 2 + 2 + 4;
pub const MAX_SECTIONS: usize = 4;
/// Upper bound on a single section payload accepted from the wire.
pub const MAX_SECTION_PAYLOAD: usize = 32 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum SectionKind {
    Rgb = 1,
    Depth = 2,
    Labels = 3,
    Skeletons = 4,
}

impl SectionKind {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(SectionKind::Rgb),
            2 => Some(SectionKind::Depth),
            3 => Some(SectionKind::Labels),
            4 => Some(SectionKind::Skeletons),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum SectionCodec {
    Raw = 0,
    QDelta = 1,
    Depth3cQDelta = 2,
}

impl SectionCodec {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(SectionCodec::Raw),
            1 => Some(SectionCodec::QDelta),
            2 => Some(SectionCodec::Depth3cQDelta),
            _ => None,
        }
    }

    pub fn valid_for(self, kind: SectionKind) -> bool {
        use SectionCodec::*;
        match kind {
            SectionKind::Rgb | SectionKind::Labels => matches!(self, Raw | QDelta),
            SectionKind::Depth => matches!(self, Raw | Depth3cQDelta),
            SectionKind::Skeletons => self == Raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub kind: SectionKind,
    pub codec: SectionCodec,
    pub width: u16,
    pub height: u16,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SensorPacket {
    pub camera_id: u16,
    pub seq: u32,
    pub timestamp_us: u64,
    pub sections: Vec<Section>,
}

impl SensorPacket {
    pub fn section(&self, kind: SectionKind) -> Option<&Section> {
        self.sections.iter().find(|s| s.kind == kind)
    }

    pub fn encoded_len(&self) -> usize {
        PACKET_HEADER_LEN
            + self
                .sections
                .iter()
                .map(|s| SECTION_HEADER_LEN + s.payload.len())
                .sum::<usize>()
    }

    pub fn payload_len(&self) -> usize {
        self.sections.iter().map(|s| s.payload.len()).sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PacketError {
    #[error("bad packet magic {0:02x?}")]
    BadMagic([u8; 2]),
    #[error("unsupported packet version {0}")]
    UnsupportedVersion(u8),
    #[error("packet truncated: needed {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("{0} sections exceeds the limit of 4")]
    TooManySections(u8),
    #[error("unknown section kind {0}")]
    UnknownKind(u8),
    #[error("unknown codec {0}")]
    UnknownCodec(u8),
    #[error("codec {codec:?} not allowed for {kind:?}")]
    CodecNotAllowed { kind: SectionKind, codec: SectionCodec },
    #[error("duplicate {0:?} section")]
    DuplicateSection(SectionKind),
    #[error("skeleton section must have zero dimensions")]
    NonzeroSkeletonDims,
    #[error("section payload of {0} bytes exceeds the limit")]
    PayloadTooLarge(usize),
    #[error("{0} trailing bytes after packet")]
    TrailingBytes(usize),
}

fn check_sections(sections: &[Section]) -> Result<(), PacketError> {
    if sections.len() > MAX_SECTIONS {
        return Err(PacketError::TooManySections(sections.len() as u8));
    }
    for (i, s) in sections.iter().enumerate() {
        if !s.codec.valid_for(s.kind) {
            return Err(PacketError::CodecNotAllowed {
                kind: s.kind,
                codec: s.codec,
            });
        }
        if s.kind == SectionKind::Skeletons && (s.width != 0 || s.height != 0) {
            return Err(PacketError::NonzeroSkeletonDims);
        }
        if s.payload.len() > MAX_SECTION_PAYLOAD {
            return Err(PacketError::PayloadTooLarge(s.payload.len()));
        }
        if sections[..i].iter().any(|o| o.kind == s.kind) {
            return Err(PacketError::DuplicateSection(s.kind));
        }
    }
    Ok(())
}

/// Serializes a packet; all integers little-endian.
pub fn encode_packet(packet: &SensorPacket) -> Result<Vec<u8>, PacketError> {
    check_sections(&packet.sections)?;
    let mut out = Vec::with_capacity(packet.encoded_len());
    out.extend_from_slice(&PACKET_MAGIC);
    out.push(PACKET_VERSION);
    out.extend_from_slice(&packet.camera_id.to_le_bytes());
    out.extend_from_slice(&packet.seq.to_le_bytes());
    out.extend_from_slice(&packet.timestamp_us.to_le_bytes());
    out.push(packet.sections.len() as u8);
    for s in &packet.sections {
        out.push(s.kind as u8);
        out.push(s.codec as u8);
        out.extend_from_slice(&s.width.to_le_bytes());
        out.extend_from_slice(&s.height.to_le_bytes());
        out.extend_from_slice(&(s.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&s.payload);
    }
    Ok(out)
}

struct Header {
    camera_id: u16,
    seq: u32,
    timestamp_us: u64,
    count: u8,
}

fn parse_header(b: &[u8; PACKET_HEADER_LEN]) -> Result<Header, PacketError> {
    if b[..2] != PACKET_MAGIC {
        return Err(PacketError::BadMagic([b[0], b[1]]));
    }
    if b[2] != PACKET_VERSION {
        return Err(PacketError::UnsupportedVersion(b[2]));
    }
    let count = b[17];
    if count as usize > MAX_SECTIONS {
        return Err(PacketError::TooManySections(count));
    }
    Ok(Header {
        camera_id: u16::from_le_bytes([b[3], b[4]]),
        seq: u32::from_le_bytes(b[5..9].try_into().unwrap()),
        timestamp_us: u64::from_le_bytes(b[9..17].try_into().unwrap()),
        count,
    })
}

struct SectionHeader {
    kind: SectionKind,
    codec: SectionCodec,
    width: u16,
    height: u16,
    len: usize,
}

fn parse_section_header(
    b: &[u8; SECTION_HEADER_LEN],
    seen: &[SectionKind],
) -> Result<SectionHeader, PacketError> {
    let kind = SectionKind::from_u8(b[0]).ok_or(PacketError::UnknownKind(b[0]))?;
    let codec = SectionCodec::from_u8(b[1]).ok_or(PacketError::UnknownCodec(b[1]))?;
    if seen.contains(&kind) {
        return Err(PacketError::DuplicateSection(kind));
    }
    if !codec.valid_for(kind) {
        return Err(PacketError::CodecNotAllowed { kind, codec });
    }
    let width = u16::from_le_bytes([b[2], b[3]]);
    let height = u16::from_le_bytes([b[4], b[5]]);
    if kind == SectionKind::Skeletons && (width != 0 || height != 0) {
        return Err(PacketError::NonzeroSkeletonDims);
    }
    let len = u32::from_le_bytes(b[6..10].try_into().unwrap()) as usize;
    if len > MAX_SECTION_PAYLOAD {
        return Err(PacketError::PayloadTooLarge(len));
    }
    Ok(SectionHeader {
        kind,
        codec,
        width,
        height,
        len,
    })
}

/// Parses exactly one packet occupying all of `bytes`.
pub fn decode_packet(bytes: &[u8]) -> Result<SensorPacket, PacketError> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], PacketError> {
        if bytes.len() - pos < n {
            return Err(PacketError::Truncated {
                needed: pos + n,
                have: bytes.len(),
            });
        }
        let s = &bytes[pos..pos + n];
        pos += n;
        Ok(s)
    };
    let header = parse_header(take(PACKET_HEADER_LEN)?.try_into().unwrap())?;
    let mut sections = Vec::with_capacity(header.count as usize);
    let mut kinds = Vec::with_capacity(header.count as usize);
    for _ in 0..header.count {
        let sh = parse_section_header(take(SECTION_HEADER_LEN)?.try_into().unwrap(), &kinds)?;
        let payload = take(sh.len)?.to_vec();
        kinds.push(sh.kind);
        sections.push(Section {
            kind: sh.kind,
            codec: sh.codec,
            width: sh.width,
            height: sh.height,
            payload,
        });
    }
    if pos != bytes.len() {
        return Err(PacketError::TrailingBytes(bytes.len() - pos));
    }
    Ok(SensorPacket {
        camera_id: header.camera_id,
        seq: header.seq,
        timestamp_us: header.timestamp_us,
        sections,
    })
}

/// Reads one packet from a byte stream. Returns `Ok(None)` on a clean end of
/// stream at a packet boundary; an end of stream inside a packet is an error
/// and the partial packet is discarded.
pub fn read_packet<R: Read>(r: &mut R) -> Result<Option<SensorPacket>, crate::net::NetError> {
    let mut header = [0u8; PACKET_HEADER_LEN];
    let mut got = 0;
    while got < header.len() {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => {
                return Err(PacketError::Truncated {
                    needed: PACKET_HEADER_LEN,
                    have: got,
                }
                .into())
            }
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let h = parse_header(&header)?;
    let mut sections = Vec::with_capacity(h.count as usize);
    let mut kinds = Vec::new();
    let mut consumed = PACKET_HEADER_LEN;
    let eof = |needed: usize, have: usize| -> crate::net::NetError {
        PacketError::Truncated { needed, have }.into()
    };
    for _ in 0..h.count {
        let mut sh = [0u8; SECTION_HEADER_LEN];
        read_full(r, &mut sh).map_err(|e| match e {
            Some(e) => e.into(),
            None => eof(consumed + SECTION_HEADER_LEN, consumed),
        })?;
        consumed += SECTION_HEADER_LEN;
        let sh = parse_section_header(&sh, &kinds)?;
        let mut payload = vec![0u8; sh.len];
        read_full(r, &mut payload).map_err(|e| match e {
            Some(e) => e.into(),
            None => eof(consumed + sh.len, consumed),
        })?;
        consumed += sh.len;
        kinds.push(sh.kind);
        sections.push(Section {
            kind: sh.kind,
            codec: sh.codec,
            width: sh.width,
            height: sh.height,
            payload,
        });
    }
    Ok(Some(SensorPacket {
        camera_id: h.camera_id,
        seq: h.seq,
        timestamp_us: h.timestamp_us,
        sections,
    }))
}

/// `Err(None)` means the stream ended early.
fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), Option<std::io::Error>> {
    match r.read_exact(buf) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(None),
        Err(e) => Err(Some(e)),
    }
}
