//! The embedded layer layouts.
//!
//! Offsets are bit positions from the layer start, multi-byte integers are
//! big-endian on the wire. Adjacent single-bit flags are grouped into one
//! field (ip.flags, dns.atr) so fuzzing assigns the whole group at once.
//! Checksum and length fields are computed at finalize time only.

use super::schema::{AddrKind, ComputedKind, FieldKind, FieldSchema, LayerKind, LayerSchema};

const fn field(
    name: &'static str,
    layer: LayerKind,
    bit_offset: usize,
    bit_width: usize,
    kind: FieldKind,
    fuzzable: bool,
) -> FieldSchema {
    FieldSchema {
        name,
        layer,
        bit_offset,
        bit_width,
        kind,
        fuzzable,
        optional: false,
    }
}

const fn opt_field(
    name: &'static str,
    layer: LayerKind,
    bit_offset: usize,
    bit_width: usize,
    kind: FieldKind,
    fuzzable: bool,
) -> FieldSchema {
    FieldSchema {
        name,
        layer,
        bit_offset,
        bit_width,
        kind,
        fuzzable,
        optional: true,
    }
}

const MAC: FieldKind = FieldKind::Address(AddrKind::Mac);
const IPV4: FieldKind = FieldKind::Address(AddrKind::Ipv4);
const CKSUM: FieldKind = FieldKind::Computed(ComputedKind::Checksum);
const LEN: FieldKind = FieldKind::Computed(ComputedKind::Length);

const fn range(lo: u64, hi: u64) -> FieldKind {
    FieldKind::Range { lo, hi }
}

static ETH_FIELDS: [FieldSchema; 3] = [
    field("dst_mac", LayerKind::Eth, 0, 48, MAC, true),
    field("src_mac", LayerKind::Eth, 48, 48, MAC, true),
    field(
        "ethertype",
        LayerKind::Eth,
        96,
        16,
        FieldKind::EnumSet(&[0x0800, 0x0806]),
        false,
    ),
];

static ETH: LayerSchema = LayerSchema {
    kind: LayerKind::Eth,
    bit_length: 112,
    optional_bits: 0,
    fields: &ETH_FIELDS,
};

static ARP_FIELDS: [FieldSchema; 9] = [
    field("htype", LayerKind::Arp, 0, 16, FieldKind::EnumSet(&[1]), false),
    field("ptype", LayerKind::Arp, 16, 16, FieldKind::EnumSet(&[0x0800]), false),
    field("hlen", LayerKind::Arp, 32, 8, FieldKind::EnumSet(&[6]), false),
    field("plen", LayerKind::Arp, 40, 8, FieldKind::EnumSet(&[4]), false),
    field("oper", LayerKind::Arp, 48, 16, FieldKind::EnumSet(&[1, 2]), true),
    field("sender_mac", LayerKind::Arp, 64, 48, MAC, true),
    field("sender_ip", LayerKind::Arp, 112, 32, IPV4, true),
    field("target_mac", LayerKind::Arp, 144, 48, MAC, true),
    field("target_ip", LayerKind::Arp, 192, 32, IPV4, true),
];

static ARP: LayerSchema = LayerSchema {
    kind: LayerKind::Arp,
    bit_length: 224,
    optional_bits: 0,
    fields: &ARP_FIELDS,
};

static IP_FIELDS: [FieldSchema; 12] = [
    field("version", LayerKind::Ip, 0, 4, FieldKind::EnumSet(&[4]), false),
    field("ihl", LayerKind::Ip, 4, 4, LEN, false),
    field("tos", LayerKind::Ip, 8, 8, range(0, 255), true),
    field("total_length", LayerKind::Ip, 16, 16, LEN, false),
    field("id", LayerKind::Ip, 32, 16, range(0, 65535), true),
    // First bit reserved and must be 0, so the valid 3-bit values are 0,2,4,6.
    field("flags", LayerKind::Ip, 48, 3, FieldKind::EnumSet(&[0, 2, 4, 6]), true),
    field("frag_offset", LayerKind::Ip, 51, 13, FieldKind::EnumSet(&[0]), false),
    field("ttl", LayerKind::Ip, 64, 8, range(0, 255), true),
    field("protocol", LayerKind::Ip, 72, 8, FieldKind::EnumSet(&[6, 17]), false),
    field("header_checksum", LayerKind::Ip, 80, 16, CKSUM, false),
    field("src_ip", LayerKind::Ip, 96, 32, IPV4, true),
    field("dst_ip", LayerKind::Ip, 128, 32, IPV4, true),
];

static IP: LayerSchema = LayerSchema {
    kind: LayerKind::Ip,
    bit_length: 160,
    optional_bits: 0,
    fields: &IP_FIELDS,
};

static UDP_FIELDS: [FieldSchema; 4] = [
    field("src_port", LayerKind::Udp, 0, 16, range(0, 65535), true),
    field("dst_port", LayerKind::Udp, 16, 16, range(0, 65535), true),
    field("length", LayerKind::Udp, 32, 16, LEN, false),
    field("checksum", LayerKind::Udp, 48, 16, CKSUM, false),
];

static UDP: LayerSchema = LayerSchema {
    kind: LayerKind::Udp,
    bit_length: 64,
    optional_bits: 0,
    fields: &UDP_FIELDS,
};

static TCP_FIELDS: [FieldSchema; 11] = [
    field("src_port", LayerKind::Tcp, 0, 16, range(0, 65535), true),
    field("dst_port", LayerKind::Tcp, 16, 16, range(0, 65535), true),
    field("seq", LayerKind::Tcp, 32, 32, range(0, u32::MAX as u64), true),
    field("ack", LayerKind::Tcp, 64, 32, range(0, u32::MAX as u64), true),
    field("data_offset", LayerKind::Tcp, 96, 4, LEN, false),
    field("reserved", LayerKind::Tcp, 100, 4, FieldKind::EnumSet(&[0]), false),
    // SYN, ACK, FIN|ACK, SYN|ACK, PSH|ACK; the lab stack never sets URG.
    field(
        "flags",
        LayerKind::Tcp,
        104,
        8,
        FieldKind::EnumSet(&[0x02, 0x10, 0x11, 0x12, 0x18]),
        true,
    ),
    field("window", LayerKind::Tcp, 112, 16, range(0, 65535), true),
    field("checksum", LayerKind::Tcp, 128, 16, CKSUM, false),
    field("urgent_ptr", LayerKind::Tcp, 144, 16, range(0, 65535), true),
    field("payload", LayerKind::Tcp, 160, 0, FieldKind::OpaqueBytes, false),
];

static TCP: LayerSchema = LayerSchema {
    kind: LayerKind::Tcp,
    bit_length: 160,
    optional_bits: 0,
    fields: &TCP_FIELDS,
};

// Lab DNS: 12-byte header, one fixed-size question (32-byte zero-padded
// name, type, class), and for responses a single A record answer whose name
// is a compression pointer to the question.
static DNS_FIELDS: [FieldSchema; 20] = [
    field("id", LayerKind::Dns, 0, 16, range(0, 65535), true),
    field("qr", LayerKind::Dns, 16, 1, FieldKind::EnumSet(&[0, 1]), false),
    field("opcode", LayerKind::Dns, 17, 4, FieldKind::EnumSet(&[0]), false),
    // aa|tc|rd grouped as one 3-bit field.
    field("atr", LayerKind::Dns, 21, 3, range(0, 7), true),
    field("ra", LayerKind::Dns, 24, 1, FieldKind::EnumSet(&[0, 1]), true),
    field("z", LayerKind::Dns, 25, 3, FieldKind::EnumSet(&[0]), false),
    field("rcode", LayerKind::Dns, 28, 4, range(0, 5), true),
    field("qdcount", LayerKind::Dns, 32, 16, LEN, false),
    field("ancount", LayerKind::Dns, 48, 16, LEN, false),
    field("nscount", LayerKind::Dns, 64, 16, FieldKind::EnumSet(&[0]), false),
    field("arcount", LayerKind::Dns, 80, 16, FieldKind::EnumSet(&[0]), false),
    field("qname", LayerKind::Dns, 96, 256, FieldKind::OpaqueBytes, false),
    field("qtype", LayerKind::Dns, 352, 16, FieldKind::EnumSet(&[1]), false),
    field("qclass", LayerKind::Dns, 368, 16, FieldKind::EnumSet(&[1]), false),
    opt_field("aname", LayerKind::Dns, 384, 16, FieldKind::EnumSet(&[0xc00c]), false),
    opt_field("atype", LayerKind::Dns, 400, 16, FieldKind::EnumSet(&[1]), false),
    opt_field("aclass", LayerKind::Dns, 416, 16, FieldKind::EnumSet(&[1]), false),
    opt_field("rr_ttl", LayerKind::Dns, 432, 32, range(60, 86400), true),
    opt_field("rdlength", LayerKind::Dns, 464, 16, LEN, false),
    opt_field("rdata", LayerKind::Dns, 480, 32, IPV4, true),
];

static DNS: LayerSchema = LayerSchema {
    kind: LayerKind::Dns,
    bit_length: 384,
    optional_bits: 128,
    fields: &DNS_FIELDS,
};

static TELNET_FIELDS: [FieldSchema; 1] = [field(
    "payload",
    LayerKind::Telnet,
    0,
    0,
    FieldKind::OpaqueBytes,
    false,
)];

static TELNET: LayerSchema = LayerSchema {
    kind: LayerKind::Telnet,
    bit_length: 0,
    optional_bits: 0,
    fields: &TELNET_FIELDS,
};

// AUTHP, the lab's stateful challenge-response protocol. Stages: 1 negotiate,
// 2 auth_request, 3 challenge, 4 challenge_response, 5 auth_response, 6 task.
// Mechanisms: 1 password_proof, 2 hash_only, 3 anonymous. Upper bits of
// flags/capabilities are reserved and must be zero.
static AUTHP_FIELDS: [FieldSchema; 23] = [
    field("stage", LayerKind::Authp, 0, 8, FieldKind::EnumSet(&[1, 2, 3, 4, 5, 6]), true),
    field("mechanism", LayerKind::Authp, 8, 8, FieldKind::EnumSet(&[1, 2, 3]), true),
    field("command", LayerKind::Authp, 16, 8, FieldKind::EnumSet(&[0, 1, 2, 3, 4]), true),
    field("dialect", LayerKind::Authp, 24, 8, FieldKind::EnumSet(&[1, 2, 3]), true),
    field("credit", LayerKind::Authp, 32, 8, range(0, 255), true),
    field("flags", LayerKind::Authp, 40, 16, range(0, 7), true),
    field("capabilities", LayerKind::Authp, 56, 16, range(0, 3), true),
    field("session_token", LayerKind::Authp, 72, 32, range(0, u32::MAX as u64), true),
    field("payload_len", LayerKind::Authp, 104, 16, LEN, false),
    field("checksum", LayerKind::Authp, 120, 16, CKSUM, false),
    field("reserved0", LayerKind::Authp, 136, 8, range(0, 255), true),
    field("reserved1", LayerKind::Authp, 144, 8, range(0, 255), true),
    field("reserved2", LayerKind::Authp, 152, 8, range(0, 255), true),
    field("reserved3", LayerKind::Authp, 160, 8, range(0, 255), true),
    field("reserved4", LayerKind::Authp, 168, 8, range(0, 255), true),
    field("reserved5", LayerKind::Authp, 176, 8, range(0, 255), true),
    field("reserved6", LayerKind::Authp, 184, 8, range(0, 255), true),
    field("reserved7", LayerKind::Authp, 192, 8, range(0, 255), true),
    field("reserved8", LayerKind::Authp, 200, 8, range(0, 255), true),
    field("reserved9", LayerKind::Authp, 208, 8, range(0, 255), true),
    field("reserved10", LayerKind::Authp, 216, 8, range(0, 255), true),
    field("reserved11", LayerKind::Authp, 224, 8, range(0, 255), true),
    field("payload", LayerKind::Authp, 232, 0, FieldKind::OpaqueBytes, false),
];

static AUTHP: LayerSchema = LayerSchema {
    kind: LayerKind::Authp,
    bit_length: 232,
    optional_bits: 0,
    fields: &AUTHP_FIELDS,
};

pub fn layer_schema(kind: LayerKind) -> &'static LayerSchema {
    match kind {
        LayerKind::Eth => &ETH,
        LayerKind::Arp => &ARP,
        LayerKind::Ip => &IP,
        LayerKind::Udp => &UDP,
        LayerKind::Tcp => &TCP,
        LayerKind::Dns => &DNS,
        LayerKind::Telnet => &TELNET,
        LayerKind::Authp => &AUTHP,
    }
}

/// Which layer kinds may follow `prev` in a stack (`None` = stack start).
pub fn may_follow(prev: Option<LayerKind>, next: LayerKind) -> bool {
    match (prev, next) {
        (None, LayerKind::Eth) => true,
        (Some(LayerKind::Eth), LayerKind::Arp | LayerKind::Ip) => true,
        (Some(LayerKind::Ip), LayerKind::Udp | LayerKind::Tcp) => true,
        (Some(LayerKind::Udp), LayerKind::Dns) => true,
        (Some(LayerKind::Tcp), LayerKind::Telnet | LayerKind::Authp) => true,
        _ => false,
    }
}

/// AUTHP stage numbers, by name.
pub mod authp_stage {
    pub const NEGOTIATE: u64 = 1;
    pub const AUTH_REQUEST: u64 = 2;
    pub const CHALLENGE: u64 = 3;
    pub const CHALLENGE_RESPONSE: u64 = 4;
    pub const AUTH_RESPONSE: u64 = 5;
    pub const TASK: u64 = 6;
}

/// AUTHP mechanism numbers, by name.
pub mod authp_mech {
    pub const PASSWORD_PROOF: u64 = 1;
    pub const HASH_ONLY: u64 = 2;
    pub const ANONYMOUS: u64 = 3;
}
