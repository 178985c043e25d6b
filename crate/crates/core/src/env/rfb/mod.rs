//! RFB (VNC) protocol 3.8 messages, client and a test server.
//!
//! Layouts follow RFC 6143. All multi-byte integers are big-endian on the
//! wire; pixel values use the negotiated pixel format's byte order.

mod client;
pub mod mock;

use des::cipher::generic_array::GenericArray;
use des::cipher::{BlockEncrypt, KeyInit};
use des::Des;

pub use client::{RfbClient, RfbConfig};

pub const PROTOCOL_VERSION_3_8: &[u8; 12] = b"RFB 003.008\n";
pub const PROTOCOL_VERSION_3_7: &[u8; 12] = b"RFB 003.007\n";
pub const PROTOCOL_VERSION_3_3: &[u8; 12] = b"RFB 003.003\n";

pub const SECURITY_INVALID: u8 = 0;
pub const SECURITY_NONE: u8 = 1;
pub const SECURITY_VNC_AUTH: u8 = 2;

pub const ENCODING_RAW: i32 = 0;

pub mod client_msg {
    pub const SET_PIXEL_FORMAT: u8 = 0;
    pub const SET_ENCODINGS: u8 = 2;
    pub const FRAMEBUFFER_UPDATE_REQUEST: u8 = 3;
    pub const KEY_EVENT: u8 = 4;
    pub const POINTER_EVENT: u8 = 5;
    pub const CLIENT_CUT_TEXT: u8 = 6;
}

pub mod server_msg {
    pub const FRAMEBUFFER_UPDATE: u8 = 0;
    pub const SET_COLOUR_MAP_ENTRIES: u8 = 1;
    pub const BELL: u8 = 2;
    pub const SERVER_CUT_TEXT: u8 = 3;
}

/// Wire pixel format (16 bytes in ServerInit and SetPixelFormat).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelFormat {
    pub bits_per_pixel: u8,
    pub depth: u8,
    pub big_endian: bool,
    pub true_colour: bool,
    pub red_max: u16,
    pub green_max: u16,
    pub blue_max: u16,
    pub red_shift: u8,
    pub green_shift: u8,
    pub blue_shift: u8,
}

impl Default for PixelFormat {
    /// 32 bits per pixel, little-endian, 8 bits per channel as `0x00RRGGBB`.
    fn default() -> Self {
        Self {
            bits_per_pixel: 32,
            depth: 24,
            big_endian: false,
            true_colour: true,
            red_max: 255,
            green_max: 255,
            blue_max: 255,
            red_shift: 16,
            green_shift: 8,
            blue_shift: 0,
        }
    }
}

impl PixelFormat {
    pub fn bytes_per_pixel(&self) -> usize {
        (self.bits_per_pixel as usize).div_ceil(8)
    }

    pub fn to_bytes(&self) -> [u8; 16] {
        let mut b = [0u8; 16];
        b[0] = self.bits_per_pixel;
        b[1] = self.depth;
        b[2] = self.big_endian as u8;
        b[3] = self.true_colour as u8;
        b[4..6].copy_from_slice(&self.red_max.to_be_bytes());
        b[6..8].copy_from_slice(&self.green_max.to_be_bytes());
        b[8..10].copy_from_slice(&self.blue_max.to_be_bytes());
        b[10] = self.red_shift;
        b[11] = self.green_shift;
        b[12] = self.blue_shift;
        b
    }

    pub fn from_bytes(b: &[u8; 16]) -> Self {
        Self {
            bits_per_pixel: b[0],
            depth: b[1],
            big_endian: b[2] != 0,
            true_colour: b[3] != 0,
            red_max: u16::from_be_bytes([b[4], b[5]]),
            green_max: u16::from_be_bytes([b[6], b[7]]),
            blue_max: u16::from_be_bytes([b[8], b[9]]),
            red_shift: b[10],
            green_shift: b[11],
            blue_shift: b[12],
        }
    }

    /// Whether the client can decode pixels in this format.
    pub fn is_supported(&self) -> bool {
        self.true_colour
            && matches!(self.bits_per_pixel, 8 | 16 | 32)
            && self.red_max > 0
            && self.green_max > 0
            && self.blue_max > 0
    }

    fn read_value(&self, px: &[u8]) -> u32 {
        match (self.bytes_per_pixel(), self.big_endian) {
            (1, _) => px[0] as u32,
            (2, false) => u16::from_le_bytes([px[0], px[1]]) as u32,
            (2, true) => u16::from_be_bytes([px[0], px[1]]) as u32,
            (_, false) => u32::from_le_bytes([px[0], px[1], px[2], px[3]]),
            (_, true) => u32::from_be_bytes([px[0], px[1], px[2], px[3]]),
        }
    }

    /// Decodes one wire pixel into 8-bit RGB.
    pub fn decode(&self, px: &[u8]) -> [u8; 3] {
        let v = self.read_value(px);
        let channel = |shift: u8, max: u16| {
            let c = (v >> shift) & max as u32;
            ((c * 255 + max as u32 / 2) / max as u32) as u8
        };
        [
            channel(self.red_shift, self.red_max),
            channel(self.green_shift, self.green_max),
            channel(self.blue_shift, self.blue_max),
        ]
    }

    /// Encodes 8-bit RGB into one wire pixel.
    pub fn encode(&self, rgb: [u8; 3], out: &mut Vec<u8>) {
        let scale = |c: u8, max: u16| (c as u32 * max as u32 + 127) / 255;
        let v = (scale(rgb[0], self.red_max) << self.red_shift)
            | (scale(rgb[1], self.green_max) << self.green_shift)
            | (scale(rgb[2], self.blue_max) << self.blue_shift);
        match (self.bytes_per_pixel(), self.big_endian) {
            (1, _) => out.push(v as u8),
            (2, false) => out.extend_from_slice(&(v as u16).to_le_bytes()),
            (2, true) => out.extend_from_slice(&(v as u16).to_be_bytes()),
            (_, false) => out.extend_from_slice(&v.to_le_bytes()),
            (_, true) => out.extend_from_slice(&v.to_be_bytes()),
        }
    }
}

pub fn set_pixel_format(pf: &PixelFormat) -> Vec<u8> {
    let mut m = vec![client_msg::SET_PIXEL_FORMAT, 0, 0, 0];
    m.extend_from_slice(&pf.to_bytes());
    m
}

pub fn set_encodings(encodings: &[i32]) -> Vec<u8> {
    let mut m = vec![client_msg::SET_ENCODINGS, 0];
    m.extend_from_slice(&(encodings.len() as u16).to_be_bytes());
    for e in encodings {
        m.extend_from_slice(&e.to_be_bytes());
    }
    m
}

pub fn framebuffer_update_request(incremental: bool, x: u16, y: u16, w: u16, h: u16) -> [u8; 10] {
    let mut m = [0u8; 10];
    m[0] = client_msg::FRAMEBUFFER_UPDATE_REQUEST;
    m[1] = incremental as u8;
    m[2..4].copy_from_slice(&x.to_be_bytes());
    m[4..6].copy_from_slice(&y.to_be_bytes());
    m[6..8].copy_from_slice(&w.to_be_bytes());
    m[8..10].copy_from_slice(&h.to_be_bytes());
    m
}

pub fn key_event(down: bool, keysym: u32) -> [u8; 8] {
    let mut m = [0u8; 8];
    m[0] = client_msg::KEY_EVENT;
    m[1] = down as u8;
    m[4..8].copy_from_slice(&keysym.to_be_bytes());
    m
}

pub fn pointer_event(mask: u8, x: u16, y: u16) -> [u8; 6] {
    let mut m = [0u8; 6];
    m[0] = client_msg::POINTER_EVENT;
    m[1] = mask;
    m[2..4].copy_from_slice(&x.to_be_bytes());
    m[4..6].copy_from_slice(&y.to_be_bytes());
    m
}

/// Response to a VNC authentication challenge: the challenge DES-encrypted
/// with the password (truncated or zero-padded to 8 bytes, each key byte
/// bit-reversed).
pub fn vnc_auth_response(password: &str, challenge: &[u8; 16]) -> [u8; 16] {
    let mut key = [0u8; 8];
    for (k, b) in key.iter_mut().zip(password.bytes()) {
        *k = b.reverse_bits();
    }
    let cipher = Des::new_from_slice(&key).expect("DES key is 8 bytes");
    let mut out = *challenge;
    for chunk in out.chunks_exact_mut(8) {
        cipher.encrypt_block(GenericArray::from_mut_slice(chunk));
    }
    out
}

/// Parses a 12-byte ProtocolVersion message into (major, minor).
pub fn parse_version(v: &[u8; 12]) -> Option<(u32, u32)> {
    let s = std::str::from_utf8(v).ok()?;
    let rest = s.strip_prefix("RFB ")?.strip_suffix('\n')?;
    let (major, minor) = rest.split_once('.')?;
    if major.len() != 3 || minor.len() != 3 {
        return None;
    }
    Some((major.parse().ok()?, minor.parse().ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn click_pointer_bytes() {
        assert_eq!(
            pointer_event(1, 10, 760),
            [0x05, 0x01, 0x00, 0x0A, 0x02, 0xF8]
        );
        assert_eq!(
            pointer_event(0, 10, 760),
            [0x05, 0x00, 0x00, 0x0A, 0x02, 0xF8]
        );
    }

    #[test]
    fn pixel_format_round_trip() {
        let pf = PixelFormat {
            bits_per_pixel: 16,
            depth: 16,
            big_endian: true,
            red_max: 31,
            green_max: 63,
            blue_max: 31,
            red_shift: 11,
            green_shift: 5,
            blue_shift: 0,
            ..Default::default()
        };
        assert_eq!(PixelFormat::from_bytes(&pf.to_bytes()), pf);
        for rgb in [[0, 0, 0], [255, 255, 255], [255, 0, 0], [0, 255, 0]] {
            let mut buf = Vec::new();
            pf.encode(rgb, &mut buf);
            assert_eq!(pf.decode(&buf), rgb);
        }
    }

    #[test]
    fn default_format_is_bgrx_little_endian() {
        let mut buf = Vec::new();
        PixelFormat::default().encode([255, 0, 0], &mut buf);
        assert_eq!(buf, [0x00, 0x00, 0xFF, 0x00]);
    }

    #[test]
    fn versions() {
        assert_eq!(parse_version(PROTOCOL_VERSION_3_8), Some((3, 8)));
        assert_eq!(parse_version(b"RFB 004.001\n"), Some((4, 1)));
        assert_eq!(parse_version(b"HTTP/1.1 200"), None);
    }
}
