#!/usr/bin/env python3
"""Independent RFB 3.8 byte encoder (RFC 6143 message layouts).

Writes rfb_fixtures.json next to this script. The Rust conformance tests
replay the server streams and compare what the client sends against the
expected client streams produced here.
"""
import json
import os
import struct

try:
    from cryptography.hazmat.decrepit.ciphers.algorithms import TripleDES
except ImportError:  # older cryptography
    from cryptography.hazmat.primitives.ciphers.algorithms import TripleDES
from cryptography.hazmat.primitives.ciphers import Cipher, modes


def pixel_format(bpp=32, depth=24, big_endian=0, true_colour=1,
                 rmax=255, gmax=255, bmax=255, rshift=16, gshift=8, bshift=0):
    return struct.pack(">BBBBHHHBBB3x", bpp, depth, big_endian, true_colour,
                       rmax, gmax, bmax, rshift, gshift, bshift)


def server_init(w, h, name=b"mock"):
    return struct.pack(">HH", w, h) + pixel_format() + struct.pack(">I", len(name)) + name


def set_pixel_format():
    return struct.pack(">B3x", 0) + pixel_format()


def set_encodings(encodings):
    return struct.pack(">BxH", 2, len(encodings)) + b"".join(struct.pack(">i", e) for e in encodings)


def fb_update_request(incremental, x, y, w, h):
    return struct.pack(">BBHHHH", 3, incremental, x, y, w, h)


def key_event(down, keysym):
    return struct.pack(">BBxxI", 4, 1 if down else 0, keysym)


def pointer_event(mask, x, y):
    return struct.pack(">BBHH", 5, mask, x, y)


def raw_pixel(r, g, b):
    return struct.pack("<I", (r << 16) | (g << 8) | b)


def fb_update(rects):
    out = struct.pack(">BxH", 0, len(rects))
    for (x, y, w, h, pixels) in rects:
        out += struct.pack(">HHHHi", x, y, w, h, 0)
        out += b"".join(raw_pixel(*p) for p in pixels)
    return out


def vnc_auth_response(password, challenge):
    key = password.encode("latin-1")[:8].ljust(8, b"\0")
    key = bytes(int(f"{b:08b}"[::-1], 2) for b in key)
    enc = Cipher(TripleDES(key), modes.ECB()).encryptor()
    return enc.update(challenge) + enc.finalize()


def hx(b):
    return b.hex()


def main():
    fx = {}
    version = b"RFB 003.008\n"
    init_msgs = set_pixel_format() + set_encodings([0])

    fx["handshake_none"] = {
        "width": 1024, "height": 768,
        "server": [hx(version), hx(bytes([1, 1])), hx(struct.pack(">I", 0)), hx(server_init(1024, 768))],
        "client": [hx(version), hx(bytes([1])), hx(bytes([1])), hx(init_msgs)],
    }

    challenge = bytes(range(16))
    fx["vnc_auth"] = {
        "password": "secret",
        "challenge": hx(challenge),
        "response": hx(vnc_auth_response("secret", challenge)),
    }

    fx["click_10_760"] = hx(pointer_event(1, 10, 760) + pointer_event(0, 10, 760))
    fx["scroll_down_2_at_origin"] = hx(b"".join(pointer_event(m, 0, 0) for m in (0x10, 0, 0x10, 0)))
    fx["ctrl_a"] = hx(key_event(True, 0xFFE3) + key_event(True, 0x61) + key_event(False, 0x61) + key_event(False, 0xFFE3))
    fx["text_hi"] = hx(key_event(True, 0x48) + key_event(False, 0x48) + key_event(True, 0x69) + key_event(False, 0x69))

    red = [(255, 0, 0)] * 16
    fx["solid_red_4x4"] = {
        "width": 4, "height": 4,
        "server_init": hx(server_init(4, 4)),
        "request": hx(fb_update_request(0, 0, 0, 4, 4)),
        "updates": [hx(fb_update([(0, 0, 4, 4, red)]))],
        "rgb": hx(b"".join(bytes(p) for p in red)),
    }

    grad = [((x * 60) % 256, (y * 70) % 256, (x * y * 13) % 256) for y in range(4) for x in range(4)]
    top = grad[:8]
    bottom = grad[8:]
    fx["split_4x4"] = {
        "width": 4, "height": 4,
        "server_init": hx(server_init(4, 4)),
        "request": hx(fb_update_request(0, 0, 0, 4, 4)),
        "updates": [hx(fb_update([(0, 0, 4, 2, top)])), hx(fb_update([(0, 2, 4, 2, bottom)]))],
        "rgb": hx(b"".join(bytes(p) for p in grad)),
    }

    fx["version_33"] = hx(b"RFB 003.003\n")

    path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "rfb_fixtures.json")
    with open(path, "w") as f:
        json.dump(fx, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
