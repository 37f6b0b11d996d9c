#!/usr/bin/env python3
"""Independent recomputation of the hash vectors frozen in tests/unit/hash_vectors_test.cpp."""
import hashlib
import struct


def tagged(tag: str, data: bytes) -> bytes:
    t = tag.encode()
    return hashlib.sha256(struct.pack("<I", len(t)) + t + data).digest()


def s(x: str) -> bytes:
    b = x.encode()
    return struct.pack("<I", len(b)) + b


def object_id(label):
    return tagged("fpl/object-id", s(label))


def user_key(name):
    return tagged("fpl/user-key", s(name))


def validator_key(i):
    return tagged("fpl/validator-key", struct.pack("<I", i))


def sign(pk, msg):
    return tagged("fpl/sig", pk + msg)


class Nonces:
    def __init__(self, seed):
        self.seed, self.i = seed, 0

    def next(self):
        d = tagged("fpl/auth/nonce", struct.pack("<QQ", self.seed, self.i))
        self.i += 1
        return d


def nonce_bytes(n):
    return b"\x00" if n is None else b"\x01" + n


def leaf_pk(pk, nonce=None):
    return tagged("fpl/auth/leaf", b"\x00" + pk + nonce_bytes(nonce))


def leaf_after(t, nonce=None):
    return tagged("fpl/auth/leaf", b"\x03" + struct.pack("<q", t) + nonce_bytes(nonce))


def threshold(w, weights, kids, nonce=None):
    body = b"\x05" + struct.pack("<QI", w, len(kids)) + b"".join(struct.pack("<Q", x) for x in weights)
    return tagged("fpl/auth/branch", body + nonce_bytes(nonce) + b"".join(kids))


def main():
    print("sha256_abc", hashlib.sha256(b"abc").hexdigest())
    print("object_id_A", object_id("A").hex())
    print("user_key_alice", user_key("alice").hex())
    print("validator_key_3", validator_key(3).hex())
    print("sig_alice_zero", sign(user_key("alice"), bytes(32)).hex())
    print("leaf_after_100", leaf_after(100).hex())
    n = Nonces(7)
    root_nonce = n.next()
    kid_nonces = [n.next() for _ in range(3)]
    kids = [leaf_pk(user_key(u), kn) for u, kn in zip(["alice", "bob", "carol"], kid_nonces)]
    print("threshold_2_of_3_seed7", threshold(2, [1, 1, 1], kids, root_nonce).hex())
    # Budget table: floor(m * (f+1) / (2f+1)).
    for m, f in [(100, 1), (0, 1), (21, 1), (60, 1), (100, 2), (1, 1)]:
        print(f"budget_{m}_{f}", m * (f + 1) // (2 * f + 1))


if __name__ == "__main__":
    main()
