#!/usr/bin/env python3
"""Scalar reference for the receipt hash check. Prints the values pinned in
tests/test_pow.cpp; rerun after changing the hashing rules."""
import hashlib


def zero_bits(digest: bytes) -> int:
    n = 0
    for b in digest:
        if b == 0:
            n += 8
            continue
        return n + 8 - b.bit_length()
    return n


def digest(alg: int, text: str) -> bytes:
    data = text.encode("ascii")
    if alg == 0:
        return hashlib.sha256(data).digest()
    if alg == 1:
        return hashlib.sha256(hashlib.sha256(data).digest()).digest()
    return hashlib.sha512(data).digest()


def first_solution(alg: int, difficulty: int, nonce: str, start: int = 0) -> int:
    c = start
    while zero_bits(digest(alg, f"{alg}:{difficulty}:{nonce}:{c}")) < difficulty:
        c += 1
    return c


if __name__ == "__main__":
    for alg in (0, 1, 2):
        print(f"golden alg={alg} d=16 nonce=12345 -> {first_solution(alg, 16, '12345')}")
    print(f"golden alg=0 d=8 nonce=12345 -> {first_solution(0, 8, '12345')}")
    print(f"golden alg=0 d=12 nonce=892734982734987 -> {first_solution(0, 12, '892734982734987')}")
    # First counter whose digest is exactly 8 zero bits, so it passes d=8
    # and fails d=9.
    c = 0
    while zero_bits(digest(0, f"0:8:777:{c}")) != 8:
        c += 1
    d = digest(0, f"0:8:777:{c}")
    print(f"fixture 0:8:777:{c} digest={d.hex()}")
    s = first_solution(0, 8, "777")
    print(f"solution+1 check: 0:8:777:{s + 1} bits={zero_bits(digest(0, f'0:8:777:{s + 1}'))}")
    print("paper example bits:", zero_bits(digest(0, "0:21:892734982734987:193287436879263")))
    print("zero-difficulty digest 0:0:1:0:", digest(0, "0:0:1:0").hex())
