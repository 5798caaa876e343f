#!/usr/bin/env python3
# Copyright 2026 The Curette Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Recomputes the frozen constants in frozen_values.hpp without touching the
C++ code: hash64 is SHA-256 over length-prefixed parts, first 8 digest bytes
read little-endian."""
import hashlib
import struct


def hash64(*parts):
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, int):
            h.update(struct.pack("<Q", p))
        else:
            b = p.encode()
            h.update(struct.pack("<Q", len(b)))
            h.update(b)
    return struct.unpack("<Q", h.digest()[:8])[0]


def unit(h):
    return (h >> 11) * 2.0**-53


def main():
    print("hash64(0) =", hex(hash64(0)))
    print('hash64(42, "coin", "s00000") =', hex(hash64(42, "coin", "s00000")))
    print('hash64("") =', hex(hash64("")))

    seed, p = 42, 0.5
    ids = ["s%05d" % i for i in range(10000)]
    replaced = sum(1 for i in ids if unit(hash64(seed, "coin", i)) < p)
    print("coin-flip replaced (seed 42, p 0.5, 10000 samples) =", replaced)

    universe = ["s%04d" % i for i in range(1000)]
    ranked = sorted((hash64(seed, "noisy", i), i) for i in universe)
    noisy = sorted(i for _, i in ranked[:round(0.05 * len(universe))])
    print("noisy count =", len(noisy))
    print("noisy digest =", hashlib.sha256(",".join(noisy).encode()).hexdigest()[:16])
    print("first noisy ids =", noisy[:5])


if __name__ == "__main__":
    main()
