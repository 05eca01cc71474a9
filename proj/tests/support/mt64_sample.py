"""Reference seeded subset draw: 64-bit Mersenne Twister plus partial Fisher-Yates with rejection."""

import sys

MASK = (1 << 64) - 1


class MT64:
    def __init__(self, seed):
        self.mt = [0] * 312
        self.mt[0] = seed & MASK
        for i in range(1, 312):
            self.mt[i] = (6364136223846793005 * (self.mt[i - 1] ^ (self.mt[i - 1] >> 62)) + i) & MASK
        self.idx = 312

    def _twist(self):
        upper, lower = 0xFFFFFFFF80000000, 0x7FFFFFFF
        for i in range(312):
            x = (self.mt[i] & upper) | (self.mt[(i + 1) % 312] & lower)
            xa = x >> 1
            if x & 1:
                xa ^= 0xB5026F5AA96619E9
            self.mt[i] = self.mt[(i + 156) % 312] ^ xa
        self.idx = 0

    def __call__(self):
        if self.idx >= 312:
            self._twist()
        y = self.mt[self.idx]
        self.idx += 1
        y ^= (y >> 29) & 0x5555555555555555
        y ^= (y << 17) & 0x71D67FFFEDA60000
        y ^= (y << 37) & 0xFFF7EEE000000000
        y ^= y >> 43
        return y & MASK


def sample(count, n, seed):
    rng = MT64(seed)
    order = list(range(count))
    for i in range(n):
        bound = count - i
        limit = MASK - MASK % bound
        while True:
            v = rng()
            if v < limit:
                break
        j = i + v % bound
        order[i], order[j] = order[j], order[i]
    return order[:n]


if __name__ == "__main__":
    check = MT64(5489)
    for _ in range(9999):
        check()
    assert check() == 9981545732273789042, "generator mismatch"
    count, n, seed = (int(a) for a in sys.argv[1:4])
    print(sample(count, n, seed))
