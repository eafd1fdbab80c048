"""Independent re-implementation of the reference embedder recipe.

Used to freeze the expected vectors in tests/reference_oracle.rs:

    python3 reference_recipe.py

Prints selected components of the text embedding of
"Health Monitoring Report" and of a 1x1 black image (dim 512, seed 42).
"""
import math

MASK = (1 << 64) - 1
DIM = 512
SEED = 42
PICK = [0, 1, 2, 3, 7, 100, 255, 511]


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def uniform(self):
        return (self.next() >> 11) * (1.0 / (1 << 53))


def gaussians(seed, count):
    rng = SplitMix64(seed)
    out = []
    while len(out) < count:
        u1 = 1.0 - rng.uniform()
        u2 = rng.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        out.append(r * math.cos(2.0 * math.pi * u2))
        out.append(r * math.sin(2.0 * math.pi * u2))
    return out[:count]


def fnv1a(data):
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & MASK
    return h


def normalize(v):
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


def text_embedding(text, dim=DIM, seed=SEED):
    padded = " " + text.lower() + " "
    counts = {}
    for i in range(len(padded) - 2):
        b = fnv1a(padded[i:i + 3].encode("utf-8")) % 4096
        counts[b] = counts.get(b, 0) + 1
    # Only rows up to the largest bucket are needed.
    rows = max(counts) + 1
    w = gaussians(seed ^ 0, rows * dim)
    out = [0.0] * dim
    for b, c in counts.items():
        for j in range(dim):
            out[j] += c * w[b * dim + j]
    return normalize(out)


def image_embedding(rgb_rows, dim=DIM, seed=SEED):
    h, w = len(rgb_rows), len(rgb_rows[0])
    w_mat = gaussians(seed ^ 0x494D4147, 256 * dim)
    grid = []
    for gy in range(16):
        y0 = gy * h // 16
        y1 = min(max((gy + 1) * h // 16, y0 + 1), h)
        for gx in range(16):
            x0 = gx * w // 16
            x1 = min(max((gx + 1) * w // 16, x0 + 1), w)
            s = 0.0
            for y in range(y0, y1):
                for x in range(x0, x1):
                    r, g, b = rgb_rows[y][x]
                    s += (0.299 * r + 0.587 * g + 0.114 * b) / 255.0
            grid.append(s / ((y1 - y0) * (x1 - x0)) - 0.5)
    out = [0.0] * dim
    for i, x in enumerate(grid):
        for j in range(dim):
            out[j] += x * w_mat[i * dim + j]
    return normalize(out)


if __name__ == "__main__":
    t = text_embedding("Health Monitoring Report")
    print("text", [repr(t[i]) for i in PICK])
    img = image_embedding([[(0, 0, 0)]])
    print("black", [repr(img[i]) for i in PICK])
    grad = [[(x * 16, y * 16, (x + y) * 8) for x in range(16)] for y in range(16)]
    g = image_embedding(grad)
    print("gradient", [repr(g[i]) for i in PICK])
