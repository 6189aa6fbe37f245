"""Scalar reference for the bicubic fixture used by the resize tests.

Cubic convolution kernel with a = -0.5, sample positions
(dst + 0.5) / scale - 0.5, edge replication, kernel widened by 1/scale when
downscaling with antialiasing, weights normalized per output sample.
Resizes rows (height) first, then columns, in double precision.

Run:  python3 gen_bicubic.py > bicubic.txt
"""
import math


def cubic(x):
    a = -0.5
    x = abs(x)
    if x <= 1:
        return (a + 2) * x ** 3 - (a + 3) * x ** 2 + 1
    if x < 2:
        return a * x ** 3 - 5 * a * x ** 2 + 8 * a * x - 4 * a
    return 0.0


def resize_1d(src, out_len, scale, antialias):
    n = len(src)
    shrink = antialias and scale < 1
    width = 4.0 / scale if shrink else 4.0
    out = []
    for i in range(out_len):
        x = (i + 0.5) / scale - 0.5
        left = math.floor(x - width / 2)
        taps = math.ceil(width) + 2
        ws, vs = [], []
        for t in range(taps):
            j = left + t
            w = scale * cubic(scale * (x - j)) if shrink else cubic(x - j)
            ws.append(w)
            vs.append(src[min(max(j, 0), n - 1)])
        total = sum(ws)
        out.append(sum(w * v for w, v in zip(ws, vs)) / total)
    return out


def resize(img, scale, antialias):
    h, w = len(img), len(img[0])
    oh, ow = math.ceil(h * scale), math.ceil(w * scale)
    cols = [resize_1d([img[y][x] for y in range(h)], oh, scale, antialias) for x in range(w)]
    tmp = [[cols[x][y] for x in range(w)] for y in range(oh)]
    return [resize_1d(row, ow, scale, antialias) for row in tmp]


def emit(name, img):
    print(f"{name} {len(img)} {len(img[0])}")
    for row in img:
        print(" ".join(f"{v:.9f}" for v in row))


def pattern(h, w):
    return [[((7 * y + 3 * x) % 11) / 10.0 + 0.05 * math.sin(x * y) for x in range(w)] for y in range(h)]


small = pattern(5, 4)
big = pattern(8, 8)
emit("input_small", small)
emit("up2", resize(small, 2.0, False))
emit("input_big", big)
emit("down2_aa", resize(big, 0.5, True))
emit("down2_plain", resize(big, 0.5, False))
emit("up3", resize(small, 3.0, False))
