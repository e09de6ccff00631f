#!/usr/bin/env python3
"""Draws the synthetic gecko target used by the default training runs.

The image is a top-down lizard silhouette with a curled tail, four splayed
legs and a few darker dorsal spots. It is deliberately asymmetric so that the
two-organism experiments show offset-dependent interaction.
"""
import argparse
import math

from PIL import Image, ImageDraw


def rotate(points, cx, cy, angle):
    c, s = math.cos(angle), math.sin(angle)
    return [(cx + (x - cx) * c - (y - cy) * s, cy + (x - cx) * s + (y - cy) * c)
            for x, y in points]


def draw(size):
    scale = 4
    big = size * scale
    img = Image.new("RGBA", (big, big), (0, 0, 0, 0))
    d = ImageDraw.Draw(img)
    u = big / 40.0
    body = (104, 184, 72, 255)
    dark = (58, 120, 44, 255)
    eye = (236, 164, 52, 255)
    cx, cy = 20 * u, 20 * u
    angle = math.radians(-35)

    def poly(pts, fill):
        d.polygon(rotate([(x * u, y * u) for x, y in pts], cx, cy, angle), fill=fill)

    def ellipse(x0, y0, x1, y1, fill, n=32):
        ex, ey = (x0 + x1) / 2, (y0 + y1) / 2
        rx, ry = (x1 - x0) / 2, (y1 - y0) / 2
        pts = [(ex + rx * math.cos(2 * math.pi * k / n), ey + ry * math.sin(2 * math.pi * k / n))
               for k in range(n)]
        poly(pts, fill)

    # tail curling to one side
    tail = []
    for k in range(24):
        t = k / 23
        r = 2.8 * (1 - t) + 1.0
        a = math.pi * 1.1 * t
        x = 20 + 5 * math.sin(a) * t * 1.4
        y = 27 + 9 * t
        tail.append((x - r, y))
        tail.insert(0, (x + r, y))
    poly(tail, body)
    # legs
    for sx, sy, ex, ey in [(17, 15, 11, 11), (23, 15, 29, 12), (17, 25, 11, 29), (23, 25, 29, 28)]:
        poly([(sx - 1.7, sy), (sx + 1.7, sy), (ex + 1.7, ey), (ex - 1.7, ey)], body)
        ellipse(ex - 1.8, ey - 1.8, ex + 1.8, ey + 1.8, body)
    ellipse(16, 12, 24, 29, body)
    ellipse(16.5, 4, 23.5, 13, body)
    ellipse(17.3, 6.5, 19.2, 8.5, eye)
    ellipse(20.8, 6.5, 22.7, 8.5, eye)
    for sx, sy in [(19, 17), (21.5, 20), (18.5, 23), (21, 26)]:
        ellipse(sx - 1, sy - 1, sx + 1, sy + 1, dark)
    img = img.resize((size, size), Image.LANCZOS)
    # crop to the opaque extent plus a one-pixel margin
    x0, y0, x1, y1 = img.getchannel("A").point(lambda a: 255 if a > 25 else 0).getbbox()
    return img.crop((max(x0 - 1, 0), max(y0 - 1, 0), min(x1 + 1, size), min(y1 + 1, size)))


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--size", type=int, default=40)
    parser.add_argument("--out", default="data/gecko.png")
    args = parser.parse_args()
    draw(args.size).save(args.out)


if __name__ == "__main__":
    main()
