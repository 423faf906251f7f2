#!/usr/bin/env python3
"""Regenerates core/include/brwlimit/ziggurat_tables.hpp."""
import math
import pathlib

LAYERS = 256
R = 3.6541528853610088
V = 0.00492867323399


def pdf(x):
    return math.exp(-x * x / 2)


def tables():
    x = [0.0] * (LAYERS + 1)
    x[0] = V / pdf(R)
    x[1] = R
    for i in range(2, LAYERS):
        x[i] = math.sqrt(-2 * math.log(V / x[i - 1] + pdf(x[i - 1])))
    f = [pdf(v) for v in x]
    f[0] = 0.0
    return x, f


def block(values):
    rows = []
    for i in range(0, len(values), 3):
        rows.append("    " + " ".join(float.hex(v) + "," for v in values[i:i + 3]))
    return "\n".join(rows)


def main():
    x, f = tables()
    out = pathlib.Path(__file__).resolve().parents[1] / "core/include/brwlimit/ziggurat_tables.hpp"
    out.write_text(f"""// Generated table data for the 256-layer normal ziggurat
// (Marsaglia & Tsang 2000, R = {R!r}, V = {V!r}).
// x[i]: right edge of layer i, x[1] = R, x[256] = 0; x[0] = V / pdf(R).
// f[i]: exp(-x[i]^2 / 2), with f[0] = 0.
// Regenerate with tools/gen_ziggurat.py.
#pragma once

namespace brwlimit::detail {{

inline constexpr double kZigguratX[257] = {{
{block(x)}
}};

inline constexpr double kZigguratF[257] = {{
{block(f)}
}};

}}  // namespace brwlimit::detail
""")


if __name__ == "__main__":
    main()
