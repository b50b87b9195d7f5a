#!/usr/bin/env python3
"""Writes Kite- and Floret-style topology files into data/topologies/.

Both use the node layout of the built-in mesh generator for the default
system: a 9x10 grid at 3.5 mm pitch, one I/O chiplet in the middle of each
side, and cluster blocks (25 standard, 28 shared-ADC, 10 accumulator,
15 ADC-less) filled row-major. Only the links differ.

kite    mesh links plus two-hop horizontal skip links and both diagonals.
floret  four petals around the grid centre; each petal is a serpentine
        chain starting next to the centre, and the petal heads form a ring.
"""

import argparse
import pathlib

ROWS, COLS, PITCH = 9, 10, 3.5
BLOCKS = [("standard", 25, 4.0), ("shared_adc", 28, 9.0), ("accumulator", 10, 4.0), ("adc_less", 15, 4.0)]
IO_AREA = 4.0


def layout():
    io = {(0, COLS // 2), (ROWS - 1, COLS // 2), (ROWS // 2, 0), (ROWS // 2, COLS - 1)}
    kinds = [(name, area) for name, n, area in BLOCKS for _ in range(n)]
    nodes, at = [], {}
    for r in range(ROWS):
        for c in range(COLS):
            if (r, c) in io:
                kind, area = "io", IO_AREA
            elif kinds:
                kind, area = kinds.pop(0)
            else:
                continue
            at[(r, c)] = len(nodes)
            nodes.append(dict(id=len(nodes), kind=kind, x=c * PITCH, y=r * PITCH, area=area))
    return nodes, at


def kite_edges(at):
    edges = set()
    for (r, c), a in at.items():
        for dr, dc in [(0, 1), (1, 0), (0, 2), (1, 1), (1, -1)]:
            b = at.get((r + dr, c + dc))
            if b is not None:
                edges.add((min(a, b), max(a, b)))
    return sorted(edges)


def serpentine(cells, centre):
    """Boustrophedon order over `cells`, starting from the row nearest `centre`."""
    rows = sorted({r for r, _ in cells}, key=lambda r: abs(r - centre[0]))
    order = []
    for i, r in enumerate(rows):
        row = sorted((c for rr, c in cells if rr == r), key=lambda c: abs(c - centre[1]))
        order.extend((r, c) for c in (row if i % 2 == 0 else row[::-1]))
    return order


def floret_edges(at):
    cr, cc = (ROWS - 1) / 2, (COLS - 1) / 2
    petals = [[], [], [], []]
    for r, c in at:
        petals[(r > cr) * 2 + (c > cc)].append((r, c))
    edges, heads = set(), []
    for cells in petals:
        chain = [at[cell] for cell in serpentine(cells, (cr, cc))]
        heads.append(chain[0])
        edges.update((min(a, b), max(a, b)) for a, b in zip(chain, chain[1:]))
    for a, b in zip(heads, heads[1:] + heads[:1]):
        edges.add((min(a, b), max(a, b)))
    return sorted(edges)


def write(path, nodes, edges, title):
    out = [f"# {title}", "version = 1", ""]
    for n in nodes:
        out += [
            "[[nodes]]",
            f"id = {n['id']}",
            f'pim_type = "{n["kind"]}"',
            f"x_mm = {n['x']}",
            f"y_mm = {n['y']}",
            f"area_mm2 = {n['area']}",
            "",
        ]
    for a, b in edges:
        out += ["[[edges]]", f"a = {a}", f"b = {b}", ""]
    path.write_text("\n".join(out))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path(__file__).parent.parent / "data" / "topologies")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    nodes, at = layout()
    write(args.out / "kite.toml", nodes, kite_edges(at), "Kite-style interposer: mesh plus skip and diagonal links")
    write(args.out / "floret.toml", nodes, floret_edges(at), "Floret-style interposer: four serpentine petals joined at the centre")


if __name__ == "__main__":
    main()
