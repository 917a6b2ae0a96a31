"""Reader/writer for the ugks-mesh ASCII format.

Layout, one token group per line, '.' decimal point:

    ugks-mesh 1
    nodes <N>
    <x y z>            (N lines)
    tets <T>
    <i0 i1 i2 i3>      (T lines, 0-based node ids)
    hexes <H>
    <i0 .. i7>         (H lines, VTK hexahedron ordering)
    patches <P>
    <name> <F>         (then F lines of 3 or 4 node ids)

Floats are written with repr so a save/load round trip is bit-identical.
"""

from __future__ import annotations

import numpy as np

from .geometry import Mesh, MeshError

MAGIC = "ugks-mesh"
VERSION = 1


class _Lines:
    def __init__(self, text):
        self.raw = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        self.pos = 0

    def next(self):
        while self.pos < len(self.raw):
            ln = self.raw[self.pos]
            self.pos += 1
            if ln:
                return ln
        raise MeshError("unexpected end of mesh file")


def load_mesh(path, periodic_pairs=()):
    """Parse, build, and validate a mesh from a ugks-mesh file."""
    with open(path, "r", encoding="ascii") as fh:
        lines = _Lines(fh.read())

    head = lines.next().split()
    if len(head) != 2 or head[0] != MAGIC or head[1] != str(VERSION):
        raise MeshError(f"bad header {head!r}; expected '{MAGIC} {VERSION}'")

    def counted(tag):
        tok = lines.next().split()
        if len(tok) != 2 or tok[0] != tag:
            raise MeshError(f"expected '{tag} <count>', got {tok!r}")
        try:
            n = int(tok[1])
        except ValueError as exc:
            raise MeshError(f"bad count for {tag}: {tok[1]!r}") from exc
        if n < 0:
            raise MeshError(f"negative count for {tag}")
        return n

    nn = counted("nodes")
    nodes = np.empty((nn, 3))
    for i in range(nn):
        parts = lines.next().split()
        if len(parts) != 3:
            raise MeshError(f"node {i}: expected 3 coordinates")
        nodes[i] = [float(p) for p in parts]

    def cells(tag, width):
        count = counted(tag)
        out = []
        for i in range(count):
            parts = lines.next().split()
            if len(parts) != width:
                raise MeshError(f"{tag} {i}: expected {width} node ids")
            out.append(tuple(int(p) for p in parts))
        return out

    tets = cells("tets", 4)
    hexes = cells("hexes", 8)

    np_ = counted("patches")
    patch_faces = {}
    for _ in range(np_):
        tok = lines.next().split()
        if len(tok) != 2:
            raise MeshError(f"expected '<patch-name> <faces>', got {tok!r}")
        name, nf = tok[0], int(tok[1])
        if name in patch_faces:
            raise MeshError(f"duplicate patch name {name!r}")
        faces = []
        for i in range(nf):
            ids = [int(p) for p in lines.next().split()]
            if len(ids) not in (3, 4):
                raise MeshError(f"patch {name!r} face {i}: need 3 or 4 node ids")
            faces.append(tuple(ids))
        patch_faces[name] = faces

    mesh = Mesh.build(nodes, tets, hexes, patch_faces, periodic_pairs=periodic_pairs)
    mesh.validate()
    return mesh


def save_mesh(mesh: Mesh, path):
    """Write the mesh's construction data back out in ugks-mesh form."""
    tets, hexes, patch_faces = mesh._source
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{MAGIC} {VERSION}\n")
        fh.write(f"nodes {len(mesh.nodes)}\n")
        for x, y, z in mesh.nodes:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
        fh.write(f"tets {len(tets)}\n")
        for c in tets:
            fh.write(" ".join(str(i) for i in c) + "\n")
        fh.write(f"hexes {len(hexes)}\n")
        for c in hexes:
            fh.write(" ".join(str(i) for i in c) + "\n")
        fh.write(f"patches {len(patch_faces)}\n")
        for name, faces in patch_faces.items():
            fh.write(f"{name} {len(faces)}\n")
            for ids in faces:
                fh.write(" ".join(str(i) for i in ids) + "\n")
