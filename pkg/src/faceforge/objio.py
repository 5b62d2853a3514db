"""Wavefront OBJ + MTL export/import for the textured face meshes.

The OBJ carries per-vertex uv coordinates and references an MTL whose diffuse
map is the emitted texture PNG, so the pair opens in standard viewers.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ParameterError
from .synthface import FaceMesh


def write_obj(path, mesh: FaceMesh, texture_filename: str | None = None) -> Path:
    """Write the mesh; a texture filename adds a sibling .mtl referencing it."""
    path = Path(path)
    lines = []
    if texture_filename is not None:
        mtl_path = path.with_suffix(".mtl")
        mtl_path.write_text(
            "newmtl face\nKd 1.0 1.0 1.0\nmap_Kd " + texture_filename + "\n"
        )
        lines.append(f"mtllib {mtl_path.name}")
        lines.append("usemtl face")
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.9f} {v[1]:.9f} {v[2]:.9f}")
    for uv in mesh.uv:
        lines.append(f"vt {uv[0]:.9f} {uv[1]:.9f}")
    for f in mesh.faces:
        a, b, c = (int(i) + 1 for i in f)  # OBJ indices are 1-based
        lines.append(f"f {a}/{a} {b}/{b} {c}/{c}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_obj(path) -> FaceMesh:
    """Parse an OBJ written by :func:`write_obj` back into a mesh."""
    vertices, uvs, faces = [], [], []
    for raw in Path(path).read_text().splitlines():
        parts = raw.split()
        if not parts:
            continue
        tag = parts[0]
        if tag == "v":
            vertices.append([float(x) for x in parts[1:4]])
        elif tag == "vt":
            uvs.append([float(x) for x in parts[1:3]])
        elif tag == "f":
            idx = []
            for token in parts[1:4]:
                vi = token.split("/")[0]
                idx.append(int(vi) - 1)
            faces.append(idx)
    if not vertices or not faces:
        raise ParameterError(f"{path}: no mesh data")
    if len(uvs) != len(vertices):
        raise ParameterError(f"{path}: uv count {len(uvs)} != vertex count {len(vertices)}")
    mesh = FaceMesh(
        vertices=np.array(vertices, dtype=np.float64),
        faces=np.array(faces, dtype=np.int64),
        uv=np.array(uvs, dtype=np.float64),
    )
    if mesh.faces.min() < 0 or mesh.faces.max() >= len(vertices):
        raise ParameterError(f"{path}: face index out of range")
    return mesh
