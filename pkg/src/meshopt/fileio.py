"""Wavefront OBJ and TetGen .node/.ele readers and writers.

Both formats are ASCII and whitespace-tolerant.  OBJ uses 1-based indices;
TetGen files declare their own index base (0 or 1) which is detected from
the first record.  UV optimization problems read `vt` records as the
optimization variable and `v` records as the 3D rest surface.
"""

from __future__ import annotations

import numpy as np


class ObjData:
    """Raw contents of an OBJ file: positions, optional UVs, triangles."""

    def __init__(self, vertices, faces, uvs=None, uv_faces=None):
        self.vertices = np.asarray(vertices, dtype=np.float64)
        self.faces = np.asarray(faces, dtype=np.int64)
        self.uvs = None if uvs is None else np.asarray(uvs, dtype=np.float64)
        self.uv_faces = None if uv_faces is None else np.asarray(uv_faces, dtype=np.int64)


def read_obj(path) -> ObjData:
    """Read v/vt/f records from an OBJ file; faces must be triangles."""
    vertices, uvs, faces, uv_faces = [], [], [], []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                vertices.append([float(p) for p in parts[1:4]])
            elif tag == "vt":
                uvs.append([float(p) for p in parts[1:3]])
            elif tag == "f":
                if len(parts) != 4:
                    raise ValueError(f"{path}:{lineno}: only triangle faces are supported")
                vidx, tidx = [], []
                for token in parts[1:]:
                    fields = token.split("/")
                    vidx.append(int(fields[0]) - 1)
                    if len(fields) > 1 and fields[1]:
                        tidx.append(int(fields[1]) - 1)
                faces.append(vidx)
                if len(tidx) == 3:
                    uv_faces.append(tidx)
    return ObjData(
        vertices,
        faces,
        uvs=uvs if uvs else None,
        uv_faces=uv_faces if len(uv_faces) == len(faces) and uv_faces else None,
    )


def write_obj(path, vertices, faces, uvs=None) -> None:
    """Write an OBJ file; 2D vertices are padded with z = 0.

    When uvs is given (one per vertex), vt records are emitted and faces
    reference them as v/vt.
    """
    vertices = np.asarray(vertices, dtype=np.float64)
    if vertices.shape[1] == 2:
        vertices = np.column_stack([vertices, np.zeros(len(vertices))])
    faces = np.asarray(faces, dtype=np.int64)
    with open(path, "w") as fh:
        for v in vertices:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        if uvs is not None:
            for t in np.asarray(uvs, dtype=np.float64):
                fh.write(f"vt {t[0]:.17g} {t[1]:.17g}\n")
            for f in faces + 1:
                fh.write(f"f {f[0]}/{f[0]} {f[1]}/{f[1]} {f[2]}/{f[2]}\n")
        else:
            for f in faces + 1:
                fh.write(f"f {f[0]} {f[1]} {f[2]}\n")


def _data_lines(path):
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                yield line.split()


def read_node(path) -> np.ndarray:
    """Read a TetGen .node file; returns (n, dim) positions."""
    lines = _data_lines(path)
    header = next(lines)
    count, dim = int(header[0]), int(header[1])
    rows = [next(lines) for _ in range(count)]
    first_index = int(rows[0][0])
    order = np.argsort([int(r[0]) - first_index for r in rows])
    pts = np.array([[float(v) for v in rows[i][1 : 1 + dim]] for i in order])
    return pts


def read_ele(path) -> np.ndarray:
    """Read a TetGen .ele file; returns (m, 4) zero-based tetrahedra."""
    lines = _data_lines(path)
    header = next(lines)
    count = int(header[0])
    nodes_per = int(header[1]) if len(header) > 1 else 4
    if nodes_per != 4:
        raise ValueError(f"{path}: only 4-node tetrahedra are supported")
    rows = [next(lines) for _ in range(count)]
    ele = np.array([[int(v) for v in r[1:5]] for r in rows], dtype=np.int64)
    base = ele.min()
    if base not in (0, 1):
        raise ValueError(f"{path}: cannot infer index base (minimum index {base})")
    return ele - base


def write_node(path, positions) -> None:
    """Write a TetGen .node file with 1-based indices."""
    positions = np.asarray(positions, dtype=np.float64)
    n, dim = positions.shape
    with open(path, "w") as fh:
        fh.write(f"{n} {dim} 0 0\n")
        for i, p in enumerate(positions, 1):
            coords = " ".join(f"{c:.17g}" for c in p)
            fh.write(f"{i} {coords}\n")


def write_ele(path, tets) -> None:
    """Write a TetGen .ele file with 1-based indices."""
    tets = np.asarray(tets, dtype=np.int64)
    with open(path, "w") as fh:
        fh.write(f"{tets.shape[0]} 4 0\n")
        for i, t in enumerate(tets + 1, 1):
            fh.write(f"{i} {t[0]} {t[1]} {t[2]} {t[3]}\n")
