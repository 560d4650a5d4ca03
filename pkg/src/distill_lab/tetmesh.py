"""Deformable tetrahedral grid and differentiable marching tetrahedra.

The lattice is a Kuhn subdivision (six tetrahedra per cube around the main
diagonal), which is face-consistent across neighboring cubes, so extraction
from a sign-consistent field yields a closed oriented surface. Crossing
vertices are placed by linear interpolation

    v = (s_b p_a - s_a p_b) / (s_b - s_a)

and are differentiable with respect to both the per-vertex signed distances
and the bounded per-vertex position offsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
import torch.nn as nn

from .grids import GRID_BBOX

# Standard marching-tetrahedra tables (local edge ids into _TET_EDGES).
_TET_EDGES = torch.tensor(
    [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]], dtype=torch.long
)
_TRI_TABLE = torch.tensor(
    [
        [-1, -1, -1, -1, -1, -1],
        [1, 0, 2, -1, -1, -1],
        [4, 0, 3, -1, -1, -1],
        [1, 4, 2, 1, 3, 4],
        [3, 1, 5, -1, -1, -1],
        [2, 3, 0, 2, 5, 3],
        [1, 4, 0, 1, 5, 4],
        [4, 2, 5, -1, -1, -1],
        [4, 5, 2, -1, -1, -1],
        [4, 1, 0, 4, 5, 1],
        [3, 2, 0, 3, 5, 2],
        [1, 3, 5, -1, -1, -1],
        [4, 1, 2, 4, 3, 1],
        [3, 0, 4, -1, -1, -1],
        [2, 0, 1, -1, -1, -1],
        [-1, -1, -1, -1, -1, -1],
    ],
    dtype=torch.long,
)
_NUM_TRIS = torch.tensor([0, 1, 1, 2, 1, 2, 2, 1, 1, 2, 2, 1, 2, 1, 1, 0], dtype=torch.long)

ZERO_TIE_BREAK = 1e-9


@dataclass
class TriangleMesh:
    """Vertices (possibly graph-carrying), faces, unit per-vertex normals."""

    vertices: torch.Tensor  # [M, 3]
    faces: torch.Tensor  # [F, 3] long
    vertex_normals: torch.Tensor = None  # [M, 3]
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.vertex_normals is None and len(self.faces):
            self.vertex_normals = compute_vertex_normals(self.vertices, self.faces)
        elif self.vertex_normals is None:
            self.vertex_normals = torch.zeros_like(self.vertices)

    @property
    def is_empty(self) -> bool:
        return self.faces.numel() == 0

    def detach(self) -> "TriangleMesh":
        return TriangleMesh(self.vertices.detach(), self.faces,
                            self.vertex_normals.detach(), dict(self.stats))

    def face_normals(self, normalize: bool = True) -> torch.Tensor:
        v0, v1, v2 = (self.vertices[self.faces[:, i]] for i in range(3))
        n = torch.linalg.cross(v1 - v0, v2 - v0)
        if normalize:
            n = n / n.norm(dim=-1, keepdim=True).clamp(min=1e-12)
        return n

    def signed_volume(self) -> float:
        """Divergence-theorem volume; positive for outward orientation."""
        v0, v1, v2 = (self.vertices[self.faces[:, i]] for i in range(3))
        return float((v0 * torch.linalg.cross(v1, v2)).sum(-1).sum() / 6.0)


def compute_vertex_normals(vertices: torch.Tensor, faces: torch.Tensor) -> torch.Tensor:
    v0, v1, v2 = (vertices[faces[:, i]] for i in range(3))
    fn = torch.linalg.cross(v1 - v0, v2 - v0)  # area-weighted
    vn = torch.zeros_like(vertices)
    for i in range(3):
        vn = vn.index_add(0, faces[:, i], fn)
    return vn / vn.norm(dim=-1, keepdim=True).clamp(min=1e-12)


def build_tet_lattice(resolution: int, bbox=GRID_BBOX):
    """Kuhn 6-tet subdivision of a cubic lattice; (vertices [V,3], tets [T,4])."""
    n = resolution  # cells per axis
    lin = torch.linspace(bbox[0], bbox[1], n + 1, dtype=torch.float64)
    gx, gy, gz = torch.meshgrid(lin, lin, lin, indexing="ij")
    verts = torch.stack([gx, gy, gz], dim=-1).reshape(-1, 3)

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    ii, jj, kk = torch.meshgrid(
        torch.arange(n), torch.arange(n), torch.arange(n), indexing="ij"
    )
    base = torch.stack([ii, jj, kk], dim=-1).reshape(-1, 3)
    corner = {}
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                corner[(dx, dy, dz)] = vid(base[:, 0] + dx, base[:, 1] + dy, base[:, 2] + dz)

    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    tets = []
    for perm in perms:
        steps = [(0, 0, 0)]
        cur = [0, 0, 0]
        for axis in perm:
            cur = list(cur)
            cur[axis] = 1
            steps.append(tuple(cur))
        tet = torch.stack([corner[s] for s in steps], dim=-1)
        tets.append(tet)
    tets = torch.cat(tets, dim=0)

    # consistent positive orientation (signed volume > 0 for every tet)
    p = verts[tets]
    vol = torch.einsum(
        "ni,ni->n",
        torch.linalg.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]),
        p[:, 3] - p[:, 0],
    )
    flip = vol < 0
    tets[flip] = tets[flip][:, [0, 2, 1, 3]]
    return verts, tets


class TetGrid(nn.Module):
    """Learnable per-vertex signed distances and bounded position offsets."""

    def __init__(self, resolution: int = 24, bbox=GRID_BBOX, dtype=torch.float32):
        super().__init__()
        verts, tets = build_tet_lattice(resolution, bbox)
        self.resolution = resolution
        self.bbox = tuple(bbox)
        self.edge_length = (bbox[1] - bbox[0]) / resolution
        self.register_buffer("base_vertices", verts.to(dtype))
        self.register_buffer("tets", tets)
        self.sdf_v = nn.Parameter(torch.full((verts.shape[0],), 0.1, dtype=dtype))
        self.offset_raw = nn.Parameter(torch.zeros(verts.shape[0], 3, dtype=dtype))

    @property
    def dtype(self):
        return self.sdf_v.dtype

    def effective_vertices(self) -> torch.Tensor:
        """Base lattice plus offsets bounded to half the local edge length.

        tanh keeps each component under edge/(2 sqrt(3)), so the offset norm
        never exceeds edge/2 and tetrahedra cannot invert.
        """
        amp = self.edge_length / (2.0 * math.sqrt(3.0))
        return self.base_vertices + amp * torch.tanh(self.offset_raw)

    def geometry_parameters(self):
        return {"sdf_v": self.sdf_v, "offset_raw": self.offset_raw}


def marching_tetrahedra(rep: TetGrid) -> TriangleMesh:
    """Extract the zero level set as a closed, consistently oriented mesh.

    Exact-zero vertex distances are perturbed by +1e-9 so no lattice vertex
    sits on the surface (prevents degenerate configurations).
    """
    verts = rep.effective_vertices()
    sdf = rep.sdf_v
    sdf = torch.where(sdf == 0.0, torch.full_like(sdf, ZERO_TIE_BREAK), sdf)
    tets = rep.tets

    occ = sdf > 0
    occ_t = occ[tets]
    n_pos = occ_t.sum(dim=1)
    valid = (n_pos > 0) & (n_pos < 4)
    if not bool(valid.any()):
        empty = torch.zeros(0, 3, dtype=verts.dtype)
        return TriangleMesh(empty, torch.zeros(0, 3, dtype=torch.long),
                            stats={"n_tets_crossed": 0})
    vt = tets[valid]

    code = (occ_t[valid].long() * torch.tensor([1, 2, 4, 8])).sum(dim=1)

    # crossing edges, deduplicated globally so shared edges share vertices
    edges = vt[:, _TET_EDGES].reshape(-1, 2)  # [n_valid*6, 2]
    edges_sorted, _ = torch.sort(edges, dim=1)
    uniq, inverse = torch.unique(edges_sorted, dim=0, return_inverse=True)
    crossing = occ[uniq[:, 0]] != occ[uniq[:, 1]]
    new_index = torch.full((uniq.shape[0],), -1, dtype=torch.long)
    new_index[crossing] = torch.arange(int(crossing.sum()))

    ce = uniq[crossing]
    pa, pb = verts[ce[:, 0]], verts[ce[:, 1]]
    sa, sb = sdf[ce[:, 0]][:, None], sdf[ce[:, 1]][:, None]
    mesh_verts = (sb * pa - sa * pb) / (sb - sa)

    edge_of_tet = new_index[inverse].reshape(-1, 6)  # [n_valid, 6]

    tri_local = _TRI_TABLE[code]
    ntri = _NUM_TRIS[code]
    faces = []
    one = ntri == 1
    if bool(one.any()):
        faces.append(torch.gather(edge_of_tet[one], 1, tri_local[one][:, :3]))
    two = ntri == 2
    if bool(two.any()):
        faces.append(torch.gather(edge_of_tet[two], 1, tri_local[two][:, :6]).reshape(-1, 3))
    faces = torch.cat(faces, dim=0) if faces else torch.zeros(0, 3, dtype=torch.long)

    mesh = TriangleMesh(mesh_verts, faces, stats={"n_tets_crossed": int(valid.sum())})
    return _orient_outward(mesh, sdf, verts, vt, code)


def _orient_outward(mesh: TriangleMesh, sdf, verts, vt, code) -> TriangleMesh:
    """Flip faces so normals point toward positive signed distance.

    The static table is consistent within itself; a single global parity
    check against the field orients the whole extraction.
    """
    if mesh.is_empty:
        return mesh
    fn = mesh.face_normals(normalize=False)
    c = mesh.vertices[mesh.faces].mean(dim=1)
    # probe: offset along the face normal must increase the interpolated sign
    h = 1e-4 * (verts.max() - verts.min())
    n_unit = fn / fn.norm(dim=-1, keepdim=True).clamp(min=1e-12)
    probe = _sdf_probe(c + h * n_unit, sdf, verts, vt) - _sdf_probe(c - h * n_unit, sdf, verts, vt)
    agree = (probe > 0).float().mean()
    if float(agree) < 0.5:
        mesh = TriangleMesh(mesh.vertices, mesh.faces[:, [0, 2, 1]],
                            stats=dict(mesh.stats))
    return mesh


def _sdf_probe(points, sdf, verts, vt):
    """Nearest-lattice-vertex signed distance (cheap global parity probe)."""
    sub = verts[vt[:, 0]]
    d = torch.cdist(points.detach().float(), sub.detach().float())
    nearest = d.argmin(dim=1)
    return sdf.detach()[vt[nearest, 0]]


def convert_sdf_to_tets(src, lattice_resolution: int) -> TetGrid:
    """Sample an SDF grid's field onto a fresh tet lattice; offsets zero."""
    rep = TetGrid(resolution=lattice_resolution, bbox=src.bbox, dtype=src.dtype)
    with torch.no_grad():
        vals = src.sdf_at(rep.base_vertices)
        rep.sdf_v.copy_(vals)
        rep.offset_raw.zero_()
    return rep


def mesh_stats(mesh: TriangleMesh) -> dict:
    """Topology summary: counts, Euler characteristic, boundary/orientation."""
    F = mesh.faces.shape[0]
    V = mesh.vertices.shape[0]
    if F == 0:
        return {"V": V, "E": 0, "F": 0, "euler": None, "boundary_edges": 0,
                "nonmanifold_edges": 0, "oriented": True}
    e = torch.cat([mesh.faces[:, [0, 1]], mesh.faces[:, [1, 2]], mesh.faces[:, [2, 0]]])
    e_sorted, _ = torch.sort(e, dim=1)
    uniq, counts = torch.unique(e_sorted, dim=0, return_counts=True)
    boundary = int((counts == 1).sum())
    nonmanifold = int((counts > 2).sum())
    # orientation: every undirected edge must appear once per direction
    key = e[:, 0] * (V + 1) + e[:, 1]
    _, dir_counts = torch.unique(key, return_counts=True)
    oriented = bool((dir_counts == 1).all()) and nonmanifold == 0
    E = uniq.shape[0]
    return {"V": V, "E": E, "F": F, "euler": V - E + F,
            "boundary_edges": boundary, "nonmanifold_edges": nonmanifold,
            "oriented": oriented}


def point_mesh_distance(points: torch.Tensor, mesh: TriangleMesh,
                        chunk: int = 2048) -> torch.Tensor:
    """Exact distance from each point to the closest mesh triangle."""
    v0 = mesh.vertices[mesh.faces[:, 0]].double()
    v1 = mesh.vertices[mesh.faces[:, 1]].double()
    v2 = mesh.vertices[mesh.faces[:, 2]].double()
    out = []
    for start in range(0, points.shape[0], chunk):
        p = points[start:start + chunk].double()
        out.append(_point_tri_dist_block(p, v0, v1, v2))
    return torch.cat(out)


def _point_tri_dist_block(p, v0, v1, v2):
    """Distance from points [N,3] to triangles [F,3] (min over F)."""
    # project onto each triangle plane, clamp barycentrics to the triangle
    e0 = (v1 - v0)[None]  # [1,F,3]
    e1 = (v2 - v0)[None]
    w = p[:, None, :] - v0[None]  # [N,F,3]
    a = (e0 * e0).sum(-1)
    b = (e0 * e1).sum(-1)
    c = (e1 * e1).sum(-1)
    d = (w * e0).sum(-1)
    e = (w * e1).sum(-1)
    det = (a * c - b * b).clamp(min=1e-18)
    s = ((c * d - b * e) / det).clamp(0.0, 1.0)
    t = ((a * e - b * d) / det).clamp(0.0, 1.0)
    # clamped (s, t) may leave the simplex; renormalize onto s + t <= 1
    over = s + t > 1.0
    scale = torch.where(over, 1.0 / (s + t).clamp(min=1e-12), torch.ones_like(s))
    s = s * scale
    t = t * scale
    proj = v0[None] + s[..., None] * e0 + t[..., None] * e1
    d2 = ((p[:, None, :] - proj) ** 2).sum(-1)
    # also consider edge/vertex projections via the three corners
    for corner in (v0, v1, v2):
        d2 = torch.minimum(d2, ((p[:, None, :] - corner[None]) ** 2).sum(-1))
    d2e = _point_segment_d2(p, v0, v1)
    d2e = torch.minimum(d2e, _point_segment_d2(p, v1, v2))
    d2e = torch.minimum(d2e, _point_segment_d2(p, v0, v2))
    d2 = torch.minimum(d2, d2e)
    return d2.min(dim=1).values.sqrt()


def _point_segment_d2(p, a, b):
    ab = (b - a)[None]
    w = p[:, None, :] - a[None]
    t = ((w * ab).sum(-1) / (ab * ab).sum(-1).clamp(min=1e-18)).clamp(0.0, 1.0)
    proj = a[None] + t[..., None] * ab
    return ((p[:, None, :] - proj) ** 2).sum(-1)
