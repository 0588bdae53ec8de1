"""Problem instances: Hubbard sectors, engineered degenerate spectra, random Hermitian matrices, file I/O."""

import hashlib
import itertools
import json
import math
import struct
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.stats import unitary_group

from .config import DEFAULT
from .errors import ParseError, ValidationError
from .numerics import as_hermitian, opnorm
from .partition import ModelSpace


# -- Hubbard model -----------------------------------------------------------

@dataclass(frozen=True)
class HubbardSpec:
    lx: int
    ly: int
    t: float = 1.0
    u: float = 0.0
    boundary: str = "periodic"
    n_up: int = 1
    n_down: int = 1

    def __post_init__(self):
        if self.lx < 1 or self.ly < 1:
            raise ValidationError("lattice sides must be positive")
        if self.boundary not in ("periodic", "open"):
            raise ValidationError("boundary must be 'periodic' or 'open'")
        s = self.sites
        if not (1 <= self.n_up <= s and 1 <= self.n_down <= s):
            raise ValidationError(f"particle numbers must lie in [1, {s}]")

    @property
    def sites(self):
        return self.lx * self.ly


def lattice_bonds(spec: HubbardSpec):
    """Unordered nearest-neighbour pairs, each listed once; sites are row-major ``y * lx + x``."""
    bonds = set()
    for y in range(spec.ly):
        for x in range(spec.lx):
            i = y * spec.lx + x
            for dx, dy in ((1, 0), (0, 1)):
                nx, ny = x + dx, y + dy
                if spec.boundary == "periodic":
                    nx, ny = nx % spec.lx, ny % spec.ly
                elif nx >= spec.lx or ny >= spec.ly:
                    continue
                j = ny * spec.lx + nx
                if i != j:
                    bonds.add((min(i, j), max(i, j)))
    return sorted(bonds)


def hopping_matrix(spec: HubbardSpec):
    """Single-particle ``-t`` adjacency matrix."""
    h = np.zeros((spec.sites, spec.sites))
    for i, j in lattice_bonds(spec):
        h[i, j] = h[j, i] = -spec.t
    return h


def sector_dimension(spec: HubbardSpec):
    return math.comb(spec.sites, spec.n_up) * math.comb(spec.sites, spec.n_down)


def _configs(sites, n):
    return [sum(1 << k for k in occ) for occ in itertools.combinations(range(sites), n)]


@dataclass(eq=False)
class ProblemInstance:
    h: object                # dense ndarray or scipy sparse matrix
    h0: object
    v: object
    alpha: float
    alpha_tilde: float
    labels: list = field(default_factory=list)
    spec: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.h.shape[0]

    def dense(self):
        """Copy with dense operators."""
        conv = (lambda m: m.toarray() if sp.issparse(m) else np.asarray(m))
        return ProblemInstance(conv(self.h), conv(self.h0), conv(self.v), self.alpha,
                               self.alpha_tilde, list(self.labels), dict(self.spec))


def _spin_hops(configs, index, bonds, t):
    """Triplets ``(row, col, value)`` of ``-t sum (c_i^+ c_j + h.c.)`` within one spin species."""
    rows, cols, vals = [], [], []
    for col, c in enumerate(configs):
        for i, j in bonds:
            bi, bj = 1 << i, 1 << j
            if bool(c & bi) == bool(c & bj):
                continue
            # move the particle between i and j; sign counts occupied modes strictly between
            between = c & (((1 << j) - 1) ^ ((1 << (i + 1)) - 1))
            sign = -1.0 if bin(between).count("1") % 2 else 1.0
            new = c ^ bi ^ bj
            rows.append(index[new])
            cols.append(col)
            vals.append(-t * sign)
    return rows, cols, vals


def build_hubbard(spec: HubbardSpec, sparse=False):
    """Hubbard Hamiltonian in the ``(n_up, n_down)`` sector.

    Basis states are pairs of up and down occupation bitmasks with the up
    configuration as the slow index. Fermionic signs follow the ordering of
    all up modes before all down modes, sites row-major.
    """
    dim = sector_dimension(spec)
    if not sparse and dim > DEFAULT.dense_cap:
        raise ValidationError(f"sector dimension {dim} exceeds the dense cap; pass sparse=True")
    s = spec.sites
    ups, downs = _configs(s, spec.n_up), _configs(s, spec.n_down)
    nu, nd = len(ups), len(downs)
    bonds = lattice_bonds(spec)
    r_u, c_u, v_u = _spin_hops(ups, {c: k for k, c in enumerate(ups)}, bonds, spec.t)
    r_d, c_d, v_d = _spin_hops(downs, {c: k for k, c in enumerate(downs)}, bonds, spec.t)
    hop_up = sp.csr_matrix((v_u, (r_u, c_u)), shape=(nu, nu))
    hop_dn = sp.csr_matrix((v_d, (r_d, c_d)), shape=(nd, nd))
    h0 = sp.kron(hop_up, sp.identity(nd)) + sp.kron(sp.identity(nu), hop_dn)
    double = np.array([bin(a & b).count("1") for a in ups for b in downs], dtype=float)
    v = sp.diags(spec.u * double)
    h0 = h0.tocsr()
    v = v.tocsr()
    h = (h0 + v).tocsr()
    labels = [f"u{a:0{s}b}|d{b:0{s}b}" for a in ups for b in downs]
    single = np.linalg.eigvalsh(hopping_matrix(spec))
    h0_norm = spec.n_up * max(abs(single)) + spec.n_down * max(abs(single))
    v_norm = abs(spec.u) * min(spec.n_up, spec.n_down)
    if sparse:
        alpha = h0_norm + v_norm
        alpha_t = max(v_norm, 1e-300)
        return ProblemInstance(h, h0, v, alpha, alpha_t, labels, asdict(spec))
    h, h0, v = h.toarray(), h0.toarray(), v.toarray()
    return ProblemInstance(h, h0, v, opnorm(h), opnorm(v), labels, asdict(spec))


def group_levels(values, tol):
    """Split sorted ``values`` into runs whose neighbours differ by at most ``tol``."""
    groups, start = [], 0
    for k in range(1, len(values) + 1):
        if k == len(values) or values[k] - values[k - 1] > tol:
            groups.append((start, k))
            start = k
    return groups


def model_space_from_h0(inst: ProblemInstance, manifold_count, tol=None):
    """Union of the lowest ``manifold_count`` degenerate eigenspaces of ``H0``."""
    if manifold_count < 1:
        raise ValidationError("manifold_count must be positive")
    h0 = inst.h0.toarray() if sp.issparse(inst.h0) else np.asarray(inst.h0)
    w, vecs = scipy.linalg.eigh(as_hermitian(h0, name="H0"))
    tol = DEFAULT.degeneracy_group * max(abs(w).max(), 1.0) if tol is None else tol
    groups = group_levels(w, tol)
    stop = groups[min(manifold_count, len(groups)) - 1][1]
    if stop >= len(w):
        raise ValidationError("requested manifolds cover the whole space (d = N)")
    return ModelSpace(vecs[:, :stop].astype(complex))


def noninteracting_manifolds(spec: HubbardSpec, count=None, tol=1e-9):
    """Dimensions and energies of the lowest noninteracting levels in the sector.

    Counted combinatorially from single-particle level multiplicities, so it
    works at sizes where the sector cannot be diagonalized densely.
    """
    eps = np.linalg.eigvalsh(hopping_matrix(spec))
    levels = []
    for a, b in group_levels(eps, tol):
        levels.append((float(np.mean(eps[a:b])), b - a))

    def fillings(n):
        # energy -> number of ways to place n fermions of one spin
        out = Counter()
        def rec(k, left, energy, ways):
            if left == 0:
                out[round(energy, 9)] += ways
                return
            if k == len(levels):
                return
            e, g = levels[k]
            for take in range(0, min(g, left) + 1):
                rec(k + 1, left - take, energy + take * e, ways * math.comb(g, take))
        rec(0, n, 0.0, 1)
        return out

    up, dn = fillings(spec.n_up), fillings(spec.n_down)
    total = Counter()
    for eu, wu in up.items():
        for ed, wd in dn.items():
            total[round(eu + ed, 9)] += wu * wd
    energies = sorted(total)
    if count is not None:
        energies = energies[:count]
    return [(e, total[e]) for e in energies]


def slater_model_space(spec: HubbardSpec, manifold_count, tol=1e-9):
    """P-space of the lowest noninteracting manifolds as Slater-determinant vectors.

    Amplitudes are products of up and down orbital minors in the sector basis
    of :func:`build_hubbard`; no many-body diagonalization is needed.
    """
    eps, orb = np.linalg.eigh(hopping_matrix(spec))
    s = spec.sites
    target = {e for e, _ in noninteracting_manifolds(spec, manifold_count, tol)}
    ups = list(itertools.combinations(range(s), spec.n_up))
    dns = list(itertools.combinations(range(s), spec.n_down))

    def choices(n):
        return [(occ, float(eps[list(occ)].sum())) for occ in itertools.combinations(range(s), n)]

    def amplitudes(occ_orbs, configs):
        sub = orb[:, list(occ_orbs)]
        return np.array([np.linalg.det(sub[list(c), :]) for c in configs])

    cols = []
    up_cache, dn_cache = {}, {}
    for ou, eu in choices(spec.n_up):
        for od, ed in choices(spec.n_down):
            if not any(abs(eu + ed - e) < 1e-7 for e in target):
                continue
            if ou not in up_cache:
                up_cache[ou] = amplitudes(ou, ups)
            if od not in dn_cache:
                dn_cache[od] = amplitudes(od, dns)
            cols.append(np.kron(up_cache[ou], dn_cache[od]))
    basis = np.array(cols).T.astype(complex)
    q, _ = np.linalg.qr(basis)
    return ModelSpace(q)


# -- engineered and random instances ----------------------------------------

def toy_instance():
    """``H = [[0, 1], [1, 1]]`` with P spanned by the first basis vector.

    ``xi(lam) = 1 / (lam - 1)`` and the fixed points are ``(1 +- sqrt 5) / 2``.
    """
    h = np.array([[0.0, 1.0], [1.0, 1.0]], dtype=complex)
    ms = ModelSpace.from_indices(2, [0])
    return _instance_from(h, ms.basis, {"kind": "toy"}), ms


def _split(h, p):
    q = np.eye(h.shape[0]) - p
    h0 = p @ h @ p + q @ h @ q
    v = p @ h @ q + q @ h @ p
    return h0, v


def _instance_from(h, basis, spec):
    p = basis @ basis.conj().T
    h0, v = _split(h, p)
    return ProblemInstance(h, h0, v, opnorm(h), max(opnorm(v), 1e-300), [], spec)


def random_instance(n, d, seed, scale=1.0):
    """GUE-like Hermitian matrix with ``||H|| = scale`` and a random d-dimensional P-space."""
    if not 1 <= d < n:
        raise ValidationError("need 1 <= d < n")
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = a + a.conj().T
    h *= scale / opnorm(h)
    ms = ModelSpace.from_columns(rng.normal(size=(n, d)) + 1j * rng.normal(size=(n, d)))
    inst = _instance_from(0.5 * (h + h.conj().T), ms.basis, {"kind": "random", "n": n, "d": d, "seed": seed})
    return inst, ms


def engineered_instance(n, d, m_degenerate, gap, seed, gamma=(0.6, 0.95), level=0.0,
                        pole_margin=1e-3, max_tries=200):
    """Random instance with an exactly ``m``-fold level at ``level``.

    Every other eigenvalue is at least ``gap`` away from ``level``. Each
    planted eigenvector has P-space weight ``gamma_k^2`` with ``gamma_k``
    drawn from the ``gamma`` range. Draws whose ``level`` falls within
    ``pole_margin`` of ``spec(H22)`` are rejected and redrawn.

    Returns ``(instance, model_space, planted_vectors)``.
    """
    m = int(m_degenerate)
    if not (1 <= m <= d < n) or n < d + m:
        raise ValidationError("need 1 <= m <= d < n and n >= d + m")
    if gap <= 0:
        raise ValidationError("gap must be positive")
    ss = np.random.SeedSequence(seed)
    for child in ss.spawn(max_tries):
        rng = np.random.default_rng(child)
        others = rng.uniform(-1.0, 1.0, size=n - m)
        # push every other level out of (level - gap, level + gap)
        others = np.where(np.abs(others - level) < gap,
                          level + np.sign(others - level + 1e-300) * (gap + np.abs(others - level)),
                          others)
        u = unitary_group.rvs(n, random_state=rng)
        spectrum = np.concatenate([np.full(m, level), others])
        h = (u * spectrum) @ u.conj().T
        h = 0.5 * (h + h.conj().T)
        target = u[:, :m]
        rest = u[:, m:]
        g = rng.uniform(gamma[0], gamma[1], size=m)
        # w_k and the extra P vectors live in span(rest), so they are orthogonal to the planted states
        mix = np.linalg.qr(rng.normal(size=(n - m, d)) + 1j * rng.normal(size=(n - m, d)))[0]
        w = rest @ mix
        cols = [g[k] * target[:, k] + math.sqrt(1 - g[k] ** 2) * w[:, k] for k in range(m)]
        cols += [w[:, k] for k in range(m, d)]
        basis = np.array(cols).T
        ms = ModelSpace(basis)
        inst = _instance_from(h, ms.basis, {"kind": "engineered", "n": n, "d": d, "m": m,
                                            "gap": gap, "seed": seed, "level": level})
        from .partition import decompose
        chi = scipy.linalg.eigvalsh(decompose(h, ms).h22)
        if np.min(np.abs(chi - level)) >= pole_margin:
            return inst, ms, target
    raise ValidationError("could not place the planted level away from the poles")


# -- file formats ------------------------------------------------------------

_MAGIC = b"SSPC1"


def write_mtx(path, matrix):
    """Matrix Market coordinate file, complex general, 1-indexed, exact float repr."""
    m = sp.coo_matrix(matrix)
    lines = ["%%MatrixMarket matrix coordinate complex general",
             f"{m.shape[0]} {m.shape[1]} {m.nnz}"]
    order = np.lexsort((m.col, m.row))
    for k in order:
        z = complex(m.data[k])
        lines.append(f"{m.row[k] + 1} {m.col[k] + 1} {z.real!r} {z.imag!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_mtx(path):
    """Read a complex or real coordinate Matrix Market file into CSR."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("%%MatrixMarket"):
        raise ParseError("missing %%MatrixMarket header", line=1)
    head = text[0].split()
    if len(head) < 5 or head[1] != "matrix" or head[2] != "coordinate":
        raise ParseError("only coordinate matrices are supported", line=1)
    field_ = head[3]
    if field_ not in ("complex", "real", "integer"):
        raise ParseError(f"unsupported field {field_!r}", line=1)
    k = 1
    while k < len(text) and (text[k].startswith("%") or not text[k].strip()):
        k += 1
    if k == len(text):
        raise ParseError("missing size line", line=k + 1)
    try:
        nr, nc, nnz = (int(x) for x in text[k].split())
    except ValueError:
        raise ParseError("malformed size line", line=k + 1) from None
    rows, cols, vals = [], [], []
    for ln in range(k + 1, len(text)):
        parts = text[ln].split()
        if not parts or parts[0].startswith("%"):
            continue
        want = 4 if field_ == "complex" else 3
        if len(parts) != want:
            raise ParseError(f"expected {want} fields, got {len(parts)}", line=ln + 1)
        try:
            i, j = int(parts[0]) - 1, int(parts[1]) - 1
            z = complex(float(parts[2]), float(parts[3])) if want == 4 else complex(float(parts[2]))
        except ValueError:
            raise ParseError("non-numeric entry", line=ln + 1) from None
        if not (0 <= i < nr and 0 <= j < nc):
            raise ParseError(f"index ({i + 1}, {j + 1}) out of range", line=ln + 1)
        rows.append(i)
        cols.append(j)
        vals.append(z)
    if len(vals) != nnz:
        raise ParseError(f"expected {nnz} entries, found {len(vals)}", line=len(text))
    return sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(nr, nc))


def write_dense(path, array):
    """SSPC1 binary: magic, rows and cols as little-endian uint64, row-major complex128."""
    a = np.asarray(array, dtype=np.complex128)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValidationError("only vectors and matrices are supported")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQ", *a.shape))
        fh.write(np.ascontiguousarray(a).astype("<c16").tobytes())


def read_dense(path):
    raw = Path(path).read_bytes()
    if raw[:5] != _MAGIC:
        raise ParseError("bad magic; not an SSPC1 file", offset=0)
    if len(raw) < 21:
        raise ParseError("truncated header", offset=len(raw))
    rows, cols = struct.unpack("<QQ", raw[5:21])
    need = 21 + 16 * rows * cols
    if len(raw) < need:
        raise ParseError(f"truncated data: expected {need} bytes, found {len(raw)}", offset=len(raw))
    if len(raw) > need:
        raise ParseError("trailing bytes after data", offset=need)
    return np.frombuffer(raw[21:need], dtype="<c16").reshape(rows, cols).astype(complex)


def _digest(labels):
    return hashlib.sha256("\n".join(labels).encode()).hexdigest()


def write_instance(inst: ProblemInstance, directory):
    """``H.mtx``, ``H0.mtx``, ``V.mtx`` and a JSON manifest in ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for name, m in (("H", inst.h), ("H0", inst.h0), ("V", inst.v)):
        write_mtx(out / f"{name}.mtx", m)
    manifest = {
        "spec": inst.spec,
        "alpha": inst.alpha,
        "alpha_tilde": inst.alpha_tilde,
        "dim": inst.dim,
        "labels": inst.labels,
        "labels_sha256": _digest(inst.labels),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))


def read_instance(directory, dense=True):
    src = Path(directory)
    try:
        manifest = json.loads((src / "manifest.json").read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not valid JSON: {exc.msg}", line=exc.lineno) from None
    mats = [read_mtx(src / f"{name}.mtx") for name in ("H", "H0", "V")]
    if dense:
        mats = [m.toarray() for m in mats]
    labels = manifest.get("labels", [])
    if _digest(labels) != manifest.get("labels_sha256", _digest(labels)):
        raise ParseError("label digest mismatch in manifest")
    return ProblemInstance(*mats, float(manifest["alpha"]), float(manifest["alpha_tilde"]),
                           labels, manifest.get("spec", {}))


def io_roundtrip(inst: ProblemInstance, path):
    write_instance(inst, path)
    return read_instance(path, dense=not sp.issparse(inst.h))


__all__ = [
    "HubbardSpec",
    "ProblemInstance",
    "build_hubbard",
    "engineered_instance",
    "group_levels",
    "hopping_matrix",
    "io_roundtrip",
    "lattice_bonds",
    "model_space_from_h0",
    "noninteracting_manifolds",
    "random_instance",
    "read_dense",
    "read_instance",
    "read_mtx",
    "sector_dimension",
    "slater_model_space",
    "toy_instance",
    "write_dense",
    "write_instance",
    "write_mtx",
]
