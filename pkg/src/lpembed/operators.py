"""Embedding operators and their on-disk format.

An :class:`EmbeddingOperator` is a dense matrix plus the parameters that
regenerate it. ``apply`` multiplies by ``normalization * matrix``; rescaling
an operator only touches ``normalization``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import math

import numpy as np

from . import stable
from .errors import DomainError, OperatorFormatError
from .quasinorm import inv_q

__all__ = [
    "EmbeddingOperator",
    "KINDS",
    "as_operator",
    "random_rows",
    "build_S",
    "build_T",
    "build_id_p2",
    "build_W",
    "stack_W",
    "apply",
    "save_operator",
    "load_operator",
    "fnv1a64",
    "header_fields",
    "FORMAT_VERSION",
]

KINDS = ("S", "T", "IdP2", "W", "custom")
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class EmbeddingOperator:
    kind: str
    matrix: np.ndarray
    n: int
    rows: int
    p: float
    r: float = 1.0
    eta: float = 0.0
    J: int = 0
    seed: int = 0
    normalization: float = 1.0
    c_prime: float | None = None
    m: int | None = None
    metadata: str = ""
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown operator kind {self.kind!r}")
        if self.matrix.shape != (self.rows, self.n):
            raise DomainError(f"matrix shape {self.matrix.shape} != ({self.rows}, {self.n})")

    @property
    def effective(self):
        """``normalization * matrix`` as a fresh array."""
        return self.normalization * self.matrix

    def scaled(self, factor, **changes):
        return replace(self, normalization=self.normalization * factor, **changes)

    def __call__(self, x):
        return apply(self, x)

    def same_as(self, other):
        """Bit-exact comparison of matrix and every metadata field."""
        return (
            self.kind == other.kind
            and self.matrix.shape == other.matrix.shape
            and self.matrix.tobytes() == other.matrix.tobytes()
            and header_fields(self) == header_fields(other)
        )


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def as_operator(op, p=1.0, r=1.0):
    """Wrap a plain matrix as a ``custom`` operator; operators pass through."""
    if isinstance(op, EmbeddingOperator):
        return op
    a = np.atleast_2d(np.asarray(op, dtype=np.float64))
    return EmbeddingOperator(kind="custom", matrix=_frozen(a), n=a.shape[1], rows=a.shape[0],
                             p=p, r=r, metadata="externally supplied matrix")


def random_rows(eta, n):
    """``ceil(eta * n)``, tolerant to binary rounding of eta."""
    rows = math.ceil(round(eta * n, 9))
    if rows < 1:
        raise DomainError(f"ceil(eta*n) must be >= 1, got eta={eta}, n={n}")
    return rows


def _stable_matrix(n, dim, p, J, seed, threads=1):
    cols = range(n)

    def column(i):
        return stable.lepage_column(p, dim, J, seed, i)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            data = list(pool.map(column, cols))
    else:
        data = [column(i) for i in cols]
    return np.column_stack(data) if data else np.zeros((dim, 0))


def _resolve_depth(p, J):
    if J is None:
        return stable.default_depth(p)
    if J < 1:
        raise DomainError("truncation depth J must be >= 1")
    return int(J)


def build_S(n, eta, p, J=None, seed=0, threads=1):
    """Unnormalized ``ceil(eta n) x n`` stable-series operator.

    Column i is the deterministic-weight LePage column drawn on stream i.
    """
    if not 0 < p < 2:
        raise DomainError("p must lie in (0, 2)")
    rows = random_rows(eta, n)
    J = _resolve_depth(p, J)
    mat = _stable_matrix(int(n), rows, p, J, seed, threads)
    return EmbeddingOperator(kind="S", matrix=_frozen(mat), n=int(n), rows=rows, p=float(p),
                             r=1.0, eta=float(eta), J=J, seed=int(seed),
                             metadata="sum_j j^(-1/p) Y_ij, unnormalized")


def build_T(n, dim, p, r, J=None, trials=10_000, seed=0, threads=1):
    """S with ``dim`` rows divided by the Monte-Carlo estimate of (E||Theta||_r^r)^(1/r)."""
    J = _resolve_depth(p, J)
    base = build_S(n, dim / n, p, J, seed, threads)
    if base.rows != dim:
        raise DomainError("dim must be a positive integer")
    est = stable.estimate_theta_norm(p, r, dim, J, trials, seed)
    return replace(base, kind="T", r=float(r), normalization=1.0 / est.value,
                   extras={"trials": int(trials), "theta_norm_stderr": est.stderr},
                   metadata="S / (E||Theta||_r^r)^(1/r), stochastic-arrival estimate")


def build_id_p2(n, m, p, r):
    """``m^(-1/q) Id_n``, which has the block property with kappa = 1/m."""
    if not 1 <= m <= n:
        raise DomainError("need 1 <= m <= n")
    scale = float(m) ** (-inv_q(p, r))
    return EmbeddingOperator(kind="IdP2", matrix=_frozen(np.eye(n)), n=int(n), rows=int(n),
                             p=float(p), r=float(r), normalization=scale, m=int(m),
                             extras={"kappa": 1.0 / m},
                             metadata=f"m^(-1/q) Id, kappa=1/{m}")


def build_W(n, eta, p, r, J=None, c_prime=1.0, seed=0, threads=1):
    """Stack ``n^(-1/q) Id`` over ``n^(-1/q) c' log(1+1/eta)^(-1/q) S``."""
    if c_prime <= 0:
        raise DomainError("c_prime must be positive")
    return stack_W(build_S(n, eta, p, J, seed, threads), r, c_prime)


def stack_W(s_op, r, c_prime=1.0):
    """The stacked operator built around an existing S (kind ``S`` or ``T``)."""
    if c_prime <= 0:
        raise DomainError("c_prime must be positive")
    n, eta, p = s_op.n, s_op.eta, s_op.p
    iq = inv_q(p, r)
    top = n ** (-iq) * np.eye(n)
    bottom = n ** (-iq) * c_prime * math.log1p(1.0 / eta) ** (-iq) * s_op.matrix
    mat = np.vstack([top, bottom])
    return EmbeddingOperator(kind="W", matrix=_frozen(mat), n=int(n), rows=mat.shape[0],
                             p=float(p), r=float(r), eta=float(eta), J=s_op.J, seed=s_op.seed,
                             c_prime=float(c_prime),
                             metadata="n^(-1/q) [Id ; c' log(1+1/eta)^(-1/q) S]")


def apply(op, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != op.n:
        raise DomainError(f"input has length {x.shape[0]}, operator expects {op.n}")
    return op.normalization * (op.matrix @ x)


# ---------------------------------------------------------------- file format

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data):
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def header_fields(op):
    fields = {
        "format_version": FORMAT_VERSION,
        "kind": op.kind,
        "n": op.n,
        "rows": op.rows,
        "p": float(op.p),
        "r": float(op.r),
        "eta": float(op.eta),
        "J": op.J,
        "seed": op.seed,
        "normalization": float(op.normalization),
    }
    if op.c_prime is not None:
        fields["c_prime"] = float(op.c_prime)
    if op.m is not None:
        fields["m"] = op.m
    for k, v in sorted(op.extras.items()):
        fields[f"x_{k}"] = v
    if op.metadata:
        fields["metadata"] = op.metadata.replace("\n", " ")
    return {k: _fmt(v) for k, v in fields.items()}


def _payload(op):
    return np.ascontiguousarray(op.matrix, dtype="<f8").tobytes()


def save_operator(op, path, include_matrix=True):
    """Write the ``key=value`` header, a blank line, then the raw matrix."""
    payload = _payload(op)
    header = header_fields(op)
    header["checksum"] = f"{fnv1a64(payload):016x}"
    text = "".join(f"{k}={v}\n" for k, v in header.items()) + "\n"
    with open(path, "wb") as fh:
        fh.write(text.encode("utf-8"))
        if include_matrix:
            fh.write(payload)


_REQUIRED = ("format_version", "kind", "n", "rows", "p", "r", "eta", "J", "seed",
             "normalization", "checksum")


def _parse(fields, key, conv):
    try:
        return conv(fields[key])
    except (KeyError, ValueError) as exc:
        raise OperatorFormatError(key, f"missing or invalid value ({exc})") from None


def _regenerate(kind, n, rows, p, r, eta, J, seed, normalization, c_prime, m):
    if kind == "S":
        return build_S(n, eta, p, J, seed).matrix
    if kind == "T":
        return build_S(n, rows / n, p, J, seed).matrix
    if kind == "W":
        if c_prime is None:
            raise OperatorFormatError("c_prime", "needed to regenerate a W operator")
        return build_W(n, eta, p, r, J, c_prime, seed).matrix
    if kind == "IdP2":
        return np.eye(n)
    raise OperatorFormatError("kind", "custom operators cannot be regenerated without payload")


def load_operator(path):
    """Read an operator; a header-only file is regenerated and checksum-verified."""
    with open(path, "rb") as fh:
        blob = fh.read()
    end = blob.find(b"\n\n")
    if end < 0:
        raise OperatorFormatError("header", "no blank line terminating the header")
    fields = {}
    for line in blob[:end].decode("utf-8", errors="replace").split("\n"):
        if "=" not in line:
            raise OperatorFormatError("header", f"malformed line {line!r}")
        k, v = line.split("=", 1)
        fields[k.strip()] = v.strip()
    for key in _REQUIRED:
        if key not in fields:
            raise OperatorFormatError(key, "missing")
    version = _parse(fields, "format_version", int)
    if version != FORMAT_VERSION:
        raise OperatorFormatError("format_version", f"unsupported version {version}")
    kind = fields["kind"]
    if kind not in KINDS:
        raise OperatorFormatError("kind", f"unknown kind {kind!r}")
    n = _parse(fields, "n", int)
    rows = _parse(fields, "rows", int)
    p = _parse(fields, "p", float)
    r = _parse(fields, "r", float)
    eta = _parse(fields, "eta", float)
    J = _parse(fields, "J", int)
    seed = _parse(fields, "seed", int)
    normalization = _parse(fields, "normalization", float)
    checksum = _parse(fields, "checksum", lambda s: int(s, 16))
    c_prime = _parse(fields, "c_prime", float) if fields.get("c_prime") else None
    m = _parse(fields, "m", int) if fields.get("m") else None
    extras = {}
    for k, v in fields.items():
        if k.startswith("x_"):
            try:
                extras[k[2:]] = int(v)
            except ValueError:
                extras[k[2:]] = float(v)

    payload = blob[end + 2:]
    expected = rows * n * 8
    if payload:
        if len(payload) != expected:
            raise OperatorFormatError("payload", f"{len(payload)} bytes, expected {expected}")
        mat = np.frombuffer(payload, dtype="<f8").reshape(rows, n).astype(np.float64)
    else:
        mat = _regenerate(kind, n, rows, p, r, eta, J, seed, normalization, c_prime, m)
        if mat.shape != (rows, n):
            raise OperatorFormatError("rows", f"regenerated shape {mat.shape} != ({rows}, {n})")
    if fnv1a64(np.ascontiguousarray(mat, dtype="<f8").tobytes()) != checksum:
        raise OperatorFormatError("checksum", "payload does not match stored checksum")
    return EmbeddingOperator(kind=kind, matrix=_frozen(mat), n=n, rows=rows, p=p, r=r, eta=eta,
                             J=J, seed=seed, normalization=normalization, c_prime=c_prime, m=m,
                             metadata=fields.get("metadata", ""), extras=extras)

