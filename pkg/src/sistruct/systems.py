"""Builtin example systems and the system-definition file loader.

System files are TOML documents::

    [system]
    name = "my-system"
    dimension = 3
    coordinates = ["x", "y", "z"]

    [metric]                 # upper triangle; omitted: diagonal 1, off-diag 0
    g1_1 = "1"
    # ricci_factor = 2.0     # optional: expected Ric = factor * g smoke check

    [potential]              # either an explicit basis ...
    basis = ["1", "x^2+y^2+z^2"]
    # ... or a parameter-linear family:
    # potential = "a0*(x^2+y^2+z^2) + a1/x^2"
    # params = ["a0", "a1"]

    [domain]
    x = [0.5, 2.0]
    y = [0.5, 2.0]
    z = [0.5, 2.0]
    excluded = ["x"]

    [[killing]]
    kind = "proper"          # or "conformal"
    K1_1 = "1"

    [tolerances]
    "tau-from-curvature" = 1e-8

Metric and Killing keys accept ``g<i>_<j>``/``K<i>_<j>`` (1-based, i <= j)
and the two-digit shorthand ``g12``/``K12`` for dimensions up to 9.
"""

from __future__ import annotations

import re
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .expr import ExprError, extract_basis, parse, validate
from .structure import KillingDef, SystemDef

__all__ = ["SystemFileError", "load_system", "list_builtins", "RESERVED_BUILTINS"]


class SystemFileError(ValueError):
    """A system file or builtin reference failed to load or validate."""


RESERVED_BUILTINS = {
    "em2": (
        "reserved builtin 'em2': the potential for this system has no published "
        "closed form bundled here; supply a system file. A valid definition is "
        "expected to verify eta = 0, R = 0 and a vanishing induced Laplacian."
    ),
    "em3": (
        "reserved builtin 'em3': the potential for this system has no published "
        "closed form bundled here; supply a system file. A valid definition is "
        "expected to verify eta = 0, R = 0 and a vanishing induced Laplacian."
    ),
}


def _validated(text: str, coords, what: str):
    try:
        return validate(parse(text), coords)
    except ExprError as err:
        raise SystemFileError(f"{what}: {err}") from err


def _euclidean_metric(coords):
    return {
        (i, i): _validated("1", coords, f"metric g{i + 1}_{i + 1}")
        for i in range(len(coords))
    }


def make_sw(n: int) -> SystemDef:
    """Oscillator-plus-inverse-squares system on Euclidean R^n.

    Basis: constant, r^2, and 1/(x^k)^2 for each coordinate; n + 2 elements
    in total.  Declares the constant diagonal Killing tensors diag(e_k).
    """
    if n < 3:
        raise SystemFileError(f"sw:{n}: dimension must be at least 3")
    coords = tuple(f"x{k + 1}" for k in range(n))
    r2 = " + ".join(f"{c}^2" for c in coords)
    basis_texts = ["1", r2] + [f"1/{c}^2" for c in coords]
    basis = tuple(_validated(t, coords, f"sw:{n} basis") for t in basis_texts)
    killing = []
    for k in range(n):
        entries = [["0"] * n for _ in range(n)]
        entries[k][k] = "1"
        killing.append(_killing_from_texts("proper", entries, coords, f"sw:{n}"))
    return SystemDef(
        name=f"sw:{n}",
        n=n,
        coords=coords,
        metric_exprs=_euclidean_metric(coords),
        basis=basis,
        domain=tuple((0.5, 2.0) for _ in coords),
        excluded=tuple(_validated(c, coords, f"sw:{n} excluded") for c in coords),
        killing=tuple(killing),
    )


def make_em1() -> SystemDef:
    """Conformal semi-degenerate example system on Euclidean R^3."""
    coords = ("x", "y", "z")
    r2 = "x^2 + y^2 + z^2"
    basis_texts = [
        f"({r2} - 1) / (({r2} + 1)^2 * sqrt({r2}))",
        "1/x^2",
        "1/y^2",
        f"4 / ({r2} + 1)^2",
    ]
    basis = tuple(_validated(t, coords, "em1 basis") for t in basis_texts)
    excluded_texts = ["x", "y", f"sqrt({r2})"]
    return SystemDef(
        name="em1",
        n=3,
        coords=coords,
        metric_exprs=_euclidean_metric(coords),
        basis=basis,
        domain=((0.3, 0.9), (0.3, 0.9), (0.3, 0.9)),
        excluded=tuple(_validated(t, coords, "em1 excluded") for t in excluded_texts),
    )


def make_osc_trivial() -> SystemDef:
    """Flat system whose structure tensors vanish identically."""
    coords = ("x", "y", "z")
    basis_texts = ["1", "x", "y", "z", "x^2 + y^2 + z^2"]
    basis = tuple(_validated(t, coords, "osc-trivial basis") for t in basis_texts)
    return SystemDef(
        name="osc-trivial",
        n=3,
        coords=coords,
        metric_exprs=_euclidean_metric(coords),
        basis=basis,
        domain=((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)),
    )


def make_sphere3() -> SystemDef:
    """Round 3-sphere in stereographic coordinates; metric smoke test only."""
    coords = ("x", "y", "z")
    entry = "4 / (1 + x^2 + y^2 + z^2)^2"
    metric = {
        (i, i): _validated(entry, coords, "sphere3 metric") for i in range(3)
    }
    return SystemDef(
        name="sphere3",
        n=3,
        coords=coords,
        metric_exprs=metric,
        basis=(),
        domain=((-0.8, 0.8), (-0.8, 0.8), (-0.8, 0.8)),
        lc_ricci_factor=2.0,
    )


_SW_RE = re.compile(r"^sw:(\d+)$")

_BUILTINS = {
    "em1": make_em1,
    "osc-trivial": make_osc_trivial,
    "sphere3": make_sphere3,
}

_BUILTIN_DESCRIPTIONS = [
    ("sw:<n>", "oscillator + inverse squares on Euclidean R^n (n >= 3), "
               "non-degenerate, proper; diagonal Killing tensors declared"),
    ("em1", "conformal semi-degenerate example on Euclidean R^3"),
    ("osc-trivial", "flat R^3 family with identically vanishing structure tensors"),
    ("sphere3", "stereographic round 3-sphere, Levi-Civita smoke test "
                "(no potential)"),
    ("em2", "reserved: supply a file (expect eta = 0, R = 0, lap V = 0)"),
    ("em3", "reserved: supply a file (expect eta = 0, R = 0, lap V = 0)"),
]


def list_builtins() -> list[tuple[str, str]]:
    return list(_BUILTIN_DESCRIPTIONS)


def load_system(ref: str) -> SystemDef:
    """Load a builtin by name or a system definition from a TOML file."""
    if ref in RESERVED_BUILTINS:
        raise SystemFileError(RESERVED_BUILTINS[ref])
    sw = _SW_RE.match(ref)
    if sw:
        system = make_sw(int(sw.group(1)))
    elif ref in _BUILTINS:
        system = _BUILTINS[ref]()
    else:
        path = Path(ref)
        if not path.exists():
            raise SystemFileError(
                f"{ref!r} is neither a builtin system nor an existing file; "
                "builtins: " + ", ".join(name for name, _ in _BUILTIN_DESCRIPTIONS)
            )
        system = _load_file(path)
    try:
        system.validate_shape()
    except ValueError as err:
        raise SystemFileError(str(err)) from err
    return system


# --- file parsing -----------------------------------------------------------

_ENTRY_RE = re.compile(r"^([gK])(?:(\d+)_(\d+)|(\d)(\d))$")


def _entry_indices(key: str, n: int, where: str) -> tuple[int, int]:
    m = _ENTRY_RE.match(key)
    if not m:
        raise SystemFileError(
            f"{where}: bad component key {key!r}; use e.g. "
            f"{key[:1] if key else 'g'}1_2"
        )
    i = int(m.group(2) or m.group(4))
    j = int(m.group(3) or m.group(5))
    if not (1 <= i <= j <= n):
        raise SystemFileError(
            f"{where}: component key {key!r} must satisfy 1 <= i <= j <= {n} "
            "(upper triangle, 1-based)"
        )
    return i - 1, j - 1


def _load_file(path: Path) -> SystemDef:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as err:
        raise SystemFileError(f"{path}: {err}") from err
    where = str(path)

    sys_sec = _require(doc, "system", where)
    name = _require(sys_sec, "name", f"{where} [system]")
    n = _require(sys_sec, "dimension", f"{where} [system]")
    if not isinstance(n, int) or n < 3:
        raise SystemFileError(
            f"{where} [system]: dimension must be an integer >= 3, got {n!r}"
        )
    coords = _require(sys_sec, "coordinates", f"{where} [system]")
    if (
        not isinstance(coords, list)
        or len(coords) != n
        or len(set(coords)) != len(coords)
        or not all(re.fullmatch(r"[a-zA-Z_][a-zA-Z0-9_]*", c or "") for c in coords)
    ):
        raise SystemFileError(
            f"{where} [system]: coordinates must be {n} distinct identifiers"
        )
    coords = tuple(coords)

    metric_sec = dict(doc.get("metric", {}))
    ricci_factor = metric_sec.pop("ricci_factor", None)
    if ricci_factor is not None and not isinstance(ricci_factor, (int, float)):
        raise SystemFileError(f"{where} [metric]: ricci_factor must be a number")
    metric_exprs = {}
    for key, text in metric_sec.items():
        i, j = _entry_indices(key, n, f"{where} [metric]")
        metric_exprs[(i, j)] = _validated(
            _expr_text(text, f"{where} [metric] {key}"), coords,
            f"{where} [metric] {key}",
        )
    for i in range(n):
        metric_exprs.setdefault(
            (i, i), _validated("1", coords, f"{where} [metric] default")
        )

    basis = _load_potential(doc, coords, where)
    domain, excluded = _load_domain(doc, coords, where)
    killing = _load_killing(doc, coords, n, where)
    tolerances = doc.get("tolerances", {})
    if not all(isinstance(v, (int, float)) for v in tolerances.values()):
        raise SystemFileError(f"{where} [tolerances]: values must be numbers")

    return SystemDef(
        name=str(name),
        n=n,
        coords=coords,
        metric_exprs=metric_exprs,
        basis=basis,
        domain=domain,
        excluded=excluded,
        killing=killing,
        tolerances={str(k): float(v) for k, v in tolerances.items()},
        lc_ricci_factor=float(ricci_factor) if ricci_factor is not None else None,
    )


def _expr_text(value, where: str) -> str:
    if not isinstance(value, str):
        raise SystemFileError(f"{where}: expression must be a string, got {value!r}")
    return value


def _require(table, key, where):
    if key not in table:
        raise SystemFileError(f"{where}: missing required key {key!r}")
    return table[key]


def _load_potential(doc, coords, where):
    sec = doc.get("potential")
    if sec is None:
        return ()
    has_basis = "basis" in sec
    has_family = "potential" in sec or "params" in sec
    if has_basis and has_family:
        raise SystemFileError(
            f"{where} [potential]: give either 'basis' or 'potential' + 'params', "
            "not both"
        )
    if has_basis:
        texts = sec["basis"]
        if not isinstance(texts, list) or not texts:
            raise SystemFileError(
                f"{where} [potential]: basis must be a non-empty list of expressions"
            )
        return tuple(
            _validated(_expr_text(t, f"{where} [potential] basis"), coords,
                       f"{where} [potential] basis")
            for t in texts
        )
    if has_family:
        text = _require(sec, "potential", f"{where} [potential]")
        params = _require(sec, "params", f"{where} [potential]")
        if not isinstance(params, list) or not params:
            raise SystemFileError(
                f"{where} [potential]: params must be a non-empty list of names"
            )
        family = _validated_family(text, coords, params, where)
        try:
            return tuple(extract_basis(family, params))
        except ExprError as err:
            raise SystemFileError(f"{where} [potential]: {err}") from err
    raise SystemFileError(
        f"{where} [potential]: expected 'basis' or 'potential' + 'params'"
    )


def _validated_family(text, coords, params, where):
    try:
        return validate(parse(_expr_text(text, f"{where} [potential]")), coords, params)
    except ExprError as err:
        raise SystemFileError(f"{where} [potential]: {err}") from err


def _load_domain(doc, coords, where):
    sec = doc.get("domain")
    if sec is None:
        raise SystemFileError(f"{where}: missing required section [domain]")
    intervals = []
    for c in coords:
        iv = sec.get(c)
        if (
            not isinstance(iv, list)
            or len(iv) != 2
            or not all(isinstance(v, (int, float)) for v in iv)
        ):
            raise SystemFileError(
                f"{where} [domain]: coordinate {c!r} needs an interval [min, max]"
            )
        intervals.append((float(iv[0]), float(iv[1])))
    excluded_texts = sec.get("excluded", [])
    if not isinstance(excluded_texts, list):
        raise SystemFileError(f"{where} [domain]: excluded must be a list")
    excluded = tuple(
        _validated(_expr_text(t, f"{where} [domain] excluded"), coords,
                   f"{where} [domain] excluded")
        for t in excluded_texts
    )
    return tuple(intervals), excluded


def _load_killing(doc, coords, n, where):
    blocks = doc.get("killing", [])
    if not isinstance(blocks, list):
        raise SystemFileError(f"{where}: [[killing]] must be an array of tables")
    out = []
    for idx, block in enumerate(blocks):
        label = f"{where} [[killing]] #{idx}"
        kind = _require(block, "kind", label)
        if kind not in ("proper", "conformal"):
            raise SystemFileError(
                f"{label}: kind must be 'proper' or 'conformal', got {kind!r}"
            )
        entries = [["0"] * n for _ in range(n)]
        for key, text in block.items():
            if key == "kind":
                continue
            i, j = _entry_indices(key, n, label)
            entries[i][j] = _expr_text(text, f"{label} {key}")
            entries[j][i] = entries[i][j]
        out.append(_killing_from_texts(kind, entries, coords, label))
    return tuple(out)


def _killing_from_texts(kind, entries, coords, where) -> KillingDef:
    n = len(coords)
    validated = tuple(
        tuple(_validated(entries[i][j], coords, f"{where} K{i + 1}_{j + 1}")
              for j in range(n))
        for i in range(n)
    )
    return KillingDef(kind=kind, entries=validated)
