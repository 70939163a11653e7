"""Product signatures and componentwise geometry on products of spaces.

A signature string is a comma-separated list of terms
``<model><dim>[*<count>][@<K|learn|univ>]`` with model one of ``e h s p d u``::

    >>> str(parse_signature("h2@-1,s2@1,e2"))
    'h2@-1,s2@1,e2'
    >>> len(parse_signature("u2*3").components)
    3
"""
import math
import re
from dataclasses import dataclass

import torch

from .errors import ComponentError, CurvVaeError, SignatureError
from .geometry.functions import as_tensor, safe_sqrt
from .geometry.spaces import make_space

MODELS = "ehspdu"
FIXED_RANGE = (0.25, 1.0)
DEFAULT_INIT = {"h": -1.0, "s": 1.0, "p": -1.0, "d": 1.0}
_SIGNS = {"e": 0, "h": -1, "s": 1, "p": -1, "d": 1}

_TERM = re.compile(
    r"^(?P<model>[a-z])(?P<dim>\d+)"
    r"(?:\*(?P<count>\d+))?"
    r"(?:@(?P<curv>[^*@]+))?"
    r"(?:\*(?P<count2>\d+))?$"
)


@dataclass(frozen=True)
class Component:
    model: str
    dim: int
    mode: str  # fixed | learnable | universal
    k: float  # fixed value or initial value

    @property
    def ambient_dim(self):
        return self.dim + (1 if self.model in "hs" else 0)

    def text(self):
        base = f"{self.model}{self.dim}"
        if self.mode == "universal" or self.model == "e":
            return base
        if self.mode == "learnable":
            return base + "@learn"
        return f"{base}@{self.k:g}"


@dataclass(frozen=True)
class ProductSignature:
    components: tuple

    @property
    def latent_dim(self):
        return sum(c.dim for c in self.components)

    @property
    def ambient_dim(self):
        return sum(c.ambient_dim for c in self.components)

    def ambient_slices(self):
        return _slices([c.ambient_dim for c in self.components])

    def latent_slices(self):
        return _slices([c.dim for c in self.components])

    @property
    def universal(self):
        return any(c.mode == "universal" for c in self.components)

    def __len__(self):
        return len(self.components)

    def __str__(self):
        terms = []
        for c in self.components:
            if terms and terms[-1][0] == c:
                terms[-1][1] += 1
            else:
                terms.append([c, 1])
        return ",".join(c.text() + (f"*{n}" if n > 1 else "") for c, n in terms)


def _slices(sizes):
    out, start = [], 0
    for s in sizes:
        out.append(slice(start, start + s))
        start += s
    return out


def _component(model, dim, curv, term):
    if model not in MODELS:
        raise SignatureError(f"unknown model {model!r} in {term!r}")
    if dim < 1:
        raise SignatureError(f"dimension must be >= 1 in {term!r}")
    if curv is None:
        if model == "e":
            return Component("e", dim, "fixed", 0.0)
        if model == "u":
            return Component("u", dim, "universal", 0.0)
        return Component(model, dim, "learnable", DEFAULT_INIT[model])
    if curv == "univ":
        if model != "u":
            raise SignatureError(f"'univ' is only valid for u components: {term!r}")
        return Component("u", dim, "universal", 0.0)
    if curv == "learn":
        if model in "eu":
            raise SignatureError(f"'learn' is not valid for {model} components: {term!r}")
        return Component(model, dim, "learnable", DEFAULT_INIT[model])
    try:
        k = float(curv)
    except ValueError:
        raise SignatureError(f"bad curvature {curv!r} in {term!r}") from None
    if not math.isfinite(k):
        raise SignatureError(f"curvature must be finite in {term!r}")
    if model == "u":
        if k != 0 and not FIXED_RANGE[0] <= abs(k) <= FIXED_RANGE[1]:
            raise SignatureError(f"fixed |K| must be 0 or lie in {list(FIXED_RANGE)}: {term!r}")
        return Component("u", dim, "fixed", k)
    sign = _SIGNS[model]
    if sign == 0:
        if k != 0:
            raise SignatureError(f"e components are flat, got K={k} in {term!r}")
        return Component("e", dim, "fixed", 0.0)
    if k == 0 or (k > 0) != (sign > 0):
        raise SignatureError(f"curvature sign contradicts model {model}: {term!r}")
    if not FIXED_RANGE[0] <= abs(k) <= FIXED_RANGE[1]:
        raise SignatureError(f"fixed |K| must lie in {list(FIXED_RANGE)}: {term!r}")
    return Component(model, dim, "fixed", k)


def parse_signature(text):
    if isinstance(text, ProductSignature):
        return text
    if not isinstance(text, str) or not text.strip():
        raise SignatureError("empty signature")
    comps = []
    for raw in text.replace(" ", "").lower().split(","):
        m = _TERM.match(raw)
        if not m:
            raise SignatureError(f"malformed signature term {raw!r}")
        if m["count"] and m["count2"]:
            raise SignatureError(f"repeat count given twice in {raw!r}")
        count = int(m["count"] or m["count2"] or 1)
        if count < 1:
            raise SignatureError(f"repeat count must be >= 1 in {raw!r}")
        c = _component(m["model"], int(m["dim"]), m["curv"], raw)
        comps.extend([c] * count)
    return ProductSignature(tuple(comps))


class ProductSpace:
    """Componentwise geometry for a signature at given per-component curvatures."""

    def __init__(self, signature, curvatures=None):
        self.signature = parse_signature(signature)
        if curvatures is None:
            curvatures = [c.k for c in self.signature.components]
        if len(curvatures) != len(self.signature):
            raise SignatureError("one curvature per component is required")
        self.spaces = []
        for i, (c, k) in enumerate(zip(self.signature.components, curvatures)):
            try:
                self.spaces.append(make_space(c.model, c.dim, k))
            except CurvVaeError as e:
                raise ComponentError(i, c.model, e) from e
        self.slices = self.signature.ambient_slices()
        self.latent_slices = self.signature.latent_slices()

    @property
    def ambient_dim(self):
        return self.signature.ambient_dim

    @property
    def latent_dim(self):
        return self.signature.latent_dim

    def split(self, x):
        if x.shape[-1] != self.ambient_dim:
            raise SignatureError(f"expected {self.ambient_dim} coordinates, got {x.shape[-1]}")
        return [x[..., s] for s in self.slices]

    def split_latent(self, v):
        if v.shape[-1] != self.latent_dim:
            raise SignatureError(f"expected {self.latent_dim} latent coordinates, got {v.shape[-1]}")
        return [v[..., s] for s in self.latent_slices]

    @staticmethod
    def concat(parts):
        return torch.cat(parts, -1)

    def map(self, op, *args):
        """Apply ``space.<op>`` per component on split arguments and concatenate."""
        pieces = [self.split(as_tensor(a)) for a in args]
        out = []
        for i, sp in enumerate(self.spaces):
            try:
                out.append(getattr(sp, op)(*(p[i] for p in pieces)))
            except CurvVaeError as e:
                raise ComponentError(i, sp.model, e) from e
        return self.concat(out)

    def origin(self, *batch):
        return self.concat([sp.origin(*batch) for sp in self.spaces])

    def expmap(self, x, v):
        return self.map("expmap", x, v)

    def logmap(self, x, y):
        return self.map("logmap", x, y)

    def transp(self, x, y, v):
        return self.map("transp", x, y, v)

    def proj(self, a):
        return self.map("proj", a)

    def component_distances(self, x, y):
        xs, ys = self.split(x), self.split(y)
        out = []
        for i, sp in enumerate(self.spaces):
            try:
                out.append(sp.distance(xs[i], ys[i]))
            except CurvVaeError as e:
                raise ComponentError(i, sp.model, e) from e
        return torch.stack(out, -1)

    def distance(self, x, y):
        d = self.component_distances(as_tensor(x), as_tensor(y))
        return safe_sqrt((d * d).sum(-1))

    def check_point(self, x):
        for i, (sp, part) in enumerate(zip(self.spaces, self.split(as_tensor(x)))):
            try:
                sp.check_point(part)
            except CurvVaeError as e:
                raise ComponentError(i, sp.model, e) from e


def product_distance(signature, x, y):
    return ProductSpace(signature).distance(x, y)


def map_componentwise(signature, op, *args):
    """Apply one of ``exp``, ``log``, ``PT``, ``origin``, ``project`` per component."""
    ps = signature if isinstance(signature, ProductSpace) else ProductSpace(signature)
    names = {"exp": "expmap", "log": "logmap", "pt": "transp", "project": "proj", "origin": "origin"}
    try:
        name = names[op.lower()]
    except KeyError:
        raise SignatureError(f"unknown componentwise op {op!r}") from None
    if name == "origin":
        return ps.origin(*args)
    return ps.map(name, *args)
