"""NNTuck model representation and the multilayer network container."""

import enum
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .tensor import tucker


class Kind(str, enum.Enum):
    INDEPENDENT = "independent"
    DEPENDENT = "dependent"
    REDUNDANT = "redundant"


class InterpretabilityWarning(UserWarning):
    """Deflation to this many layer communities may only reflect a change of basis."""


@dataclass
class MultilayerNetwork:
    """Multiplex network stored as an ``N x N x L`` adjacency tensor."""

    adjacency: np.ndarray
    directed: bool = True
    node_labels: list = None
    layer_labels: list = None

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        if a.ndim != 3 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be N x N x L, got shape {a.shape}")
        if (a < 0).any() or not np.isfinite(a).all():
            raise ValueError("adjacency entries must be finite and nonnegative")
        if not self.directed and not np.array_equal(a, a.transpose(1, 0, 2)):
            raise ValueError("undirected network has an asymmetric layer")
        self.adjacency = a
        n, _, n_layers = a.shape
        if self.node_labels is None:
            self.node_labels = [str(i) for i in range(n)]
        if self.layer_labels is None:
            self.layer_labels = [str(k) for k in range(n_layers)]
        if len(self.node_labels) != n or len(self.layer_labels) != n_layers:
            raise ValueError("label counts do not match adjacency dimensions")

    @property
    def N(self):
        return self.adjacency.shape[0]

    @property
    def L(self):
        return self.adjacency.shape[2]


@dataclass(frozen=True)
class ModelVariant:
    """Which NNTuck family to fit.

    ``independent`` fixes Y to the identity (so C = L), ``redundant`` fixes Y
    to a column of ones (C = 1) and ``dependent`` leaves Y free.
    """

    kind: Kind
    K: int
    C: int = None
    symmetric: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.REDUNDANT:
            if self.C not in (None, 1):
                raise ValueError("a redundant model has exactly one layer community")
            object.__setattr__(self, "C", 1)
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.kind is Kind.DEPENDENT and (self.C is None or self.C < 1):
            raise ValueError("a dependent model needs C >= 1")

    @classmethod
    def independent(cls, K, L=None, symmetric=False):
        return cls(Kind.INDEPENDENT, K, L, symmetric)

    @classmethod
    def dependent(cls, K, C, symmetric=False):
        return cls(Kind.DEPENDENT, K, C, symmetric)

    @classmethod
    def redundant(cls, K, symmetric=False):
        return cls(Kind.REDUNDANT, K, 1, symmetric)

    def resolve(self, N, L):
        """Return a copy with C filled in and check it against ``(N, L)``."""
        C = L if self.kind is Kind.INDEPENDENT else self.C
        if self.kind is Kind.INDEPENDENT and self.C not in (None, L):
            raise ValueError(f"an independent model has C = L = {L}, got C = {self.C}")
        if self.K > N:
            raise ValueError(f"K = {self.K} exceeds the number of nodes {N}")
        # C == L is allowed for a free Y (needed for L = 2 redundance tests)
        if self.kind is Kind.DEPENDENT and C > L:
            raise ValueError(f"a dependent model needs C <= L, got C = {C}, L = {L}")
        return ModelVariant(self.kind, self.K, C, self.symmetric)

    def label(self):
        sym = ",sym" if self.symmetric else ""
        return f"{self.kind.value}(K={self.K},C={self.C}{sym})"


@dataclass
class NNTuckModel:
    U: np.ndarray
    V: np.ndarray
    Y: np.ndarray
    core: np.ndarray
    variant: ModelVariant = field(default=None)

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        self.core = np.asarray(self.core, dtype=float)
        N, K = self.U.shape
        L, C = self.Y.shape
        if self.V.shape != (N, K) or self.core.shape != (K, K, C):
            raise ValueError(
                f"inconsistent factor shapes U{self.U.shape} V{self.V.shape} "
                f"Y{self.Y.shape} core{self.core.shape}"
            )
        if self.variant is None:
            self.variant = ModelVariant(Kind.DEPENDENT, K, C)

    @property
    def N(self):
        return self.U.shape[0]

    @property
    def L(self):
        return self.Y.shape[0]

    @property
    def K(self):
        return self.U.shape[1]

    @property
    def C(self):
        return self.Y.shape[1]

    def copy(self):
        return NNTuckModel(self.U.copy(), self.V.copy(), self.Y.copy(),
                           self.core.copy(), self.variant)

    def to_dict(self):
        v = self.variant
        return {
            "N": self.N,
            "L": self.L,
            "K": self.K,
            "C": self.C,
            "variant": v.kind.value,
            "symmetric": bool(v.symmetric),
            "U": self.U.tolist(),
            "V": self.V.tolist(),
            "Y": self.Y.tolist(),
            "core": self.core.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        variant = ModelVariant(Kind(d["variant"]), d["K"], d["C"], d.get("symmetric", False))
        model = cls(
            np.array(d["U"], dtype=float).reshape(d["N"], d["K"]),
            np.array(d["V"], dtype=float).reshape(d["N"], d["K"]),
            np.array(d["Y"], dtype=float).reshape(d["L"], d["C"]),
            np.array(d["core"], dtype=float).reshape(d["K"], d["K"], d["C"]),
            variant,
        )
        return model

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def reconstruct(model):
    """Poisson rate tensor ``core x1 U x2 V x3 Y`` of shape ``N x N x L``."""
    return tucker(model.core, model.U, model.V, model.Y)


def count_parameters(variant, N, L):
    """Free parameter count used for likelihood-ratio degrees of freedom."""
    v = ModelVariant(variant.kind, variant.K, variant.C, variant.symmetric).resolve(N, L)
    K, C = v.K, v.C
    if v.kind is Kind.INDEPENDENT:
        return 2 * N * K + K * K * L
    if v.kind is Kind.REDUNDANT:
        return 2 * N * K + K * K
    return 2 * N * K + L * C + K * K * C


def check_interpretability(K, C, symmetric=False):
    """Return ``"ok"`` or ``"warning"``.

    Any core with at least K^2 slices (K(K+1)/2 when slices are symmetric)
    deflates to that many slices whatever the network, so C at or above the
    bound says nothing about layer structure. A warning is also emitted.
    """
    if K < 1 or C < 1:
        raise ValueError("K and C must be positive")
    bound = K * (K + 1) // 2 if symmetric else K * K
    if C >= bound:
        warnings.warn(
            f"C = {C} >= {bound}: the layer factor may reflect a linear basis "
            "of affinity matrices rather than network structure",
            InterpretabilityWarning,
            stacklevel=2,
        )
        return "warning"
    return "ok"
