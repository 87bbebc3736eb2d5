"""Laws of the random pair (A, B) driving X_{n+1} = A X_n + B.

Each model turns a fixed number of uniforms per step into one draw, so a
whole population of replicas is sampled with a single vectorised call::

    A, B = model.draw(u)     # u: (..., model.n_uniforms)

and ``A`` has shape ``(..., d, d)``, ``B`` shape ``(..., d)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .linalg import mat_vec
from .rng import RngStream


class InvalidModel(ValueError):
    pass


# --------------------------------------------------------------------------
# scalar laws
# --------------------------------------------------------------------------

_LAW_PARAMS = {
    "constant": ("value",),
    "two_point": ("a", "b", "p"),
    "uniform": ("low", "high"),
    "gaussian": ("mean", "sd"),
    "lognormal": ("mu", "sigma"),
    "pareto": ("index", "scale"),
}


@dataclass(frozen=True)
class ScalarLaw:
    """One-dimensional distribution, sampled by inverse CDF.

    ``two_point`` takes value ``a`` with probability ``p`` and ``b`` otherwise;
    ``lognormal`` is exp(N(mu, sigma^2)); ``pareto`` has P(X > x) =
    (scale / x)^index for x >= scale.
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in _LAW_PARAMS:
            raise InvalidModel(f"unknown law {self.kind!r}")
        if len(self.params) != len(_LAW_PARAMS[self.kind]):
            raise InvalidModel(f"{self.kind} takes {_LAW_PARAMS[self.kind]}")
        if not all(math.isfinite(v) for v in self.params):
            raise InvalidModel("law parameters must be finite")
        p = dict(zip(_LAW_PARAMS[self.kind], self.params))
        if self.kind == "two_point" and not 0.0 <= p["p"] <= 1.0:
            raise InvalidModel("two_point probability outside [0, 1]")
        if self.kind == "uniform" and p["high"] < p["low"]:
            raise InvalidModel("uniform needs low <= high")
        if self.kind in ("gaussian",) and p["sd"] < 0:
            raise InvalidModel("sd must be nonnegative")
        if self.kind == "lognormal" and p["sigma"] < 0:
            raise InvalidModel("sigma must be nonnegative")
        if self.kind == "pareto" and (p["index"] <= 0 or p["scale"] <= 0):
            raise InvalidModel("pareto needs index > 0 and scale > 0")

    def __getattr__(self, name):
        names = _LAW_PARAMS.get(object.__getattribute__(self, "kind"), ())
        if name in names:
            return self.params[names.index(name)]
        raise AttributeError(name)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant" or (
            self.kind in ("gaussian", "lognormal") and self.params[1] == 0
        )

    def transform(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        k, p = self.kind, self.params
        if k == "constant":
            return np.full(u.shape, p[0])
        if k == "two_point":
            return np.where(u < p[2], p[0], p[1])
        if k == "uniform":
            return p[0] + (p[1] - p[0]) * u
        if k == "gaussian":
            return p[0] + p[1] * ndtri(u) if p[1] > 0 else np.full(u.shape, p[0])
        if k == "lognormal":
            return np.exp(p[0] + p[1] * ndtri(u)) if p[1] > 0 else np.full(u.shape, math.exp(p[0]))
        return p[1] * u ** (-1.0 / p[0])

    def to_dict(self) -> dict:
        return {"law": self.kind, **dict(zip(_LAW_PARAMS[self.kind], self.params))}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalarLaw":
        kind = d.get("law")
        if kind not in _LAW_PARAMS:
            raise InvalidModel(f"unknown law {kind!r}")
        names = _LAW_PARAMS[kind]
        defaults = {"scale": 1.0}
        try:
            vals = tuple(float(d[n] if n in d else defaults[n]) for n in names)
        except KeyError as exc:
            raise InvalidModel(f"{kind} is missing parameter {exc}") from None
        return cls(kind, vals)


def constant(value: float) -> ScalarLaw:
    return ScalarLaw("constant", (float(value),))


def two_point(a: float, b: float, p: float) -> ScalarLaw:
    return ScalarLaw("two_point", (float(a), float(b), float(p)))


def uniform(low: float, high: float) -> ScalarLaw:
    return ScalarLaw("uniform", (float(low), float(high)))


def gaussian(mean: float = 0.0, sd: float = 1.0) -> ScalarLaw:
    return ScalarLaw("gaussian", (float(mean), float(sd)))


def lognormal(mu: float, sigma: float) -> ScalarLaw:
    return ScalarLaw("lognormal", (float(mu), float(sigma)))


def pareto(index: float, scale: float = 1.0) -> ScalarLaw:
    return ScalarLaw("pareto", (float(index), float(scale)))


# --------------------------------------------------------------------------
# models
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineMapSample:
    A: np.ndarray
    B: np.ndarray


class Model:
    """Base class; subclasses define ``dim``, ``n_uniforms`` and ``draw``."""

    dim: int
    n_uniforms: int
    kind: str = ""

    def draw(self, u) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _companion(first_row, dim: int) -> np.ndarray:
    lead = first_row.shape[:-1]
    A = np.zeros(lead + (dim, dim))
    A[..., 0, :] = first_row
    if dim > 1:
        idx = np.arange(dim - 1)
        A[..., idx + 1, idx] = 1.0
    return A


@dataclass(frozen=True)
class Explicit(Model):
    """Finitely supported law: a list of (probability, A, B) atoms."""

    support: tuple
    kind = "explicit"

    def __post_init__(self):
        if not self.support:
            raise InvalidModel("explicit model needs at least one atom")
        atoms = []
        for prob, A, B in self.support:
            A = np.atleast_2d(np.asarray(A, dtype=np.float64))
            B = np.atleast_1d(np.asarray(B, dtype=np.float64))
            if prob <= 0:
                raise InvalidModel("atom probabilities must be positive")
            if A.shape != (B.size, B.size) or not (np.isfinite(A).all() and np.isfinite(B).all()):
                raise InvalidModel("atom must be a finite (d x d, d) pair")
            atoms.append((float(prob), A, B))
        dims = {B.size for _, _, B in atoms}
        if len(dims) != 1:
            raise InvalidModel("atoms disagree on dimension")
        total = sum(p for p, _, _ in atoms)
        if abs(total - 1.0) > 1e-12:
            raise InvalidModel(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "_probs", np.array([p for p, _, _ in atoms]))
        object.__setattr__(self, "_As", np.stack([A for _, A, _ in atoms]))
        object.__setattr__(self, "_Bs", np.stack([B for _, _, B in atoms]))
        object.__setattr__(self, "_cum", np.cumsum(self._probs))

    @property
    def dim(self) -> int:
        return self._Bs.shape[1]

    n_uniforms = 1

    def draw(self, u):
        u = np.asarray(u)[..., 0]
        k = np.minimum(np.searchsorted(self._cum, u, side="right"), len(self._probs) - 1)
        return self._As[k], self._Bs[k]

    def to_dict(self):
        return {
            "type": "explicit",
            "support": [
                {"p": float(p), "A": A.tolist(), "B": B.tolist()}
                for p, A, B in zip(self._probs, self._As, self._Bs)
            ],
        }


@dataclass(frozen=True)
class Scalar(Model):
    A: ScalarLaw
    B: ScalarLaw
    kind = "scalar"
    dim = 1
    n_uniforms = 2

    def draw(self, u):
        u = np.asarray(u)
        a = self.A.transform(u[..., 0])
        b = self.B.transform(u[..., 1])
        return a[..., None, None], b[..., None]

    def to_dict(self):
        return {"type": "scalar", "A": self.A.to_dict(), "B": self.B.to_dict()}


@dataclass(frozen=True)
class SgdQuadratic(Model):
    """Mini-batch SGD on a quadratic loss with Gaussian data.

    A = I - (eta/m) sum a_i a_i^T,  B = (eta/m) sum b_i a_i  with
    a_i ~ N(0, Sigma) and b_i ~ N(0, sigma_b^2).
    """

    eta: float
    m: int
    Sigma: tuple
    sigma_b: float = 1.0
    kind = "sgd"

    def __post_init__(self):
        if not self.eta >= 0:
            raise InvalidModel("learning rate must be nonnegative")
        if int(self.m) != self.m or self.m < 1:
            raise InvalidModel("batch size must be a positive integer")
        if self.sigma_b < 0:
            raise InvalidModel("sigma_b must be nonnegative")
        S = np.atleast_2d(np.asarray(self.Sigma, dtype=np.float64))
        if S.shape[0] != S.shape[1] or not np.isfinite(S).all():
            raise InvalidModel("Sigma must be a finite square matrix")
        if np.max(np.abs(S - S.T)) > 1e-10:
            raise InvalidModel("Sigma must be symmetric")
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            w, V = np.linalg.eigh(S)
            if w.min() < -1e-10:
                raise InvalidModel("Sigma must be positive semidefinite") from None
            L = V * np.sqrt(np.clip(w, 0.0, None))
        object.__setattr__(self, "Sigma", tuple(map(tuple, S.tolist())))
        object.__setattr__(self, "_chol", L)

    @property
    def dim(self) -> int:
        return len(self.Sigma)

    @property
    def n_uniforms(self) -> int:
        return self.m * (self.dim + 1)

    def hessian_and_gradient(self, u):
        """Mini-batch Hessian (1/m) sum a a^T and vector (1/m) sum b a."""
        u = np.asarray(u)
        d, m = self.dim, self.m
        z = ndtri(u).reshape(u.shape[:-1] + (m, d + 1))
        H = np.zeros(u.shape[:-1] + (d, d))
        g = np.zeros(u.shape[:-1] + (d,))
        for i in range(m):
            a = mat_vec(self._chol, z[..., i, :d])
            b = self.sigma_b * z[..., i, d]
            H = H + a[..., :, None] * a[..., None, :]
            g = g + b[..., None] * a
        return H / m, g / m

    def draw(self, u):
        H, g = self.hessian_and_gradient(u)
        return np.eye(self.dim) - self.eta * H, self.eta * g

    def to_dict(self):
        return {"type": "sgd", "eta": self.eta, "m": self.m,
                "Sigma": [list(r) for r in self.Sigma], "sigma_b": self.sigma_b}


@dataclass(frozen=True)
class SgdMomentum(Model):
    """Heavy-ball SGD stacked as Y = (X, V) in dimension 2d.

    With H, g the mini-batch Hessian and (1/m) sum b a of ``inner``:
        C = [[I - eta(1-gamma) H, -eta gamma I], [(1-gamma) H, gamma I]]
        D = [eta(1-gamma) g, -(1-gamma) g]
    so that gamma = 0 reproduces the vanilla step in the X block.  ``inner``
    supplies only the data law (m, Sigma, sigma_b); its own eta is unused.
    """

    eta: float
    gamma: float
    inner: SgdQuadratic
    kind = "momentum"

    def __post_init__(self):
        if not self.eta > 0:
            raise InvalidModel("learning rate must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidModel("momentum must lie in [0, 1)")

    @property
    def dim(self) -> int:
        return 2 * self.inner.dim

    @property
    def n_uniforms(self) -> int:
        return self.inner.n_uniforms

    def draw(self, u):
        H, g = self.inner.hessian_and_gradient(u)
        d, eta, gam = self.inner.dim, self.eta, self.gamma
        lead = H.shape[:-2]
        C = np.zeros(lead + (2 * d, 2 * d))
        eye = np.eye(d)
        C[..., :d, :d] = eye - eta * (1 - gam) * H
        C[..., :d, d:] = -eta * gam * eye
        C[..., d:, :d] = (1 - gam) * H
        C[..., d:, d:] = gam * eye
        D = np.concatenate([eta * (1 - gam) * g, -(1 - gam) * g], axis=-1)
        return C, D

    def to_dict(self):
        return {"type": "momentum", "eta": self.eta, "gamma": self.gamma,
                "inner": self.inner.to_dict()}


@dataclass(frozen=True)
class Arch(Model):
    """ARCH(p) on the vector of squared returns (X_t^2, ..., X_{t-p+1}^2).

    ``alphas`` is (alpha_0, ..., alpha_p); the noise W is N(w_mean, w_sd^2).
    """

    alphas: tuple
    w_mean: float = 0.0
    w_sd: float = 1.0
    kind = "arch"

    def __post_init__(self):
        al = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", al)
        if len(al) < 2:
            raise InvalidModel("ARCH needs alpha_0 and at least alpha_1")
        if min(al) < 0:
            raise InvalidModel("ARCH coefficients must be nonnegative")
        if not al[0] * al[-1] > 0:
            raise InvalidModel("ARCH needs alpha_0 * alpha_p > 0")
        if not al[1] > 0:
            raise InvalidModel("ARCH needs alpha_1 > 0")
        if self.w_sd < 0:
            raise InvalidModel("noise sd must be nonnegative")

    @property
    def dim(self) -> int:
        return len(self.alphas) - 1

    n_uniforms = 1

    def noise(self, u) -> np.ndarray:
        return self.w_mean + self.w_sd * ndtri(np.asarray(u)[..., 0])

    def draw(self, u):
        w = self.noise(u)
        w2 = (w * w)[..., None]
        A = _companion(np.asarray(self.alphas[1:]) * w2, self.dim)
        B = np.zeros(w.shape + (self.dim,))
        B[..., 0] = self.alphas[0] * w2[..., 0]
        return A, B

    def to_dict(self):
        return {"type": "arch", "alphas": list(self.alphas),
                "w_mean": self.w_mean, "w_sd": self.w_sd}


@dataclass(frozen=True)
class Garch(Model):
    """GARCH(1, q) on the vector of conditional variances."""

    alpha0: float
    alpha1: float
    betas: tuple
    w_mean: float = 0.0
    w_sd: float = 1.0
    kind = "garch"

    def __post_init__(self):
        be = tuple(float(b) for b in self.betas)
        object.__setattr__(self, "betas", be)
        if not be:
            raise InvalidModel("GARCH needs at least beta_1")
        if min(be) < 0:
            raise InvalidModel("GARCH betas must be nonnegative")
        if not (self.alpha0 > 0 and self.alpha1 > 0 and be[-1] > 0):
            raise InvalidModel("GARCH needs alpha_0 * alpha_1 * beta_q > 0")
        if self.w_sd < 0:
            raise InvalidModel("noise sd must be nonnegative")

    @property
    def dim(self) -> int:
        return len(self.betas)

    n_uniforms = 1

    def draw(self, u):
        w = self.w_mean + self.w_sd * ndtri(np.asarray(u)[..., 0])
        row = np.broadcast_to(np.asarray(self.betas), w.shape + (self.dim,)).copy()
        row[..., 0] += self.alpha1 * w * w
        A = _companion(row, self.dim)
        B = np.zeros(w.shape + (self.dim,))
        B[..., 0] = self.alpha0
        return A, B

    def to_dict(self):
        return {"type": "garch", "alpha0": self.alpha0, "alpha1": self.alpha1,
                "betas": list(self.betas), "w_mean": self.w_mean, "w_sd": self.w_sd}


def model_from_dict(d: dict) -> Model:
    """Build a validated model from its JSON descriptor."""
    if not isinstance(d, dict) or "type" not in d:
        raise InvalidModel("model descriptor needs a 'type' field")
    t = d["type"]
    try:
        if t == "scalar":
            return Scalar(ScalarLaw.from_dict(d["A"]), ScalarLaw.from_dict(d["B"]))
        if t == "explicit":
            return Explicit(tuple((a["p"], a["A"], a["B"]) for a in d["support"]))
        if t == "sgd":
            return SgdQuadratic(float(d["eta"]), int(d["m"]), d["Sigma"], float(d.get("sigma_b", 1.0)))
        if t == "momentum":
            return SgdMomentum(float(d["eta"]), float(d["gamma"]), model_from_dict(d["inner"]))
        if t == "arch":
            return Arch(tuple(d["alphas"]), float(d.get("w_mean", 0.0)), float(d.get("w_sd", 1.0)))
        if t == "garch":
            return Garch(float(d["alpha0"]), float(d["alpha1"]), tuple(d["betas"]),
                         float(d.get("w_mean", 0.0)), float(d.get("w_sd", 1.0)))
    except (KeyError, TypeError) as exc:
        raise InvalidModel(f"bad {t} descriptor: {exc}") from None
    raise InvalidModel(f"unknown model type {t!r}")


def sgd_isotropic(eta: float, d: int = 1, m: int = 1, sigma_b: float = 1.0) -> SgdQuadratic:
    return SgdQuadratic(eta, m, np.eye(d).tolist(), sigma_b)


def dimension(model: Model) -> int:
    return model.dim


def sample(model: Model, rng: RngStream) -> AffineMapSample:
    """One draw of (A, B), advancing ``rng``."""
    A, B = model.draw(rng.uniforms(model.n_uniforms))
    return AffineMapSample(np.array(A), np.array(B))


def arch_squared_series_step(prev_squares: Sequence[float], w: float, alphas: Sequence[float]) -> float:
    """Next squared return sigma_t^2 w^2 with sigma_t^2 = a0 + sum a_i X_{t-i}^2."""
    prev = np.asarray(prev_squares, dtype=np.float64)
    if np.any(prev < 0):
        raise ValueError("squared returns must be nonnegative")
    sig2 = alphas[0] + float(np.dot(np.asarray(alphas[1:len(prev) + 1]), prev))
    return sig2 * w * w
