from __future__ import annotations

import numpy as np

from .tape import Param


class ParamSet(dict):
    """Ordered ``name -> Param`` mapping with a few whole-set helpers.

    Names are dotted scopes ("enc.wx", "critic.mlp.w0"); insertion order is the
    canonical order for flattening and checkpointing.
    """

    def add(self, name: str, value) -> Param:
        if name in self:
            raise KeyError(f"duplicate parameter {name!r}")
        p = Param(name, value)
        self[name] = p
        return p

    def uniform(self, name: str, shape, fan_in: int, rng: np.random.Generator) -> Param:
        bound = 1.0 / np.sqrt(fan_in)
        return self.add(name, rng.uniform(-bound, bound, size=shape))

    def zero_grad(self):
        for p in self.values():
            p.zero_grad()

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in self.values())))

    def clip_grad_norm(self, max_norm: float) -> float:
        """Scale gradients in place so their global norm is at most ``max_norm``.

        Returns the norm before clipping.
        """
        norm = self.grad_norm()
        if max_norm is not None and norm > max_norm:
            f = max_norm / norm
            for p in self.values():
                p.grad = p.grad * f
        return norm

    def size(self) -> int:
        return int(sum(p.value.size for p in self.values()))

    def flat(self) -> np.ndarray:
        return np.concatenate([p.value.ravel() for p in self.values()])

    def flat_grad(self) -> np.ndarray:
        return np.concatenate([p.grad.ravel() for p in self.values()])

    def set_flat(self, x: np.ndarray):
        k = 0
        for p in self.values():
            n = p.value.size
            p.value = np.array(x[k:k + n], dtype=np.float64).reshape(p.value.shape)
            k += n

    def state(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.items()}

    def load_state(self, state: dict[str, np.ndarray]):
        missing = set(self) - set(state)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)}")
        for name, p in self.items():
            v = np.asarray(state[name], dtype=np.float64)
            if v.shape != p.value.shape:
                raise ValueError(f"{name}: shape {v.shape} != {p.value.shape}")
            p.value = v.copy()

    def scoped(self, prefix: str) -> "ParamSet":
        """View of the parameters whose names start with ``prefix + '.'``."""
        out = ParamSet()
        for name, p in self.items():
            if name.startswith(prefix + "."):
                out[name] = p
        return out
