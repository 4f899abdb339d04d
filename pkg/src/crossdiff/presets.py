"""Ready-made models and scenario defaults.

``competition`` is a Lotka-Volterra competition pair whose first species
diffuses faster where the second is dense. ``starvation`` uses the same
reactions with a diffusivity built from the active/starving split; its
conversion rates are illustrative choices, positive at zero so that the
diffusivity extends continuously to ``u = 0``.
"""

import numpy as np

from .model import (DiffusivitySpec, ModelSpec, ReactionSpec, StarvationSpec,
                    starvation_diffusivity)

COMPETITION_BOX = ((0.0, 4.0), (0.0, 4.0))


def _const(c):
    return lambda u, v: np.full(np.broadcast(u, v).shape, float(c))


def constant_diffusivity(d=1.0):
    return DiffusivitySpec(B=_const(d), a0=d, a1=d, a2=0.0, a3=0.0,
                           d1A_fn=_const(d), d2A_fn=_const(0.0), d2B_fn=_const(0.0))


def competition_reaction(alpha=0.5, beta=0.5, r_u=1.0, r_v=1.0):
    """``f = r_u (1 - u - alpha v)``, ``g = r_v (1 - v - beta u)``."""
    return ReactionSpec(
        f=lambda u, v: r_u * (1.0 - u - alpha * v),
        g=lambda u, v: r_v * (1.0 - v - beta * u),
        C_f=r_u, C_f_prime=r_u * max(1.0, alpha),
        C_g=r_v, C_g_prime=r_v * max(1.0, beta),
    )


def zero_reaction():
    return ReactionSpec(f=_const(0.0), g=_const(0.0), C_f=1.0, C_f_prime=1.0, C_g=1.0, C_g_prime=1.0)


def competition_diffusivity(u_max=COMPETITION_BOX[0][1]):
    """``B = 1 + v/(1+v)``; ``|d2A| = u/(1+v)^2`` is bounded only on ``u <= u_max``."""
    return DiffusivitySpec(
        B=lambda u, v: 1.0 + v / (1.0 + v) + 0.0 * u,
        a0=1.0, a1=2.0, a2=float(u_max), a3=1.0,
        d1A_fn=lambda u, v: 1.0 + v / (1.0 + v) + 0.0 * u,
        d2A_fn=lambda u, v: u / (1.0 + v) ** 2,
        d2B_fn=lambda u, v: 1.0 / (1.0 + v) ** 2 + 0.0 * u,
    )


def starvation_spec():
    return StarvationSpec(
        phi=lambda x: 1.0 + x / (1.0 + x),
        psi=lambda x: 1.0 + 2.0 * x / (1.0 + x),
        phi_prime=lambda x: 1.0 / (1.0 + x) ** 2,
        psi_prime=lambda x: 2.0 / (1.0 + x) ** 2,
        a=1.0, b=2.0, c=1.0, d=1.0, d_a=0.5, d_b=2.0,
    )


def heat_sanity():
    return ModelSpec(constant_diffusivity(1.0), zero_reaction(), d_v=1.0, name="heat-sanity")


def competition():
    return ModelSpec(competition_diffusivity(), competition_reaction(), d_v=1.0, name="competition")


def constant_competition(d=1.0):
    return ModelSpec(constant_diffusivity(d), competition_reaction(), d_v=d, name="constant-competition")


def starvation(box=COMPETITION_BOX):
    sp = starvation_spec()
    return ModelSpec(starvation_diffusivity(sp, box=box), competition_reaction(), d_v=1.0,
                     starvation=sp, name="starvation")


MODELS = {
    "heat-sanity": heat_sanity,
    "competition": competition,
    "constant-competition": constant_competition,
    "starvation": starvation,
}

# scenario defaults; initial data specs use the grammar of the [initial] section
SCENARIOS = {
    "heat-sanity": {
        "grid": {"dim": 1, "n": 128, "extent": 1.0},
        "solver": {"scheme": "nondiv", "dt": 1e-4, "t_end": 0.1},
        "initial": {"u": "cosine 1.0 1.0 1", "v": "cosine 1.0 1.0 1"},
        "verify": ["max_principle", "nonnegativity", "energy"],
        "box": ((0.0, 2.0), (0.0, 2.0)),
    },
    "competition": {
        "grid": {"dim": 1, "n": 128, "extent": 1.0},
        "solver": {"scheme": "nondiv", "dt": 1e-3, "t_end": 1.0},
        "initial": {"u": "cosine 1.0 0.5 1", "v": "cosine 0.6 0.4 2"},
        "verify": ["max_principle", "nonnegativity", "energy"],
        "box": COMPETITION_BOX,
    },
    "constant-competition": {
        "grid": {"dim": 1, "n": 128, "extent": 1.0},
        "solver": {"scheme": "nondiv", "dt": 1e-3, "t_end": 1.0},
        "initial": {"u": "cosine 1.0 0.5 1", "v": "cosine 0.6 0.4 2"},
        "verify": ["max_principle", "nonnegativity", "energy"],
        "box": COMPETITION_BOX,
    },
    "starvation": {
        "grid": {"dim": 1, "n": 128, "extent": 1.0},
        "solver": {"scheme": "nondiv", "dt": 1e-3, "t_end": 1.0},
        "initial": {"u": "cosine 1.0 0.5 1", "v": "cosine 0.6 0.4 2"},
        "verify": ["max_principle", "nonnegativity", "energy"],
        "box": COMPETITION_BOX,
    },
}


def get_model(name):
    try:
        return MODELS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(MODELS)}") from None
