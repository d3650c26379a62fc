"""Named refusals for theorem preconditions that a theory or request fails."""

from __future__ import annotations

REFUSAL_CODES = {
    "spacetime-dependent": "the density depends explicitly on the coordinates",
    "dimension-two": "scaling dimension (D-2)/2 vanishes for D = 2",
    "wrong-homogeneity": "the potential is not homogeneous of the required degree",
    "not-canonical": "the density is not of the form 1/2 G d(phi).d(phi) - U(phi)",
    "not-dissipative-form": "the density is not exp(h.x) times a canonical density",
    "zero-damping-component": "some component h_mu vanishes, so 2/h_mu is undefined",
    "no-rho": "no constant rho satisfies the momentum/derivative proportionality",
    "not-finitely-invariant": "d L_eps / d eps at eps = 0 is not a spacetime constant",
    "theta-inconsistent": "the explicit coordinate dependence is not the total derivative of theta",
    "condition-violated": "the family does not satisfy the required identity for all motions",
    "not-complex": "the family needs a complex field",
    "unknown-check": "the requested check is not recognised",
}


class Refusal(ValueError):
    """A theorem cannot be applied; ``code`` is one of :data:`REFUSAL_CODES`."""

    def __init__(self, code: str, detail: str = ""):
        if code not in REFUSAL_CODES:
            raise KeyError(f"unknown refusal code {code!r}")
        self.code = code
        self.detail = detail
        text = REFUSAL_CODES[code] + (f": {detail}" if detail else "")
        super().__init__(f"[{code}] {text}")
