"""Classical and semantic information measures (base-2 logs).

Classical quantities are in bits, semantic ones in sebits. Zero-probability
entries contribute nothing (0 log 0 = 0).
"""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .model import Distribution, JointModel, SemanticVariable, joint_cell_mass, semantic_marginal


def _h(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def entropy(d: Distribution | np.ndarray) -> float:
    probs = d.probs if isinstance(d, Distribution) else d
    return _h(probs)


def classical_joint_measures(jm: JointModel) -> dict[str, float]:
    h_uv = _h(jm.probs)
    h_u = _h(jm.probs.sum(axis=1))
    h_v = _h(jm.probs.sum(axis=0))
    return {
        "H_UV": h_uv,
        "H_U_given_V": h_uv - h_v,
        "H_V_given_U": h_uv - h_u,
        "I_UV": h_u + h_v - h_uv,
    }


def semantic_entropy(v: SemanticVariable) -> float:
    return _h(semantic_marginal(v))


def semantic_joint_entropy(jm: JointModel) -> float:
    return _h(joint_cell_mass(jm))


def semantic_conditional_entropy(jm: JointModel, conditioned_axis: str = "row") -> float:
    """Semantic entropy of one axis given the syntactic symbol of the other.

    ``conditioned_axis="row"`` conditions on U and returns H_s(Ṽ|U);
    ``"col"`` conditions on V and returns H_s(Ũ|V).
    """
    if conditioned_axis == "col":
        jm = jm.transpose()
    elif conditioned_axis != "row":
        raise ValueError(f"conditioned_axis must be 'row' or 'col', got {conditioned_axis!r}")
    # mass of (u_i, cell V_b)
    m = jm.probs @ jm.col_partition.indicator()
    return _h(m) - _h(jm.probs.sum(axis=1))


def conditional_cell_table(jm: JointModel, given: str = "col") -> np.ndarray:
    """p(ũ | v) as an Ñ_u x N_v table (``given="col"``) or p(ṽ | u) as Ñ_v x N_u (``"row"``).

    Columns for zero-probability conditioning symbols are left at zero.
    """
    if given == "row":
        jm = jm.transpose()
    elif given != "col":
        raise ValueError(f"given must be 'row' or 'col', got {given!r}")
    m = jm.row_partition.indicator().T @ jm.probs  # mass of (cell of U, v)
    pv = jm.probs.sum(axis=0)
    return np.divide(m, pv[None, :], out=np.zeros_like(m), where=pv[None, :] > 0)


def up_semantic_mi(jm: JointModel) -> float:
    return _h(jm.probs.sum(axis=1)) + _h(jm.probs.sum(axis=0)) - semantic_joint_entropy(jm)


def down_semantic_mi(jm: JointModel) -> dict[str, float]:
    raw = (
        semantic_entropy(jm.row_variable())
        + semantic_entropy(jm.col_variable())
        - _h(jm.probs)
    )
    return {"raw": raw, "clamped": max(raw, 0.0)}


@dataclass(frozen=True)
class MeasureReport:
    H_U: float
    H_V: float
    H_UV: float
    H_U_given_V: float
    H_V_given_U: float
    I_UV: float
    Hs_U: float
    Hs_V: float
    Hs_UV: float
    Hs_U_given_V: float
    Hs_V_given_U: float
    Is: float
    Is_clamped: float
    Iup: float

    BIT_FIELDS = ("H_U", "H_V", "H_UV", "H_U_given_V", "H_V_given_U", "I_UV")

    def unit(self, name: str) -> str:
        return "bits" if name in self.BIT_FIELDS else "sebits"

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def measure_report(jm: JointModel) -> MeasureReport:
    c = classical_joint_measures(jm)
    down = down_semantic_mi(jm)
    return MeasureReport(
        H_U=_h(jm.probs.sum(axis=1)),
        H_V=_h(jm.probs.sum(axis=0)),
        H_UV=c["H_UV"],
        H_U_given_V=c["H_U_given_V"],
        H_V_given_U=c["H_V_given_U"],
        I_UV=c["I_UV"],
        Hs_U=semantic_entropy(jm.row_variable()),
        Hs_V=semantic_entropy(jm.col_variable()),
        Hs_UV=semantic_joint_entropy(jm),
        Hs_U_given_V=semantic_conditional_entropy(jm, "col"),
        Hs_V_given_U=semantic_conditional_entropy(jm, "row"),
        Is=down["raw"],
        Is_clamped=down["clamped"],
        Iup=up_semantic_mi(jm),
    )


@dataclass(frozen=True)
class ChainLink:
    label: str
    value: float


@dataclass(frozen=True)
class ChainAudit:
    entropy_chain: tuple[ChainLink, ...]
    mi_chain: tuple[ChainLink, ...]
    mi_chain_transposed: tuple[ChainLink, ...]
    slack: float

    @staticmethod
    def _holds(chain, slack) -> list[bool]:
        return [a.value <= b.value + slack for a, b in zip(chain, chain[1:])]

    @property
    def checks(self) -> list[tuple[str, float, bool]]:
        """(label, value, holds) where ``holds`` refers to the link into the next entry."""
        out = []
        for chain in (self.entropy_chain, self.mi_chain, self.mi_chain_transposed):
            ok = self._holds(chain, self.slack) + [True]
            out.extend((link.label, link.value, h) for link, h in zip(chain, ok))
        return out

    @property
    def passed(self) -> bool:
        return all(h for _, _, h in self.checks)


def chain_rule_audit(jm: JointModel, slack: float = 1e-9) -> ChainAudit:
    """Evaluate the entropy and mutual-information chains as ordered links.

    The mutual-information chain is reported twice: conditioning V on U and,
    with the roles swapped, U on V. Both orderings must be nondecreasing.
    """
    r = measure_report(jm)
    entropy_chain = (
        ChainLink("Hs_U+Hs_V_given_U", r.Hs_U + r.Hs_V_given_U),
        ChainLink("Hs_UV", r.Hs_UV),
        ChainLink("H_U+Hs_V_given_U", r.H_U + r.Hs_V_given_U),
        ChainLink("H_UV", r.H_UV),
    )
    mi_chain = (
        ChainLink("Is", r.Is),
        ChainLink("Hs_V-H_V_given_U", r.Hs_V - r.H_V_given_U),
        ChainLink("I_UV", r.I_UV),
        ChainLink("H_V-Hs_V_given_U", r.H_V - r.Hs_V_given_U),
        ChainLink("Iup", r.Iup),
    )
    mi_chain_t = (
        ChainLink("Is", r.Is),
        ChainLink("Hs_U-H_U_given_V", r.Hs_U - r.H_U_given_V),
        ChainLink("I_UV", r.I_UV),
        ChainLink("H_U-Hs_U_given_V", r.H_U - r.Hs_U_given_V),
        ChainLink("Iup", r.Iup),
    )
    return ChainAudit(entropy_chain, mi_chain, mi_chain_t, slack)
