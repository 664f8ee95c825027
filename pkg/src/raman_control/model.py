"""Field-free Hamiltonian, absorbing terms and dipole matrix.

A :class:`ModelSystem` lives on a labelled basis of configurations (the
ground determinant, hole-particle excitations and discretized continuum
pseudo-states).  Energies and widths are stored in eV; ``hamiltonian_diag``
returns the complex diagonal generator in atomic units.
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
import math
from pathlib import Path

import numpy as np
import tomli
from scipy.sparse import csr_matrix

from .errors import ConfigError
from .units import HARTREE_EV


class Group(str, Enum):
    GROUND = "ground"
    HOLE_2S = "hole_2s"
    HOLE_2P_M0 = "hole_2p_m0"
    HOLE_2P_M1 = "hole_2p_m1"
    CONTINUUM = "continuum"


class CapMode(str, Enum):
    EFFECTIVE_WIDTH = "effective_width"
    EXPLICIT_CAP = "explicit_cap"


@dataclass(frozen=True)
class BasisState:
    label: str
    energy: float  # eV above ground
    width: float = 0.0  # eV, Lorentzian decay width
    group: Group = Group.GROUND

    def __post_init__(self):
        object.__setattr__(self, "group", Group(self.group))
        if not self.width >= 0.0:
            raise ConfigError(f"negative width {self.width}", key=f"states.{self.label}.width")


@dataclass(frozen=True)
class ContinuumSpec:
    e_min: float
    e_max: float
    n_states: int
    coupling_scale: float
    attached_to: str
    # pseudo-state width in units of the level spacing
    width_factor: float = 2.0

    def __post_init__(self):
        if self.n_states < 1:
            raise ConfigError("n_states must be >= 1", key="continuum.n_states")
        if not self.e_min < self.e_max:
            raise ConfigError("e_min must be below e_max", key="continuum.e_min")
        if self.coupling_scale < 0:
            raise ConfigError("coupling_scale must be >= 0", key="continuum.coupling_scale")


@dataclass(frozen=True, eq=False)
class ModelSystem:
    basis: tuple
    dipole: np.ndarray
    cap_mode: CapMode = CapMode.EFFECTIVE_WIDTH
    cap_strength: float = 1e-4
    target_label: str = None
    name: str = ""
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        basis = tuple(self.basis)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "cap_mode", CapMode(self.cap_mode))
        index = {}
        for i, s in enumerate(basis):
            if s.label in index:
                raise ConfigError(f"duplicate label {s.label!r}", key=f"states[{i}].label")
            index[s.label] = i
            if s.group is Group.GROUND and (s.energy != 0.0 or s.width != 0.0):
                raise ConfigError("ground state must have energy 0 and width 0", key=f"states.{s.label}")
        object.__setattr__(self, "_index", index)
        z = np.array(self.dipole, dtype=float)
        if z.shape != (len(basis), len(basis)):
            raise ConfigError(f"dipole shape {z.shape} does not match basis size {len(basis)}", key="dipoles")
        if not np.array_equal(z, z.T):
            i, j = np.argwhere(z != z.T)[0]
            raise ConfigError(
                f"dipole matrix not symmetric: z[{i}][{j}]={z[i, j]} but z[{j}][{i}]={z[j, i]}",
                key=f"dipoles.matrix[{i}][{j}]",
            )
        if not np.all(np.isfinite(z)):
            raise ConfigError("non-finite dipole entry", key="dipoles")
        z.setflags(write=False)
        object.__setattr__(self, "dipole", z)
        if self.target_label is not None and self.target_label not in index:
            raise ConfigError(f"unknown target label {self.target_label!r}", key="model.target")
        if self.cap_strength < 0:
            raise ConfigError("CAP strength must be non-negative", key="cap.strength")

    @property
    def dim(self):
        return len(self.basis)

    @property
    def labels(self):
        return [s.label for s in self.basis]

    def index(self, label):
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"no basis state labelled {label!r}") from None

    @property
    def target_index(self):
        return None if self.target_label is None else self._index[self.target_label]

    @property
    def energies(self):
        return np.array([s.energy for s in self.basis])

    @property
    def widths(self):
        return np.array([s.width for s in self.basis])

    def cap_weights(self):
        """Diagonal of W: 1 on continuum pseudo-states, 0 elsewhere."""
        return np.array([1.0 if s.group is Group.CONTINUUM else 0.0 for s in self.basis])

    def hamiltonian_diag(self):
        """Diagonal of the non-Hermitian field-free Hamiltonian (a.u.)."""
        e = self.energies / HARTREE_EV
        if self.cap_mode is CapMode.EFFECTIVE_WIDTH:
            return e - 0.5j * self.widths / HARTREE_EV
        return e - 1j * self.cap_strength * self.cap_weights()

    def hamiltonian(self):
        return np.diag(self.hamiltonian_diag())

    def generator(self, field_value):
        """Full generator ``H - E z - i W`` at a given field (a.u.)."""
        return self.hamiltonian() - field_value * self.dipole

    def dipole_csr(self, transpose=False):
        z = self.dipole.T if transpose else self.dipole
        c = csr_matrix(z)
        c.sort_indices()
        return c.indptr.astype(np.int32), c.indices.astype(np.int32), c.data.astype(float)

    def group_indices(self):
        out = {g: [] for g in Group}
        for i, s in enumerate(self.basis):
            out[s.group].append(i)
        return {g: np.array(v, dtype=int) for g, v in out.items()}

    def basis_vector(self, label):
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(label)] = 1.0
        return v

    def ground_state(self):
        g = self.group_indices()[Group.GROUND]
        if len(g) == 0:
            raise ValueError("model has no ground-group state")
        v = np.zeros(self.dim, dtype=complex)
        v[g[0]] = 1.0
        return v

    # derived models -----------------------------------------------------
    def with_widths(self, widths):
        """Copy with the given widths (mapping label -> eV); others unchanged."""
        basis = [replace(s, width=widths.get(s.label, s.width)) for s in self.basis]
        return replace(self, basis=basis)

    def without_bound_decay(self):
        return self.with_widths({s.label: 0.0 for s in self.basis if s.group is not Group.CONTINUUM})

    def with_scaled_dipoles(self, scale, pairs=None):
        """Scale all couplings, or only the listed label pairs."""
        z = np.array(self.dipole)
        if pairs is None:
            z *= scale
        else:
            for a, b in pairs:
                i, j = self.index(a), self.index(b)
                z[i, j] *= scale
                if i != j:
                    z[j, i] *= scale
        return replace(self, dipole=z)

    def restricted(self, labels):
        """Sub-model on the listed states (in the given order)."""
        idx = [self.index(l) for l in labels]
        target = self.target_label if self.target_label in labels else None
        return replace(
            self,
            basis=[self.basis[i] for i in idx],
            dipole=self.dipole[np.ix_(idx, idx)],
            target_label=target,
        )

    def bound_only(self):
        return self.restricted([s.label for s in self.basis if s.group is not Group.CONTINUUM])

    def with_cap_mode(self, mode, strength=None):
        return replace(self, cap_mode=CapMode(mode),
                       cap_strength=self.cap_strength if strength is None else strength)

    def describe(self):
        """Plain-data description accepted by :func:`build_from_config`."""
        states = [
            {"label": s.label, "energy": s.energy, "width": s.width, "group": s.group.value}
            for s in self.basis
        ]
        return {
            "model": {"name": self.name, "target": self.target_label or ""},
            "cap": {"mode": self.cap_mode.value, "strength": self.cap_strength},
            "states": states,
            "dipoles": {"matrix": self.dipole.tolist()},
        }


def discretize_continuum(spec, cap_mode=CapMode.EFFECTIVE_WIDTH, prefix=None):
    """Pseudo-continuum states and their couplings to ``spec.attached_to``.

    Returns ``(states, couplings)`` with couplings as ``(attached, label, value)``
    triples.  Each coupling is ``coupling_scale * sqrt(dE)`` (dE in a.u.) so the
    golden-rule rate does not depend on the level spacing.  In effective-width
    mode each pseudo-state decays with width ``width_factor * dE``.
    """
    n = spec.n_states
    if n == 1:
        energies = np.array([0.5 * (spec.e_min + spec.e_max)])
        spacing = spec.e_max - spec.e_min
    else:
        energies = np.linspace(spec.e_min, spec.e_max, n)
        spacing = energies[1] - energies[0]
    coupling = spec.coupling_scale * math.sqrt(spacing / HARTREE_EV)
    width = spec.width_factor * spacing if CapMode(cap_mode) is CapMode.EFFECTIVE_WIDTH else 0.0
    prefix = prefix or f"cont[{spec.attached_to}]"
    states, couplings = [], []
    for e in energies:
        label = f"{prefix}@{e:.4f}eV"
        states.append(BasisState(label, float(e), width, Group.CONTINUUM))
        couplings.append((spec.attached_to, label, coupling))
    return states, couplings


def _assemble(states, couplings, continua, cap_mode, cap_strength, target, name, matrix=None):
    states = list(states)
    couplings = list(couplings)
    labels = {s.label for s in states}
    for k, spec in enumerate(continua):
        if spec.attached_to not in labels:
            raise ConfigError(f"attached to unknown state {spec.attached_to!r}",
                              key=f"continuum[{k}].attached_to")
        extra, cpl = discretize_continuum(spec, cap_mode, prefix=f"cont{k}[{spec.attached_to}]")
        states.extend(extra)
        couplings.extend(cpl)
    index = {}
    for i, s in enumerate(states):
        if s.label in index:
            raise ConfigError(f"duplicate label {s.label!r}", key=f"states[{i}].label")
        index[s.label] = i
    n = len(states)
    z = np.zeros((n, n))
    if matrix is not None:
        m = np.asarray(matrix, dtype=float)
        k = m.shape[0]
        z[:k, :k] = m
    for a, b, v in couplings:
        for lab in (a, b):
            if lab not in index:
                raise ConfigError(f"coupling references unknown state {lab!r}", key=f"dipoles.{a}|{b}")
        i, j = index[a], index[b]
        z[i, j] = v
        z[j, i] = v
    return ModelSystem(states, z, cap_mode, cap_strength, target, name)


def build_from_config(cfg):
    """Build a :class:`ModelSystem` from a parsed model description.

    Sections: ``[model]`` (name, target), ``[cap]`` (mode, strength),
    ``[[states]]`` (label, energy eV, width eV, group), ``[dipoles]``
    (``matrix`` over the listed states and/or ``couplings`` triples, a.u.),
    ``[[continuum]]`` (ContinuumSpec fields).
    """
    meta = cfg.get("model", {})
    cap = cfg.get("cap", {})
    cap_mode = cap.get("mode", CapMode.EFFECTIVE_WIDTH.value)
    try:
        cap_mode = CapMode(cap_mode)
    except ValueError:
        raise ConfigError(f"unknown CAP mode {cap_mode!r}", key="cap.mode") from None
    raw_states = cfg.get("states")
    if not raw_states:
        raise ConfigError("at least one state is required", key="states")
    states = []
    for i, st in enumerate(raw_states):
        for req in ("label", "energy"):
            if req not in st:
                raise ConfigError(f"missing {req!r}", key=f"states[{i}].{req}")
        if st.get("width", 0.0) < 0:
            raise ConfigError(f"negative width {st['width']}", key=f"states[{i}].width")
        try:
            group = Group(st.get("group", "ground" if i == 0 else "hole_2p_m0"))
        except ValueError:
            raise ConfigError(f"unknown group {st.get('group')!r}", key=f"states[{i}].group") from None
        states.append(BasisState(str(st["label"]), float(st["energy"]), float(st.get("width", 0.0)), group))
    dip = cfg.get("dipoles", {})
    matrix = dip.get("matrix")
    if matrix is not None:
        m = np.asarray(matrix, dtype=float)
        if m.shape != (len(states), len(states)):
            raise ConfigError(f"matrix shape {m.shape} does not match {len(states)} states", key="dipoles.matrix")
        bad = np.argwhere(m != m.T)
        if len(bad):
            i, j = bad[0]
            raise ConfigError(f"dipole matrix not symmetric: z[{i}][{j}]={m[i, j]} but z[{j}][{i}]={m[j, i]}",
                              key=f"dipoles.matrix[{i}][{j}]")
    couplings = []
    seen = {}
    for k, entry in enumerate(dip.get("couplings", [])):
        if len(entry) != 3:
            raise ConfigError("coupling entries are [label_a, label_b, value]", key=f"dipoles.couplings[{k}]")
        a, b, v = str(entry[0]), str(entry[1]), float(entry[2])
        key = frozenset((a, b))
        if key in seen and seen[key] != v:
            raise ConfigError(f"conflicting values for {a}<->{b}", key=f"dipoles.couplings[{k}]")
        seen[key] = v
        couplings.append((a, b, v))
    continua = []
    for k, c in enumerate(cfg.get("continuum", [])):
        try:
            continua.append(ContinuumSpec(
                float(c["e_min"]), float(c["e_max"]), int(c["n_states"]),
                float(c.get("coupling_scale", 0.0)), str(c["attached_to"]),
                float(c.get("width_factor", 2.0)),
            ))
        except KeyError as exc:
            raise ConfigError(f"missing {exc.args[0]!r}", key=f"continuum[{k}].{exc.args[0]}") from None
        except ConfigError as exc:
            raise ConfigError(str(exc).split(": ", 1)[-1], key=f"continuum[{k}]") from None
    target = meta.get("target") or None
    return _assemble(states, couplings, continua, cap_mode, float(cap.get("strength", 1e-4)),
                     target, str(meta.get("name", "")), matrix=matrix)


def load_model_file(path):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"model file not found: {path}", key="model.file") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}", key="model.file") from None
    if "preset" in doc.get("model", {}):
        return neon_preset_from_doc(doc)
    return build_from_config(doc)


def neon_reference():
    with resources.files("raman_control").joinpath("data/neon.toml").open("rb") as fh:
        return tomli.load(fh)


def neon_preset(variant="experimental", dipoles=None, continuum=None, cap_mode="effective_width",
                cap_strength=1e-4, include_extra_states=True, intermediate_width=None):
    """Reduced neon model on the ground / 2s-hole / 2p-hole level scheme.

    ``dipoles`` must map ``ground_intermediate`` and ``intermediate_target``
    (a.u.); missing entries fall back to the shipped defaults only when
    ``dipoles`` is None.  ``continuum`` is a list of :class:`ContinuumSpec`
    whose ``attached_to`` may use the role names ground/intermediate/target.
    """
    ref = neon_reference()
    if variant not in ref["variants"]:
        raise ConfigError(f"unknown neon variant {variant!r}", key="model.variant")
    labels = ref["labels"]
    levels = ref["variants"][variant]
    if dipoles is None:
        dipoles = dict(ref["dipoles"])
    for key in ("ground_intermediate", "intermediate_target"):
        if key not in dipoles:
            raise ConfigError(f"missing coupling entry {key!r}", key=f"dipoles.{key}")
    width_i = ref["widths"]["intermediate"] if intermediate_width is None else intermediate_width
    states = [
        BasisState(labels["ground"], 0.0, 0.0, Group.GROUND),
        BasisState(labels["intermediate"], levels["intermediate"], width_i, Group.HOLE_2S),
        BasisState(labels["target"], levels["target"], 0.0, Group.HOLE_2P_M0),
    ]
    couplings = [
        (labels["ground"], labels["intermediate"], float(dipoles["ground_intermediate"])),
        (labels["intermediate"], labels["target"], float(dipoles["intermediate_target"])),
    ]
    if include_extra_states:
        for extra in ref.get("extra_states", []):
            e = levels[extra["parent"]] + extra["offset"]
            states.append(BasisState(extra["label"], e, extra["width"], Group(extra["group"])))
            couplings.append((labels["ground"], extra["label"], extra["coupling_to_ground"]))
    if continuum is None:
        continuum = [ContinuumSpec(**c) for c in ref.get("continuum", [])]
    resolved = [replace(c, attached_to=labels.get(c.attached_to, c.attached_to)) for c in continuum]
    return _assemble(states, couplings, resolved, CapMode(cap_mode), cap_strength,
                     labels["target"], f"neon_{variant}")


def neon_preset_from_doc(doc):
    """Neon preset with overrides from a model document's sections."""
    meta = doc.get("model", {})
    variant = meta.get("variant") or meta.get("preset", "neon_experimental").replace("neon_", "")
    dip = doc.get("dipoles")
    cont = doc.get("continuum")
    continuum = None
    if cont is not None:
        continuum = [ContinuumSpec(float(c["e_min"]), float(c["e_max"]), int(c["n_states"]),
                                   float(c.get("coupling_scale", 0.0)), str(c["attached_to"]),
                                   float(c.get("width_factor", 2.0))) for c in cont]
    cap = doc.get("cap", {})
    return neon_preset(variant, dipoles=dict(dip) if dip is not None else None, continuum=continuum,
                       cap_mode=cap.get("mode", "effective_width"), cap_strength=float(cap.get("strength", 1e-4)),
                       include_extra_states=bool(meta.get("extra_states", True)),
                       intermediate_width=meta.get("intermediate_width"))


PRESETS = {
    "neon_experimental": lambda: neon_preset("experimental"),
    "neon_tdcis": lambda: neon_preset("tdcis"),
}


def load_model(ref):
    """Resolve a preset name or model-file path."""
    if ref in PRESETS:
        return PRESETS[ref]()
    if isinstance(ref, str) and ref.startswith("neon_") and not Path(ref).exists():
        raise ConfigError(f"unknown preset {ref!r}; available: {', '.join(PRESETS)}", key="model.preset")
    return load_model_file(ref)
