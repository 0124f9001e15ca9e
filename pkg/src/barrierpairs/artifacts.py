"""Artifact file schemas: serialized barrier pairs and estimator designs.

Artifacts are JSON with named matrices as row-major nested lists at full
float precision, plus a hash of the plant definition they were produced
from so downstream commands can refuse mismatched inputs.
"""

import hashlib
import json

import numpy as np

from .errors import ArtifactError
from .estimator import EstimatorDesign
from .model import Controller
from .synthesis import BarrierPair

BARRIER_PAIR_KIND = "barrier-pair"
ESTIMATOR_KIND = "estimator-design"


def plant_fingerprint(plant):
    """Stable hash of the plant definition (order, coefficients, box, bound)."""
    payload = {
        "n": plant.n,
        "alpha_bar": [repr(float(v)) for v in plant.alpha_bar],
        "beta_bar": [repr(float(v)) for v in plant.beta_bar],
        "uncertainty": [
            {
                "b_tilde": [repr(float(v)) for v in d.b_tilde],
                "theta_y": repr(d.theta_y),
                "theta_u": repr(d.theta_u),
            }
            for d in plant.uncertainty_dirs
        ],
        "w_bar": repr(plant.w_bar),
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _mat(a):
    return np.asarray(a, dtype=float).tolist()


def save_barrier_pair(bp, plant, path):
    doc = {
        "kind": BARRIER_PAIR_KIND,
        "plant_hash": plant_fingerprint(plant),
        "n": bp.n,
        "epsilon": bp.epsilon,
        "X": _mat(bp.X),
        "Y": _mat(bp.Y),
        "V": _mat(bp.V),
        "W": _mat(bp.W),
        "P": _mat(bp.P),
        "A_k": _mat(bp.controller.A_k),
        "b_k": _mat(bp.controller.b_k),
        "c_k": _mat(bp.controller.c_k),
        "mu_w": bp.mu_w,
        "mu_vec": _mat(bp.mu_vec),
        "logdet_Y": bp.logdet_Y,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_barrier_pair(path, plant=None):
    doc = _load(path, BARRIER_PAIR_KIND)
    if plant is not None:
        _check_hash(doc, plant, path)
    try:
        ctrl = Controller(A_k=np.array(doc["A_k"]), b_k=np.array(doc["b_k"]),
                          c_k=np.array(doc["c_k"]))
        bp = BarrierPair(
            X=np.array(doc["X"]), Y=np.array(doc["Y"]), V=np.array(doc["V"]),
            W=np.array(doc["W"]), controller=ctrl, epsilon=float(doc["epsilon"]),
            P=np.array(doc["P"]), mu_w=float(doc["mu_w"]),
            mu_vec=np.array(doc["mu_vec"], dtype=float).reshape(-1),
        )
    except (KeyError, ValueError) as exc:
        raise ArtifactError(f"{path}: malformed barrier-pair artifact: {exc}") from exc
    return bp


def save_estimator(design, plant, path):
    doc = {
        "kind": ESTIMATOR_KIND,
        "plant_hash": plant_fingerprint(plant),
        "n": design.n,
        "b_z": _mat(design.b_z),
        "r_e": design.r_e,
        "mu_e": design.mu_e,
        "A_z": _mat(design.A_z),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_estimator(path, plant=None):
    doc = _load(path, ESTIMATOR_KIND)
    if plant is not None:
        _check_hash(doc, plant, path)
    try:
        return EstimatorDesign(
            b_z=np.array(doc["b_z"], dtype=float).reshape(-1),
            r_e=float(doc["r_e"]), mu_e=float(doc["mu_e"]),
            A_z=np.array(doc["A_z"], dtype=float),
        )
    except (KeyError, ValueError) as exc:
        raise ArtifactError(f"{path}: malformed estimator artifact: {exc}") from exc


def _load(path, kind):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"{path}: cannot read artifact: {exc}") from exc
    if doc.get("kind") != kind:
        raise ArtifactError(f"{path}: expected a {kind} artifact, got {doc.get('kind')!r}")
    return doc


def _check_hash(doc, plant, path):
    expected = plant_fingerprint(plant)
    if doc.get("plant_hash") != expected:
        raise ArtifactError(
            f"{path}: artifact was produced from a different plant "
            f"(hash {doc.get('plant_hash')!r} != {expected!r})")
